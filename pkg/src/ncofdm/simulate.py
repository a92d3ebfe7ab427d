"""Monte-Carlo link simulations used as oracles for the closed forms and
as the measurement side of the experiment runner.

Every routine draws its randomness from an explicit generator so that a
master seed plus structured sub-stream indices reproduces any run exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import receiver as rcv
from .channel import (ChannelProfile, ChannelRealization, ComplexSignal,
                      apply_channel, awgn, frequency_response, realize)
from .errors import ConfigError
from .waveform import (SmootherContext, SystemConfig, assemble_stream,
                       ofdm_modulate, qam_demap, random_qam, smooth_signal)


# ---------------------------------------------------------------------------
# Perfect-sync interference and SINR measurement
# ---------------------------------------------------------------------------

def measure_interference_bins(ctx: SmootherContext, profile: ChannelProfile,
                              cfg: SystemConfig, n_trials: int,
                              rng: np.random.Generator):
    """Stacked (x, rx_bins, h_bins) from the noise-free fading chain.

    Each trial modulates three symbols, passes the smoothed stream through
    an independent block-fading realization, and demodulates the middle
    symbol; rx - h*x is the physical smooth-signal leakage.
    """
    xs = np.empty((n_trials, cfg.K), dtype=complex)
    rxs = np.empty((n_trials, cfg.K), dtype=complex)
    hs = np.empty((n_trials, cfg.K), dtype=complex)
    for t in range(n_trials):
        data = random_qam(rng, (3, cfg.K), cfg.qam_order)
        stream = assemble_stream(data, ctx, cfg)
        real = realize(profile, 3, rng)
        rx_sig = apply_channel(ComplexSignal(stream, cfg.sample_interval_s),
                               real, profile, cfg)
        h = frequency_response(real, profile, cfg)
        sym = rcv.demodulate(rx_sig, 1, cfg)
        xs[t] = data[1]
        rxs[t] = sym.bins
        hs[t] = h[1]
    return xs, rxs, hs


def simulated_average_sinr_db(ctx: SmootherContext, profile: ChannelProfile,
                              cfg: SystemConfig, noise_var: float,
                              n_trials: int, rng: np.random.Generator) -> float:
    """Monte-Carlo counterpart of the closed-form average SINR."""
    xs, rxs, hs = measure_interference_bins(ctx, profile, cfg, n_trials, rng)
    return rcv.measure_sinr_conditional(xs, rxs, hs, noise_var / cfg.M)


# ---------------------------------------------------------------------------
# Uncoded BER over the fading channel
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BerTrialResult:
    bit_errors: int
    bits: int

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits if self.bits else 0.0


def simulate_ber(ctx: SmootherContext | None, profile: ChannelProfile,
                 cfg: SystemConfig, noise_var: float, n_symbols: int,
                 rng: np.random.Generator,
                 use_ls_estimate: bool = False) -> BerTrialResult:
    """ZF-equalized hard-decision BER through block-fading EVA + AWGN.

    With ``use_ls_estimate`` the first of each two symbols is a known
    reference used for LS channel estimation (held for the next symbol);
    otherwise the true per-symbol response is used (perfect estimation)
    and every symbol carries payload.
    """
    bits_per = cfg.bits_per_symbol
    errors = 0
    bits_total = 0
    group = 4
    for start in range(0, n_symbols, group):
        n_sym = min(group, n_symbols - start)
        bits = rng.integers(0, 2, size=(n_sym, cfg.K * bits_per))
        data = np.array([np.asarray(
            _map_bits(bits[i], cfg)) for i in range(n_sym)])
        stream = assemble_stream(data, ctx, cfg)
        real = realize(profile, n_sym, rng)
        rx_sig = apply_channel(ComplexSignal(stream, cfg.sample_interval_s),
                               real, profile, cfg)
        samples = awgn(rx_sig.samples, noise_var, rng)
        rx_sig = ComplexSignal(samples, rx_sig.sample_interval_s)
        h_true = frequency_response(real, profile, cfg)
        h_hold = None
        for i in range(n_sym):
            sym = rcv.demodulate(rx_sig, i, cfg)
            if use_ls_estimate:
                if i % 2 == 0:
                    h_hold = rcv.ls_estimate(sym, data[i])
                    continue  # reference symbol carries no payload
                est = h_hold
            else:
                est = h_true[i]
            eq, _ = rcv.zf_equalize(rcv.ReceivedSymbol(sym.bins, est))
            decided = qam_demap(eq, cfg.qam_order)
            errors += int(np.sum(decided != bits[i]))
            bits_total += bits[i].size
    return BerTrialResult(bit_errors=errors, bits=bits_total)


def _map_bits(bits: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    from .waveform import qam_map
    return qam_map(bits, cfg.qam_order)


# ---------------------------------------------------------------------------
# Imperfect synchronization: windowed-power oracle for the three cases
# ---------------------------------------------------------------------------

def simulate_sync_case(case: int, ctx: SmootherContext, cfg: SystemConfig,
                       profile: ChannelProfile, delta1: int, delta2: float,
                       n_trials: int, rng: np.random.Generator):
    """Time-domain signal and interference energies for one sync case.

    Returns (signal_energy, interference_energy) per symbol window,
    averaged over trials, in sample-time units; the closed-form SINR
    then is K*M / (interference + noise_var*M).

    delta1 is the offset magnitude in whole samples (late for Case I,
    early for Cases II and III); delta2 is the CFO normalized to the
    subcarrier spacing.  The channel realization is held constant over
    the three simulated symbols, matching the adjacency assumption of
    the analysis.
    """
    if case not in (1, 2, 3):
        raise ConfigError("case must be 1, 2, or 3")
    theta = profile.delays_samples(cfg)
    span = cfg.symbol_span
    offset = delta1 if case == 1 else -delta1
    sig_e = 0.0
    int_e = 0.0
    for _ in range(n_trials):
        data = random_qam(rng, (3, cfg.K), cfg.qam_order)
        stream = assemble_stream(data, ctx, cfg)
        gains = realize(profile, 1, rng).gains[0]
        s_i0 = span + cfg.Mcp
        # CFO phasor referenced to each symbol's own epoch, matching the
        # per-symbol phase convention of the analytic interference model.
        local_t = np.mod(np.arange(stream.size), span) - cfg.Mcp
        ramp = np.exp(2j * np.pi * delta2 * local_t / cfg.M)
        tx = stream * ramp
        rx = np.zeros(stream.size + int(theta.max()), dtype=complex)
        for th, g in zip(theta, gains):
            rx[th:th + stream.size] += g * tx
        a0 = s_i0 + offset
        window = rx[a0:a0 + cfg.M]

        body = ofdm_modulate(data[1], cfg)[cfg.Mcp:]
        t_idx = np.arange(cfg.M)
        ref = np.zeros(cfg.M, dtype=complex)
        for th, g in zip(theta, gains):
            u = t_idx + offset - th
            ref += g * body[np.mod(u, cfg.M)] * np.exp(2j * np.pi * delta2 * u / cfg.M)
        sig_e += float(np.sum(np.abs(ref) ** 2))
        int_e += float(np.sum(np.abs(window - ref) ** 2))
    return sig_e / n_trials, int_e / n_trials


def simulated_case_sinr_db(case: int, ctx: SmootherContext, cfg: SystemConfig,
                           profile: ChannelProfile, delta1: int, delta2: float,
                           noise_var: float, n_trials: int,
                           rng: np.random.Generator) -> float:
    sig_e, int_e = simulate_sync_case(case, ctx, cfg, profile, delta1, delta2,
                                      n_trials, rng)
    return float(10 * np.log10(sig_e / (int_e + noise_var * cfg.M)))
