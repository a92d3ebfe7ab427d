"""Receiver chain: CP removal + DFT, LS channel estimation, ZF equalization,
and empirical BER/SINR measurement."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics
from .channel import ComplexSignal
from .errors import DimensionError, EstimationError
from .waveform import SystemConfig, qam_demap

ZF_FADE_FLOOR = 1e-12


@dataclass(frozen=True)
class ReceivedSymbol:
    """Active-bin values of one demodulated symbol plus an optional estimate."""

    bins: np.ndarray
    channel_estimate: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "bins", np.asarray(self.bins, dtype=complex))
        if self.channel_estimate is not None:
            est = np.asarray(self.channel_estimate, dtype=complex)
            if est.shape != self.bins.shape:
                raise DimensionError("channel estimate shape mismatch")
            object.__setattr__(self, "channel_estimate", est)


def demodulate(rx: ComplexSignal, symbol_index: int,
               cfg: SystemConfig) -> ReceivedSymbol:
    """Drop the CP, apply the 1/M-normalized DFT, extract the active bins."""
    start = symbol_index * cfg.symbol_span + cfg.Mcp
    if symbol_index < 0 or start + cfg.M > len(rx):
        raise DimensionError(
            f"symbol index {symbol_index} out of range for stream of "
            f"{len(rx)} samples")
    window = rx.samples[start:start + cfg.M]
    spectrum = numerics.dft(window, cfg.M)
    idx = np.mod(cfg.subcarriers, cfg.M)
    return ReceivedSymbol(bins=spectrum[idx])


def ls_estimate(ref_rx: ReceivedSymbol, ref_tx: np.ndarray) -> np.ndarray:
    """Least-squares per-bin channel estimate H_hat = R / x_ref."""
    x = np.asarray(ref_tx, dtype=complex)
    if x.shape != ref_rx.bins.shape:
        raise DimensionError("reference data shape mismatch")
    if np.any(np.abs(x) < 1e-15):
        raise EstimationError("reference symbol has (near-)zero bins")
    return ref_rx.bins / x


def zf_equalize(rx: ReceivedSymbol) -> tuple[np.ndarray, np.ndarray]:
    """Zero-forcing x_hat = R / H_hat per bin.

    Bins whose estimate magnitude is below ``ZF_FADE_FLOOR`` are flagged
    (boolean mask in the second return) and passed through unequalized.
    """
    if rx.channel_estimate is None:
        raise EstimationError("no channel estimate attached to the symbol")
    h = rx.channel_estimate
    flagged = np.abs(h) < ZF_FADE_FLOOR
    safe = np.where(flagged, 1.0, h)
    return rx.bins / safe, flagged


def hard_decide_bits(equalized: np.ndarray, J: int) -> np.ndarray:
    """Minimum-distance hard demapping to bits."""
    return qam_demap(equalized, J)


def measure_ber(tx_bits: np.ndarray, rx_bits: np.ndarray) -> float:
    tx_bits = np.asarray(tx_bits).ravel()
    rx_bits = np.asarray(rx_bits).ravel()
    if tx_bits.shape != rx_bits.shape:
        raise DimensionError("bit streams differ in length")
    return float(np.mean(tx_bits != rx_bits))


def measure_sinr(tx: np.ndarray, rx: np.ndarray, h: np.ndarray) -> float:
    """Empirical average SINR (dB) from stacked trials, shape (n, K) each.

    Signal power uses the known transmit data through the true channel,
    interference-plus-noise is the residual rx - h*tx; both are averaged
    per bin before the ratio, then the per-bin SINRs are averaged.
    """
    tx, rx, h = (np.atleast_2d(np.asarray(v, dtype=complex)) for v in (tx, rx, h))
    if not tx.shape == rx.shape == h.shape:
        raise DimensionError("tx, rx, h must share one (n_trials, K) shape")
    sig = np.mean(np.abs(h * tx) ** 2, axis=0)
    resid = np.mean(np.abs(rx - h * tx) ** 2, axis=0)
    return float(10 * np.log10(np.mean(sig / resid)))


def measure_sinr_conditional(tx: np.ndarray, rx_noiseless: np.ndarray,
                             h: np.ndarray, noise_var_bin: float) -> float:
    """Average SINR (dB) matching the analytic definition E{gamma_(i,k)}.

    The interference power is measured per bin from the noise-free
    residual, then each (trial, bin) contributes the conditional ratio
    |h|^2 / (|h|^2 * W_k + noise_var_bin), which is averaged over trials
    and bins.  ``rx_noiseless`` must come from a noise-free simulation;
    the noise enters through its known per-bin variance.
    """
    tx, rx, h = (np.atleast_2d(np.asarray(v, dtype=complex))
                 for v in (tx, rx_noiseless, h))
    if not tx.shape == rx.shape == h.shape:
        raise DimensionError("tx, rx, h must share one (n_trials, K) shape")
    w_pow = np.mean(np.abs(rx - h * tx) ** 2, axis=0)
    alpha = np.abs(h) ** 2
    gamma = alpha / (alpha * w_pow[None, :] + noise_var_bin)
    return float(10 * np.log10(np.mean(gamma)))
