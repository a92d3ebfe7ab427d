"""Tapped-delay-line Rayleigh fading, AWGN, and timing/frequency impairments.

Tap gains are i.i.d. zero-mean complex Gaussian, constant over one OFDM
symbol and redrawn per symbol (block fading); tap delays snap to the
nearest sample of the working rate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DimensionError
from .waveform import SystemConfig

# 3GPP Extended Vehicular A power-delay profile.
EVA_DELAYS_NS = (0.0, 30.0, 150.0, 310.0, 370.0, 710.0, 1090.0, 1730.0, 2510.0)
EVA_POWERS_DB = (0.0, -1.5, -1.4, -3.6, -0.6, -9.1, -7.0, -12.0, -16.9)


@dataclass(frozen=True)
class ComplexSignal:
    """Time-domain buffer of complex samples with its sampling interval."""

    samples: np.ndarray
    sample_interval_s: float

    def __post_init__(self):
        object.__setattr__(self, "samples",
                           np.asarray(self.samples, dtype=complex))

    def __len__(self) -> int:
        return self.samples.size


@dataclass(frozen=True)
class ChannelProfile:
    """Static power-delay profile: tap delays (seconds) and linear powers."""

    delays_s: tuple[float, ...]
    powers: tuple[float, ...]
    normalize: bool = True

    def __post_init__(self):
        d = np.asarray(self.delays_s, dtype=float)
        p = np.asarray(self.powers, dtype=float)
        if d.shape != p.shape or d.size == 0:
            raise ConfigError("delays and powers must be equal-length, non-empty")
        if d[0] != 0.0 or np.any(np.diff(d) <= 0):
            raise ConfigError("delays must be strictly increasing with tau_1 = 0")
        if np.any(p < 0):
            raise ConfigError("tap powers must be non-negative")
        if self.normalize:
            p = p / np.sum(p)
        object.__setattr__(self, "delays_s", tuple(d))
        object.__setattr__(self, "powers", tuple(p))

    @property
    def n_taps(self) -> int:
        return len(self.delays_s)

    @property
    def power_array(self) -> np.ndarray:
        return np.asarray(self.powers, dtype=float)

    def delays_samples(self, cfg: SystemConfig) -> np.ndarray:
        """Tap delays rounded to working-rate sample instants."""
        return np.round(np.asarray(self.delays_s) / cfg.sample_interval_s
                        ).astype(int)


def eva_profile(normalize: bool = True) -> ChannelProfile:
    """The 9-tap EVA profile, dB powers converted to linear."""
    powers = tuple(10.0 ** (db / 10.0) for db in EVA_POWERS_DB)
    return ChannelProfile(delays_s=tuple(d * 1e-9 for d in EVA_DELAYS_NS),
                          powers=powers, normalize=normalize)


def single_tap_profile() -> ChannelProfile:
    """Flat (frequency-nonselective) channel."""
    return ChannelProfile(delays_s=(0.0,), powers=(1.0,), normalize=True)


def profile_from_json(source) -> ChannelProfile:
    """Load {"taps":[{"delay_ns":..,"power_db":..},..],"normalize":..}."""
    if isinstance(source, (str, Path)):
        doc = json.loads(Path(source).read_text(encoding="utf-8"))
    else:
        doc = source
    unknown = set(doc) - {"taps", "normalize"}
    if unknown:
        raise ConfigError(f"unknown channel profile keys: {sorted(unknown)}")
    taps = doc.get("taps")
    if not taps:
        raise ConfigError("channel profile needs a non-empty 'taps' list")
    delays, powers = [], []
    for i, tap in enumerate(taps):
        extra = set(tap) - {"delay_ns", "power_db"}
        if extra:
            raise ConfigError(f"tap {i}: unknown keys {sorted(extra)}")
        delays.append(float(tap["delay_ns"]) * 1e-9)
        powers.append(10.0 ** (float(tap["power_db"]) / 10.0))
    return ChannelProfile(delays_s=tuple(delays), powers=tuple(powers),
                          normalize=bool(doc.get("normalize", True)))


@dataclass(frozen=True)
class ChannelRealization:
    """Per-symbol complex tap gains, shape (n_symbols, n_taps)."""

    gains: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "gains", np.asarray(self.gains, dtype=complex))


def realize(profile: ChannelProfile, symbol_count: int,
            rng: np.random.Generator, hold_blocks: int = 1) -> ChannelRealization:
    """Draw i.i.d. complex Gaussian gains with per-tap variance sigma_l^2.

    ``hold_blocks`` > 1 keeps the gains constant over that many consecutive
    symbols (the adjacency assumption used by the imperfect-sync analysis).
    """
    if symbol_count < 1:
        raise ConfigError("symbol_count must be >= 1")
    n_draws = -(-symbol_count // hold_blocks)
    std = np.sqrt(profile.power_array / 2.0)
    g = (rng.standard_normal((n_draws, profile.n_taps))
         + 1j * rng.standard_normal((n_draws, profile.n_taps))) * std
    g = np.repeat(g, hold_blocks, axis=0)[:symbol_count]
    return ChannelRealization(gains=g)


def apply_channel(signal: ComplexSignal, realization: ChannelRealization,
                  profile: ChannelProfile, cfg: SystemConfig) -> ComplexSignal:
    """Sum of delayed, per-symbol-gain-weighted copies of the stream.

    Sample index i*span..(i+1)*span-1 of the input is taken to belong to
    symbol i; samples beyond the last full symbol (the terminal smooth
    block) reuse the final symbol's gains.
    """
    theta = profile.delays_samples(cfg)
    if np.any(theta * cfg.sample_interval_s > (cfg.Mcp + cfg.M / 4) * cfg.sample_interval_s):
        raise ConfigError("tap delay exceeds the supported excess beyond the CP")
    x = signal.samples
    gains = realization.gains
    span = cfg.symbol_span
    sym_idx = np.minimum(np.arange(x.size) // span, gains.shape[0] - 1)
    out = np.zeros(x.size + int(theta.max()), dtype=complex)
    for l in range(profile.n_taps):
        out[theta[l]:theta[l] + x.size] += gains[sym_idx, l] * x
    return ComplexSignal(out, signal.sample_interval_s)


def frequency_response(realization: ChannelRealization, profile: ChannelProfile,
                       cfg: SystemConfig) -> np.ndarray:
    """Per-symbol frequency response on the active bins, (n_symbols, K)."""
    theta = profile.delays_samples(cfg)
    k = cfg.k_array
    phase = np.exp(-2j * np.pi * np.outer(k, theta) / cfg.M)
    return realization.gains @ phase.T


@dataclass(frozen=True)
class Impairments:
    """Receiver-side symbol-time offset, carrier-frequency offset, and noise."""

    sto_s: float = 0.0
    cfo_hz: float = 0.0
    noise_var: float = 0.0

    def sto_samples(self, cfg: SystemConfig) -> int:
        raw = self.sto_s / cfg.sample_interval_s
        snapped = round(raw)
        if abs(raw - snapped) > 1e-6:
            raise ConfigError(
                f"STO {self.sto_s} s is not a whole sample at the working rate; "
                "synthesize at a higher oversampling factor")
        return int(snapped)

    def cfo_normalized(self, cfg: SystemConfig) -> float:
        """CFO as a fraction of the subcarrier spacing."""
        return self.cfo_hz / cfg.subcarrier_spacing_hz


def awgn(samples: np.ndarray, noise_var: float,
         rng: np.random.Generator) -> np.ndarray:
    """Add complex AWGN with per-sample variance E|n|^2 = noise_var."""
    if noise_var < 0:
        raise ConfigError("noise variance must be >= 0")
    if noise_var == 0:
        return samples
    n = (rng.standard_normal(samples.shape)
         + 1j * rng.standard_normal(samples.shape)) * np.sqrt(noise_var / 2.0)
    return samples + n


def apply_impairments(signal: ComplexSignal, imp: Impairments,
                      cfg: SystemConfig,
                      rng: np.random.Generator | None = None) -> ComplexSignal:
    """Shift the time origin by the STO, apply the CFO phase ramp, add noise.

    The CFO phasor rides the transmitted signal's own timebase (a single
    continuous ramp across the whole stream), then the stream is read
    ``sto`` samples late.
    """
    n_sto = imp.sto_samples(cfg)
    x = signal.samples
    eps = imp.cfo_normalized(cfg)
    if eps != 0.0:
        x = x * np.exp(2j * np.pi * eps * np.arange(x.size) / cfg.M)
    if n_sto != 0:
        out = np.zeros_like(x)
        if n_sto > 0:
            out[: x.size - n_sto] = x[n_sto:]
        else:
            out[-n_sto:] = x[: x.size + n_sto]
        x = out
    if imp.noise_var > 0:
        if rng is None:
            raise ConfigError("rng required when noise_var > 0")
        x = awgn(x, imp.noise_var, rng)
    return ComplexSignal(x, signal.sample_interval_s)
