"""Simulated PSD via Welch averaging and analytic PSD evaluation for the
three continuity cases, plus slope fitting.

The analytic evaluators work in time units of the symbol period (T_s = 1,
beta1 = Tcp/Ts, beta2 = T_L/Ts) and frequency as f*Ts; the output grid is
labeled in Hz.  The spectral amplitude of one symbol is assembled from
closed-form Fourier transforms of the windowed basis signals:

    int f^(n+p)(t) g^(q-p)(t) e^(-j2pi f t) dt
        = e^(j2pi f beta1) sum_r (j2pi k_r)^(n+p) G_(q-p)(k_r - f Ts)

where G_q is the exact transform of the q-th Blackman half-window
derivative over its support.  This reproduces the printed per-case
spectral factors with their unit inconsistencies repaired; the Welch
periodogram of a simulated stream is the validation oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy import signal as sp_signal

from . import numerics
from .errors import CaseMismatchError, ConfigError, DimensionError, DomainError
from .waveform import SmootherContext, SystemConfig, random_qam

WELCH_SEGMENT = 2048
WELCH_OVERLAP = 512


@dataclass(frozen=True)
class PsdEstimate:
    """Frequency grid (Hz), values in dB relative to the in-band mean."""

    freqs_hz: np.ndarray
    values_db: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        f = np.asarray(self.freqs_hz, dtype=float)
        v = np.asarray(self.values_db, dtype=float)
        if f.shape != v.shape:
            raise DimensionError("frequency and value grids differ in shape")
        if np.any(np.diff(f) <= 0):
            raise DomainError("frequency grid must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise DomainError("PSD values must be finite")
        object.__setattr__(self, "freqs_hz", f)
        object.__setattr__(self, "values_db", v)


@dataclass(frozen=True)
class MonteCarloSpec:
    """Averaging depth of the analytic-PSD expectation."""

    realizations: int = 256
    symbols: int = 64

    def __post_init__(self):
        if self.realizations < 1 or self.symbols < 2:
            raise ConfigError("need realizations >= 1 and symbols >= 2")


def occupied_band_hz(cfg: SystemConfig) -> float:
    """One-sided edge of the occupied band in Hz."""
    return (np.max(np.abs(cfg.k_array)) + 0.5) * cfg.subcarrier_spacing_hz


def default_fgrid(cfg: SystemConfig, points: int = 2048) -> np.ndarray:
    """Linear grid spanning 3x the occupied bandwidth past each band edge."""
    bw = 2 * occupied_band_hz(cfg)
    grid = np.linspace(-3 * bw, 3 * bw, points)
    return grid[np.abs(grid) > 1e-6]


def _normalize_db(freqs_hz: np.ndarray, linear: np.ndarray,
                  cfg: SystemConfig) -> tuple[np.ndarray, dict]:
    eps = np.max(linear) * 1e-300 + 1e-300
    db = 10 * np.log10(np.maximum(linear, eps))
    inband = np.abs(freqs_hz) <= occupied_band_hz(cfg)
    meta = {}
    if np.any(inband):
        ref = 10 * np.log10(np.mean(linear[inband]))
        db = db - ref
        meta["inband_ref_db"] = float(ref)
    else:
        meta["inband_ref_db"] = None
    return db, meta


def _analytic_inband_reference(cfg: SystemConfig) -> float:
    """True in-band PSD level in the analytic evaluator's units.

    The derivative-domain identity behind the analytic cases is an
    out-of-band tool (its 1/f^q weight distorts the in-band shape), so
    the analytic curve is referenced against the exact in-band level of
    the data part, mean_f sum_k sinc^2((k - f Ts)(1 + beta1)) / T-hat.
    """
    k = cfg.k_array
    t_hat = 1.0 + cfg.Mcp / cfg.M
    f_hat = np.linspace(k.min(), k.max(), 512)
    vals = np.sum(np.sinc((k[None, :] - f_hat[:, None]) * t_hat) ** 2, axis=1)
    return float(np.mean(vals) / t_hat)


# ---------------------------------------------------------------------------
# Welch periodogram
# ---------------------------------------------------------------------------

def welch_psd(samples: np.ndarray, cfg: SystemConfig,
              segment: int = WELCH_SEGMENT,
              overlap: int = WELCH_OVERLAP) -> PsdEstimate:
    """Averaged windowed periodogram of a complex baseband stream.

    Hanning window, power-normalized; output in dB relative to the
    in-band average.
    """
    samples = np.asarray(samples, dtype=complex)
    if samples.size < segment:
        raise DimensionError(
            f"need at least {segment} samples, got {samples.size}")
    fs = 1.0 / cfg.sample_interval_s
    freqs, pxx = sp_signal.welch(samples, fs=fs, window="hann",
                                 nperseg=segment, noverlap=overlap,
                                 detrend=False, return_onesided=False,
                                 scaling="density")
    freqs = np.fft.fftshift(freqs)
    pxx = np.fft.fftshift(pxx)
    db, meta = _normalize_db(freqs, pxx, cfg)
    meta.update(segment=segment, overlap=overlap, window="hann",
                n_segments=1 + (samples.size - segment) // (segment - overlap))
    return PsdEstimate(freqs_hz=freqs, values_db=db, meta=meta)


# ---------------------------------------------------------------------------
# Closed-form window transforms
# ---------------------------------------------------------------------------

def _expm1_over_jx(x: np.ndarray, length: float) -> np.ndarray:
    """(exp(j x length) - 1) / (j x) with the x -> 0 limit handled."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x * length) < 1e-6
    safe = np.where(small, 1.0, x)
    out = (np.exp(1j * safe * length) - 1.0) / (1j * safe)
    series = length * (1.0 + 1j * x * length / 2.0 - (x * length) ** 2 / 6.0)
    return np.where(small, series, out)


def _window_transform(nu: np.ndarray, beta2: float, order: int) -> np.ndarray:
    """G_q(nu) = int_0^beta2 e^(j2pi nu tau) g^(q)(tau) dtau, Blackman half.

    g(tau) = 0.42 + 0.5 cos(pi tau/beta2) + 0.08 cos(2pi tau/beta2); each
    derivative shifts the cosine phases by a quarter period.
    """
    nu = np.asarray(nu, dtype=float)
    out = np.zeros(nu.shape, dtype=complex)
    if order == 0:
        out += 0.42 * _expm1_over_jx(2 * np.pi * nu, beta2)
    for amp, w in ((0.5, np.pi / beta2), (0.08, 2 * np.pi / beta2)):
        phase = order * np.pi / 2.0
        coeff = amp * w ** order
        # cos(w tau + phase) = (e^(j(w tau + phase)) + c.c.)/2
        out += 0.5 * coeff * (
            np.exp(1j * phase) * _expm1_over_jx(2 * np.pi * nu + w, beta2)
            + np.exp(-1j * phase) * _expm1_over_jx(2 * np.pi * nu - w, beta2))
    return out


# ---------------------------------------------------------------------------
# Analytic PSD, three continuity cases
# ---------------------------------------------------------------------------

def _case_matrices(cfg: SystemConfig, ctx: SmootherContext, fgrid_hz: np.ndarray,
                   q: int):
    """Data and smooth-signal spectral matrices for derivative order q.

    Returns (D, V): per-symbol amplitude A_i = D @ x_i + V @ c_i with
    c_i the normalized-time basis coefficients.
    """
    f_hat = np.asarray(fgrid_hz, dtype=float) / cfg.subcarrier_spacing_hz
    if np.any(np.abs(f_hat) < 1e-9):
        raise DomainError("frequency grid must exclude f = 0")
    k = cfg.k_array
    beta1 = cfg.Mcp / cfg.M
    beta2 = cfg.T_L / cfg.M
    t_hat = 1.0 + beta1
    f_r = k[None, :] - f_hat[:, None]
    denom = (1j * 2 * np.pi * f_hat) ** q

    sinc_term = np.sinc(f_r * (1 + beta1)) * np.exp(1j * np.pi * f_r * (1 - beta1))
    D = ((1j * 2 * np.pi * k[None, :]) ** q) * sinc_term / denom[:, None]

    head_phase = np.exp(2j * np.pi * f_hat * beta1)
    g_trans = {p: _window_transform(f_r, beta2, p) for p in range(q + 1)}
    V = np.zeros((f_hat.size, cfg.N + 1), dtype=complex)
    for n in range(cfg.N + 1):
        acc = np.zeros(f_hat.size, dtype=complex)
        for p in range(q + 1):
            weights = (1j * 2 * np.pi * k) ** (n + p)
            acc += comb(q, p) * (g_trans[q - p] @ weights)
        V[:, n] = head_phase * acc / (t_hat * denom)
    return D, V, f_hat, beta1, beta2, t_hat


def _normalized_coeff_scale(cfg: SystemConfig) -> np.ndarray:
    """Sample-unit coefficients b_n map to normalized time via M^-n."""
    return cfg.M ** (-np.arange(cfg.N + 1, dtype=float))


def _f_ladder_normalized(cfg: SystemConfig, t_hat: float,
                         max_order: int) -> np.ndarray:
    """f^(q)(t) = sum_r (j2pi k_r)^q e^(j2pi k_r (t + beta1)), q = 0..max."""
    k = cfg.k_array
    beta1 = cfg.Mcp / cfg.M
    phases = np.exp(2j * np.pi * k * (t_hat + beta1))
    return np.array([np.sum((1j * 2 * np.pi * k) ** q * phases)
                     for q in range(max_order + 1)])


def auxiliary_smoother_solver(cfg: SystemConfig):
    """Least-squares map from w's end-boundary derivatives to the auxiliary
    coefficients (normalized time), plus the end-derivative extraction
    matrix applied to normalized basis coefficients.

    Returns (solver, end_derivs, q1, q2): solver is N x (N-1) so that
    b~ = solver @ w_end, where w_end = end_derivs @ c_i holds the true
    product-rule derivatives w^(n-hat) at the window end for n-hat = 2..N.
    """
    N = cfg.N
    if N < 2:
        raise CaseMismatchError("auxiliary smoother requires N >= 2")
    beta1 = cfg.Mcp / cfg.M
    beta2 = cfg.T_L / cfg.M
    t_end = beta2 - beta1

    lad_ts = _f_ladder_normalized(cfg, 1.0, 2 * N - 2)
    lad_end = _f_ladder_normalized(cfg, t_end, 2 * N - 2)
    rows = np.arange(N - 1)
    cols = np.arange(N)
    q1 = lad_ts[rows[:, None] + cols[None, :]]
    q2 = lad_end[rows[:, None] + cols[None, :]]
    gram = q1.conj().T @ q1 + q2.conj().T @ q2
    solver = numerics.solve(gram, q2.conj().T, name="Q1^H Q1 + Q2^H Q2")

    # true end derivatives: w^(nh) = sum_n c_n sum_p C(nh,p) f^(n+p) g^(nh-p)
    lad_f = _f_ladder_normalized(cfg, t_end, 2 * N)
    end_derivs = np.zeros((N - 1, N + 1), dtype=complex)
    for nh in range(2, N + 1):
        for n in range(N + 1):
            acc = 0.0 + 0.0j
            for p in range(0, nh - 1):
                g_val = _blackman_end_derivative(beta2, nh - p)
                acc += comb(nh, p) * lad_f[n + p] * g_val
            end_derivs[nh - 2, n] = acc
    return solver, end_derivs, q1, q2


def _blackman_end_derivative(beta2: float, order: int) -> float:
    """g^(order) at the falling-half end (normalized time)."""
    return float(numerics.blackman_derivative(2 * beta2, beta2, order))


def _psd_montecarlo(cfg: SystemConfig, ctx: SmootherContext,
                    fgrid_hz: np.ndarray, mc: MonteCarloSpec,
                    rng: np.random.Generator, q: int,
                    with_auxiliary: bool) -> np.ndarray:
    """E|sum_i e^(-j2pi f i T) A_i|^2 / (U T), averaged over realizations."""
    D, V, f_hat, beta1, beta2, t_hat = _case_matrices(cfg, ctx, fgrid_hz, q)
    scale = _normalized_coeff_scale(cfg)

    W34 = None
    end_map = None
    if with_auxiliary:
        solver, end_derivs, _, _ = auxiliary_smoother_solver(cfg)
        k = cfg.k_array
        f_r = k[None, :] - f_hat[:, None]
        span = 1.0 - beta2 + beta1
        tail_int = span * np.sinc(f_r * span) \
            * np.exp(1j * np.pi * f_r * (1 + beta2 - beta1))
        denom_hi = (1j * 2 * np.pi * f_hat) ** q
        denom_lo = (1j * 2 * np.pi * f_hat) ** 2
        W34 = np.zeros((f_hat.size, cfg.N - 1), dtype=complex)
        for nh in range(2, cfg.N + 1):
            acc = np.zeros(f_hat.size, dtype=complex)
            for n in range(cfg.N):
                w_hi = (1j * 2 * np.pi * k) ** (n + cfg.N - 1)
                w_lo = (1j * 2 * np.pi * k) ** n
                col = tail_int @ w_hi / denom_hi - tail_int @ w_lo / denom_lo
                acc += solver[n, nh - 2] * col
            W34[:, nh - 2] = acc / t_hat
        end_map = end_derivs

    phases = np.exp(-2j * np.pi * np.outer(f_hat * t_hat,
                                           np.arange(mc.symbols)))
    acc = np.zeros(f_hat.size)
    for r in range(mc.realizations):
        data = random_qam(rng, (mc.symbols + 1, cfg.K), cfg.qam_order)
        x_cur = data[1:].T                       # (K, U)
        b = ctx.a @ data[:-1].T - ctx.b @ x_cur  # (N+1, U)
        c = b * scale[:, None]
        A = D @ x_cur + V @ c
        if W34 is not None:
            A = A + W34 @ (end_map @ c)
        s = np.sum(phases * A, axis=1)
        acc += np.abs(s) ** 2
    return acc / (mc.realizations * mc.symbols * t_hat)


def _finalize_analytic(fgrid_hz, linear, cfg, mc, tag) -> PsdEstimate:
    ref = _analytic_inband_reference(cfg)
    eps = np.max(linear) * 1e-300 + 1e-300
    db = 10 * np.log10(np.maximum(linear, eps) / ref)
    meta = {"case": tag, "realizations": mc.realizations,
            "symbols": mc.symbols, "inband_ref_db": float(10 * np.log10(ref))}
    return PsdEstimate(np.asarray(fgrid_hz, float), db, meta)


def analytic_psd_case0(fgrid_hz: np.ndarray, cfg: SystemConfig,
                       ctx: SmootherContext, mc: MonteCarloSpec,
                       rng: np.random.Generator) -> PsdEstimate:
    """Continuity of the signal only: first-derivative spectral amplitude."""
    if cfg.N != 0:
        raise CaseMismatchError(f"case 0 requires N = 0, got N = {cfg.N}")
    linear = _psd_montecarlo(cfg, ctx, fgrid_hz, mc, rng, q=1,
                             with_auxiliary=False)
    return _finalize_analytic(fgrid_hz, linear, cfg, mc, "analytic-N0")


def analytic_psd_case1(fgrid_hz: np.ndarray, cfg: SystemConfig,
                       ctx: SmootherContext, mc: MonteCarloSpec,
                       rng: np.random.Generator) -> PsdEstimate:
    """First-order continuity: second-derivative spectral amplitude."""
    if cfg.N != 1:
        raise CaseMismatchError(f"case 1 requires N = 1, got N = {cfg.N}")
    linear = _psd_montecarlo(cfg, ctx, fgrid_hz, mc, rng, q=2,
                             with_auxiliary=False)
    return _finalize_analytic(fgrid_hz, linear, cfg, mc, "analytic-N1")


def analytic_psd_caseN(fgrid_hz: np.ndarray, cfg: SystemConfig,
                       ctx: SmootherContext, mc: MonteCarloSpec,
                       rng: np.random.Generator) -> PsdEstimate:
    """N >= 2: auxiliary smoother removes the window-end discontinuity."""
    if cfg.N < 2:
        raise CaseMismatchError(f"case N requires N >= 2, got N = {cfg.N}")
    linear = _psd_montecarlo(cfg, ctx, fgrid_hz, mc, rng, q=cfg.N + 1,
                             with_auxiliary=True)
    return _finalize_analytic(fgrid_hz, linear, cfg, mc, f"analytic-N{cfg.N}")


def analytic_psd(fgrid_hz, cfg, ctx, mc, rng) -> PsdEstimate:
    """Dispatch on the configured continuity order."""
    if cfg.N == 0:
        return analytic_psd_case0(fgrid_hz, cfg, ctx, mc, rng)
    if cfg.N == 1:
        return analytic_psd_case1(fgrid_hz, cfg, ctx, mc, rng)
    return analytic_psd_caseN(fgrid_hz, cfg, ctx, mc, rng)


# ---------------------------------------------------------------------------
# Slope fitting and spectrum comparison
# ---------------------------------------------------------------------------

def fit_slope(psd: PsdEstimate, f_lo: float, f_hi: float,
              band_edge_hz: float = 0.0) -> float:
    """OLS slope in dB/decade of value vs log10(f - band_edge) on [f_lo, f_hi]."""
    f = psd.freqs_hz
    mask = (f >= f_lo) & (f <= f_hi) & (f > band_edge_hz)
    if np.count_nonzero(mask) < 10:
        raise DimensionError("need at least 10 grid points inside [f_lo, f_hi]")
    x = np.log10(f[mask] - band_edge_hz)
    y = psd.values_db[mask]
    coeffs = np.polyfit(x, y, 1)
    return float(coeffs[0])


def band_average_db(psd: PsdEstimate, f_lo: float, f_hi: float,
                    n_bins: int) -> np.ndarray:
    """Linear-domain average of the PSD over n_bins equal bins of [f_lo, f_hi]."""
    edges = np.linspace(f_lo, f_hi, n_bins + 1)
    linear = 10 ** (psd.values_db / 10.0)
    out = np.full(n_bins, np.nan)
    for i in range(n_bins):
        m = (psd.freqs_hz >= edges[i]) & (psd.freqs_hz < edges[i + 1])
        if np.any(m):
            out[i] = 10 * np.log10(np.mean(linear[m]))
    return out
