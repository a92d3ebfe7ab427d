"""Closed-form SINR, BER, Eb/N0 and complexity expressions, each paired
with an independent oracle in the test suite.

Conventions: time quantities are in sample units (symbol body M samples,
CP Mcp samples); carrier frequency offsets are normalized to the
subcarrier spacing; noise_var is the per-sample complex noise variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import special
from scipy.integrate import quad

from . import numerics
from .channel import ChannelProfile
from .errors import CaseMismatchError, ConfigError, ConvergenceError, DomainError
from .waveform import SmootherContext, SystemConfig, window_value

# Joint exponent budget keeping the alternating BER series inside double
# precision: the endpoint is chosen where a*g + c*g/(1-2s^2 g) reaches it.
_SERIES_BUDGET = 20.0


# ---------------------------------------------------------------------------
# Smooth-signal interference power (perfect synchronization)
# ---------------------------------------------------------------------------

def tail_offsets(profile: ChannelProfile, cfg: SystemConfig) -> np.ndarray:
    """theta_l = round(tau_l / T_samp) + L - Mcp, clipped to [0, L]."""
    raw = profile.delays_samples(cfg) + cfg.L - cfg.Mcp
    return np.clip(raw, 0, cfg.L)


def u_matrix(profile: ChannelProfile, cfg: SystemConfig) -> np.ndarray:
    """The M x L tail-selection matrix summed over channel paths."""
    U = np.zeros((cfg.M, cfg.L))
    for th in tail_offsets(profile, cfg):
        if th > 0:
            U[np.arange(th), np.arange(cfg.L - th, cfg.L)] += 1.0
    return U


@dataclass(frozen=True)
class InterferenceModel:
    """Per-subcarrier smooth-signal interference variances and tap offsets."""

    sigma_w_sq: np.ndarray   # (K,) with E|W_k|^2 = 2 sigma_w_sq
    theta: np.ndarray        # per-tap sample offsets into the DFT window

    def __post_init__(self):
        object.__setattr__(self, "sigma_w_sq",
                           np.asarray(self.sigma_w_sq, dtype=float))
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=int))
        if np.any(self.sigma_w_sq < 0):
            raise DomainError("interference variances must be >= 0")


def _tail_spectrum_power(ctx: SmootherContext, cfg: SystemConfig,
                         thetas_and_weights) -> np.ndarray:
    """sum_l w_l |F_k U_l C|^2 row power on the active bins, C = Q_f [A|B]."""
    C = ctx.q_f @ np.hstack([ctx.a, ctx.b])
    idx = np.mod(cfg.subcarriers, cfg.M)
    out = np.zeros(cfg.K)
    for th, weight, coherent_buf in thetas_and_weights:
        if th <= 0:
            continue
        if coherent_buf is None:
            buf = np.zeros((cfg.M, C.shape[1]), dtype=complex)
            buf[:th] = C[cfg.L - th:]
            spec = np.fft.fft(buf, axis=0) / cfg.M
            out += weight * np.sum(np.abs(spec[idx, :]) ** 2, axis=1)
        else:
            coherent_buf[:th] += C[cfg.L - th:]
    return out


def smooth_interference_power(ctx: SmootherContext, profile: ChannelProfile,
                              cfg: SystemConfig) -> InterferenceModel:
    """Per-subcarrier sigma_w_sq with path powers weighting each delayed tail.

    E|W_k|^2 = 2 sigma_w_sq = sum_l sigma_l^2 ||F_k U_l Q_f P_f^-1 [P1|P1 Phi]||^2.
    Carrying the per-path gain statistics through the tail sum removes the
    cross-path terms; the fully coherent printed variant is available as
    :func:`smooth_interference_power_coherent` and overestimates the
    physical leakage whenever several taps exceed the CP margin.
    """
    theta = tail_offsets(profile, cfg)
    items = [(int(th), float(p), None)
             for th, p in zip(theta, profile.power_array)]
    power = _tail_spectrum_power(ctx, cfg, items)
    return InterferenceModel(sigma_w_sq=0.5 * power, theta=theta)


def smooth_interference_power_coherent(ctx: SmootherContext,
                                       profile: ChannelProfile,
                                       cfg: SystemConfig) -> InterferenceModel:
    """Literal unweighted coherent tail sum over paths (printed U form)."""
    theta = tail_offsets(profile, cfg)
    C = ctx.q_f @ np.hstack([ctx.a, ctx.b])
    buf = np.zeros((cfg.M, C.shape[1]), dtype=complex)
    for th in theta:
        if th > 0:
            buf[:th] += C[cfg.L - th:]
    idx = np.mod(cfg.subcarriers, cfg.M)
    spec = np.fft.fft(buf, axis=0) / cfg.M
    power = np.sum(np.abs(spec[idx, :]) ** 2, axis=1)
    return InterferenceModel(sigma_w_sq=0.5 * power, theta=theta)


def per_bit_snr_noise_var(snr_db: float, cfg: SystemConfig) -> float:
    """Noise variance giving the stated per-bit SNR on plain OFDM bins.

    Per-bin SNR is M/sigma_n^2 for unit-power data; per-bit divides by
    the bits per constellation symbol.
    """
    return cfg.M / (np.log2(cfg.qam_order) * 10 ** (snr_db / 10.0))


def instantaneous_sinr(h: complex, sigma_w_sq: float, noise_var: float,
                       cfg: SystemConfig) -> float:
    """gamma = |H|^2 / (2 sigma_w^2 |H|^2 + sigma_n^2 / M)."""
    if sigma_w_sq == 0.0 and noise_var == 0.0:
        raise DomainError("need sigma_w_sq > 0 or noise_var > 0")
    alpha = abs(h) ** 2
    return alpha / (2.0 * sigma_w_sq * alpha + noise_var / cfg.M)


def _exp_scaled_e1(c: float) -> float:
    """e^c E1(c), overflow-safe."""
    if c <= 0:
        raise DomainError("argument must be positive")
    if c < 50.0:
        return float(np.exp(c) * special.exp1(c))
    # asymptotic series sum_k (-1)^k k! / c^(k+1)
    acc, term = 0.0, 1.0 / c
    for k in range(1, 18):
        acc += term
        term *= -k / c
    return acc


def mean_exponential_ratio(a: float, b: float, mean_alpha: float = 1.0) -> float:
    """E{alpha / (a*alpha + b)} for exponential alpha with the given mean."""
    if b <= 0:
        raise DomainError("b must be positive")
    if a == 0.0:
        return mean_alpha / b
    c = b / (a * mean_alpha)
    return (1.0 - c * _exp_scaled_e1(c)) / a


def average_sinr_db(sigma_w_sq: np.ndarray, noise_var: float,
                    cfg: SystemConfig, mean_alpha: float = 1.0) -> float:
    """(1/K) sum_k E{gamma_k} over Rayleigh |H|^2, in dB."""
    sigma_w_sq = np.asarray(sigma_w_sq, dtype=float)
    vals = [mean_exponential_ratio(2.0 * s, noise_var / cfg.M, mean_alpha)
            for s in sigma_w_sq]
    return float(10 * np.log10(np.mean(vals)))


# ---------------------------------------------------------------------------
# SINR distribution and BER under perfect synchronization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BerSeriesParams:
    """Inputs of the closed-form BER series for one subcarrier."""

    J: int
    sigma_w_sq: float
    sigma_n_sq: float
    m_dft: int
    mean_alpha: float = 1.0
    epsilon: float = 1e-6
    v1_max: int = 400
    v2_max: int = 400

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise ConfigError("epsilon must be in (0, 1)")
        if self.sigma_w_sq < 0 or self.sigma_n_sq <= 0:
            raise ConfigError("need sigma_w_sq >= 0 and sigma_n_sq > 0")
        side = math.isqrt(self.J)
        if side * side != self.J or side & (side - 1):
            raise ConfigError(f"J={self.J} is not a square power-of-two QAM size")
        if self.v1_max < 8 or self.v2_max < 8:
            raise ConfigError("truncation orders must be >= 8")

    @property
    def sigma_minus(self) -> float:
        """Upper endpoint (1 - eps) / (2 sigma_w^2) of the SINR support."""
        if self.sigma_w_sq == 0.0:
            return np.inf
        return (1.0 - self.epsilon) / (2.0 * self.sigma_w_sq)

    @property
    def noise_rate(self) -> float:
        """c = sigma_n^2 / (M E{alpha}), the exponential rate in gamma."""
        return self.sigma_n_sq / (self.m_dft * self.mean_alpha)


def sinr_pdf(gamma, params: BerSeriesParams):
    """Density of the instantaneous SINR (positive on [0, 1/(2 sigma_w^2)))."""
    g = np.asarray(gamma, dtype=float)
    s2 = 2.0 * params.sigma_w_sq
    c = params.noise_rate
    inside = (g >= 0) & (s2 * g < 1.0)
    denom = np.where(inside, (1.0 - s2 * g) ** 2, 1.0)
    x = np.where(inside, c * g / np.where(inside, 1.0 - s2 * g, 1.0), 0.0)
    out = np.where(inside, c / denom * np.exp(-x), 0.0)
    return float(out) if np.ndim(gamma) == 0 else out


def sinr_cdf(gamma, params: BerSeriesParams):
    """P(SINR <= gamma), exact: 1 - exp(-c*g/(1 - 2 sigma_w^2 g))."""
    g = np.asarray(gamma, dtype=float)
    s2 = 2.0 * params.sigma_w_sq
    c = params.noise_rate
    out = np.where(g <= 0, 0.0,
                   np.where(s2 * g >= 1.0, 1.0,
                            1.0 - np.exp(-c * g / np.maximum(1.0 - s2 * g, 1e-300))))
    return float(out) if np.ndim(gamma) == 0 else out


def _qam_outer_terms(J: int):
    """(sign-weight, u2) pairs of the square-QAM conditional-BER expansion."""
    side = math.isqrt(J)
    m = int(math.log2(side))
    terms = []
    for u1 in range(1, m + 1):
        for u2 in range(int((1 - 2.0 ** (-u1)) * side)):
            sign = (-1) ** ((u2 * 2 ** (u1 - 1)) // side)
            weight = 2 ** (u1 - 1) - (u2 * 2 ** (u1 - 1)) // side \
                - (1 if (u2 * 2 ** (u1 - 1)) % side >= side / 2 else 0)
            # weight = 2^(u1-1) - floor(u2 2^(u1-1)/side + 1/2)
            terms.append((sign * weight, u2))
    return terms


def qam_conditional_ber(gamma, J: int):
    """Uncoded Gray square-QAM bit error probability at instantaneous SINR."""
    g = np.asarray(gamma, dtype=float)
    side = math.isqrt(J)
    m = int(math.log2(side))
    pref = 2.0 / (side * m)
    acc = np.zeros_like(g)
    for weight, u2 in _qam_outer_terms(J):
        acc = acc + weight * numerics.q_function(
            (2 * u2 + 1) * np.sqrt(3.0 * g / (J - 1)))
    out = pref * acc
    return float(out) if np.ndim(gamma) == 0 else out


def _log_hyp2f1_family(a_int: int, s_values: np.ndarray, z: float,
                       max_terms: int = 1_000_000) -> np.ndarray:
    """log 2F1(a, s; s+1; z) for one integer a and many s, via the power series.

    Uses (s)_k/(s+1)_k = s/(s+k), so one log-weight ladder
    lw_k = log[(a)_k z^k / k!] serves every s; the series is positive, so
    everything stays in log space without sign bookkeeping.
    """
    if z == 0.0:
        return np.zeros_like(s_values)
    lz = math.log(z)
    chunks = [np.zeros(1)]
    lw_last = 0.0
    lw_max = 0.0
    k0 = 0
    chunk = 4096
    while k0 < max_terms:
        j = np.arange(k0, k0 + chunk, dtype=float)
        lw = lw_last + np.cumsum(np.log(a_int + j) + lz - np.log(j + 1.0))
        chunks.append(lw)
        lw_last = float(lw[-1])
        lw_max = max(lw_max, float(lw.max()))
        k0 += chunk
        if lw[-1] < lw_max - 45.0 and lw[-1] < lw[-2]:
            break
    else:
        raise ConvergenceError(
            f"2F1 family at z={z} did not converge", terms_used=max_terms)
    lw_arr = np.concatenate(chunks)
    keep = lw_arr > lw_max - 45.0
    w = np.exp(lw_arr[keep] - lw_max)
    k_arr = np.arange(lw_arr.size, dtype=float)[keep]
    sums = np.sum(w[None, :] / (s_values[:, None] + k_arr[None, :]), axis=1)
    return lw_max + np.log(s_values * sums)


def _rayleigh_qam_exact(params: BerSeriesParams) -> float:
    """sigma_w = 0 limit: the standard Rayleigh square-QAM closed form."""
    gbar = 1.0 / params.noise_rate
    side = math.isqrt(params.J)
    m = int(math.log2(side))
    acc = 0.0
    for weight, u2 in _qam_outer_terms(params.J):
        abar = 1.5 * (2 * u2 + 1) ** 2 / (params.J - 1) * gbar
        acc += weight * 0.5 * (1.0 - math.sqrt(abar / (1.0 + abar)))
    return 2.0 / (side * m) * acc


def ber_closed_form(params: BerSeriesParams) -> float:
    """Asymptotic closed-form BER from the double power series.

    Each (u1, u2) term integrates erf(sqrt(a*gamma)) against the SINR
    density via the Maclaurin/Taylor double series and the 2F1 identity.
    The series endpoint is capped where either exponent hump would exceed
    double precision; beyond the cap erf has saturated (erfc < 2e-13) or
    the density's exponential has vanished (< e^-25), and the remaining
    probability mass is added in closed form from the exact CDF.
    """
    if params.sigma_w_sq == 0.0:
        return _rayleigh_qam_exact(params)
    s2 = 2.0 * params.sigma_w_sq
    c = params.noise_rate
    sig_minus = params.sigma_minus
    x_at_end = c * sig_minus / (1.0 - s2 * sig_minus)
    cdf_end = -math.expm1(-x_at_end) if x_at_end < 700 else 1.0

    side = math.isqrt(params.J)
    m = int(math.log2(side))
    e1_cache: dict[int, float] = {}
    acc = 0.0
    for weight, u2 in _qam_outer_terms(params.J):
        if u2 not in e1_cache:
            a_u = 1.5 * (2 * u2 + 1) ** 2 / (params.J - 1)
            gamma_cap = min(sig_minus, _budget_endpoint(a_u, c, s2))
            series = _erf_density_series(a_u, c, s2, gamma_cap, params)
            x_cap = c * gamma_cap / (1.0 - s2 * gamma_cap)
            saturated_tail = math.exp(-x_cap) - math.exp(-min(x_at_end, 700.0))
            e1_cache[u2] = 0.5 * (cdf_end - series - saturated_tail)
        acc += weight * e1_cache[u2]
    return 2.0 / (side * m) * acc


def _budget_endpoint(a_u: float, c: float, s2: float) -> float:
    """gamma where a*g + c*g/(1 - s2*g) hits the series exponent budget.

    Beyond it either erf has saturated or the density's exponential has
    died, and the two truncation factors jointly stay below e^-budget.
    """
    B = _SERIES_BUDGET
    p = a_u + c + B * s2
    disc = p * p - 4.0 * a_u * s2 * B
    return 2.0 * B / (p + math.sqrt(max(disc, 0.0)))


def _erf_density_series(a_u: float, c: float, s2: float, gamma_cap: float,
                        params: BerSeriesParams) -> float:
    """(2/sqrt(pi)) * sum_(v1,v2) of the Maclaurin x Taylor x 2F1 terms
    for int_0^gamma_cap erf(sqrt(a_u g)) p(g) dg.

    Term magnitudes are assembled in log space; the endpoint budget keeps
    every exponential hump representable in doubles.
    """
    z = s2 * gamma_cap
    lg, la, lc = math.log(gamma_cap), math.log(a_u), math.log(c)
    # the v1 hump sits at a*gamma_cap <= budget, so this range always covers it
    v1_lim = min(params.v1_max, int(4 * _SERIES_BUDGET) + 40)
    v1_idx = np.arange(v1_lim + 1)
    log_v1 = ((v1_idx + 0.5) * la + v1_idx * lg
              - special.gammaln(v1_idx + 1) - np.log(2 * v1_idx + 1))
    v1_sign = (-1.0) ** v1_idx

    total = 0.0
    peak = 0.0
    small_streak = 0
    for v2 in range(params.v2_max + 1):
        s_vals = v1_idx + v2 + 1.5
        log_f = _log_hyp2f1_family(v2 + 2, s_vals, z)
        log_t = (log_v1 + (v2 + 1) * lc - special.gammaln(v2 + 1)
                 + (v2 + 1.5) * lg - np.log(s_vals) + log_f)
        term = float(np.sum(v1_sign * np.exp(log_t))) * (-1.0) ** v2
        total += term
        peak = max(peak, abs(term))
        if abs(term) < 1e-12 * max(abs(total), 1e-30) and v2 > 0:
            small_streak += 1
            if small_streak >= 3:
                return 2.0 / math.sqrt(math.pi) * total
        else:
            small_streak = 0
    raise ConvergenceError(
        "BER series did not converge; a larger epsilon shrinks the support "
        "endpoint and speeds convergence", terms_used=params.v2_max)


def ber_numeric_quadrature(params: BerSeriesParams) -> float:
    """Adaptive quadrature of int p_b(E|gamma) p(gamma) dgamma over [0, sigma-].

    Serves as the independent oracle for :func:`ber_closed_form`.
    """
    c = params.noise_rate
    s2 = 2.0 * params.sigma_w_sq
    # Upper limit where the exponential factor reaches e^-37 (mass < 1e-16).
    x_stop = 37.0
    g_up = min(params.sigma_minus, x_stop / (c + s2 * x_stop))

    def integrand(g):
        return qam_conditional_ber(g, params.J) * sinr_pdf(g, params)

    val, err = quad(integrand, 0.0, g_up, limit=300, epsabs=1e-13, epsrel=1e-10)
    if not np.isfinite(val) or (val > 0 and err > 1e-6 * max(val, 1e-12)):
        raise ConvergenceError(f"quadrature failure: value={val}, abserr={err}")
    return float(val)


def average_ber_closed_form(sigma_w_sq: np.ndarray, sigma_n_sq: float,
                            cfg: SystemConfig, mean_alpha: float = 1.0,
                            epsilon: float = 1e-6) -> float:
    """(1/K) sum over subcarriers of the closed-form BER."""
    sigma_w_sq = np.asarray(sigma_w_sq, dtype=float)
    vals = [ber_closed_form(BerSeriesParams(
        J=cfg.qam_order, sigma_w_sq=float(s), sigma_n_sq=sigma_n_sq,
        m_dft=cfg.M, mean_alpha=mean_alpha, epsilon=epsilon))
        for s in sigma_w_sq]
    return float(np.mean(vals))


# ---------------------------------------------------------------------------
# Imperfect synchronization: three SINR cases
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SinrCaseInputs:
    """Offsets, channel profile and smoothing context for one sync case.

    delta1 is in samples (its sign convention per case: magnitude of the
    late offset for Case I, of the early offset for Cases II/III); delta2
    is normalized to the subcarrier spacing.
    """

    delta1: float
    delta2: float
    profile: ChannelProfile
    ctx: SmootherContext
    cfg: SystemConfig
    noise_var: float = 0.0

    @property
    def tau_samples(self) -> np.ndarray:
        """Exact (unrounded) tap delays in sample units."""
        return np.asarray(self.profile.delays_s) / self.cfg.sample_interval_s

    @property
    def l1_count(self) -> int:
        """Paths with tau_l <= delta1."""
        return int(np.sum(self.tau_samples <= self.delta1 + 1e-12))

    @property
    def l2_count(self) -> int:
        """Paths with tau_l >= Tcp - delta1."""
        return int(np.sum(self.tau_samples >= self.cfg.Mcp - self.delta1 - 1e-12))


def _basis_samples(ctx: SmootherContext, cfg: SystemConfig,
                   u: np.ndarray) -> np.ndarray:
    """All N+1 basis signals evaluated at (fractional) symbol times u: (P, N+1)."""
    out = np.zeros((u.size, cfg.N + 1), dtype=complex)
    inside = (u >= -cfg.Mcp) & (u <= -cfg.Mcp + cfg.T_L)
    if np.any(inside):
        ui = u[inside]
        g = window_value(ui + cfg.Mcp, cfg.T_L, cfg.window_kind)
        k = cfg.k_array
        phases = np.exp(2j * np.pi * np.outer(ui, k) / cfg.M)
        base_w = np.exp(-1j * cfg.phi * k)
        for n in range(cfg.N + 1):
            w = (1j * 2 * np.pi / cfg.M) ** n * (k ** n) * base_w
            out[inside, n] = (phases @ w) * g
    return out


def _interval_grid(lo: float, hi: float, cfg: SystemConfig) -> tuple[np.ndarray, float]:
    """Midpoint grid at the configured oversampling, clipped to the support."""
    lo_c = max(lo, -float(cfg.Mcp))
    hi_c = min(hi, -float(cfg.Mcp) + cfg.T_L)
    if hi_c <= lo_c:
        return np.empty(0), 0.0
    step = 1.0 / cfg.oversample
    n_pts = max(1, int(np.ceil((hi_c - lo_c) / step)))
    step = (hi_c - lo_c) / n_pts
    return lo_c + (np.arange(n_pts) + 0.5) * step, step


def basis_product_gram(ctx: SmootherContext, cfg: SystemConfig,
                       lo: float, hi: float) -> np.ndarray:
    """(N+1, N+1) Gram G[n, n'] = int_lo^hi f~_n(u) f~*_n'(u) du."""
    u, step = _interval_grid(lo, hi, cfg)
    if u.size == 0:
        return np.zeros((cfg.N + 1, cfg.N + 1), dtype=complex)
    B = _basis_samples(ctx, cfg, u)
    return (B.conj().T @ B).T * step


def _exp_basis_integral(ctx: SmootherContext, cfg: SystemConfig,
                        lo: float, hi: float) -> np.ndarray:
    """(K, N+1) integrals of e^{-j2pi k u / M} f~_n(u) over [lo, hi]."""
    u, step = _interval_grid(lo, hi, cfg)
    if u.size == 0:
        return np.zeros((cfg.K, cfg.N + 1), dtype=complex)
    B = _basis_samples(ctx, cfg, u)
    E = np.exp(-2j * np.pi * np.outer(cfg.k_array, u) / cfg.M)
    return (E @ B) * step


def _weighted_gram_sum(inputs: SinrCaseInputs, intervals) -> complex:
    """sum over (path weight, lo, hi) of C .* Gram contributions."""
    ctx, cfg = inputs.ctx, inputs.cfg
    cg = ctx.coeff_gram
    total = 0.0 + 0.0j
    for weight, lo, hi in intervals:
        if weight == 0.0:
            continue
        total += weight * np.sum(cg * basis_product_gram(ctx, cfg, lo, hi))
    return total


def sinr_case1(inputs: SinrCaseInputs) -> float:
    """Average SINR (linear) when the estimated start lags by delta1 > 0."""
    cfg, ctx = inputs.cfg, inputs.ctx
    if inputs.delta1 < 0:
        raise CaseMismatchError("Case I needs delta1 >= 0")
    d1 = float(inputs.delta1)
    taus = inputs.tau_samples
    powers = inputs.profile.power_array
    Ts = float(cfg.M)
    T = float(cfg.M + cfg.Mcp)
    l1 = inputs.l1_count

    isi = 2.0 * cfg.K * np.sum(powers[:l1] * (d1 - taus[:l1]))

    intervals = [(p, d1 - tau, Ts - tau) for p, tau in zip(powers, taus)]
    intervals += [(powers[l], -float(cfg.Mcp), -cfg.Mcp + (d1 - taus[l]))
                  for l in range(l1)]
    smooth = np.real(_weighted_gram_sum(inputs, intervals))

    cross = 0.0
    phase = np.exp(-2j * np.pi * (inputs.delta2 * T / Ts
                                  + cfg.k_array * cfg.Mcp / cfg.M))
    coeff = ctx.a * phase[None, :] + ctx.b        # (N+1, K)
    for l in range(l1):
        integ = _exp_basis_integral(ctx, cfg, -float(cfg.Mcp),
                                    -cfg.Mcp + (d1 - taus[l]))  # (K, N+1)
        cross += powers[l] * 2.0 * np.real(np.sum(coeff.T * integ))
    i1 = isi + smooth - cross
    return cfg.K * Ts / (i1 + inputs.noise_var * Ts)


def sinr_case2(inputs: SinrCaseInputs) -> float:
    """Average SINR (linear) when the start leads by delta1 within the clean CP margin."""
    cfg = inputs.cfg
    d1 = float(inputs.delta1)
    taus = inputs.tau_samples
    if d1 < 0:
        raise CaseMismatchError("Case II needs delta1 >= 0 (lead magnitude)")
    if d1 + taus.max() > cfg.Mcp + 1e-9:
        raise CaseMismatchError(
            "Case II geometry requires delta1 + tau_max <= Mcp")
    Ts = float(cfg.M)
    intervals = [(p, -d1 - tau, Ts - 2 * d1 - tau)
                 for p, tau in zip(inputs.profile.power_array, taus)]
    i2 = np.real(_weighted_gram_sum(inputs, intervals))
    return cfg.K * Ts / (i2 + inputs.noise_var * Ts)


def sinr_case3(inputs: SinrCaseInputs) -> float:
    """Average SINR (linear) when the lead overlaps the previous delayed symbol."""
    cfg = inputs.cfg
    d1 = float(inputs.delta1)
    taus = inputs.tau_samples
    powers = inputs.profile.power_array
    tau_max = float(taus.max())
    if d1 + tau_max < cfg.Mcp - 1e-9:
        raise CaseMismatchError(
            "Case III geometry requires delta1 + tau_max >= Mcp")
    Ts = float(cfg.M)
    n_taps = taus.size
    l2 = inputs.l2_count
    first_l2 = n_taps - l2

    isi = 2.0 * cfg.K * np.sum(powers[first_l2:] * (taus[first_l2:] - cfg.Mcp + d1))

    edge = d1 + tau_max - cfg.Mcp
    intervals = []
    for l in range(first_l2, n_taps):
        intervals.append((powers[l],
                          (d1 + taus[l] - cfg.Mcp) - d1 - taus[l],
                          edge - d1 - taus[l]))
    for l in range(first_l2):
        intervals.append((powers[l], -d1 - taus[l], edge - d1 - taus[l]))
    for l in range(n_taps):
        intervals.append((powers[l], edge - d1 - taus[l], Ts - d1 - taus[l]))
    smooth = np.real(_weighted_gram_sum(inputs, intervals))
    i3 = isi + smooth
    return cfg.K * Ts / (i3 + inputs.noise_var * Ts)


# ---------------------------------------------------------------------------
# Eb/N0 relation
# ---------------------------------------------------------------------------

def smooth_energy_closed_form(ctx: SmootherContext, cfg: SystemConfig) -> float:
    """int E|w(t)|^2 dt over the symbol, from the coefficient Gram matrices."""
    gram = basis_product_gram(ctx, cfg, -float(cfg.Mcp), float(cfg.M))
    return float(np.real(np.sum(ctx.coeff_gram * gram)))


def ebn0_relation(noise_var: float, ctx: SmootherContext, cfg: SystemConfig,
                  oversample_factor: int | None = None) -> float:
    """Per-bit SNR in dB accounting for the smooth-signal power.

    Eb/N0 = 10log10(K Jbar / log2 J) - 10log10(sigma_n^2 + (1/T) int E|w|^2).
    """
    jbar = cfg.oversample if oversample_factor is None else oversample_factor
    T = float(cfg.M + cfg.Mcp)
    energy_term = smooth_energy_closed_form(ctx, cfg) / T
    return float(10 * np.log10(cfg.K * jbar / np.log2(cfg.qam_order))
                 - 10 * np.log10(noise_var + energy_term))


def ebn0_reference_noise_var(reference_db: float, cfg: SystemConfig,
                             oversample_factor: int | None = None) -> float:
    """Noise variance at which plain OFDM (w = 0) sits at the reference Eb/N0."""
    jbar = cfg.oversample if oversample_factor is None else oversample_factor
    return float(cfg.K * jbar / np.log2(cfg.qam_order)
                 * 10 ** (-reference_db / 10.0))


# ---------------------------------------------------------------------------
# Complexity counting
# ---------------------------------------------------------------------------

class MultiplyCounter:
    """Counts real multiplications; one complex multiply costs four."""

    def __init__(self):
        self.real_mults = 0

    def matvec(self, mat: np.ndarray, vec: np.ndarray) -> np.ndarray:
        self.real_mults += 4 * mat.shape[0] * mat.shape[1]
        return mat @ vec


def complexity_count(scheme: str, cfg: SystemConfig,
                     ctx: SmootherContext | None = None) -> int:
    """Instrumented per-symbol real-multiplication count of a transmitter path.

    ``low_interference`` runs b_i = A x_(i-1) - B x_i then Q_f b_i;
    ``baseline_projection`` applies the two dense K x K precoding matrices
    of the least-norm baseline.
    """
    if ctx is None:
        from .waveform import build_smoother
        ctx = build_smoother(cfg)
    rng = np.random.default_rng(0)
    from .waveform import random_qam
    x_prev = random_qam(rng, cfg.K, cfg.qam_order)
    x_cur = random_qam(rng, cfg.K, cfg.qam_order)
    counter = MultiplyCounter()
    if scheme == "low_interference":
        b = counter.matvec(ctx.a, x_prev) - counter.matvec(ctx.b, x_cur)
        counter.matvec(ctx.q_f, b)
    elif scheme == "baseline_projection":
        G = ctx.p2
        T_mat = G.conj().T @ np.linalg.inv(G @ G.conj().T)
        W1 = T_mat @ ctx.p1
        W2 = np.eye(cfg.K) - T_mat @ G
        counter.matvec(W1, x_prev)
        counter.matvec(W2, x_cur)
    else:
        raise ConfigError(f"unknown scheme {scheme!r}")
    return counter.real_mults


def complexity_formula(scheme: str, cfg: SystemConfig) -> int:
    """Hand-derived real-multiplication count matching the instrumented path."""
    n1 = cfg.N + 1
    if scheme == "low_interference":
        return 4 * (2 * n1 * cfg.K + cfg.L * n1)
    if scheme == "baseline_projection":
        return 4 * 2 * cfg.K * cfg.K
    raise ConfigError(f"unknown scheme {scheme!r}")
