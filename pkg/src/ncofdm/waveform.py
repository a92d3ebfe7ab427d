"""Transmitter: QAM data, CP-OFDM symbols, basis signals, the smoothing
construction, and assembly of the N-continuous stream.

All time quantities in this module are in sample units: one OFDM symbol
body spans M samples, its cyclic prefix Mcp samples, and the smooth
correction occupies the first L samples of the symbol.  The smooth signal
is a linear combination of N+1 windowed complex-exponential derivative
waveforms whose coefficients solve the N-continuity boundary conditions
at each symbol junction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import numerics
from .errors import ConfigError, DimensionError, DomainError, SingularMatrixError

WINDOW_KINDS = ("blackman", "hanning", "triangular")

_SUPPORTED_QAM = (4, 16, 64, 256)


def default_subcarriers(K: int, M: int) -> tuple[int, ...]:
    """K indices centered on DC, DC excluded: -K/2..-1, 1..K/2 for even K."""
    if K % 2 != 0:
        raise ConfigError("default subcarrier set requires even K")
    half = K // 2
    if half >= M // 2:
        raise ConfigError(f"K={K} does not fit below the Nyquist index of M={M}")
    return tuple(range(-half, 0)) + tuple(range(1, half + 1))


@dataclass(frozen=True)
class SystemConfig:
    """Waveform dimensions and constellation/window choices."""

    K: int = 256
    M: int = 2048
    Mcp: int = 144
    L: int = 1000
    N: int = 2
    qam_order: int = 16
    oversample: int = 8
    window_kind: str = "blackman"
    Ms: int = 8
    subcarriers: tuple[int, ...] | None = None
    subcarrier_spacing_hz: float = 15e3

    def __post_init__(self):
        if not (0 < self.K <= self.M):
            raise ConfigError(f"need 0 < K <= M, got K={self.K}, M={self.M}")
        if not (2 <= self.L <= self.M + self.Mcp):
            raise ConfigError(f"need 2 <= L <= M+Mcp, got L={self.L}")
        if self.N < 0:
            raise ConfigError("N must be >= 0")
        if self.Mcp < 0 or self.Ms < 1 or self.oversample < 1:
            raise ConfigError("Mcp >= 0, Ms >= 1, oversample >= 1 required")
        if self.qam_order not in _SUPPORTED_QAM:
            raise ConfigError(
                f"qam_order {self.qam_order} not a supported square constellation"
            )
        if self.window_kind.lower() not in WINDOW_KINDS:
            raise ConfigError(f"unknown window kind {self.window_kind!r}")
        object.__setattr__(self, "window_kind", self.window_kind.lower())
        if self.subcarriers is None:
            object.__setattr__(self, "subcarriers",
                               default_subcarriers(self.K, self.M))
        else:
            object.__setattr__(self, "subcarriers",
                               tuple(int(k) for k in self.subcarriers))
        ks = self.subcarriers
        if len(ks) != self.K or len(set(ks)) != self.K:
            raise ConfigError("subcarrier set must hold K distinct indices")
        if any(abs(k) >= self.M / 2 for k in ks):
            raise ConfigError("subcarrier indices must satisfy |k| < M/2")

    @property
    def phi(self) -> float:
        """CP phase constant, -2*pi*Mcp/M (always derived, never stored)."""
        return -2.0 * np.pi * self.Mcp / self.M

    @property
    def T_L(self) -> float:
        """Smooth-window duration in sample units, (L-1) sample intervals."""
        return float(self.L - 1)

    @property
    def symbol_span(self) -> int:
        """Samples per CP-OFDM symbol, M + Mcp."""
        return self.M + self.Mcp

    @property
    def sample_interval_s(self) -> float:
        return 1.0 / (self.subcarrier_spacing_hz * self.M)

    @property
    def k_array(self) -> np.ndarray:
        return np.asarray(self.subcarriers, dtype=float)

    @property
    def bits_per_symbol(self) -> int:
        return int(np.log2(self.qam_order))


# ---------------------------------------------------------------------------
# QAM mapping
# ---------------------------------------------------------------------------

def _gray_encode(n: np.ndarray) -> np.ndarray:
    return n ^ (n >> 1)


def _gray_decode(g: np.ndarray) -> np.ndarray:
    g = np.asarray(g).copy()
    shift = 1
    while shift < 16:  # covers all supported constellation sides
        g ^= g >> shift
        shift <<= 1
    return g


def _axis_levels(J: int) -> np.ndarray:
    """Amplitude of each Gray-coded bit group on one axis, unit-power scaled."""
    side = int(round(np.sqrt(J)))
    scale = np.sqrt(2.0 * (J - 1) / 3.0)
    idx = _gray_decode(np.arange(side))
    return (2 * idx - (side - 1)) / scale


def qam_constellation(J: int) -> np.ndarray:
    """All J points indexed by bit pattern (I bits first, then Q bits)."""
    if J not in _SUPPORTED_QAM:
        raise ConfigError(f"unsupported QAM order {J}")
    side = int(round(np.sqrt(J)))
    m = int(np.log2(side))
    levels = _axis_levels(J)
    pattern = np.arange(J)
    i_bits = pattern >> m
    q_bits = pattern & (side - 1)
    return levels[i_bits] + 1j * levels[q_bits]


def qam_map(bits: np.ndarray, J: int) -> np.ndarray:
    """Gray-coded square-QAM mapping with unit average symbol power."""
    if J not in _SUPPORTED_QAM:
        raise ConfigError(f"unsupported QAM order {J}")
    bits = np.asarray(bits, dtype=np.int64).ravel()
    bps = int(np.log2(J))
    if bits.size % bps != 0:
        raise DimensionError(f"bit count {bits.size} not divisible by {bps}")
    groups = bits.reshape(-1, bps)
    pattern = np.zeros(groups.shape[0], dtype=np.int64)
    for b in range(bps):
        pattern = (pattern << 1) | groups[:, b]
    return qam_constellation(J)[pattern]


def qam_demap(symbols: np.ndarray, J: int) -> np.ndarray:
    """Hard minimum-distance demapping back to bits."""
    symbols = np.asarray(symbols, dtype=complex).ravel()
    side = int(round(np.sqrt(J)))
    m = int(np.log2(side))
    scale = np.sqrt(2.0 * (J - 1) / 3.0)

    def axis_bits(vals):
        idx = np.clip(np.round((vals * scale + (side - 1)) / 2).astype(np.int64),
                      0, side - 1)
        return _gray_encode(idx)

    i_pat = axis_bits(symbols.real)
    q_pat = axis_bits(symbols.imag)
    pattern = (i_pat << m) | q_pat
    bits = np.empty((symbols.size, 2 * m), dtype=np.int64)
    for b in range(2 * m):
        bits[:, b] = (pattern >> (2 * m - 1 - b)) & 1
    return bits.ravel()


def random_qam(rng: np.random.Generator, shape, J: int) -> np.ndarray:
    """Uniform random constellation points (equivalent to mapping random bits)."""
    table = qam_constellation(J)
    return table[rng.integers(0, J, size=shape)]


# ---------------------------------------------------------------------------
# OFDM modulation
# ---------------------------------------------------------------------------

def ofdm_modulate(x: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    """CP-OFDM symbol y(m) = sum_r x_r exp(j2pi k_r m / M), m = -Mcp..M-1.

    Stored CP-first; computed with a zero-stuffed inverse FFT, which equals
    the subcarrier sum exactly.
    """
    x = np.asarray(x, dtype=complex)
    if x.shape != (cfg.K,):
        raise DimensionError(f"data vector must have K={cfg.K} entries")
    bins = np.zeros(cfg.M, dtype=complex)
    for k, val in zip(cfg.subcarriers, x):
        bins[k % cfg.M] = val
    body = np.fft.ifft(bins) * cfg.M
    return np.concatenate([body[cfg.M - cfg.Mcp:], body]) if cfg.Mcp else body


def ofdm_modulate_oversampled(x: np.ndarray, cfg: SystemConfig,
                              factor: int) -> np.ndarray:
    """Same symbol rendered at `factor` times the working rate."""
    x = np.asarray(x, dtype=complex)
    Mo = cfg.M * factor
    bins = np.zeros(Mo, dtype=complex)
    for k, val in zip(cfg.subcarriers, x):
        bins[k % Mo] = val
    body = np.fft.ifft(bins) * Mo
    ncp = cfg.Mcp * factor
    return np.concatenate([body[Mo - ncp:], body]) if ncp else body


# ---------------------------------------------------------------------------
# Basis signals and the smoother
# ---------------------------------------------------------------------------

def window_value(t_prime, T_L: float, kind: str, order: int = 0):
    """Falling half-window g on local time t' in [0, T_L]; g(0)=1, g(T_L)=0.

    Derivatives are analytic; only the Blackman window is used by the
    analytic PSD, the other kinds serve synthesis.
    """
    t_arr = np.asarray(t_prime, dtype=float)
    if np.any(t_arr < -1e-9 * max(T_L, 1.0)) or np.any(t_arr > T_L * (1 + 1e-9)):
        raise DomainError("window argument outside [0, T_L]")
    kind = kind.lower()
    if kind == "blackman":
        out = numerics.blackman_derivative(t_arr + T_L, T_L, order)
    elif kind == "hanning":
        w = np.pi / T_L
        phase = w * t_arr + order * np.pi / 2.0
        out = 0.5 * (w ** order) * np.cos(phase)
        if order == 0:
            out = out + 0.5
    elif kind == "triangular":
        if order == 0:
            out = 1.0 - t_arr / T_L
        elif order == 1:
            out = np.full_like(t_arr, -1.0 / T_L)
        else:
            out = np.zeros_like(t_arr)
    else:
        raise ConfigError(f"unknown window kind {kind!r}")
    return float(out) if np.ndim(t_prime) == 0 else out


def f_derivative(cfg: SystemConfig, order: int, t) -> np.ndarray:
    """f^(order)(t) = (j2pi/M)^order sum_r k_r^order e^{-j phi k_r} e^{j2pi k_r t/M}.

    `t` is absolute symbol time in samples (the symbol spans [-Mcp, M)); the
    function is the analytic continuation, so t may be fractional.
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    k = cfg.k_array
    weights = (k ** order) * np.exp(-1j * cfg.phi * k)
    phases = np.exp(2j * np.pi * np.outer(t_arr, k) / cfg.M)
    vals = (1j * 2 * np.pi / cfg.M) ** order * (phases @ weights)
    return vals if np.ndim(t) else vals[0]


def basis_signal(n_tilde: int, cfg: SystemConfig) -> np.ndarray:
    """Sampled basis signal f~_n(m) = f^(n)(m) g(m) u(m) on the L support samples."""
    if n_tilde > 2 * cfg.N:
        raise DomainError(f"basis order {n_tilde} exceeds 2N = {2 * cfg.N}")
    t_local = np.arange(cfg.L, dtype=float)
    g = window_value(t_local, cfg.T_L, cfg.window_kind)
    return f_derivative(cfg, n_tilde, t_local - cfg.Mcp) * g


def basis_value(n_tilde: int, t, cfg: SystemConfig) -> np.ndarray:
    """Basis signal at arbitrary (possibly fractional) symbol time, 0 off-support."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros(t_arr.shape, dtype=complex)
    inside = (t_arr >= -cfg.Mcp) & (t_arr <= -cfg.Mcp + cfg.T_L)
    if np.any(inside):
        tp = t_arr[inside] + cfg.Mcp
        g = window_value(tp, cfg.T_L, cfg.window_kind)
        out[inside] = f_derivative(cfg, n_tilde, t_arr[inside]) * g
    return out if np.ndim(t) else out[0]


def subcarrier_moments(cfg: SystemConfig, max_order: int) -> np.ndarray:
    """S_q = sum_r k_r^q for q = 0..max_order."""
    k = cfg.k_array
    return np.array([np.sum(k ** q) for q in range(max_order + 1)])


@dataclass(frozen=True)
class SmootherContext:
    """Precomputed smoothing matrices for one configuration.

    a (= P_f^-1 P1) and b (= P_f^-1 P1 Phi) map the previous/current data
    vectors onto basis coefficients; q_f holds the sampled basis signals.
    """

    cfg: SystemConfig
    p_f: np.ndarray          # (N+1, N+1) Hankel of ladder boundary values
    p1: np.ndarray           # (N+1, K) Vandermonde of (j2pi k/M)^n
    p2: np.ndarray           # (N+1, K) = p1 @ diag(phi phases)
    phi_diag: np.ndarray     # (K,) unit-modulus e^{j phi k_r}
    q_f: np.ndarray          # (L, N+1) sampled basis signals
    a: np.ndarray            # (N+1, K)
    b: np.ndarray            # (N+1, K)
    cond_pf: float

    @cached_property
    def coeff_gram(self) -> np.ndarray:
        """(N+1)x(N+1) matrix sum_r (a_nr a*_n'r + b_nr b*_n'r)."""
        return self.a @ self.a.conj().T + self.b @ self.b.conj().T


def build_smoother(cfg: SystemConfig) -> SmootherContext:
    """Assemble P_f, P1, P2, Q_f and solve for the coefficient maps.

    P_f[i][j] = f~_(i+j)(-Mcp); at the window start g = 1 and the phase
    factors of the basis cancel, leaving (j2pi/M)^(i+j) * sum_r k_r^(i+j).
    """
    N, K = cfg.N, cfg.K
    moments = subcarrier_moments(cfg, 2 * N)
    scale = (1j * 2 * np.pi / cfg.M) ** np.arange(2 * N + 1)
    ladder = scale * moments
    idx = np.add.outer(np.arange(N + 1), np.arange(N + 1))
    p_f = ladder[idx]

    k = cfg.k_array
    p1 = (1j * 2 * np.pi * k[None, :] / cfg.M) ** np.arange(N + 1)[:, None]
    phi_diag = np.exp(1j * cfg.phi * k)
    p2 = p1 * phi_diag[None, :]

    try:
        a = numerics.solve(p_f, p1, name="P_f")
    except SingularMatrixError as err:
        raise SingularMatrixError(
            "P_f", err.cond,
            f"N={N}, L={cfg.L}, window={cfg.window_kind}") from err
    b = a * phi_diag[None, :]
    cond = numerics.condition_estimate(p_f)

    for mat, ref, label in ((a, p1, "P1"), (b, p2, "P2")):
        rel = np.linalg.norm(p_f @ mat - ref) / np.linalg.norm(ref)
        if rel > 1e-9:
            raise SingularMatrixError(
                "P_f", cond, f"coefficient residual vs {label} is {rel:.2e}")

    q_f = np.column_stack([basis_signal(n, cfg) for n in range(N + 1)])
    return SmootherContext(cfg=cfg, p_f=p_f, p1=p1, p2=p2, phi_diag=phi_diag,
                           q_f=q_f, a=a, b=b, cond_pf=cond)


def smoothing_coefficients(x_prev: np.ndarray, x_cur: np.ndarray,
                           ctx: SmootherContext) -> np.ndarray:
    """Basis coefficients b_i = A x_(i-1) - B x_i."""
    return ctx.a @ np.asarray(x_prev, complex) - ctx.b @ np.asarray(x_cur, complex)


def smooth_signal(x_prev: np.ndarray, x_cur: np.ndarray,
                  ctx: SmootherContext, cfg: SystemConfig) -> np.ndarray:
    """L-sample smooth correction for the junction between two data vectors."""
    x_prev = np.asarray(x_prev, dtype=complex)
    x_cur = np.asarray(x_cur, dtype=complex)
    if x_prev.shape != (cfg.K,) or x_cur.shape != (cfg.K,):
        raise DimensionError("data vectors must have K entries")
    return ctx.q_f @ smoothing_coefficients(x_prev, x_cur, ctx)


def assemble_stream(data: np.ndarray, ctx: SmootherContext | None,
                    cfg: SystemConfig) -> np.ndarray:
    """Concatenate Ms smoothed symbols plus the terminating smooth block.

    data is (Ms, K); the first symbol uses x_(-1) = 0 and the terminal
    block uses x_(Ms) = 0.  With ctx=None a plain CP-OFDM stream (no
    smoothing, no tail block) is produced for comparison runs.
    """
    data = np.atleast_2d(np.asarray(data, dtype=complex))
    if data.shape[1] != cfg.K:
        raise DimensionError(f"data must be (Ms, {cfg.K})")
    n_sym = data.shape[0]
    span = cfg.symbol_span
    tail = cfg.L if ctx is not None else 0
    out = np.zeros(n_sym * span + tail, dtype=complex)
    prev = np.zeros(cfg.K, dtype=complex)
    for i in range(n_sym):
        sym = ofdm_modulate(data[i], cfg)
        if ctx is not None:
            sym[:cfg.L] += smooth_signal(prev, data[i], ctx, cfg)
        out[i * span:(i + 1) * span] = sym
        prev = data[i]
    if ctx is not None:
        out[n_sym * span:] = ctx.q_f @ (ctx.a @ prev)
    return out


def junction_residuals(data: np.ndarray, ctx: SmootherContext,
                       cfg: SystemConfig) -> np.ndarray:
    """Scale-relative N-continuity residuals at every junction of a stream.

    Evaluates both sides of the boundary condition from first principles:
    symbol derivatives from the data directly, smooth-signal derivatives
    through the basis ladder at the junction instant.  Returns an array of
    shape (Ms + 1, N + 1).
    """
    data = np.atleast_2d(np.asarray(data, dtype=complex))
    n_sym = data.shape[0]
    N, K = cfg.N, cfg.K
    k = cfg.k_array
    dscale = (1j * 2 * np.pi * k / cfg.M)[None, :] ** np.arange(N + 1)[:, None]

    def y_derivs(x, t):
        return dscale @ (x * np.exp(2j * np.pi * k * t / cfg.M))

    ladder = np.array([f_derivative(cfg, q, -float(cfg.Mcp))
                       for q in range(2 * N + 1)])
    ladder_mat = ladder[np.add.outer(np.arange(N + 1), np.arange(N + 1))]

    scale = (2 * np.pi / cfg.M) ** np.arange(N + 1) \
        * np.max(np.abs(k)) ** np.arange(N + 1) * K
    out = np.empty((n_sym + 1, N + 1))
    prev = np.zeros(K, dtype=complex)
    for i in range(n_sym + 1):
        cur = data[i] if i < n_sym else np.zeros(K, dtype=complex)
        coeffs = smoothing_coefficients(prev, cur, ctx)
        w_derivs = ladder_mat @ coeffs
        rhs = y_derivs(prev, float(cfg.M)) - y_derivs(cur, -float(cfg.Mcp))
        out[i] = np.abs(w_derivs - rhs) / scale
        prev = cur
    return out


# ---------------------------------------------------------------------------
# Least-norm frequency-domain baseline
# ---------------------------------------------------------------------------

def baseline_least_norm_precoder(x_prev: np.ndarray, x_cur: np.ndarray,
                                 cfg: SystemConfig) -> np.ndarray:
    """Minimal-distortion precoded vector satisfying the continuity constraints.

    Solves min ||x - x_cur|| subject to P1 Phi x = P1 x_prev, i.e. the same
    N+1 boundary conditions expressed on the data.  This is a labeled
    stand-in comparison baseline, not the precoder of the cited frequency-
    domain schemes.
    """
    x_prev = np.asarray(x_prev, dtype=complex)
    x_cur = np.asarray(x_cur, dtype=complex)
    if x_prev.shape != (cfg.K,) or x_cur.shape != (cfg.K,):
        raise DimensionError("data vectors must have K entries")
    N = cfg.N
    k = cfg.k_array
    p1 = (1j * 2 * np.pi * k[None, :] / cfg.M) ** np.arange(N + 1)[:, None]
    G = p1 * np.exp(1j * cfg.phi * k)[None, :]
    r = p1 @ x_prev - G @ x_cur
    correction = G.conj().T @ numerics.solve(G @ G.conj().T, r, name="G G^H")
    return x_cur + correction
