"""Foundational numeric kernels shared by all other modules.

DFT with 1/M forward normalization, pivoted complex linear solves with a
condition estimate, the stacked-least-squares normal-equation solve, the
Gauss hypergeometric series, the Gaussian tail probability, and the
Blackman window with analytic derivatives of any order.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import ConvergenceError, DimensionError, DomainError, SingularMatrixError

COND_LIMIT = 1e14
SOLVE_RESIDUAL_LIMIT = 1e-9

_SQRT_PI = float(np.sqrt(np.pi))
_SQRT_2 = float(np.sqrt(2.0))


def ensure_finite(x: np.ndarray, name: str = "result") -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise ArithmeticError(f"{name} contains non-finite entries")
    return x


# ---------------------------------------------------------------------------
# DFT
# ---------------------------------------------------------------------------

def dft(x: np.ndarray, size: int) -> np.ndarray:
    """Forward DFT, X[k] = (1/size) sum_m x[m] exp(-j2pi*k*m/size).

    The 1/size normalization matches the receiver-side transform, so a
    unit-variance noise vector maps to bins of variance sigma^2/size.
    """
    x = np.asarray(x, dtype=complex)
    if x.shape != (size,):
        raise DimensionError(f"dft expects {size} samples, got shape {x.shape}")
    return np.fft.fft(x) / size


def idft(X: np.ndarray) -> np.ndarray:
    """Inverse of :func:`dft` (carries no scale of its own)."""
    X = np.asarray(X, dtype=complex)
    return np.fft.ifft(X) * X.size


# ---------------------------------------------------------------------------
# Linear solves
# ---------------------------------------------------------------------------

def _inverse_onenorm_estimate(lu_piv, n: int) -> float:
    """Hager-style power-method estimate of ||A^-1||_1 from an LU factorization."""
    x = np.full(n, 1.0 / n, dtype=complex)
    est = 0.0
    for _ in range(5):
        y = lu_solve(lu_piv, x)
        est = float(np.sum(np.abs(y)))
        xi = np.where(y == 0, 1.0, y / np.abs(np.where(y == 0, 1.0, y)))
        z = lu_solve(lu_piv, xi, trans=2)
        j = int(np.argmax(np.abs(z)))
        if np.abs(z[j]) <= np.real(np.vdot(x, z)) + 1e-30:
            break
        x = np.zeros(n, dtype=complex)
        x[j] = 1.0
    return est


def condition_estimate(A: np.ndarray) -> float:
    """1-norm condition estimate of a square matrix."""
    A = np.asarray(A, dtype=complex)
    n = A.shape[0]
    norm_a = float(np.max(np.sum(np.abs(A), axis=0))) if n else 0.0
    try:
        lu_piv = lu_factor(A)
    except Exception:
        return np.inf
    if not np.all(np.isfinite(lu_piv[0])):
        return np.inf
    diag = np.abs(np.diag(lu_piv[0]))
    if np.any(diag == 0.0):
        return np.inf
    return norm_a * _inverse_onenorm_estimate(lu_piv, n)


def solve(A: np.ndarray, B: np.ndarray, name: str = "A") -> np.ndarray:
    """Solve A X = B by partial-pivoted LU with one refinement step.

    Raises :class:`SingularMatrixError` if the condition estimate exceeds
    ``COND_LIMIT`` or the refined residual violates the 1e-9 contract.
    """
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {A.shape}")
    vector_rhs = B.ndim == 1
    B2 = B[:, None] if vector_rhs else B
    if B2.shape[0] != A.shape[0]:
        raise DimensionError(
            f"rhs rows {B2.shape[0]} do not match order {A.shape[0]} of {name}"
        )

    n = A.shape[0]
    norm_a = float(np.max(np.sum(np.abs(A), axis=0)))
    lu_piv = lu_factor(A)
    diag = np.abs(np.diag(lu_piv[0]))
    if np.any(diag == 0.0) or not np.all(np.isfinite(lu_piv[0])):
        raise SingularMatrixError(name)
    cond = norm_a * _inverse_onenorm_estimate(lu_piv, n)
    if cond > COND_LIMIT:
        raise SingularMatrixError(name, cond)

    X = lu_solve(lu_piv, B2)
    # One step of iterative refinement in working precision.
    R = B2 - A @ X
    X = X + lu_solve(lu_piv, R)

    norm_b = float(np.linalg.norm(B2))
    if norm_b > 0.0:
        rel = float(np.linalg.norm(B2 - A @ X)) / norm_b
        if not np.isfinite(rel) or rel > SOLVE_RESIDUAL_LIMIT:
            raise SingularMatrixError(
                name, cond, f"refined residual {rel:.3e} exceeds {SOLVE_RESIDUAL_LIMIT:.0e}"
            )
    ensure_finite(X, f"solve({name})")
    return X[:, 0] if vector_rhs else X


def solve_condition(A: np.ndarray, B: np.ndarray, name: str = "A"):
    """Like :func:`solve` but also returns the condition estimate."""
    X = solve(A, B, name)
    return X, condition_estimate(np.asarray(A, dtype=complex))


def normal_equation_pinv(Q1: np.ndarray, Q2: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Least-squares coefficients (Q1^H Q1 + Q2^H Q2)^-1 Q2^H w.

    This is the Moore-Penrose solve of the stacked system [Q1; Q2] b = [0; w].
    """
    Q1 = np.atleast_2d(np.asarray(Q1, dtype=complex))
    Q2 = np.atleast_2d(np.asarray(Q2, dtype=complex))
    w = np.asarray(w, dtype=complex)
    if Q1.shape[1] != Q2.shape[1]:
        raise DimensionError(
            f"column mismatch: Q1 has {Q1.shape[1]}, Q2 has {Q2.shape[1]}"
        )
    if w.shape != (Q2.shape[0],):
        raise DimensionError(
            f"w has shape {w.shape}, expected ({Q2.shape[0]},)"
        )
    G = Q1.conj().T @ Q1 + Q2.conj().T @ Q2
    return solve(G, Q2.conj().T @ w, name="Q1^H Q1 + Q2^H Q2")


# ---------------------------------------------------------------------------
# Special functions
# ---------------------------------------------------------------------------

def gauss_2f1(a: float, b: float, c: float, z: float,
              max_terms: int = 1_000_000) -> float:
    """Gauss hypergeometric 2F1(a, b; c; z) by its power series.

    Valid for 0 <= z < 1 and c not a non-positive integer.  The series is
    truncated once the absolute term drops below 1e-15 of the partial sum
    for three consecutive terms.
    """
    if c <= 0 and float(c).is_integer():
        raise DomainError(f"c={c} is a non-positive integer")
    if not (0.0 <= z < 1.0):
        raise DomainError(f"z={z} outside [0, 1)")
    if z == 0.0:
        return 1.0
    total = 1.0
    term = 1.0
    small_streak = 0
    for k in range(max_terms):
        term *= (a + k) * (b + k) / ((c + k) * (k + 1.0)) * z
        total += term
        if abs(term) < 1e-15 * abs(total):
            small_streak += 1
            if small_streak >= 3:
                return total
        else:
            small_streak = 0
    raise ConvergenceError(
        f"2F1({a}, {b}; {c}; {z}) did not converge", terms_used=max_terms
    )


def _erf_maclaurin(y: np.ndarray) -> np.ndarray:
    """erf by its Maclaurin series; accurate to ~1e-13 for |y| <= 3."""
    y = np.asarray(y, dtype=float)
    u = y.copy()          # (-1)^v y^(2v+1) / v!
    acc = y.copy()        # running sum of u_v / (2v+1)
    y2 = y * y
    for v in range(1, 80):
        u = u * (-y2) / v
        acc = acc + u / (2 * v + 1)
    return (2.0 / _SQRT_PI) * acc


def _erfc_cf(y: np.ndarray, depth: int = 400) -> np.ndarray:
    """erfc by continued fraction; full double precision for y >= 1.1.

    erfc(y) = exp(-y^2)/sqrt(pi) * 1/(y + (1/2)/(y + 1/(y + (3/2)/(y + ...))))
    evaluated by backward recurrence.
    """
    y = np.asarray(y, dtype=float)
    f = y.copy()
    for k in range(depth, 0, -1):
        f = y + (k / 2.0) / f
    return np.exp(-y * y) / _SQRT_PI / f


def erf(x):
    """Error function: Maclaurin series for |x| <= 3, continued fraction beyond."""
    x_arr = np.asarray(x, dtype=float)
    ax = np.abs(x_arr)
    out = np.empty_like(ax)
    small = ax <= 3.0
    if np.any(small):
        out[small] = _erf_maclaurin(x_arr[small])
    if np.any(~small):
        out[~small] = np.sign(x_arr[~small]) * (1.0 - _erfc_cf(ax[~small]))
    return float(out) if np.ndim(x) == 0 else out


# Above this value of x/sqrt(2) the tail is computed directly from erfc to
# keep Q relative-accurate; 1 - erf would cancel ~e^(y^2) digits.
_Q_TAIL_SWITCH = 1.5


def q_function(x):
    """Gaussian tail probability Q(x) = P(N(0,1) > x).

    Q(x) = (1/2) erfc(x/sqrt(2)); erf's Maclaurin series serves the central
    region and a continued fraction the tails.  Relative error <= 1e-12.
    """
    x_arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x_arr)):
        raise DomainError("q_function requires finite input")
    y = x_arr / _SQRT_2
    ay = np.abs(y)
    out = np.empty_like(y)

    small = ay <= _Q_TAIL_SWITCH
    if np.any(small):
        out[small] = 0.5 * (1.0 - _erf_maclaurin(y[small]))
    large = ~small
    if np.any(large):
        tail = 0.5 * _erfc_cf(ay[large])
        out[large] = np.where(y[large] > 0, tail, 1.0 - tail)
    return float(out) if np.isscalar(x) or np.ndim(x) == 0 else out


def blackman_window(t, T_L: float):
    """Symmetric Blackman window on [0, 2*T_L]."""
    return blackman_derivative(t, T_L, 0)


def blackman_derivative(t, T_L: float, order: int = 0):
    """Analytic derivative of any order of the Blackman window.

    g(t) = 0.42 - 0.5 cos(pi t/T_L) + 0.08 cos(2 pi t/T_L) on [0, 2*T_L];
    each cosine differentiates exactly via a quarter-period phase shift.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < -1e-9 * T_L) or np.any(t_arr > 2 * T_L * (1 + 1e-9)):
        raise DomainError(f"t outside window support [0, {2 * T_L}]")
    if order < 0:
        raise DomainError("derivative order must be >= 0")
    w1 = np.pi / T_L
    w2 = 2 * np.pi / T_L

    def shifted_cos(w, q):
        phase = w * t_arr
        m = q % 4
        if m == 0:
            return np.cos(phase)
        if m == 1:
            return -np.sin(phase)
        if m == 2:
            return -np.cos(phase)
        return np.sin(phase)

    val = -0.5 * w1**order * shifted_cos(w1, order) \
        + 0.08 * w2**order * shifted_cos(w2, order)
    if order == 0:
        val = val + 0.42
    return float(val) if np.ndim(t) == 0 else val


def sinc(x):
    """Normalized sinc, sin(pi x)/(pi x) with sinc(0) = 1."""
    return np.sinc(x)
