"""Special functions needed by the AFC family formulas.

Everything here is implemented directly (Lanczos log-gamma, series and
continued-fraction incomplete gamma, Gauss hypergeometric series with a
``z -> 1 - z`` connection formula, Halley iteration for the lower Lambert W
branch, and a continued-fraction incomplete beta behind the Student-t CDF).
Functions accept scalars or numpy arrays unless noted otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NonConvergenceError

__all__ = [
    "Accuracy",
    "DEFAULT_ACCURACY",
    "ln_gamma",
    "gamma_fn",
    "digamma",
    "regularized_gamma_p",
    "regularized_gamma_q",
    "log_regularized_gamma_q",
    "upper_incomplete_gamma",
    "lower_incomplete_gamma",
    "gauss_2f1",
    "lambert_w_lower",
    "lambert_w_lower_from_log",
    "regularized_beta",
    "student_t_pdf",
    "student_t_cdf",
    "student_t_quantile",
]


@dataclass(frozen=True)
class Accuracy:
    """Tolerance and iteration budget shared by the iterative kernels."""

    abs_tol: float = 1e-12
    max_iter: int = 500

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise DomainError(f"abs_tol must be positive, got {self.abs_tol}")
        if self.max_iter < 1:
            raise DomainError(f"max_iter must be >= 1, got {self.max_iter}")


DEFAULT_ACCURACY = Accuracy()

_EPS = np.finfo(float).eps
_TINY = 1e-300

# Lanczos approximation, g = 7, n = 9.
_LANCZOS_G = 7.0
_LANCZOS_COEF = np.array(
    [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ]
)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def _lanczos_lngamma(x):
    # valid for x >= 0.5
    z = x - 1.0
    s = np.full_like(z, _LANCZOS_COEF[0])
    for k in range(1, len(_LANCZOS_COEF)):
        s = s + _LANCZOS_COEF[k] / (z + k)
    t = z + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (z + 0.5) * np.log(t) - t + np.log(s)


def ln_gamma(x):
    """Natural log of the gamma function for positive arguments.

    Raises
    ------
    DomainError
        If any argument is not strictly positive.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("ln_gamma requires x > 0")
    out = np.empty_like(arr)
    big = arr >= 0.5
    out[big] = _lanczos_lngamma(arr[big])
    small = ~big
    if np.any(small):
        xs = arr[small]
        # reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
        out[small] = math.log(math.pi) - np.log(np.sin(math.pi * xs)) - _lanczos_lngamma(1.0 - xs)
    return out[()] if out.ndim == 0 else out


def _lgamma_sign(x: float) -> tuple[float, float]:
    """log|Gamma(x)| and sign(Gamma(x)) for real non-pole x (scalar)."""
    if x > 0:
        return float(ln_gamma(x)), 1.0
    if x == math.floor(x):
        raise DomainError(f"Gamma has a pole at {x}")
    s = math.sin(math.pi * x)
    lg = math.log(math.pi) - math.log(abs(s)) - float(ln_gamma(1.0 - x))
    return lg, math.copysign(1.0, s)


def gamma_fn(x: float) -> float:
    """Real gamma function at a scalar, including negative non-integers."""
    lg, sign = _lgamma_sign(float(x))
    return sign * math.exp(lg)


def digamma(x: float) -> float:
    """Digamma function psi(x) for scalar x > 0."""
    x = float(x)
    if not x > 0:
        raise DomainError("digamma requires x > 0")
    acc = 0.0
    while x < 6.0:
        acc -= 1.0 / x
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    # asymptotic series with Bernoulli numbers B2..B12
    series = inv2 * (
        1.0 / 12
        - inv2 * (1.0 / 120 - inv2 * (1.0 / 252 - inv2 * (1.0 / 240 - inv2 * (1.0 / 132 - inv2 * 691.0 / 32760))))
    )
    return acc + math.log(x) - 0.5 * inv - series


# ---------------------------------------------------------------------------
# incomplete gamma


def _check_gamma_args(s, x):
    s = np.asarray(s, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(~(s > 0)):
        raise DomainError("incomplete gamma requires s > 0")
    if np.any(~(x >= 0)):
        raise DomainError("incomplete gamma requires x >= 0")
    s, x = np.broadcast_arrays(s, x)
    return s.astype(float), x.astype(float)


def _log_prefactor(s, x):
    # log(x^s e^-x / Gamma(s)); x > 0
    return s * np.log(x) - x - ln_gamma(s)


def _gamma_series(s, x, acc: Accuracy):
    """Series for P(s, x) / prefactor, i.e. sum_n x^n / (s (s+1) ... (s+n))."""
    term = 1.0 / s
    total = term.copy()
    ap = s.copy()
    active = np.ones(s.shape, dtype=bool)
    for _ in range(acc.max_iter):
        ap = ap + 1.0
        term = np.where(active, term * x / ap, 0.0)
        total = total + term
        active = active & (np.abs(term) > np.abs(total) * _EPS)
        if not active.any():
            return total
    raise NonConvergenceError(
        f"incomplete gamma series did not converge in {acc.max_iter} iterations"
    )


def _gamma_cf(s, x, acc: Accuracy):
    """Modified Lentz evaluation of the continued fraction for Q(s, x) / prefactor."""
    b = x + 1.0 - s
    c = np.full(s.shape, 1.0 / _TINY)
    d = 1.0 / b
    h = d.copy()
    active = np.ones(s.shape, dtype=bool)
    for i in range(1, acc.max_iter + 1):
        an = -i * (i - s)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = b + an / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        delta = np.where(active, d * c, 1.0)
        h = h * delta
        active = active & (np.abs(delta - 1.0) > _EPS)
        if not active.any():
            return h
    raise NonConvergenceError(
        f"incomplete gamma continued fraction did not converge in {acc.max_iter} iterations"
    )


def _gamma_pq(s, x, acc: Accuracy):
    """Return (P, Q, logQ) using the series for x < s+1 and the CF otherwise."""
    p = np.zeros(s.shape)
    q = np.ones(s.shape)
    logq = np.zeros(s.shape)
    pos = x > 0
    ser = pos & (x < s + 1.0)
    cf = pos & ~ser
    if ser.any():
        ss, xs = s[ser], x[ser]
        pv = np.exp(_log_prefactor(ss, xs)) * _gamma_series(ss, xs, acc)
        pv = np.minimum(pv, 1.0)
        p[ser] = pv
        q[ser] = 1.0 - pv
        logq[ser] = np.log1p(-pv)
    if cf.any():
        sc, xc = s[cf], x[cf]
        lq = _log_prefactor(sc, xc) + np.log(_gamma_cf(sc, xc, acc))
        qv = np.exp(lq)
        logq[cf] = lq
        q[cf] = qv
        p[cf] = 1.0 - qv
    return p, q, logq


def _unwrap(arr):
    return arr[()] if arr.ndim == 0 else arr


def regularized_gamma_p(s, x, accuracy: Accuracy = DEFAULT_ACCURACY):
    """Regularized lower incomplete gamma P(s, x) = gamma*(s, x) / Gamma(s)."""
    s, x = _check_gamma_args(s, x)
    return _unwrap(_gamma_pq(s, x, accuracy)[0])


def regularized_gamma_q(s, x, accuracy: Accuracy = DEFAULT_ACCURACY):
    """Regularized upper incomplete gamma Q(s, x) = Gamma(s, x) / Gamma(s)."""
    s, x = _check_gamma_args(s, x)
    return _unwrap(_gamma_pq(s, x, accuracy)[1])


def log_regularized_gamma_q(s, x, accuracy: Accuracy = DEFAULT_ACCURACY):
    """log Q(s, x), accurate in the far upper tail where Q underflows."""
    s, x = _check_gamma_args(s, x)
    return _unwrap(_gamma_pq(s, x, accuracy)[2])


def upper_incomplete_gamma(s, x, accuracy: Accuracy = DEFAULT_ACCURACY):
    """Gamma(s, x) = integral from x to infinity of t^(s-1) e^(-t) dt."""
    s, x = _check_gamma_args(s, x)
    _, _, logq = _gamma_pq(s, x, accuracy)
    return _unwrap(np.exp(logq + ln_gamma(s)))


def lower_incomplete_gamma(s, x, accuracy: Accuracy = DEFAULT_ACCURACY):
    """gamma*(s, x) = integral from 0 to x of t^(s-1) e^(-t) dt."""
    s, x = _check_gamma_args(s, x)
    p, _, _ = _gamma_pq(s, x, accuracy)
    return _unwrap(p * np.exp(ln_gamma(s)))


# ---------------------------------------------------------------------------
# Gauss hypergeometric 2F1 on [0, 1)

_CONNECTION_THRESHOLD = 0.9
_NEAR_INTEGER = 1e-6
_INTERP_STEP = 1e-3


def _series_2f1(a, b, c, z, acc: Accuracy) -> float:
    total = 1.0
    term = 1.0
    for n in range(acc.max_iter):
        term *= (a + n) * (b + n) / ((c + n) * (n + 1.0)) * z
        total += term
        if term == 0.0:
            return total
        ratio = abs((a + n + 1) * (b + n + 1) / ((c + n + 1) * (n + 2.0)) * z)
        # geometric bound on the remaining tail once the term ratio is below one
        if ratio < 1.0:
            tail = abs(term) * ratio / (1.0 - ratio)
            if tail <= 0.01 * acc.abs_tol and abs(term) <= _EPS * abs(total):
                return total
    raise NonConvergenceError(
        f"2F1({a}, {b}; {c}; {z}) series did not converge in {acc.max_iter} terms"
    )


def _connection_generic(a, b, c, w, acc: Accuracy) -> float:
    # z -> 1 - z for non-integer m = c - a - b; w = 1 - z
    m = c - a - b
    lg_c, s_c = _lgamma_sign(c)
    lg_m, s_m = _lgamma_sign(m)
    lg_mm, s_mm = _lgamma_sign(-m)
    lg_ca, s_ca = _lgamma_sign(c - a)
    lg_cb, s_cb = _lgamma_sign(c - b)
    lg_a, s_a = _lgamma_sign(a)
    lg_b, s_b = _lgamma_sign(b)
    coef_a = s_c * s_m * s_ca * s_cb * math.exp(lg_c + lg_m - lg_ca - lg_cb)
    coef_b = s_c * s_mm * s_a * s_b * math.exp(lg_c + lg_mm - lg_a - lg_b + m * math.log(w))
    first = _series_2f1(a, b, 1.0 - m, w, acc)
    second = _series_2f1(c - a, c - b, 1.0 + m, w, acc)
    return coef_a * first + coef_b * second


def _connection_integer(a, b, big_m: int, w, acc: Accuracy) -> float:
    # z -> 1 - z when c - a - b = big_m is a positive integer (logarithmic case)
    c = a + b + big_m
    lg_c = float(ln_gamma(c))
    finite = 0.0
    term = 1.0
    for n in range(big_m):
        if n > 0:
            term *= (a + n - 1) * (b + n - 1) / (n * (n - big_m)) * w
        finite += term
    finite *= math.exp(float(ln_gamma(big_m)) + lg_c - float(ln_gamma(a + big_m)) - float(ln_gamma(b + big_m)))

    log_w = math.log(w)
    psi_n1 = digamma(1.0)
    psi_nm1 = digamma(big_m + 1.0)
    psi_a = digamma(a + big_m)
    psi_b = digamma(b + big_m)
    coef = 1.0  # (a+m)_n (b+m)_n m! / (n! (n+m)!); the 1/m! sits in log_scale
    total = 0.0
    for n in range(acc.max_iter):
        piece = coef * (log_w - psi_n1 - psi_nm1 + psi_a + psi_b)
        total += piece
        if n > 2 and abs(piece) <= _EPS * abs(total):
            break
        coef *= (a + big_m + n) * (b + big_m + n) / ((n + 1.0) * (n + 1.0 + big_m)) * w
        psi_n1 += 1.0 / (n + 1.0)
        psi_nm1 += 1.0 / (n + 1.0 + big_m)
        psi_a += 1.0 / (a + big_m + n)
        psi_b += 1.0 / (b + big_m + n)
    else:
        raise NonConvergenceError("2F1 logarithmic connection series did not converge")
    sign = -1.0 if big_m % 2 == 0 else 1.0  # -(z-1)^m = -(-w)^m
    log_scale = big_m * log_w + lg_c - float(ln_gamma(a)) - float(ln_gamma(b)) - math.lgamma(big_m + 1.0)
    return finite + sign * math.exp(log_scale) * total


def gauss_2f1(
    a: float,
    b: float,
    c: float,
    z: float,
    accuracy: Accuracy = DEFAULT_ACCURACY,
    one_minus_z: float | None = None,
) -> float:
    """Gauss hypergeometric function 2F1(a, b; c; z) for real 0 <= z < 1.

    Intended for positive-coefficient parameter patterns (a, b, c > 0). For
    ``z > 0.9`` with ``c - a - b > 0`` the series in ``1 - z`` obtained from the
    connection formula is summed instead of the slowly converging power series;
    an integer ``c - a - b`` uses the logarithmic form of that formula.

    Parameters
    ----------
    one_minus_z : float, optional
        ``1 - z`` supplied directly. Use it when ``z`` is so close to one
        that forming it would lose the distance to the singularity.

    Raises
    ------
    DomainError
        If ``c <= 0`` or ``z`` is outside ``[0, 1)``.
    NonConvergenceError
        If a series exceeds ``accuracy.max_iter`` terms.
    """
    a, b, c, z = float(a), float(b), float(c), float(z)
    w = 1.0 - z if one_minus_z is None else float(one_minus_z)
    if not c > 0:
        raise DomainError(f"2F1 requires c > 0, got {c}")
    if not (0.0 <= z <= 1.0 and 0.0 < w <= 1.0):
        raise DomainError(f"2F1 requires 0 <= z < 1, got {z}")
    if w == 1.0 and z == 0.0:
        return 1.0
    m = c - a - b
    if w >= 1.0 - _CONNECTION_THRESHOLD or m <= 1e-3:
        return _series_2f1(a, b, c, 1.0 - w if one_minus_z is not None else z, accuracy)
    big_m = round(m)
    dist = m - big_m
    if big_m >= 1 and dist == 0.0:
        return _connection_integer(a, b, big_m, w, accuracy)
    if big_m >= 1 and abs(dist) < _NEAR_INTEGER:
        # quadratic interpolation in c through the exact integer case
        c0 = a + b + big_m
        h = _INTERP_STEP
        f0 = _connection_integer(a, b, big_m, w, accuracy)
        fp = _connection_generic(a, b, c0 + h, w, accuracy)
        fm = _connection_generic(a, b, c0 - h, w, accuracy)
        return f0 + dist * (fp - fm) / (2 * h) + dist * dist * (fp - 2 * f0 + fm) / (2 * h * h)
    return _connection_generic(a, b, c, w, accuracy)


# ---------------------------------------------------------------------------
# Lambert W, lower branch

_INV_E = math.exp(-1.0)


def lambert_w_lower_from_log(log_neg_x, accuracy: Accuracy = DEFAULT_ACCURACY):
    """Lower-branch W at ``x = -exp(log_neg_x)`` for ``log_neg_x <= -1``.

    Solves ``w + log(-w) = log_neg_x`` with ``w <= -1``; usable where ``x``
    itself would underflow.
    """
    ell = np.asarray(log_neg_x, dtype=float)
    if np.any(~(ell <= -1.0 + 1e-15)):
        raise DomainError("lower Lambert W requires log(-x) <= -1")
    ell = np.minimum(ell, -1.0)
    # write w = -1 - t and solve t - log1p(t) = delta with delta = -1 - L;
    # the map is convex and increasing in t, so Newton converges from either
    # the branch-point series or the asymptotic start
    delta = -1.0 - ell
    sq = np.sqrt(2.0 * delta)
    t = np.where(delta < 2.0, sq + sq * sq / 3.0 + sq**3 / 36.0, -ell + np.log(-ell) - 1.0)
    for _ in range(accuracy.max_iter):
        with np.errstate(divide="ignore", invalid="ignore"):
            step = (t - np.log1p(t) - delta) * (1.0 + t) / t
        step = np.where(t > 0.0, step, 0.0)
        t_new = np.maximum(t - step, 0.0)
        if np.all(np.abs(t_new - t) <= 4 * _EPS * (1.0 + t_new)):
            return _unwrap(-1.0 - t_new)
        t = t_new
    raise NonConvergenceError("lambert_w_lower_from_log did not converge")


def lambert_w_lower(x, accuracy: Accuracy = DEFAULT_ACCURACY):
    """Lower branch W_{-1}(x) of the Lambert W function on [-1/e, 0).

    Returns the solution ``w <= -1`` of ``w * exp(w) = x``, refined by Halley
    iterations until the step stalls; the residual ``|w e^w - x| / |x|`` must
    end below ``accuracy.abs_tol``.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(~((arr >= -_INV_E - 1e-16) & (arr < 0))):
        raise DomainError("lower Lambert W requires -1/e <= x < 0")
    arr = np.maximum(arr, -_INV_E)
    w = np.empty_like(arr)
    near = arr < -0.25
    # branch-point series in p = -sqrt(2 (1 + e x))
    p = -np.sqrt(np.maximum(2.0 * (1.0 + math.e * arr[near]), 0.0))
    w[near] = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    far = ~near
    l1 = np.log(-arr[far])
    l2 = np.log(-l1)
    w[far] = l1 - l2 + l2 / l1
    w = np.minimum(w, -1.0)
    at_branch = arr == -_INV_E
    scale = np.abs(arr)
    for _ in range(accuracy.max_iter):
        ew = np.exp(w)
        f = w * ew - arr
        wp1 = w + 1.0
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * np.where(wp1 == 0, -_EPS, wp1))
        step = np.where(at_branch | (denom == 0), 0.0, f / np.where(denom == 0, 1.0, denom))
        w_new = np.minimum(w - step, -1.0)
        if np.all(np.abs(w_new - w) <= 4 * _EPS * np.abs(w_new)):
            w = w_new
            break
        w = w_new
    w = np.where(at_branch, -1.0, w)
    # residual relative to |x| so tiny arguments are held to the same standard
    resid = np.abs(w * np.exp(w) - arr) / scale
    if np.any((resid > accuracy.abs_tol) & ~at_branch):
        raise NonConvergenceError("lambert_w_lower residual above tolerance")
    return _unwrap(w)


# ---------------------------------------------------------------------------
# incomplete beta and Student t


def _beta_cf(a, b, x, acc: Accuracy):
    """Lentz continued fraction for the incomplete beta (NR betacf), vectorized."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = np.ones(x.shape)
    d = 1.0 - qab * x / qap
    d = np.where(np.abs(d) < _TINY, _TINY, d)
    d = 1.0 / d
    h = d.copy()
    active = np.ones(x.shape, dtype=bool)
    for m in range(1, acc.max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        h = h * np.where(active, d * c, 1.0)
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        delta = np.where(active, d * c, 1.0)
        h = h * delta
        active = active & (np.abs(delta - 1.0) > _EPS)
        if not active.any():
            return h
    raise NonConvergenceError("incomplete beta continued fraction did not converge")


def regularized_beta(a, b, x, accuracy: Accuracy = DEFAULT_ACCURACY, one_minus_x=None):
    """Regularized incomplete beta I_x(a, b) for scalar a, b > 0.

    ``one_minus_x`` may be supplied to avoid forming ``1 - x`` when ``x`` is
    close to one.
    """
    x = np.asarray(x, dtype=float)
    y = 1.0 - x if one_minus_x is None else np.asarray(one_minus_x, dtype=float)
    if not (a > 0 and b > 0):
        raise DomainError("regularized_beta requires a, b > 0")
    if np.any((x < 0) | (x > 1)):
        raise DomainError("regularized_beta requires 0 <= x <= 1")
    x, y = np.broadcast_arrays(x, y)
    out = np.empty(x.shape)
    lbeta = float(ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b))
    zero = x <= 0
    one = y <= 0
    out[zero] = 0.0
    out[one] = 1.0
    mid = ~(zero | one)
    direct = mid & (x < (a + 1.0) / (a + b + 2.0))
    flip = mid & ~direct
    if direct.any():
        xd, yd = x[direct], y[direct]
        front = np.exp(lbeta + a * np.log(xd) + b * np.log(yd))
        out[direct] = front * _beta_cf(a, b, xd, accuracy) / a
    if flip.any():
        xf, yf = x[flip], y[flip]
        front = np.exp(lbeta + a * np.log(xf) + b * np.log(yf))
        out[flip] = 1.0 - front * _beta_cf(b, a, yf, accuracy) / b
    return _unwrap(out)


def _check_dof(v):
    if not (np.isscalar(v) or np.ndim(v) == 0) or not float(v) > 0:
        raise DomainError(f"degrees of freedom must be a positive scalar, got {v}")
    return float(v)


def student_t_pdf(v, x):
    """Student-t density with ``v`` degrees of freedom."""
    v = _check_dof(v)
    x = np.asarray(x, dtype=float)
    lnorm = float(ln_gamma((v + 1) / 2) - ln_gamma(v / 2)) - 0.5 * math.log(v * math.pi)
    return _unwrap(np.exp(lnorm - (v + 1) / 2 * np.log1p(x * x / v)))


def _t_tail(v, x_abs, accuracy):
    # P(T > |x|) = I_{v/(v+x^2)}(v/2, 1/2) / 2
    x2 = x_abs * x_abs
    denom = v + x2
    return 0.5 * np.asarray(regularized_beta(v / 2, 0.5, v / denom, accuracy, one_minus_x=x2 / denom))


def student_t_cdf(v, x, accuracy: Accuracy = DEFAULT_ACCURACY):
    """Student-t CDF via the regularized incomplete beta."""
    v = _check_dof(v)
    x = np.asarray(x, dtype=float)
    tail = _t_tail(v, np.abs(x), accuracy)
    return _unwrap(np.where(x >= 0, 1.0 - tail, tail))


def student_t_quantile(v, p, accuracy: Accuracy = DEFAULT_ACCURACY):
    """Student-t quantile by safeguarded Newton iteration on the tail probability."""
    v = _check_dof(v)
    p = np.asarray(p, dtype=float)
    if np.any(~((p > 0) & (p < 1))):
        raise DomainError("student_t_quantile requires 0 < p < 1")
    q = np.minimum(p, 1.0 - p)  # target upper-tail probability, <= 1/2
    lo = np.zeros(q.shape)
    hi = np.ones(q.shape)
    # grow the bracket until tail(hi) < q
    for _ in range(2000):
        short = _t_tail(v, hi, accuracy) > q
        if not short.any():
            break
        hi = np.where(short, hi * 2.0, hi)
    t = 0.5 * (lo + hi)
    for _ in range(accuracy.max_iter):
        f = _t_tail(v, t, accuracy) - q
        lo = np.where(f > 0, t, lo)
        hi = np.where(f <= 0, t, hi)
        dens = np.asarray(student_t_pdf(v, t))
        newton = t + f / np.where(dens > 0, dens, _TINY)
        inside = (newton > lo) & (newton < hi)
        t_new = np.where(inside, newton, 0.5 * (lo + hi))
        conv = (np.abs(f) <= 1e-15 * q) | (hi - lo <= 4 * _EPS * np.maximum(hi, 1.0))
        if conv.all():
            t = t_new
            break
        t = t_new
    else:
        raise NonConvergenceError("student_t_quantile did not converge")
    return _unwrap(np.where(p >= 0.5, t, -t) * np.where(p == 0.5, 0.0, 1.0))
