"""Theoretical moments, correlation bounds and a numeric covariance oracle.

Closed forms exist for the exponential, Lomax, Weibull and log-logistic
families. The half-Cauchy and gamma families are served only through
:func:`hoeffding_covariance_numeric`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from . import special
from .errors import MomentExistenceError, OutOfRangeError, UnsupportedFamilyError
from .families import FamilyKind, ModelParams, _BASES

__all__ = [
    "MomentSummary",
    "HoeffdingResult",
    "RHO_INFIMUM",
    "CLOSED_FORM_FAMILIES",
    "theoretical_moments",
    "covariance",
    "correlation",
    "rho_min",
    "correlation_bounds",
    "tau_from_rho",
    "hoeffding_covariance_numeric",
]

CLOSED_FORM_FAMILIES = (
    FamilyKind.EXPONENTIAL,
    FamilyKind.LOMAX,
    FamilyKind.WEIBULL,
    FamilyKind.LOGLOGISTIC,
)

# global infima of rho over all shapes; the log-logistic figure is numeric
RHO_INFIMUM = {
    FamilyKind.EXPONENTIAL: -0.5,
    FamilyKind.LOMAX: -0.5,
    FamilyKind.WEIBULL: -math.sqrt(6.0) / math.pi,
    FamilyKind.LOGLOGISTIC: -0.54076,
}


@dataclass(frozen=True)
class MomentSummary:
    """Means, variances, covariance and correlation of (X, Y)."""

    mean_x: float
    mean_y: float
    var_x: float
    var_y: float
    cov: float
    rho: float

    def to_dict(self) -> dict:
        return asdict(self)


def _require_closed_form(family: FamilyKind):
    if family not in CLOSED_FORM_FAMILIES:
        raise UnsupportedFamilyError(
            f"no closed-form moments for the {family.value} family; use hoeffding_covariance_numeric"
        )


def _gamma(x):
    return math.exp(float(special.ln_gamma(x)))


# zeta(k) for k >= 2, used by the small-argument log-gamma series below
def _zeta_table(kmax=60, n_terms=64):
    out = {}
    ns = np.arange(1, n_terms, dtype=float)
    big = float(n_terms)
    for k in range(2, kmax + 1):
        head = float(np.sum(ns ** (-k)))
        # Euler-Maclaurin tail from n_terms onward
        tail = (
            big ** (1 - k) / (k - 1)
            + 0.5 * big ** (-k)
            + k * big ** (-k - 1) / 12.0
            - k * (k + 1) * (k + 2) * big ** (-k - 3) / 720.0
            + k * (k + 1) * (k + 2) * (k + 3) * (k + 4) * big ** (-k - 5) / 30240.0
        )
        out[k] = head + tail
    return out


_ZETA = _zeta_table()
_EULER_GAMMA = 0.57721566490153286061


def _lgamma1p(z: float) -> float:
    """log Gamma(1 + z), accurate for small |z| through the Taylor series."""
    if abs(z) > 0.25:
        return float(special.ln_gamma(1.0 + z))
    total = -_EULER_GAMMA * z
    zk = -z  # running (-z)**k
    for k in range(2, len(_ZETA) + 2):
        zk *= -z
        term = _ZETA[k] * zk / k
        total += term
        if abs(term) <= 1e-17 * abs(total):
            break
    return total


def _weibull_var_factor(k: float) -> float:
    """Gamma(1 + 2/k) - Gamma(1 + 1/k)**2 without cancellation for large k."""
    e = 1.0 / k
    if 2.0 * e <= 0.25:
        # Gamma(1+e)^2 * expm1(lgamma(1+2e) - 2 lgamma(1+e)), the Euler term cancels exactly
        diff = 0.0
        ek = -e  # running (-e)**j
        for j in range(2, len(_ZETA) + 2):
            ek *= -e
            term = _ZETA[j] * ek * (2.0**j - 2.0) / j
            diff += term
            if abs(term) <= 1e-17 * abs(diff):
                break
        return math.exp(2.0 * _lgamma1p(e)) * math.expm1(diff)
    return _gamma(1.0 + 2.0 * e) - _gamma(1.0 + e) ** 2


def _loglogistic_mean_factor(k: float) -> float:
    return math.pi / (k * math.sin(math.pi / k))


# Taylor coefficients of tan(u) - u = sum c_j u^(2j+3)
_TAN_MINUS_U = (1 / 3, 2 / 15, 17 / 315, 62 / 2835, 1382 / 155925, 21844 / 6081075, 929569 / 638512875)


def _loglogistic_var_factor(k: float) -> float:
    # 2u/sin(2u) - (u/sin u)^2 = u (tan u - u) / sin(u)^2 with u = pi/k; the
    # left side cancels badly for large k, so tan u - u uses its series there
    u = math.pi / k
    if u < 0.1:
        u2 = u * u
        t = u**3 * math.fsum(c * u2**j for j, c in enumerate(_TAN_MINUS_U))
    else:
        t = math.tan(u) - u
    s = math.sin(u)
    return (u / s) * (t / s)


def _check_shape(name, value, bound, what):
    if not value > bound:
        raise MomentExistenceError(f"{what} requires {name} > {bound:g}, got {value}")


# ---------------------------------------------------------------------------
# per-family unit moments: mean and variance of the unit-rate base, and the
# covariance of (alpha X, gamma Y), which is free of alpha and gamma


def _unit_mean(family, k):
    if family is FamilyKind.EXPONENTIAL:
        return 1.0
    if family is FamilyKind.LOMAX:
        return 1.0 / (k - 1.0)
    if family is FamilyKind.WEIBULL:
        return _gamma(1.0 + 1.0 / k)
    return _loglogistic_mean_factor(k)


def _unit_var(family, k):
    if family is FamilyKind.EXPONENTIAL:
        return 1.0
    if family is FamilyKind.LOMAX:
        return k / ((k - 1.0) ** 2 * (k - 2.0))
    if family is FamilyKind.WEIBULL:
        return _weibull_var_factor(k)
    return _loglogistic_var_factor(k)


# below this tau (tau^lambda for the log-logistic) the Lomax and log-logistic
# closed forms lose digits to cancellation
_SMALL_TAU = 1e-3
# above this Y shape the log-logistic closed form loses digits the same way
_LARGE_NU = 1e4


def _unit_cov_small_tau(family, lam, nu, tau):
    """E[Y1] * int F0(x) [F0(tau x)^{c*} - 1] dx, free of cancellation for small tau or c*."""
    base = _BASES[family]
    c = base.c_star(nu)
    # the bracket at x = 1 sets the scale, so the quadrature never sees subnormals
    scale = -math.expm1(c * float(base.log_sf(np.float64(tau), lam)))
    if tau < 1e-280 or scale < 1e-300:
        # the covariance is far below any double-precision moment here
        return -0.0
    log_scale = math.log(scale)

    def log_abs_g(x):
        # log of F0(x) (1 - F0(tau x)^{c*}) / scale, assembled in log space
        x = np.float64(x)
        with np.errstate(over="ignore", divide="ignore"):
            u = c * float(base.log_sf(tau * x, lam))
            return float(base.log_sf(x, lam)) + math.log(-math.expm1(u)) - log_scale if u < 0 else -math.inf

    def g(x):
        return -math.exp(log_abs_g(x))

    def gs(s):
        return -math.exp(log_abs_g(math.exp(s)) + s)

    # the integrand has features near x = 1 and x = 1/tau; cover log x up to the
    # overflow limit in short chunks with a break at the second knee
    knee = min(-math.log(tau), 700.0)
    top = min(knee + 60.0, 709.0)
    edges = np.union1d(np.linspace(0.0, top, math.ceil(top / 20.0) + 1), [knee])
    pieces = [(g, 0.0, 1.0)] + [(gs, lo, hi) for lo, hi in zip(edges[:-1], edges[1:])]

    def total(epsabs, epsrel):
        return sum(quad(f, lo, hi, epsabs=epsabs, epsrel=epsrel, limit=200)[0] for f, lo, hi in pieces)

    # a rough pass fixes the magnitude so chunks with negligible mass stop early
    rough = total(0.0, 1e-6)
    val = total(1e-15 * abs(rough), 1e-13)
    return _unit_mean(family, nu) * val * scale


def _unit_cov(family, lam, nu, tau):
    if tau == 0.0:
        return 0.0
    if family is FamilyKind.LOMAX and tau < _SMALL_TAU:
        return _unit_cov_small_tau(family, lam, nu, tau)
    if family is FamilyKind.LOGLOGISTIC and (tau**lam < _SMALL_TAU or nu > _LARGE_NU):
        # the closed form cancels to relative size eps / tau^lambda and
        # eps * nu; the integral does neither
        return _unit_cov_small_tau(family, lam, nu, tau)
    if family is FamilyKind.EXPONENTIAL:
        return -tau / (1.0 + tau)
    if family is FamilyKind.LOMAX:
        hyp = special.gauss_2f1(lam, 1.0, 2.0 * lam, 1.0 - tau, one_minus_z=tau)
        return (hyp / (2.0 * lam - 1.0) - 1.0 / (lam - 1.0)) / (nu - 1.0)
    if family is FamilyKind.WEIBULL:
        tl = tau**lam
        factor = math.expm1(-math.log1p(tl / nu) / lam)
        return _gamma(1.0 + 1.0 / nu) * _gamma(1.0 + 1.0 / lam) * factor
    # log-logistic
    a, b = 1.0 / nu, 1.0 / lam
    tl = tau**lam
    lead = math.exp(
        float(special.ln_gamma(b)) + float(special.ln_gamma(1.0 + a - b)) - float(special.ln_gamma(1.0 + a))
    )
    hyp = special.gauss_2f1(a, b, 1.0 + a, 1.0 - tl, one_minus_z=tl)
    return math.pi / (lam * nu * math.sin(math.pi / nu)) * (lead * hyp - math.pi / math.sin(math.pi / lam))


def _shape_checks(family, lam, nu, need_var):
    if family in (FamilyKind.LOMAX, FamilyKind.LOGLOGISTIC):
        bound = 2.0 if need_var else 1.0
        what = "variance" if need_var else "mean and covariance"
        _check_shape("lambda", lam, bound, what)
        _check_shape("nu", nu, bound, what)


def covariance(p: ModelParams) -> float:
    """Closed-form Cov(X, Y); needs only the means (lambda, nu > 1 for Lomax and log-logistic)."""
    _require_closed_form(p.family)
    _shape_checks(p.family, p.lam, p.nu, need_var=False)
    return _unit_cov(p.family, p.lam, p.nu, p.tau) / (p.alpha * p.gamma)


def _rho_unit(family, lam, nu, tau):
    cov = _unit_cov(family, lam, nu, tau)
    return cov / math.sqrt(_unit_var(family, lam) * _unit_var(family, nu))


def correlation(p: ModelParams) -> float:
    """Closed-form Pearson correlation; independent of the rates alpha and gamma."""
    _require_closed_form(p.family)
    _shape_checks(p.family, p.lam, p.nu, need_var=True)
    return _rho_unit(p.family, p.lam, p.nu, p.tau)


def theoretical_moments(p: ModelParams) -> MomentSummary:
    """Closed-form means, variances, covariance and correlation.

    Raises
    ------
    UnsupportedFamilyError
        For the half-Cauchy and gamma families.
    MomentExistenceError
        When a Lomax or log-logistic shape is at most 2.
    """
    _require_closed_form(p.family)
    _shape_checks(p.family, p.lam, p.nu, need_var=True)
    fam = p.family
    vx = _unit_var(fam, p.lam)
    vy = _unit_var(fam, p.nu)
    ucov = _unit_cov(fam, p.lam, p.nu, p.tau)
    return MomentSummary(
        mean_x=_unit_mean(fam, p.lam) / p.alpha,
        mean_y=_unit_mean(fam, p.nu) / p.gamma,
        var_x=vx / p.alpha**2,
        var_y=vy / p.gamma**2,
        cov=ucov / (p.alpha * p.gamma),
        rho=ucov / math.sqrt(vx * vy),
    )


def rho_min(family, lam=None, nu=None) -> float:
    """Correlation at tau = 1, the most negative value the model reaches for these shapes."""
    fam = FamilyKind.parse(family)
    _require_closed_form(fam)
    if fam is FamilyKind.EXPONENTIAL:
        return -0.5
    _shape_checks(fam, lam, nu, need_var=True)
    if fam is FamilyKind.LOMAX:
        return -(lam / (2.0 * lam - 1.0)) * math.sqrt((lam - 2.0) / lam) * math.sqrt((nu - 2.0) / nu)
    return _rho_unit(fam, float(lam), float(nu), 1.0)


def correlation_bounds(family, lam=None, nu=None) -> tuple[float, float]:
    """Interval ``(rho_min(lambda, nu), 0)`` of attainable correlations."""
    return rho_min(family, lam, nu), 0.0


def tau_from_rho(family, lam=None, nu=None, rho_target: float = 0.0, tol: float = 1e-12) -> float:
    """Dependence parameter tau in [0, 1] whose model correlation equals ``rho_target``.

    Uses that rho decreases monotonically from 0 at tau = 0 to rho_min at tau = 1.

    Raises
    ------
    OutOfRangeError
        If ``rho_target`` lies outside ``[rho_min, 0]``.
    """
    fam = FamilyKind.parse(family)
    _require_closed_form(fam)
    rho_target = float(rho_target)
    lo_rho = rho_min(fam, lam, nu)
    # rho(1) from the general formula may round a hair below the closed-form minimum
    if lo_rho - 1e-12 <= rho_target < lo_rho:
        rho_target = lo_rho
    if rho_target > 0.0 or rho_target < lo_rho:
        raise OutOfRangeError(
            f"rho = {rho_target:.6g} is outside the attainable range [{lo_rho:.6g}, 0] for {fam.value}"
        )
    if rho_target == 0.0:
        return 0.0
    if fam is FamilyKind.EXPONENTIAL:
        return -rho_target / (1.0 + rho_target)
    if rho_target == lo_rho:
        return 1.0
    return brentq(lambda t: _rho_unit(fam, lam, nu, t) - rho_target, 0.0, 1.0, xtol=tol, maxiter=200)


# ---------------------------------------------------------------------------
# numeric Hoeffding covariance


@dataclass(frozen=True)
class HoeffdingResult:
    """Numeric covariance with its estimated quadrature error."""

    cov: float
    error: float
    truncated: bool
    note: str = ""


_GL_ORDER = 20
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(_GL_ORDER)


def _log_grid(lo, hi, panels):
    """Composite Gauss-Legendre nodes and weights in s = log(t) on [log lo, log hi]."""
    edges = np.linspace(math.log(lo), math.log(hi), panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    s = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    t = np.exp(s)
    return t, w * t  # dt = t ds


def _cov_on_grid(p: ModelParams, x_lo, x_hi, t_lo, t_hi, panels):
    base = _BASES[p.family]
    x, wx = _log_grid(x_lo, x_hi, panels)
    t, wt = _log_grid(t_lo, t_hi, panels)
    sf0 = np.exp(base.log_sf(p.alpha * x, p.lam))
    if p.tau == 0.0:
        return 0.0
    # r = beta(x) / gamma >= 1
    log_r = -base.c_star(p.nu) * base.log_sf(p.alpha * p.tau * x, p.lam)
    # inner integral over y with t = gamma y: (1/gamma) int [F1(r t) - F1(t)] dt
    rt = np.exp(log_r)[:, None] * t[None, :]
    with np.errstate(over="ignore"):
        sf_rt = np.exp(base.log_sf(rt.ravel(), p.nu)).reshape(rt.shape)
    sf_t = np.exp(base.log_sf(t, p.nu))
    inner = (sf_rt - sf_t[None, :]) @ wt / p.gamma
    return float(np.sum(wx * sf0 * inner))


def hoeffding_covariance_numeric(
    p: ModelParams, tol: float = 1e-6, tail: float = 1e-9, full_output: bool = False
):
    """Cov(X, Y) from Hoeffding's identity by nested quadrature.

    Integrates ``F0(x) [F1(beta(x) y) - F1(gamma y)]`` over the quadrant,
    truncated at the ``1 - tail`` marginal quantiles. Both axes use composite
    Gauss-Legendre rules in log coordinates. The panel count doubles until two
    successive estimates agree to ``tol``.

    For the half-Cauchy family the covariance does not exist and the value
    returned is that of the truncated integral (``truncated=True``).

    Returns
    -------
    float or HoeffdingResult
        The covariance, or the full result when ``full_output`` is set.
    """
    from .families import marginal_quantile_x, marginal_quantile_y

    if p.tau == 0.0:
        res = HoeffdingResult(0.0, 0.0, p.family is FamilyKind.HALFCAUCHY)
        return res if full_output else res.cov
    x_hi = float(marginal_quantile_x(p, 1.0 - tail))
    t_hi = float(marginal_quantile_y(p, 1.0 - tail)) * p.gamma
    x_lo = min(1e-10 / p.alpha, 1e-6 * x_hi)
    t_lo = min(1e-10, 1e-6 * t_hi)
    panels = 8
    prev = _cov_on_grid(p, x_lo, x_hi, t_lo, t_hi, panels)
    err = math.inf
    for _ in range(6):
        panels *= 2
        cur = _cov_on_grid(p, x_lo, x_hi, t_lo, t_hi, panels)
        err = abs(cur - prev)
        prev = cur
        if err <= tol * 1e-2 * (1.0 + abs(cur)):
            break
    heavy = p.family is FamilyKind.HALFCAUCHY
    note = "covariance diverges; value is the integral truncated at the 1 - tail quantiles" if heavy else ""
    if err > tol:
        note = (note + "; " if note else "") + f"quadrature error estimate {err:.2e} exceeds tol"
    res = HoeffdingResult(prev, err, heavy, note)
    return res if full_output else res.cov
