"""The six AFC families and their analytic building blocks.

Each family is described by a unit-rate base survival ``K(z; k)``. The
marginals are ``F0(x) = K(alpha x; lambda)`` and ``F1(t) = K(t; nu)``, the
acceleration is ``beta(x) = gamma / F0(tau x) ** c_star`` and the joint
survival is ``S(x, y) = F0(x) F1(beta(x) y)``.

Differentiating ``S`` twice gives the joint density in the factored form

    f(x, y) = beta F0(x) f1(t) [D(x) + tau h0(tau x) E(t)],   t = beta(x) y,

with ``D(x) = h0(x) - tau h0(tau x)`` and ``E(t) = 1 - c_star (1 + t f1'(t) / f1(t))``.
Both bracket terms are non-negative for in-contract parameters, so the
density is evaluated as a sum of positive pieces in log space. This avoids
the large cancelling powers in the expanded per-family expressions.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import special
from .errors import DensityBugError, DomainError, NumericOverflowError, UnsupportedFamilyError

__all__ = [
    "FamilyKind",
    "ModelParams",
    "JointPoint",
    "marginal_survival_x",
    "marginal_survival_y",
    "marginal_density_x",
    "marginal_density_y",
    "marginal_cdf_x",
    "marginal_cdf_y",
    "hazard_x",
    "c_star",
    "acceleration",
    "log_acceleration",
    "joint_survival",
    "log_joint_survival",
    "joint_density",
    "log_joint_density",
    "log_likelihood",
    "conditional_cdf_y_given_x",
    "marginal_quantile_x",
    "marginal_quantile_y",
]

_LOG2 = math.log(2.0)
_LOG_2_OVER_PI = math.log(2.0 / math.pi)


class FamilyKind(enum.Enum):
    """The six supported AFC families."""

    EXPONENTIAL = "exponential"
    LOMAX = "lomax"
    WEIBULL = "weibull"
    LOGLOGISTIC = "loglogistic"
    HALFCAUCHY = "halfcauchy"
    GAMMA = "gamma"

    @classmethod
    def parse(cls, value) -> "FamilyKind":
        """Accept an enum member or a loosely formatted name such as ``"log-logistic"``."""
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "").replace("_", "").replace(" ", "")
        for member in cls:
            if member.value == key:
                return member
        choices = ", ".join(m.value for m in cls)
        raise DomainError(f"unknown family {value!r}; expected one of {choices}")

    @property
    def has_shapes(self) -> bool:
        return self not in (FamilyKind.EXPONENTIAL, FamilyKind.HALFCAUCHY)

    @property
    def n_params(self) -> int:
        return 5 if self.has_shapes else 3

    @property
    def param_names(self) -> tuple[str, ...]:
        if self.has_shapes:
            return ("alpha", "lam", "gamma", "nu", "tau")
        return ("alpha", "gamma", "tau")


def _positive(name, value):
    if value is None:
        raise DomainError(f"{name} is required")
    value = float(value)
    if not (math.isfinite(value) and value > 0):
        raise DomainError(f"{name} must be a positive finite number, got {value}")
    return value


@dataclass(frozen=True)
class ModelParams:
    """Parameter vector theta = (alpha, lambda, gamma, nu, tau) of one AFC family.

    ``lam`` and ``nu`` are the shapes of X and Y and must be ``None`` for the
    exponential and half-Cauchy families. ``gamma`` is the rate scale of Y and
    equals ``beta(0)``. ``tau`` must lie in ``[0, 1]`` unless ``diagnostic`` is
    set, which admits out-of-contract values for validity demonstrations only.
    """

    family: FamilyKind
    alpha: float
    gamma: float
    tau: float
    lam: float | None = None
    nu: float | None = None
    diagnostic: bool = field(default=False, compare=False)

    def __post_init__(self):
        fam = FamilyKind.parse(self.family)
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "alpha", _positive("alpha", self.alpha))
        object.__setattr__(self, "gamma", _positive("gamma", self.gamma))
        if fam.has_shapes:
            object.__setattr__(self, "lam", _positive("lambda", self.lam))
            object.__setattr__(self, "nu", _positive("nu", self.nu))
        elif self.lam is not None or self.nu is not None:
            raise DomainError(f"{fam.value} has no shape parameters")
        tau = float(self.tau)
        if not math.isfinite(tau):
            raise DomainError("tau must be finite")
        if not self.diagnostic and not 0.0 <= tau <= 1.0:
            raise DomainError(f"tau must lie in [0, 1], got {tau}")
        if self.diagnostic and tau < 0:
            raise DomainError("tau must be non-negative even in diagnostic mode")
        object.__setattr__(self, "tau", tau)

    @property
    def theta(self) -> np.ndarray:
        """Free parameters in canonical order (see :attr:`FamilyKind.param_names`)."""
        return np.array([getattr(self, n) for n in self.family.param_names], dtype=float)

    @classmethod
    def from_theta(cls, family, theta, diagnostic: bool = False) -> "ModelParams":
        fam = FamilyKind.parse(family)
        theta = [float(v) for v in theta]
        if len(theta) != fam.n_params:
            raise DomainError(f"{fam.value} expects {fam.n_params} parameters, got {len(theta)}")
        return cls(family=fam, diagnostic=diagnostic, **dict(zip(fam.param_names, theta)))

    def replace(self, **changes) -> "ModelParams":
        values = {n: getattr(self, n) for n in ("family", "alpha", "gamma", "tau", "lam", "nu", "diagnostic")}
        values.update(changes)
        return ModelParams(**values)

    def to_dict(self) -> dict:
        out = {"family": self.family.value}
        for name in self.family.param_names:
            out["lambda" if name == "lam" else name] = getattr(self, name)
        return out


@dataclass(frozen=True)
class JointPoint:
    """A point (x, y) of the positive quadrant."""

    x: float
    y: float

    def __post_init__(self):
        if not (self.x > 0 and self.y > 0):
            raise DomainError(f"joint points need x > 0 and y > 0, got ({self.x}, {self.y})")


# ---------------------------------------------------------------------------
# unit-rate bases


class _Base:
    """Unit-rate building blocks; ``k`` is the shape (ignored when shapeless)."""

    def c_star(self, nu):
        return 1.0

    def log_sf(self, z, k):
        raise NotImplementedError

    def log_pdf(self, z, k):
        raise NotImplementedError

    def hazard(self, z, k):
        return np.exp(self.log_pdf(z, k) - self.log_sf(z, k))

    def quantile(self, u, k):
        raise NotImplementedError

    def log_e(self, log_t, t, nu):
        """log E(t) for the Y-side bracket term."""
        raise NotImplementedError

    def draw(self, rng, size, k):
        return self.quantile(rng.random(size), k)

    # x-side pieces of the density; overridden where a closed form is more stable
    def x_pieces(self, x, alpha, lam, tau, nu):
        ax = alpha * x
        log_sf0 = self.log_sf(ax, lam)
        h0 = alpha * self.hazard(ax, lam)
        if tau == 0.0:
            return log_sf0, np.zeros_like(x), h0, np.zeros_like(x)
        atx = ax * tau
        log_accel = -self.c_star(nu) * self.log_sf(atx, lam)
        th = tau * alpha * self.hazard(atx, lam)
        return log_sf0, log_accel, h0 - th, th


class _Exponential(_Base):
    def log_sf(self, z, k):
        return -z

    def log_pdf(self, z, k):
        return -z

    def hazard(self, z, k):
        return np.ones_like(z)

    def quantile(self, u, k):
        return -np.log1p(-u)

    def log_e(self, log_t, t, nu):
        return log_t

    def draw(self, rng, size, k):
        return rng.standard_exponential(size)

    def x_pieces(self, x, alpha, lam, tau, nu):
        d = np.full_like(x, alpha * (1.0 - tau))
        return -alpha * x, alpha * tau * x, d, np.full_like(x, alpha * tau)


class _Lomax(_Base):
    def log_sf(self, z, k):
        return -k * np.log1p(z)

    def log_pdf(self, z, k):
        return math.log(k) - (k + 1.0) * np.log1p(z)

    def hazard(self, z, k):
        return k / (1.0 + z)

    def quantile(self, u, k):
        return np.expm1(-np.log1p(-u) / k)

    def log_e(self, log_t, t, nu):
        return math.log(nu + 1.0) + log_t - np.log1p(t)

    def draw(self, rng, size, k):
        return rng.pareto(k, size)

    def x_pieces(self, x, alpha, lam, tau, nu):
        ax = alpha * x
        atx = tau * ax
        d = alpha * lam * (1.0 - tau) / ((1.0 + ax) * (1.0 + atx))
        th = alpha * lam * tau / (1.0 + atx)
        return -lam * np.log1p(ax), lam * np.log1p(atx), d, th


class _Weibull(_Base):
    def c_star(self, nu):
        return 1.0 / nu

    def log_sf(self, z, k):
        return -(z**k)

    def log_pdf(self, z, k):
        return math.log(k) + (k - 1.0) * np.log(z) - z**k

    def hazard(self, z, k):
        return k * z ** (k - 1.0)

    def quantile(self, u, k):
        return (-np.log1p(-u)) ** (1.0 / k)

    def log_e(self, log_t, t, nu):
        return nu * log_t

    def draw(self, rng, size, k):
        return rng.weibull(k, size)

    def x_pieces(self, x, alpha, lam, tau, nu):
        ax = alpha * x
        h0 = alpha * lam * ax ** (lam - 1.0)
        tl = tau**lam
        axl = ax**lam
        return -axl, tl * axl / nu, h0 * (1.0 - tl), h0 * tl


class _LogLogistic(_Base):
    def c_star(self, nu):
        return 1.0 / nu

    def log_sf(self, z, k):
        return -np.log1p(z**k)

    def log_pdf(self, z, k):
        return math.log(k) + (k - 1.0) * np.log(z) - 2.0 * np.log1p(z**k)

    def hazard(self, z, k):
        return k * z ** (k - 1.0) / (1.0 + z**k)

    def quantile(self, u, k):
        return np.exp((np.log(u) - np.log1p(-u)) / k)

    def log_e(self, log_t, t, nu):
        return _LOG2 + np.log(expit(nu * log_t))

    def x_pieces(self, x, alpha, lam, tau, nu):
        la = lam * np.log(alpha * x)  # log (alpha x)^lam
        log_sf0 = -np.logaddexp(0.0, la)
        if tau == 0.0:
            return log_sf0, np.zeros_like(x), lam / x * expit(la), np.zeros_like(x)
        lb = la + lam * math.log(tau)
        tl = tau**lam
        d = lam / x * (1.0 - tl) * expit(la) * expit(-lb)
        th = lam / x * expit(lb)
        return log_sf0, np.logaddexp(0.0, lb) / nu, d, th


class _HalfCauchy(_Base):
    def log_sf(self, z, k):
        return _LOG_2_OVER_PI + np.log(np.arctan2(1.0, z))

    def log_pdf(self, z, k):
        return _LOG_2_OVER_PI - np.log1p(z * z)

    def hazard(self, z, k):
        return 1.0 / ((1.0 + z * z) * np.arctan2(1.0, z))

    def quantile(self, u, k):
        return np.tan(0.5 * math.pi * u)

    def log_e(self, log_t, t, nu):
        return _LOG2 + 2.0 * log_t - np.log1p(t * t)

    def draw(self, rng, size, k):
        return np.abs(rng.standard_cauchy(size))


class _Gamma(_Base):
    def c_star(self, nu):
        return 1.0 / nu

    def log_sf(self, z, k):
        return special.log_regularized_gamma_q(k, z)

    def log_pdf(self, z, k):
        return (k - 1.0) * np.log(z) - z - float(special.ln_gamma(k))

    def hazard(self, z, k):
        return np.exp(self.log_pdf(z, k) - self.log_sf(z, k))

    def quantile(self, u, k):
        return _gamma_quantile(np.asarray(u, dtype=float), k)

    def log_e(self, log_t, t, nu):
        return log_t - math.log(nu)

    def draw(self, rng, size, k):
        return rng.standard_gamma(k, size)

    def x_pieces(self, x, alpha, lam, tau, nu):
        # evaluate both upper incomplete gammas in one vectorized call
        ax = alpha * x
        n = ax.size
        z = np.concatenate([ax.ravel(), (tau * ax).ravel()])
        logq = special.log_regularized_gamma_q(lam, z)
        log_sf0 = logq[:n].reshape(ax.shape)
        log_sf_t = logq[n:].reshape(ax.shape)
        lg = float(special.ln_gamma(lam))
        log_h0 = math.log(alpha) + (lam - 1.0) * np.log(ax) - ax - lg - log_sf0
        with np.errstate(over="ignore"):
            h0 = np.exp(log_h0)
            if tau == 0.0:
                return log_sf0, np.zeros_like(x), h0, np.zeros_like(x)
            atx = tau * ax
            # log(tau) + log(ax) rather than log(tau ax), which underflows for subnormal tau
            log_tau = math.log(tau)
            log_th = log_tau + math.log(alpha) + (lam - 1.0) * (log_tau + np.log(ax)) - atx - lg - log_sf_t
            th = np.exp(log_th)
            # for lam < 1 both hazards blow up at the origin; difference them in logs
            shrink = -np.expm1(log_th - log_h0)
            d = np.where(shrink == 0.0, 0.0, h0 * np.where(shrink == 0.0, 1.0, shrink))
        return log_sf0, -log_sf_t / nu, d, th


def _gamma_quantile(u, k, tol=1e-12):
    """Invert the regularized lower incomplete gamma by safeguarded Newton steps."""
    if np.any(~((u > 0) & (u < 1))):
        raise DomainError("quantile requires 0 < u < 1")
    u = np.atleast_1d(u)
    lo = np.zeros(u.shape)
    hi = np.full(u.shape, max(1.0, k))
    for _ in range(2000):
        low = special.regularized_gamma_p(k, hi) < u
        if not low.any():
            break
        lo = np.where(low, hi, lo)
        hi = np.where(low, 2.0 * hi, hi)
    z = 0.5 * (lo + hi)
    lg = float(special.ln_gamma(k))
    for _ in range(200):
        # work with whichever tail is smaller to keep the residual accurate
        p = np.asarray(special.regularized_gamma_p(k, z))
        q = np.asarray(special.regularized_gamma_q(k, z))
        f = np.where(u < 0.5, p - u, (1.0 - u) - q)
        lo = np.where(f < 0, z, lo)
        hi = np.where(f >= 0, z, hi)
        dens = np.exp((k - 1.0) * np.log(z) - z - lg)
        newton = z - f / np.where(dens > 0, dens, 1e-300)
        inside = (newton > lo) & (newton < hi)
        z_new = np.where(inside, newton, 0.5 * (lo + hi))
        done = (np.abs(f) <= tol * np.minimum(u, 1.0 - u)) | (hi - lo <= 1e-15 * hi)
        z = np.where(done, z, z_new)
        if done.all():
            break
    return z


_BASES = {
    FamilyKind.EXPONENTIAL: _Exponential(),
    FamilyKind.LOMAX: _Lomax(),
    FamilyKind.WEIBULL: _Weibull(),
    FamilyKind.LOGLOGISTIC: _LogLogistic(),
    FamilyKind.HALFCAUCHY: _HalfCauchy(),
    FamilyKind.GAMMA: _Gamma(),
}


def _base(p: ModelParams) -> _Base:
    return _BASES[p.family]


# ---------------------------------------------------------------------------
# argument handling


def _positive_array(name, v):
    arr = np.asarray(v, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError(f"{name} must be strictly positive")
    return arr


def _xy(x, y):
    if y is None:
        if isinstance(x, JointPoint):
            return np.asarray(x.x, dtype=float), np.asarray(x.y, dtype=float)
        raise DomainError("expected a JointPoint or separate x and y")
    x = _positive_array("x", x)
    y = _positive_array("y", y)
    return np.broadcast_arrays(x, y)


def _out(arr):
    arr = np.asarray(arr)
    return float(arr) if arr.ndim == 0 else arr


def _prob(p):
    arr = np.asarray(p, dtype=float)
    if np.any(~((arr > 0) & (arr < 1))):
        raise DomainError("probabilities must lie strictly inside (0, 1)")
    return arr


# ---------------------------------------------------------------------------
# marginals


def marginal_survival_x(p: ModelParams, x):
    """Survival function F0(x) of X."""
    x = _positive_array("x", x)
    return _out(np.exp(_base(p).log_sf(p.alpha * x, p.lam)))


def marginal_survival_y(p: ModelParams, y):
    """Survival function F1(gamma y) of Y."""
    y = _positive_array("y", y)
    return _out(np.exp(_base(p).log_sf(p.gamma * y, p.nu)))


def marginal_cdf_x(p: ModelParams, x):
    x = _positive_array("x", x)
    return _out(-np.expm1(_base(p).log_sf(p.alpha * x, p.lam)))


def marginal_cdf_y(p: ModelParams, y):
    y = _positive_array("y", y)
    return _out(-np.expm1(_base(p).log_sf(p.gamma * y, p.nu)))


def marginal_density_x(p: ModelParams, x):
    """Density f_X(x) = alpha f0(alpha x) of the X marginal."""
    x = _positive_array("x", x)
    return _out(p.alpha * np.exp(_base(p).log_pdf(p.alpha * x, p.lam)))


def marginal_density_y(p: ModelParams, y):
    """Density f_Y(y) = gamma f1(gamma y) of the Y marginal."""
    y = _positive_array("y", y)
    return _out(p.gamma * np.exp(_base(p).log_pdf(p.gamma * y, p.nu)))


def _log_marginal_density_x(p, x):
    return math.log(p.alpha) + _base(p).log_pdf(p.alpha * x, p.lam)


def _log_marginal_density_y(p, y):
    return math.log(p.gamma) + _base(p).log_pdf(p.gamma * y, p.nu)


def hazard_x(p: ModelParams, x):
    """Hazard h0(x) of X, from the simplified closed form of each family."""
    x = _positive_array("x", x)
    return _out(p.alpha * _base(p).hazard(p.alpha * x, p.lam))


def marginal_quantile_x(p: ModelParams, u):
    """Quantile of X at CDF level ``u`` in (0, 1)."""
    u = _prob(u)
    return _out(np.asarray(_base(p).quantile(u, p.lam)).reshape(u.shape) / p.alpha)


def marginal_quantile_y(p: ModelParams, u):
    """Quantile of Y at CDF level ``u`` in (0, 1)."""
    u = _prob(u)
    return _out(np.asarray(_base(p).quantile(u, p.nu)).reshape(u.shape) / p.gamma)


# ---------------------------------------------------------------------------
# acceleration and joint objects


def c_star(p: ModelParams) -> float:
    """Exponent c* of the acceleration: 1, or 1/nu for Weibull, log-logistic and gamma."""
    return _base(p).c_star(p.nu)


def log_acceleration(p: ModelParams, x):
    """log beta(x); finite wherever the inputs are."""
    x = np.asarray(x, dtype=float)
    if np.any(~(x >= 0)):
        raise DomainError("acceleration requires x >= 0")
    if p.tau == 0.0:
        return _out(np.full(x.shape, math.log(p.gamma)))
    base = _base(p)
    return _out(math.log(p.gamma) - base.c_star(p.nu) * base.log_sf(p.alpha * p.tau * x, p.lam))


def acceleration(p: ModelParams, x):
    """Acceleration beta(x) = gamma / F0(tau x) ** c_star, with beta(0) = gamma.

    Raises
    ------
    NumericOverflowError
        If beta(x) exceeds double precision.
    """
    lb = np.asarray(log_acceleration(p, x))
    with np.errstate(over="ignore"):
        out = np.exp(lb)
    if np.any(np.isinf(out)):
        raise NumericOverflowError("acceleration overflows double precision")
    return _out(out)


def log_joint_survival(p: ModelParams, x, y=None):
    """log P(X > x, Y > y); ``-inf`` where the survival underflows to zero."""
    x, y = _xy(x, y)
    base = _base(p)
    lb = np.asarray(log_acceleration(p, x))
    log_t = lb + np.log(y)
    # a huge beta(x) y simply sends the survival to zero
    with np.errstate(over="ignore"):
        t = np.exp(log_t)
        ls = base.log_sf(p.alpha * x, p.lam) + base.log_sf(t, p.nu)
    return _out(ls)


def joint_survival(p: ModelParams, x, y=None):
    """Joint survival P(X > x, Y > y) = F0(x) F1(beta(x) y)."""
    return _out(np.exp(np.asarray(log_joint_survival(p, x, y))))


def _density_parts(p: ModelParams, x, y):
    """Return (log prefactor, D, log(tau h0(tau x) E(t))) for arrays x, y > 0."""
    base = _base(p)
    log_sf0, log_accel, d, th = base.x_pieces(x, p.alpha, p.lam, p.tau, p.nu)
    log_beta = math.log(p.gamma) + log_accel
    log_t = log_beta + np.log(y)
    with np.errstate(over="ignore"):
        t = np.exp(log_t)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        log_pref = log_beta + log_sf0 + base.log_pdf(t, p.nu)
        log_the = np.log(th) + base.log_e(log_t, t, p.nu)
    log_pref = np.where(np.isnan(log_pref), -np.inf, log_pref)
    return log_pref, d, log_the


def _log_density_arrays(p: ModelParams, x, y):
    log_pref, d, log_the = _density_parts(p, x, y)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        log_bracket = np.logaddexp(np.log(np.maximum(d, 0.0)), log_the)
        neg = d < 0
        if neg.any():
            # roundoff can leave D marginally negative; fall back to the linear sum
            lin = d + np.exp(log_the)
            log_bracket = np.where(neg, np.log(np.maximum(lin, 0.0)), log_bracket)
        out = log_pref + log_bracket
    return np.where(np.isnan(out), -np.inf, out), log_pref, d, log_the


_NEG_TOL = 1e-12


def joint_density(p: ModelParams, x, y=None):
    """Joint density f(x, y), the mixed partial derivative of the joint survival.

    Non-negative for in-contract parameters. With ``p.diagnostic`` set the raw
    (possibly negative) value is returned so that invalid parameterizations
    can be demonstrated.

    Raises
    ------
    DensityBugError
        If an in-contract evaluation is below ``-1e-12``.
    """
    x, y = _xy(x, y)
    logf, log_pref, d, log_the = _log_density_arrays(p, x, y)
    dens = np.exp(logf)
    neg = d < 0
    if neg.any():
        with np.errstate(over="ignore", invalid="ignore"):
            raw = np.exp(log_pref) * (d + np.exp(log_the))
        raw = np.where(np.isnan(raw), 0.0, raw)
        if p.diagnostic:
            dens = np.where(neg, raw, dens)
        elif np.any(raw < -_NEG_TOL):
            raise DensityBugError(
                f"{p.family.value} density evaluated to {raw.min():.3e} at in-contract parameters"
            )
    return _out(dens)


def log_joint_density(p: ModelParams, x, y=None):
    """Natural log of the joint density; ``-inf`` where the density vanishes."""
    x, y = _xy(x, y)
    return _out(_log_density_arrays(p, x, y)[0])


def log_likelihood(p: ModelParams, x, y=None) -> float:
    """Sum of log joint densities over the sample; ``-inf`` if any term is degenerate.

    ``x`` may be a :class:`~afc.sampling.BivariateSample` (or any object with
    ``x`` and ``y`` array attributes) when ``y`` is omitted.
    """
    if y is None and hasattr(x, "x") and hasattr(x, "y") and not isinstance(x, JointPoint):
        x, y = x.x, x.y
    x, y = _xy(x, y)
    logf = _log_density_arrays(p, x, y)[0]
    total = float(np.sum(logf))
    return total if math.isfinite(total) else -math.inf


def mh_log_weight(p: ModelParams, x, y):
    """log f(x, y) - log f_X(x) - log f_Y(y), the dependence factor on the log scale."""
    x, y = _xy(x, y)
    logf = _log_density_arrays(p, x, y)[0]
    with np.errstate(invalid="ignore"):
        w = logf - _log_marginal_density_x(p, x) - _log_marginal_density_y(p, y)
    return _out(np.where(np.isnan(w), -np.inf, w))


def conditional_cdf_y_given_x(p: ModelParams, x, y):
    """P(Y <= y | X = x) for the exponential family.

    Equals ``1 - exp(-s) (1 + tau s)`` with ``s = gamma y exp(alpha tau x)``.
    """
    if p.family is not FamilyKind.EXPONENTIAL:
        raise UnsupportedFamilyError("the conditional CDF is provided for the exponential family only")
    x = _positive_array("x", x)
    y = _positive_array("y", y)
    s = p.gamma * y * np.exp(p.alpha * p.tau * x)
    out = -np.expm1(-s) - p.tau * s * np.exp(-s)
    return _out(np.clip(out, 0.0, 1.0))
