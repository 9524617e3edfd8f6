"""Samplers for the AFC families.

Three generators are provided:

* an exact inverse transform for the exponential family, which inverts the
  conditional CDF of Y given X = x through the lower Lambert W branch;
* a Student-t copula whose latent correlation is calibrated so that the
  Pearson correlation of (X, Y) matches the model value (marginals exact);
* an independence Metropolis-Hastings chain targeting the joint density,
  with proposals from the product of the marginals.

All randomness flows through a ``numpy.random.Generator`` built on PCG64 from
an explicit integer seed, so equal seeds give bit-identical output.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import special
from .errors import CalibrationError, DomainError, UnsupportedFamilyError
from .families import (
    FamilyKind,
    JointPoint,
    ModelParams,
    _BASES,
    marginal_quantile_x,
    marginal_quantile_y,
    mh_log_weight,
)
from .moments import theoretical_moments

__all__ = [
    "Provenance",
    "BivariateSample",
    "CopulaConfig",
    "MhConfig",
    "RNG_ALGORITHM",
    "make_rng",
    "sample_exponential_inverse_transform",
    "calibrate_latent_correlation",
    "copula_pearson",
    "sample_copula",
    "mh_acceptance_log_ratio",
    "sample_mh",
]

RNG_ALGORITHM = "numpy.random.PCG64"
_SEED_MAX = 2**64 - 1


class Provenance(enum.Enum):
    INVERSE_TRANSFORM = "inverse_transform"
    COPULA = "copula"
    METROPOLIS_HASTINGS = "metropolis_hastings"
    EXTERNAL = "external"


@dataclass
class BivariateSample:
    """Ordered (x, y) pairs with strictly positive coordinates."""

    x: np.ndarray
    y: np.ndarray
    provenance: Provenance = Provenance.EXTERNAL
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.ascontiguousarray(self.x, dtype=float).ravel()
        self.y = np.ascontiguousarray(self.y, dtype=float).ravel()
        if self.x.shape != self.y.shape:
            raise DomainError("x and y must have the same length")
        bad = ~((self.x > 0) & (self.y > 0) & np.isfinite(self.x) & np.isfinite(self.y))
        if bad.any():
            i = int(np.argmax(bad))
            raise DomainError(f"pair {i} = ({self.x[i]}, {self.y[i]}) is not strictly positive and finite")
        self.provenance = Provenance(self.provenance)

    def __len__(self):
        return self.x.size

    @property
    def n(self) -> int:
        return self.x.size

    def pearson(self) -> float:
        """Empirical Pearson correlation of the pairs."""
        return float(np.corrcoef(self.x, self.y)[0, 1])


def _check_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed <= _SEED_MAX:
        raise DomainError("seed must be a 64-bit unsigned integer")
    return seed


def make_rng(seed) -> np.random.Generator:
    """PCG64 generator for a seed, or a child ``SeedSequence``."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(_check_seed(seed)))


def _rng_meta(seed) -> dict:
    if isinstance(seed, np.random.SeedSequence):
        lineage = {"entropy": str(seed.entropy), "spawn_key": list(seed.spawn_key)}
    else:
        lineage = {"seed": int(seed)}
    return {"rng": RNG_ALGORITHM, "numpy_version": np.__version__, **lineage}


def _check_n(n) -> int:
    n = int(n)
    if n < 1:
        raise DomainError("sample size must be at least 1")
    return n


# ---------------------------------------------------------------------------
# inverse transform (exponential family)


def sample_exponential_inverse_transform(p: ModelParams, n: int, seed) -> BivariateSample:
    """Exact draws from the exponential AFC model.

    X is drawn from its exponential quantile and Y from the inverse of its
    conditional CDF given X, ``Y = -(tau W + 1) / (gamma tau exp(alpha tau x))``
    with ``W`` the lower Lambert W branch at ``(U - 1) exp(-1/tau) / tau``.
    The Lambert argument is handled on the log scale since it underflows
    for small tau. ``tau = 0`` yields independent exponentials.
    """
    if p.family is not FamilyKind.EXPONENTIAL:
        raise UnsupportedFamilyError("the inverse-transform sampler is exponential-only")
    n = _check_n(n)
    rng = make_rng(seed)
    u1 = rng.random(n)
    u2 = rng.random(n)
    x = -np.log1p(-u1) / p.alpha
    e = -np.log1p(-u2)  # standard exponential variate, -log(1 - U)
    tau = p.tau
    if tau == 0.0:
        y = e / p.gamma
    else:
        # log of -(U - 1) exp(-1/tau) / tau
        log_arg = -e - 1.0 / tau - math.log(tau)
        w = np.asarray(special.lambert_w_lower_from_log(log_arg))
        s = -(tau * w + 1.0) / tau
        # s solves s - log1p(tau s) = e; the map is convex and increasing, so a
        # few Newton steps remove the cancellation in tau W + 1 for small tau
        for _ in range(3):
            s = s - (s - np.log1p(tau * s) - e) / (1.0 - tau / (1.0 + tau * s))
        y = s / (p.gamma * np.exp(p.alpha * tau * x))
    meta = {"sampler": "inverse_transform", "n": n, "params": p.to_dict(), **_rng_meta(seed)}
    return BivariateSample(x, y, Provenance.INVERSE_TRANSFORM, meta)


# ---------------------------------------------------------------------------
# Student-t copula


@dataclass(frozen=True)
class CopulaConfig:
    """Student-t copula settings; ``rho_latent=None`` requests calibration."""

    v_c: float = 5.0
    rho_latent: float | None = None
    calibration_nodes: int = 64

    def __post_init__(self):
        if not self.v_c > 2:
            raise DomainError("copula degrees of freedom must exceed 2")
        if self.rho_latent is not None and not -1.0 < self.rho_latent <= 0.0:
            raise DomainError("rho_latent must lie in (-1, 0]")
        if int(self.calibration_nodes) < 2:
            raise DomainError("calibration_nodes must be at least 2")


_COPULA_FAMILIES = (
    FamilyKind.EXPONENTIAL,
    FamilyKind.LOMAX,
    FamilyKind.WEIBULL,
    FamilyKind.LOGLOGISTIC,
)
_CAL_EPS = 1e-6


def _require_copula_family(p: ModelParams):
    if p.family not in _COPULA_FAMILIES:
        raise UnsupportedFamilyError(
            f"copula sampling needs a closed-form correlation; unavailable for {p.family.value}"
        )


def _t2_log_density(s, t, r, v):
    """log density of the standard bivariate t with correlation r and v dof."""
    one_r2 = 1.0 - r * r
    lg = special.ln_gamma
    return (
        float(lg((v + 2.0) / 2.0) - lg(v / 2.0))
        - math.log(v * math.pi)
        - 0.5 * math.log(one_r2)
        - (v + 2.0) / 2.0 * np.log1p((s * s - 2.0 * r * s * t + t * t) / (v * one_r2))
    )


class _CopulaIntegrator:
    """Tensor Gauss-Legendre evaluation of Cov(X, Y) under the t copula.

    The integral over ``[eps, 1 - eps]^2`` in copula coordinates is taken in
    the latent coordinate ``s = t_v^{-1}(u)`` with ``s = c sinh(xi)``. The
    quantile singularities at u = 0 and u = 1 then become smooth, decaying
    tails, and a modest rule converges quickly. Subtracting the independence
    density gives the covariance directly as
    ``int int q_X q_Y (f_2 - f_1 f_1) ds dt``.
    """

    def __init__(self, p: ModelParams, cfg: CopulaConfig):
        m = int(cfg.calibration_nodes)
        v = float(cfg.v_c)
        nodes, weights = np.polynomial.legendre.leggauss(m)
        s_max = float(special.student_t_quantile(v, 1.0 - _CAL_EPS))
        c = 1.0
        xi_max = math.asinh(s_max / c)
        xi = xi_max * nodes
        s = c * np.sinh(xi)
        self.s = s
        self.w = xi_max * weights * c * np.cosh(xi)
        upper = s > 0
        # quantiles from the nearer tail so values close to u = 1 stay accurate
        tail = np.asarray(special.student_t_cdf(v, -np.abs(s)))
        u = np.where(upper, 1.0 - tail, tail)
        self.qx = np.asarray(marginal_quantile_x(p, u))
        self.qy = np.asarray(marginal_quantile_y(p, u))
        self.log_f1 = np.log(np.asarray(special.student_t_pdf(v, s)))
        self.v = v
        mom = theoretical_moments(p)
        self.sd = math.sqrt(mom.var_x * mom.var_y)

    def pearson(self, r: float) -> float:
        if r == 0.0:
            return 0.0
        f2 = np.exp(_t2_log_density(self.s[:, None], self.s[None, :], r, self.v))
        indep = np.exp(self.log_f1[:, None] + self.log_f1[None, :])
        cov = float((self.w * self.qx) @ (f2 - indep) @ (self.w * self.qy))
        return cov / self.sd


def copula_pearson(p: ModelParams, rho_latent: float, cfg: CopulaConfig = CopulaConfig()) -> float:
    """Pearson correlation of (X, Y) induced by a t copula with the given latent correlation."""
    _require_copula_family(p)
    return _CopulaIntegrator(p, cfg).pearson(float(rho_latent))


def calibrate_latent_correlation(p: ModelParams, cfg: CopulaConfig = CopulaConfig()) -> float:
    """Latent t-copula correlation reproducing the model's Pearson correlation.

    Solves ``rho_copula(r) = rho_model`` for ``r`` in ``[-0.999, 0]`` with a
    bracketing root finder. Each evaluation of ``rho_copula`` integrates the
    quantile product against the copula density on a tensor Gauss-Legendre
    grid covering ``[1e-6, 1 - 1e-6]^2`` (see :class:`_CopulaIntegrator`).

    Raises
    ------
    CalibrationError
        If the target correlation is more negative than the copula reaches.
    """
    _require_copula_family(p)
    integ = _CopulaIntegrator(p, cfg)
    target = theoretical_moments(p).rho
    if target == 0.0:
        return 0.0
    # widen the bracket gradually; near r = -1 the copula density is a thin
    # ridge, so only go there when the target demands it
    hi = 0.0
    for lo in (-0.5, -0.8, -0.9, -0.95, -0.98, -0.99, -0.995, -0.999):
        f_lo = integ.pearson(lo) - target
        if f_lo <= 0:
            return float(brentq(lambda r: integ.pearson(r) - target, lo, hi, xtol=1e-10))
        hi = lo
    raise CalibrationError(
        f"target correlation {target:.4f} is below the copula minimum {f_lo + target:.4f} at v_c={cfg.v_c}"
    )


def sample_copula(p: ModelParams, n: int, cfg: CopulaConfig = CopulaConfig(), seed=0) -> BivariateSample:
    """Draw pairs from the calibrated Student-t copula with exact AFC marginals."""
    _require_copula_family(p)
    n = _check_n(n)
    r = cfg.rho_latent if cfg.rho_latent is not None else calibrate_latent_correlation(p, cfg)
    rng = make_rng(seed)
    z = rng.standard_normal((n, 2))
    chi = rng.chisquare(cfg.v_c, n)
    z2 = r * z[:, 0] + math.sqrt(1.0 - r * r) * z[:, 1]
    scale = np.sqrt(chi / cfg.v_c)
    tiny = np.finfo(float).tiny
    u = np.clip(np.asarray(special.student_t_cdf(cfg.v_c, z[:, 0] / scale)), tiny, 1.0 - 2**-53)
    v = np.clip(np.asarray(special.student_t_cdf(cfg.v_c, z2 / scale)), tiny, 1.0 - 2**-53)
    x = np.asarray(marginal_quantile_x(p, u))
    y = np.asarray(marginal_quantile_y(p, v))
    meta = {
        "sampler": "copula",
        "n": n,
        "params": p.to_dict(),
        "v_c": cfg.v_c,
        "rho_latent": r,
        "calibration_nodes": cfg.calibration_nodes,
        **_rng_meta(seed),
    }
    return BivariateSample(x, y, Provenance.COPULA, meta)


# ---------------------------------------------------------------------------
# Metropolis-Hastings


@dataclass(frozen=True)
class MhConfig:
    """Chain hygiene for :func:`sample_mh`."""

    target_n: int
    burn_in: int = 10_000
    thin: int = 5

    def __post_init__(self):
        if int(self.target_n) < 1:
            raise DomainError("target_n must be positive")
        if int(self.burn_in) < 0:
            raise DomainError("burn_in must be non-negative")
        if int(self.thin) < 1:
            raise DomainError("thin must be at least 1")


def mh_acceptance_log_ratio(p: ModelParams, current: JointPoint, proposal: JointPoint) -> float:
    """log acceptance probability of an independence proposal, always <= 0."""
    w_prop = float(mh_log_weight(p, proposal.x, proposal.y))
    w_cur = float(mh_log_weight(p, current.x, current.y))
    if w_prop == w_cur:
        return 0.0
    diff = w_prop - w_cur
    if math.isnan(diff):
        return -math.inf
    return min(diff, 0.0)


_LOW_ACCEPTANCE = 0.01


def sample_mh(p: ModelParams, cfg: MhConfig, seed) -> BivariateSample:
    """Independence Metropolis-Hastings chain targeting the AFC joint density.

    Proposals come from ``f_X f_Y``, so a move is accepted with probability
    ``min(1, exp(w* - w))`` where ``w = log f - log f_X - log f_Y``. The chain
    starts at the marginal medians, discards ``burn_in`` states and keeps every
    ``thin``-th state after that. An acceptance rate below 1% triggers a
    ``RuntimeWarning`` and is recorded in the metadata.
    """
    rng = make_rng(seed)
    base = _BASES[p.family]
    steps = int(cfg.burn_in) + int(cfg.thin) * int(cfg.target_n)
    xs = np.asarray(base.draw(rng, steps, p.lam), dtype=float) / p.alpha
    ys = np.asarray(base.draw(rng, steps, p.nu), dtype=float) / p.gamma
    log_u = np.log(rng.random(steps))
    # rare zero draws from the marginal generators cannot be in the support
    ok = (xs > 0) & (ys > 0) & np.isfinite(xs) & np.isfinite(ys)
    w = np.full(steps, -np.inf)
    w[ok] = mh_log_weight(p, xs[ok], ys[ok])

    x0 = float(marginal_quantile_x(p, 0.5))
    y0 = float(marginal_quantile_y(p, 0.5))
    w_cur = float(mh_log_weight(p, x0, y0))
    cur = -1  # index of the current state among proposals (-1 = start point)
    keep_every = int(cfg.thin)
    burn = int(cfg.burn_in)
    kept = np.empty(int(cfg.target_n), dtype=np.int64)
    accepted = 0
    k = 0
    w_list = w.tolist()
    lu_list = log_u.tolist()
    for j in range(steps):
        wj = w_list[j]
        if wj >= w_cur or lu_list[j] < wj - w_cur:
            cur = j
            w_cur = wj
            accepted += 1
        if j >= burn and (j - burn + 1) % keep_every == 0:
            kept[k] = cur
            k += 1
    rate = accepted / steps
    x = np.where(kept >= 0, xs[np.maximum(kept, 0)], x0)
    y = np.where(kept >= 0, ys[np.maximum(kept, 0)], y0)
    meta = {
        "sampler": "metropolis_hastings",
        "n": int(cfg.target_n),
        "burn_in": burn,
        "thin": keep_every,
        "acceptance_rate": rate,
        "params": p.to_dict(),
        **_rng_meta(seed),
    }
    if rate < _LOW_ACCEPTANCE:
        meta["warning"] = f"acceptance rate {rate:.4f} below {_LOW_ACCEPTANCE}"
        warnings.warn(meta["warning"], RuntimeWarning, stacklevel=2)
    return BivariateSample(x, y, Provenance.METROPOLIS_HASTINGS, meta)
