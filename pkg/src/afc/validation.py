"""Numeric certification of model validity on parameter and point grids.

Each check evaluates a condition at every node of a grid and returns a
:class:`CheckResult` with the worst violation seen. :func:`validate` bundles
the four checks into a :class:`ValidationReport`.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError
from .families import (
    FamilyKind,
    ModelParams,
    _BASES,
    joint_density,
    log_joint_survival,
    marginal_quantile_x,
    marginal_quantile_y,
)
from .moments import hoeffding_covariance_numeric

__all__ = [
    "CheckResult",
    "ValidationReport",
    "check_r_bounds",
    "check_phi_monotone",
    "check_joint_survival_validity",
    "check_covariance_sign",
    "validate",
    "hazard_ratio",
    "phi",
]

R_TOL = 1e-12
PHI_SLACK = 1e-10
SURVIVAL_NEG_TOL = 1e-8
SURVIVAL_REL_TOL = 1e-5
COV_TOL = 1e-8


@dataclass
class CheckResult:
    """One named check: pass flag, worst violation and where it occurred."""

    name: str
    grid: str
    passed: bool
    worst_violation: float
    worst_location: dict | None
    tolerance: float
    note: str = ""

    def to_text(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        loc = "" if self.worst_location is None else " at " + ", ".join(
            f"{k}={v:.6g}" for k, v in self.worst_location.items()
        )
        extra = f" ({self.note})" if self.note else ""
        return f"[{status}] {self.name}: worst violation {self.worst_violation:.3e} (tol {self.tolerance:.1e}){loc}; grid {self.grid}{extra}"


@dataclass
class ValidationReport:
    family: FamilyKind
    params: ModelParams
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "params": self.params.to_dict(),
            "passed": self.passed,
            "checks": [asdict(c) for c in self.checks],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        head = f"validation of {self.family.value}: {'PASS' if self.passed else 'FAIL'}"
        return "\n".join([head] + ["  " + c.to_text() for c in self.checks])


def _grid_text(arr) -> str:
    arr = np.asarray(arr, dtype=float)
    return f"{arr.size} nodes in [{arr.min():.3g}, {arr.max():.3g}]"


def _positive_grid(name, grid):
    g = np.atleast_1d(np.asarray(grid, dtype=float))
    if g.size == 0 or np.any(~(g > 0)) or np.any(~np.isfinite(g)):
        raise DomainError(f"{name} must contain positive finite values")
    return g


# ---------------------------------------------------------------------------
# hazard ratio bound


def hazard_ratio(p: ModelParams, x, tau):
    """``r(x, tau) = tau h0(tau x) / h0(x)`` on the broadcast of x and tau; zero at tau = 0."""
    base = _BASES[p.family]
    x = np.asarray(x, dtype=float)
    tau = np.asarray(tau, dtype=float)
    ax = p.alpha * x
    with np.errstate(all="ignore"):
        num = tau * base.hazard(ax * tau, p.lam)
        r = num / base.hazard(ax, p.lam)
    return np.where(tau == 0.0, 0.0, r)


def check_r_bounds(p: ModelParams, x_grid=None, tau_grid=None) -> CheckResult:
    """Check ``0 <= r(x, tau) <= 1`` on the product of the two grids.

    The defaults are 200 log-spaced points over ``[1e-3, 1e3] / alpha`` and
    tau in ``{0, 0.1, ..., 1}`` plus ``p.tau`` itself. tau values above one
    are accepted only for diagnostic parameter sets.
    """
    x = _positive_grid("x_grid", x_grid if x_grid is not None else np.logspace(-3, 3, 200) / p.alpha)
    if tau_grid is None:
        tau_grid = np.union1d(np.linspace(0.0, 1.0, 11), [p.tau])
    taus = np.atleast_1d(np.asarray(tau_grid, dtype=float))
    if np.any(taus < 0) or (np.any(taus > 1) and not p.diagnostic):
        raise DomainError("tau_grid must lie in [0, 1] outside diagnostic mode")
    X, T = np.meshgrid(x, taus, indexing="ij")
    r = hazard_ratio(p, X, T)
    viol = np.maximum(-r, r - 1.0)
    viol = np.where(np.isnan(viol), np.inf, viol)
    i = np.unravel_index(int(np.argmax(viol)), viol.shape)
    worst = float(viol[i])
    return CheckResult(
        name="r_bounds",
        grid=f"x: {_grid_text(x)}; tau: {_grid_text(taus) if taus.max() > 0 else 'zero only'}",
        passed=bool(worst <= R_TOL),
        worst_violation=max(worst, 0.0) + 0.0,
        worst_location={"x": float(X[i]), "tau": float(T[i]), "r": float(r[i])},
        tolerance=R_TOL,
    )


# ---------------------------------------------------------------------------
# monotone hazard product


def phi(p: ModelParams, x):
    """``phi(x) = x h0(x)`` for the X marginal; free of the rate alpha in shape."""
    base = _BASES[p.family]
    ax = p.alpha * np.asarray(x, dtype=float)
    with np.errstate(all="ignore"):
        return ax * base.hazard(ax, p.lam)


def check_phi_monotone(p: ModelParams, x_grid=None) -> CheckResult:
    """Check that ``phi(x) = x h0(x)`` never decreases between consecutive nodes.

    A decrease is tolerated up to ``1e-10 max(1, phi)``, which absorbs
    rounding where phi is large. The default grid has 1000 log-spaced nodes
    over ``[1e-4, 1e4]``.
    """
    x = _positive_grid("x_grid", x_grid if x_grid is not None else np.logspace(-4, 4, 1000))
    if x.size < 2 or np.any(np.diff(x) <= 0):
        raise DomainError("x_grid must be strictly increasing with at least two nodes")
    v = phi(p, x)
    if np.any(~np.isfinite(v)):
        bad = int(np.flatnonzero(~np.isfinite(v))[0])
        return CheckResult(
            name="phi_monotone",
            grid=_grid_text(x),
            passed=False,
            worst_violation=float("inf"),
            worst_location={"x": float(x[bad])},
            tolerance=PHI_SLACK,
            note="phi not finite",
        )
    drop = (v[:-1] - v[1:]) / np.maximum(1.0, np.abs(v[:-1]))
    i = int(np.argmax(drop))
    worst = float(drop[i])
    return CheckResult(
        name="phi_monotone",
        grid=_grid_text(x),
        passed=bool(worst <= PHI_SLACK),
        worst_violation=max(worst, 0.0) + 0.0,
        worst_location={"x": float(x[i]), "x_next": float(x[i + 1]), "phi": float(v[i])},
        tolerance=PHI_SLACK,
    )


# ---------------------------------------------------------------------------
# mixed partial of the joint survival


def _mixed_partial(p: ModelParams, x, y, rel_step):
    """Central-difference estimate of d2 S / dx dy built from log S.

    With ``l = log S`` the mixed partial is ``S (l_x l_y + l_xy)``. Deep in
    the tails the two terms nearly cancel while ``S`` itself is tiny, which
    defeats a plain difference of ``S``; the derivatives of ``l`` stay well
    scaled there.
    """
    hx, hy = rel_step * x, rel_step * y
    ls = log_joint_survival
    with np.errstate(invalid="ignore", over="ignore"):
        pp, pm = ls(p, x + hx, y + hy), ls(p, x + hx, y - hy)
        mp, mm = ls(p, x - hx, y + hy), ls(p, x - hx, y - hy)
        lx = (ls(p, x + hx, y) - ls(p, x - hx, y)) / (2.0 * hx)
        ly = (ls(p, x, y + hy) - ls(p, x, y - hy)) / (2.0 * hy)
        lxy = (pp - pm - mp + mm) / (4.0 * hx * hy)
        out = np.exp(ls(p, x, y)) * (lx * ly + lxy)
    # where the survival underflows the density does too
    return np.where(np.isfinite(out), out, 0.0)


def _mixed_partial_extrapolated(p: ModelParams, x, y, rel_step=2e-3):
    # one Richardson pass over steps h and h/2 removes the O(h^2) term; the
    # larger base step keeps rounding in l_xy well below the tolerance
    return (4.0 * _mixed_partial(p, x, y, rel_step / 2.0) - _mixed_partial(p, x, y, rel_step)) / 3.0


def default_point_grid(p: ModelParams, size: int = 20):
    """Quantile-spaced ``size x size`` grid over the marginal 2.5%-97.5% range."""
    u = np.linspace(0.025, 0.975, size)
    return np.asarray(marginal_quantile_x(p, u)), np.asarray(marginal_quantile_y(p, u))


def check_joint_survival_validity(p: ModelParams, point_grid=None) -> CheckResult:
    """Check the mixed partial of the joint survival on a grid of points.

    At every node a central-difference estimate must be at least ``-1e-8``
    and agree with ``joint_density`` to a relative ``1e-5``. The estimate
    differences ``log S`` with steps ``1e-3`` and ``2e-3`` times the
    coordinate and applies one Richardson pass, so it keeps its relative
    accuracy in the tails where ``S`` is tiny.

    ``point_grid`` is a pair ``(xs, ys)`` of coordinate vectors whose product
    forms the grid. By default it is the 20 x 20 quantile-spaced grid of
    :func:`default_point_grid`.
    """
    if not (0.0 <= p.tau <= 1.0) and not p.diagnostic:
        raise DomainError("tau must lie in [0, 1]")
    xs, ys = point_grid if point_grid is not None else default_point_grid(p)
    xs = _positive_grid("x grid", xs)
    ys = _positive_grid("y grid", ys)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    fd = _mixed_partial_extrapolated(p, X, Y)
    dens = np.asarray(joint_density(p, X, Y))
    tiny = np.finfo(float).tiny
    neg = -fd - SURVIVAL_NEG_TOL
    mismatch = np.abs(fd - dens) / np.maximum(np.abs(dens), tiny) - SURVIVAL_REL_TOL
    # combine both conditions into one signed excess and report the worst
    excess = np.maximum(neg / SURVIVAL_NEG_TOL, mismatch / SURVIVAL_REL_TOL)
    excess = np.where(np.isnan(excess), np.inf, excess)
    i = np.unravel_index(int(np.argmax(excess)), excess.shape)
    passed = bool(np.all(excess <= 0.0))
    n_negative = int(np.sum(fd < -SURVIVAL_NEG_TOL))
    note = f"{n_negative} nodes with negative mixed partial" if n_negative else ""
    return CheckResult(
        name="joint_survival_validity",
        grid=f"{xs.size} x {ys.size} points, x in [{xs.min():.3g}, {xs.max():.3g}], y in [{ys.min():.3g}, {ys.max():.3g}]",
        passed=passed,
        worst_violation=float(max(-float(fd.min()), float(np.abs(fd - dens).max() / max(np.abs(dens).max(), tiny)), 0.0))
        if not passed
        else 0.0,
        worst_location={"x": float(X[i]), "y": float(Y[i]), "finite_difference": float(fd[i]), "density": float(dens[i])},
        tolerance=SURVIVAL_REL_TOL,
        note=note,
    )


# ---------------------------------------------------------------------------
# covariance sign


def check_covariance_sign(p: ModelParams) -> CheckResult:
    """Check that the quadrature covariance is non-positive (up to 1e-8)."""
    if not (0.0 <= p.tau <= 1.0):
        raise DomainError("tau must lie in [0, 1]")
    res = hoeffding_covariance_numeric(p, full_output=True)
    note = "truncated integral" if res.truncated else ""
    if res.note:
        note = f"{note}; {res.note}" if note else res.note
    return CheckResult(
        name="covariance_sign",
        grid="Hoeffding quadrature",
        passed=bool(res.cov <= COV_TOL),
        worst_violation=max(float(res.cov), 0.0),
        worst_location={"cov": float(res.cov), "error": float(res.error)},
        tolerance=COV_TOL,
        note=note,
    )


def validate(p: ModelParams, checks=None) -> ValidationReport:
    """Run the requested checks (all four by default) at their default grids."""
    names = checks or ("r_bounds", "phi_monotone", "joint_survival_validity", "covariance_sign")
    runners = {
        "r_bounds": lambda: check_r_bounds(p),
        "phi_monotone": lambda: check_phi_monotone(p),
        "joint_survival_validity": lambda: check_joint_survival_validity(p),
        "covariance_sign": lambda: check_covariance_sign(p),
    }
    report = ValidationReport(family=p.family, params=p)
    for name in names:
        if name not in runners:
            raise DomainError(f"unknown check {name!r}")
        report.checks.append(runners[name]())
    return report
