"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Target figures are replication-study means and standard errors at n = 1000
and sample correlations at n = 1e4.
"""

import math
import time

import numpy as np
import pytest
from scipy.stats import kstest

from afc.errors import MomentExistenceError, NoRootError
from afc.estimation import Method, mle, mme, replication_study
from afc.families import FamilyKind, ModelParams, conditional_cdf_y_given_x
from afc.moments import (
    CLOSED_FORM_FAMILIES,
    RHO_INFIMUM,
    covariance,
    hoeffding_covariance_numeric,
    rho_min,
    theoretical_moments,
)
from afc.sampling import (
    BivariateSample,
    CopulaConfig,
    MhConfig,
    calibrate_latent_correlation,
    sample_copula,
    sample_exponential_inverse_transform,
    sample_mh,
)
from afc.validation import (
    check_covariance_sign,
    check_joint_survival_validity,
    check_phi_monotone,
    check_r_bounds,
)

F = FamilyKind


def reference(family, tau=0.5):
    kw = dict(alpha=1.0, gamma=2.0, tau=tau)
    if family.has_shapes:
        kw.update(lam=3.0, nu=4.0)
    return ModelParams(family, **kw)


@pytest.fixture
def report(capsys):
    def emit(criterion, failures, elapsed, detail=""):
        status = "PASS" if not failures else "FAIL"
        line = f"ACCEPTANCE {criterion}: {status} ({elapsed:.1f} s)"
        if detail:
            line += f" {detail}"
        if failures:
            line += " | " + "; ".join(failures)
        with capsys.disabled():
            print("\n" + line)
        assert not failures, line

    return emit


def test_criterion_1_reference_correlations(report):
    t0 = time.perf_counter()
    target = {F.EXPONENTIAL: -0.333, F.LOMAX: -0.187, F.WEIBULL: -0.100, F.LOGLOGISTIC: -0.125}
    failures, got = [], {}
    for fam, rho in target.items():
        got[fam.value] = theoretical_moments(reference(fam)).rho
        if abs(got[fam.value] - rho) > 5e-4:
            failures.append(f"{fam.value} rho {got[fam.value]:.5f} vs {rho}")
    elapsed = time.perf_counter() - t0
    if elapsed >= 1.0:
        failures.append(f"runtime {elapsed:.2f} s")
    report(1, failures, elapsed, " ".join(f"{k}={v:.4f}" for k, v in got.items()))


def test_criterion_2_hoeffding_agreement(report):
    t0 = time.perf_counter()
    failures, worst = [], 0.0
    for fam in F:
        for tau in (0.0, 0.25, 0.5, 1.0):
            p = reference(fam, tau)
            num = hoeffding_covariance_numeric(p)
            if num > 1e-8:
                failures.append(f"{fam.value} tau={tau} numeric cov {num:.3e} > 0")
            if fam in CLOSED_FORM_FAMILIES:
                closed = covariance(p)
                gap = abs(closed - num) / (1 + abs(closed))
                worst = max(worst, gap)
                if gap > 1e-5:
                    failures.append(f"{fam.value} tau={tau} gap {gap:.2e}")
    elapsed = time.perf_counter() - t0
    if elapsed >= 120:
        failures.append(f"runtime {elapsed:.0f} s")
    report(2, failures, elapsed, f"worst scaled gap {worst:.2e}")


def test_criterion_3_correlation_bounds(report):
    t0 = time.perf_counter()
    failures = []
    if not (RHO_INFIMUM[F.EXPONENTIAL] == RHO_INFIMUM[F.LOMAX] == rho_min(F.EXPONENTIAL) == -0.5):
        failures.append("exponential/lomax infimum constant is not -0.5")
    # the Lomax bound decreases to -1/2 as both shapes grow and never crosses it
    lomax = [rho_min(F.LOMAX, lam, lam) for lam in np.geomspace(2.01, 1e12, 200)]
    if min(lomax) < -0.5 or abs(lomax[-1] + 0.5) > 1e-11:
        failures.append(f"lomax bound path ends at {lomax[-1]!r}")
    weib = rho_min(F.WEIBULL, 1.0, 1e6)
    weib_gap = abs(weib + math.sqrt(6) / math.pi)
    if weib_gap > 1e-9:
        failures.append(f"weibull rho_min(1, 1e6) = {weib:.12f}, {weib_gap:.2e} from -sqrt(6)/pi")
    grid = np.geomspace(2.01, 200, 80)
    ll = min(rho_min(F.LOGLOGISTIC, lam, nu) for lam in grid for nu in grid)
    if abs(ll + 0.54076) > 2e-3:
        failures.append(f"log-logistic grid minimum {ll:.5f}, {abs(ll + 0.54076):.2e} from -0.54076")
    elapsed = time.perf_counter() - t0
    if elapsed >= 60:
        failures.append(f"runtime {elapsed:.0f} s")
    report(3, failures, elapsed)


# n = 1000 MLE targets: (mean, SE over replications)
TARGET_MLE = {
    F.EXPONENTIAL: {"alpha": (1.000, 0.031), "gamma": (2.000, 0.063), "tau": (0.501, 0.028)},
    F.LOMAX: {
        "alpha": (0.848, 0.268),
        "gamma": (1.889, 0.622),
        "lambda": (3.406, 0.888),
        "nu": (4.178, 1.120),
        "tau": (0.481, 0.090),
    },
    F.WEIBULL: {
        "alpha": (1.000, 0.012),
        "gamma": (2.000, 0.018),
        "lambda": (3.005, 0.083),
        "nu": (4.004, 0.109),
        "tau": (0.501, 0.050),
    },
    F.LOGLOGISTIC: {
        "alpha": (1.001, 0.024),
        "gamma": (1.998, 0.033),
        "lambda": (3.022, 0.125),
        "nu": (4.013, 0.125),
        "tau": (0.488, 0.079),
    },
    F.HALFCAUCHY: {"alpha": (1.009, 0.070), "gamma": (1.987, 0.116), "tau": (0.488, 0.069)},
    F.GAMMA: {
        "alpha": (1.007, 0.058),
        "gamma": (2.007, 0.105),
        "lambda": (3.016, 0.146),
        "nu": (4.012, 0.197),
        "tau": (0.497, 0.069),
    },
}


def test_criterion_4_table_replication(report):
    t0 = time.perf_counter()
    failures, ratios = [], []
    for fam, rows in TARGET_MLE.items():
        summary = replication_study(fam, reference(fam), 1000, 200, Method.MLE, seed=2024, threads=None)
        got = {r["parameter"]: r for r in summary.rows}
        for name, (mean, se) in rows.items():
            r = got[name]
            ratio = r["se"] / se
            ratios.append(ratio)
            if abs(r["mean"] - mean) > 3 * se:
                failures.append(f"{fam.value} {name} mean {r['mean']:.4f} outside {mean} +/- {3 * se:.3f}")
            if not 1 / 1.5 <= ratio <= 1.5:
                failures.append(f"{fam.value} {name} SE {r['se']:.4f} vs {se} (ratio {ratio:.2f})")
    elapsed = time.perf_counter() - t0
    if elapsed >= 1800:
        failures.append(f"runtime {elapsed:.0f} s")
    report(4, failures, elapsed, f"SE ratios in [{min(ratios):.2f}, {max(ratios):.2f}]")


# n = 1e4 correlation targets for copula and MH samples
TARGET_PC_COPULA = {F.EXPONENTIAL: -0.334, F.WEIBULL: -0.100}
TARGET_PC_MH = {F.WEIBULL: (-0.100, 0.02), F.GAMMA: (-0.123, 0.02), F.LOMAX: (-0.220, 0.05), F.HALFCAUCHY: (-0.009, 0.05)}
PC_DATASETS = 30


def test_criterion_5_sampler_correlations(report):
    # the targets average the Pearson correlation over simulated datasets,
    # so each figure here is a mean over several n = 1e4 samples
    t0 = time.perf_counter()
    failures, got = [], {}
    seeds = np.random.SeedSequence(515).spawn(PC_DATASETS)
    for fam, pc in TARGET_PC_COPULA.items():
        p = reference(fam)
        cfg = CopulaConfig(rho_latent=calibrate_latent_correlation(p))
        mean = float(np.mean([sample_copula(p, 10_000, cfg, s).pearson() for s in seeds]))
        got[f"{fam.value}/copula"] = mean
        if abs(mean - pc) > 0.01:
            failures.append(f"{fam.value} copula PC {mean:.4f} vs {pc}")
    for fam, (pc, tol) in TARGET_PC_MH.items():
        p = reference(fam)
        mean = float(np.mean([sample_mh(p, MhConfig(10_000), s).pearson() for s in seeds]))
        got[f"{fam.value}/mh"] = mean
        if abs(mean - pc) > tol:
            failures.append(f"{fam.value} MH PC {mean:.4f} vs {pc} +/- {tol}")
    elapsed = time.perf_counter() - t0
    if elapsed >= 600:
        failures.append(f"runtime {elapsed:.0f} s")
    report(5, failures, elapsed, " ".join(f"{k}={v:.4f}" for k, v in got.items()))


def test_criterion_6_inverse_transform_exactness(report):
    # slice the sample by X quantile; within each slice the conditional CDF
    # of Y given X = x must map Y to uniforms
    t0 = time.perf_counter()
    p = reference(F.EXPONENTIAL)
    s = sample_exponential_inverse_transform(p, 10_000, 606)
    u = np.asarray(conditional_cdf_y_given_x(p, s.x, s.y))
    edges = np.quantile(s.x, np.linspace(0, 1, 6))
    slot = np.clip(np.searchsorted(edges, s.x, side="right") - 1, 0, 4)
    failures, pvals = [], []
    for k in range(5):
        pv = kstest(u[slot == k], "uniform").pvalue
        pvals.append(pv)
        if pv < 0.01:
            failures.append(f"slice {k} KS p = {pv:.4f}")
    pooled = kstest(u, "uniform").pvalue
    if pooled < 0.01:
        failures.append(f"pooled KS p = {pooled:.4f}")
    elapsed = time.perf_counter() - t0
    if elapsed >= 30:
        failures.append(f"runtime {elapsed:.0f} s")
    report(6, failures, elapsed, f"min slice p = {min(pvals):.3f}, pooled p = {pooled:.3f}")


def _random_params(family, rng):
    kw = dict(alpha=rng.uniform(0.3, 3.0), gamma=rng.uniform(0.3, 3.0), tau=rng.uniform(0.0, 1.0))
    if family.has_shapes:
        kw.update(lam=rng.uniform(0.5, 8.0), nu=rng.uniform(0.5, 8.0))
    return ModelParams(family, **kw)


def test_criterion_7_validity_suite(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(707)
    failures = []
    checks = (check_r_bounds, check_phi_monotone, check_joint_survival_validity, check_covariance_sign)
    for fam in F:
        for _ in range(25):
            p = _random_params(fam, rng)
            for check in checks:
                res = check(p)
                if not res.passed:
                    failures.append(f"{fam.value} {check.__name__} at {p.to_dict()}: {res.worst_violation:.2e}")
    elapsed = time.perf_counter() - t0
    if elapsed >= 300:
        failures.append(f"runtime {elapsed:.0f} s")
    report(7, failures, elapsed, f"{len(F) * 25 * len(checks)} checks")


def test_criterion_8_estimator_sanity(report):
    t0 = time.perf_counter()
    failures = []
    # closed loop: four points whose (population) moments equal the theoretical
    # ones; z and w have mean 0, variance 1 and correlation -1/3 = rho
    p = reference(F.EXPONENTIAL)
    m = theoretical_moments(p)
    a = 1.0 / math.sqrt(3.0)
    z = np.array([-a, -a, -a, 3 * a])
    w = np.array([3 * a, -a, -a, -a])
    assert m.rho == pytest.approx(-1.0 / 3.0, rel=1e-15)
    exact = BivariateSample(m.mean_x + math.sqrt(m.var_x) * z, m.mean_y + math.sqrt(m.var_y) * w)
    fit = mme(F.EXPONENTIAL, exact)
    for name, truth in (("alpha", 1.0), ("gamma", 2.0), ("tau", 0.5)):
        got = getattr(fit.params, name)
        if abs(got - truth) > 1e-9:
            failures.append(f"closed-loop {name} {got!r}")
    compared = 0
    for fam in (F.EXPONENTIAL, F.LOMAX, F.WEIBULL, F.LOGLOGISTIC):
        q = reference(fam)
        for seed in (801, 802, 803):
            data = sample_exponential_inverse_transform(q, 1000, seed) if fam is F.EXPONENTIAL else sample_mh(q, MhConfig(1000), seed)
            try:
                mm = mme(fam, data)
            except (MomentExistenceError, NoRootError):
                continue
            compared += 1
            ml = mle(fam, data)
            if ml.log_lik < mm.log_lik:
                failures.append(f"{fam.value} seed {seed}: MLE {ml.log_lik:.6f} < MME {mm.log_lik:.6f}")
    elapsed = time.perf_counter() - t0
    report(8, failures, elapsed, f"{compared} shared datasets")


def test_criterion_9_boundary_diagnostics(report):
    t0 = time.perf_counter()
    p = reference(F.WEIBULL)
    hits = 0
    for k in range(20):
        fit = mle(F.LOMAX, sample_mh(p, MhConfig(5000), 900 + k))
        hits += bool(fit.boundary_flags)
    failures = [] if hits >= 10 else [f"only {hits}/20 runs flagged"]
    elapsed = time.perf_counter() - t0
    report(9, failures, elapsed, f"{hits}/20 runs flagged")
