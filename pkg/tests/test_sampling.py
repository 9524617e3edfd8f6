import math
import warnings

import numpy as np
import pytest
from scipy import stats

from afc.errors import CalibrationError, DomainError, UnsupportedFamilyError
from afc.families import (
    FamilyKind,
    JointPoint,
    ModelParams,
    conditional_cdf_y_given_x,
    marginal_cdf_x,
    marginal_survival_y,
)
from afc.moments import correlation
from afc.sampling import (
    BivariateSample,
    CopulaConfig,
    MhConfig,
    Provenance,
    calibrate_latent_correlation,
    copula_pearson,
    make_rng,
    mh_acceptance_log_ratio,
    sample_copula,
    sample_exponential_inverse_transform,
    sample_mh,
)

F = FamilyKind


def ref(family, tau=0.5, **shapes):
    if family.has_shapes:
        kw = dict(lam=3.0, nu=4.0)
        kw.update(shapes)
        return ModelParams(family, alpha=1.0, gamma=2.0, tau=tau, **kw)
    return ModelParams(family, alpha=1.0, gamma=2.0, tau=tau)


def ks_crit(n):
    # asymptotic one-sample KS critical value at the 1% level
    return 1.63 / math.sqrt(n)


class TestBivariateSample:
    def test_rejects_nonpositive(self):
        with pytest.raises(DomainError):
            BivariateSample([1.0, 0.0], [1.0, 2.0])

    def test_rejects_nan(self):
        with pytest.raises(DomainError):
            BivariateSample([1.0, np.nan], [1.0, 2.0])

    def test_rejects_ragged(self):
        with pytest.raises(DomainError):
            BivariateSample([1.0, 2.0], [1.0])

    def test_provenance_default(self):
        s = BivariateSample([1.0], [2.0])
        assert s.provenance is Provenance.EXTERNAL
        assert len(s) == s.n == 1


class TestSeeds:
    @pytest.mark.parametrize("seed", [-1, 2**64])
    def test_range(self, seed):
        with pytest.raises(DomainError):
            make_rng(seed)

    def test_inverse_deterministic(self):
        a = sample_exponential_inverse_transform(ref(F.EXPONENTIAL), 500, 42)
        b = sample_exponential_inverse_transform(ref(F.EXPONENTIAL), 500, 42)
        c = sample_exponential_inverse_transform(ref(F.EXPONENTIAL), 500, 43)
        assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)
        assert not np.array_equal(a.x, c.x)

    def test_copula_deterministic(self):
        cfg = CopulaConfig(rho_latent=-0.3)
        a = sample_copula(ref(F.WEIBULL), 500, cfg, seed=7)
        b = sample_copula(ref(F.WEIBULL), 500, cfg, seed=7)
        assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)

    def test_mh_deterministic(self):
        cfg = MhConfig(300, burn_in=100, thin=2)
        a = sample_mh(ref(F.GAMMA), cfg, 3)
        b = sample_mh(ref(F.GAMMA), cfg, 3)
        assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)

    def test_spawned_children_differ(self):
        kids = np.random.SeedSequence(5).spawn(2)
        a = sample_exponential_inverse_transform(ref(F.EXPONENTIAL), 100, kids[0])
        b = sample_exponential_inverse_transform(ref(F.EXPONENTIAL), 100, kids[1])
        assert not np.array_equal(a.x, b.x)
        assert a.metadata["spawn_key"] == [0]

    def test_metadata(self):
        s = sample_exponential_inverse_transform(ref(F.EXPONENTIAL), 10, 42)
        assert s.metadata["rng"] == "numpy.random.PCG64"
        assert s.metadata["seed"] == 42
        assert s.provenance is Provenance.INVERSE_TRANSFORM


class TestInverseTransform:
    def test_only_exponential(self):
        with pytest.raises(UnsupportedFamilyError):
            sample_exponential_inverse_transform(ref(F.WEIBULL), 10, 0)

    def test_size(self):
        with pytest.raises(DomainError):
            sample_exponential_inverse_transform(ref(F.EXPONENTIAL), 0, 0)

    def test_independent_case(self):
        s = sample_exponential_inverse_transform(ref(F.EXPONENTIAL, tau=0.0), 100_000, 1)
        assert s.pearson() == pytest.approx(0.0, abs=0.01)
        assert stats.kstest(s.y, stats.expon(scale=0.5).cdf).statistic < ks_crit(s.n)

    def test_reference_correlation(self):
        s = sample_exponential_inverse_transform(ref(F.EXPONENTIAL), 100_000, 2)
        assert s.pearson() == pytest.approx(-1.0 / 3.0, abs=0.01)

    @pytest.mark.parametrize("tau", [0.05, 0.5, 1.0])
    def test_marginals(self, tau):
        p = ref(F.EXPONENTIAL, tau=tau)
        s = sample_exponential_inverse_transform(p, 20_000, 3)
        assert stats.kstest(s.x, lambda v: marginal_cdf_x(p, v)).pvalue > 0.01
        assert stats.kstest(s.y, lambda v: 1.0 - marginal_survival_y(p, v)).pvalue > 0.01

    @pytest.mark.parametrize("tau", [0.2, 0.5, 1.0])
    def test_conditional_pit_uniform(self, tau):
        p = ref(F.EXPONENTIAL, tau=tau)
        s = sample_exponential_inverse_transform(p, 10_000, 4)
        u = conditional_cdf_y_given_x(p, s.x, s.y)
        assert stats.kstest(u, "uniform").pvalue > 0.01

    def test_conditional_slice(self):
        p = ref(F.EXPONENTIAL)
        s = sample_exponential_inverse_transform(p, 1_000_000, 5)
        y = s.y[(s.x >= 0.99) & (s.x <= 1.01)]
        assert y.size > 5000
        assert stats.kstest(y, lambda v: conditional_cdf_y_given_x(p, 1.0, v)).statistic < 0.02

    def test_extreme_uniforms_finite(self):
        # tau = 1 puts the Lambert argument right at the branch point for small U
        s = sample_exponential_inverse_transform(ref(F.EXPONENTIAL, tau=1.0), 200_000, 6)
        assert np.all(np.isfinite(s.y)) and np.all(s.y > 0)


class TestCopula:
    def test_config(self):
        with pytest.raises(DomainError):
            CopulaConfig(v_c=2.0)
        with pytest.raises(DomainError):
            CopulaConfig(rho_latent=0.2)
        with pytest.raises(DomainError):
            CopulaConfig(calibration_nodes=1)

    @pytest.mark.parametrize("family", [F.HALFCAUCHY, F.GAMMA])
    def test_unsupported(self, family):
        with pytest.raises(UnsupportedFamilyError):
            calibrate_latent_correlation(ref(family))
        with pytest.raises(UnsupportedFamilyError):
            sample_copula(ref(family), 10, CopulaConfig(rho_latent=-0.1))

    def test_independence(self):
        assert calibrate_latent_correlation(ref(F.WEIBULL, tau=0.0)) == 0.0

    def test_zero_latent_gives_zero_pearson(self):
        assert copula_pearson(ref(F.LOMAX), 0.0) == pytest.approx(0.0, abs=1e-10)

    def test_pearson_monotone_in_latent(self):
        vals = [copula_pearson(ref(F.WEIBULL), r) for r in np.linspace(-0.9, 0.0, 10)]
        assert np.all(np.diff(vals) > 0)

    @pytest.mark.parametrize("family", [F.EXPONENTIAL, F.LOMAX, F.WEIBULL, F.LOGLOGISTIC])
    def test_calibration_hits_target(self, family):
        p = ref(family)
        r = calibrate_latent_correlation(p)
        assert -1.0 < r < 0.0
        assert copula_pearson(p, r) == pytest.approx(correlation(p), abs=1e-3)

    def test_exponential_monte_carlo(self):
        p = ref(F.EXPONENTIAL)
        s = sample_copula(p, 1_000_000, seed=8)
        assert s.pearson() == pytest.approx(-1.0 / 3.0, abs=0.005)

    def test_weibull_achieved(self):
        p = ref(F.WEIBULL)
        s = sample_copula(p, 200_000, seed=9)
        assert s.pearson() == pytest.approx(-0.100, abs=0.005)

    def test_loglogistic_matches_model(self):
        # heavy right tails make the sample correlation noisy; 4e5 pairs keep it near the model
        p = ref(F.LOGLOGISTIC)
        s = sample_copula(p, 400_000, seed=10)
        assert s.pearson() == pytest.approx(correlation(p), abs=0.01)

    @pytest.mark.parametrize("family", [F.EXPONENTIAL, F.LOMAX, F.WEIBULL, F.LOGLOGISTIC])
    def test_marginals_exact(self, family):
        p = ref(family)
        s = sample_copula(p, 100_000, CopulaConfig(rho_latent=-0.4), seed=11)
        assert stats.kstest(s.x, lambda v: marginal_cdf_x(p, v)).statistic < 0.01
        assert stats.kstest(s.y, lambda v: 1.0 - marginal_survival_y(p, v)).statistic < 0.01

    def test_unreachable_target(self):
        # near the Weibull infimum the t copula with 5 degrees of freedom cannot follow
        p = ModelParams(F.WEIBULL, alpha=1.0, gamma=1.0, tau=1.0, lam=1.0, nu=200.0)
        with pytest.raises(CalibrationError):
            calibrate_latent_correlation(p, CopulaConfig(v_c=50.0, calibration_nodes=16))

    def test_metadata(self):
        s = sample_copula(ref(F.WEIBULL), 10, CopulaConfig(rho_latent=-0.2), seed=1)
        assert s.metadata["rho_latent"] == -0.2
        assert s.metadata["v_c"] == 5.0
        assert s.provenance is Provenance.COPULA


class TestMhRatio:
    def test_same_point(self):
        pt = JointPoint(1.0, 1.0)
        assert mh_acceptance_log_ratio(ref(F.WEIBULL), pt, pt) == 0.0

    def test_independence(self):
        p = ref(F.LOMAX, tau=0.0)
        assert mh_acceptance_log_ratio(p, JointPoint(1.0, 1.0), JointPoint(3.0, 0.1)) == 0.0

    def test_exponential_reference(self):
        # log(g tau y e^{a tau x} - tau + 1) + a tau x - g y (e^{a tau x} - 1) at both points
        p = ref(F.EXPONENTIAL)
        val = mh_acceptance_log_ratio(p, JointPoint(1.0, 1.0), JointPoint(2.0, 0.5))
        assert val == pytest.approx(-0.06559768748759981734, rel=1e-13)
        assert mh_acceptance_log_ratio(p, JointPoint(2.0, 0.5), JointPoint(1.0, 1.0)) == 0.0


def batch_means_var(v, batches=40):
    """Variance of the mean of a correlated chain from non-overlapping batch means."""
    means = v[: v.size - v.size % batches].reshape(batches, -1).mean(axis=1)
    return means.var(ddof=1) / batches


class TestMh:
    def test_config(self):
        with pytest.raises(DomainError):
            MhConfig(0)
        with pytest.raises(DomainError):
            MhConfig(10, thin=0)
        with pytest.raises(DomainError):
            MhConfig(10, burn_in=-1)

    def test_independent_always_accepts(self):
        s = sample_mh(ref(F.WEIBULL, tau=0.0), MhConfig(2000, burn_in=100, thin=1), 12)
        assert s.metadata["acceptance_rate"] == 1.0
        assert np.unique(s.x).size == s.n

    def test_size_and_thinning(self):
        s = sample_mh(ref(F.LOMAX), MhConfig(123, burn_in=7, thin=3), 13)
        assert s.n == 123
        assert s.metadata["thin"] == 3

    def test_gamma_reference_correlation(self):
        s = sample_mh(ref(F.GAMMA), MhConfig(10_000), 2024)
        assert s.pearson() == pytest.approx(-0.123, abs=0.02)

    def test_halfcauchy_reference_correlation(self):
        s = sample_mh(ref(F.HALFCAUCHY), MhConfig(10_000), 2024)
        assert s.pearson() == pytest.approx(-0.009, abs=0.02)

    @pytest.mark.parametrize("family", [F.EXPONENTIAL, F.WEIBULL, F.GAMMA])
    def test_split_chain_means(self, family):
        s = sample_mh(ref(family), MhConfig(20_000), 14)
        for v in (s.x, s.y):
            a, b = v[: v.size // 2], v[v.size // 2 :]
            se = math.sqrt(batch_means_var(a) + batch_means_var(b))
            assert abs(a.mean() - b.mean()) <= 3 * se

    def test_exponential_matches_theory(self):
        s = sample_mh(ref(F.EXPONENTIAL), MhConfig(50_000), 15)
        assert s.pearson() == pytest.approx(-1.0 / 3.0, abs=0.02)
        assert s.y.mean() == pytest.approx(0.5, abs=0.01)

    @pytest.mark.parametrize("family", list(F))
    def test_marginals_follow_model(self, family):
        p = ref(family)
        s = sample_mh(p, MhConfig(5000), 16)
        # thinned chains are mildly autocorrelated, hence the looser 0.1% level
        assert stats.kstest(s.x, lambda v: marginal_cdf_x(p, v)).pvalue > 1e-3
        assert stats.kstest(s.y, lambda v: 1.0 - marginal_survival_y(p, v)).pvalue > 1e-3

    def test_low_acceptance_warns(self):
        p = ModelParams(F.GAMMA, alpha=1.0, gamma=1.0, tau=1.0, lam=0.005, nu=0.005)
        with pytest.warns(RuntimeWarning, match="acceptance rate"):
            s = sample_mh(p, MhConfig(500, burn_in=500), 0)
        assert "warning" in s.metadata
        assert s.metadata["acceptance_rate"] < 0.01

    def test_no_warning_at_reference(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            sample_mh(ref(F.WEIBULL), MhConfig(500, burn_in=500), 0)
