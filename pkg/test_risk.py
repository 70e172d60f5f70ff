import numpy as np
import pytest

from backend.errors import DegenerateAlpha, LPUnbounded, UnsupportedRiskSpec
from backend.risk import (
    beta_eval,
    cvar_batch,
    cvar_discrete,
    cvar_envelope,
    envelope_lp_solve,
    instantiate_envelope,
    lipschitz_B_sigma,
    semideviation_envelope,
    sigma_eval,
)
from backend.schemas import CVaRRisk, EnvelopeRisk, MeanRisk

UNIFORM4 = np.full(4, 0.25)
SPECS = [MeanRisk(), CVaRRisk(alpha=0.3), CVaRRisk(alpha=1.0)]


def random_instance(rng, k=None):
    k = k or int(rng.integers(2, 7))
    return rng.normal(size=k) * 3.0, rng.dirichlet(np.ones(k))


def grid_cvar(values, probs, alpha):
    """min over y on the atom grid of y + E[(v - y)^+] / alpha."""
    return min(y + np.sum(probs * np.maximum(values - y, 0.0)) / alpha for y in values)


class TestCVaR:
    def test_half_level(self):
        assert cvar_discrete([4, 3, 2, 1], UNIFORM4, 0.5) == pytest.approx(3.5)

    def test_fractional_straddling_atom(self):
        assert cvar_discrete([4, 3, 2, 1], UNIFORM4, 0.3) == pytest.approx((0.25 * 4 + 0.05 * 3) / 0.3)

    def test_level_one_is_the_mean(self):
        values = np.array([5.0, -1.0, 2.5])
        probs = np.array([0.2, 0.3, 0.5])
        assert cvar_discrete(values, probs, 1.0) == float(np.sum(values * probs))

    @pytest.mark.parametrize("alpha", [0.0, -0.2])
    def test_degenerate_level(self, alpha):
        with pytest.raises(DegenerateAlpha):
            cvar_discrete([1, 2], [0.5, 0.5], alpha)

    def test_matches_rockafellar_uryasev_grid(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            v, m = random_instance(rng)
            alpha = float(rng.uniform(0.05, 1.0))
            assert cvar_discrete(v, m, alpha) == pytest.approx(grid_cvar(v, m, alpha), abs=1e-10)

    def test_dominance_and_mean_bound(self):
        rng = np.random.default_rng(4)
        for _ in range(500):
            v, m = random_instance(rng)
            alpha = float(rng.uniform(0.01, 1.0))
            mean = float(v @ m)
            cvar = cvar_discrete(v, m, alpha)
            assert mean - 1e-12 <= cvar <= v.max() + 1e-12
            nonneg = np.abs(v)
            assert cvar_discrete(nonneg, m, alpha) <= float(nonneg @ m) / alpha + 1e-12

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(5)
        values = rng.normal(size=(6, 5))
        probs = rng.dirichlet(np.ones(5), size=6)
        batch = cvar_batch(values, probs, 0.4)
        for i in range(6):
            assert batch[i] == pytest.approx(cvar_discrete(values[i], probs[i], 0.4))


class TestSigmaBeta:
    def test_sigma_mean(self):
        assert sigma_eval(MeanRisk(), [1, 2, 3], [1 / 3] * 3) == pytest.approx(2.0)

    def test_sigma_cvar(self):
        assert sigma_eval(CVaRRisk(alpha=0.5), [0, 1], [0.5, 0.5]) == pytest.approx(1.0)

    def test_beta_mean_and_cvar(self):
        assert beta_eval(MeanRisk(), [1, 2, 3, 4]) == pytest.approx(2.5)
        assert beta_eval(CVaRRisk(alpha=0.5), [1, 2, 3, 4]) == pytest.approx(3.5)

    @pytest.mark.parametrize("spec", [MeanRisk(), CVaRRisk(alpha=0.2), cvar_envelope(0.2), semideviation_envelope(0.5)])
    def test_single_sample_is_returned(self, spec):
        assert beta_eval(spec, [7.25]) == pytest.approx(7.25)

    def test_rejects_non_finite_values(self):
        with pytest.raises(ValueError):
            sigma_eval(MeanRisk(), [1.0, np.inf], [0.5, 0.5])

    @pytest.mark.parametrize("spec", SPECS)
    def test_monotone(self, spec):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            v, m = random_instance(rng)
            bigger = v + rng.uniform(0.0, 1.0, size=v.size)
            assert sigma_eval(spec, bigger, m) >= sigma_eval(spec, v, m) - 1e-12

    @pytest.mark.parametrize("spec", SPECS)
    def test_translation_and_homogeneity(self, spec):
        rng = np.random.default_rng(12)
        for _ in range(1000):
            v, m = random_instance(rng)
            c = float(rng.normal() * 5.0)
            scale = float(rng.uniform(0.0, 4.0))
            base = sigma_eval(spec, v, m)
            assert sigma_eval(spec, v + c, m) == pytest.approx(base + c, abs=1e-10)
            assert sigma_eval(spec, scale * v, m) == pytest.approx(scale * base, abs=1e-10)
            assert beta_eval(spec, v + c) == pytest.approx(beta_eval(spec, v) + c, abs=1e-10)

    def test_envelope_is_monotone_and_translation_invariant(self):
        rng = np.random.default_rng(13)
        spec = semideviation_envelope(0.7)
        for _ in range(100):
            v, m = random_instance(rng)
            c = float(rng.normal())
            base = sigma_eval(spec, v, m)
            assert sigma_eval(spec, v + 0.5, m) >= base - 1e-9
            assert sigma_eval(spec, v + c, m) == pytest.approx(base + c, abs=1e-8)

    @pytest.mark.parametrize("spec", [MeanRisk(), CVaRRisk(alpha=0.5), CVaRRisk(alpha=0.1)])
    def test_cross_section_continuity(self, spec):
        rng = np.random.default_rng(14)
        c_bar, gamma = 1.0, 0.9
        bound = lipschitz_B_sigma(spec, c_bar, gamma).value
        for _ in range(500):
            k = int(rng.integers(2, 7))
            v = rng.uniform(-1.0, 1.0, size=k) * c_bar / (1 - gamma)
            m1, m2 = rng.dirichlet(np.ones(k)), rng.dirichlet(np.ones(k))
            gap = abs(sigma_eval(spec, v, m1) - sigma_eval(spec, v, m2))
            assert gap <= bound * np.abs(m1 - m2).sum() + 1e-10


class TestEnvelopes:
    def test_level_one_envelope_is_the_mean(self):
        v, m = np.array([3.0, -2.0, 1.0]), np.array([0.2, 0.5, 0.3])
        result = envelope_lp_solve(instantiate_envelope(cvar_envelope(1.0), v, m))
        assert result.value == pytest.approx(float(v @ m), abs=1e-9)

    def test_cvar_envelope_example(self):
        result = envelope_lp_solve(instantiate_envelope(cvar_envelope(0.3), [4, 3, 2, 1], UNIFORM4))
        assert result.value == pytest.approx(3.8333333333, abs=1e-8)
        assert float(result.x @ UNIFORM4) == pytest.approx(1.0)

    def test_cvar_envelope_agrees_with_closed_form(self):
        rng = np.random.default_rng(21)
        for _ in range(100):
            v, m = random_instance(rng)
            alpha = float(rng.uniform(0.05, 1.0))
            closed = sigma_eval(CVaRRisk(alpha=alpha), v, m)
            assert sigma_eval(cvar_envelope(alpha), v, m) == pytest.approx(closed, abs=1e-8)

    def test_semideviation_envelope_value(self):
        rng = np.random.default_rng(22)
        for _ in range(50):
            v, m = random_instance(rng)
            kappa = float(rng.uniform(0.0, 1.0))
            mean = float(v @ m)
            expected = mean + kappa * float(m @ np.maximum(v - mean, 0.0))
            assert sigma_eval(semideviation_envelope(kappa), v, m) == pytest.approx(expected, abs=1e-8)

    def test_missing_normalization_is_unbounded(self):
        spec = EnvelopeRisk(normalized=False)
        with pytest.raises(LPUnbounded):
            envelope_lp_solve(instantiate_envelope(spec, [1.0, 2.0], [0.5, 0.5]))

    def test_dual_terms_require_dual_variables(self):
        with pytest.raises(ValueError):
            EnvelopeRisk(constraints=semideviation_envelope(0.5).constraints)


class TestLipschitz:
    def test_mean(self):
        assert lipschitz_B_sigma(MeanRisk(), 1.0, 0.9).value == pytest.approx(10.0)

    def test_cvar(self):
        assert lipschitz_B_sigma(CVaRRisk(alpha=0.5), 1.0, 0.9).value == pytest.approx(40.0)
        assert lipschitz_B_sigma(CVaRRisk(alpha=1.0), 2.0, 0.5).value == pytest.approx(8.0)

    def test_envelope_is_refused(self):
        with pytest.raises(UnsupportedRiskSpec):
            lipschitz_B_sigma(cvar_envelope(0.5), 1.0, 0.9)
