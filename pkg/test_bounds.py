import math

import numpy as np
import pytest

from backend.bayes import posterior_update, uniform_prior
from backend.bellman import ValueFunction, estimated_backup, iteration_cap, value_iteration
from backend.bounds import (
    all_bounds,
    backup_operation_count,
    perturbation_bound,
    sample_complexity_T,
    stage_iteration_bound,
    sweep_iteration_bound,
)
from backend.mdp import MdpModel, TransitionCounts
from backend.schemas import BoundParams, CVaRRisk

EXAMPLE = BoundParams(c_bar=1.0, gamma=0.9, theta=0.1, alpha1=0.5, alpha2=0.5, n_states=2, n_actions=2,
                      o_alpha=1.0, delta_total=4.0)


class TestExamples:
    def test_sample_complexity(self):
        p = BoundParams(mu_min=0.01, a_bar0=1.0, c_bar=1.0, gamma=0.9, alpha1=0.5, alpha2=0.5, theta=0.1,
                        n_states=11, n_actions=3, delta=0.05, t0=10.0)
        assert sample_complexity_T(p) == pytest.approx(10 + 128 * 11 / (0.01 * 1e-4 * 0.0625 * 0.01), rel=1e-6)
        assert sample_complexity_T(p) == pytest.approx(2.2528e12, rel=1e-6)

    def test_perturbation(self):
        assert perturbation_bound(EXAMPLE) == pytest.approx(12800 * math.log(2.0), rel=1e-9)
        assert perturbation_bound(EXAMPLE.model_copy(update={"delta_total": 0.0})) == 0.0

    def test_stage_iterations(self):
        assert stage_iteration_bound(EXAMPLE) == 109
        assert stage_iteration_bound(EXAMPLE.model_copy(update={"delta_total": 0.0})) == 0

    def test_sweep_iterations(self):
        p = EXAMPLE.model_copy(update={"delta_total": 16.0, "o0": 1.0, "sweep_index": 0})
        by_hand = 4 * (math.log(1 + 128000 * math.log(2)) / math.log(1 / 0.9) + 1)
        assert sweep_iteration_bound(p) == pytest.approx(by_hand, rel=1e-9)
        assert sweep_iteration_bound(p) == pytest.approx(436.54, abs=0.01)
        assert sweep_iteration_bound(p.model_copy(update={"delta_total": 0.0})) == pytest.approx(4.0)

    def test_overflow_gives_inf(self):
        p = BoundParams(theta=1e-320, c_bar=1e10, delta_total=4.0)
        assert stage_iteration_bound(p) == math.inf
        assert sweep_iteration_bound(p) == math.inf
        assert sample_complexity_T(p) == math.inf
        assert perturbation_bound(p) < math.inf

    def test_underflowing_denominators_give_inf(self):
        p = BoundParams(alpha1=1e-200, alpha2=1e-200, delta_total=4.0)
        assert sample_complexity_T(p) == math.inf
        assert perturbation_bound(p) == math.inf
        assert stage_iteration_bound(p) == math.inf
        assert sweep_iteration_bound(p) == math.inf

    def test_huge_cost_scale_does_not_raise(self):
        assert sample_complexity_T(BoundParams(c_bar=1e200)) == math.inf

    def test_all_bounds_keys(self):
        assert set(all_bounds(EXAMPLE)) == {"sample_complexity_T", "perturbation_bound", "stage_iteration_bound",
                                            "sweep_iteration_bound"}

    def test_backup_cost_grows_with_samples(self):
        assert backup_operation_count(11, 3, 400) > backup_operation_count(11, 3, 200)


class TestScaling:
    def test_halving_theta_quadruples_dominant_term(self):
        p = BoundParams(mu_min=0.01, c_bar=1.0, gamma=0.9, alpha1=0.5, alpha2=0.5, theta=0.1, n_states=11,
                        n_actions=3, t0=10.0)
        half = p.model_copy(update={"theta": 0.05})
        assert sample_complexity_T(half) - 10 == pytest.approx(4 * (sample_complexity_T(p) - 10), rel=1e-12)

    def test_log_term_when_others_vanish(self):
        p = BoundParams(mu_min=1.0, c_bar=1e-6, theta=1.0, n_states=1, n_actions=2, delta=1e-9)
        assert sample_complexity_T(p) == pytest.approx(8.0 * math.log(4.0 / 1e-9))

    def test_monotone_on_random_pairs(self):
        rng = np.random.default_rng(0)
        for _ in range(10_000):
            delta_lo, delta_hi = np.sort(rng.uniform(0.0, 100.0, size=2))
            o_lo, o_hi = np.sort(rng.uniform(0.1, 10.0, size=2))
            sweep_lo, sweep_hi = np.sort(rng.integers(0, 20, size=2))
            base = BoundParams(alpha1=float(rng.uniform(0.05, 1.0)), alpha2=float(rng.uniform(0.05, 1.0)),
                               theta=float(rng.uniform(0.01, 1.0)), n_states=int(rng.integers(1, 6)),
                               n_actions=int(rng.integers(1, 4)), o_alpha=float(o_lo))
            lo = base.model_copy(update={"delta_total": float(delta_lo)})
            hi = base.model_copy(update={"delta_total": float(delta_hi)})
            assert perturbation_bound(lo) <= perturbation_bound(hi)
            assert stage_iteration_bound(lo) <= stage_iteration_bound(hi)
            assert perturbation_bound(hi.model_copy(update={"o_alpha": float(o_hi)})) <= perturbation_bound(hi)
            assert stage_iteration_bound(hi.model_copy(update={"o_alpha": float(o_hi)})) <= stage_iteration_bound(hi)
            early = hi.model_copy(update={"sweep_index": int(sweep_lo)})
            late = hi.model_copy(update={"sweep_index": int(sweep_hi)})
            assert sweep_iteration_bound(late) <= sweep_iteration_bound(early)


def test_observed_iterations_stay_below_stage_bound():
    rng = np.random.default_rng(5)
    inner = outer = CVaRRisk(alpha=0.5)
    theta = 0.01
    for scenario in range(20):
        model = MdpModel(rng.uniform(-1.0, 1.0, size=(2, 2, 2)), 0.9)
        prior = uniform_prior(2, 2)
        cap = iteration_cap(model.c_bar, model.gamma, theta)
        before = value_iteration(estimated_backup(model, prior, inner, outer, n=100, seed=scenario),
                                 ValueFunction(np.zeros(2)), theta, cap)
        counts = np.zeros((2, 2, 2), dtype=np.int64)
        for _ in range(4):
            counts[tuple(rng.integers(0, 2, size=3))] += 1
        post = posterior_update(prior, TransitionCounts(counts))
        after = value_iteration(estimated_backup(model, post, inner, outer, n=100, seed=scenario, stage=1),
                                before.value, theta, cap)
        p = BoundParams(c_bar=model.c_bar, gamma=0.9, theta=theta, alpha1=0.5, alpha2=0.5, n_states=2,
                        n_actions=2, o_alpha=prior.o_alpha, delta_total=4.0)
        assert after.iterations <= stage_iteration_bound(p)
