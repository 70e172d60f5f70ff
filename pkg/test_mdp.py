import numpy as np
import pytest

from backend.envs import binomial_pmf, build_coin_toss
from backend.errors import InvalidStart, KernelValidationError, NegativeEntry, RowSumMismatch
from backend.mdp import (
    MdpModel,
    Policy,
    StateChain,
    TransitionCounts,
    TransitionKernel,
    count_transitions,
    induced_chain,
    simulate,
    stationary_distribution,
    validate_kernel,
)


def two_state_kernel():
    # action 0 stays put, action 1 swaps
    probs = np.zeros((2, 2, 2))
    probs[0, 0, 0] = probs[1, 0, 1] = 1.0
    probs[0, 1, 1] = probs[1, 1, 0] = 1.0
    return TransitionKernel(probs)


class TestModel:
    def test_value_bound(self):
        model = MdpModel(np.array([[[1.0, -3.0]], [[0.5, 2.0]]]), gamma=0.75)
        assert model.c_bar == 3.0
        assert model.value_bound == pytest.approx(12.0)

    @pytest.mark.parametrize("gamma", [0.0, 1.0, 1.5])
    def test_discount_range(self, gamma):
        with pytest.raises(ValueError):
            MdpModel(np.zeros((1, 1, 1)), gamma=gamma)

    def test_tables_are_read_only(self):
        model = MdpModel(np.zeros((1, 1, 1)), gamma=0.5)
        with pytest.raises(ValueError):
            model.cost[0, 0, 0] = 1.0


class TestValidation:
    def test_valid_kernel(self):
        assert validate_kernel(two_state_kernel()).ok

    def test_reports_every_violation(self):
        probs = np.full((2, 1, 2), 0.5)
        probs[0, 0] = [1.2, -0.2]
        probs[1, 0] = [0.5, 0.6]
        report = validate_kernel(TransitionKernel(probs))
        assert any(isinstance(v, NegativeEntry) and (v.s, v.a, v.s_next) == (0, 0, 1) for v in report.violations)
        mismatch = [v for v in report.violations if isinstance(v, RowSumMismatch)]
        assert [(v.s, v.a) for v in mismatch] == [(1, 0)]
        assert mismatch[0].deviation == pytest.approx(0.1)
        with pytest.raises(KernelValidationError):
            report.raise_if_invalid()

    def test_shape_mismatch_with_model(self):
        with pytest.raises(ValueError):
            validate_kernel(two_state_kernel(), MdpModel(np.zeros((3, 2, 3)), gamma=0.9))


class TestSimulation:
    def test_deterministic_swap(self):
        policy = Policy.deterministic([1, 1], 2)
        traj = simulate(two_state_kernel(), policy, start=0, steps=5, seed=1)
        assert traj.steps[:, 0].tolist() == [0, 1, 0, 1, 0]
        assert traj.is_chained()
        assert traj.last_state == 1

    def test_same_seed_same_trajectory(self):
        kernel = TransitionKernel(np.full((3, 2, 3), 1 / 3))
        policy = Policy.uniform(3, 2)
        first = simulate(kernel, policy, 0, 200, seed=42)
        again = simulate(kernel, policy, 0, 200, seed=42)
        other = simulate(kernel, policy, 0, 200, seed=43)
        np.testing.assert_array_equal(first.steps, again.steps)
        assert not np.array_equal(first.steps, other.steps)

    def test_coin_toss_frequencies_follow_the_binomial(self):
        env = build_coin_toss()
        traj = simulate(env.kernel, Policy.uniform(11, 3), 0, 100_000, seed=5)
        freq = np.bincount(traj.steps[:, 2], minlength=11) / len(traj)
        np.testing.assert_allclose(freq, binomial_pmf(10, env.params["p_head"]), atol=0.01)

    @pytest.mark.parametrize("start", [-1, 2])
    def test_invalid_start(self, start):
        with pytest.raises(InvalidStart):
            simulate(two_state_kernel(), Policy.uniform(2, 2), start, 3, seed=0)

    def test_counts_match_trajectory(self):
        kernel = TransitionKernel(np.full((3, 2, 3), 1 / 3))
        traj = simulate(kernel, Policy.uniform(3, 2), 1, 500, seed=7)
        counts = count_transitions(traj)
        assert counts.total == 500
        s, a, t = traj.steps[10]
        assert counts.counts[s, a, t] >= 1

    def test_counts_add(self):
        one = TransitionCounts(np.ones((2, 1, 2), dtype=np.int64))
        assert (one + one).total == 8
        assert TransitionCounts.zeros(2, 1).total == 0
        with pytest.raises(ValueError):
            TransitionCounts(-np.ones((1, 1, 1)))


class TestStationary:
    def test_two_state_chain(self):
        chain = StateChain(np.array([[0.9, 0.1], [0.5, 0.5]]))
        np.testing.assert_allclose(stationary_distribution(chain), [5 / 6, 1 / 6], atol=1e-8)

    def test_periodic_chain(self):
        chain = StateChain(np.array([[0.0, 1.0], [1.0, 0.0]]))
        np.testing.assert_allclose(stationary_distribution(chain), [0.5, 0.5], atol=1e-8)

    def test_fixed_point_of_random_chain(self):
        rng = np.random.default_rng(0)
        P = rng.dirichlet(np.ones(5), size=5)
        pi = stationary_distribution(StateChain(P))
        assert pi.sum() == pytest.approx(1.0)
        np.testing.assert_allclose(pi @ P, pi, atol=1e-8)

    def test_identity_chain_stays_uniform(self):
        np.testing.assert_allclose(stationary_distribution(StateChain(np.eye(4))), np.full(4, 0.25))

    def test_coin_toss_chain_is_the_binomial(self):
        env = build_coin_toss()
        chain = induced_chain(env.kernel, Policy.deterministic([0] * 11, 3))
        np.testing.assert_allclose(stationary_distribution(chain), binomial_pmf(10, env.params["p_head"]), atol=1e-8)

    def test_induced_chain_mixes_actions(self):
        chain = induced_chain(two_state_kernel(), Policy.uniform(2, 2))
        np.testing.assert_allclose(chain.probs, np.full((2, 2), 0.5))
