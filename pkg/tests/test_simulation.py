import math

import numpy as np
import pytest

from noisebound.errors import JumpCapError, NegativeRateError, NotOrderedError
from noisebound.network import Network, enumerate_transitions
from noisebound.simulation import (
    couple_replicates,
    empirical_transition_rates,
    estimate_stationary_stats,
    replicate_rng,
    signed_leq,
    simulate,
    simulate_split_coupling,
)
from noisebound.suites import builtin_network

MUTUAL_FANO = 1.3831688657573011  # exact solve, see test_observables


def test_trajectory_shape(mutual):
    tr = simulate(mutual, (0, 0), t_end=50, seed=3)
    assert tr.times[0] == 0 and (np.diff(tr.times) > 0).all() and tr.times[-1] < 50
    steps = np.abs(np.diff(tr.states, axis=0)).sum(axis=1)
    assert (steps == 1).all()
    assert len(tr.times) == tr.n_jumps + 1


def test_poisson_mean():
    est = estimate_stationary_stats(builtin_network("poisson_product"), t_end=1e4, burn_in=0, seed=42)
    assert abs(est.mean[0] - 2) <= 3 * est.mean_se[0]
    assert abs(est.mean[1] - 3) <= 3 * est.mean_se[1]
    assert (np.abs(est.fano - 1) <= 3 * est.fano_se).all()
    assert (est.mean_se > 0).all() and (est.fano_se > 0).all()


def test_poisson_never_stuck():
    tr = simulate(builtin_network("poisson_product"), (0, 0), t_end=100, seed=1, record=False)
    # with total rate at least 5 the expected jump count is far above zero
    assert tr.n_jumps > 500


def test_same_seed_same_path(mutual):
    a = simulate(mutual, (1, 2), t_end=200, seed=9)
    b = simulate(mutual, (1, 2), t_end=200, seed=9)
    c = simulate(mutual, (1, 2), t_end=200, seed=10)
    assert np.array_equal(a.times, b.times) and np.array_equal(a.states, b.states)
    assert not np.array_equal(a.times[:10], c.times[:10])


def test_replicates_use_distinct_streams():
    a = replicate_rng(5, 0).random(4)
    b = replicate_rng(5, 1).random(4)
    assert not np.allclose(a, b)
    assert np.array_equal(a, replicate_rng(5, 0).random(4))


def test_mutual_repression_against_exact(mutual):
    est = estimate_stationary_stats(mutual, t_end=2e4, seed=7, n_replicates=2)
    for i in range(2):
        assert abs(est.fano[i] - MUTUAL_FANO) <= max(3 * est.fano_se[i], 0.05 * MUTUAL_FANO)
        assert abs(est.mean_identity_gap[i]) <= 3 * est.mean_identity_se[i]


def test_single_level_occupation():
    """Binary projection ``1{x_1 = 0}``, whose stationary weight is ``exp(-2)``."""
    net = builtin_network("poisson_product")
    K, width = 20, 500.0
    tr = simulate(net, (2, 3), t_end=K * width + 100, seed=11)
    hold = np.diff(np.append(tr.times, tr.t_end))
    empty = tr.states[:, 0] == 0
    fractions = []
    for k in range(K):
        lo, hi = 100 + k * width, 100 + (k + 1) * width
        left = np.clip(tr.times, lo, hi)
        right = np.clip(tr.times + hold, lo, hi)
        fractions.append(((right - left) * empty).sum() / width)
    fractions = np.array(fractions)
    se = fractions.std(ddof=1) / math.sqrt(K)
    assert abs(fractions.mean() - math.exp(-2)) <= 3 * se


def test_estimator_validation(mutual):
    with pytest.raises(ValueError):
        estimate_stationary_stats(mutual, t_end=10, burn_in=10)
    with pytest.raises(ValueError):
        estimate_stationary_stats(mutual, t_end=10, n_batches=1)
    with pytest.raises(ValueError):
        simulate(mutual, t_end=0)


def test_jump_cap(mutual):
    with pytest.raises(JumpCapError):
        simulate(mutual, t_end=100, jump_cap=50)


def test_negative_rate_at_runtime():
    net = Network.from_strings(["5 - x2", "3"], [1, 1])
    with pytest.raises(NegativeRateError):
        simulate(net, (0, 0), t_end=100, seed=0)


def test_trajectory_csv(tmp_path, poisson):
    tr = simulate(poisson, t_end=5, seed=0)
    tr.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "t,x_1,x_2" and lines[1] == "0.0,0,0"
    assert len(lines) == len(tr.times) + 1


class TestCoupling:
    def test_precondition_arithmetic(self):
        assert signed_leq((0, 5), (2, 1), (1, -1))
        assert not signed_leq((2, 1), (0, 5), (1, -1))

    def test_order_preserved(self, mutual):
        run = simulate_split_coupling(mutual, (1, -1), (0, 5), (2, 1), t_end=1000, seed=0)
        assert run.n_violations == 0 and run.order_violations == []
        assert run.max_channel_error <= 1e-12
        assert run.n_unmatched > 0

    def test_not_ordered(self, mutual):
        with pytest.raises(NotOrderedError):
            simulate_split_coupling(mutual, (1, -1), (2, 1), (0, 5), t_end=10)

    def test_bad_sigma(self, mutual):
        with pytest.raises(ValueError):
            simulate_split_coupling(mutual, (1, 0), (0, 0), (0, 0), t_end=10)

    def test_equal_starts_coincide(self, mutual):
        run = simulate_split_coupling(mutual, (1, -1), (3, 3), (3, 3), t_end=200, seed=4, record=True)
        assert np.array_equal(run.x_states, run.y_states)
        assert run.n_unmatched == 0 and run.n_jumps > 0

    def test_violations_recorded_for_wrong_signature(self):
        net = builtin_network("repressilator")
        summary = couple_replicates(net, (1, -1, -1), (0, 8, 8), (8, 0, 0), t_end=50, n_runs=20, seed=2)
        assert summary.n_violations > 0
        assert summary.first_violations[0]["time"] > 0

    def test_replicated_no_violations(self):
        net = builtin_network("balanced_triad")
        summary = couple_replicates(net, (1, -1, -1), (0, 6, 6), (6, 0, 0), t_end=50, n_runs=50, seed=1)
        assert summary.n_violations == 0 and summary.runs_with_violations == 0
        assert summary.max_channel_error <= 1e-12

    @pytest.mark.parametrize("leg", ["x", "y"])
    def test_marginal_rates(self, mutual, leg):
        run = simulate_split_coupling(mutual, (1, -1), (0, 6), (6, 0), t_end=6000, seed=13, record=True)
        states = run.x_states if leg == "x" else run.y_states
        table = empirical_transition_rates(run.times, states, run.t_end)
        checked = 0
        for state, (hold, counts) in table.items():
            if hold < 200:
                continue
            for tr in enumerate_transitions(mutual, state):
                expected = tr.rate * hold
                seen = counts.get((tr.kind, tr.component), 0)
                assert abs(seen - expected) <= 4 * math.sqrt(expected), (state, tr)
                checked += 1
        assert checked >= 20
