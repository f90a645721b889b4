import csv
import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings

from noisebound.errors import DegenerateError, ZeroProbabilityError
from noisebound.exact import build_truncated_chain, solve_stationary
from noisebound.network import Network
from noisebound.observables import (
    association_check,
    component_stats,
    fiber_currents,
    flux_balance_residuals,
    information_flow,
    tradeoff_report,
    write_figure_csv,
)
from noisebound.suites import builtin_network
from conftest import solved, solved_net
from oracles import dense_stationary, fano, info_flow, moments
from strategies import small_networks

# GTH elimination on the dense (30, 30) generator, see oracles.dense_stationary
MUTUAL_30 = {"fano": 1.3831688657573011, "mean": 2.7996982620196977, "var": 3.8724554695404727}
ASYM_30 = {"fano": (1.1518787609787273, 1.000000000000014), "flow": 0.0677856898073723, "mean": 2.5836882193868873}


def test_frozen_oracle_values_reproduce():
    ref = dense_stationary(builtin_network("mutual_repression"), (30, 30))
    assert fano(ref, 1) == pytest.approx(MUTUAL_30["fano"], rel=1e-12)
    assert moments(ref, 1) == pytest.approx((MUTUAL_30["mean"], MUTUAL_30["var"]), rel=1e-12)


class TestPoisson:
    def test_component_stats(self):
        chain, dist = solved("poisson_product", (30, 30))
        s = component_stats(dist, chain, 1)
        assert abs(s.mean - 2) <= 1e-9 and abs(s.fano - 1) <= 1e-9
        assert abs(s.cov) <= 1e-9
        assert s.mean_identity_residual <= 1e-9 and s.fano_cov_residual <= 1e-9
        assert (s.m_of_n >= 0).all()

    def test_flux_and_currents(self):
        chain, dist = solved("poisson_product", (30, 30))
        for i in (1, 2):
            assert flux_balance_residuals(dist, chain, i).max() <= 1e-12
            assert np.abs(fiber_currents(dist, chain, i)).max() <= 1e-12

    def test_information_flow(self):
        chain, dist = solved("poisson_product", (30, 30))
        for i in (1, 2):
            flow = information_flow(dist, chain, i)
            assert abs(flow.value) <= 1e-10 and abs(flow.generator_form) <= 1e-10

    def test_report(self):
        chain, dist = solved("poisson_product", (30, 30))
        rep = tradeoff_report(dist, chain)
        assert abs(rep.weighted_sum) <= 1e-9 and abs(rep.total_info_flow) <= 1e-10
        assert rep.verdict == "PASS" and rep.failed == []

    def test_association_independent(self):
        chain, dist = solved("poisson_product", (30, 30))
        grid = [[a, b] for a in range(4) for b in range(4)]
        res = association_check(dist, chain, (1, 1), grid)
        assert abs(res.min_cov) <= 1e-12
        assert res.n_functions == 16


class TestMutualRepression:
    def test_against_oracle(self):
        chain, dist = solved("mutual_repression", (30, 30))
        a, b = component_stats(dist, chain, 1), component_stats(dist, chain, 2)
        assert a.fano == pytest.approx(MUTUAL_30["fano"], abs=1e-11)
        assert b.fano == pytest.approx(MUTUAL_30["fano"], abs=1e-11)
        assert a.mean == pytest.approx(MUTUAL_30["mean"], abs=1e-11)
        assert a.variance == pytest.approx(MUTUAL_30["var"], abs=1e-11)

    def test_box_60(self):
        chain, dist = solved("mutual_repression", (60, 60))
        a, b = component_stats(dist, chain, 1), component_stats(dist, chain, 2)
        assert abs(a.fano - b.fano) <= 1e-9 and min(a.fano, b.fano) >= 1 - 1e-9
        # the 30 box already holds all but ~1e-15 of the mass
        assert a.fano == pytest.approx(MUTUAL_30["fano"], abs=1e-9)
        assert max(a.info_flow, b.info_flow, key=abs) == pytest.approx(0, abs=1e-9)
        assert flux_balance_residuals(dist, chain, 1).max() <= 1e-10

    def test_currents_nonzero_but_balanced(self):
        chain, dist = solved("mutual_repression", (60, 60))
        J = fiber_currents(dist, chain, 1)
        assert np.abs(J).max() > 1e-6
        assert np.abs(J.sum(axis=1)).max() <= 1e-10
        assert np.allclose(np.abs(J.sum(axis=1)), flux_balance_residuals(dist, chain, 1), rtol=0, atol=1e-15)

    def test_report_passes(self):
        chain, dist = solved("mutual_repression", (60, 60))
        rep = tradeoff_report(dist, chain)
        assert rep.verdict == "PASS"
        assert min(rep.slacks) >= -1e-8 and rep.weighted_sum >= -1e-8

    def test_association(self):
        chain, dist = solved("mutual_repression", (60, 60))
        assert association_check(dist, chain, (1, -1)).min_cov >= -1e-10


class TestAsymmetric:
    def test_against_oracle(self):
        chain, dist = solved("asymmetric_repression", (30, 30))
        a, b = component_stats(dist, chain, 1), component_stats(dist, chain, 2)
        assert (a.fano, b.fano) == pytest.approx(ASYM_30["fano"], abs=1e-11)
        assert a.mean == pytest.approx(ASYM_30["mean"], abs=1e-11)
        assert a.info_flow == pytest.approx(ASYM_30["flow"], abs=1e-11)
        assert b.info_flow == pytest.approx(-ASYM_30["flow"], abs=1e-11)

    def test_box_60_sign_and_cancellation(self):
        chain, dist = solved("asymmetric_repression", (60, 60))
        a, b = information_flow(dist, chain, 1), information_flow(dist, chain, 2)
        assert a.value > 0
        assert abs(a.value + b.value) <= 1e-10
        assert a.value == pytest.approx(ASYM_30["flow"], abs=1e-9)

    def test_flow_matches_loop_oracle(self):
        net = builtin_network("asymmetric_repression")
        caps = (14, 12)
        ref = dense_stationary(net, caps)
        chain, dist = solved("asymmetric_repression", caps)
        for i in (1, 2):
            assert information_flow(dist, chain, i).value == pytest.approx(info_flow(ref, net, caps, i), abs=1e-12)


def test_repressilator_report():
    chain, dist = solved("repressilator", (40, 40, 40))
    rep = tradeoff_report(dist, chain)
    assert abs(rep.total_info_flow) <= 1e-8
    assert rep.weighted_sum >= -1e-8
    assert rep.verdict == "PASS"
    # an invalid signature is only reported
    res = association_check(dist, chain, (1, -1, -1))
    assert np.isfinite(res.min_cov)


def test_boundary_level_current_uses_death_only():
    chain, dist = solved("mutual_repression", (12, 12))
    J = fiber_currents(dist, chain, 1)
    assert J.shape == (12, 13)
    grid = chain.as_grid(dist.pi)
    top = 12 * grid[12, :]
    assert np.allclose(J[11], grid[11, :] * chain.as_grid(chain.eff_rates[:, 0])[11, :] - top, atol=1e-16)


def test_kl_table_nonnegative():
    chain, dist = solved("asymmetric_repression", (30, 30))
    s = component_stats(dist, chain, 2)
    assert s.kl.shape == (30,)
    assert s.kl.min() >= -1e-12
    assert s.kl.max() > 0


@pytest.mark.parametrize("perm", [(1, 0, 2), (2, 0, 1)])
def test_permutation_equivariance(perm):
    net = builtin_network("balanced_triad")
    caps = (14, 15, 16)
    chain = build_truncated_chain(net, caps)
    base = tradeoff_report(solve_stationary(chain), chain)
    p = net.permuted(list(perm))
    pchain = build_truncated_chain(p, tuple(caps[k] for k in perm))
    moved = tradeoff_report(solve_stationary(pchain), pchain)
    for new, old in enumerate(perm):
        a, b = moved.components[new], base.components[old]
        assert a.fano == pytest.approx(b.fano, abs=1e-10)
        assert a.info_flow == pytest.approx(b.info_flow, abs=1e-10)
        assert a.mean == pytest.approx(b.mean, abs=1e-10)


@given(small_networks())
@settings(max_examples=20, deadline=None)
def test_identity_and_inequality_suites(net):
    chain = build_truncated_chain(net, (15,) * net.n_components)
    rep = tradeoff_report(solve_stationary(chain), chain)
    for name in ("mean_identity", "fano_cov_identity", "flux_balance", "total_info_flow", "info_flow_forms", "conditional_kl"):
        assert rep.checks[name]["pass"], (name, rep.checks[name])
    # truncation can push a slack slightly below zero; the tolerance tracks boundary mass
    assert rep.tol_ineq == max(1e-8, 10 * rep.boundary_mass)
    assert min(rep.slacks) >= -rep.tol_ineq
    assert rep.weighted_sum >= -rep.tol_ineq


def test_degenerate_zero_birth():
    net = Network.from_strings(["2", "3"], [1, 1])
    chain = build_truncated_chain(net, (0, 6))
    dist = solve_stationary(chain)
    with pytest.raises(DegenerateError):
        component_stats(dist, chain, 1)


def test_zero_probability():
    chain, dist = solved_net(("2", "3"), (1, 1), (4, 4))
    pi = dist.pi.copy()
    pi[5] = 0.0
    with pytest.raises(ZeroProbabilityError):
        information_flow(dataclasses.replace(dist, pi=pi / pi.sum()), chain, 1)


def test_report_serializes_and_figure_csv(tmp_path):
    import json

    reports = []
    for name, caps in [("poisson_product", (30, 30)), ("mutual_repression", (30, 30)), ("balanced_triad", (12, 12, 12))]:
        chain, dist = solved(name, caps)
        reports.append(tradeoff_report(dist, chain))
    json.dumps(reports[1].to_dict())
    write_figure_csv(reports, tmp_path / "figure.csv")
    rows = list(csv.reader(open(tmp_path / "figure.csv")))
    assert rows[0] == ["name", "F1", "F2", "F3", "weighted_sum", "verdict"]
    assert rows[1][0] == "poisson_product" and float(rows[1][1]) == pytest.approx(1, abs=1e-9)
    assert rows[1][3] == ""
    assert rows[2][-1] == "PASS"
