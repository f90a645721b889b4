import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisebound.errors import NonmonotoneError
from noisebound.network import Network
from noisebound.signed_graph import (
    BalanceResult,
    SignedGraph,
    check_structural_balance,
    extract_signed_graph,
    verify_signed_monotonicity,
    witness_is_valid,
)
from noisebound.suites import builtin_network


def brute_force_signatures(g):
    """Every sigma with sigma_j * sigma_i equal to each edge sign."""
    return [
        s
        for s in itertools.product((1, -1), repeat=g.n)
        if all(s[j - 1] * s[i - 1] == sign for (j, i), sign in g.edges.items())
    ]


@st.composite
def signed_graphs(draw):
    n = draw(st.integers(1, 7))
    pairs = [(j, i) for j in range(1, n + 1) for i in range(1, n + 1) if j != i]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs))) if pairs else []
    return SignedGraph(n, {p: draw(st.sampled_from((1, -1))) for p in chosen})


def test_balanced_triad_edges():
    g = extract_signed_graph(builtin_network("balanced_triad"))
    assert g.edges == {(1, 2): -1, (3, 2): 1, (2, 3): 1, (3, 1): -1}
    assert g.nonmonotone_edges == []


def test_repressilator_edges():
    g = extract_signed_graph(builtin_network("repressilator"))
    assert g.edges == {(3, 1): -1, (1, 2): -1, (2, 3): -1}


def test_constant_rates_no_edges():
    assert extract_signed_graph(Network.from_strings(["1", "2", "3"], [1, 1, 1])).edges == {}


def test_balanced_triad_balanced():
    res = check_structural_balance(extract_signed_graph(builtin_network("balanced_triad")))
    assert res.balanced and res.sigma == (1, -1, -1)


def test_repressilator_frustrated():
    g = extract_signed_graph(builtin_network("repressilator"))
    res = check_structural_balance(g)
    assert not res.balanced
    assert res.witness == [1, 2, 3]
    assert res.negative_edges_in_witness == 3
    assert witness_is_valid(g, res)


def test_empty_graph_canonical():
    assert check_structural_balance(SignedGraph(3)).sigma == (1, 1, 1)


def test_disconnected_parts_canonicalized():
    g = SignedGraph(4, {(1, 2): -1, (4, 3): -1})
    assert check_structural_balance(g).sigma == (1, -1, 1, -1)


def test_nonmonotone_blocks():
    net = Network.from_strings(["1 + hill_act(x2,2,2) * hill_rep(x2,5,2)", "1"], [1, 1])
    g = extract_signed_graph(net)
    assert g.nonmonotone_edges == [(2, 1)]
    with pytest.raises(NonmonotoneError):
        check_structural_balance(g)


def test_two_cycle_witness():
    g = SignedGraph(2, {(1, 2): 1, (2, 1): -1})
    res = check_structural_balance(g)
    assert not res.balanced and len(res.witness) == 2
    assert witness_is_valid(g, res)


def test_tampered_witness_rejected():
    g = extract_signed_graph(builtin_network("repressilator"))
    res = check_structural_balance(g)
    flipped = [(a, b, -s) for a, b, s in res.witness_edges]
    assert not witness_is_valid(g, BalanceResult(False, witness=res.witness, witness_edges=flipped))
    assert not witness_is_valid(g, BalanceResult(False, witness=res.witness[:2], witness_edges=res.witness_edges))


@given(signed_graphs())
@settings(max_examples=300, deadline=None)
def test_agrees_with_brute_force(g):
    res = check_structural_balance(g)
    valid = brute_force_signatures(g)
    assert res.balanced == bool(valid)
    if res.balanced:
        assert res.sigma in valid
        assert tuple(-s for s in res.sigma) in valid
        # first vertex of every connected part is +1, so sigma[0] is always +1
        assert res.sigma[0] == 1
        assert all(res.sigma[j - 1] * res.sigma[i - 1] == s for (j, i), s in g.edges.items())
    else:
        assert witness_is_valid(g, res)
        assert len(set(res.witness)) == len(res.witness)


def test_monotonicity_sampling():
    triad = builtin_network("balanced_triad")
    assert verify_signed_monotonicity(triad, (1, -1, -1), n_samples=10_000) <= 0
    assert verify_signed_monotonicity(triad, (-1, 1, 1), n_samples=10_000) <= 0
    assert verify_signed_monotonicity(builtin_network("repressilator"), (1, -1, -1)) > 0
    const = Network.from_strings(["1", "2", "3"], [1, 1, 1])
    assert verify_signed_monotonicity(const, (1, -1, 1)) == 0.0


def test_exports():
    g = extract_signed_graph(builtin_network("balanced_triad"))
    dot = g.to_dot("balanced_triad")
    assert dot.startswith("digraph balanced_triad {")
    assert 'x1 -> x2 [sign="-", color=red];' in dot
    assert 'x3 -> x2 [sign="+", color=blue];' in dot
    d = check_structural_balance(g).to_dict()
    assert d == {"balanced": True, "sigma": [1, -1, -1]}
    r = check_structural_balance(extract_signed_graph(builtin_network("repressilator"))).to_dict()
    assert r["negative_edges"] == 3 and r["witness"] == [1, 2, 3]
