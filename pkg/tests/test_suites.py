import json
import math

import pytest

from noisebound import suites
from noisebound.hypotheses import check_sufficient_conditions
from noisebound.network import load_network
from noisebound.signed_graph import check_structural_balance, extract_signed_graph


@pytest.mark.parametrize("name", suites.builtin_names())
def test_bundled_network_files_match_builtins(name):
    net = load_network(suites.data_path(f"{name}.json"))
    ref = suites.builtin_network(name)
    assert net.to_dict() == ref.to_dict() and net.name == name


@pytest.mark.parametrize(
    "filename, generate",
    [("certified_suite.json", suites.random_certified_suite), ("balanced_suite.json", suites.random_balanced_suite)],
)
def test_bundled_manifests_regenerate(filename, generate):
    bundled = json.loads(suites.data_path(filename).read_text())
    assert suites.suite_manifest(generate()) == bundled


def test_certified_suite_shape():
    entries = suites.random_certified_suite()
    assert len(entries) == 50
    dims = [net.n_components for net, _ in entries]
    assert set(dims) == {2, 3}
    for net, box in entries:
        assert check_sufficient_conditions(net).certified
        assert math.prod(m + 1 for m in box) <= suites.SUITE_STATE_BUDGET[net.n_components]
    assert any(check_sufficient_conditions(n).B > 0 for n, _ in entries)


def test_balanced_suite_shape():
    entries = suites.random_balanced_suite()
    assert len(entries) == 20
    assert [n.name for n, _ in entries[:2]] == ["mutual_repression", "balanced_triad"]
    for net, _ in entries:
        g = extract_signed_graph(net)
        assert not g.nonmonotone_edges and check_structural_balance(g).balanced


def test_manifest_round_trip(tmp_path):
    entries = suites.random_balanced_suite(4)
    suites.write_manifest(entries, tmp_path / "m.json")
    again = suites.load_manifest(tmp_path / "m.json")
    assert [(n.to_dict(), b) for n, b in again] == [(n.to_dict(), tuple(b)) for n, b in entries]


def test_manifest_rejects_plain_network(tmp_path):
    (tmp_path / "x.json").write_text(json.dumps({"n": 2, "tau": [1, 1], "rates": ["1", "2"]}))
    with pytest.raises(ValueError):
        suites.load_manifest(tmp_path / "x.json")


def test_poisson_quantile():
    from scipy.stats import poisson

    m = suites.poisson_quantile(6.0, 1e-13)
    assert poisson.sf(m, 6.0) <= 1e-13 < poisson.sf(m - 2, 6.0)
    assert suites.poisson_quantile(0.1, 1e-13) >= 10


def test_unknown_builtin():
    with pytest.raises(KeyError):
        suites.builtin_network("toggle")
