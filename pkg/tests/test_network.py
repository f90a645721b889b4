import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisebound.network import Network, State, enumerate_transitions, load_network, save_network, total_rate, validate_network
from strategies import small_networks


def test_state_is_value_type():
    assert State((1, 2)) == State([1, 2])
    assert sorted([State((1, 0)), State((0, 5))])[0] == State((0, 5))
    assert State((3, 4)).s == 7
    with pytest.raises(ValueError):
        State((0, -1))


def test_network_needs_two_components():
    with pytest.raises(ValueError):
        Network.from_strings(["2"], [1])


class TestValidate:
    def test_admissible(self, poisson):
        assert validate_network(poisson) == []

    def test_nonpositive_tau(self):
        net = Network.from_strings(["2", "3"], [0, 1])
        kinds = [(f.kind, f.component) for f in validate_network(net)]
        assert kinds == [("NONPOSITIVE_TAU", 1)]

    def test_negative_rate_at_origin(self):
        net = Network.from_strings(["x2 - 10", "3"], [1, 1])
        f = [f for f in validate_network(net) if f.kind == "NEGATIVE_RATE"]
        assert len(f) == 1
        assert f[0].state == (0, 0) and f[0].value == -10

    def test_nonfinite_rate(self):
        net = Network.from_strings(["1/x2", "3"], [1, 1])
        assert [f.kind for f in validate_network(net)] == ["NONFINITE_RATE"]


class TestTransitions:
    def test_origin(self, poisson):
        tr = enumerate_transitions(poisson, (0, 0))
        assert [(t.kind, t.component, t.rate) for t in tr] == [("birth", 1, 2.0), ("birth", 2, 3.0)]

    def test_interior(self, poisson):
        tr = enumerate_transitions(poisson, (1, 2))
        assert [(t.kind, t.component, t.rate) for t in tr] == [
            ("birth", 1, 2.0),
            ("birth", 2, 3.0),
            ("death", 1, 1.0),
            ("death", 2, 2.0),
        ]
        assert tr[0].target == State((2, 2)) and tr[3].target == State((1, 1))

    def test_mutual_repression(self, mutual):
        tr = enumerate_transitions(mutual, (4, 0))
        assert [(t.kind, t.component, t.rate) for t in tr] == [("birth", 1, 6.0), ("birth", 2, 2.0), ("death", 1, 4.0)]

    def test_zero_rate_births_are_listed(self):
        net = Network.from_strings(["hill_act(x2, 1, 1)", "1"], [1, 1])
        tr = enumerate_transitions(net, (0, 0))
        assert tr[0].kind == "birth" and tr[0].rate == 0.0

    def test_total_rate_examples(self, poisson):
        assert total_rate(poisson, (0, 0)) == 5.0
        assert total_rate(poisson, (1, 2)) == 8.0
        net = Network.from_strings(["0.5+0.2*x2", "0.5"], [2, 2])
        assert total_rate(net, (3, 10)) == pytest.approx(9.5, abs=1e-12)

    @given(small_networks(), st.integers(0, 2**31))
    @settings(max_examples=40, deadline=None)
    def test_total_rate_is_sum_of_transitions(self, net, seed):
        rng = np.random.default_rng(seed)
        for x in rng.integers(0, 50, size=(25, net.n_components)):
            tr = enumerate_transitions(net, x)
            total = total_rate(net, x)
            assert abs(sum(t.rate for t in tr) - total) <= 1e-12 * total
            assert len([t for t in tr if t.kind == "birth"]) == net.n_components
            for t in tr:
                delta = np.array(t.target.coords) - x
                assert np.abs(delta).sum() == 1
                k = t.component - 1
                if t.kind == "death":
                    assert delta[k] == -1 and t.rate == x[k] / net.tau[k]
                else:
                    assert delta[k] == 1


def test_json_round_trip(tmp_path, mutual):
    path = tmp_path / "net.json"
    save_network(mutual, path)
    spec = json.loads(path.read_text())
    assert spec == {"n": 2, "tau": [1.0, 1.0], "rates": ["1+5/(1+x2)", "1+5/(1+x1)"], "name": "mutual_repression"}
    again = load_network(path)
    assert again.rates == mutual.rates and again.tau == mutual.tau


def test_name_defaults_to_file_stem(tmp_path):
    path = tmp_path / "toggle.json"
    path.write_text(json.dumps({"n": 2, "tau": [1, 1], "rates": ["2", "3"]}))
    assert load_network(path).name == "toggle"


def test_spec_count_mismatch(tmp_path):
    with pytest.raises(ValueError):
        Network.from_dict({"n": 3, "tau": [1, 1], "rates": ["2", "3"]})


def test_permuted_relabels_variables(mutual):
    net = Network.from_strings(["1+5/(1+x2)", "3 + hill_act(x1, 2, 2)", "1 + x1/(1+x2)"], [1, 2, 3])
    p = net.permuted([2, 0, 1])
    x = (4, 7, 1)  # new coordinates: (old x3, old x1, old x2)
    old = (7, 1, 4)
    for new_i, old_i in enumerate([2, 0, 1]):
        from noisebound.rate_expr import eval_rate

        assert eval_rate(p.rates[new_i], x) == eval_rate(net.rates[old_i], old)
    assert p.tau == (3.0, 1.0, 2.0)
