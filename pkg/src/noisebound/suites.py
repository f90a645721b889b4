"""Bundled example networks and reproducible random test corpora."""

from __future__ import annotations

import json
import math
from importlib import resources

import numpy as np

from noisebound.hypotheses import check_sufficient_conditions
from noisebound.network import Network
from noisebound.signed_graph import check_structural_balance, extract_signed_graph

CERTIFIED_SUITE_SEED = 20240611
BALANCED_SUITE_SEED = 20240612
SUITE_STATE_BUDGET = {2: 4000, 3: 30000}

BUILTIN = {
    "poisson_product": {"tau": [1, 1], "rates": ["2", "3"]},
    "mutual_repression": {"tau": [1, 1], "rates": ["1+5/(1+x2)", "1+5/(1+x1)"]},
    "asymmetric_repression": {"tau": [1, 1], "rates": ["1+5/(1+x2)", "3"]},
    "balanced_triad": {
        "tau": [1, 1, 1],
        "rates": [
            "1 + 4*hill_rep(x3,2,2)",
            "1 + 4*hill_rep(x1,2,2) + 2*hill_act(x3,2,2)",
            "1 + 3*hill_act(x2,2,2)",
        ],
    },
    "repressilator": {
        "tau": [1, 1, 1],
        "rates": ["1 + 8*hill_rep(x3, 4, 2)", "1 + 8*hill_rep(x1, 4, 2)", "1 + 8*hill_rep(x2, 4, 2)"],
    },
    "linear_activation": {"tau": [2, 2], "rates": ["0.5+0.2*x2", "0.5+0.2*x1"]},
    "linear_activation_slow": {"tau": [3, 3], "rates": ["0.5+0.2*x2", "0.5+0.2*x1"]},
}

# boxes used by the bundled reports; large enough that boundary mass is negligible
BUILTIN_BOX = {
    "poisson_product": (30, 30),
    "mutual_repression": (60, 60),
    "asymmetric_repression": (60, 60),
    "balanced_triad": (30, 30, 30),
    "repressilator": (40, 40, 40),
    "linear_activation": (60, 60),
}


def builtin_names():
    return sorted(BUILTIN)


def builtin_network(name: str) -> Network:
    if name not in BUILTIN:
        raise KeyError(f"unknown builtin network {name!r}; choose from {builtin_names()}")
    spec = BUILTIN[name]
    return Network.from_strings(spec["rates"], spec["tau"], name)


def data_path(filename: str):
    return resources.files("noisebound").joinpath("data", "networks", filename)


def _num(v):
    return f"{v:.3g}"


def _term(rng, j, sign, bounded_only):
    """A monotone term in ``x_j`` with the requested sign (+1 / -1)."""
    a = _num(rng.uniform(0.5, 3.0))
    K = _num(rng.uniform(1.0, 5.0))
    h = str(int(rng.integers(1, 4)))
    if sign > 0:
        kind = rng.integers(0, 2 if bounded_only else 3)
        if kind == 0:
            return f"{a}*hill_act(x{j},{K},{h})"
        if kind == 1:
            return f"min({a}, {_num(rng.uniform(0.2, 1.0))}*x{j})"
        return f"{_num(rng.uniform(0.02, 0.12))}*x{j}"
    if rng.integers(0, 2) == 0:
        return f"{a}*hill_rep(x{j},{K},{h})"
    return f"{a}/(1+{_num(rng.uniform(0.2, 1.0))}*x{j})"


def _random_network(rng, N, signs_for, name, bounded_only):
    tau = [float(_num(rng.uniform(0.5, 2.0))) for _ in range(N)]
    rates = []
    for i in range(1, N + 1):
        parts = [_num(rng.uniform(0.3, 2.0))]
        for j in range(1, N + 1):
            s = signs_for(j, i)
            if j != i and s:
                parts.append(_term(rng, j, s, bounded_only))
        rates.append(" + ".join(parts))
    return Network.from_strings(rates, tau, name)


def _suite_box(net):
    """Poisson-dominance caps when every rate is bounded, else the pilot-SSA rule."""
    rep = check_sufficient_conditions(net)
    caps = []
    for b, t in zip(rep.bounds, net.tau):
        if b.get("upper_slope", 1.0) == 0.0:
            caps.append(poisson_quantile(t * b["upper_const"], 1e-13))
        else:
            caps.append(None)
    if any(c is None for c in caps):
        from noisebound.simulation import default_box

        pilot = default_box(net)
        caps = [p if c is None else c for c, p in zip(caps, pilot)]
    return tuple(int(c) for c in caps)


def poisson_quantile(mean: float, tail: float) -> int:
    """Smallest ``m`` with ``P(Poisson(mean) > m) <= tail``, at least 10."""
    from scipy.stats import poisson

    return max(10, int(poisson.isf(tail, mean)) + 1)


def _admit(net, box):
    return math.prod(m + 1 for m in box) <= SUITE_STATE_BUDGET[net.n_components]


def random_certified_suite(n: int = 50, seed: int = CERTIFIED_SUITE_SEED):
    """``n`` CERTIFIED networks with two or three components and their boxes."""
    rng = np.random.default_rng(seed)
    out = []
    attempts = 0
    while len(out) < n:
        attempts += 1
        N = int(rng.choice([2, 3]))
        signs = {(j, i): int(rng.choice([-1, 0, 1])) for j in range(1, N + 1) for i in range(1, N + 1)}
        net = _random_network(rng, N, lambda j, i: signs[(j, i)], f"certified_{len(out):02d}", bounded_only=N == 3)
        if not check_sufficient_conditions(net).certified:
            continue
        box = _suite_box(net)
        if _admit(net, box):
            out.append((net, box))
    return out


def random_balanced_suite(n: int = 20, seed: int = BALANCED_SUITE_SEED):
    """Structurally balanced networks: mutual repression, the balanced triad, then random ones.

    Random members draw a signature and give every edge the sign
    ``sigma_j * sigma_i`` so the graph is balanced by construction.
    """
    out = [
        (builtin_network("mutual_repression"), (40, 40)),
        (builtin_network("balanced_triad"), _suite_box(builtin_network("balanced_triad"))),
    ]
    rng = np.random.default_rng(seed)
    while len(out) < n:
        N = int(rng.choice([2, 3]))
        sigma = [1] + [int(rng.choice([-1, 1])) for _ in range(N - 1)]
        present = {(j, i): bool(rng.random() < 0.7) for j in range(1, N + 1) for i in range(1, N + 1)}
        if not any(present[(j, i)] for j in range(1, N + 1) for i in range(1, N + 1) if j != i):
            continue

        def signs_for(j, i):
            return sigma[j - 1] * sigma[i - 1] if present[(j, i)] else 0

        net = _random_network(rng, N, signs_for, f"balanced_{len(out):02d}", bounded_only=True)
        g = extract_signed_graph(net)
        if g.nonmonotone_edges or not check_structural_balance(g).balanced:
            continue
        if not check_sufficient_conditions(net).certified:
            continue
        box = _suite_box(net)
        if _admit(net, box):
            out.append((net, box))
    return out


def suite_manifest(entries) -> dict:
    return {
        "networks": [
            {**net.to_dict(), "name": net.name, "box": list(box)} for net, box in entries
        ]
    }


def write_manifest(entries, path):
    with open(path, "w") as fh:
        json.dump(suite_manifest(entries), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_manifest(path):
    """``[(Network, box | None), ...]`` from a manifest with a ``networks`` list."""
    with open(path) as fh:
        spec = json.load(fh)
    if not isinstance(spec, dict) or "networks" not in spec:
        raise ValueError("manifest must be an object with a 'networks' list")
    out = []
    for k, item in enumerate(spec["networks"]):
        net = Network.from_dict({**item, "name": item.get("name", f"network_{k:02d}")})
        box = tuple(item["box"]) if item.get("box") else None
        out.append((net, box))
    return out
