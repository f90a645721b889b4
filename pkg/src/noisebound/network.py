"""The unit-birth network: components, timescales, rates and transitions."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from noisebound.rate_expr import RateExpr, eval_rate, eval_rate_array, parse_rate_expr, raw_eval_array


@dataclass(frozen=True, order=True)
class State:
    """A lattice point of molecule counts; ordered lexicographically."""

    coords: tuple

    def __post_init__(self):
        coords = tuple(int(c) for c in self.coords)
        if any(c < 0 for c in coords):
            raise ValueError(f"state coordinates must be nonnegative, got {coords}")
        object.__setattr__(self, "coords", coords)

    def __len__(self):
        return len(self.coords)

    def __getitem__(self, k):
        return self.coords[k]

    def __iter__(self):
        return iter(self.coords)

    @property
    def s(self):
        return sum(self.coords)

    def moved(self, i, delta):
        """Copy with 1-based coordinate ``i`` shifted by ``delta``."""
        c = list(self.coords)
        c[i - 1] += delta
        return State(tuple(c))


@dataclass(frozen=True)
class Transition:
    kind: str  # "birth" or "death"
    component: int  # 1-based
    target: State
    rate: float


@dataclass(frozen=True)
class Network:
    tau: tuple
    rates: tuple  # RateExpr per component
    name: str = ""
    _sources: tuple = field(default=(), compare=False, repr=False)

    @property
    def n_components(self):
        return len(self.rates)

    @property
    def tau_array(self):
        return np.asarray(self.tau, dtype=float)

    @classmethod
    def from_strings(cls, rates, tau, name=""):
        n = len(rates)
        if n < 2:
            raise ValueError("a network needs at least two components")
        if len(tau) != n:
            raise ValueError(f"expected {n} timescales, got {len(tau)}")
        exprs = tuple(parse_rate_expr(src, i + 1, n) for i, src in enumerate(rates))
        return cls(tuple(float(t) for t in tau), exprs, name, tuple(rates))

    @classmethod
    def from_dict(cls, spec):
        if not isinstance(spec, dict):
            raise ValueError("network spec must be a JSON object")
        n = spec.get("n", len(spec.get("rates", [])))
        rates = spec.get("rates")
        tau = spec.get("tau")
        if rates is None or tau is None:
            raise ValueError("network spec needs 'rates' and 'tau'")
        if len(rates) != n:
            raise ValueError(f"'n' is {n} but {len(rates)} rates were given")
        return cls.from_strings(rates, tau, spec.get("name", ""))

    def to_dict(self):
        d = {"n": self.n_components, "tau": list(self.tau), "rates": self.rate_sources()}
        if self.name:
            d["name"] = self.name
        return d

    def rate_sources(self):
        return list(self._sources) if self._sources else [str(r) for r in self.rates]

    def permuted(self, perm):
        """Relabel components: new component ``k`` is old component ``perm[k]`` (0-based)."""
        from noisebound.rate_expr import BinOp, Call, Var, format_expr

        inverse = {old + 1: new + 1 for new, old in enumerate(perm)}

        def relabel(node):
            if isinstance(node, Var):
                return Var(inverse[node.index])
            if isinstance(node, BinOp):
                return BinOp(node.op, relabel(node.left), relabel(node.right))
            if isinstance(node, Call):
                return Call(node.name, tuple(relabel(a) for a in node.args))
            return node

        rates = [format_expr(relabel(self.rates[old].root)) for old in perm]
        tau = [self.tau[old] for old in perm]
        return Network.from_strings(rates, tau, self.name)


def load_network(path) -> Network:
    with open(path) as fh:
        spec = json.load(fh)
    net = Network.from_dict(spec)
    if not net.name:
        net = Network(net.tau, net.rates, Path(path).stem, net._sources)
    return net


def save_network(net: Network, path):
    Path(path).write_text(json.dumps(net.to_dict(), indent=2) + "\n")


def birth_rates(net: Network, states) -> np.ndarray:
    """``(n, N)`` array of f_i(x_{-i}) at each row of ``states``."""
    states = np.asarray(states)
    return np.column_stack([eval_rate_array(r, states) for r in net.rates])


@dataclass(frozen=True)
class Finding:
    kind: str
    component: int
    detail: str
    state: tuple | None = None
    value: float | None = None

    def to_dict(self):
        return {k: v for k, v in self.__dict__.items() if v is not None}


def validate_network(net: Network, sample_box: int = 50, n_samples: int = 2000, seed: int = 0):
    """Structural admissibility findings; an empty list means admissible."""
    findings = []
    N = net.n_components
    for i, t in enumerate(net.tau, start=1):
        if not t > 0:
            findings.append(Finding("NONPOSITIVE_TAU", i, f"tau_{i} = {t} must be positive", value=t))
    for i, r in enumerate(net.rates, start=1):
        if r.own_index != i:
            findings.append(Finding("SELF_DEPENDENCE", i, "rate attached to the wrong component"))
        if i in r.variables():
            findings.append(Finding("SELF_DEPENDENCE", i, f"f_{i} depends on x{i}"))
    rng = np.random.default_rng(seed)
    pts = np.vstack(
        [
            np.zeros((1, N), dtype=np.int64),
            rng.integers(0, sample_box + 1, size=(n_samples, N)),
        ]
    )
    for i, r in enumerate(net.rates, start=1):
        vals = raw_eval_array(r, pts)
        bad = np.flatnonzero(~np.isfinite(vals))
        if bad.size:
            k = bad[0]
            findings.append(
                Finding("NONFINITE_RATE", i, f"f_{i} is not finite", tuple(int(v) for v in pts[k]))
            )
        neg = np.flatnonzero(np.isfinite(vals) & (vals < 0) & (np.abs(vals) >= 1e-300))
        if neg.size:
            k = neg[0]
            findings.append(
                Finding(
                    "NEGATIVE_RATE",
                    i,
                    f"f_{i} is negative",
                    tuple(int(v) for v in pts[k]),
                    float(vals[k]),
                )
            )
    return findings


def _as_state(x, N):
    s = x if isinstance(x, State) else State(tuple(x))
    if len(s) != N:
        raise ValueError(f"state must have {N} coordinates")
    return s


def enumerate_transitions(net: Network, x) -> list:
    """All N births (zero rates included) followed by the deaths with x_i >= 1."""
    N = net.n_components
    x = _as_state(x, N)
    out = [
        Transition("birth", i, x.moved(i, +1), eval_rate(r, x.coords))
        for i, r in enumerate(net.rates, start=1)
    ]
    for i in range(1, N + 1):
        if x[i - 1] >= 1:
            out.append(Transition("death", i, x.moved(i, -1), x[i - 1] / net.tau[i - 1]))
    return out


def total_rate(net: Network, x) -> float:
    """Total exit rate: sum of birth rates plus sum of x_i / tau_i."""
    x = _as_state(x, net.n_components)
    births = sum(eval_rate(r, x.coords) for r in net.rates)
    deaths = sum(xi / t for xi, t in zip(x.coords, net.tau))
    return births + deaths


__all__ = [
    "State",
    "Transition",
    "Network",
    "Finding",
    "load_network",
    "save_network",
    "birth_rates",
    "validate_network",
    "enumerate_transitions",
    "total_rate",
]
