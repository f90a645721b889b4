"""Signed interaction graph, structural balance and signed monotonicity."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from noisebound.errors import NonmonotoneError
from noisebound.network import Network
from noisebound.rate_expr import DEC, INC, NONE, analyze_monotonicity, eval_rate_array


@dataclass
class SignedGraph:
    n: int
    edges: dict = field(default_factory=dict)  # (j, i) -> +1 | -1, 1-based, meaning j -> i
    nonmonotone_edges: list = field(default_factory=list)

    def sign(self, j, i):
        return self.edges.get((j, i))

    def to_dict(self):
        return {
            "n": self.n,
            "edges": [{"from": j, "to": i, "sign": "+" if s > 0 else "-"} for (j, i), s in sorted(self.edges.items())],
            "nonmonotone_edges": [{"from": j, "to": i} for j, i in self.nonmonotone_edges],
        }

    def to_dot(self, name="signed"):
        lines = [f"digraph {name} {{"]
        lines += [f"  x{k};" for k in range(1, self.n + 1)]
        for (j, i), s in sorted(self.edges.items()):
            sign, color = ("+", "blue") if s > 0 else ("-", "red")
            lines.append(f'  x{j} -> x{i} [sign="{sign}", color={color}];')
        for j, i in self.nonmonotone_edges:
            lines.append(f'  x{j} -> x{i} [sign="?", style=dashed];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def extract_signed_graph(net: Network) -> SignedGraph:
    """Edge ``j -> i`` whenever ``f_i`` depends on ``x_j``, signed by the sign calculus."""
    g = SignedGraph(net.n_components)
    for i, r in enumerate(net.rates, start=1):
        sig = analyze_monotonicity(r)
        for j in range(1, net.n_components + 1):
            s = sig[j]
            if j == i or s == NONE:
                continue
            if s == INC:
                g.edges[(j, i)] = 1
            elif s == DEC:
                g.edges[(j, i)] = -1
            else:
                g.nonmonotone_edges.append((j, i))
    return g


@dataclass
class BalanceResult:
    balanced: bool
    sigma: tuple | None = None
    witness: list | None = None  # cycle vertices, 1-based
    witness_edges: list | None = None  # (from, to, sign) along the cycle

    @property
    def negative_edges_in_witness(self):
        return sum(1 for _, _, s in self.witness_edges or [] if s < 0)

    def to_dict(self):
        d = {"balanced": self.balanced}
        if self.balanced:
            d["sigma"] = list(self.sigma)
        else:
            d["witness"] = list(self.witness)
            d["witness_edges"] = [{"from": a, "to": b, "sign": "+" if s > 0 else "-"} for a, b, s in self.witness_edges]
            d["negative_edges"] = self.negative_edges_in_witness
        return d


class _ParityUnionFind:
    """Union-find where each node stores its class parity relative to its parent."""

    def __init__(self, n):
        self.parent = list(range(n))
        self.parity = [0] * n
        self.rank = [0] * n

    def find(self, v):
        path = []
        while self.parent[v] != v:
            path.append(v)
            v = self.parent[v]
        root, acc = v, 0
        for u in reversed(path):
            acc ^= self.parity[u]
            self.parity[u] = acc
            self.parent[u] = root
        return root

    def parity_of(self, v):
        self.find(v)
        return self.parity[v] if self.parent[v] != v else 0

    def union(self, a, b, p):
        """Impose parity(a) xor parity(b) == p; False on conflict."""
        ra, rb = self.find(a), self.find(b)
        pa, pb = self.parity_of(a), self.parity_of(b)
        if ra == rb:
            return (pa ^ pb) == p
        if self.rank[ra] < self.rank[rb]:
            ra, rb, pa, pb = rb, ra, pb, pa
        self.parent[rb] = ra
        self.parity[rb] = pa ^ pb ^ p
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        return True


def _tree_path(adj, src, dst):
    """Edge list along the spanning-forest path from src to dst."""
    prev = {src: None}
    q = deque([src])
    while q:
        v = q.popleft()
        if v == dst:
            break
        for u, e in adj[v]:
            if u not in prev:
                prev[u] = (v, e)
                q.append(u)
    path = []
    v = dst
    while prev[v] is not None:
        p, e = prev[v]
        path.append((p, v, e))
        v = p
    return path[::-1]


def _canonical_cycle(verts, edges):
    """Rotate to start at the smallest vertex; orient towards its smaller neighbour."""
    k = len(verts)
    start = verts.index(min(verts))
    verts = verts[start:] + verts[:start]
    edges = edges[start:] + edges[:start]
    if k > 2 and verts[-1] < verts[1]:
        verts = [verts[0]] + verts[1:][::-1]
        edges = edges[::-1]
    return verts, edges


def check_structural_balance(g: SignedGraph) -> BalanceResult:
    """Two-colour the undirected signed graph or return an odd-parity cycle."""
    if g.nonmonotone_edges:
        j, i = g.nonmonotone_edges[0]
        raise NonmonotoneError(f"f_{i} is not monotone in x{j}; edge sign undefined")
    uf = _ParityUnionFind(g.n)
    adj = {v: [] for v in range(g.n)}
    for (j, i), s in sorted(g.edges.items()):
        a, b, p = j - 1, i - 1, 0 if s > 0 else 1
        if uf.union(a, b, p):
            adj[a].append((b, (j, i, s)))
            adj[b].append((a, (j, i, s)))
            continue
        path = _tree_path(adj, b, a)
        verts = [b + 1] + [v + 1 for _, v, _ in path]  # ends at a
        edges = [e for _, _, e in path] + [(j, i, s)]
        verts, edges = _canonical_cycle(verts, edges)
        return BalanceResult(False, witness=verts, witness_edges=edges)
    roots = {}
    sigma = []
    for v in range(g.n):
        r, p = uf.find(v), uf.parity_of(v)
        base = roots.setdefault(r, p)  # lowest vertex of each part fixes +1
        sigma.append(1 if p == base else -1)
    return BalanceResult(True, sigma=tuple(sigma))


def witness_is_valid(g: SignedGraph, result: BalanceResult) -> bool:
    """Edges exist in ``g``, close a cycle through ``witness`` and have odd negative parity."""
    verts, edges = result.witness, result.witness_edges
    if not verts or len(verts) != len(edges):
        return False
    k = len(verts)
    for n, (a, b, s) in enumerate(edges):
        if g.edges.get((a, b)) != s:
            return False
        if {a, b} != {verts[n], verts[(n + 1) % k]}:
            return False
    return sum(1 for _, _, s in edges if s < 0) % 2 == 1


def verify_signed_monotonicity(
    net: Network,
    sigma,
    sample_box: int = 20,
    n_samples: int = 10_000,
    seed: int = 0,
) -> float:
    """Max of ``sigma_i (f_i(x) - f_i(y))`` over sampled pairs with ``x <=_sigma y``.

    Half the pairs are random comparable points of the box, the other half
    single signed unit steps ``y = x + sigma_j e_j``.  A value <= 0 means no
    violation was found.
    """
    sigma = np.asarray(sigma, dtype=np.int64)
    N = net.n_components
    rng = np.random.default_rng(seed)
    half = n_samples // 2
    a = rng.integers(0, sample_box + 1, size=(half, N))
    b = rng.integers(0, sample_box + 1, size=(half, N))
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    x1 = np.where(sigma > 0, lo, hi)
    y1 = np.where(sigma > 0, hi, lo)
    m = n_samples - half
    x2 = rng.integers(1, sample_box, size=(m, N))
    j = rng.integers(0, N, size=m)
    y2 = x2.copy()
    y2[np.arange(m), j] += sigma[j]
    x = np.vstack([x1, x2])
    y = np.vstack([y1, y2])
    worst = -np.inf
    for i, r in enumerate(net.rates):
        d = sigma[i] * (eval_rate_array(r, x) - eval_rate_array(r, y))
        worst = max(worst, float(d.max()))
    return worst
