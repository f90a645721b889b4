"""Finite-box truncation and its stationary distribution.

The box ``{0..M_1} x ... x {0..M_N}`` keeps every death and suppresses the
births that would leave it.  States are linearized mixed-radix with
coordinate 1 fastest, so ``pi.reshape(shape, order="F")[n1, n2, ...]`` is
the probability of ``(n1, n2, ...)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from noisebound.errors import NoConvergenceError, StateSpaceTooLargeError
from noisebound.network import Network, birth_rates

DEFAULT_STATE_LIMIT = 5_000_000
POWER, DIRECT = "power", "direct"


@dataclass
class TruncatedChain:
    net: Network
    caps: tuple
    states: np.ndarray  # (n, N) int64
    strides: np.ndarray
    raw_rates: np.ndarray  # (n, N) f_i(x_{-i})
    eff_rates: np.ndarray  # (n, N) f_i(x_{-i}) * 1{x_i < M_i}
    Q: sp.csr_matrix
    n_birth_edges: int
    n_death_edges: int

    @property
    def shape(self):
        return tuple(m + 1 for m in self.caps)

    @property
    def n_states(self):
        return self.states.shape[0]

    @property
    def n_components(self):
        return self.net.n_components

    def index(self, x):
        return int(np.dot(np.asarray(x), self.strides))

    def exit_rates(self):
        return -self.Q.diagonal()

    def boundary_mask(self):
        return (self.states == np.asarray(self.caps)).any(axis=1)

    def as_grid(self, values):
        return np.asarray(values).reshape(self.shape, order="F")


def box_states(caps):
    shape = tuple(m + 1 for m in caps)
    grids = np.indices(shape)
    return np.stack([g.ravel(order="F") for g in grids], axis=1).astype(np.int64)


def build_truncated_chain(net: Network, caps, state_limit: int = DEFAULT_STATE_LIMIT) -> TruncatedChain:
    caps = tuple(int(m) for m in caps)
    N = net.n_components
    if len(caps) != N:
        raise ValueError(f"need {N} caps, got {len(caps)}")
    if any(m < 0 for m in caps):
        raise ValueError("caps must be nonnegative")
    n = math.prod(m + 1 for m in caps)
    if n > state_limit:
        raise StateSpaceTooLargeError(f"box {caps} has {n} states, limit is {state_limit}")
    states = box_states(caps)
    strides = np.cumprod([1] + [m + 1 for m in caps[:-1]]).astype(np.int64)
    raw = birth_rates(net, states)
    inside = states < np.asarray(caps)
    eff = np.where(inside, raw, 0.0)

    rows, cols, vals = [], [], []
    idx = np.arange(n, dtype=np.int64)
    n_birth = n_death = 0
    for i in range(N):
        b = inside[:, i]
        n_birth += int(b.sum())
        keep = b & (eff[:, i] > 0)
        rows.append(idx[keep])
        cols.append(idx[keep] + strides[i])
        vals.append(eff[keep, i])
        d = states[:, i] >= 1
        n_death += int(d.sum())
        rows.append(idx[d])
        cols.append(idx[d] - strides[i])
        vals.append(states[d, i] / net.tau[i])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals).astype(float)
    out = np.bincount(rows, weights=vals, minlength=n)
    Q = sp.csr_matrix(
        (np.concatenate([vals, -out]), (np.concatenate([rows, idx]), np.concatenate([cols, idx]))),
        shape=(n, n),
    )
    Q.sum_duplicates()
    return TruncatedChain(net, caps, states, strides, raw, eff, Q, n_birth, n_death)


@dataclass
class StationaryDistribution:
    pi: np.ndarray
    boundary_mass: float
    residual: float
    method: str
    iterations: int
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "boundary_mass": self.boundary_mass,
            "residual": self.residual,
            "method": self.method,
            "iterations": self.iterations,
            **self.meta,
        }


def _residual(QT, p):
    return float(np.abs(QT @ p).max()) if p.size else 0.0


def _relative_balance(flow, p, exits, floor=1e-250):
    """Max over states of |net inflow| / outflow; gives entrywise relative accuracy."""
    live = p > floor
    if not live.any():
        return 0.0
    return float((np.abs(flow[live]) / (p[live] * np.maximum(exits[live], 1e-300))).max())


def _uniformized(QT, exits, p, tol, rtol, max_iter):
    """Iterate ``p <- p + (p^T Q) / L*`` with ``L*`` the largest exit rate.

    Every step is a convex combination, so a positive start stays positive.
    Stops once ``max|p^T Q| <= tol`` and, when ``rtol`` is given, every state
    balances its in- and outflow to relative precision ``rtol``.
    """
    lam = float(exits.max())
    if lam == 0:
        return p, 0.0, 0
    res = rel = math.inf
    for it in range(max_iter + 1):
        flow = QT @ p
        res = float(np.abs(flow).max())
        if res <= tol:
            rel = _relative_balance(flow, p, exits) if rtol is not None else 0.0
            if rtol is None or rel <= rtol:
                return p, res, it
        if it == max_iter:
            break
        p = p + flow / lam
        if it % 64 == 63:
            p /= p.sum()
    raise NoConvergenceError(max_iter, res if res > tol else rel)


def _direct(QT):
    """Solve ``pi^T Q = 0`` by sparse LU with one state pinned to 1, then normalize."""
    n = QT.shape[0]
    A = QT.tolil()
    A[0, :] = 0.0
    A[0, 0] = 1.0
    rhs = np.zeros(n)
    rhs[0] = 1.0
    p = spla.splu(A.tocsc(), permc_spec="MMD_AT_PLUS_A").solve(rhs)
    return p / p.sum()


AUTO_DIRECT_LIMIT = 20_000


def solve_stationary(
    chain: TruncatedChain,
    method: str = DIRECT,
    tol: float = 1e-12,
    rtol: float | None = 1e-12,
    max_iter: int = 1_000_000,
) -> StationaryDistribution:
    """Stationary law of the truncated chain with ``max|pi^T Q| <= tol``.

    ``power`` iterates the uniformized chain from the uniform vector.
    ``direct`` factorizes the balance equations and then runs the same
    uniformized sweeps from the (clipped) solution: the factorization is only
    accurate in absolute terms and its far-tail entries can be off by many
    orders of magnitude, which the sweeps repair.  ``rtol`` bounds the
    per-state relative imbalance; ``None`` keeps the bare residual test.
    ``auto`` picks ``direct`` below ``AUTO_DIRECT_LIMIT`` states.
    """
    QT = chain.Q.T.tocsr()
    exits = chain.exit_rates()
    n = chain.n_states
    if method == "auto":
        method = DIRECT if n <= AUTO_DIRECT_LIMIT else POWER
    meta = {}
    if n == 1:
        p, iters = np.ones(1), 0
    elif method == POWER:
        p, _, iters = _uniformized(QT, exits, np.full(n, 1.0 / n), tol, rtol, max_iter)
    elif method == DIRECT:
        p = _direct(QT)
        meta["lu_residual"] = _residual(QT, p)
        meta["lu_min"] = float(p.min())
        p = np.maximum(p, 1e-300)
        p, _, iters = _uniformized(QT, exits, p / p.sum(), tol, rtol, max_iter)
    else:
        raise ValueError(f"unknown method {method!r}")
    p = p / p.sum()
    res = _residual(QT, p)
    if rtol is not None:
        meta["relative_balance"] = _relative_balance(QT @ p, p, exits)
    bmass = float(p[chain.boundary_mask()].sum())
    return StationaryDistribution(p, bmass, res, method, iters, meta)


def check_stationarity_identity(dist: StationaryDistribution, chain: TruncatedChain, test_family) -> float:
    """``max over phi of |sum_x pi(x) (L phi)(x)|`` for the truncated generator."""
    worst = 0.0
    for phi in test_family:
        vals = np.asarray(phi(chain.states), dtype=float)
        worst = max(worst, abs(float(dist.pi @ (chain.Q @ vals))))
    return worst


class Monomial:
    """Test function ``prod_k x_{i_k}`` (1-based indices)."""

    def __init__(self, *indices):
        self.indices = indices

    def __call__(self, states):
        out = np.ones(states.shape[0])
        for i in self.indices:
            out = out * states[:, i - 1]
        return out

    def __repr__(self):
        return "*".join(f"x{i}" for i in self.indices)


class IndicatorLE:
    """Test function ``1{x_i <= n}``."""

    def __init__(self, i, n):
        self.i, self.n = i, n

    def __call__(self, states):
        return (states[:, self.i - 1] <= self.n).astype(float)

    def __repr__(self):
        return f"1{{x{self.i}<={self.n}}}"


def default_test_family(chain: TruncatedChain, levels=(0, 1, 3)):
    N = chain.n_components
    fam = []
    for i in range(1, N + 1):
        fam += [Monomial(i), Monomial(i, i)]
        fam += [IndicatorLE(i, n) for n in levels if n < chain.caps[i - 1]]
        fam += [Monomial(i, j) for j in range(i + 1, N + 1)]
    return fam


def dump_pi_csv(dist: StationaryDistribution, chain: TruncatedChain, path):
    N = chain.n_components
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x_{i}" for i in range(1, N + 1)] + ["pi"])
        for row, p in zip(chain.states, dist.pi):
            w.writerow([int(v) for v in row] + [repr(float(p))])


def dump_generator_coo(chain: TruncatedChain, path):
    Q = chain.Q.tocoo()
    with open(path, "w") as fh:
        for r, c, v in zip(Q.row, Q.col, Q.data):
            fh.write(f"{int(r)} {int(c)} {float(v)!r}\n")
