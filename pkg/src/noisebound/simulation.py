"""Gillespie simulation of the untruncated chain and the split coupling.

Randomness comes from counter-based Philox streams keyed by
``(seed, replicate)``.  Uniforms are drawn in chunks and handed to the
kernel, so a run depends only on its key, never on chunk size or backend.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from noisebound import kernels
from noisebound.errors import JumpCapError, NegativeRateError, NonFiniteRateError, NotOrderedError
from noisebound.network import Network

JUMP_CAP = 10**9
CHUNK = 1 << 16
DEFAULT_BURN_IN_FRACTION = 0.2
BOX_KAPPA = 8


def replicate_rng(seed: int, replicate: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(replicate,))))


def n_threads() -> int:
    env = os.environ.get("NOISEBOUND_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _map(fn, items):
    items = list(items)
    workers = min(n_threads(), len(items))
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _rate_failure(status, bad, state):
    where = tuple(int(v) for v in state)
    if status == kernels.S_NEG_RATE:
        raise NegativeRateError(f"rate of x{bad + 1} is negative at state {where}")
    raise NonFiniteRateError(f"rate of x{bad + 1} is not finite at state {where}")


def _as_init(net, init):
    if init is None:
        return np.zeros(net.n_components, dtype=np.int64)
    x = np.array(tuple(init), dtype=np.int64)
    if x.shape != (net.n_components,) or (x < 0).any():
        raise ValueError(f"initial state must be {net.n_components} nonnegative integers")
    return x


@dataclass
class _SSARun:
    times: np.ndarray | None
    states: np.ndarray | None
    final: np.ndarray
    jumps: int
    batch_time: np.ndarray  # (K,)
    batch_x: np.ndarray  # (K, N) time integrals
    batch_x2: np.ndarray
    batch_f: np.ndarray


def _run_ssa(net, init, t_end, seed, replicate, edges, record, backend, jump_cap):
    kern = kernels.get_backend(backend)
    prog = kernels.compile_network(net)
    N = net.n_components
    x = _as_init(net, init).copy()
    K = len(edges) - 1
    acc_x, acc_x2, acc_f = (np.zeros((K, N)) for _ in range(3))
    acc_t = np.zeros(K)
    fctl = np.array([0.0, float(t_end)])
    ictl = np.array([0, 0, 0, jump_cap, int(record), -1, 0], dtype=np.int64)
    rng = replicate_rng(seed, replicate)
    u = rng.random(CHUNK)
    cap = CHUNK if record else 0
    rec_t = np.empty(cap)
    rec_x = np.empty((cap, N), dtype=np.int64)
    times, states = ([0.0], [x.copy()[None, :]]) if record else (None, None)
    tau = net.tau_array
    while True:
        status = kern.ssa_run(*prog.as_args(), tau, x, fctl, ictl, edges, acc_x, acc_x2, acc_f, acc_t, u, rec_t, rec_x)
        if record:
            n = int(ictl[1])
            times.extend(rec_t[:n].tolist())
            states.append(rec_x[:n].copy())
            ictl[1] = 0
        if status == kernels.S_DONE:
            break
        if status == kernels.S_NEED_RANDOM:
            u = np.concatenate([u[int(ictl[0]):], rng.random(CHUNK)])
            ictl[0] = 0
        elif status == kernels.S_JUMP_CAP:
            raise JumpCapError(f"more than {jump_cap} jumps before t = {t_end}")
        elif status in (kernels.S_NEG_RATE, kernels.S_NONFINITE):
            _rate_failure(status, int(ictl[5]), x)
    if record:
        times = np.asarray(times)
        states = np.vstack(states)
    return _SSARun(times, states, x, int(ictl[2]), acc_t, acc_x, acc_x2, acc_f)


@dataclass
class Trajectory:
    """A sampled path: ``states[k]`` holds on ``[times[k], times[k+1])``."""

    times: np.ndarray
    states: np.ndarray
    seed: int
    t_end: float
    n_jumps: int
    time_mean: np.ndarray
    time_second: np.ndarray
    time_rate: np.ndarray
    replicate: int = 0

    def to_csv(self, path):
        N = self.states.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"x_{i}" for i in range(1, N + 1)])
            for t, row in zip(self.times, self.states):
                w.writerow([repr(float(t))] + [int(v) for v in row])


def simulate(
    net: Network,
    init=None,
    t_end: float = 100.0,
    seed: int = 0,
    replicate: int = 0,
    record: bool = True,
    backend: str | None = None,
    jump_cap: int = JUMP_CAP,
) -> Trajectory:
    """Direct-method SSA path on ``[0, t_end]`` with time averages over the whole run."""
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    edges = np.array([0.0, float(t_end)])
    run = _run_ssa(net, init, t_end, seed, replicate, edges, record, backend, jump_cap)
    if not record:
        run.times = np.array([0.0])
        run.states = _as_init(net, init)[None, :]
    T = float(t_end)
    return Trajectory(
        run.times,
        run.states,
        seed,
        T,
        run.jumps,
        run.batch_x[0] / T,
        run.batch_x2[0] / T,
        run.batch_f[0] / T,
        replicate,
    )


@dataclass
class StationaryEstimate:
    mean: np.ndarray
    variance: np.ndarray
    fano: np.ndarray
    mean_se: np.ndarray
    fano_se: np.ndarray
    rate_mean: np.ndarray  # time-averaged f_i
    mean_identity_gap: np.ndarray  # mean_i - tau_i * rate_mean_i
    mean_identity_se: np.ndarray
    burn_in: float
    t_end: float
    n_batches: int
    n_replicates: int
    n_jumps: int
    seed: int
    batch_means: np.ndarray = field(repr=False, default=None)

    def to_dict(self):
        def lst(a):
            return [float(v) for v in a]

        return {
            "mean": lst(self.mean),
            "variance": lst(self.variance),
            "fano": lst(self.fano),
            "mean_se": lst(self.mean_se),
            "fano_se": lst(self.fano_se),
            "rate_mean": lst(self.rate_mean),
            "mean_identity_gap": lst(self.mean_identity_gap),
            "mean_identity_se": lst(self.mean_identity_se),
            "burn_in": self.burn_in,
            "t_end": self.t_end,
            "n_batches": self.n_batches,
            "n_replicates": self.n_replicates,
            "n_jumps": self.n_jumps,
            "seed": self.seed,
        }


def estimate_stationary_stats(
    net: Network,
    t_end: float,
    burn_in: float | None = None,
    n_batches: int = 20,
    seed: int = 0,
    init=None,
    n_replicates: int = 1,
    backend: str | None = None,
    jump_cap: int = JUMP_CAP,
) -> StationaryEstimate:
    """Time-weighted moments over ``(burn_in, t_end]`` with batch-means errors.

    Each replicate contributes ``n_batches`` equal time slices; the Fano
    standard error uses the delta method on the batch (mean, second moment)
    pairs.
    """
    if burn_in is None:
        burn_in = DEFAULT_BURN_IN_FRACTION * t_end
    if not 0 <= burn_in < t_end:
        raise ValueError("need 0 <= burn_in < t_end")
    if n_batches < 2:
        raise ValueError("need at least two batches")
    edges = np.linspace(burn_in, t_end, n_batches + 1)
    runs = _map(
        lambda r: _run_ssa(net, init, t_end, seed, r, edges, False, backend, jump_cap),
        range(n_replicates),
    )
    bt = np.concatenate([r.batch_time for r in runs])
    bx = np.vstack([r.batch_x for r in runs])
    bx2 = np.vstack([r.batch_x2 for r in runs])
    bf = np.vstack([r.batch_f for r in runs])
    total = bt.sum()
    mean = bx.sum(axis=0) / total
    second = bx2.sum(axis=0) / total
    rate = bf.sum(axis=0) / total
    var = second - mean**2
    fano = var / mean

    K = len(bt)
    m_k = bx / bt[:, None]
    s_k = bx2 / bt[:, None]
    f_k = bf / bt[:, None]
    root_k = math.sqrt(K)
    mean_se = m_k.std(axis=0, ddof=1) / root_k
    fano_se = np.empty_like(mean)
    for i in range(len(mean)):
        C = np.cov(np.vstack([m_k[:, i], s_k[:, i]])) / K
        g = np.array([-second[i] / mean[i] ** 2 - 1.0, 1.0 / mean[i]])
        fano_se[i] = math.sqrt(max(float(g @ C @ g), 0.0))
    tau = net.tau_array
    gap = mean - tau * rate
    gap_se = (m_k - tau * f_k).std(axis=0, ddof=1) / root_k
    return StationaryEstimate(
        mean=mean,
        variance=var,
        fano=fano,
        mean_se=mean_se,
        fano_se=fano_se,
        rate_mean=rate,
        mean_identity_gap=gap,
        mean_identity_se=gap_se,
        burn_in=float(burn_in),
        t_end=float(t_end),
        n_batches=n_batches,
        n_replicates=n_replicates,
        n_jumps=sum(r.jumps for r in runs),
        seed=seed,
        batch_means=m_k,
    )


def signed_leq(x, y, sigma) -> bool:
    """``x <=_sigma y``: coordinatewise order with the sigma_i = -1 coordinates reversed."""
    s = np.asarray(sigma)
    return bool((s * np.asarray(x) <= s * np.asarray(y)).all())


@dataclass
class CoupledTrajectory:
    times: np.ndarray
    x_states: np.ndarray
    y_states: np.ndarray
    order_violations: list
    n_violations: int
    max_channel_error: float
    n_unmatched: int
    n_jumps: int
    sigma: tuple
    seed: int
    t_end: float
    replicate: int = 0

    def to_dict(self):
        return {
            "n_jumps": self.n_jumps,
            "n_violations": self.n_violations,
            "order_violations": [float(t) for t in self.order_violations],
            "max_channel_error": self.max_channel_error,
            "n_unmatched": self.n_unmatched,
            "sigma": list(self.sigma),
            "seed": self.seed,
            "replicate": self.replicate,
            "t_end": self.t_end,
        }


def simulate_split_coupling(
    net: Network,
    sigma,
    x0,
    y0,
    t_end: float,
    seed: int = 0,
    replicate: int = 0,
    record: bool = False,
    backend: str | None = None,
    jump_cap: int = JUMP_CAP,
    violation_cap: int = 1000,
) -> CoupledTrajectory:
    """Two copies driven by shared and residual unit Poisson clocks.

    Per coordinate the channels are the common birth at ``min(f(z), f(w))``,
    the two unmatched births carrying the excess, and the same three for
    deaths.  Every jump is checked against the signed order.
    """
    sigma = tuple(int(s) for s in sigma)
    N = net.n_components
    if len(sigma) != N or any(s not in (-1, 1) for s in sigma):
        raise ValueError("sigma must have one entry in {-1, +1} per component")
    z = _as_init(net, x0).copy()
    w = _as_init(net, y0).copy()
    if not signed_leq(z, w, sigma):
        raise NotOrderedError(
            f"{tuple(int(v) for v in z)} is not below {tuple(int(v) for v in w)} in the order signed by {sigma}"
        )
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    kern = kernels.get_backend(backend)
    prog = kernels.compile_network(net)
    rng = replicate_rng(seed, replicate)
    T = np.zeros(6 * N)
    P = -np.log1p(-rng.random(6 * N))
    u = rng.random(CHUNK)
    sg = np.asarray(sigma, dtype=np.int64)
    fctl = np.array([0.0, float(t_end), 0.0])
    ictl = np.array([0, 0, jump_cap, 0, 0, int(record), 0, -1], dtype=np.int64)
    viol_t = np.empty(violation_cap)
    cap = CHUNK if record else 0
    rec_t = np.empty(cap)
    rec_z = np.empty((cap, N), dtype=np.int64)
    rec_w = np.empty((cap, N), dtype=np.int64)
    times, zs, ws = [0.0], [z.copy()[None, :]], [w.copy()[None, :]]
    while True:
        status = kern.couple_run(*prog.as_args(), net.tau_array, z, w, sg, T, P, fctl, ictl, u, viol_t, rec_t, rec_z, rec_w)
        if record:
            n = int(ictl[4])
            times.extend(rec_t[:n].tolist())
            zs.append(rec_z[:n].copy())
            ws.append(rec_w[:n].copy())
            ictl[4] = 0
        if status == kernels.S_DONE:
            break
        if status == kernels.S_NEED_RANDOM:
            u = np.concatenate([u[int(ictl[0]):], rng.random(CHUNK)])
            ictl[0] = 0
        elif status == kernels.S_JUMP_CAP:
            raise JumpCapError(f"more than {jump_cap} jumps before t = {t_end}")
        elif status in (kernels.S_NEG_RATE, kernels.S_NONFINITE):
            _rate_failure(status, int(ictl[7]), z)
    n_viol = int(ictl[3])
    return CoupledTrajectory(
        times=np.asarray(times),
        x_states=np.vstack(zs),
        y_states=np.vstack(ws),
        order_violations=viol_t[: min(n_viol, violation_cap)].tolist(),
        n_violations=n_viol,
        max_channel_error=float(fctl[2]),
        n_unmatched=int(ictl[6]),
        n_jumps=int(ictl[1]),
        sigma=sigma,
        seed=seed,
        t_end=float(t_end),
        replicate=replicate,
    )


@dataclass
class CouplingSummary:
    n_runs: int
    n_violations: int
    runs_with_violations: int
    max_channel_error: float
    n_jumps: int
    n_unmatched: int
    first_violations: list

    def to_dict(self):
        return dict(self.__dict__)


def couple_replicates(net, sigma, x0, y0, t_end, n_runs, seed=0, backend=None) -> CouplingSummary:
    """Independent coupled runs keyed ``(seed, r)`` for ``r < n_runs``."""
    runs = _map(
        lambda r: simulate_split_coupling(net, sigma, x0, y0, t_end, seed, r, backend=backend),
        range(n_runs),
    )
    bad = [r for r in runs if r.n_violations]
    return CouplingSummary(
        n_runs=n_runs,
        n_violations=sum(r.n_violations for r in runs),
        runs_with_violations=len(bad),
        max_channel_error=max(r.max_channel_error for r in runs),
        n_jumps=sum(r.n_jumps for r in runs),
        n_unmatched=sum(r.n_unmatched for r in runs),
        first_violations=[{"replicate": r.replicate, "time": r.order_violations[0]} for r in bad[:10]],
    )


def empirical_transition_rates(times, states, t_end):
    """Per-state holding time and jump counts ``{state: (time, {(kind, i): count})}``.

    ``kind`` is ``"birth"`` or ``"death"`` and ``i`` is 1-based.  Dividing a
    count by the holding time estimates that transition's rate.  Records where
    the state does not change only add holding time.
    """
    times = np.asarray(times)
    states = np.asarray(states)
    hold = np.diff(np.append(times, t_end))
    out = {}
    for k in range(len(times)):
        key = tuple(int(v) for v in states[k])
        entry = out.setdefault(key, [0.0, {}])
        entry[0] += float(hold[k])
        if k + 1 < len(times):
            delta = states[k + 1] - states[k]
            moved = np.flatnonzero(delta)
            if moved.size == 0:  # the other leg of a coupled pair jumped
                continue
            i = int(moved[0])
            kind = "birth" if delta[i] > 0 else "death"
            entry[1][(kind, i + 1)] = entry[1].get((kind, i + 1), 0) + 1
    return {s: (v[0], v[1]) for s, v in out.items()}


def default_box(net: Network, seed: int = 0, pilot_t_end: float | None = None, kappa: float = BOX_KAPPA, floor: int = 15):
    """Caps ``ceil(kappa * tau_i * mu_i)`` from a pilot SSA estimate of the mean rates.

    Small means get at least ``max(floor, m + 12 sqrt(m))`` so Poisson-like
    tails stay negligible.
    """
    tau = net.tau_array
    if pilot_t_end is None:
        pilot_t_end = 200.0 * float(tau.max())
    est = estimate_stationary_stats(net, pilot_t_end, n_batches=4, seed=seed)
    m = tau * est.rate_mean
    caps = np.ceil(np.maximum(kappa * m, np.maximum(floor, m + 12 * np.sqrt(m))))
    return tuple(int(c) for c in caps)
