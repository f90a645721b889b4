"""Certify the standing hypotheses from per-rate bounds.

A network is certified when every rate has a rigorous affine bound, the
uniform lower bound ``epsilon`` is positive, and the summed slope ``B`` is
below ``1 / tau_max``.  The Lyapunov function ``V(x) = (1 + s(x))**2`` then
has quadratic drift with negative leading coefficient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np

from noisebound.errors import NotCertifiedError, UnboundedRateError
from noisebound.network import Network, birth_rates
from noisebound.rate_expr import analyze_bounds

CERTIFIED, FAILED, INCONCLUSIVE = "CERTIFIED", "FAILED", "INCONCLUSIVE"

LOWER_BOUND = "f_lower_bound"
LINEAR_GROWTH = "total_birth_linear_growth"
DRIFT_GAP = "drift_gap_condition"


@dataclass
class HypothesisReport:
    epsilon: float
    A: float
    B: float
    tau_max: float
    tau_min: float
    gap: float
    verdict: str
    reason: str | None
    bounds: list = field(default_factory=list)  # per-rate dicts

    @property
    def certified(self):
        return self.verdict == CERTIFIED

    @property
    def rigorous(self):
        return all(b.get("rigorous", False) for b in self.bounds)

    @property
    def C_lambda(self):
        """Constant in Lambda(x) <= C (1 + s(x))."""
        return self.A + self.B + 1.0 / self.tau_min

    def to_dict(self):
        return {
            "epsilon": self.epsilon,
            "A": self.A,
            "B": self.B,
            "tau_max": self.tau_max,
            "tau_min": self.tau_min,
            "gap": self.gap,
            "C_lambda": self.C_lambda,
            "verdict": self.verdict,
            "reason": self.reason,
            "bounds": self.bounds,
        }


def check_sufficient_conditions(net: Network) -> HypothesisReport:
    tau = net.tau_array
    tau_max, tau_min = float(tau.max()), float(tau.min())
    bounds = []
    unbounded = []
    for i, r in enumerate(net.rates, start=1):
        try:
            b = analyze_bounds(r)
        except UnboundedRateError as exc:
            unbounded.append(i)
            bounds.append({"component": i, "rigorous": False, "unbounded": True, "detail": str(exc)})
            continue
        bounds.append({"component": i, **b.to_dict()})

    if unbounded:
        return HypothesisReport(0.0, math.inf, math.inf, tau_max, tau_min, -math.inf, FAILED, LINEAR_GROWTH, bounds)

    eps = min(b["lower"] for b in bounds)
    A = sum(b["upper_const"] for b in bounds)
    B = sum(b["upper_slope"] for b in bounds)
    gap = 1.0 / tau_max - B
    rigorous = all(b["rigorous"] for b in bounds)
    if not rigorous:
        verdict, reason = INCONCLUSIVE, "non-rigorous rate bounds"
    elif not eps > 0:
        verdict, reason = FAILED, LOWER_BOUND
    elif not gap > 0:
        verdict, reason = FAILED, DRIFT_GAP
    else:
        verdict, reason = CERTIFIED, None
    return HypothesisReport(eps, A, B, tau_max, tau_min, gap, verdict, reason, bounds)


@dataclass
class DriftReport:
    quadratic_coeff: float
    linear_coeff: float
    constant: float
    c: float
    b: float
    R: int
    check_radius: int
    n_checked: int
    max_violation: float  # max of LV + cV - b 1{s<=R} over checked states
    max_violation_outside: float  # same restricted to s > R

    def to_dict(self):
        return dict(self.__dict__)


def enumerate_simplex(N, smax):
    """All states in Z_{>=0}^N with s(x) <= smax, as an (n, N) array."""
    rows = []
    for s in range(smax + 1):
        # stars and bars: compositions of s into N parts
        for bars in combinations_with_replacement(range(s + 1), N - 1):
            cuts = (0,) + bars + (s,)
            rows.append([cuts[k + 1] - cuts[k] for k in range(N)])
    return np.asarray(rows, dtype=np.int64).reshape(-1, N)


def lyapunov_values(net: Network, states):
    """``(LV)(x)`` for ``V = (1 + s)**2`` computed from the transition rates."""
    states = np.asarray(states)
    s = states.sum(axis=1).astype(float)
    births = birth_rates(net, states).sum(axis=1)
    deaths = (states / net.tau_array).sum(axis=1)
    return (2 * s + 3) * births - (2 * s + 1) * deaths


def lyapunov_drift_report(
    net: Network,
    radius: int | None = None,
    margin: int = 5,
    report: HypothesisReport | None = None,
) -> DriftReport:
    """Drift polynomial, a witness ``(c, b, R)`` and a direct check of it.

    ``c`` is half the negated quadratic coefficient.  ``R`` is the smallest
    integer beyond which the polynomial bound already gives
    ``LV <= -c V``; passing ``radius`` enlarges it.  The inequality is then
    checked exactly on every state with ``s(x) <= R + margin``.
    """
    report = report or check_sufficient_conditions(net)
    if not report.rigorous:
        raise NotCertifiedError("drift report needs rigorous rate bounds")
    A, B, tm = report.A, report.B, report.tau_max
    q = 2 * B - 2 / tm
    l = 2 * A + 3 * B - 1 / tm
    k = 3 * A
    if not q < 0:
        raise NotCertifiedError(f"quadratic drift coefficient {q:g} is not negative")
    c = -q / 2
    # r(s) = poly(s) + c (1 + s)^2 must be <= 0 for s > R
    a2, a1, a0 = q + c, l + 2 * c, k + c
    disc = a1 * a1 - 4 * a2 * a0
    root = (-a1 - math.sqrt(max(disc, 0.0))) / (2 * a2) if disc >= 0 else 0.0
    R = max(0, math.ceil(root))
    if radius is not None:
        R = max(R, int(radius))
    vertex = -a1 / (2 * a2)
    candidates = [0.0, float(R)] + ([vertex] if 0 <= vertex <= R else [])
    b = max(0.0, max(a2 * s * s + a1 * s + a0 for s in candidates))

    limit = R + margin
    states = enumerate_simplex(net.n_components, limit)
    s = states.sum(axis=1)
    LV = lyapunov_values(net, states)
    V = (1.0 + s) ** 2
    excess = LV + c * V - b * (s <= R)
    outside = excess[s > R]
    return DriftReport(
        quadratic_coeff=q,
        linear_coeff=l,
        constant=k,
        c=c,
        b=b,
        R=R,
        check_radius=limit,
        n_checked=int(len(states)),
        max_violation=float(excess.max()),
        max_violation_outside=float(outside.max()) if outside.size else -math.inf,
    )
