"""Stationary observables and the identities/inequalities they satisfy.

All quantities are evaluated on a solved truncated chain with the effective
rates ``f_i * 1{x_i < M_i}``.  With those rates the mean identity, the
Fano-covariance identity, marginal flux balance and the zero total
information flow hold exactly on the box, so their residuals measure
implementation and solver error only.  The per-component inequality only
holds for the infinite chain and is tested with a tolerance tied to the
boundary mass.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from noisebound.errors import DegenerateError, ZeroProbabilityError
from noisebound.exact import StationaryDistribution, TruncatedChain

UNDERFLOW = 1e-280

TOL_MEAN = 1e-9
TOL_FANO_COV = 1e-9
TOL_FLUX = 1e-10
TOL_TOTAL_FLOW = 1e-8
TOL_FLOW_FORMS = 1e-9
TOL_KL = 1e-12
TOL_INEQ_FLOOR = 1e-8


def _front(grid, i):
    """Move the axis of 0-based component ``i`` to the front."""
    return np.moveaxis(grid, i, 0)


def _other_axes(grid):
    return tuple(range(1, grid.ndim))


def _check_support(pi):
    if (pi < 0).any() or (pi == 0).any():
        k = int(np.argmax(pi <= 0))
        raise ZeroProbabilityError(f"stationary probability {pi[k]:g} at state index {k}; log-potentials undefined")


@dataclass
class ComponentStats:
    component: int
    mean: float
    variance: float
    fano: float
    mu: float
    cov: float
    m_of_n: np.ndarray
    info_flow: float
    info_flow_generator: float
    mean_identity_residual: float
    fano_cov_residual: float
    flux_residuals: np.ndarray
    kl: np.ndarray
    excluded_mass: float
    raw: dict = field(default_factory=dict)

    @property
    def max_flux_residual(self):
        return float(self.flux_residuals.max()) if self.flux_residuals.size else 0.0

    def to_dict(self):
        return {
            "component": self.component,
            "mean": self.mean,
            "variance": self.variance,
            "fano": self.fano,
            "mu": self.mu,
            "cov": self.cov,
            "info_flow": self.info_flow,
            "info_flow_generator": self.info_flow_generator,
            "mean_identity_residual": self.mean_identity_residual,
            "fano_cov_residual": self.fano_cov_residual,
            "max_flux_residual": self.max_flux_residual,
            "min_kl": float(self.kl.min()) if self.kl.size else 0.0,
            "excluded_mass": self.excluded_mass,
            "m_of_n": [float(v) for v in self.m_of_n],
            "raw": self.raw,
        }


class _Fibers:
    """Joint law and effective rate of one component laid out as (n, v...)."""

    def __init__(self, dist, chain, i):
        _check_support(dist.pi)
        self.i = i
        self.tau = chain.net.tau[i - 1]
        self.P = _front(chain.as_grid(dist.pi), i - 1)
        self.F = _front(chain.as_grid(chain.eff_rates[:, i - 1]), i - 1)
        self.F_raw = _front(chain.as_grid(chain.raw_rates[:, i - 1]), i - 1)
        self.axes = _other_axes(self.P)
        self.M = self.P.shape[0] - 1
        self.levels = np.arange(self.M + 1, dtype=float)
        self.marginal = self.P.sum(axis=self.axes) if self.axes else self.P.copy()
        self.shape_n = (-1,) + (1,) * len(self.axes)

    def lev(self, a):
        return np.asarray(a).reshape(self.shape_n)

    def fiber_sum(self, a):
        return a.sum(axis=self.axes) if self.axes else a

    def currents(self):
        death = self.lev(self.levels[1:] / self.tau) * self.P[1:]
        return self.P[:-1] * self.F[:-1] - death

    def log_potential(self):
        """``h_i = -log pi^i_n(v)`` with excluded (underflow) states masked."""
        ok = self.P >= UNDERFLOW
        with np.errstate(divide="ignore", invalid="ignore"):
            h = np.where(ok, -np.log(np.where(ok, self.P, 1.0)) + self.lev(np.log(self.marginal)), 0.0)
        return h, ok


def component_stats(dist: StationaryDistribution, chain: TruncatedChain, i: int) -> ComponentStats:
    """Moments, identities, flux table and information flow of component ``i`` (1-based)."""
    fb = _Fibers(dist, chain, i)
    tau, n, marg = fb.tau, fb.levels, fb.marginal
    mean = float(n @ marg)
    second = float((n * n) @ marg)
    var = second - mean * mean
    PF = fb.P * fb.F
    flux_birth = fb.fiber_sum(PF)
    mu = float(flux_birth.sum())
    if not mu > 0:
        raise DegenerateError(f"mean birth rate of x{i} is zero on the truncated chain")
    xf = float(n @ flux_birth)
    cov = xf - mu * mean
    fano = var / mean
    with np.errstate(invalid="ignore", divide="ignore"):
        m_of_n = np.where(marg > 0, flux_birth / marg, 0.0)

    flux = np.abs(flux_birth[:-1] - n[1:] / tau * marg[1:])

    J = fb.currents()
    h, ok = fb.log_potential()
    edge = ok[:-1] & ok[1:]
    dh = np.where(edge, h[:-1] - h[1:], 0.0)
    terms = np.where(edge & (J != 0), J * dh, 0.0)
    flow = float(terms.sum())

    # -E[(L_i h_i)(X)], summed state by state over births and deaths separately
    birth_part = np.where(edge, PF[:-1] * (h[1:] - h[:-1]), 0.0)
    death_part = np.where(edge, fb.lev(n[1:] / tau) * fb.P[1:] * (h[:-1] - h[1:]), 0.0)
    flow_gen = -float(birth_part.sum() + death_part.sum())

    kl = np.empty(fb.M)
    for k in range(fb.M):
        p = fb.P[k + 1] / marg[k + 1]
        q = fb.P[k] / marg[k]
        live = (fb.P[k + 1] >= UNDERFLOW) & (fb.P[k] >= UNDERFLOW)
        kl[k] = float(np.sum(np.where(live, p * (np.log(np.where(live, p, 1.0)) - np.log(np.where(live, q, 1.0))), 0.0)))

    PFr = fb.fiber_sum(fb.P * fb.F_raw)
    mu_raw = float(PFr.sum())
    cov_raw = float(n @ PFr) - mu_raw * mean
    raw = {
        "mu": mu_raw,
        "cov": cov_raw,
        "mean_identity_residual": abs(mean - tau * mu_raw),
        "fano_cov_residual": abs(fano - 1 - cov_raw / mu_raw) if mu_raw > 0 else math.nan,
    }
    return ComponentStats(
        component=i,
        mean=mean,
        variance=var,
        fano=fano,
        mu=mu,
        cov=cov,
        m_of_n=m_of_n,
        info_flow=flow,
        info_flow_generator=flow_gen,
        mean_identity_residual=abs(mean - tau * mu),
        fano_cov_residual=abs(fano - 1 - cov / mu),
        flux_residuals=flux,
        kl=kl,
        excluded_mass=float(dist.pi[dist.pi < UNDERFLOW].sum()),
        raw=raw,
    )


def flux_balance_residuals(dist, chain, i) -> np.ndarray:
    """``|pi_i(n) m_i(n) - (n+1)/tau_i pi_i(n+1)|`` for ``n = 0 .. M_i - 1``."""
    fb = _Fibers(dist, chain, i)
    birth = fb.fiber_sum(fb.P * fb.F)
    return np.abs(birth[:-1] - fb.levels[1:] / fb.tau * fb.marginal[1:])


def fiber_currents(dist, chain, i) -> np.ndarray:
    """Currents ``J_i(n+1, n; v)`` with the level ``n`` on axis 0.

    The remaining axes are the other components in increasing order.
    """
    return _Fibers(dist, chain, i).currents()


@dataclass
class InfoFlow:
    value: float
    generator_form: float
    terms: np.ndarray
    excluded_mass: float


def information_flow(dist, chain, i) -> InfoFlow:
    s = component_stats(dist, chain, i)
    fb = _Fibers(dist, chain, i)
    J = fb.currents()
    h, ok = fb.log_potential()
    edge = ok[:-1] & ok[1:]
    terms = np.where(edge & (J != 0), J * np.where(edge, h[:-1] - h[1:], 0.0), 0.0)
    return InfoFlow(s.info_flow, s.info_flow_generator, fb.fiber_sum(terms), s.excluded_mass)


@dataclass
class TradeoffReport:
    components: list
    weighted_sum: float
    total_info_flow: float
    slacks: list
    boundary_mass: float
    tol_ineq: float
    checks: dict
    verdict: str
    failed: list
    name: str = ""

    @property
    def fano(self):
        return [c.fano for c in self.components]

    def to_dict(self):
        return {
            "name": self.name,
            "verdict": self.verdict,
            "failed": self.failed,
            "weighted_sum": self.weighted_sum,
            "total_info_flow": self.total_info_flow,
            "slacks": self.slacks,
            "boundary_mass": self.boundary_mass,
            "tol_ineq": self.tol_ineq,
            "checks": self.checks,
            "components": [c.to_dict() for c in self.components],
        }


def tradeoff_report(dist, chain, tol_identity: float = TOL_TOTAL_FLOW, name: str = "") -> TradeoffReport:
    """Evaluate every component and test the identity and inequality suites."""
    comps = [component_stats(dist, chain, i) for i in range(1, chain.n_components + 1)]
    tau = chain.net.tau
    tol_ineq = max(TOL_INEQ_FLOOR, 10.0 * dist.boundary_mass)
    slacks = [(c.fano - 1) / t - c.info_flow for c, t in zip(comps, tau)]
    weighted = float(sum((c.fano - 1) / t for c, t in zip(comps, tau)))
    total = float(sum(c.info_flow for c in comps))

    def upper(value, tol):
        return {"value": float(value), "tol": tol, "pass": bool(value <= tol)}

    def lower(value, tol):
        return {"value": float(value), "tol": -tol, "pass": bool(value >= -tol)}

    checks = {
        "mean_identity": upper(max(c.mean_identity_residual for c in comps), TOL_MEAN),
        "fano_cov_identity": upper(max(c.fano_cov_residual for c in comps), TOL_FANO_COV),
        "flux_balance": upper(max(c.max_flux_residual for c in comps), TOL_FLUX),
        "total_info_flow": upper(abs(total), tol_identity),
        "info_flow_forms": upper(max(abs(c.info_flow - c.info_flow_generator) for c in comps), TOL_FLOW_FORMS),
        "component_slack": lower(min(slacks), tol_ineq),
        "weighted_sum": lower(weighted, tol_ineq),
        "conditional_kl": lower(min(float(c.kl.min()) if c.kl.size else 0.0 for c in comps), TOL_KL),
    }
    failed = [k for k, v in checks.items() if not v["pass"]]
    return TradeoffReport(
        components=comps,
        weighted_sum=weighted,
        total_info_flow=total,
        slacks=[float(s) for s in slacks],
        boundary_mass=dist.boundary_mass,
        tol_ineq=tol_ineq,
        checks=checks,
        verdict="PASS" if not failed else "FAIL",
        failed=failed,
        name=name or chain.net.name,
    )


@dataclass
class AssociationResult:
    min_cov: float
    pair: tuple
    n_functions: int


def signed_upper_indicators(states, sigma, thresholds):
    """Columns ``1{x >=_sigma a}`` for each threshold ``a``."""
    sigma = np.asarray(sigma)
    S = states * sigma
    A = np.asarray(thresholds) * sigma
    return (S[:, None, :] >= A[None, :, :]).all(axis=2).astype(float)


def default_thresholds(dist, chain, quantiles=(0.1, 0.25, 0.5, 0.75, 0.9)):
    levels = []
    for i in range(chain.n_components):
        marg = np.bincount(chain.states[:, i], weights=dist.pi, minlength=chain.caps[i] + 1)
        cdf = np.cumsum(marg)
        lv = sorted({int(np.searchsorted(cdf, q)) for q in quantiles} | {0})
        levels.append(lv)
    return [list(a) for a in product(*levels)]


def association_check(dist, chain, sigma, thresholds=None) -> AssociationResult:
    """Minimum covariance over pairs of signed upper-set indicators."""
    if thresholds is None:
        thresholds = default_thresholds(dist, chain)
    U = signed_upper_indicators(chain.states, sigma, thresholds)
    p = dist.pi
    m = p @ U
    C = U.T @ (U * p[:, None]) - np.outer(m, m)
    k = np.unravel_index(int(np.argmin(C)), C.shape)
    return AssociationResult(float(C[k]), (tuple(thresholds[k[0]]), tuple(thresholds[k[1]])), len(thresholds))


def write_figure_csv(reports, path):
    """Scatter data for the impossibility-region plot: one row per network."""
    width = max([len(r.components) for r in reports] + [2])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["name"] + [f"F{k}" for k in range(1, width + 1)] + ["weighted_sum", "verdict"])
        for r in reports:
            fs = [repr(float(f)) for f in r.fano] + [""] * (width - len(r.components))
            w.writerow([r.name] + fs + [repr(r.weighted_sum), r.verdict])
