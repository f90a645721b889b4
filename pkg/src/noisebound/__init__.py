"""Fano-factor tradeoffs for unit-birth gene regulatory networks."""

from noisebound.errors import NoiseboundError
from noisebound.exact import build_truncated_chain, solve_stationary
from noisebound.hypotheses import check_sufficient_conditions, lyapunov_drift_report
from noisebound.network import Network, State, enumerate_transitions, load_network, total_rate, validate_network
from noisebound.observables import association_check, component_stats, tradeoff_report
from noisebound.rate_expr import analyze_bounds, analyze_monotonicity, eval_rate, parse_rate_expr
from noisebound.signed_graph import check_structural_balance, extract_signed_graph, verify_signed_monotonicity
from noisebound.simulation import estimate_stationary_stats, simulate, simulate_split_coupling

__version__ = "0.1.0"

__all__ = [
    "NoiseboundError",
    "Network",
    "State",
    "parse_rate_expr",
    "eval_rate",
    "analyze_monotonicity",
    "analyze_bounds",
    "enumerate_transitions",
    "total_rate",
    "load_network",
    "validate_network",
    "check_sufficient_conditions",
    "lyapunov_drift_report",
    "build_truncated_chain",
    "solve_stationary",
    "component_stats",
    "tradeoff_report",
    "association_check",
    "simulate",
    "estimate_stationary_stats",
    "simulate_split_coupling",
    "extract_signed_graph",
    "check_structural_balance",
    "verify_signed_monotonicity",
]
