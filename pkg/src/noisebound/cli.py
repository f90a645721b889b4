"""``noisebound`` command line: check, report, balance, simulate, couple, gen-suite.

Exit codes
----------
0  success (CERTIFIED / all PASS / balanced / no order violations)
1  usage, I/O, parse or admissibility error
2  negative outcome: FAILED hypotheses, frustrated graph, order violations
3  inconclusive: non-rigorous bounds, nonmonotone edges
4  pipeline failure: a report clause failed or a solver/simulator error
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from noisebound import __version__
from noisebound.errors import NoiseboundError, NonmonotoneError, NotOrderedError
from noisebound.exact import build_truncated_chain, dump_pi_csv, solve_stationary
from noisebound.hypotheses import CERTIFIED, FAILED, check_sufficient_conditions, lyapunov_drift_report
from noisebound.network import load_network, validate_network
from noisebound.observables import association_check, tradeoff_report, write_figure_csv
from noisebound.signed_graph import (
    check_structural_balance,
    extract_signed_graph,
    verify_signed_monotonicity,
    witness_is_valid,
)
from noisebound.simulation import couple_replicates, default_box, estimate_stationary_stats, simulate
from noisebound import suites

EXIT_OK, EXIT_ERROR, EXIT_NEGATIVE, EXIT_INCONCLUSIVE, EXIT_PIPELINE = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; here 2 means a negative verdict."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")

def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _write_json(args, path, payload):
    payload = dict(payload)
    payload["version"] = __version__
    if not args.no_timestamp:
        payload["created"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    path.write_text(json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n")
    return path


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args):
    """``[(Network, box | None)]`` from a file, a manifest or ``builtin:NAME``."""
    target = args.network
    if target.startswith("builtin:"):
        name = target.split(":", 1)[1]
        try:
            net = suites.builtin_network(name)
        except KeyError as exc:
            raise UsageError(str(exc.args[0])) from None
        return [(net, suites.BUILTIN_BOX.get(name))]
    path = Path(target)
    if not path.is_file():
        raise UsageError(f"network file not found: {target}")
    try:
        spec = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{target}: malformed JSON ({exc})") from None
    try:
        if isinstance(spec, dict) and "networks" in spec:
            return suites.load_manifest(path)
        return [(load_network(path), None)]
    except (ValueError, NoiseboundError) as exc:
        raise UsageError(f"{target}: {exc}") from None


def _single(args):
    entries = _load(args)
    if len(entries) != 1:
        raise UsageError("this command takes a single network, not a manifest")
    net, box = entries[0]
    findings = validate_network(net)
    if findings:
        raise UsageError("; ".join(f"{f.kind}: {f.detail}" for f in findings))
    return net, box


def _int_list(text, n, what):
    try:
        vals = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"--{what} must be comma-separated integers") from None
    if len(vals) != n:
        raise UsageError(f"--{what} needs {n} entries")
    return vals


def _positive(name, value):
    if value is not None and not value > 0:
        raise UsageError(f"--{name} must be positive")


# ---------------------------------------------------------------------------
# commands


def cmd_check(args):
    net, _ = _single(args)
    rep = check_sufficient_conditions(net)
    payload = {"network": net.to_dict(), "hypotheses": rep.to_dict()}
    if rep.certified:
        payload["drift"] = lyapunov_drift_report(net, margin=args.margin, report=rep).to_dict()
    _write_json(args, _out_dir(args) / f"{net.name or 'network'}.check.json", payload)
    print(f"{net.name}: {rep.verdict}" + (f" ({rep.reason})" if rep.reason else ""))
    if rep.verdict == CERTIFIED:
        return EXIT_OK
    return EXIT_NEGATIVE if rep.verdict == FAILED else EXIT_INCONCLUSIVE


def _box_for(args, net, box):
    if args.box and args.box != "auto":
        return _int_list(args.box, net.n_components, "box")
    if box is not None and args.box != "auto":
        return tuple(box)
    return default_box(net, seed=args.seed)


def cmd_report(args):
    _positive("tol", args.tol)
    entries = _load(args)
    out = _out_dir(args)
    reports, rows, failures = [], [], []
    for net, box in entries:
        entry = {"name": net.name, "network": net.to_dict()}
        try:
            findings = validate_network(net)
            if findings:
                raise UsageError("; ".join(f"{f.kind}: {f.detail}" for f in findings))
            hyp = check_sufficient_conditions(net)
            entry["hypotheses"] = hyp.to_dict()
            if not hyp.certified and not args.force:
                raise _ClauseError("hypotheses", f"network is {hyp.verdict}; pass --force to report anyway")
            caps = _box_for(args, net, box)
            entry["box"] = list(caps)
            chain = build_truncated_chain(net, caps)
            dist = solve_stationary(chain, method=args.method, tol=args.tol)
            entry["solve"] = dist.to_dict()
            rep = tradeoff_report(dist, chain, name=net.name)
            entry["tradeoff"] = rep.to_dict()
            entry["verdict"] = rep.verdict
            termwise = _termwise(net, dist, chain, rep)
            if termwise:
                entry["termwise"] = termwise
            rows.append(rep)
            if args.dump_pi:
                dump_pi_csv(dist, chain, out / f"{net.name}.pi.csv")
            if rep.verdict != "PASS":
                failures.append(f"{net.name}: {', '.join(rep.failed)}")
        except UsageError:
            raise
        except _ClauseError as exc:
            entry["verdict"] = "FAIL"
            entry["error"] = {"clause": exc.clause, "message": exc.message}
            failures.append(f"{net.name}: {exc.clause}: {exc.message}")
        except NoiseboundError as exc:
            entry["verdict"] = "FAIL"
            entry["error"] = {"clause": exc.code, "message": str(exc)}
            failures.append(f"{net.name}: {exc.code}: {exc}")
        reports.append(entry)
        print(f"{net.name}: {entry['verdict']}")
    _write_json(args, out / "report.json", {"reports": reports})
    write_figure_csv(rows, out / "figure.csv")
    for msg in failures:
        print(f"FAIL {msg}", file=sys.stderr)
    return EXIT_OK if not failures else EXIT_PIPELINE


def _termwise(net, dist, chain, rep):
    """Diagnostics for balanced networks: sigma, association and the smallest Fano factor."""
    g = extract_signed_graph(net)
    if g.nonmonotone_edges:
        return None
    res = check_structural_balance(g)
    if not res.balanced:
        return None
    assoc = association_check(dist, chain, res.sigma)
    return {
        "sigma": list(res.sigma),
        "association_min_cov": assoc.min_cov,
        "association_pair": [list(a) for a in assoc.pair],
        "min_fano": min(rep.fano),
    }


class _ClauseError(Exception):
    def __init__(self, clause, message):
        super().__init__(message)
        self.clause, self.message = clause, message


def cmd_balance(args):
    net, _ = _single(args)
    g = extract_signed_graph(net)
    out = _out_dir(args)
    (out / f"{net.name or 'network'}.graph.dot").write_text(g.to_dot())
    payload = {"network": net.to_dict(), "graph": g.to_dict()}
    try:
        res = check_structural_balance(g)
    except NonmonotoneError as exc:
        payload["error"] = {"clause": exc.code, "message": str(exc)}
        _write_json(args, out / f"{net.name or 'network'}.balance.json", payload)
        print(f"{net.name}: nonmonotone ({exc})")
        return EXIT_INCONCLUSIVE
    payload["balance"] = res.to_dict()
    if res.balanced:
        payload["max_monotonicity_violation"] = verify_signed_monotonicity(net, res.sigma, n_samples=args.samples)
        print(f"{net.name}: balanced, sigma = {res.sigma}")
    else:
        payload["witness_valid"] = witness_is_valid(g, res)
        print(f"{net.name}: frustrated, cycle {res.witness} with {res.negative_edges_in_witness} negative edges")
    _write_json(args, out / f"{net.name or 'network'}.balance.json", payload)
    return EXIT_OK if res.balanced else EXIT_NEGATIVE


def cmd_simulate(args):
    net, _ = _single(args)
    _positive("t-end", args.t_end)
    _positive("seeds", args.seeds)
    init = _int_list(args.init, net.n_components, "init") if args.init else None
    est = estimate_stationary_stats(
        net,
        args.t_end,
        burn_in=args.burn_in,
        n_batches=args.batches,
        seed=args.seed,
        init=init,
        n_replicates=args.seeds,
    )
    out = _out_dir(args)
    _write_json(args, out / f"{net.name or 'network'}.simulate.json", {"network": net.to_dict(), "estimate": est.to_dict()})
    if args.dump_trajectory:
        simulate(net, init, args.t_end, seed=args.seed).to_csv(out / f"{net.name or 'network'}.trajectory.csv")
    for i in range(net.n_components):
        print(f"x{i + 1}: mean {est.mean[i]:.6g} +- {est.mean_se[i]:.2g}, fano {est.fano[i]:.6g} +- {est.fano_se[i]:.2g}")
    return EXIT_OK


def cmd_couple(args):
    net, _ = _single(args)
    _positive("t-end", args.t_end)
    _positive("seeds", args.seeds)
    N = net.n_components
    if args.sigma:
        try:
            sigma = tuple(int(v) for v in args.sigma.split(","))
        except ValueError:
            raise UsageError("--sigma must be comma-separated +-1 entries") from None
        if len(sigma) != N or any(s not in (-1, 1) for s in sigma):
            raise UsageError(f"--sigma needs {N} entries in {{-1, 1}}")
    else:
        try:
            res = check_structural_balance(extract_signed_graph(net))
        except NonmonotoneError as exc:
            raise UsageError(f"cannot infer sigma: {exc}") from None
        if not res.balanced:
            raise UsageError("network is frustrated; pass --sigma explicitly")
        sigma = res.sigma
    low, high = 0, args.spread
    x0 = _int_list(args.x0, N, "x0") if args.x0 else tuple(low if s > 0 else high for s in sigma)
    y0 = _int_list(args.y0, N, "y0") if args.y0 else tuple(high if s > 0 else low for s in sigma)
    try:
        summary = couple_replicates(net, sigma, x0, y0, args.t_end, args.seeds, seed=args.seed)
    except NotOrderedError as exc:
        raise UsageError(str(exc)) from None
    payload = {
        "network": net.to_dict(),
        "sigma": list(sigma),
        "x0": list(x0),
        "y0": list(y0),
        "t_end": args.t_end,
        "summary": summary.to_dict(),
    }
    _write_json(args, _out_dir(args) / f"{net.name or 'network'}.couple.json", payload)
    print(f"{net.name}: {summary.n_runs} runs, {summary.n_violations} order violations")
    return EXIT_OK if summary.n_violations == 0 else EXIT_NEGATIVE


def cmd_gen_suite(args):
    entries = suites.random_certified_suite(args.count) if args.kind == "certified" else suites.random_balanced_suite(args.count)
    path = Path(args.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    suites.write_manifest(entries, path)
    print(f"wrote {len(entries)} networks to {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser():
    p = _Parser(prog="noisebound", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"noisebound {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, network=True):
        if network:
            sp.add_argument("--network", required=True, help="network JSON, suite manifest, or builtin:NAME")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--no-timestamp", action="store_true", help="omit the creation time for byte-stable output")
        sp.add_argument("--seed", type=int, default=0, help="master random seed")

    sp = sub.add_parser("check", help="certify the standing hypotheses")
    common(sp)
    sp.add_argument("--margin", type=int, default=40, help="extra radius for the empirical drift check")
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("report", help="exact solve and tradeoff report")
    common(sp)
    sp.add_argument("--box", help="caps M1,M2,... or 'auto'")
    sp.add_argument("--tol", type=float, default=1e-12, help="stationary residual tolerance")
    sp.add_argument("--method", choices=["auto", "power", "direct"], default="auto")
    sp.add_argument("--force", action="store_true", help="report networks that are not certified")
    sp.add_argument("--dump-pi", action="store_true", help="also write the stationary law as CSV")
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("balance", help="signed graph and structural balance")
    common(sp)
    sp.add_argument("--samples", type=int, default=10_000)
    sp.set_defaults(func=cmd_balance)

    sp = sub.add_parser("simulate", help="SSA stationary estimates")
    common(sp)
    sp.add_argument("--t-end", type=float, default=1e4)
    sp.add_argument("--burn-in", type=float, default=None)
    sp.add_argument("--batches", type=int, default=20)
    sp.add_argument("--seeds", type=int, default=1, help="number of independent replicates")
    sp.add_argument("--init", help="initial state n1,n2,...")
    sp.add_argument("--dump-trajectory", action="store_true")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("couple", help="split coupling order test")
    common(sp)
    sp.add_argument("--sigma", help="signature s1,s2,... (default: from the balance check)")
    sp.add_argument("--x0")
    sp.add_argument("--y0")
    sp.add_argument("--spread", type=int, default=5, help="offset between default initial states")
    sp.add_argument("--t-end", type=float, default=100.0)
    sp.add_argument("--seeds", type=int, default=100)
    sp.set_defaults(func=cmd_couple)

    sp = sub.add_parser("gen-suite", help="write a random network manifest")
    sp.add_argument("--kind", choices=["certified", "balanced"], default="certified")
    sp.add_argument("--count", type=int, default=None)
    sp.add_argument("--out", required=True, help="manifest path")
    sp.set_defaults(func=cmd_gen_suite)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "count", 0) is None:
        args.count = 50 if args.kind == "certified" else 20
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"noisebound: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"noisebound: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except NoiseboundError as exc:
        print(f"noisebound: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
