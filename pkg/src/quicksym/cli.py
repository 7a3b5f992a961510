"""Command-line interface.

Exit status: 0 on success, 1 when input validation fails, 2 when a
verification (sign sweep, table check, statistical check) fails.  Every
subcommand accepts its flags from a JSON file via the global ``--config``
option (keys are flag names; flags given on the command line win).  The
default seed comes from ``$QUICKSYM_SEED`` when set.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import platform
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy

from . import __version__, covdp, exact, lemmas, mc
from .plot import Reference, Series, emit_plot
from .source import SourceError, SourceModel, condition_partial_sum, parse_source, prefix_prob

__all__ = ["main", "build_parser", "summarize_runs", "EXIT_OK", "EXIT_INVALID", "EXIT_VERIFY"]

EXIT_OK, EXIT_INVALID, EXIT_VERIFY = 0, 1, 2
SEED_ENV = "QUICKSYM_SEED"
DEFAULT_SOURCE = "memoryless:0.5,0.5"
FLOAT_TABLE_TOL = 1e-9


class UsageError(Exception):
    """Bad flags or inputs; maps to exit status 1."""


class VerificationFailure(Exception):
    """A check ran and failed; maps to exit status 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


# -- flag types -----------------------------------------------------------------


def _number(text: str) -> float:
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _positive(text: str) -> float:
    v = _number(text)
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return v


def _nonneg(text: str) -> float:
    v = _number(text)
    if not (v >= 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be nonnegative: {text!r}")
    return v


def _times(text: str) -> list[float]:
    times = [_positive(x) for x in text.split(",") if x.strip()]
    if not times:
        raise argparse.ArgumentTypeError(f"no times in {text!r}")
    return times


def _count(minimum: int):
    def parse(text: str) -> int:
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
        if v < minimum:
            raise argparse.ArgumentTypeError(f"must be at least {minimum}: {text!r}")
        return v

    return parse


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"${SEED_ENV} is not an integer: {raw!r}") from None


# -- parser -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="quicksym", description="QuickSort symbol-comparison cost: simulation and exact checks.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--config", metavar="JSON", help="read flags for the subcommand from a JSON object")
    p.add_argument("--error-json", action="store_true", help="report failures as JSON on stderr")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")
    seed = _default_seed()

    s = sub.add_parser("simulate", help="Poissonized Monte Carlo runs to CSV")
    s.add_argument("--source", default=DEFAULT_SOURCE)
    s.add_argument("--t", type=_times, required=True, help="time or comma-separated times")
    s.add_argument("--runs", type=_count(1), default=1000)
    s.add_argument("--seed", type=int, default=seed)
    s.add_argument("--depth", type=_count(0), default=3, help="trie depth recorded per run")
    s.add_argument("--depth-cap", type=_count(1), default=64)
    s.add_argument("--jobs", type=_count(1), default=1)
    s.add_argument("--out", required=True, help="CSV path; metadata goes to OUT.json")

    s = sub.add_parser("exact-stats", help="exact moments of the key-comparison count")
    s.add_argument("--n", type=_count(0))
    s.add_argument("--t", type=_nonneg)
    s.add_argument("--source", help="also report E S(t) for this source")

    s = sub.add_parser("sweep-lemmas", help="exact sign sweep of the lemma quantities")
    s.add_argument("--nmax", type=_count(1), default=40)
    s.add_argument("--out", help="write the JSON report here")

    s = sub.add_parser("cov-table", help="conditional covariance table")
    s.add_argument("--nmax", type=_count(0), required=True)
    s.add_argument("--mode", choices=["exact", "float"], default="exact")
    s.add_argument("--out", help="CSV path")
    s.add_argument("--verify", metavar="PATH", help="compare an existing CSV against a recomputation")

    s = sub.add_parser("cov-poisson", help="Cov(K(t), S_w(t)) by series")
    s.add_argument("--pw", type=_nonneg, required=True)
    s.add_argument("--pwminus", type=_nonneg, default=0.0)
    s.add_argument("--t", type=_nonneg, required=True)
    s.add_argument("--tol", type=_positive, default=1e-10)
    s.add_argument("--ncap", type=_count(1))

    s = sub.add_parser("check-distribution", help="compare S_w(t) with K(p_w t)")
    s.add_argument("--source", default=DEFAULT_SOURCE)
    s.add_argument("--w", required=True, help="prefix; use '' for the empty prefix")
    s.add_argument("--t", type=_positive, required=True)
    s.add_argument("--runs", type=_count(3), default=4000)
    s.add_argument("--seed", type=int, default=seed)
    s.add_argument("--resamples", type=_count(9), default=999)
    s.add_argument("--jobs", type=_count(1), default=1)

    s = sub.add_parser("check-condition", help="partial sums of the summability condition")
    s.add_argument("--source", default=DEFAULT_SOURCE)
    s.add_argument("--depth", type=_count(0), required=True)
    s.add_argument("--reference", type=_number, help="expected value; exit 2 if farther than --tol")
    s.add_argument("--tol", type=_positive, default=1e-9)

    s = sub.add_parser("report", help="summaries and plot from a simulate CSV")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--source", help="override the source recorded in the metadata")
    s.add_argument("--out", help="write the JSON summary here")
    s.add_argument("--plot", help="write a Var Y(t) vs t SVG here")
    return p


def _split_config(argv: list[str]) -> tuple[list[str], str | None]:
    out, path = [], None
    i = 0
    while i < len(argv):
        a = argv[i]
        if a == "--config":
            if i + 1 >= len(argv):
                raise UsageError("--config needs a path")
            path = argv[i + 1]
            i += 2
            continue
        if a.startswith("--config="):
            path = a.split("=", 1)[1]
        else:
            out.append(a)
        i += 1
    return out, path


def _config_tokens(path: str) -> list[str]:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    tokens: list[str] = []
    for key, val in data.items():
        flag = "--" + key.replace("_", "-")
        if isinstance(val, bool):
            if val:
                tokens.append(flag)
        elif isinstance(val, list):
            tokens += [flag, ",".join(str(v) for v in val)]
        elif val is not None:
            tokens += [flag, str(val)]
    return tokens


def parse_args(argv: Sequence[str]) -> argparse.Namespace:
    parser = build_parser()
    argv, cfg = _split_config(list(argv))
    if cfg is not None:
        commands = set(parser._subparsers._group_actions[0].choices)
        pos = next((i for i, a in enumerate(argv) if a in commands), None)
        if pos is None:
            raise UsageError("--config needs a subcommand")
        # config flags first so that explicit flags override them
        argv = argv[: pos + 1] + _config_tokens(cfg) + argv[pos + 1 :]
    args = parser.parse_args(argv)
    args.config = cfg
    return args


# -- helpers ------------------------------------------------------------------------


def _source(spec: str) -> SourceModel:
    try:
        return parse_source(spec)
    except SourceError as exc:
        raise UsageError(str(exc)) from None


def _writable(path: str | None) -> None:
    if path is None:
        return
    parent = Path(path).resolve().parent
    if not parent.is_dir():
        raise UsageError(f"directory for {path} does not exist")


def _readable(path: str) -> None:
    if not Path(path).is_file():
        raise UsageError(f"no such file: {path}")


def _frac(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def _emit(obj: dict, path: str | None = None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path:
        Path(path).write_text(text + "\n")
    print(text)


def _metadata(args: argparse.Namespace, started: float) -> dict:
    echo = {k: v for k, v in vars(args).items() if k not in ("error_json",)}
    return {
        "config": echo,
        "versions": {
            "quicksym": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "wall_time_s": round(time.time() - started, 3),
    }


def summarize_runs(records: Sequence[mc.RunRecord], source: SourceModel) -> dict:
    """Summary of one time's runs: Y(t) moments (exactly centred) and K(t) calibration."""
    t = records[0].t
    depth = len(records[0].level_counts) - 1
    est = mc.estimate_Y(records, exact.mean_S_poisson(source, t), exact.mean_S_levels(source, t, depth))
    k = np.array([r.key_comparisons for r in records], dtype=float)
    n = np.array([r.n_keys for r in records], dtype=float)
    k_mean = mc.mean_and_se(k)
    k_var = mc.jackknife_cov(k, k) if len(k) >= 3 else None
    return {
        "t": t,
        "runs": len(records),
        "n_keys_mean": mc.mean_and_se(n).__dict__,
        "K_mean": k_mean.__dict__,
        "K_mean_exact": exact.mean_K_poisson(t),
        "K_var": None if k_var is None else k_var.__dict__,
        "K_var_exact": exact.var_K_poisson(t),
        "Y": est.to_dict(),
    }


def _group_by_t(records: Sequence[mc.RunRecord]) -> dict[float, list[mc.RunRecord]]:
    groups: dict[float, list[mc.RunRecord]] = {}
    for r in records:
        groups.setdefault(r.t, []).append(r)
    return groups


# -- commands -------------------------------------------------------------------------


def cmd_simulate(args, started: float) -> int:
    source = _source(args.source)
    if args.depth > args.depth_cap:
        raise UsageError("--depth may not exceed --depth-cap")
    if args.runs < 3:
        raise UsageError("--runs must be at least 3 for variance estimates")
    _writable(args.out)
    records: list[mc.RunRecord] = []
    summaries = []
    for t in args.t:
        cfg = mc.ExperimentConfig(source, t, args.runs, args.seed, args.depth, args.depth_cap)
        recs = mc.run_experiment(cfg, args.jobs)
        records += recs
        summaries.append(summarize_runs(recs, source))
    mc.write_records_csv(records, args.out, source)
    meta = _metadata(args, started)
    meta["summaries"] = summaries
    Path(args.out + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    _emit({"out": args.out, "summaries": summaries})
    return EXIT_OK


def cmd_exact_stats(args, started: float) -> int:
    if args.n is None and args.t is None:
        raise UsageError("exact-stats needs --n and/or --t")
    source = _source(args.source) if args.source else None
    out: dict = {"sigma_sq": exact.sigma_sq()}
    if args.n is not None:
        kap, var = exact.kappa(args.n), exact.var_K(args.n)
        out["n"] = {
            "n": args.n,
            "kappa": _frac(kap),
            "kappa_float": float(kap),
            "var_K": _frac(var),
            "var_K_float": float(var),
            "var_K_over_n2": float(var) / args.n**2 if args.n else None,
        }
    if args.t is not None:
        t = args.t
        out["t"] = {
            "t": t,
            "n_max": exact.default_n_max(t),
            "mean_K": exact.mean_K_poisson(t),
            "expected_conditional_var_K": exact.expected_conditional_var_K(t),
            "var_K": exact.var_K_poisson(t),
        }
        if source is not None:
            out["t"]["mean_S"] = exact.mean_S_poisson(source, t)
    _emit(out)
    return EXIT_OK


def cmd_sweep_lemmas(args, started: float) -> int:
    _writable(args.out)
    rep = lemmas.sweep_signs(args.nmax)
    out = rep.to_dict()
    out["wall_time_s"] = round(time.time() - started, 3)
    _emit(out, args.out)
    if not rep.ok:
        raise VerificationFailure(f"{rep.total_counterexamples} counterexamples up to n={args.nmax}")
    return EXIT_OK


def _compare_tables(found: dict, table: covdp.CovTable) -> list[dict]:
    expected = dict(table.items())
    bad = []
    for key in sorted(set(found) | set(expected)):
        a, b = found.get(key), expected.get(key)
        if a is None or b is None:
            bad.append({"state": list(key), "problem": "missing" if a is None else "unexpected"})
            continue
        same = a == b if table.exact else abs(float(a) - float(b)) <= 1e-12 * max(1.0, abs(float(b)))
        if not same:
            bad.append({"state": list(key), "found": str(a), "expected": str(b)})
    return bad


def cmd_cov_table(args, started: float) -> int:
    _writable(args.out)
    found = None
    if args.verify:
        _readable(args.verify)
        try:
            found = covdp.read_table_csv(args.verify)
        except (KeyError, ValueError, TypeError, ZeroDivisionError) as exc:
            raise VerificationFailure(f"{args.verify} is not a valid table: {exc}") from None
    table = covdp.cov_table(args.nmax, args.mode)
    lo = table.min_value()
    out: dict = {
        "n_max": args.nmax,
        "mode": args.mode,
        "entries": sum(1 for _ in table.items()),
        "min_value": _frac(lo) if table.exact else lo,
    }
    nonneg = lo >= 0 if table.exact else lo >= -FLOAT_TABLE_TOL
    out["nonnegative"] = nonneg
    if args.out:
        covdp.write_table_csv(table, args.out)
        out["out"] = args.out
    failures = []
    if found is not None:
        mismatches = _compare_tables(found, table)
        out["verify"] = {"path": args.verify, "mismatches": mismatches[:20], "mismatch_count": len(mismatches)}
        if mismatches:
            failures.append(f"{len(mismatches)} mismatching entries in {args.verify}")
    if not nonneg:
        failures.append(f"negative table entry {out['min_value']}")
    _emit(out)
    if failures:
        raise VerificationFailure("; ".join(failures))
    return EXIT_OK


def cmd_cov_poisson(args, started: float) -> int:
    if args.pw > 1 or args.pw + args.pwminus > 1 + 1e-12:
        raise UsageError("need p_w + p_wminus <= 1")
    try:
        br = covdp.cov_K_Sw_breakdown(args.pw, args.pwminus, args.t, args.tol, args.ncap)
    except covdp.TruncationError as exc:
        raise VerificationFailure(str(exc)) from None
    out = {k: float(v) if isinstance(v, (float, np.floating)) else v for k, v in br.__dict__.items()}
    out["value"] = br.value
    out["error_bound"] = br.error_bound
    _emit(out)
    if br.value < -FLOAT_TABLE_TOL:
        raise VerificationFailure(f"negative covariance {br.value}")
    return EXIT_OK


def cmd_check_distribution(args, started: float) -> int:
    source = _source(args.source)
    try:
        w = source.alphabet.parse(args.w)
    except SourceError as exc:
        raise UsageError(str(exc)) from None
    if prefix_prob(source, w) == 0:
        raise UsageError("prefix has probability 0")
    rep = mc.check_Sw_equals_K_scaled(source, w, args.t, args.runs, args.seed, args.jobs, args.resamples)
    out = rep.to_dict()
    out["source"] = args.source
    _emit(out)
    if not rep.passed:
        raise VerificationFailure(f"S_w(t) and K(p_w t) differ (z={rep.z_mean:.3g}, p={rep.p_value:.3g})")
    return EXIT_OK


def cmd_check_condition(args, started: float) -> int:
    source = _source(args.source)
    total = condition_partial_sum(source, args.depth)
    prev = condition_partial_sum(source, args.depth - 1) if args.depth else 0.0
    out = {"source": args.source, "depth": args.depth, "partial_sum": total, "last_term": total - prev}
    if args.reference is not None:
        out["reference"] = args.reference
        out["abs_error"] = abs(total - args.reference)
        out["within_tol"] = out["abs_error"] <= args.tol
    _emit(out)
    if args.reference is not None and not out["within_tol"]:
        raise VerificationFailure(f"partial sum off by {out['abs_error']:.3g} > {args.tol:g}")
    return EXIT_OK


def cmd_report(args, started: float) -> int:
    _readable(args.input)
    _writable(args.out)
    _writable(args.plot)
    meta_path = Path(args.input + ".json")
    meta = json.loads(meta_path.read_text()) if meta_path.is_file() else {}
    spec = args.source or meta.get("config", {}).get("source")
    if spec is None:
        raise UsageError(f"no source recorded in {meta_path}; pass --source")
    source = _source(spec)
    try:
        records = mc.read_records_csv(args.input, source)
    except (ValueError, IndexError, SourceError) as exc:
        raise UsageError(f"cannot read {args.input}: {exc}") from None
    if not records:
        raise UsageError(f"{args.input} holds no runs")
    summaries = [summarize_runs(recs, source) for recs in _group_by_t(records).values()]
    out = {"input": args.input, "source": spec, "summaries": summaries}
    if args.plot:
        ts = [s["t"] for s in summaries]
        vs = [s["Y"]["variances"]["Y"]["value"] for s in summaries]
        emit_plot(
            [Series("Var Y(t) estimate", ts, vs)],
            args.plot,
            [Reference("sigma^2 = 7 - 2 pi^2/3", exact.sigma_sq())],
            title="Variance of the scaled symbol-comparison cost",
            xlabel="t",
            ylabel="Var Y(t)",
        )
        out["plot"] = args.plot
    _emit(out, args.out)
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "exact-stats": cmd_exact_stats,
    "sweep-lemmas": cmd_sweep_lemmas,
    "cov-table": cmd_cov_table,
    "cov-poisson": cmd_cov_poisson,
    "check-distribution": cmd_check_distribution,
    "check-condition": cmd_check_condition,
    "report": cmd_report,
}


def _report_error(kind: str, message: str, code: int, as_json: bool) -> int:
    if as_json:
        print(json.dumps({"error": kind, "message": message, "exit_code": code}), file=sys.stderr)
    else:
        print(f"quicksym: {kind}: {message}", file=sys.stderr)
    return code


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    as_json = "--error-json" in argv
    started = time.time()
    try:
        args = parse_args(argv)
        return COMMANDS[args.command](args, started)
    except UsageError as exc:
        return _report_error("validation", str(exc), EXIT_INVALID, as_json)
    except VerificationFailure as exc:
        return _report_error("verification", str(exc), EXIT_VERIFY, as_json)
    except OSError as exc:
        return _report_error("io", str(exc), EXIT_INVALID, as_json)


if __name__ == "__main__":
    sys.exit(main())
