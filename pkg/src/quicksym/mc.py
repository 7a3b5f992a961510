"""Poissonized Monte Carlo: sample ``N(t)`` keys, sort them, record the costs.

Run ``r`` of an experiment draws ``N ~ Poisson(t)`` from a generator seeded
with ``(master_seed, r)`` and the keys themselves from the stream
``derive_seed(master_seed, r)``, so every run is a pure function of the
config and its index.  Parallel execution only changes who computes a run,
never its result.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np
from scipy import stats

from . import exact
from .keys import DEFAULT_DEPTH_CAP, _MASK, derive_seed, generate_keys
from .sorter import quicksort_instrumented
from .source import (
    Prefix,
    PrefixLike,
    SourceModel,
    conditioned_source,
    iter_prefixes,
    prefix_prob,
)

__all__ = [
    "ExperimentConfig",
    "RunRecord",
    "Stat",
    "Estimates",
    "run_one",
    "run_experiment",
    "mean_and_se",
    "jackknife_cov",
    "estimate_Y",
    "estimate_prefix_covariances",
    "estimate_moments",
    "DistributionReport",
    "check_Sw_equals_K_scaled",
    "MomentCheck",
    "ReductionReport",
    "check_conditioned_reduction",
    "ecdf_distance",
    "prefix_column",
    "write_records_csv",
    "read_records_csv",
]

PASS_SE = 3.0


@dataclass(frozen=True)
class ExperimentConfig:
    """One Poissonized experiment: ``runs`` independent draws at time ``t``."""

    source: SourceModel
    t: float
    runs: int
    master_seed: int
    trie_depth: int = 3
    depth_cap: int = DEFAULT_DEPTH_CAP

    def __post_init__(self) -> None:
        if not self.t > 0 or not math.isfinite(self.t):
            raise ValueError(f"t must be a positive finite number, got {self.t}")
        if self.runs < 1:
            raise ValueError(f"runs must be at least 1, got {self.runs}")
        if self.depth_cap < 1:
            raise ValueError("depth_cap must be at least 1")
        if not 0 <= self.trie_depth <= self.depth_cap:
            raise ValueError(f"need 0 <= trie_depth <= depth_cap, got {self.trie_depth} and {self.depth_cap}")


@dataclass
class RunRecord:
    """Counts from one run.  ``level_counts[k]`` is ``S_k(t)`` for ``k <= trie_depth``."""

    run_index: int
    t: float
    n_keys: int
    key_comparisons: int
    total_symbols: int
    prefix_counts: dict[Prefix, int] = field(default_factory=dict)
    level_counts: list[int] = field(default_factory=list)

    def count(self, w: Prefix) -> int:
        return self.prefix_counts.get(w, 0)


def run_one(config: ExperimentConfig, run_index: int) -> RunRecord:
    rng = np.random.default_rng([config.master_seed & _MASK, run_index])
    n = int(rng.poisson(config.t))
    keys = generate_keys(config.source, derive_seed(config.master_seed, run_index), n)
    tally = quicksort_instrumented(keys, config.depth_cap, config.trie_depth)
    levels = tally.level_counts[: config.trie_depth + 1]
    levels += [0] * (config.trie_depth + 1 - len(levels))
    return RunRecord(
        run_index=run_index,
        t=config.t,
        n_keys=n,
        key_comparisons=tally.key_comparisons,
        total_symbols=tally.total_symbol_comparisons,
        prefix_counts=tally.prefix_counts,
        level_counts=levels,
    )


def _run_chunk(config: ExperimentConfig, indices: range) -> list[RunRecord]:
    return [run_one(config, r) for r in indices]


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> list[RunRecord]:
    """All runs of ``config`` in run-index order; ``jobs > 1`` uses worker processes."""
    if jobs < 1:
        raise ValueError("jobs must be at least 1")
    if jobs == 1 or config.runs < 2 * jobs:
        return _run_chunk(config, range(config.runs))
    size = math.ceil(config.runs / (4 * jobs))
    chunks = [range(lo, min(lo + size, config.runs)) for lo in range(0, config.runs, size)]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        parts = pool.map(_run_chunk, [config] * len(chunks), chunks)
        return [rec for part in parts for rec in part]


# -- estimators ---------------------------------------------------------------


@dataclass(frozen=True)
class Stat:
    value: float
    se: float
    runs: int

    def z(self, reference: float) -> float:
        diff = self.value - reference
        if self.se == 0:
            return 0.0 if diff == 0 else math.copysign(math.inf, diff)
        return diff / self.se


@dataclass
class Estimates:
    """Means, variances and covariances with standard errors, keyed by statistic name."""

    runs: int
    means: dict[str, Stat] = field(default_factory=dict)
    variances: dict[str, Stat] = field(default_factory=dict)
    covariances: dict[tuple[str, str], Stat] = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "runs": self.runs,
            "means": {k: asdict(v) for k, v in self.means.items()},
            "variances": {k: asdict(v) for k, v in self.variances.items()},
            "covariances": {f"{a}|{b}": asdict(v) for (a, b), v in self.covariances.items()},
            "info": self.info,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def mean_and_se(x: np.ndarray) -> Stat:
    x = np.asarray(x, dtype=float)
    r = len(x)
    if r == 0:
        raise ValueError("no runs")
    se = float(np.std(x, ddof=1) / math.sqrt(r)) if r > 1 else math.inf
    return Stat(float(np.mean(x)), se, r)


def jackknife_cov(x: np.ndarray, y: np.ndarray) -> Stat:
    """Sample covariance (ddof=1) with its leave-one-out jackknife standard error."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = len(x)
    if r != len(y):
        raise ValueError("samples differ in length")
    if r < 3:
        raise ValueError("need at least 3 runs for a jackknife covariance")
    xc = x - x.mean()
    yc = y - y.mean()
    sxy = float(np.dot(xc, yc))
    full = sxy / (r - 1)
    # leave-one-out: remaining centered sums are -xc_i, -yc_i
    loo = (sxy - xc * yc - xc * yc / (r - 1)) / (r - 2)
    se = math.sqrt((r - 1) / r * float(np.sum((loo - loo.mean()) ** 2)))
    return Stat(full, se, r)


def estimate_moments(columns: dict[str, np.ndarray], pairs: Iterable[tuple[str, str]] = ()) -> Estimates:
    """Mean (plain SE), variance and covariances (jackknife SE) of named per-run columns."""
    runs = len(next(iter(columns.values())))
    est = Estimates(runs)
    for name, x in columns.items():
        est.means[name] = mean_and_se(x)
        est.variances[name] = jackknife_cov(x, x)
    for a, b in pairs:
        est.covariances[(a, b)] = jackknife_cov(columns[a], columns[b])
    return est


def _times(records: Sequence[RunRecord]) -> float:
    ts = {rec.t for rec in records}
    if len(ts) != 1:
        raise ValueError(f"records mix several times t: {sorted(ts)}")
    return ts.pop()


def estimate_Y(
    records: Sequence[RunRecord],
    mean_S: float | None = None,
    level_means: Sequence[float] | None = None,
) -> Estimates:
    """Statistics of ``Y(t) = (S(t) - E S(t)) / t`` and of its level parts ``Y_k(t)``.

    Without ``mean_S`` the sample mean is used for centering and the result
    is flagged ``centering = "pooled"``.  Levels deeper than the recorded
    trie are lumped into ``Y_rest``.  The sum of level variances is reported
    alongside ``Var Y`` for comparison only.
    """
    t = _times(records)
    s = np.array([rec.total_symbols for rec in records], dtype=float)
    pooled = mean_S is None
    centre = float(s.mean()) if pooled else float(mean_S)
    cols = {"Y": (s - centre) / t}
    depth = len(records[0].level_counts) - 1
    lv = np.array([rec.level_counts for rec in records], dtype=float).reshape(len(records), depth + 1)
    if level_means is None or pooled:
        level_centres = lv.mean(axis=0)
    else:
        level_centres = np.asarray(level_means[: depth + 1], dtype=float)
    for k in range(depth + 1):
        cols[f"Y_{k}"] = (lv[:, k] - level_centres[k]) / t
    rest = s - lv.sum(axis=1)
    cols["Y_rest"] = (rest - (centre - float(level_centres.sum()))) / t
    est = estimate_moments(cols)
    est.info = {
        "t": t,
        "centering": "pooled" if pooled else "exact",
        "mean_S": centre,
        "trie_depth": depth,
        "sum_level_variances": math.fsum(est.variances[f"Y_{k}"].value for k in range(depth + 1))
        + est.variances["Y_rest"].value,
    }
    return est


def _prefix_name(w: Prefix) -> str:
    return "S[" + ",".join(str(s) for s in w) + "]"


def estimate_prefix_covariances(records: Sequence[RunRecord], prefixes: Sequence[Prefix]) -> Estimates:
    """Covariance matrix of ``S_w(t)`` over ``prefixes`` (every unordered pair, diagonal included)."""
    depth = len(records[0].level_counts) - 1
    prefixes = [tuple(w) for w in prefixes]
    for w in prefixes:
        if len(w) > depth:
            raise ValueError(f"prefix {w} deeper than the recorded trie depth {depth}")
    cols = {_prefix_name(w): np.array([rec.count(w) for rec in records], dtype=float) for w in prefixes}
    names = list(cols)
    pairs = [(names[i], names[j]) for i in range(len(names)) for j in range(i, len(names))]
    return estimate_moments(cols, pairs)


# -- distributional checks ----------------------------------------------------


def ecdf_distance(x: np.ndarray, y: np.ndarray) -> float:
    """Largest gap between the two empirical CDFs (ties handled exactly)."""
    xs = np.sort(np.asarray(x))
    ys = np.sort(np.asarray(y))
    grid = np.union1d(xs, ys)
    fx = np.searchsorted(xs, grid, side="right") / len(xs)
    fy = np.searchsorted(ys, grid, side="right") / len(ys)
    return float(np.max(np.abs(fx - fy))) if len(grid) else 0.0


def _permutation_pvalue(x: np.ndarray, y: np.ndarray, seed: int, resamples: int) -> float:
    if np.array_equal(np.sort(x), np.sort(y)):
        return 1.0
    res = stats.permutation_test(
        (x, y),
        lambda a, b: ecdf_distance(a, b),
        permutation_type="independent",
        alternative="greater",
        n_resamples=resamples,
        vectorized=False,
        random_state=np.random.default_rng([seed & _MASK, 0x5EED]),
    )
    return float(res.pvalue)


@dataclass
class DistributionReport:
    """``S_w(t)`` under the source against ``K(p_w t)`` from a separate experiment."""

    prefix: str
    t: float
    p_w: float
    runs: int
    seed: int
    mean_sw: Stat
    mean_k: Stat
    z_mean: float
    var_ratio: float
    ks_distance: float
    p_value: float
    alpha: float = 0.01

    @property
    def passed(self) -> bool:
        return abs(self.z_mean) <= PASS_SE and self.p_value > self.alpha

    def to_dict(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out


def check_Sw_equals_K_scaled(
    source: SourceModel,
    w: PrefixLike,
    t: float,
    runs: int,
    seed: int,
    jobs: int = 1,
    resamples: int = 999,
) -> DistributionReport:
    """Two-sample comparison of ``S_w(t)`` and ``K(p_w t)``.

    Side A is an experiment under ``source`` at time ``t``; side B is an
    independent experiment at time ``p_w t`` whose key comparisons are
    recorded.  For the empty prefix both sides are the same experiment.
    """
    w = source.alphabet.parse(w)
    p_w = float(prefix_prob(source, w))
    if p_w <= 0:
        raise ValueError("prefix has probability 0")
    cfg_a = ExperimentConfig(source, t, runs, seed, trie_depth=len(w))
    rec_a = run_experiment(cfg_a, jobs)
    xa = np.array([rec.count(w) for rec in rec_a], dtype=float)
    if not w:
        xb = np.array([rec.key_comparisons for rec in rec_a], dtype=float)
    else:
        cfg_b = ExperimentConfig(source, p_w * t, runs, derive_seed(seed, 0xB), trie_depth=0)
        xb = np.array([rec.key_comparisons for rec in run_experiment(cfg_b, jobs)], dtype=float)
    ma, mb = mean_and_se(xa), mean_and_se(xb)
    se = math.hypot(ma.se, mb.se)
    diff = ma.value - mb.value
    z = 0.0 if diff == 0 else (diff / se if se > 0 else math.copysign(math.inf, diff))
    va, vb = float(np.var(xa, ddof=1)), float(np.var(xb, ddof=1))
    ratio = va / vb if vb > 0 else (1.0 if va == 0 else math.inf)
    return DistributionReport(
        prefix=source.alphabet.format(w),
        t=t,
        p_w=p_w,
        runs=runs,
        seed=seed,
        mean_sw=ma,
        mean_k=mb,
        z_mean=z,
        var_ratio=ratio,
        ks_distance=ecdf_distance(xa, xb),
        p_value=_permutation_pvalue(xa, xb, seed, resamples),
    )


@dataclass(frozen=True)
class MomentCheck:
    name: str
    full: Stat
    conditioned: Stat

    @property
    def z(self) -> float:
        diff = self.full.value - self.conditioned.value
        se = math.hypot(self.full.se, self.conditioned.se)
        if diff == 0:
            return 0.0
        return diff / se if se > 0 else math.copysign(math.inf, diff)

    @property
    def passed(self) -> bool:
        return abs(self.z) <= PASS_SE


@dataclass
class ReductionReport:
    """Joint moments of ``(S_{w'}(t), S_{w'w''}(t))`` against the conditioned-source pair."""

    w1: str
    w2: str
    t: float
    p_w1: float
    runs: int
    seed: int
    checks: list[MomentCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "w1": self.w1,
            "w2": self.w2,
            "t": self.t,
            "p_w1": self.p_w1,
            "runs": self.runs,
            "seed": self.seed,
            "checks": [
                {"name": c.name, "full": asdict(c.full), "conditioned": asdict(c.conditioned), "z": c.z, "passed": c.passed}
                for c in self.checks
            ],
            "passed": self.passed,
        }


def check_conditioned_reduction(
    source: SourceModel,
    w1: PrefixLike,
    w2: PrefixLike,
    t: float,
    runs: int,
    seed: int,
    jobs: int = 1,
) -> ReductionReport:
    """Compare means, variances and the covariance of the two pairs, each within 3 SE."""
    w1 = source.alphabet.parse(w1)
    w2 = source.alphabet.parse(w2)
    p1 = float(prefix_prob(source, w1))
    cond = conditioned_source(source, w1)
    full = run_experiment(ExperimentConfig(source, t, runs, seed, trie_depth=len(w1) + len(w2)), jobs)
    part = run_experiment(
        ExperimentConfig(cond, p1 * t, runs, derive_seed(seed, 0xC), trie_depth=len(w2)), jobs
    )
    w12 = w1 + w2
    ea = estimate_moments(
        {"x": np.array([r.count(w1) for r in full], float), "y": np.array([r.count(w12) for r in full], float)},
        [("x", "y")],
    )
    eb = estimate_moments(
        {"x": np.array([r.count(()) for r in part], float), "y": np.array([r.count(w2) for r in part], float)},
        [("x", "y")],
    )
    checks = [
        MomentCheck("mean_outer", ea.means["x"], eb.means["x"]),
        MomentCheck("mean_inner", ea.means["y"], eb.means["y"]),
        MomentCheck("var_outer", ea.variances["x"], eb.variances["x"]),
        MomentCheck("var_inner", ea.variances["y"], eb.variances["y"]),
        MomentCheck("cov", ea.covariances[("x", "y")], eb.covariances[("x", "y")]),
    ]
    fmt = source.alphabet.format
    return ReductionReport(fmt(w1), fmt(w2), t, p1, runs, seed, checks)


# -- CSV ------------------------------------------------------------------------

_FIXED = ["run_index", "t", "n_keys", "key_comparisons", "total_symbols"]


def prefix_column(alphabet, w: Prefix) -> str:
    return "S[" + alphabet.format(w) + "]"


def write_records_csv(records: Sequence[RunRecord], path: Union[str, Path], source: SourceModel) -> None:
    """One row per run; prefix columns breadth first, symbols in alphabet order."""
    depth = max((len(rec.level_counts) - 1 for rec in records), default=0)
    prefixes = list(iter_prefixes(source.alphabet, depth))
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(_FIXED + [prefix_column(source.alphabet, w) for w in prefixes])
        for rec in records:
            out.writerow(
                [rec.run_index, repr(rec.t), rec.n_keys, rec.key_comparisons, rec.total_symbols]
                + [rec.count(w) for w in prefixes]
            )


def read_records_csv(path: Union[str, Path], source: SourceModel) -> list[RunRecord]:
    """Inverse of :func:`write_records_csv` (zero prefix counts are not stored)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[: len(_FIXED)] != _FIXED:
            raise ValueError(f"{path}: unexpected header {header[:len(_FIXED)]}")
        cols = header[len(_FIXED):]
        prefixes: list[Prefix] = []
        for c in cols:
            if not (c.startswith("S[") and c.endswith("]")):
                raise ValueError(f"{path}: bad prefix column {c!r}")
            prefixes.append(source.alphabet.parse(c[2:-1]))
        depth = max((len(w) for w in prefixes), default=0)
        records = []
        for row in reader:
            counts = {w: int(v) for w, v in zip(prefixes, row[len(_FIXED):]) if int(v)}
            levels = [0] * (depth + 1)
            for w, v in counts.items():
                levels[len(w)] += v
            records.append(
                RunRecord(
                    run_index=int(row[0]),
                    t=float(row[1]),
                    n_keys=int(row[2]),
                    key_comparisons=int(row[3]),
                    total_symbols=int(row[4]),
                    prefix_counts=counts,
                    level_counts=levels,
                )
            )
    return records
