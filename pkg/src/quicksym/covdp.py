"""Conditional covariance of the key-comparison count and one prefix group's count.

State ``(n, a, b)``: ``n`` keys, of which the ``b`` keys ranked ``a+1..a+b``
form the group of keys sharing a prefix ``w`` (the ``a`` keys below them
carry smaller prefixes of the same length).  ``C(n, a, b)`` is the covariance
of the total number of key comparisons with the number of comparisons
inside the group, over a uniformly random arrival order.

Conditioning on the pivot rank ``j`` gives

    n C(n,a,b) = n psi(n,a,b)
               + sum_{a<j<=a+b} [C(j-1, a, j-1-a) + C(n-j, 0, a+b-j)]
               + sum_{1<=j<=a}   C(n-j, a-j, b)
               + sum_{a+b<j<=n}  C(j-1, a, b)

Each of the three sums runs along a line of earlier states, so the table is
filled bottom-up in ``n`` with running sums, O(1) work per state.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterator, Union

import numpy as np
from scipy import stats
from scipy.special import gammaln

from . import exact
from .lemmas import _Ctx, _lam_num, _tail_num
from .sorter import quicksort_ranks_grouped

__all__ = [
    "CovTable",
    "cov_table",
    "cov_conditional",
    "cov_brute",
    "cov_unconditional",
    "cov_unconditional_brute",
    "CovBreakdown",
    "TruncationError",
    "cov_K_Sw_breakdown",
    "cov_K_Sw_exact",
    "write_table_csv",
    "read_table_csv",
    "BRUTE_MAX_N",
]

BRUTE_MAX_N = 9

Value = Union[Fraction, float]


class TruncationError(RuntimeError):
    """The requested tolerance cannot be met with the given ``n_cap``."""


def _check_state(n: int, a: int, b: int) -> None:
    if a < 0 or b < 0 or a + b > n:
        raise ValueError(f"need 0 <= a, 0 <= b, a + b <= n; got n={n}, a={a}, b={b}")


class CovTable:
    """``C(n, a, b)`` for all states with ``n <= n_max``, exact or float."""

    def __init__(self, n_max: int, exact_mode: bool):
        self.n_max = n_max
        self.exact = exact_mode
        self._rows: list[list[list[Value]]] = []

    def __getitem__(self, key: tuple[int, int, int]) -> Value:
        n, a, b = key
        _check_state(n, a, b)
        if n > self.n_max:
            raise KeyError(f"n={n} beyond table size {self.n_max}")
        return self._rows[n][a][b]

    def items(self) -> Iterator[tuple[tuple[int, int, int], Value]]:
        for n, row in enumerate(self._rows):
            for a, col in enumerate(row):
                for b, v in enumerate(col):
                    yield (n, a, b), v

    def min_value(self) -> Value:
        return min(v for _, v in self.items())

    def layer(self, n: int) -> np.ndarray:
        """Float array ``[a, b]`` for fixed ``n``; cells with ``a + b > n`` are 0."""
        out = np.zeros((n + 1, n + 1))
        for a, col in enumerate(self._rows[n]):
            out[a, : len(col)] = [float(v) for v in col]
        return out


class _PsiSource:
    """``n * psi(n,a,b) * den**2`` as ``lam(a,b) + tail(n-a, b)``, both tabulated once."""

    def __init__(self, ctx: _Ctx, n_max: int):
        self.ctx = ctx
        self.lam = [[_lam_num(ctx, a, b) for b in range(n_max - a + 1)] for a in range(n_max + 1)]
        self.tail = [[_tail_num(ctx, m, b) for b in range(m + 1)] for m in range(n_max + 1)]

    def layer(self, n: int, exact_mode: bool) -> list[list[Value]]:
        scale = n * self.ctx.den * self.ctx.den
        rows: list[list[Value]] = []
        for a in range(n + 1):
            lam = self.lam[a]
            tail = self.tail[n - a]
            if exact_mode:
                rows.append([Fraction(lam[b] + tail[b], scale) for b in range(n - a + 1)])
            else:
                rows.append([(lam[b] + tail[b]) / scale for b in range(n - a + 1)])
        return rows


def cov_table(n_max: int, mode: str = "exact") -> CovTable:
    """Fill ``C(n, a, b)`` for every state with ``n <= n_max``.

    ``mode="exact"`` gives Fractions; ``mode="float"`` rounds each ``psi``
    (computed exactly) to float and then runs the same recursion in floats.
    """
    if mode not in ("exact", "float"):
        raise ValueError(f"mode must be 'exact' or 'float', got {mode!r}")
    exact_mode = mode == "exact"
    zero: Value = Fraction(0) if exact_mode else 0.0
    table = CovTable(n_max, exact_mode)
    rows = table._rows
    psi_source = _PsiSource(_Ctx.covering(max(n_max, 1)), n_max)

    # diag[a][i]  = sum_{i' < i} C(a+i', a, i')           (group reaches the top)
    # low0[m][c]  = sum_{c' <= c} C(m+c', 0, c')          (no keys below the group)
    # shift[r][b][a'] = sum_{a'' <= a'} C(r+a'', a'', b)  (n - a fixed)
    # col[a][b]   = sum_{m < n} C(m, a, b)
    diag: list[list[Value]] = []
    low0: list[list[Value]] = []
    shift: list[list[list[Value]]] = []
    col: list[list[Value]] = []

    for n in range(n_max + 1):
        diag.append([zero])
        low0.append([])
        shift.append([[] for _ in range(n + 1)])
        col.append([zero] * (n_max + 1))
        layer: list[list[Value]] = []
        if n <= 1:
            layer = [[zero] * (n - a + 1) for a in range(n + 1)]
        else:
            psi = psi_source.layer(n, exact_mode)
            for a in range(n + 1):
                out: list[Value] = []
                for b in range(n - a + 1):
                    if b == 0:
                        out.append(zero)
                        continue
                    acc = diag[a][b] + low0[n - a - b][b - 1] + col[a][b]
                    if a:
                        acc += shift[n - a][b][a - 1]
                    out.append(psi[a][b] + acc / n)
                layer.append(out)
        rows.append(layer)

        for a in range(n + 1):
            b = n - a
            diag[a].append(diag[a][-1] + layer[a][b])
        for m in range(n + 1):
            prev = low0[m][-1] if low0[m] else zero
            low0[m].append(prev + layer[0][n - m])
        for a in range(n + 1):
            r = n - a
            for b in range(n - a + 1):
                run = shift[r][b]
                run.append((run[-1] if run else zero) + layer[a][b])
                col[a][b] += layer[a][b]
    return table


_tables: dict[tuple[str, int], CovTable] = {}


def _cached_table(n: int, mode: str) -> CovTable:
    for (m, size), tab in _tables.items():
        if m == mode and size >= n:
            return tab
    size = max(n, 16)
    tab = _tables[(mode, size)] = cov_table(size, mode)
    return tab


def cov_conditional(n: int, a: int, b: int, mode: str = "exact") -> Value:
    """``Cov(K_n, S_{n,w} | N_{n,w} = b, N_{n,w^-} = a)``."""
    _check_state(n, a, b)
    return _cached_table(n, mode)[n, a, b]


def _all_perms(n: int):
    if n > BRUTE_MAX_N:
        raise ValueError(f"brute force limited to n <= {BRUTE_MAX_N} ({n}! permutations requested)")
    return itertools.permutations(range(1, n + 1))


def cov_brute(n: int, a: int, b: int) -> Fraction:
    """Exact covariance by running QuickSort on all ``n!`` arrival orders."""
    _check_state(n, a, b)
    sk = sg = skg = 0
    count = 0
    for perm in _all_perms(n):
        k, g = quicksort_ranks_grouped(perm, a, b)
        sk += k
        sg += g
        skg += k * g
        count += 1
    return Fraction(skg, count) - Fraction(sk, count) * Fraction(sg, count)


def _multinomial_weights(n: int, q: Value, p: Value) -> dict[tuple[int, int], Value]:
    """P(N_{n,w^-} = a, N_{n,w} = b) for Multinomial(n; q, p, 1-p-q)."""
    r = 1 - p - q
    out = {}
    for a in range(n + 1):
        for b in range(n - a + 1):
            c = n - a - b
            coef = math.factorial(n) // (math.factorial(a) * math.factorial(b) * math.factorial(c))
            out[(a, b)] = coef * q**a * p**b * r**c
    return out


def cov_unconditional(n: int, p_w: Value, p_wminus: Value, mode: str = "exact") -> Value:
    """``Cov(K_n, S_{n,w})`` as the multinomial mixture of conditional covariances.

    The between-groups term of the law of total covariance vanishes because
    ``K_n`` is independent of the group sizes.
    """
    tab = _cached_table(n, mode)
    total: Value = Fraction(0) if mode == "exact" else 0.0
    for (a, b), wgt in _multinomial_weights(n, p_wminus, p_w).items():
        total += wgt * tab[n, a, b]
    return total


def cov_unconditional_brute(n: int, p_w: Fraction, p_wminus: Fraction) -> Fraction:
    """Joint enumeration over arrival orders *and* group sizes (no independence used)."""
    sk = sg = skg = Fraction(0)
    for (a, b), wgt in _multinomial_weights(n, p_wminus, p_w).items():
        if wgt == 0:
            continue
        perms = list(_all_perms(n))
        share = wgt / len(perms)
        for perm in perms:
            k, g = quicksort_ranks_grouped(perm, a, b)
            sk += share * k
            sg += share * g
            skg += share * k * g
    return skg - sk * sg


@dataclass(frozen=True)
class CovBreakdown:
    """``Cov(K(t), S_w(t)) = t_w + v_w`` with truncation bookkeeping."""

    p_w: float
    p_wminus: float
    t: float
    t_w: float
    v_w: float
    n_cap: int
    poisson_tail_bound: float
    dropped_mass: float
    dropped_bound: float

    @property
    def value(self) -> float:
        return self.t_w + self.v_w

    @property
    def error_bound(self) -> float:
        return self.poisson_tail_bound + self.dropped_bound


def cov_K_Sw_breakdown(
    p_w: float,
    p_wminus: float,
    t: float,
    tol: float = 1e-10,
    n_cap: int | None = None,
) -> CovBreakdown:
    p_w = float(p_w)
    p_wminus = float(p_wminus)
    if p_w < 0 or p_wminus < 0 or p_w + p_wminus > 1 + 1e-12:
        raise ValueError("need p_w, p_wminus >= 0 with p_w + p_wminus <= 1")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if p_w == 0 or t == 0:
        return CovBreakdown(p_w, p_wminus, t, 0.0, 0.0, 0, 0.0, 0.0, 0.0)
    if n_cap is None:
        n_cap = exact.default_n_max(t)

    # |Cov| <= (n(n-1)/2)^2 / 4 for two variables in [0, n(n-1)/2]
    def cov_bound(n: int) -> float:
        return (n * (n - 1) / 2) ** 2 / 4

    far = n_cap + 20 * int(math.sqrt(t) + 1) + 50
    ks = np.arange(n_cap + 1, far + 1)
    tail = float(np.sum(stats.poisson.pmf(ks, t) * (ks * (ks - 1) / 2.0) ** 2 / 4))
    tail += exact._tail_bound(t, far, 1 / 16, 4.0)
    if tail > tol:
        raise TruncationError(
            f"Poisson tail bound {tail:.3g} exceeds tol={tol:g} with n_cap={n_cap} at t={t}"
        )

    t_w = exact.t_w_exact(p_w, t, tol)
    tab = _cached_table(n_cap, "float")
    pois = stats.poisson.pmf(np.arange(n_cap + 1), t)
    r = max(1.0 - p_w - p_wminus, 0.0)
    cut = tol / max(n_cap, 1) ** 2
    v_w = 0.0
    dropped = 0.0
    dropped_bound = 0.0
    with np.errstate(divide="ignore"):
        lq, lp, lr = np.log(p_wminus), np.log(p_w), np.log(r)
    for n in range(2, n_cap + 1):
        a = np.arange(n + 1)[:, None]
        b = np.arange(n + 1)[None, :]
        c = n - a - b
        valid = c >= 0
        with np.errstate(invalid="ignore"):
            logw = (
                gammaln(n + 1) - gammaln(a + 1) - gammaln(b + 1) - gammaln(np.where(valid, c, 0) + 1)
                + np.where(a > 0, a * lq, 0.0)
                + b * lp
                + np.where(c > 0, c * lr, 0.0)
            )
        w = np.where(valid, np.exp(logw), 0.0)
        w = np.nan_to_num(w)
        keep = w >= cut
        small = float(w[~keep].sum())
        dropped += pois[n] * small
        dropped_bound += pois[n] * small * cov_bound(n)
        v_w += pois[n] * float(np.sum(np.where(keep, w, 0.0) * tab.layer(n)))
    return CovBreakdown(
        p_w, p_wminus, float(t), float(t_w), float(v_w), n_cap, float(tail), float(dropped), float(dropped_bound)
    )


def cov_K_Sw_exact(p_w: float, p_wminus: float, t: float, tol: float = 1e-10, n_cap: int | None = None) -> float:
    """``Cov(K(t), S_w(t))`` for a prefix with probability ``p_w`` and left mass ``p_wminus``."""
    return cov_K_Sw_breakdown(p_w, p_wminus, t, tol, n_cap).value


def write_table_csv(table: CovTable, path: Union[str, Path]) -> None:
    """Rows ``n,a,b,numerator,denominator`` (exact) or ``n,a,b,value`` (float)."""
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        if table.exact:
            out.writerow(["n", "a", "b", "numerator", "denominator"])
            for (n, a, b), v in table.items():
                out.writerow([n, a, b, v.numerator, v.denominator])
        else:
            out.writerow(["n", "a", "b", "value"])
            for (n, a, b), v in table.items():
                out.writerow([n, a, b, repr(v)])


def read_table_csv(path: Union[str, Path]) -> dict[tuple[int, int, int], Value]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out: dict[tuple[int, int, int], Value] = {}
    for row in rows:
        key = (int(row["n"]), int(row["a"]), int(row["b"]))
        if "numerator" in row:
            out[key] = Fraction(int(row["numerator"]), int(row["denominator"]))
        else:
            out[key] = float(row["value"])
    return out
