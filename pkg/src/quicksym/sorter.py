"""Instrumented QuickSort with the first-arrival pivot rule.

The pivot of every sublist is the earliest-arriving key in it, and
partitioning is stable in arrival order, so the pivot for the keys smaller
than the root is the first of *them* to arrive, and so on recursively.
Recursion is unrolled onto an explicit stack.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .keys import DEFAULT_DEPTH_CAP, Key, compare_counted

__all__ = [
    "Tally",
    "quicksort_instrumented",
    "quicksort_ranks",
    "quicksort_ranks_grouped",
    "arrival_ranks",
]

_SORT, _EMIT = 0, 1


@dataclass
class Tally:
    """Costs of one sort.

    ``prefix_counts[w]`` is the number of comparisons of symbol ``|w|+1``
    between keys sharing prefix ``w`` (only prefixes with a positive count,
    and only up to ``trie_depth``).  ``level_counts[k]`` sums these over all
    ``w`` of length ``k`` without any depth limit.
    """

    n: int
    key_comparisons: int = 0
    total_symbol_comparisons: int = 0
    prefix_counts: dict[tuple[int, ...], int] = field(default_factory=dict)
    level_counts: list[int] = field(default_factory=list)
    order: list[int] = field(default_factory=list)


def quicksort_instrumented(
    keys: Sequence[Key],
    depth_cap: int = DEFAULT_DEPTH_CAP,
    trie_depth: int | None = None,
) -> Tally:
    """Sort ``keys`` (given in arrival order) and tally every comparison.

    ``trie_depth`` limits which prefixes are materialized in
    ``prefix_counts``; it defaults to ``depth_cap``.
    """
    if trie_depth is None:
        trie_depth = depth_cap
    tally = Tally(n=len(keys))
    counts = tally.prefix_counts
    levels = tally.level_counts
    order = tally.order
    kc = 0
    sc = 0

    stack: list = [(_SORT, list(range(len(keys))))]
    while stack:
        tag, item = stack.pop()
        if tag == _EMIT:
            order.append(item)
            continue
        if len(item) <= 1:
            order.extend(item)
            continue
        p = item[0]
        pivot = keys[p]
        pbuf = pivot.buffer
        # hist[d] = comparisons in this partition whose first difference is at d
        hist = [0, 0]
        less: list[int] = []
        greater: list[int] = []
        for i in item[1:]:
            other = keys[i]
            kb = other.buffer
            lim = min(len(pbuf), len(kb), depth_cap)
            j = 0
            while j < lim and pbuf[j] == kb[j]:
                j += 1
            if j == lim:
                # buffers exhausted (or cap reached): extend and count the slow way
                d = compare_counted(pivot, other, depth_cap).first_diff_index
                j = d - 1
            else:
                d = j + 1
            while len(hist) <= d:
                hist.append(0)
            hist[d] += 1
            if kb[j] < pbuf[j]:
                less.append(i)
            else:
                greater.append(i)
        kc += len(item) - 1
        # a comparison with first difference at d credits prefix lengths 0..d-1
        cum = 0
        for k in range(len(hist) - 2, -1, -1):
            cum += hist[k + 1]
            sc += (k + 1) * hist[k + 1]
            while len(levels) <= k:
                levels.append(0)
            levels[k] += cum
            if k <= trie_depth:
                w = tuple(pbuf[:k])
                counts[w] = counts.get(w, 0) + cum
        stack.append((_SORT, greater))
        stack.append((_EMIT, p))
        stack.append((_SORT, less))

    tally.key_comparisons = kc
    tally.total_symbol_comparisons = sc
    return tally


def _check_perm(perm: Sequence[int]) -> list[int]:
    perm = [int(x) for x in perm]
    if sorted(perm) != list(range(1, len(perm) + 1)):
        raise ValueError(f"not a permutation of 1..{len(perm)}: {perm!r}")
    return perm


def _rank_sort(perm: list[int], lo: int, hi: int) -> tuple[int, int]:
    kc = 0
    gc = 0
    stack = [perm]
    while stack:
        item = stack.pop()
        if len(item) <= 1:
            continue
        p = item[0]
        in_group = lo < p <= hi
        less = []
        greater = []
        for x in item[1:]:
            kc += 1
            if in_group and lo < x <= hi:
                gc += 1
            (less if x < p else greater).append(x)
        stack.append(greater)
        stack.append(less)
    return kc, gc


def quicksort_ranks(perm: Sequence[int]) -> int:
    """Key comparisons used on keys whose arrival-ordered ranks are ``perm``."""
    return _rank_sort(_check_perm(perm), 0, 0)[0]


def quicksort_ranks_grouped(perm: Sequence[int], a: int, b: int) -> tuple[int, int]:
    """Return ``(K, S_group)``: all comparisons, and those between two ranks in ``(a, a+b]``."""
    perm = _check_perm(perm)
    if a < 0 or b < 0 or a + b > len(perm):
        raise ValueError(f"need 0 <= a, 0 <= b, a + b <= n; got a={a}, b={b}, n={len(perm)}")
    return _rank_sort(perm, a, a + b)


def arrival_ranks(tally: Tally) -> list[int]:
    """1-based sorted rank of each key, listed in arrival order."""
    ranks = [0] * tally.n
    for r, i in enumerate(tally.order, start=1):
        ranks[i] = r
    return ranks
