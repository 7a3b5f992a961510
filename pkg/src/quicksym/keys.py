"""Lazily generated random keys and counted symbol-by-symbol comparison.

Symbol ``i`` of the key with arrival index ``k`` is a pure function of
``(seed, k, i)``: a SplitMix64-style hash turns the triple into a uniform
variate, which is mapped to a symbol through the inverse CDF of the source's
next-symbol distribution.  Keys can therefore be extended in any order, on
any worker, and always reproduce the same word.
"""

from __future__ import annotations

import enum
import math
from bisect import bisect_right
from dataclasses import dataclass
from functools import lru_cache
from itertools import accumulate

import numpy as np

from .source import SourceModel

__all__ = [
    "DEFAULT_DEPTH_CAP",
    "DepthCapExceeded",
    "Ordering",
    "CompareOutcome",
    "Key",
    "generate_key",
    "generate_keys",
    "compare_counted",
    "derive_seed",
]

DEFAULT_DEPTH_CAP = 64

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_INV53 = 1.0 / (1 << 53)
_BLOCK = 8


class DepthCapExceeded(RuntimeError):
    """Two keys agreed on every symbol up to the depth cap."""


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _M1) & _MASK
    z = ((z ^ (z >> 27)) * _M2) & _MASK
    return z ^ (z >> 31)


def _mix_np(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def derive_seed(seed: int, index: int) -> int:
    """Child seed for stream ``index`` of ``seed`` (64-bit)."""
    return _mix((_mix((seed + _GAMMA) & _MASK) + (index + 1) * _GAMMA) & _MASK)


def _uniform(base: int, pos: int) -> float:
    return (_mix((base + (pos + 1) * _GAMMA) & _MASK) >> 11) * _INV53


class _Sampler:
    """Inverse-CDF tables per source state, built once per source."""

    __slots__ = ("source", "cdfs", "last")

    def __init__(self, source: SourceModel):
        self.source = source
        self.cdfs = {}
        self.last = {}
        for st in source.reachable_states():
            dist = [float(p) for p in source.distribution(st)]
            self.cdfs[st] = list(accumulate(dist))
            self.last[st] = max(i for i, p in enumerate(dist) if p > 0)

    def symbol(self, state, u: float) -> int:
        return min(bisect_right(self.cdfs[state], u), self.last[state])


@lru_cache(maxsize=64)
def _sampler_for(source: SourceModel) -> _Sampler:
    return _Sampler(source)


class Key:
    """An infinite word, materialized on demand.

    ``buffer`` only ever grows; regenerate with the same ``(seed, index)``
    to get the same word back.
    """

    __slots__ = ("source", "seed", "index", "buffer", "_base", "_state", "_sampler")

    def __init__(self, source: SourceModel, seed: int, index: int, buffer=None):
        if index < 0:
            raise ValueError("arrival index must be nonnegative")
        self.source = source
        self.seed = seed
        self.index = index
        self._base = derive_seed(seed & _MASK, index)
        self._sampler = _sampler_for(source)
        self.buffer: list[int] = []
        self._state = None
        if buffer:
            for s in buffer:
                self.buffer.append(int(s))
                self._state = source.next_state(self._state, int(s))

    def extend_to(self, length: int) -> None:
        buf = self.buffer
        sampler = self._sampler
        nxt = self.source.next_state
        state = self._state
        pos = len(buf)
        while pos < length:
            s = sampler.symbol(state, _uniform(self._base, pos))
            buf.append(s)
            state = nxt(state, s)
            pos += 1
        self._state = state

    def prefix(self, length: int) -> tuple[int, ...]:
        if len(self.buffer) < length:
            self.extend_to(length)
        return tuple(self.buffer[:length])

    def __repr__(self) -> str:
        shown = self.source.alphabet.format(self.buffer)
        return f"Key(index={self.index}, {shown}...)"


def generate_key(source: SourceModel, master_seed: int, arrival_index: int) -> Key:
    return Key(source, master_seed, arrival_index)


def _auto_prefill(source: SourceModel, n: int) -> int:
    # about the depth at which n keys separate, plus slack
    pmax = max(max(float(p) for p in source.distribution(st)) for st in source.reachable_states())
    depth = math.log(n + 1) / -math.log(pmax)
    return min(_BLOCK + math.ceil(depth), DEFAULT_DEPTH_CAP)


def generate_keys(source: SourceModel, master_seed: int, n: int, prefill: int | None = None) -> list[Key]:
    """Keys with arrival indices ``0..n-1``, the first ``prefill`` symbols drawn in one batch.

    Produces exactly the words :func:`generate_key` would; the batch only
    saves per-symbol interpreter overhead.  By default ``prefill`` grows with
    ``log n`` so that most comparisons never need to extend a key.
    """
    if n == 0:
        return []
    if prefill is None:
        prefill = _auto_prefill(source, n)
    seed = master_seed & _MASK
    with np.errstate(over="ignore"):
        s0 = _mix_np(np.array([(seed + _GAMMA) & _MASK], dtype=np.uint64))[0]
        idx = np.arange(1, n + 1, dtype=np.uint64)
        bases = _mix_np(s0 + idx * np.uint64(_GAMMA))
        pos = np.arange(1, prefill + 1, dtype=np.uint64) * np.uint64(_GAMMA)
        u = (_mix_np(bases[:, None] + pos[None, :]) >> np.uint64(11)).astype(np.float64) * _INV53
    sampler = _sampler_for(source)
    syms = np.empty((n, prefill), dtype=np.int64)
    states = [None] * n
    if source.reachable_states() == [None]:
        cdf = np.asarray(sampler.cdfs[None])
        syms[:] = np.minimum(np.searchsorted(cdf, u, side="right"), sampler.last[None])
    else:
        nxt = source.next_state
        for i in range(n):
            st = None
            row = u[i]
            for p in range(prefill):
                s = sampler.symbol(st, row[p])
                syms[i, p] = s
                st = nxt(st, s)
            states[i] = st
    keys = []
    for i in range(n):
        k = Key.__new__(Key)
        k.source = source
        k.seed = master_seed
        k.index = i
        k._base = int(bases[i])
        k._sampler = sampler
        k.buffer = syms[i].tolist()
        k._state = states[i]
        keys.append(k)
    return keys


class Ordering(enum.IntEnum):
    LESS = -1
    GREATER = 1


@dataclass(frozen=True)
class CompareOutcome:
    """Result of comparing two keys.

    ``first_diff_index`` is the 1-based position ``d`` of the first differing
    symbol, so the comparison used ``d`` symbol comparisons and the keys
    share the prefixes of lengths ``0..d-1``.
    """

    ordering: Ordering
    first_diff_index: int


def compare_counted(k1: Key, k2: Key, depth_cap: int = DEFAULT_DEPTH_CAP) -> CompareOutcome:
    if k1 is k2:
        raise ValueError("cannot compare a key with itself")
    if depth_cap < 1:
        raise ValueError("depth_cap must be at least 1")
    b1, b2 = k1.buffer, k2.buffer
    i = 0
    while True:
        if i >= depth_cap:
            raise DepthCapExceeded(
                f"keys {k1.index} and {k2.index} agree on their first {depth_cap} symbols"
            )
        if i >= len(b1):
            k1.extend_to(i + _BLOCK)
        if i >= len(b2):
            k2.extend_to(i + _BLOCK)
        s1, s2 = b1[i], b2[i]
        if s1 != s2:
            return CompareOutcome(Ordering.LESS if s1 < s2 else Ordering.GREATER, i + 1)
        i += 1
