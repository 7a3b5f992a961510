"""Probabilistic sources over infinite words and their prefix probabilities.

A source is described by the conditional distribution of the next symbol
given a small amount of state.  Two families are provided:

* :class:`Memoryless` -- i.i.d. symbols, no state.
* :class:`Markov` -- first-order chain; the state is the last symbol emitted.

Prefixes are tuples of symbol *indices* (positions in the alphabet).  Every
public function also accepts a prefix as a string of single-character
symbols, e.g. ``"01"``.

Probabilities given as :class:`fractions.Fraction` (or ``int``) keep every
derived quantity exact; floats are accepted for large simulations.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterator, Sequence, Union

Number = Union[Fraction, float]
Prefix = tuple[int, ...]
PrefixLike = Union[Prefix, Sequence[int], str]

FLOAT_TOL = 1e-12

__all__ = [
    "Alphabet",
    "SourceModel",
    "Memoryless",
    "Markov",
    "SourceError",
    "InvalidPrefixError",
    "NullConditioningError",
    "prefix_prob",
    "prefix_prob_less",
    "condition_partial_sum",
    "conditioned_source",
    "iter_prefixes",
    "parse_source",
    "load_markov",
    "fair_binary",
]


class SourceError(ValueError):
    """Invalid source specification."""


class InvalidPrefixError(SourceError):
    """A prefix mentions a symbol outside the alphabet."""


class NullConditioningError(SourceError):
    """Conditioning on a prefix of probability zero."""


@dataclass(frozen=True)
class Alphabet:
    """Totally ordered finite alphabet; list position defines the order."""

    symbols: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "symbols", tuple(str(s) for s in self.symbols))
        if len(self.symbols) < 2:
            raise SourceError("alphabet needs at least two symbols")
        if len(set(self.symbols)) != len(self.symbols):
            raise SourceError(f"duplicate symbols in alphabet {self.symbols!r}")

    @classmethod
    def of_size(cls, size: int) -> Alphabet:
        return cls(tuple(str(i) for i in range(size)))

    def __len__(self) -> int:
        return len(self.symbols)

    def parse(self, w: PrefixLike) -> Prefix:
        """Normalize ``w`` to a tuple of symbol indices, validating it."""
        if isinstance(w, str):
            if w == "":
                return ()
            if all(len(s) == 1 for s in self.symbols):
                parts: Sequence[str] = list(w)
            else:
                parts = w.split(",")
            try:
                return tuple(self.symbols.index(p) for p in parts)
            except ValueError:
                raise InvalidPrefixError(f"prefix {w!r} not over alphabet {self.symbols!r}") from None
        out = tuple(int(s) for s in w)
        for s in out:
            if not 0 <= s < len(self.symbols):
                raise InvalidPrefixError(f"symbol index {s} outside alphabet of size {len(self)}")
        return out

    def format(self, w: Sequence[int]) -> str:
        sep = "" if all(len(s) == 1 for s in self.symbols) else ","
        return sep.join(self.symbols[i] for i in w)


def _coerce_dist(values: Sequence, what: str) -> tuple[Number, ...]:
    if len(values) == 0:
        raise SourceError(f"{what}: empty distribution")
    exact = all(isinstance(v, (Fraction, int)) and not isinstance(v, bool) for v in values)
    if exact:
        dist: tuple[Number, ...] = tuple(Fraction(v) for v in values)
        total: Number = sum(dist, Fraction(0))
        ok = total == 1
    else:
        dist = tuple(float(v) for v in values)
        total = math.fsum(dist)
        ok = abs(total - 1.0) <= FLOAT_TOL
    if any(v < 0 for v in dist):
        raise SourceError(f"{what}: negative probability in {values!r}")
    if not ok:
        raise SourceError(f"{what}: probabilities sum to {total}, not 1")
    return dist


def _is_atomic(dist: Sequence[Number]) -> bool:
    if isinstance(dist[0], Fraction):
        return any(p == 1 for p in dist)
    return any(p >= 1.0 - FLOAT_TOL for p in dist)


class SourceModel:
    """Common interface: next-symbol distribution as a function of state.

    The state before the first symbol is ``None``.  Subclasses are frozen
    dataclasses, so instances are hashable and safe to share.
    """

    alphabet: Alphabet

    def distribution(self, state) -> tuple[Number, ...]:
        raise NotImplementedError

    def next_state(self, state, symbol: int):
        raise NotImplementedError

    def reachable_states(self) -> list:
        raise NotImplementedError

    @property
    def exact(self) -> bool:
        return isinstance(self.distribution(None)[0], Fraction)

    def to_float(self) -> SourceModel:
        raise NotImplementedError


@dataclass(frozen=True)
class Memoryless(SourceModel):
    alphabet: Alphabet
    probs: tuple[Number, ...]

    def __post_init__(self) -> None:
        probs = _coerce_dist(self.probs, "memoryless")
        if len(probs) != len(self.alphabet):
            raise SourceError(f"{len(probs)} probabilities for an alphabet of size {len(self.alphabet)}")
        if _is_atomic(probs):
            raise SourceError("atomic source: some symbol has probability 1")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_probs(cls, probs: Sequence) -> Memoryless:
        return cls(Alphabet.of_size(len(probs)), tuple(probs))

    def distribution(self, state=None) -> tuple[Number, ...]:
        return self.probs

    def next_state(self, state, symbol: int):
        return None

    def reachable_states(self) -> list:
        return [None]

    def to_float(self) -> Memoryless:
        return Memoryless(self.alphabet, tuple(float(p) for p in self.probs))


@dataclass(frozen=True)
class Markov(SourceModel):
    """First-order Markov source; ``transition[i][j]`` = P(next = j | last = i)."""

    alphabet: Alphabet
    initial: tuple[Number, ...]
    transition: tuple[tuple[Number, ...], ...]

    def __post_init__(self) -> None:
        k = len(self.alphabet)
        initial = _coerce_dist(self.initial, "markov initial")
        if len(initial) != k or len(self.transition) != k:
            raise SourceError("markov: dimensions do not match the alphabet")
        rows = tuple(_coerce_dist(row, f"markov row {i}") for i, row in enumerate(self.transition))
        if any(len(r) != k for r in rows):
            raise SourceError("markov: transition matrix must be square")
        if isinstance(initial[0], Fraction) != isinstance(rows[0][0], Fraction):
            initial = tuple(float(p) for p in initial)
            rows = tuple(tuple(float(p) for p in r) for r in rows)
        object.__setattr__(self, "initial", initial)
        object.__setattr__(self, "transition", rows)
        if _is_atomic(initial):
            raise SourceError("atomic source: initial distribution is a point mass")
        for s in self.reachable_states()[1:]:
            if _is_atomic(rows[s]):
                raise SourceError(f"atomic source: reachable state {self.alphabet.symbols[s]!r} has a deterministic successor")

    def distribution(self, state=None) -> tuple[Number, ...]:
        return self.initial if state is None else self.transition[state]

    def next_state(self, state, symbol: int):
        return symbol

    def reachable_states(self) -> list:
        """``None`` followed by every symbol that can occur, in BFS order."""
        seen: list = [None]
        frontier = [None]
        while frontier:
            nxt = []
            for st in frontier:
                for j, p in enumerate(self.distribution(st)):
                    if p > 0 and j not in seen:
                        seen.append(j)
                        nxt.append(j)
            frontier = nxt
        return seen

    def to_float(self) -> Markov:
        return Markov(
            self.alphabet,
            tuple(float(p) for p in self.initial),
            tuple(tuple(float(p) for p in row) for row in self.transition),
        )


def fair_binary() -> Memoryless:
    return Memoryless.from_probs([Fraction(1, 2), Fraction(1, 2)])


def _walk(source: SourceModel, w: Prefix):
    """Yield (state, distribution, symbol) along ``w``."""
    state = None
    for s in w:
        dist = source.distribution(state)
        yield state, dist, s
        state = source.next_state(state, s)


def _one(source: SourceModel) -> Number:
    return Fraction(1) if source.exact else 1.0


def prefix_prob(source: SourceModel, w: PrefixLike) -> Number:
    """Probability that a key drawn from ``source`` starts with ``w``."""
    w = source.alphabet.parse(w)
    p = _one(source)
    for _, dist, s in _walk(source, w):
        p *= dist[s]
        if p == 0:
            break
    return p


def prefix_prob_less(source: SourceModel, w: PrefixLike) -> Number:
    """Total probability of the length-|w| prefixes lexicographically below ``w``."""
    w = source.alphabet.parse(w)
    mass = _one(source) - _one(source)
    p = _one(source)
    for _, dist, s in _walk(source, w):
        mass += p * sum(dist[:s], mass - mass)
        p *= dist[s]
        if p == 0:
            break
    return mass


def condition_partial_sum(source: SourceModel, depth: int) -> float:
    r"""Partial sum :math:`\sum_{k=0}^{K} (\sum_{|w|=k} p_w^2)^{1/2}` of the tameness series."""
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    if isinstance(source, Memoryless):
        r = math.fsum(float(p) ** 2 for p in source.probs)
        return math.fsum(r ** (k / 2) for k in range(depth + 1))
    if not isinstance(source, Markov):
        raise TypeError(f"unsupported source {type(source).__name__}")
    # v[s] = sum of p_w^2 over words of the current length ending in symbol s
    sq = [[float(p) ** 2 for p in row] for row in source.transition]
    v = [float(p) ** 2 for p in source.initial]
    terms = [1.0]
    for _ in range(depth):
        terms.append(math.sqrt(math.fsum(v)))
        v = [math.fsum(v[i] * sq[i][j] for i in range(len(v))) for j in range(len(v))]
    return math.fsum(terms)


def conditioned_source(source: SourceModel, w: PrefixLike) -> SourceModel:
    """Law of the suffix that follows ``w``, given that the key starts with ``w``."""
    w = source.alphabet.parse(w)
    if prefix_prob(source, w) == 0:
        raise NullConditioningError(f"prefix {source.alphabet.format(w)!r} has probability 0")
    if isinstance(source, Memoryless) or not w:
        return source
    if isinstance(source, Markov):
        return Markov(source.alphabet, source.transition[w[-1]], source.transition)
    raise TypeError(f"unsupported source {type(source).__name__}")


def iter_prefixes(alphabet: Alphabet, max_depth: int) -> Iterator[Prefix]:
    """All prefixes of length <= max_depth, breadth first, symbols in alphabet order."""
    level: list[Prefix] = [()]
    for _ in range(max_depth + 1):
        yield from level
        level = [w + (s,) for w in level for s in range(len(alphabet))]


def _parse_number(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise SourceError(f"not a probability: {text!r}") from None


def load_markov(path: Union[str, Path]) -> Markov:
    """Read a Markov source from JSON.

    Layout::

        {"alphabet": ["a", "b"],
         "initial": ["1/2", "1/2"],
         "transition": [["1/3", "2/3"], ["3/4", "1/4"]]}

    Entries may be JSON numbers or strings; strings are parsed exactly
    (``"0.3"`` and ``"3/10"`` both give 3/10).  ``alphabet`` may be omitted,
    in which case the symbols are ``"0"``, ``"1"``, ...
    """
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SourceError(f"cannot read markov source {path}: {exc}") from None

    def num(v):
        return _parse_number(v) if isinstance(v, str) else Fraction(str(v)) if isinstance(v, float) else Fraction(v)

    try:
        initial = [num(v) for v in data["initial"]]
        transition = [[num(v) for v in row] for row in data["transition"]]
    except (KeyError, TypeError) as exc:
        raise SourceError(f"markov file {path}: missing or malformed field {exc}") from None
    alphabet = Alphabet(tuple(data["alphabet"])) if "alphabet" in data else Alphabet.of_size(len(initial))
    return Markov(alphabet, tuple(initial), tuple(tuple(r) for r in transition))


def parse_source(spec: str) -> SourceModel:
    """Parse ``memoryless:p1,p2,...`` or ``markov:<path>``.

    Decimal probabilities are read exactly, so ``memoryless:0.5,0.5`` is the
    exact fair binary source.
    """
    kind, _, rest = spec.partition(":")
    if kind == "memoryless":
        if not rest:
            raise SourceError("memoryless source needs probabilities")
        return Memoryless.from_probs([_parse_number(x) for x in rest.split(",")])
    if kind == "markov":
        return load_markov(rest)
    raise SourceError(f"unknown source kind {kind!r} (expected memoryless: or markov:)")
