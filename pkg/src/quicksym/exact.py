"""Exact and series-evaluated moments of QuickSort's key-comparison count.

Rational quantities (harmonic numbers, the mean ``kappa(n)`` and variance
``var_K(n)`` of the number of key comparisons on ``n`` keys) are exact
:class:`~fractions.Fraction` values.  Poissonized quantities are Poisson or
binomial mixtures of those and are evaluated in floating point with an
explicit truncation rule.
"""

from __future__ import annotations

import math
import threading
import warnings
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import stats

from .source import Markov, Memoryless, SourceModel, iter_prefixes, prefix_prob

__all__ = [
    "HarmonicCache",
    "HARMONIC",
    "harmonic",
    "harmonic2",
    "kappa",
    "kappa_numerators",
    "kappa_via_recurrence",
    "var_K",
    "sigma_sq",
    "kappa_asymptotic",
    "kappa_table",
    "var_K_table",
    "default_n_max",
    "poisson_mix",
    "mean_K_poisson",
    "var_K_poisson",
    "expected_conditional_var_K",
    "binom_mix_kappa",
    "t_w_exact",
    "mean_S_poisson",
    "mean_S_levels",
]

EULER_GAMMA = 0.57721566490153286061


class HarmonicCache:
    """First- and second-order harmonic numbers, cached in power-of-two blocks.

    Block ``top`` holds integer numerators over ``den = lcm(1..top)`` (and
    ``den**2`` for the second-order numbers), so long exact sums of
    harmonic-derived quantities stay in plain integer arithmetic.  Small
    queries are served from small blocks and never pay for the huge common
    denominator of a large one.  Blocks are built under a lock and are
    immutable once published.
    """

    MIN_BLOCK = 64

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._blocks: dict[int, tuple[int, list[int], list[int], list[int]]] = {}

    @property
    def top(self) -> int:
        return max(self._blocks, default=0)

    @classmethod
    def block_size(cls, n: int) -> int:
        return max(cls.MIN_BLOCK, 1 << max(n - 1, 0).bit_length())

    def snapshot(self, n: int) -> tuple[int, list[int], list[int], list[int]]:
        """``(den, H*den, H2*den^2, kappa*den)`` valid for indices up to ``n``."""
        top = self.block_size(n)
        block = self._blocks.get(top)
        if block is None:
            with self._lock:
                block = self._blocks.get(top)
                if block is None:
                    block = self._blocks[top] = self._build(top)
        return block

    @staticmethod
    def _build(top: int) -> tuple[int, list[int], list[int], list[int]]:
        den = 1
        for m in range(2, top + 1):
            den = math.lcm(den, m)
        h = [0]
        h2 = [0]
        for m in range(1, top + 1):
            q = den // m
            h.append(h[-1] + q)
            h2.append(h2[-1] + q * q)
        kap = [2 * (j + 1) * h[j] - 4 * j * den for j in range(top + 1)]
        return den, h, h2, kap


HARMONIC = HarmonicCache()


def _check_n(n: int) -> int:
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    return int(n)


def harmonic(n: int) -> Fraction:
    n = _check_n(n)
    den, h, _, _ = HARMONIC.snapshot(n)
    return Fraction(h[n], den)


def harmonic2(n: int) -> Fraction:
    n = _check_n(n)
    den, _, h2, _ = HARMONIC.snapshot(n)
    return Fraction(h2[n], den * den)


def kappa_numerators(n_max: int) -> tuple[int, list[int]]:
    """``(den, nums)`` with ``kappa(j) == nums[j] / den`` for ``j <= n_max``."""
    den, _, _, kap = HARMONIC.snapshot(_check_n(n_max))
    return den, kap


def kappa(n: int) -> Fraction:
    """Expected number of key comparisons on ``n`` keys: ``2(n+1)H_n - 4n``."""
    n = _check_n(n)
    den, _, _, kap = HARMONIC.snapshot(n)
    return Fraction(kap[n], den)


def kappa_via_recurrence(d: int, e: int = 0) -> Fraction:
    """Evaluate the conditioning-on-the-pivot recurrence for ``kappa(d)``.

    Sums ``d - 1 + kappa(j-1-e) + kappa(e+d-j)`` over ``j = e+1 .. e+d`` and
    divides by ``d``; the shift ``e`` only relabels the pivot ranks.
    """
    if d < 1:
        raise ValueError("d must be at least 1")
    if e < 0:
        raise ValueError("e must be nonnegative")
    den, _, _, kap = HARMONIC.snapshot(d)
    total = 0
    for j in range(e + 1, e + d + 1):
        total += (d - 1) * den + kap[j - 1 - e] + kap[e + d - j]
    return Fraction(total, den * d)


def _var_K_num(n: int, den: int, h: list[int], h2: list[int]) -> int:
    d2 = den * den
    return 7 * n * n * d2 - 4 * (n + 1) ** 2 * h2[n] - 2 * (n + 1) * h[n] * den + 13 * n * d2


def var_K(n: int) -> Fraction:
    """Variance of the number of key comparisons on ``n`` keys."""
    n = _check_n(n)
    den, h, h2, _ = HARMONIC.snapshot(n)
    return Fraction(_var_K_num(n, den, h, h2), den * den)


def sigma_sq() -> float:
    """Limit of ``var_K(n) / n**2``: ``7 - 2*pi**2/3``."""
    return 7.0 - 2.0 * math.pi**2 / 3.0


def kappa_asymptotic(n: int) -> float:
    if n < 1:
        raise ValueError("n must be at least 1")
    ln = math.log(n)
    return 2 * n * ln - (4 - 2 * EULER_GAMMA) * n + 2 * ln + (2 * EULER_GAMMA + 1)


_float_tables: dict[str, np.ndarray] = {}
_float_lock = threading.Lock()


def _grow_float_tables(n_max: int) -> None:
    have = _float_tables.get("kappa")
    if have is not None and len(have) > n_max:
        return
    with _float_lock:
        have = _float_tables.get("kappa")
        if have is not None and len(have) > n_max:
            return
        size = max(n_max + 1, 2 * (0 if have is None else len(have)), 256)
        den, h, h2, kap = HARMONIC.snapshot(size - 1)
        d2 = den * den
        kt = np.array([kap[j] / den for j in range(size)])
        vt = np.array([_var_K_num(j, den, h, h2) / d2 for j in range(size)])
        _float_tables["var"] = vt
        _float_tables["kappa"] = kt


def kappa_table(n_max: int) -> np.ndarray:
    """Float ``kappa(0..n_max)``, each correctly rounded from the exact value."""
    _grow_float_tables(n_max)
    return _float_tables["kappa"][: n_max + 1]


def _kappa_at(j: int) -> float:
    return kappa_table(j)[j]


def var_K_table(n_max: int) -> np.ndarray:
    _grow_float_tables(n_max)
    return _float_tables["var"][: n_max + 1]


def default_n_max(t: float) -> int:
    """Truncation point ``ceil(t + 12 sqrt(t) + 20)`` for Poisson(t) sums."""
    return math.ceil(t + 12.0 * math.sqrt(t) + 20.0)


def _poisson_weights(t: float, n_max: int) -> np.ndarray:
    return stats.poisson.pmf(np.arange(n_max + 1), t)


def _tail_bound(t: float, n_max: int, scale: float, degree: float) -> float:
    """Bound on sum_{n > n_max} Poi_t(n) * scale * (n+1)**degree (geometric majorant)."""
    m = n_max + 1
    ratio = t / (m + 1) * ((m + 2) / (m + 1)) ** degree
    if ratio >= 1.0:
        return math.inf
    first = stats.poisson.pmf(m, t) * scale * (m + 1) ** degree
    return float(first / (1.0 - ratio))


def poisson_mix(
    f: Callable[[int], float],
    t: float,
    tol: float = 1e-12,
    n_max: int | None = None,
    degree: float | None = 2.0,
) -> float:
    """``exp(-t) * sum_n t**n/n! * f(n)``, truncated so the tail is below ``tol``.

    ``degree`` is the caller's declaration that ``|f(n)|`` grows at most like
    ``(n+1)**degree``; the tail bound is built from it.  ``None`` declares
    unbounded growth, which is rejected.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if degree is None or not math.isfinite(degree):
        raise ValueError("poisson_mix needs f of declared polynomial growth")
    if t == 0:
        return float(f(0))
    n = default_n_max(t) if n_max is None else n_max
    vals = [float(f(k)) for k in range(n + 1)]
    while True:
        scale = max(abs(vals[k]) / (k + 1) ** degree for k in range(n // 2, n + 1))
        if _tail_bound(t, n, scale, degree) <= tol:
            break
        extra = math.ceil(math.sqrt(t)) + 10
        vals.extend(float(f(k)) for k in range(n + 1, n + extra + 1))
        n += extra
    return float(np.dot(_poisson_weights(t, n), np.asarray(vals)))


def mean_K_poisson(t: float, tol: float = 1e-12) -> float:
    """Mean number of key comparisons on a Poisson(t) number of keys."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return 0.0
    return poisson_mix(_kappa_at, t, tol, degree=2.0)


def expected_conditional_var_K(t: float, tol: float = 1e-12) -> float:
    """Expected conditional variance ``E Var(K(t) | N(t))``."""
    if t == 0:
        return 0.0
    return poisson_mix(lambda j: var_K_table(j)[j], t, tol, degree=2.0)


def var_K_poisson(t: float, tol: float = 1e-12) -> float:
    """Variance of ``K(t)``: expected conditional variance plus variance of ``kappa(N)``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return 0.0
    mean = mean_K_poisson(t, tol)
    between = poisson_mix(lambda j: (_kappa_at(j) - mean) ** 2, t, tol, degree=4.0)
    return expected_conditional_var_K(t, tol) + between


def binom_mix_kappa(n: int, p):
    """``sum_j C(n,j) p^j (1-p)^(n-j) kappa(j)``; exact when ``p`` is a Fraction."""
    n = _check_n(n)
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    if isinstance(p, (Fraction, int)) and not isinstance(p, bool):
        p = Fraction(p)
        q = 1 - p
        den, kap = kappa_numerators(n)
        total = Fraction(0)
        for j in range(2, n + 1):
            total += math.comb(n, j) * p**j * q ** (n - j) * kap[j]
        return total / den
    kt = kappa_table(n)
    w = stats.binom.pmf(np.arange(n + 1), n, float(p))
    return float(np.dot(w, kt))


def _binom_mix_table(p: float, n_max: int) -> np.ndarray:
    kt = kappa_table(n_max)
    out = np.empty(n_max + 1)
    for n in range(n_max + 1):
        out[n] = np.dot(stats.binom.pmf(np.arange(n + 1), n, p), kt[: n + 1])
    return out


def t_w_exact(p, t: float, tol: float = 1e-12) -> float:
    """Covariance of ``kappa(N)`` and ``g(N)`` with ``N ~ Poisson(t)``, ``g = binom_mix_kappa(., p)``."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if p == 0 or t == 0:
        return 0.0
    # |kappa_n * g(n)| <= (n+1)**4 / 4
    n = default_n_max(t)
    while _tail_bound(t, n, 0.25, 4.0) > tol:
        n += math.ceil(math.sqrt(t)) + 10
    w = _poisson_weights(t, n)
    kt = kappa_table(n)
    g = _binom_mix_table(float(p), n)
    mk = float(np.dot(w, kt))
    mg = float(np.dot(w, g))
    return float(np.dot(w, (kt - mk) * (g - mg)))


# -- E S(t) over a source ---------------------------------------------------

_TAYLOR_TERMS = 40
_EXPLICIT_ABOVE = 1.0


@lru_cache(maxsize=1)
def _mean_K_taylor() -> tuple[float, ...]:
    """Power-series coefficients of ``s -> E K(s)`` around 0 (exact, then rounded)."""
    den, kap = kappa_numerators(_TAYLOR_TERMS)
    coeffs = []
    for m in range(_TAYLOR_TERMS + 1):
        c = Fraction(0)
        for j in range(m + 1):
            c += Fraction((-1) ** (m - j) * kap[j], math.factorial(j) * math.factorial(m - j))
        coeffs.append(float(c / den))
    return tuple(coeffs)


def _subtree_power_sums(source: SourceModel, m: int) -> dict:
    """``G[state] = sum over finite words u of P(u | state)**m`` (including the empty word)."""
    if isinstance(source, Memoryless):
        r = math.fsum(float(p) ** m for p in source.probs)
        return {None: 1.0 / (1.0 - r)}
    if isinstance(source, Markov):
        states = [s for s in source.reachable_states() if s is not None]
        a = np.array([[float(source.transition[i][j]) ** m for j in states] for i in states])
        g = np.linalg.solve(np.eye(len(states)) - a, np.ones(len(states)))
        if np.any(g < 1.0 - 1e-12):
            warnings.warn("source does not satisfy the summability condition numerically", RuntimeWarning)
        out = {s: float(v) for s, v in zip(states, g)}
        out[None] = 1.0 + math.fsum(float(source.initial[s]) ** m * out[s] for s in states)
        return out
    raise TypeError(f"unsupported source {type(source).__name__}")


def mean_S_poisson(source: SourceModel, t: float, tol: float = 1e-12) -> float:
    """Expected total symbol comparisons ``E S(t) = sum_w E K(p_w t)``.

    Prefixes with ``p_w t > 1`` are summed term by term.  Below that
    threshold a whole subtree is added at once: with ``E K(s) = sum_m c_m s^m``
    the subtree rooted at ``w`` contributes
    ``sum_m c_m (p_w t)^m G_m(state(w))``, where ``G_m`` sums ``m``-th powers of
    the conditional prefix probabilities below ``w``.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return 0.0
    coeffs = _mean_K_taylor()
    sums = [None, None] + [_subtree_power_sums(source, m) for m in range(2, len(coeffs))]
    total = []
    stack = [(1.0, None)]
    while stack:
        p, state = stack.pop()
        s = p * t
        if s > _EXPLICIT_ABOVE:
            total.append(mean_K_poisson(s, tol))
            for sym, q in enumerate(source.distribution(state)):
                if q > 0:
                    stack.append((p * float(q), source.next_state(state, sym)))
        else:
            total.append(math.fsum(coeffs[m] * s**m * sums[m][state] for m in range(2, len(coeffs))))
    return math.fsum(total)


def mean_S_levels(source: SourceModel, t: float, depth: int, tol: float = 1e-12) -> list[float]:
    """``E S_k(t) = sum_{|w|=k} E K(p_w t)`` for ``k = 0..depth``, by enumeration."""
    out = [0.0] * (depth + 1)
    for w in iter_prefixes(source.alphabet, depth):
        p = float(prefix_prob(source, w))
        if p > 0:
            out[len(w)] += mean_K_poisson(p * t, tol)
    return out
