"""Exact evaluation of the sums built on the core term ``c(b, j)``.

``c(b, j) = b - 1 + kappa(j-1) + kappa(b-j) - kappa(b)`` is the deviation of
the expected comparison count on ``b`` keys given that the pivot has rank
``j``.  Every quantity here is a weighted sum of ``c(b, .)``:

============  ===========================================================
``delta2``    ``2 sum_j c(b,j) / (n+2-j-a)``
``delta1``    ``2 sum_j H(n+1-j-a) c(b,j)``
``lambda1``   ``2 sum_j H(j+a) c(b,j)``
``lam``       ``sum_j kappa(j+a-1) c(b,j)``
``big_sigma`` ``sum_j (kappa(j+a-1) + kappa(n-j-a)) c(b,j)``
``psi``       ``n^-1 sum_{a<j<=a+b} (n-1+kappa(j-1)+kappa(n-j)-kappa(n)) c(b,j-a)``
============  ===========================================================

All arithmetic is on integer numerators over one common denominator, so
results are exact :class:`~fractions.Fraction` values and sign checks never
depend on rounding.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from fractions import Fraction

from .exact import HARMONIC

__all__ = [
    "CoreTermTable",
    "core_terms",
    "delta2",
    "delta1",
    "lambda1",
    "lam",
    "lam_reflected",
    "big_sigma",
    "psi",
    "kaplim_sum",
    "SweepReport",
    "sweep_signs",
]


class _Ctx:
    """Numerators of H and kappa over one denominator, valid up to ``top``."""

    __slots__ = ("den", "h", "kap", "_core")

    _by_den: dict[int, _Ctx] = {}

    def __init__(self, den: int, h: list[int], kap: list[int]):
        self.den = den
        self.h = h
        self.kap = kap
        self._core: dict[int, list[int]] = {}

    @classmethod
    def covering(cls, n: int) -> _Ctx:
        den, h, _, kap = HARMONIC.snapshot(n)
        ctx = cls._by_den.get(den)
        if ctx is None:
            ctx = cls._by_den[den] = cls(den, h, kap)
        return ctx

    def core(self, b: int) -> list[int]:
        """``[0, c(b,1)*den, ..., c(b,b)*den]`` (index 0 unused)."""
        c = self._core.get(b)
        if c is None:
            k = self.kap
            base = (b - 1) * self.den - k[b]
            c = [0] + [base + k[j - 1] + k[b - j] for j in range(1, b + 1)]
            self._core[b] = c
        return c


@dataclass(frozen=True)
class CoreTermTable:
    """``c(b, j)`` for ``j = 1..b``."""

    b: int
    values: tuple[Fraction, ...]

    def __getitem__(self, j: int) -> Fraction:
        if not 1 <= j <= self.b:
            raise IndexError(j)
        return self.values[j - 1]

    def check(self) -> dict[str, bool]:
        """The table's structural identities, evaluated exactly."""
        v = self.values
        b = self.b
        half = (b + 1) // 2
        return {
            "sum_zero": sum(v, Fraction(0)) == 0,
            "symmetric": all(v[j] == v[b - 1 - j] for j in range(b)),
            "left_nonincreasing": all(v[j] >= v[j + 1] for j in range(half - 1)),
            "weighted_sum_zero": sum(((j + 1) * x for j, x in enumerate(v)), Fraction(0)) == 0,
        }


def core_terms(b: int) -> CoreTermTable:
    if b < 0:
        raise ValueError("b must be nonnegative")
    ctx = _Ctx.covering(b)
    c = ctx.core(b)
    return CoreTermTable(b, tuple(Fraction(x, ctx.den) for x in c[1:]))


def _domain(n: int, a: int, b: int) -> None:
    if a < 0 or b < 0 or n < 0 or a + b > n:
        raise ValueError(f"need nonnegative a, b, n with a + b <= n; got n={n}, a={a}, b={b}")


def _nonneg(a: int, b: int) -> None:
    if a < 0 or b < 0:
        raise ValueError(f"need nonnegative a, b; got a={a}, b={b}")


# Integer kernels: each returns a numerator over den**2.

def _delta2_num(ctx: _Ctx, n: int, a: int, b: int) -> int:
    c = ctx.core(b)
    den = ctx.den
    return 2 * sum(c[j] * (den // (n + 2 - j - a)) for j in range(1, b + 1))


def _delta1_num(ctx: _Ctx, n: int, a: int, b: int) -> int:
    c = ctx.core(b)
    h = ctx.h
    return 2 * sum(h[n + 1 - j - a] * c[j] for j in range(1, b + 1))


def _lambda1_num(ctx: _Ctx, a: int, b: int) -> int:
    c = ctx.core(b)
    h = ctx.h
    return 2 * sum(h[j + a] * c[j] for j in range(1, b + 1))


def _lam_num(ctx: _Ctx, a: int, b: int) -> int:
    c = ctx.core(b)
    k = ctx.kap
    return sum(k[j + a - 1] * c[j] for j in range(1, b + 1))


def _tail_num(ctx: _Ctx, m: int, b: int) -> int:
    c = ctx.core(b)
    k = ctx.kap
    return sum(k[m - j] * c[j] for j in range(1, b + 1))


def _sigma_num(ctx: _Ctx, n: int, a: int, b: int) -> int:
    c = ctx.core(b)
    k = ctx.kap
    return sum((k[j + a - 1] + k[n - j - a]) * c[j] for j in range(1, b + 1))


def _psi_num(ctx: _Ctx, n: int, a: int, b: int) -> int:
    """``n * psi * den**2`` from the defining sum over pivot ranks ``a < j <= a+b``."""
    c = ctx.core(b)
    k = ctx.kap
    outer = (n - 1) * ctx.den - k[n]
    return sum((outer + k[j - 1] + k[n - j]) * c[j - a] for j in range(a + 1, a + b + 1))


def delta2(n: int, a: int, b: int) -> Fraction:
    _domain(n, a, b)
    ctx = _Ctx.covering(n + 2)
    return Fraction(_delta2_num(ctx, n, a, b), ctx.den * ctx.den)


def delta1(n: int, a: int, b: int) -> Fraction:
    _domain(n, a, b)
    ctx = _Ctx.covering(n + 1)
    return Fraction(_delta1_num(ctx, n, a, b), ctx.den * ctx.den)


def lambda1(a: int, b: int) -> Fraction:
    _nonneg(a, b)
    ctx = _Ctx.covering(a + b)
    return Fraction(_lambda1_num(ctx, a, b), ctx.den * ctx.den)


def lam(a: int, b: int) -> Fraction:
    """``sum_j kappa(j+a-1) c(b,j)``; nonincreasing in ``a`` with limit 0."""
    _nonneg(a, b)
    ctx = _Ctx.covering(a + b)
    return Fraction(_lam_num(ctx, a, b), ctx.den * ctx.den)


def lam_reflected(a: int, b: int) -> Fraction:
    """The same quantity written as ``sum_j kappa(a+b-j) c(b,j)``."""
    _nonneg(a, b)
    ctx = _Ctx.covering(a + b)
    return Fraction(_tail_num(ctx, a + b, b), ctx.den * ctx.den)


def big_sigma(n: int, a: int, b: int) -> Fraction:
    _domain(n, a, b)
    ctx = _Ctx.covering(n)
    return Fraction(_sigma_num(ctx, n, a, b), ctx.den * ctx.den)


def psi(n: int, a: int, b: int) -> Fraction:
    _domain(n, a, b)
    if n == 0:
        raise ValueError("psi is undefined for n = 0")
    ctx = _Ctx.covering(n)
    return Fraction(_psi_num(ctx, n, a, b), n * ctx.den * ctx.den)


def kaplim_sum(m: int, b: int) -> Fraction:
    """``sum_j kappa(m-j) c(b,j)``, which tends to 0 as ``m`` grows."""
    if b < 0 or m < b:
        raise ValueError(f"need 0 <= b <= m; got m={m}, b={b}")
    ctx = _Ctx.covering(m)
    return Fraction(_tail_num(ctx, m, b), ctx.den * ctx.den)


# -- sweep -------------------------------------------------------------------


def _frac_str(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


@dataclass
class _CheckTally:
    checked: int = 0
    counterexamples: list = field(default_factory=list)
    closest: str | None = None
    closest_at: list | None = None

    def record(self, ok: bool, value: Fraction | None, where: tuple[int, ...]) -> None:
        self.checked += 1
        if not ok:
            self.counterexamples.append({"at": list(where), "value": None if value is None else _frac_str(value)})
        elif value is not None and value != 0:
            if self.closest is None or abs(value) < abs(Fraction(self.closest)):
                self.closest = _frac_str(value)
                self.closest_at = list(where)


@dataclass
class SweepReport:
    """Per-check counts, counterexamples and the nonzero value closest to 0."""

    n_max: int
    checks: dict[str, _CheckTally]

    @property
    def total_counterexamples(self) -> int:
        return sum(len(c.counterexamples) for c in self.checks.values())

    @property
    def ok(self) -> bool:
        return self.total_counterexamples == 0

    def to_dict(self) -> dict:
        return {
            "n_max": self.n_max,
            "ok": self.ok,
            "total_counterexamples": self.total_counterexamples,
            "checks": {name: asdict(c) for name, c in self.checks.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


SIGN_CHECKS = ("delta2>=0", "delta1<=0", "big_sigma>=0", "psi>=0", "lambda1<=0", "lambda>=0")
IDENTITY_CHECKS = (
    "delta1(n+1)-delta1(n)=delta2(n)",
    "big_sigma(n+1)-big_sigma(n)=delta1(n)",
    "lambda(a+1)-lambda(a)=lambda1(a)",
    "lambda1(a,b)=delta1(b+2a,a,b)",
    "lambda reflected form",
    "psi=big_sigma/n",
)


def sweep_signs(n_max: int, identities: bool = True) -> SweepReport:
    """Check every sign claim exactly over ``a + b <= n <= n_max``.

    Also checks ``lambda1 <= 0`` and ``lambda >= 0`` for ``a, b <= n_max``,
    and with ``identities`` the difference identities linking the
    quantities on the same grid.
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    names = SIGN_CHECKS + (IDENTITY_CHECKS if identities else ())
    checks = {name: _CheckTally() for name in names}
    ctx = _Ctx.covering(3 * n_max + 2)
    d2 = ctx.den * ctx.den

    for n in range(0, n_max + 1):
        for a in range(0, n + 1):
            for b in range(0, n - a + 1):
                where = (n, a, b)
                dl2 = _delta2_num(ctx, n, a, b)
                dl1 = _delta1_num(ctx, n, a, b)
                sg = _sigma_num(ctx, n, a, b)
                checks["delta2>=0"].record(dl2 >= 0, Fraction(dl2, d2), where)
                checks["delta1<=0"].record(dl1 <= 0, Fraction(dl1, d2), where)
                checks["big_sigma>=0"].record(sg >= 0, Fraction(sg, d2), where)
                if n >= 1:
                    ps = _psi_num(ctx, n, a, b)
                    checks["psi>=0"].record(ps >= 0, Fraction(ps, n * d2), where)
                    if identities:
                        checks["psi=big_sigma/n"].record(ps == sg, None, where)
                if identities:
                    nxt1 = _delta1_num(ctx, n + 1, a, b)
                    checks["delta1(n+1)-delta1(n)=delta2(n)"].record(
                        nxt1 - dl1 == dl2, None, where
                    )
                    nxts = _sigma_num(ctx, n + 1, a, b)
                    checks["big_sigma(n+1)-big_sigma(n)=delta1(n)"].record(nxts - sg == dl1, None, where)

    for a in range(0, n_max + 1):
        for b in range(0, n_max + 1):
            where = (a, b)
            l1 = _lambda1_num(ctx, a, b)
            lm = _lam_num(ctx, a, b)
            checks["lambda1<=0"].record(l1 <= 0, Fraction(l1, d2), where)
            checks["lambda>=0"].record(lm >= 0, Fraction(lm, d2), where)
            if identities:
                checks["lambda(a+1)-lambda(a)=lambda1(a)"].record(_lam_num(ctx, a + 1, b) - lm == l1, None, where)
                checks["lambda1(a,b)=delta1(b+2a,a,b)"].record(
                    l1 == _delta1_num(ctx, b + 2 * a, a, b), None, where
                )
                checks["lambda reflected form"].record(lm == _tail_num(ctx, a + b, b), None, where)

    return SweepReport(n_max, checks)
