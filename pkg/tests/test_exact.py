from __future__ import annotations

import itertools
import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import markov2
from quicksym import exact
from quicksym.exact import (
    HARMONIC,
    binom_mix_kappa,
    expected_conditional_var_K,
    harmonic,
    harmonic2,
    kappa,
    kappa_asymptotic,
    kappa_via_recurrence,
    mean_K_poisson,
    mean_S_poisson,
    poisson_mix,
    sigma_sq,
    t_w_exact,
    var_K,
    var_K_poisson,
)
from quicksym.mc import ExperimentConfig, mean_and_se, run_experiment
from quicksym.sorter import quicksort_ranks
from quicksym.source import Memoryless, fair_binary

F = Fraction


# -- harmonic numbers and kappa ------------------------------------------------------


def test_harmonic_recurrences():
    h = h2 = F(0)
    for n in range(1, 300):
        h += F(1, n)
        h2 += F(1, n * n)
        assert harmonic(n) == h
        assert harmonic2(n) == h2
    assert harmonic(0) == 0 and harmonic2(0) == 0


def test_harmonic_blocks_are_independent_of_query_order():
    # a small query after a large one must still give a reduced exact value
    assert harmonic(3000) > 0
    assert harmonic(3) == F(11, 6)
    assert HARMONIC.block_size(3) == HARMONIC.MIN_BLOCK


def test_kappa_examples():
    assert kappa(0) == 0 and kappa(1) == 0
    assert kappa(2) == 1
    assert kappa(3) == F(8, 3)
    assert kappa(4) == F(29, 6)
    with pytest.raises(ValueError):
        kappa(-1)


def test_kappa_recurrence_examples():
    assert kappa_via_recurrence(1, 0) == 0
    assert kappa_via_recurrence(3, 0) == F(8, 3)
    assert kappa_via_recurrence(3, 5) == F(8, 3)
    with pytest.raises(ValueError):
        kappa_via_recurrence(0, 0)


@pytest.mark.parametrize("e", [0, 1, 3, 17])
def test_kappa_recurrence_matches_formula(e):
    for n in range(1, 150):
        assert kappa_via_recurrence(n, e) == kappa(n)


def test_kappa_increment_is_twice_harmonic_minus_two():
    for n in range(1, 500):
        assert kappa(n) - kappa(n - 1) == 2 * harmonic(n) - 2


def test_var_K_examples():
    assert var_K(0) == 0 and var_K(1) == 0
    assert var_K(2) == 0
    assert var_K(3) == F(2, 9)


def test_var_K_nonnegative_up_to_ten_thousand():
    n_max = 10_000
    den, h, h2, _ = HARMONIC.snapshot(n_max)
    bad = [n for n in range(n_max + 1) if exact._var_K_num(n, den, h, h2) < 0]
    assert bad == []


@pytest.mark.parametrize("n", range(1, 8))
def test_brute_force_moments(n):
    ks = [quicksort_ranks(p) for p in itertools.permutations(range(1, n + 1))]
    m = F(sum(ks), len(ks))
    assert m == kappa(n)
    assert F(sum(k * k for k in ks), len(ks)) - m * m == var_K(n)


def test_sigma_sq():
    assert sigma_sq() > 0
    assert sigma_sq() == pytest.approx(float(7 - 2 * mpmath.pi**2 / 3), abs=1e-15)
    gaps = [abs(float(var_K(n)) / n**2 - sigma_sq()) for n in (100, 1000, 10_000)]
    assert gaps[0] > gaps[1] > gaps[2]


def test_var_K_against_high_precision():
    mpmath.mp.dps = 50
    n = 2000
    h = mpmath.harmonic(n)
    h2 = mpmath.zeta(2) - mpmath.zeta(2, n + 1)
    ref = 7 * n**2 - 4 * (n + 1) ** 2 * h2 - 2 * (n + 1) * h + 13 * n
    assert float(var_K(n)) == pytest.approx(float(ref), rel=1e-14)


def test_kappa_asymptotic():
    assert abs(float(kappa(100)) - kappa_asymptotic(100)) <= 2 / 100
    assert math.isfinite(kappa_asymptotic(1))
    diffs = [abs(float(kappa(n)) - kappa_asymptotic(n)) for n in (10, 100, 1000)]
    assert diffs[0] > diffs[1] > diffs[2]
    with pytest.raises(ValueError):
        kappa_asymptotic(0)


def test_float_tables_are_correctly_rounded():
    kt = exact.kappa_table(600)
    vt = exact.var_K_table(600)
    for n in (0, 1, 2, 3, 77, 600):
        assert kt[n] == float(kappa(n))
        assert vt[n] == float(var_K(n))


# -- Poisson mixes --------------------------------------------------------------------


def test_poisson_mix_examples():
    assert poisson_mix(lambda n: 1.0, 7.5, degree=0) == pytest.approx(1.0, abs=1e-12)
    assert poisson_mix(lambda n: float(n), 5, degree=1) == pytest.approx(5.0, abs=1e-12)
    assert poisson_mix(lambda n: float(n * n), 5, degree=2) == pytest.approx(30.0, abs=1e-11)
    assert expected_conditional_var_K(10) > 0
    with pytest.raises(ValueError):
        poisson_mix(lambda n: 2.0**n, 3, degree=None)
    with pytest.raises(ValueError):
        poisson_mix(lambda n: 1.0, -1)


def test_poisson_mix_truncation_rule():
    assert exact.default_n_max(0) == 20
    assert exact.default_n_max(100) == math.ceil(100 + 120 + 20)


def test_mean_and_var_K_poisson():
    assert mean_K_poisson(0) == 0 and var_K_poisson(0) == 0
    for t in (0.5, 3, 10, 80):
        assert var_K_poisson(t) >= expected_conditional_var_K(t)
    assert var_K_poisson(1000) / 1000**2 >= sigma_sq()


def test_mean_K_poisson_small_t_is_quadratic():
    # two keys are needed for a comparison: E K(s) = s^2/2 + O(s^3)
    for s in (1e-3, 1e-2):
        assert mean_K_poisson(s) == pytest.approx(s * s / 2, rel=5 * s)


def test_mean_K_poisson_mpmath_oracle():
    mpmath.mp.dps = 30
    t = 12.5
    def term(n):
        kap = 2 * (n + 1) * mpmath.harmonic(n) - 4 * n
        return mpmath.e ** (-t) * t**n / mpmath.factorial(n) * kap

    ref = mpmath.nsum(term, [0, mpmath.inf])
    assert mean_K_poisson(t) == pytest.approx(float(ref), rel=1e-13)


def test_binom_mix_kappa_examples():
    assert binom_mix_kappa(7, 1) == kappa(7)
    assert binom_mix_kappa(7, 0) == 0
    assert binom_mix_kappa(2, F(1, 2)) == F(1, 4)
    assert binom_mix_kappa(12, 0.3) == pytest.approx(float(binom_mix_kappa(12, F(3, 10))), rel=1e-13)
    with pytest.raises(ValueError):
        binom_mix_kappa(3, 1.5)


def test_binom_mix_kappa_nondecreasing_in_n():
    for i in range(1, 10):
        p = i / 10
        vals = [binom_mix_kappa(n, p) for n in range(201)]
        assert all(b >= a for a, b in zip(vals, vals[1:]))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 60), st.integers(1, 9))
def test_binom_mix_kappa_exact_increasing(n, k):
    p = F(k, 10)
    assert binom_mix_kappa(n + 1, p) >= binom_mix_kappa(n, p)


def test_t_w_examples():
    assert t_w_exact(0, 10) == 0
    assert t_w_exact(0.5, 0) == 0
    assert t_w_exact(0.5, 10) >= 0
    assert t_w_exact(1.0, 10) == pytest.approx(var_K_poisson(10) - expected_conditional_var_K(10), rel=1e-10)


def test_t_w_against_poisson_mix():
    for p, t in [(0.5, 10), (0.2, 25), (0.9, 4)]:
        g = lambda n: binom_mix_kappa(n, p)  # noqa: E731
        kap = lambda n: float(kappa(n))  # noqa: E731
        mk = poisson_mix(kap, t, degree=2)
        ref = poisson_mix(lambda n: (kap(n) - mk) * g(n), t, degree=4)
        assert t_w_exact(p, t) == pytest.approx(ref, rel=1e-9, abs=1e-9)


def test_t_w_nonnegative_on_grid():
    for p in np.linspace(0.05, 1.0, 20):
        for t in (0.5, 2, 5, 20, 60):
            assert t_w_exact(float(p), t) >= 0


# -- E S(t) ---------------------------------------------------------------------------


def _mean_S_by_levels(probs, t, cutoff=1e-9, max_depth=400):
    """Group prefixes by composition: same multiset of symbols, same p_w."""
    total = 0.0
    level = {(): 1.0}
    for k in range(max_depth + 1):
        nxt = {}
        alive = False
        for comp, p in level.items():
            mult = math.factorial(k)
            for c in comp:
                mult //= math.factorial(c)
            s = p * t
            if s < cutoff:
                continue
            alive = True
            total += mult * mean_K_poisson(s)
            for i, q in enumerate(probs):
                c = list(comp) + [0] * (len(probs) - len(comp))
                c[i] += 1
                nxt[tuple(c)] = p * q
        if not alive:
            break
        level = nxt
    return total


def test_mean_S_poisson_trivial(fair):
    assert mean_S_poisson(fair, 0) == 0
    for t in (1, 10, 50):
        assert mean_S_poisson(fair, t) >= mean_K_poisson(t)


@pytest.mark.parametrize("probs,t", [((0.5, 0.5), 20), ((0.7, 0.3), 15), ((0.5, 0.3, 0.2), 8)])
def test_mean_S_poisson_matches_level_enumeration(probs, t):
    src = Memoryless.from_probs(list(probs))
    assert mean_S_poisson(src, t) == pytest.approx(_mean_S_by_levels(probs, t), rel=1e-9)


def test_subtree_power_sums_markov_by_iteration():
    m = markov2()
    sums = exact._subtree_power_sums(m, 3)
    a = np.array([[float(p) ** 3 for p in row] for row in m.transition])
    g = np.ones(2)
    for _ in range(400):
        g = 1 + a @ g
    assert sums[0] == pytest.approx(g[0], rel=1e-12)
    assert sums[1] == pytest.approx(g[1], rel=1e-12)


def test_mean_S_poisson_monte_carlo_fair_binary():
    recs = run_experiment(ExperimentConfig(fair_binary(), 20, 3000, 2718))
    st_ = mean_and_se([r.total_symbols for r in recs])
    assert abs(st_.z(mean_S_poisson(fair_binary(), 20))) <= 3


def test_mean_S_poisson_monte_carlo_markov():
    m = markov2()
    recs = run_experiment(ExperimentConfig(m, 15, 3000, 3141))
    st_ = mean_and_se([r.total_symbols for r in recs])
    assert abs(st_.z(mean_S_poisson(m, 15))) <= 3


def test_mean_S_levels_fair_binary(fair):
    # all 2^k prefixes of length k have probability 2^-k
    t = 6.0
    levels = exact.mean_S_levels(fair, t, 8)
    for k, v in enumerate(levels):
        assert v == pytest.approx(2**k * mean_K_poisson(t / 2**k), rel=1e-12)
    tail = math.fsum(2**k * mean_K_poisson(t / 2**k) for k in range(9, 80))
    assert sum(levels) + tail == pytest.approx(mean_S_poisson(fair, t), rel=1e-10)
