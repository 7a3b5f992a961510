from __future__ import annotations

import json
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quicksym.exact import harmonic, kappa
from quicksym.lemmas import (
    IDENTITY_CHECKS,
    SIGN_CHECKS,
    big_sigma,
    core_terms,
    delta1,
    delta2,
    kaplim_sum,
    lam,
    lam_reflected,
    lambda1,
    psi,
    sweep_signs,
)

F = Fraction


# literal definitions, evaluated term by term in Fractions
def c_ref(b, j):
    return b - 1 + kappa(j - 1) + kappa(b - j) - kappa(b)


def delta2_ref(n, a, b):
    return 2 * sum((c_ref(b, j) / (n + 2 - j - a) for j in range(1, b + 1)), F(0))


def delta1_ref(n, a, b):
    return 2 * sum((harmonic(n + 1 - j - a) * c_ref(b, j) for j in range(1, b + 1)), F(0))


def lambda1_ref(a, b):
    return 2 * sum((harmonic(j + a) * c_ref(b, j) for j in range(1, b + 1)), F(0))


def lam_ref(a, b):
    return sum((kappa(j + a - 1) * c_ref(b, j) for j in range(1, b + 1)), F(0))


def sigma_ref(n, a, b):
    return sum(((kappa(j + a - 1) + kappa(n - j - a)) * c_ref(b, j) for j in range(1, b + 1)), F(0))


def psi_ref(n, a, b):
    tot = sum(
        ((n - 1 + kappa(j - 1) + kappa(n - j) - kappa(n)) * c_ref(b, j - a) for j in range(a + 1, a + b + 1)),
        F(0),
    )
    return tot / n


states = st.integers(1, 30).flatmap(
    lambda n: st.integers(0, n).flatmap(lambda a: st.tuples(st.just(n), st.just(a), st.integers(0, n - a)))
)


def test_core_terms_for_three():
    assert core_terms(3).values == (F(1, 3), F(-2, 3), F(1, 3))
    assert core_terms(1).values == (F(0),)
    assert core_terms(2).values == (F(0), F(0))


@pytest.mark.parametrize("b", [0, 1, 2, 3, 4, 7, 20, 61])
def test_core_table_identities(b):
    assert all(core_terms(b).check().values())


def test_examples():
    assert delta2(5, 1, 0) == 0 and delta2(5, 1, 1) == 0
    assert delta2(3, 0, 3) == F(1, 18)
    assert delta1(3, 0, 3) == F(-1, 9)
    assert delta1(4, 0, 3) == F(-1, 18)
    assert delta1(4, 0, 3) == delta1(3, 0, 3) + delta2(3, 0, 3)
    assert lambda1(0, 3) == F(-1, 9)
    assert lambda1(2, 3) == delta1(7, 2, 3)
    assert lam(0, 3) == F(1, 3)
    assert lam(1, 3) == F(2, 9)
    assert lam(1, 3) - lam(0, 3) == lambda1(0, 3)
    assert big_sigma(3, 0, 3) == F(2, 3)
    assert big_sigma(4, 0, 3) - big_sigma(3, 0, 3) == delta1(3, 0, 3)
    assert psi(3, 0, 3) == F(2, 9)
    assert psi(7, 2, 1) == 0
    assert kaplim_sum(5, 3) == F(1, 6)
    assert kaplim_sum(5, 1) == 0


def test_small_b_vanish():
    for n in range(6):
        for a in range(n + 1):
            for b in range(min(2, n - a) + 1):
                assert delta1(n, a, b) == 0 and big_sigma(n, a, b) == 0
                if n:
                    assert psi(n, a, b) == 0


@pytest.mark.parametrize(
    "fn,args",
    [(delta2, (2, 2, 1)), (delta1, (3, -1, 1)), (big_sigma, (3, 1, 3)), (psi, (0, 0, 0)), (kaplim_sum, (2, 3)), (lam, (-1, 2))],
)
def test_domain_errors(fn, args):
    with pytest.raises(ValueError):
        fn(*args)


@settings(max_examples=60, deadline=None)
@given(states)
def test_kernels_match_literal_definitions(nab):
    n, a, b = nab
    assert delta2(n, a, b) == delta2_ref(n, a, b)
    assert delta1(n, a, b) == delta1_ref(n, a, b)
    assert big_sigma(n, a, b) == sigma_ref(n, a, b)
    assert psi(n, a, b) == psi_ref(n, a, b)
    assert lambda1(a, b) == lambda1_ref(a, b)
    assert lam(a, b) == lam_ref(a, b) == lam_reflected(a, b)


@settings(max_examples=60, deadline=None)
@given(states)
def test_signs_and_identities(nab):
    n, a, b = nab
    assert delta2(n, a, b) >= 0
    assert delta1(n, a, b) <= 0
    assert big_sigma(n, a, b) >= 0
    assert psi(n, a, b) >= 0 and psi(n, a, b) == big_sigma(n, a, b) / n
    assert delta1(n + 1, a, b) - delta1(n, a, b) == delta2(n, a, b)
    assert big_sigma(n + 1, a, b) - big_sigma(n, a, b) == delta1(n, a, b)
    assert lam(a + 1, b) - lam(a, b) == lambda1(a, b) <= 0
    assert lambda1(a, b) == delta1(b + 2 * a, a, b)


def test_monotonicity_on_grid():
    for a in range(6):
        for b in range(7):
            d1 = [delta1(n, a, b) for n in range(a + b, a + b + 25)]
            sg = [big_sigma(n, a, b) for n in range(a + b, a + b + 25)]
            assert all(y >= x for x, y in zip(d1, d1[1:]))
            assert all(y <= x for x, y in zip(sg, sg[1:]))
        for b in range(7):
            lm = [lam(a, b) for a in range(30)]
            assert all(y <= x for x, y in zip(lm, lm[1:]))


def test_limit_proxies():
    for a in range(6):
        for b in range(3, 9):
            s = a + b
            gaps = [abs(big_sigma(n, a, b) - lam(a, b)) for n in (s, 2 * s + 10, 10 * s + 100)]
            assert gaps[0] > gaps[1] > gaps[2]
    for b in range(3, 9):
        vals = [lam(a, b) for a in (0, 10, 100, 1000)]
        assert vals[0] > vals[1] > vals[2] > vals[3] > 0
    ks = [abs(kaplim_sum(m, 3)) for m in (10, 100, 1000)]
    assert ks[0] > ks[1] > ks[2]


def test_sweep_small():
    rep = sweep_signs(3)
    assert rep.ok and rep.total_counterexamples == 0
    assert set(rep.checks) == set(SIGN_CHECKS) | set(IDENTITY_CHECKS)
    d = json.loads(rep.to_json())
    assert d["checks"]["delta2>=0"]["closest"] is not None
    num, den = d["checks"]["delta2>=0"]["closest"].split("/")
    assert F(int(num), int(den)) > 0


def test_sweep_counts_every_state():
    n_max = 12
    rep = sweep_signs(n_max)
    states_ = sum((n + 1) * (n + 2) // 2 for n in range(n_max + 1))
    assert rep.checks["delta2>=0"].checked == states_
    assert rep.checks["lambda>=0"].checked == (n_max + 1) ** 2
    assert rep.ok


def test_sweep_rejects_bad_nmax():
    with pytest.raises(ValueError):
        sweep_signs(0)
