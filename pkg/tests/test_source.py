from __future__ import annotations

import itertools
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import markov2, markov3
from quicksym.source import (
    Alphabet,
    InvalidPrefixError,
    Markov,
    Memoryless,
    NullConditioningError,
    SourceError,
    condition_partial_sum,
    conditioned_source,
    fair_binary,
    iter_prefixes,
    load_markov,
    parse_source,
    prefix_prob,
    prefix_prob_less,
)

F = Fraction


def all_words(size: int, k: int):
    return itertools.product(range(size), repeat=k)


@st.composite
def rational_dists(draw, size):
    weights = draw(st.lists(st.integers(1, 20), min_size=size, max_size=size))
    total = sum(weights)
    return tuple(F(w, total) for w in weights)


@st.composite
def exact_sources(draw):
    size = draw(st.integers(2, 3))
    if draw(st.booleans()):
        return Memoryless.from_probs(draw(rational_dists(size)))
    init = draw(rational_dists(size))
    rows = tuple(draw(rational_dists(size)) for _ in range(size))
    return Markov(Alphabet.of_size(size), init, rows)


# -- construction ---------------------------------------------------------------


def test_alphabet_needs_two_distinct_symbols():
    with pytest.raises(SourceError):
        Alphabet(("a",))
    with pytest.raises(SourceError):
        Alphabet(("a", "a"))


def test_rejects_atomic_and_bad_distributions():
    with pytest.raises(SourceError):
        Memoryless.from_probs([F(1), F(0)])
    with pytest.raises(SourceError):
        Memoryless.from_probs([F(1, 2), F(1, 3)])
    with pytest.raises(SourceError):
        Memoryless.from_probs([0.5, 0.5 + 1e-9])
    with pytest.raises(SourceError):
        Memoryless.from_probs([F(3, 2), F(-1, 2)])
    # state 1 is reachable and always emits 1
    with pytest.raises(SourceError):
        Markov(Alphabet.of_size(2), (F(1, 2), F(1, 2)), ((F(1, 2), F(1, 2)), (F(0), F(1))))


def test_float_sum_tolerance():
    Memoryless.from_probs([0.1, 0.2, 0.7])  # sums to 1 only up to rounding


def test_unreachable_atomic_row_is_allowed():
    # state 1 can never be entered
    Markov(Alphabet.of_size(2), (F(1, 2), F(1, 2)), ((F(1, 2), F(1, 2)), (F(1, 2), F(1, 2))))
    m = Markov(Alphabet.of_size(3), (F(1, 2), F(1, 2), F(0)), ((F(1, 2), F(1, 2), F(0)),) * 2 + ((F(0), F(0), F(1)),))
    assert m.reachable_states() == [None, 0, 1]


# -- examples --------------------------------------------------------------------


def test_prefix_prob_examples(fair, tri):
    assert prefix_prob(fair, "01") == F(1, 4)
    assert prefix_prob(fair, "") == 1
    assert prefix_prob(tri, "20") == F(1, 10)
    assert prefix_prob(tri.to_float(), "20") == pytest.approx(0.10)


def test_prefix_prob_invalid_symbol(fair):
    with pytest.raises(InvalidPrefixError):
        prefix_prob(fair, "012")
    with pytest.raises(InvalidPrefixError):
        prefix_prob(fair, (0, 5))


def test_prefix_prob_less_examples(fair, tri):
    assert prefix_prob_less(fair, "0") == 0
    assert prefix_prob_less(fair, "10") == F(1, 2)
    assert prefix_prob_less(tri, "1") == F(1, 2)


def test_condition_partial_sum_examples(fair):
    assert condition_partial_sum(fair, 0) == 1.0
    skew = Memoryless.from_probs([0.9, 0.1])
    assert condition_partial_sum(skew, 1) == pytest.approx(1 + math.sqrt(0.82), abs=1e-15)
    limit = 2 + math.sqrt(2)
    sums = [condition_partial_sum(fair, k) for k in (10, 30, 80)]
    assert sums[0] < sums[1] < sums[2] < limit
    assert limit - sums[2] < 1e-11


def test_condition_partial_sum_matches_finite_geometric_sum(fair):
    r = 2**-0.5
    for depth in (0, 1, 5, 60):
        assert condition_partial_sum(fair, depth) == pytest.approx((1 - r ** (depth + 1)) / (1 - r), abs=1e-13)


def test_markov_partial_sum_matches_enumeration():
    m = markov3()
    for depth in range(5):
        brute = sum(
            math.sqrt(sum(float(prefix_prob(m, w)) ** 2 for w in all_words(3, k))) for k in range(depth + 1)
        )
        assert condition_partial_sum(m, depth) == pytest.approx(brute, rel=1e-13)


def test_conditioned_source_examples(fair, markov):
    assert conditioned_source(fair, "011") == fair
    assert conditioned_source(markov, "") == markov
    c = conditioned_source(markov, "a")
    assert c.initial == markov.transition[0]
    assert c.transition == markov.transition


def test_conditioning_on_null_prefix():
    m = Markov(Alphabet.of_size(3), (F(1, 2), F(1, 2), F(0)), ((F(1, 2), F(1, 2), F(0)),) * 2 + ((F(0), F(0), F(1)),))
    with pytest.raises(NullConditioningError):
        conditioned_source(m, "2")


def test_iter_prefixes_is_breadth_first():
    ab = Alphabet.of_size(2)
    assert list(iter_prefixes(ab, 2)) == [(), (0,), (1,), (0, 0), (0, 1), (1, 0), (1, 1)]


# -- parsing ----------------------------------------------------------------------


def test_parse_memoryless_exact():
    s = parse_source("memoryless:0.5,0.3,0.2")
    assert s.probs == (F(1, 2), F(3, 10), F(1, 5))
    assert parse_source("memoryless:1/3,2/3").probs == (F(1, 3), F(2, 3))


@pytest.mark.parametrize("spec", ["memoryless:", "memoryless:0.5,x", "dynamical:1", "memoryless:1,0", "markov:/nonexistent.json"])
def test_parse_errors(spec):
    with pytest.raises(SourceError):
        parse_source(spec)


def test_markov_json_layout(markov_file):
    m = parse_source(f"markov:{markov_file}")
    assert m == markov3()
    assert load_markov(markov_file).alphabet.symbols == ("a", "b", "c")
    assert prefix_prob(m, "ab") == F(1, 12)


def test_multichar_alphabet_prefixes():
    ab = Alphabet(("lo", "hi"))
    assert ab.parse("hi,lo") == (1, 0)
    assert ab.format((1, 0)) == "hi,lo"


# -- properties ------------------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(exact_sources(), st.integers(0, 6))
def test_level_mass_is_one(source, k):
    size = len(source.alphabet)
    if size**k > 800:
        k = 4
    assert sum(prefix_prob(source, w) for w in all_words(size, k)) == 1


@settings(max_examples=40, deadline=None)
@given(exact_sources(), st.data())
def test_kolmogorov_consistency(source, data):
    size = len(source.alphabet)
    w = tuple(data.draw(st.lists(st.integers(0, size - 1), max_size=6)))
    assert prefix_prob(source, w) == sum(prefix_prob(source, w + (s,)) for s in range(size))


@settings(max_examples=40, deadline=None)
@given(exact_sources(), st.data())
def test_prefix_prob_less_matches_enumeration(source, data):
    size = len(source.alphabet)
    k = data.draw(st.integers(0, 8 if size == 2 else 5))
    w = tuple(data.draw(st.lists(st.integers(0, size - 1), min_size=k, max_size=k)))
    brute = sum(prefix_prob(source, v) for v in all_words(size, k) if v < w)
    assert prefix_prob_less(source, w) == brute


@settings(max_examples=30, deadline=None)
@given(exact_sources(), st.integers(0, 30))
def test_partial_sum_nondecreasing(source, depth):
    assert condition_partial_sum(source, depth + 1) >= condition_partial_sum(source, depth)


@settings(max_examples=40, deadline=None)
@given(exact_sources(), st.data())
def test_conditioning_composes(source, data):
    size = len(source.alphabet)
    w1 = tuple(data.draw(st.lists(st.integers(0, size - 1), max_size=3)))
    w2 = tuple(data.draw(st.lists(st.integers(0, size - 1), max_size=3)))
    if prefix_prob(source, w1 + w2) == 0:
        return
    twice = conditioned_source(conditioned_source(source, w1), w2)
    once = conditioned_source(source, w1 + w2)
    for k in range(4):
        for v in all_words(size, k):
            assert prefix_prob(twice, v) == prefix_prob(once, v)


def test_conditioning_composes_to_depth_six():
    m = markov2()
    for w1, w2 in [("0", "1"), ("01", "10"), ("", "11"), ("1", "")]:
        twice = conditioned_source(conditioned_source(m, w1), w2)
        once = conditioned_source(m, w1 + w2)
        for k in range(7):
            for v in all_words(2, k):
                assert prefix_prob(twice, v) == prefix_prob(once, v)


def test_conditioned_prefix_probability_is_a_ratio():
    m = markov3()
    for w1 in ["a", "bc", "cab"]:
        c = conditioned_source(m, w1)
        for v in ["", "a", "bb", "cab"]:
            assert prefix_prob(c, v) == prefix_prob(m, w1 + v) / prefix_prob(m, w1)


def test_fair_binary_is_exact():
    assert fair_binary().exact
