from __future__ import annotations

import json
from fractions import Fraction

import pytest

from quicksym.source import Alphabet, Markov, Memoryless, fair_binary

MARKOV_LAYOUT = {
    "alphabet": ["a", "b", "c"],
    "initial": ["1/3", "1/3", "1/3"],
    "transition": [["1/2", "1/4", "1/4"], ["1/5", "3/5", "1/5"], ["0.3", "0.3", "0.4"]],
}


def markov3() -> Markov:
    F = Fraction
    return Markov(
        Alphabet(("a", "b", "c")),
        (F(1, 3), F(1, 3), F(1, 3)),
        ((F(1, 2), F(1, 4), F(1, 4)), (F(1, 5), F(3, 5), F(1, 5)), (F(3, 10), F(3, 10), F(2, 5))),
    )


def markov2() -> Markov:
    F = Fraction
    return Markov(Alphabet.of_size(2), (F(1, 2), F(1, 2)), ((F(2, 3), F(1, 3)), (F(1, 4), F(3, 4))))


@pytest.fixture
def fair():
    return fair_binary()


@pytest.fixture
def tri():
    return Memoryless.from_probs([Fraction(1, 2), Fraction(3, 10), Fraction(1, 5)])


@pytest.fixture
def markov():
    return markov3()


@pytest.fixture
def markov_file(tmp_path):
    path = tmp_path / "chain.json"
    path.write_text(json.dumps(MARKOV_LAYOUT))
    return path
