import itertools

import numpy as np
import pytest

from mpshl.indicator import build_indicator_family, fired_state, position, shift_operator, waiting_state


def positive_table(N, seed=0):
    return np.random.default_rng(seed).uniform(0.05, 0.5, (N, N))


def test_shift_operator_routes_rows():
    P = shift_operator(2)
    assert P.shape == (10, 10)
    # row k+1 picks up columns kN+1..kN+N (1-based)
    assert np.argwhere(P).tolist() == [[1, 2], [1, 3], [2, 4], [2, 5]]


def test_state_indexing():
    assert waiting_state(3, 1, 1) == 4 and waiting_state(3, 3, 3) == 12
    assert position(3, 2, 1) == 4
    assert fired_state(3, 1, 1) == 13 and fired_state(3, 3, 3) == 21


@pytest.mark.parametrize("N", [2, 3])
def test_only_designated_words_survive(N):
    fam = build_indicator_family(positive_table(N, N))
    L = N * N
    survivors = []
    for word in itertools.product((0, 1), repeat=L):
        prod = fam.word_product(word)
        nz = np.argwhere(np.abs(prod) > 0)
        if len(nz):
            assert len(nz) == 1
            survivors.append((word, tuple(nz[0] + 1), prod[tuple(nz[0])]))
    assert len(survivors) == L
    for word, entry, value in survivors:
        j = word.index(1) + 1
        k, l = divmod(j - 1, N)
        assert fam.designated_word(k + 1, l + 1) == word
        assert entry == tuple(fam.positions[k, l])
        assert abs(value - fam.values[k, l]) < 1e-15


def test_surviving_row_offset():
    fam = build_indicator_family(positive_table(3))
    # the entry of pair (k, l) sits on row k + 1
    assert fam.positions[:, :, 0].tolist() == [[2, 2, 2], [3, 3, 3], [4, 4, 4]]


def test_gauge_exact():
    fam = build_indicator_family(positive_table(4), gamma=0.8)
    assert fam.gauge_residuals().max() < 1e-15


def test_zero_entries_give_zero_words():
    Y = positive_table(2)
    Y[0, 1] = 0.0
    fam = build_indicator_family(Y)
    assert not np.any(fam.word_product(fam.designated_word(1, 2)))


def test_input_validation():
    with pytest.raises(ValueError):
        build_indicator_family(np.full((2, 2), 1.0))
    with pytest.raises(ValueError):
        build_indicator_family(-positive_table(2))
    with pytest.raises(ValueError):
        build_indicator_family(positive_table(2), gamma=1.5)
    with pytest.raises(ValueError):
        build_indicator_family(np.zeros((2, 3)))
