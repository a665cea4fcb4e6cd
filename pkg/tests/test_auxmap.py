import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import EXAMPLE_COINS, random_coin, random_density, random_unitary
from oqwalk.auxmap import (NO_OBSTRUCTION, REDUCIBLE_CANDIDATE, apply_aux, apply_aux_matrix,
                           aux_irreducibility_evidence, balanced_words, build_superoperator,
                           fixed_point_iteration, invariant_states, oqw_irreducibility_search,
                           word_product)
from oqwalk.coin import validate_coin
from oqwalk.reproduce import load_fixture

seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 4))
def test_superoperator_agrees_with_direct_application(seed, d):
    rng = np.random.default_rng(seed)
    c = random_coin(rng, d)
    rho = random_density(rng, d)
    sup = build_superoperator(c)
    assert np.allclose(sup.apply(rho), apply_aux_matrix(c, rho), atol=1e-13)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 3))
def test_aux_map_preserves_trace_and_positivity(seed, d):
    rng = np.random.default_rng(seed)
    c = random_coin(rng, d)
    out = apply_aux(c, random_density(rng, d))
    assert abs(np.trace(out.matrix) - 1) < 1e-12


def test_invariant_state_nonunital_pq():
    rep = invariant_states(load_fixture("pq_nonunital"))
    assert rep.unique and rep.faithful
    assert np.allclose(rep.state.matrix, np.diag([1, 2]) / 3, atol=1e-12)


def test_invariant_state_unbalanced_closed_form():
    s6 = math.sqrt(6)
    rep = invariant_states(load_fixture("unbalanced"))
    assert rep.unique
    assert np.allclose(rep.state.matrix, np.array([[15, 6 + s6], [6 + s6, 5]]) / 20, atol=1e-12)


def test_invariant_state_unital_coins():
    for name in ("shear", "unitary_sum_balanced", "unitary_sum_real", "unitary_sum_complex"):
        rep = invariant_states(load_fixture(name))
        assert rep.unique and rep.faithful
        assert np.allclose(rep.state.matrix, np.eye(2) / 2, atol=1e-12)


def test_invariant_state_not_faithful():
    for x in (0.1, 0.3, 0.45):
        rep = invariant_states(load_fixture("one_eigvec_family", x=x))
        assert rep.unique and not rep.faithful
        assert np.allclose(rep.state.matrix, np.diag([1, 0]), atol=1e-10)


def test_diagonal_coin_has_two_dimensional_kernel():
    rep = invariant_states(load_fixture("pq_diagonal"))
    assert rep.kernel_dim == 2 and not rep.unique
    assert len(rep.states) >= 1
    for s in rep.states:
        assert np.allclose(s.matrix, np.diag(np.diag(s.matrix)), atol=1e-12)


def test_classical_coin_dimension_one():
    rep = invariant_states(load_fixture("classical_third"))
    assert rep.unique and rep.faithful
    assert rep.state.matrix[0, 0] == pytest.approx(1)


@pytest.mark.parametrize("name", ["pq_nonunital", "unbalanced", "shear", "qutrit"])
def test_kernel_agrees_with_fixed_point_iteration(name):
    c = load_fixture(name)
    rep = invariant_states(c)
    assert np.allclose(fixed_point_iteration(c, 4000), rep.state.matrix, atol=1e-9)
    assert max(rep.residuals) < 1e-12


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_invariant_state_is_unitarily_covariant(seed):
    rng = np.random.default_rng(seed)
    u = random_unitary(rng)
    for name in ("pq_nonunital", "unbalanced"):
        c = load_fixture(name)
        rho = invariant_states(c).state.matrix
        moved = invariant_states(c.conjugated(u)).state.matrix
        assert np.allclose(moved, u @ rho @ u.conj().T, atol=1e-8)


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(2, 3))
def test_random_coins_have_faithful_fixed_points(seed, d):
    c = random_coin(np.random.default_rng(seed), d)
    rep = invariant_states(c)
    assert rep.kernel_dim >= 1
    for s in rep.states:
        assert np.abs(apply_aux_matrix(c, s.matrix) - s.matrix).max() < 1e-9


def test_balanced_words():
    for length in (2, 4, 6, 8):
        words = list(balanced_words(length))
        assert len(words) == math.comb(length, length // 2)
        assert all(sum(w) == 0 for w in words)
    assert list(balanced_words(3)) == []


def test_word_product_order():
    c = load_fixture("unbalanced")
    # the first letter acts first
    assert np.allclose(word_product(c, (-1, 1)), c.right @ c.left)
    assert np.allclose(word_product(c, (1, -1)), c.left @ c.right)


def test_irreducibility_search():
    assert oqw_irreducibility_search(load_fixture("shear")).status == NO_OBSTRUCTION
    assert oqw_irreducibility_search(load_fixture("qutrit")).status == NO_OBSTRUCTION
    assert oqw_irreducibility_search(load_fixture("unbalanced")).status == NO_OBSTRUCTION
    diag = oqw_irreducibility_search(load_fixture("pq_diagonal"))
    assert diag.status == REDUCIBLE_CANDIDATE
    fam = oqw_irreducibility_search(load_fixture("one_eigvec_family", x=0.3))
    assert fam.status == REDUCIBLE_CANDIDATE
    assert np.allclose(np.abs(fam.vectors[0]), [1, 0])
    with pytest.raises(ValueError):
        oqw_irreducibility_search(load_fixture("shear"), max_len=5)


def test_irreducibility_search_block_diagonal_qutrit():
    s = load_fixture("shear")
    left = np.zeros((3, 3), complex)
    right = np.zeros((3, 3), complex)
    left[:2, :2], right[:2, :2] = s.left, s.right
    left[2, 2] = right[2, 2] = math.sqrt(0.5)
    assert oqw_irreducibility_search(validate_coin(left, right)).status == REDUCIBLE_CANDIDATE


def test_aux_irreducibility_evidence():
    assert aux_irreducibility_evidence(load_fixture("shear")).aux_irreducible is True
    assert aux_irreducibility_evidence(load_fixture("one_eigvec_family", x=0.3)).aux_irreducible is False
    assert aux_irreducibility_evidence(load_fixture("pq_diagonal")).aux_irreducible is False


@pytest.mark.parametrize("name", EXAMPLE_COINS)
def test_every_example_has_an_invariant_state(name):
    c = load_fixture(name)
    rep = invariant_states(c)
    for s in rep.states:
        assert np.abs(apply_aux_matrix(c, s.matrix) - s.matrix).max() < 1e-10
