import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from qpac import gf2

_matrices = hnp.arrays(
    np.uint8,
    st.tuples(st.integers(1, 6), st.integers(1, 8)),
    elements=st.integers(0, 1),
)


def test_rref_example() -> None:
    m = gf2.as_bits([[1, 1, 0], [1, 0, 1], [0, 1, 1]])
    reduced, pivots = gf2.rref(m)
    assert pivots == [0, 1]
    assert np.array_equal(reduced, [[1, 0, 1], [0, 1, 1]])
    assert gf2.rank(m) == 2


def test_as_bits_reduces_mod_two() -> None:
    assert np.array_equal(gf2.as_bits([[2, 3, -1]]), [[0, 1, 1]])


def test_solve_inconsistent() -> None:
    a = gf2.as_bits([[1, 0], [1, 0]])
    assert gf2.solve(a, gf2.as_bits([1, 0])) is None
    assert np.array_equal(gf2.solve(a, gf2.as_bits([1, 1])), [1, 0])


def test_empty_span() -> None:
    empty = np.zeros((0, 3), dtype=np.uint8)
    assert gf2.rank(empty) == 0
    assert gf2.in_row_span(empty, np.zeros(3, dtype=np.uint8))
    assert not gf2.in_row_span(empty, gf2.as_bits([0, 1, 0]))
    assert gf2.nullspace(empty).shape == (3, 3)


def test_reduce_gives_smallest_coset_member() -> None:
    basis, pivots = gf2.rref(gf2.as_bits([[0, 1, 1]]))
    assert np.array_equal(gf2.reduce(gf2.as_bits([1, 1, 0]), basis, pivots), [1, 0, 1])


@settings(max_examples=100, deadline=None)
@given(mat=_matrices)
def test_nullspace_is_annihilated(mat: np.ndarray) -> None:
    null = gf2.nullspace(mat)
    assert null.shape[0] == mat.shape[1] - gf2.rank(mat)
    assert not np.any((mat.astype(np.int64) @ null.T.astype(np.int64)) % 2)
    if null.shape[0]:
        assert gf2.rank(null) == null.shape[0]


@settings(max_examples=100, deadline=None)
@given(mat=_matrices, data=st.data())
def test_span_membership_and_solve(mat: np.ndarray, data: st.DataObject) -> None:
    coeffs = np.array(
        data.draw(st.lists(st.integers(0, 1), min_size=mat.shape[0], max_size=mat.shape[0])),
        dtype=np.int64,
    )
    vec = ((coeffs @ mat.astype(np.int64)) % 2).astype(np.uint8)
    assert gf2.in_row_span(mat, vec)
    x = gf2.solve(mat.T, vec)
    assert x is not None
    assert np.array_equal((mat.T.astype(np.int64) @ x) % 2, vec)


@settings(max_examples=100, deadline=None)
@given(mat=_matrices)
def test_rref_preserves_row_space(mat: np.ndarray) -> None:
    reduced, pivots = gf2.rref(mat)
    assert pivots == sorted(pivots)
    for row in mat:
        assert gf2.in_row_span(reduced, row)
    for row in reduced:
        assert gf2.in_row_span(mat, row)
