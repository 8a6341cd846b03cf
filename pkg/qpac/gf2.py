"""Linear algebra over GF(2) on uint8 numpy arrays. Pivots are taken leftmost
first, so column 0 is the most significant position."""

import numpy as np
from numpy.typing import NDArray

Bits = NDArray[np.uint8]


def as_bits(mat: NDArray[np.integer] | list[list[int]]) -> Bits:
    return (np.asarray(mat, dtype=np.int64) & 1).astype(np.uint8)


def rref(mat: Bits) -> tuple[Bits, list[int]]:
    """Fully reduced row echelon form with zero rows dropped, and the pivot columns.
    Rows are sorted by ascending pivot."""
    a = as_bits(mat)
    if a.ndim != 2:
        raise ValueError(f"Expected a matrix, got shape {a.shape}")
    rows, cols = a.shape
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        hits = np.nonzero(a[r:, c])[0]
        if hits.size == 0:
            continue
        p = r + int(hits[0])
        if p != r:
            a[[r, p]] = a[[p, r]]
        others = np.nonzero(a[:, c])[0]
        others = others[others != r]
        a[others] ^= a[r]
        pivots.append(c)
        r += 1
    return a[:r].copy(), pivots


def rank(mat: Bits) -> int:
    if np.asarray(mat).size == 0:
        return 0
    return len(rref(mat)[1])


def reduce(vec: Bits, basis: Bits, pivots: list[int]) -> Bits:
    """Clear every pivot position of vec using a fully reduced basis. The result is
    zero iff vec is in the row span, and is the smallest member of vec + span."""
    out = as_bits(vec).copy()
    for row, p in zip(basis, pivots):
        if out[p]:
            out ^= row
    return out


def in_row_span(mat: Bits, vec: Bits) -> bool:
    if np.asarray(mat).size == 0:
        return not np.any(vec)
    basis, pivots = rref(mat)
    return not np.any(reduce(vec, basis, pivots))


def solve(a: Bits, b: Bits) -> Bits | None:
    """One solution x of a @ x = b, or None when the system is inconsistent"""
    a = as_bits(a)
    b = as_bits(b).reshape(-1, 1)
    cols = a.shape[1]
    reduced, pivots = rref(np.hstack([a, b]))
    if cols in pivots:
        return None
    x = np.zeros(cols, dtype=np.uint8)
    for row, p in zip(reduced, pivots):
        x[p] = row[cols]  # free variables are 0
    return x


def nullspace(mat: Bits) -> Bits:
    """Basis of {v : mat @ v = 0}, one vector per row"""
    a = as_bits(mat)
    cols = a.shape[1]
    if a.shape[0] == 0:
        return np.eye(cols, dtype=np.uint8)
    reduced, pivots = rref(a)
    free = [c for c in range(cols) if c not in pivots]
    out = np.zeros((len(free), cols), dtype=np.uint8)
    for i, f in enumerate(free):
        out[i, f] = 1
        for row, p in zip(reduced, pivots):
            out[i, p] = row[f]
    return out
