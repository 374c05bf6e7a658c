"""Exact and tolerance-based linear algebra over sample points.

Two regimes, chosen per point:

* all entries rational: fraction-free (Bareiss) elimination and an
  incremental reduced row span over ``Fraction``; verdicts carry no
  tolerance at all,
* any floating entry: numpy SVD with singular values below
  ``tol * sigma_max`` treated as zero.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd
from typing import Sequence

import numpy as np

__all__ = ["bareiss_rank", "float_rank", "PointSpan"]


def _integer_rows(rows: Sequence[Sequence[Fraction]]) -> list[list[int]]:
    out = []
    for row in rows:
        denom_lcm = 1
        for x in row:
            denom_lcm = denom_lcm * x.denominator // gcd(denom_lcm, x.denominator)
        scaled = [int(x * denom_lcm) for x in row]
        content = 0
        for v in scaled:
            content = gcd(content, abs(v))
        if content > 1:
            scaled = [v // content for v in scaled]
        out.append(scaled)
    return out


def bareiss_rank(rows: Sequence[Sequence[Fraction]]) -> int:
    """Rank by fraction-free Gaussian elimination, exact."""
    m = _integer_rows(rows)
    if not m:
        return 0
    nrows, ncols = len(m), len(m[0])
    rank = 0
    prev = 1
    row = 0
    for col in range(ncols):
        pivot = None
        for r in range(row, nrows):
            if m[r][col] != 0:
                pivot = r
                break
        if pivot is None:
            continue
        m[row], m[pivot] = m[pivot], m[row]
        for r in range(row + 1, nrows):
            for c in range(col + 1, ncols):
                m[r][c] = (m[row][col] * m[r][c] - m[r][col] * m[row][c]) // prev
            m[r][col] = 0
        prev = m[row][col]
        row += 1
        rank += 1
        if row == nrows:
            break
    return rank


def float_rank(rows: Sequence[Sequence[float]], tol: float) -> int:
    a = np.asarray(rows, dtype=float)
    if a.size == 0:
        return 0
    sv = np.linalg.svd(a, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.count_nonzero(sv > tol * sv[0]))


class PointSpan:
    """Span of row vectors at a single sample point.

    Exact mode keeps a reduced basis over ``Fraction``; float mode keeps
    the raw rows and answers rank queries through thresholded SVD so
    that membership is exactly "augmenting does not raise the rank".
    """

    def __init__(self, exact: bool, dim: int, tol: float = 1e-8):
        self.exact = exact
        self.dim = dim
        self.tol = tol
        self._basis: list[list[Fraction]] = []
        self._pivots: list[int] = []
        self._rows: list[list[float]] = []
        self._rank_cache: int | None = None

    @property
    def rank(self) -> int:
        if self.exact:
            return len(self._basis)
        if self._rank_cache is None:
            self._rank_cache = float_rank(self._rows, self.tol)
        return self._rank_cache

    def _reduce(self, vec: list[Fraction]) -> list[Fraction]:
        v = list(vec)
        for row, p in zip(self._basis, self._pivots):
            if v[p] != 0:
                f = v[p]
                for c in range(p, self.dim):
                    v[c] -= f * row[c]
        return v

    def insert(self, vec) -> bool:
        """Add a vector; return True when it enlarged the span."""
        if self.exact:
            v = self._reduce([Fraction(x) for x in vec])
            pivot = next((c for c in range(self.dim) if v[c] != 0), None)
            if pivot is None:
                return False
            inv = v[pivot]
            v = [x / inv for x in v]
            for row, p in zip(self._basis, self._pivots):
                if row[pivot] != 0:
                    f = row[pivot]
                    for c in range(self.dim):
                        row[c] -= f * v[c]
            self._basis.append(v)
            self._pivots.append(pivot)
            return True
        before = self.rank
        self._rows.append([float(x) for x in vec])
        self._rank_cache = None
        if self.rank > before:
            return True
        self._rows.pop()
        self._rank_cache = None
        return False

    def contains(self, vec) -> bool:
        if self.exact:
            v = self._reduce([Fraction(x) for x in vec])
            return all(x == 0 for x in v)
        before = self.rank
        return float_rank(self._rows + [[float(x) for x in vec]], self.tol) == before

    def extend(self, vecs) -> int:
        added = 0
        for v in vecs:
            if self.insert(v):
                added += 1
        return added
