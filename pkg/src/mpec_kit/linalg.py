"""Dense exact linear algebra over ``Fraction``."""
from __future__ import annotations

from fractions import Fraction
from typing import Sequence

from .expr import format_rational, to_rational

Vector = tuple[Fraction, ...]


class RationalMatrix:
    """Immutable dense rational matrix; keeps ``ncols`` so 0-row matrices have a width."""

    __slots__ = ("rows", "ncols")

    def __init__(self, rows: Sequence[Sequence], ncols: int | None = None):
        rows = tuple(tuple(to_rational(v) for v in r) for r in rows)
        if ncols is None:
            if not rows:
                raise ValueError("ncols is required for a matrix with no rows")
            ncols = len(rows[0])
        if any(len(r) != ncols for r in rows):
            raise ValueError("ragged matrix")
        self.rows = rows
        self.ncols = ncols

    @classmethod
    def identity(cls, k: int) -> RationalMatrix:
        return cls([[1 if i == j else 0 for j in range(k)] for i in range(k)], k)

    @classmethod
    def zeros(cls, r: int, c: int) -> RationalMatrix:
        return cls([[0] * c for _ in range(r)], c)

    @property
    def nrows(self) -> int:
        return len(self.rows)

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.rows), self.ncols)

    def __getitem__(self, idx):
        i, j = idx
        return self.rows[i][j]

    def row(self, i) -> Vector:
        return self.rows[i]

    def col(self, j) -> Vector:
        return tuple(r[j] for r in self.rows)

    @property
    def T(self) -> RationalMatrix:
        return RationalMatrix([self.col(j) for j in range(self.ncols)], self.nrows)

    def __matmul__(self, other):
        if isinstance(other, RationalMatrix):
            if self.ncols != other.nrows:
                raise ValueError("shape mismatch")
            cols = [other.col(j) for j in range(other.ncols)]
            return RationalMatrix([[dot(r, c) for c in cols] for r in self.rows], other.ncols)
        if len(other) != self.ncols:
            raise ValueError("shape mismatch")
        return tuple(dot(r, other) for r in self.rows)

    def __eq__(self, other):
        return isinstance(other, RationalMatrix) and self.shape == other.shape and self.rows == other.rows

    def __hash__(self):
        return hash((self.rows, self.ncols))

    def tolist(self) -> list[list[Fraction]]:
        return [list(r) for r in self.rows]

    def __repr__(self):
        body = "; ".join(" ".join(format_rational(v) for v in r) for r in self.rows)
        return f"RationalMatrix[{self.nrows}x{self.ncols}]({body})"


def dot(a, b) -> Fraction:
    return sum((x * y for x, y in zip(a, b)), Fraction(0))


def rref(rows: Sequence[Sequence[Fraction]], ncols: int):
    """Reduced row echelon form; returns (nonzero rows, pivot columns)."""
    m = [list(map(Fraction, r)) for r in rows]
    pivots = []
    r = 0
    for c in range(ncols):
        if r == len(m):
            break
        p = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if p is None:
            continue
        m[r], m[p] = m[p], m[r]
        pv = m[r][c]
        if pv != 1:
            m[r] = [v / pv for v in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
    return [tuple(row) for row in m[:r]], pivots


def matrix_rank(M) -> int:
    rows, ncols = _rows_cols(M)
    return len(rref(rows, ncols)[1])


def null_space(M) -> list[Vector]:
    """Basis of ``{v : M v = 0}``, in reduced echelon (canonical) form."""
    rows, ncols = _rows_cols(M)
    R, piv = rref(rows, ncols)
    free = [c for c in range(ncols) if c not in piv]
    basis = []
    for f in free:
        v = [Fraction(0)] * ncols
        v[f] = Fraction(1)
        for i, pc in enumerate(piv):
            v[pc] = -R[i][f]
        basis.append(tuple(v))
    return canonical_basis(basis, ncols)


def canonical_basis(vectors, ncols: int) -> list[Vector]:
    """Reduced-echelon basis of the span; a unique representative of the subspace."""
    R, _ = rref(vectors, ncols)
    return R


def row_space_contains(rows, ncols: int, v) -> bool:
    if not rows:
        return all(x == 0 for x in v)
    return matrix_rank((list(rows) + [v], ncols)) == matrix_rank((list(rows), ncols))


def solve(A_rows, b, ncols: int):
    """One solution of ``A v = b`` (free variables set to 0), or ``None``."""
    aug = [list(r) + [to_rational(bi)] for r, bi in zip(A_rows, b)]
    R, piv = rref(aug, ncols + 1)
    if ncols in piv:
        return None
    v = [Fraction(0)] * ncols
    for i, pc in enumerate(piv):
        v[pc] = R[i][ncols]
    return tuple(v)


def project_onto_span(v, basis) -> Vector:
    """Orthogonal projection of ``v`` onto span(basis) (basis need not be orthogonal)."""
    k = len(basis)
    if k == 0:
        return tuple(Fraction(0) for _ in v)
    gram = [[dot(basis[i], basis[j]) for j in range(k)] for i in range(k)]
    rhs = [dot(b, v) for b in basis]
    coef = solve(gram, rhs, k)
    return tuple(sum((coef[i] * basis[i][t] for i in range(k)), Fraction(0)) for t in range(len(v)))


def _rows_cols(M):
    if isinstance(M, RationalMatrix):
        return M.rows, M.ncols
    rows, ncols = M
    return rows, ncols


def normalize_direction(v) -> Vector:
    """Scale by a positive factor so the first nonzero entry is +-1."""
    first = next((x for x in v if x != 0), None)
    if first is None:
        return tuple(v)
    s = abs(first)
    return tuple(x / s for x in v)
