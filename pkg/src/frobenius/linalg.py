"""Linear algebra over the field of symbolic expressions.

Generic rank, inversion, solving, and span membership with validated
certificates.  Elimination re-reduces to canonical form at every step (the
expression layer cancels numerator/denominator gcds), and the pivot rule is
deterministic: smallest printed form, ties broken by lowest row then column.
Every pivot contributes its numerator and denominator factors to an excluded
locus so callers can report where the generic answer degenerates.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import sympy as sm

from .expr import Expr, ExprError, EvalError, Point, Scope

__all__ = [
    "ExprMatrix",
    "SpanCertificate",
    "SpanSolver",
    "LinalgError",
    "generic_rank",
    "invert",
    "solve",
    "in_span",
    "determinant",
    "sample_points",
]


class LinalgError(ValueError):
    """Singular, inconsistent, or underdetermined system."""


class ExprMatrix:
    """Dense row-major matrix of canonical expressions."""

    __slots__ = ("rows", "cols", "_entries")

    def __init__(self, rows: int, cols: int, entries: Sequence[Expr]):
        if rows <= 0 or cols <= 0:
            raise LinalgError("matrix dimensions must be positive")
        if len(entries) != rows * cols:
            raise LinalgError("entry count does not match dimensions")
        self.rows = rows
        self.cols = cols
        self._entries = list(entries)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[Expr]]) -> "ExprMatrix":
        flat = [entry for row in rows for entry in row]
        return cls(len(rows), len(rows[0]), flat)

    @classmethod
    def identity(cls, scope: Scope, size: int) -> "ExprMatrix":
        return cls(
            size,
            size,
            [scope.one if i == j else scope.zero for i in range(size) for j in range(size)],
        )

    @property
    def scope(self) -> Scope:
        return self._entries[0].scope

    def at(self, i: int, j: int) -> Expr:
        return self._entries[i * self.cols + j]

    def row(self, i: int) -> list[Expr]:
        return self._entries[i * self.cols : (i + 1) * self.cols]

    def col(self, j: int) -> list[Expr]:
        return [self.at(i, j) for i in range(self.rows)]

    def to_rows(self) -> list[list[Expr]]:
        return [self.row(i) for i in range(self.rows)]

    def transpose(self) -> "ExprMatrix":
        return ExprMatrix(
            self.cols,
            self.rows,
            [self.at(i, j) for j in range(self.cols) for i in range(self.rows)],
        )

    def mul(self, other: "ExprMatrix") -> "ExprMatrix":
        if self.cols != other.rows:
            raise LinalgError("dimension mismatch in product")
        out = []
        for i in range(self.rows):
            for j in range(other.cols):
                acc = self.at(i, 0) * other.at(0, j)
                for k in range(1, self.cols):
                    acc = acc + self.at(i, k) * other.at(k, j)
                out.append(acc)
        return ExprMatrix(self.rows, other.cols, out)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ExprMatrix):
            return NotImplemented
        return (
            self.rows == other.rows
            and self.cols == other.cols
            and self._entries == other._entries
        )

    def __repr__(self) -> str:
        body = "; ".join(
            ", ".join(e.print() for e in self.row(i)) for i in range(self.rows)
        )
        return f"[{body}]"


@dataclass
class Echelon:
    """Result of reduced row elimination with full pivoting."""

    work: list[list[Expr]]
    pivots: list[tuple[int, int]]  # (work row, column) in elimination order
    excluded: list[Expr]

    @property
    def rank(self) -> int:
        return len(self.pivots)

    def pivot_cols(self) -> list[int]:
        return sorted(c for _, c in self.pivots)


def _locus_factors(entry: Expr, into: list[Expr]) -> None:
    """Append the nonconstant irreducible factors of num and den of entry."""
    scope = entry.scope
    for part in (entry._num, entry._den):
        if not part.free_symbols:
            continue
        for factor, _ in sm.factor_list(part)[1]:
            expr = Expr._canonical(scope, sm.expand(factor), sm.Integer(1))
            if expr.is_constant():
                continue
            if expr._num.is_Symbol and expr.has_kernels():
                continue  # bare exponential kernels never vanish
            if _leading_sign(expr) < 0:
                expr = -expr
            if expr not in into:
                into.append(expr)


def _leading_sign(expr: Expr) -> int:
    gens = Expr._gens_for(expr.scope, expr._num)
    if not gens:
        return 1 if sm.Rational(expr._num) > 0 else -1
    poly = sm.Poly(expr._num, *gens, domain="QQ")
    best = max(poly.terms(), key=lambda t: (sum(t[0]), t[0]))
    return 1 if best[1] > 0 else -1


def echelon(
    matrix: ExprMatrix,
    prefer_cols: Sequence[int] | None = None,
    pivot_col_limit: int | None = None,
) -> Echelon:
    """Reduced row echelon by full pivoting under the deterministic rule.

    prefer_cols forces the first pivots into the given columns in order and
    raises if one of them admits no nonzero pivot.  pivot_col_limit restricts
    pivoting to the first so many columns (augmented systems).
    """
    work = [list(matrix.row(i)) for i in range(matrix.rows)]
    n_cols = matrix.cols if pivot_col_limit is None else pivot_col_limit
    free_rows = set(range(matrix.rows))
    free_cols = set(range(n_cols))
    pivots: list[tuple[int, int]] = []
    excluded: list[Expr] = []
    step = 0
    while free_rows and free_cols:
        if prefer_cols is not None and step < len(prefer_cols):
            allowed = {prefer_cols[step]}
            if not allowed & free_cols:
                raise LinalgError("requested pivot column already consumed")
        else:
            allowed = free_cols
        best: tuple[int, int, int] | None = None
        for r in sorted(free_rows):
            for c in sorted(allowed):
                entry = work[r][c]
                if entry.is_zero():
                    continue
                size = len(entry.print())
                if best is None or (size, r, c) < best:
                    best = (size, r, c)
        if best is None:
            if prefer_cols is not None and step < len(prefer_cols):
                raise LinalgError(
                    "singular pivot choice: no nonzero entry in preferred column"
                )
            break
        _, r, c = best
        pivot = work[r][c]
        _locus_factors(pivot, excluded)
        inv = pivot.scope.one / pivot
        work[r] = [inv * e for e in work[r]]
        for other in range(matrix.rows):
            if other == r:
                continue
            factor = work[other][c]
            if factor.is_zero():
                continue
            work[other] = [
                a - factor * b for a, b in zip(work[other], work[r])
            ]
        pivots.append((r, c))
        free_rows.discard(r)
        free_cols.discard(c)
        step += 1
    return Echelon(work, pivots, excluded)


def _exact_poly_div(a: Expr, b: Expr) -> Expr:
    """Quotient of two polynomial expressions known to divide exactly."""
    scope = a.scope
    if b.is_one():
        return a
    gens = Expr._gens_for(scope, a._num, b._num)
    if not gens:
        return a / b
    quotient, remainder = sm.Poly(a._num, *gens, domain="QQ").div(
        sm.Poly(b._num, *gens, domain="QQ")
    )
    if not remainder.is_zero:
        raise LinalgError("fraction-free elimination lost exact divisibility")
    return Expr._make(scope, quotient.as_expr(), sm.Integer(1))


def rank_echelon(matrix: ExprMatrix) -> Echelon:
    """Fraction-free forward elimination: pivots and excluded locus only.

    Rows are cleared of denominators first (a nonzero rescaling never moves
    the generic rank); the one-step updates divide exactly by the previous
    pivot, so entries stay polynomial.  Falls back to field elimination for
    kernel-bearing matrices, where exact divisibility is not guaranteed.
    """
    scope = matrix.scope
    work: list[list[Expr]] = []
    for i in range(matrix.rows):
        row = matrix.row(i)
        if any(e.has_kernels() for e in row):
            return echelon(matrix)
        common = scope.one
        for entry in row:
            if entry._den != 1:
                den = Expr._make(scope, entry._den, sm.Integer(1))
                common = common * den / _gcd_expr(common, den)
        work.append([entry * common for entry in row])
    free_rows = set(range(matrix.rows))
    free_cols = set(range(matrix.cols))
    pivots: list[tuple[int, int]] = []
    excluded: list[Expr] = []
    previous: Expr | None = None
    while free_rows and free_cols:
        best: tuple[int, int, int] | None = None
        for r in sorted(free_rows):
            for c in sorted(free_cols):
                entry = work[r][c]
                if entry.is_zero():
                    continue
                size = len(entry.print())
                if best is None or (size, r, c) < best:
                    best = (size, r, c)
        if best is None:
            break
        _, r, c = best
        pivot = work[r][c]
        _locus_factors(pivot, excluded)
        for other in free_rows:
            if other == r:
                continue
            factor = work[other][c]
            updated = []
            for a, b in zip(work[other], work[r]):
                value = a * pivot - b * factor
                if previous is not None and not value.is_zero():
                    value = _exact_poly_div(value, previous)
                updated.append(value)
            work[other] = updated
        pivots.append((r, c))
        free_rows.discard(r)
        free_cols.discard(c)
        previous = pivot
    return Echelon(work, pivots, excluded)


def _gcd_expr(a: Expr, b: Expr) -> Expr:
    scope = a.scope
    if a.is_one() or b.is_one():
        return scope.one
    gens = Expr._gens_for(scope, a._num, b._num)
    if not gens:
        return scope.one
    g = sm.Poly(a._num, *gens, domain="QQ").gcd(sm.Poly(b._num, *gens, domain="QQ"))
    return Expr._make(scope, g.as_expr(), sm.Integer(1))


def generic_rank(matrix: ExprMatrix) -> int:
    """Rank over the fraction field (attained off the excluded locus)."""
    return rank_echelon(matrix).rank


def determinant(matrix: ExprMatrix) -> Expr:
    """Exact determinant by cofactor expansion along the first row."""
    if matrix.rows != matrix.cols:
        raise LinalgError("determinant requires a square matrix")
    return _det(matrix.to_rows(), matrix.scope)


def _det(rows: list[list[Expr]], scope: Scope) -> Expr:
    size = len(rows)
    if size == 1:
        return rows[0][0]
    total = scope.zero
    for j, lead in enumerate(rows[0]):
        if lead.is_zero():
            continue
        minor = [row[:j] + row[j + 1 :] for row in rows[1:]]
        term = lead * _det(minor, scope)
        total = total + term if j % 2 == 0 else total - term
    return total


def invert(matrix: ExprMatrix) -> tuple[ExprMatrix, list[Expr]]:
    """Inverse over the function field plus the excluded locus of the pivots."""
    if matrix.rows != matrix.cols:
        raise LinalgError("inverse requires a square matrix")
    size = matrix.rows
    scope = matrix.scope
    augmented = ExprMatrix.from_rows(
        [
            matrix.row(i) + ExprMatrix.identity(scope, size).row(i)
            for i in range(size)
        ]
    )
    result = echelon(augmented, pivot_col_limit=size)
    if result.rank < size:
        raise LinalgError("matrix is singular over the function field")
    inverse_rows: list[list[Expr]] = [[scope.zero] * size for _ in range(size)]
    for r, c in result.pivots:
        inverse_rows[c] = result.work[r][size:]
    inverse = ExprMatrix.from_rows(inverse_rows)
    product = matrix.mul(inverse)
    for i in range(size):
        for j in range(size):
            expected = scope.one if i == j else scope.zero
            if not (product.at(i, j) - expected).is_zero():
                raise LinalgError("inverse failed self-check")
    return inverse, result.excluded


def solve(
    matrix: ExprMatrix,
    rhs: Sequence[Expr],
    pivot_cols: Sequence[int] | None = None,
) -> tuple[list[Expr], list[Expr]]:
    """Solve matrix * x = rhs; returns (solution, excluded locus).

    Rectangular systems must be consistent; free columns are only allowed
    when a designated pivot set is supplied (they are set to zero).
    """
    if len(rhs) != matrix.rows:
        raise LinalgError("right-hand side length mismatch")
    scope = matrix.scope
    augmented = ExprMatrix.from_rows(
        [matrix.row(i) + [rhs[i]] for i in range(matrix.rows)]
    )
    result = echelon(
        augmented, prefer_cols=pivot_cols, pivot_col_limit=matrix.cols
    )
    pivot_rows = {r for r, _ in result.pivots}
    for r in range(matrix.rows):
        if r not in pivot_rows and not result.work[r][matrix.cols].is_zero():
            raise LinalgError("inconsistent linear system")
    if result.rank < matrix.cols and pivot_cols is None:
        raise LinalgError("underdetermined system without a designated pivot set")
    solution = [scope.zero] * matrix.cols
    for r, c in result.pivots:
        solution[c] = result.work[r][matrix.cols]
    for i in range(matrix.rows):
        acc = scope.zero
        for j in range(matrix.cols):
            acc = acc + matrix.at(i, j) * solution[j]
        if not (acc - rhs[i]).is_zero():
            raise LinalgError("solution failed self-check")
    return solution, result.excluded


@dataclass
class SpanCertificate:
    """Validated answer to a row-span membership query."""

    member: bool
    coefficients: list[Expr] | None = None
    witness_rows: list[int] | None = None
    witness_cols: list[int] | None = None
    witness_minor: Expr | None = None
    excluded: list[Expr] = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return "member" if self.member else "not-member"


class SpanSolver:
    """Reduced row basis of a generator family for repeated span queries.

    Eliminates [G | I] once; each query reduces the target against the
    reduced rows, which yields combination coefficients in the original
    generators (via the recorded transform) or a provably nonzero witness
    minor of the stacked matrix.
    """

    def __init__(self, generators: ExprMatrix):
        self.generators = generators
        scope = generators.scope
        m, n = generators.rows, generators.cols
        augmented = ExprMatrix.from_rows(
            [
                generators.row(i) + ExprMatrix.identity(scope, m).row(i)
                for i in range(m)
            ]
        )
        result = echelon(augmented, pivot_col_limit=n)
        self.excluded = list(result.excluded)
        self.pivots = sorted(result.pivots, key=lambda rc: rc[1])
        self.rank = len(self.pivots)
        self.rows = [
            (result.work[r][:n], result.work[r][n:], r, c)
            for r, c in self.pivots
        ]

    def query(self, target: Sequence[Expr]) -> SpanCertificate:
        generators = self.generators
        scope = generators.scope
        m = generators.rows
        if len(target) != generators.cols:
            raise LinalgError("target width mismatch")
        residual = list(target)
        coefficients = [scope.zero] * m
        for row, transform, _, c in self.rows:
            factor = residual[c]
            if factor.is_zero():
                continue
            residual = [a - factor * b for a, b in zip(residual, row)]
            coefficients = [
                a + factor * b for a, b in zip(coefficients, transform)
            ]
        leftover = next(
            (j for j, e in enumerate(residual) if not e.is_zero()), None
        )
        if leftover is None:
            for j in range(generators.cols):
                acc = scope.zero
                for i in range(m):
                    acc = acc + coefficients[i] * generators.at(i, j)
                if not (acc - target[j]).is_zero():
                    raise LinalgError("span certificate failed validation")
            return SpanCertificate(
                member=True,
                coefficients=coefficients,
                excluded=list(self.excluded),
            )
        rows = sorted(r for _, _, r, _ in self.rows) + [m]
        cols = sorted([c for _, _, _, c in self.rows] + [leftover])
        stacked = ExprMatrix.from_rows(
            generators.to_rows() + [list(target)]
        )
        minor_matrix = ExprMatrix.from_rows(
            [[stacked.at(r, c) for c in cols] for r in rows]
        )
        minor = determinant(minor_matrix)
        if minor.is_zero():
            raise LinalgError("witness minor failed validation")
        return SpanCertificate(
            member=False,
            witness_rows=rows,
            witness_cols=cols,
            witness_minor=minor,
            excluded=list(self.excluded),
        )


def in_span(target: Sequence[Expr], generators: ExprMatrix) -> SpanCertificate:
    """Decide whether target lies in the row span of generators.

    Member certificates carry combination coefficients over the function
    field; NotMember certificates carry a row/column minor of the stacked
    matrix that is a nonzero expression.  Both are validated before return.
    """
    return SpanSolver(generators).query(target)


def sample_points(
    scope: Scope,
    count: int,
    seed: int = 0,
    avoid: Iterable[Expr] = (),
    max_tries: int | None = None,
) -> list[Point]:
    """Deterministic-by-seed rational points avoiding given zero loci."""
    avoid = list(avoid)
    rng = random.Random(seed)
    points: list[Point] = []
    tries = 0
    limit = max_tries if max_tries is not None else 400 * max(count, 1)
    while len(points) < count:
        if tries >= limit:
            raise LinalgError(
                f"could not find {count} admissible points in {limit} tries"
            )
        tries += 1
        assignment = {
            name: Fraction(rng.randint(-12, 12), rng.randint(1, 6))
            for name in scope.names
        }
        point = Point(assignment)
        if all(_nonzero_at(expr, point) for expr in avoid):
            points.append(point)
    return points


def _nonzero_at(expr: Expr, point: Point) -> bool:
    try:
        if expr.has_kernels():
            return abs(expr.eval_float(point, 256)) > 1e-40
        return expr.eval_exact(point) != 0
    except EvalError:
        return False
