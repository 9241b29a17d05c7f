"""Decision procedures: solvability, completeness, closure, defect,
integral-basis dimension, and first-integral verification with certificates.

The solvability test brackets the operators of differentiation pairwise and
demands the zero field.  Completeness demands each bracket be a function-
coefficient combination of the system's operators; bracket closure adds
failing brackets as new generators until completeness (or the variable-count
cap) is reached, and the number added is the system's defect.  Dimension
formulas: n - m - defect for PDE systems (0 when m = n), n - defect for total
differential systems, m - defect for Pfaff systems (n when m = n).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import sympy as sm

from .expr import Expr, EvalError, Point, Scope
from .exterior import KForm, VectorField, differential
from .linalg import (
    ExprMatrix,
    SpanCertificate,
    SpanSolver,
    echelon,
    generic_rank,
    in_span,
    sample_points,
)
from .systems import (
    Contragredient,
    PdeSystem,
    PfaffSystem,
    System,
    SystemError,
    TdSystem,
    pfaff_contragredient,
    td_to_pde,
)

__all__ = [
    "CompletenessResult",
    "ClosureResult",
    "ClosureStep",
    "IntegralCertificate",
    "ClosureCheck",
    "AnalysisReport",
    "MethodDisagreement",
    "frobenius_td",
    "pde_completeness",
    "bracket_closure",
    "integral_basis_dimension",
    "verify_first_integral",
    "functional_independence",
    "pfaff_closure_check",
    "analyze",
    "report_to_dict",
]


class MethodDisagreement(RuntimeError):
    """The wedge and contragredient closure checks disagreed (a bug)."""


def _orient(field_: VectorField) -> tuple[VectorField, bool]:
    """Flip a field's sign so its first nonzero coefficient leads positive."""
    for name in field_.scope.names:
        coeff = field_.coefficient(name)
        if coeff.is_zero():
            continue
        if _leading_positive(coeff):
            return field_, False
        return -field_, True
    return field_, False


def _leading_positive(expr: Expr) -> bool:
    gens = Expr._gens_for(expr.scope, expr._num)
    if not gens:
        return sm.Rational(expr._num) > 0
    poly = sm.Poly(expr._num, *gens, domain="QQ")
    best = max(poly.terms(), key=lambda t: (sum(t[0]), t[0]))
    return best[1] > 0


def _merge_locus(into: list[Expr], extra: Sequence[Expr]) -> list[Expr]:
    for expr in extra:
        if not expr.is_constant() and expr not in into:
            into.append(expr)
    return into


@dataclass
class CompletenessResult:
    """Outcome of a pairwise bracket test with validated certificates."""

    complete: bool
    jacobian: bool
    certificates: dict[tuple[int, int], SpanCertificate]
    witness_pair: tuple[int, int] | None = None
    witness_bracket: VectorField | None = None
    excluded: list[Expr] = field(default_factory=list)


def frobenius_td(td: TdSystem) -> CompletenessResult:
    """Complete solvability: all pairwise brackets must vanish."""
    operators = td_to_pde(td, "nonautonomous").operators
    certificates: dict[tuple[int, int], SpanCertificate] = {}
    for i in range(len(operators)):
        for j in range(i + 1, len(operators)):
            bracket = operators[i].bracket(operators[j])
            if bracket.is_zero():
                certificates[(i, j)] = SpanCertificate(
                    member=True,
                    coefficients=[td.scope.zero] * len(operators),
                )
                continue
            return CompletenessResult(
                complete=False,
                jacobian=False,
                certificates=certificates,
                witness_pair=(i, j),
                witness_bracket=bracket,
            )
    return CompletenessResult(True, True, certificates)


def pde_completeness(pde: PdeSystem) -> CompletenessResult:
    """Each bracket must be a combination of the system's operators."""
    operators = pde.operators
    solver: SpanSolver | None = None
    certificates: dict[tuple[int, int], SpanCertificate] = {}
    excluded: list[Expr] = []
    jacobian = True
    for i in range(len(operators)):
        for j in range(i + 1, len(operators)):
            bracket = operators[i].bracket(operators[j])
            if bracket.is_zero():
                certificates[(i, j)] = SpanCertificate(
                    member=True, coefficients=[pde.scope.zero] * len(operators)
                )
                continue
            jacobian = False
            if solver is None:
                solver = SpanSolver(pde.coefficient_matrix())
            certificate = solver.query(bracket.coefficient_row())
            certificates[(i, j)] = certificate
            _merge_locus(excluded, certificate.excluded)
            if not certificate.member:
                witness, _ = _orient(bracket)
                return CompletenessResult(
                    complete=False,
                    jacobian=False,
                    certificates=certificates,
                    witness_pair=(i, j),
                    witness_bracket=witness,
                    excluded=excluded,
                )
    return CompletenessResult(True, jacobian, certificates, excluded=excluded)


@dataclass
class ClosureStep:
    """One generator added during closure: bracket of generators (i, j)."""

    name: str
    pair: tuple[int, int]  # indices into the generator list at addition time
    pair_names: tuple[str, str]
    negated: bool
    operator: VectorField

    def describe(self) -> str:
        left, right = self.pair_names
        if self.negated:
            left, right = right, left
        return f"[{left},{right}]"


@dataclass
class ClosureResult:
    original_count: int
    added: list[ClosureStep]
    defect: int
    completed: PdeSystem
    excluded: list[Expr] = field(default_factory=list)
    capped: bool = False


def bracket_closure(pde: PdeSystem, max_generators: int | None = None) -> ClosureResult:
    """Add failing brackets as generators until complete (or capped).

    Pairs are scanned in lexicographic order over the current generator list
    and rescanned from the start after every addition; membership survives
    span growth, so resolved pairs are cached.  Added operators are sign
    normalized (first nonzero coefficient leads positive); a negated step
    records the reversed bracket order.
    """
    scope = pde.scope
    cap = max_generators if max_generators is not None else len(scope)
    cap = max(cap, pde.m)
    generators = list(pde.operators)
    gen_names = list(pde.names)
    added: list[ClosureStep] = []
    excluded: list[Expr] = []
    resolved: set[tuple[int, int]] = set()
    capped = False
    while True:
        solver = SpanSolver(
            ExprMatrix.from_rows([g.coefficient_row() for g in generators])
        )
        grew = False
        for i in range(len(generators)):
            for j in range(i + 1, len(generators)):
                if (i, j) in resolved:
                    continue
                bracket = generators[i].bracket(generators[j])
                if bracket.is_zero():
                    resolved.add((i, j))
                    continue
                certificate = solver.query(bracket.coefficient_row())
                _merge_locus(excluded, certificate.excluded)
                if certificate.member:
                    resolved.add((i, j))
                    continue
                operator, negated = _orient(bracket)
                generators.append(operator)
                name = f"g{len(generators)}"
                gen_names.append(name)
                added.append(
                    ClosureStep(
                        name=name,
                        pair=(i, j),
                        pair_names=(gen_names[i], gen_names[j]),
                        negated=negated,
                        operator=operator,
                    )
                )
                resolved.add((i, j))
                grew = True
                break
            if grew:
                break
        if not grew:
            break
        if len(generators) >= cap:
            capped = True
            break
    completed = PdeSystem(scope, tuple(generators), names=tuple(gen_names))
    return ClosureResult(
        original_count=pde.m,
        added=added,
        defect=len(added),
        completed=completed,
        excluded=excluded,
        capped=capped,
    )


def integral_basis_dimension(system: System) -> tuple[int, str]:
    """Dimension of the basis of first integrals, with a derivation note."""
    if system.kind == "pde":
        pde = system.pde
        if pde.m == len(pde.scope):
            return 0, "as many operators as variables: constants only"
        closure = bracket_closure(pde)
        dim = len(pde.scope) - pde.m - closure.defect
        return dim, (
            f"{len(pde.scope)} variables - {pde.m} operators - "
            f"defect {closure.defect}"
        )
    if system.kind == "td":
        td = system.td
        closure = bracket_closure(td_to_pde(td, "nonautonomous"))
        return td.n - closure.defect, (
            f"{td.n} dependents - defect {closure.defect}"
        )
    pf = system.pfaff
    if pf.m == pf.n:
        return pf.n, "square nonsingular system: coordinate integrals"
    contragredient = pfaff_contragredient(pf)
    closure = bracket_closure(contragredient.pde)
    return pf.m - closure.defect, (
        f"{pf.m} forms - dual-system defect {closure.defect}"
    )


@dataclass
class IntegralCertificate:
    """Validated verdict on a candidate first integral."""

    integral: Expr
    valid: bool
    residuals: list[Expr] | None = None  # td / pde
    multipliers: list[Expr] | None = None  # pfaff expansion coefficients
    span: SpanCertificate | None = None
    witness_point: Point | None = None
    witness_value: str | None = None
    excluded: list[Expr] = field(default_factory=list)


def verify_first_integral(
    system: System, integral: Expr, seed: int = 0
) -> IntegralCertificate:
    """Check annihilation (td/pde) or span membership of dF (pfaff)."""
    scope = system.scope
    unknown = integral.variables() - set(scope.names)
    if unknown:
        raise SystemError(f"integral references undeclared {sorted(unknown)}")
    integral = scope.lift(integral)
    if system.kind in ("td", "pde"):
        if system.kind == "td":
            operators = td_to_pde(system.td, "nonautonomous").operators
        else:
            operators = system.pde.operators
        residuals = [op.apply(integral) for op in operators]
        if all(r.is_zero() for r in residuals):
            return IntegralCertificate(integral, True, residuals=residuals)
        point, value = _nonzero_witness(residuals, scope, seed)
        return IntegralCertificate(
            integral,
            False,
            residuals=residuals,
            witness_point=point,
            witness_value=value,
        )
    pf = system.pfaff
    target = differential(integral).coefficient_row()
    certificate = in_span(target, pf.coefficient_matrix())
    if certificate.member:
        return IntegralCertificate(
            integral,
            True,
            multipliers=certificate.coefficients,
            span=certificate,
            excluded=list(certificate.excluded),
        )
    return IntegralCertificate(
        integral,
        False,
        span=certificate,
        excluded=list(certificate.excluded),
    )


def _nonzero_witness(
    residuals: Sequence[Expr], scope: Scope, seed: int = 0
) -> tuple[Point | None, str | None]:
    """A sample point where some residual provably does not vanish."""
    nonzero = [r for r in residuals if not r.is_zero()]
    avoid: list[Expr] = []
    for r in nonzero:
        denominator = Expr._canonical(scope, r._den, sm.Integer(1))
        if not denominator.is_constant() and denominator not in avoid:
            avoid.append(denominator)
    import mpmath

    for attempt in range(8):
        for point in sample_points(scope, 4, seed=seed * 997 + attempt, avoid=avoid):
            for r in nonzero:
                try:
                    if r.has_kernels():
                        value = r.eval_float(point, 256)
                        if abs(value) > 1e-40:
                            return point, mpmath.nstr(value, 20)
                    else:
                        value = r.eval_exact(point)
                        if value != 0:
                            return point, str(value)
                except EvalError:
                    continue
    return None, None


def functional_independence(
    integrals: Sequence[Expr], scope: Scope
) -> tuple[int, bool]:
    """Generic rank of the Jacobi matrix of the given functions."""
    if not integrals:
        return 0, True
    rows = []
    for integral in integrals:
        lifted = scope.lift(integral)
        rows.append([lifted.diff(name) for name in scope.names])
    rank = generic_rank(ExprMatrix.from_rows(rows))
    return rank, rank == len(integrals)


@dataclass
class ClosureCheck:
    """Pfaff closure verdict with per-method witnesses."""

    closed: bool
    method: str
    wedge_witness: tuple[int, KForm] | None = None
    contragredient: Contragredient | None = None
    completeness: CompletenessResult | None = None
    excluded: list[Expr] = field(default_factory=list)


def pfaff_closure_check(pf: PfaffSystem, method: str = "both") -> ClosureCheck:
    """Closure via exterior products, the dual operators, or both.

    The wedge route tests d(w_j) ^ w_1 ^ ... ^ w_m = 0 for every j; the
    contragredient route tests completeness of the dual operator system.
    With method='both' any disagreement raises, since the two criteria are
    equivalent.
    """
    if method not in ("wedge", "contragredient", "both"):
        raise SystemError(f"unknown closure method {method!r}")
    wedge_verdict = None
    wedge_witness = None
    if method in ("wedge", "both"):
        wedge_verdict = True
        product = pf.forms[0]
        for form in pf.forms[1:]:
            product = product.wedge(form)
        for j, form in enumerate(pf.forms):
            obstruction = form.d().wedge(product)
            if not obstruction.is_zero():
                wedge_verdict = False
                wedge_witness = (j, obstruction)
                break
    contra_verdict = None
    contragredient = None
    completeness = None
    excluded: list[Expr] = []
    if method in ("contragredient", "both"):
        if pf.m == pf.n:
            contra_verdict = True  # square case: coordinate integrals exist
        else:
            contragredient = pfaff_contragredient(pf)
            _merge_locus(excluded, contragredient.excluded)
            completeness = pde_completeness(contragredient.pde)
            _merge_locus(excluded, completeness.excluded)
            contra_verdict = completeness.complete
    if method == "wedge":
        return ClosureCheck(wedge_verdict, method, wedge_witness=wedge_witness)
    if method == "contragredient":
        return ClosureCheck(
            contra_verdict,
            method,
            contragredient=contragredient,
            completeness=completeness,
            excluded=excluded,
        )
    if wedge_verdict != contra_verdict:
        raise MethodDisagreement(
            f"wedge says {'closed' if wedge_verdict else 'not closed'}, "
            f"dual operators say {'closed' if contra_verdict else 'not closed'}"
        )
    return ClosureCheck(
        wedge_verdict,
        method,
        wedge_witness=wedge_witness,
        contragredient=contragredient,
        completeness=completeness,
        excluded=excluded,
    )


@dataclass
class AnalysisReport:
    """Machine-readable verdict for one system.

    timing_seconds is informational only and never serialized: identical
    invocations must produce byte-identical JSON.
    """

    kind: str
    variables: list[str]
    rank_ok: bool
    verdict_name: str  # solvable | complete | closed
    verdict: bool
    jacobian: bool | None
    defect: int
    dimension: int
    dimension_note: str
    added_generators: list[ClosureStep]
    excluded_locus: list[Expr]
    integrals: list[IntegralCertificate]
    seed: int
    warnings: list[str] = field(default_factory=list)
    witness: str | None = None
    timing_seconds: float = 0.0


def analyze(
    system: System,
    integrals: Sequence[Expr] = (),
    seed: int = 0,
    method: str = "both",
    max_generators: int | None = None,
) -> AnalysisReport:
    """Run the kind-appropriate battery and aggregate certified results."""
    import time

    started = time.perf_counter()
    excluded: list[Expr] = list(system.excluded_locus)
    warnings = list(system.warnings)
    witness = None
    added: list[ClosureStep] = []
    jacobian: bool | None = None

    if system.kind == "td":
        td = system.td
        rank_ok = True
        check = frobenius_td(td)
        verdict_name, verdict = "solvable", check.complete
        jacobian = check.complete
        if check.witness_bracket is not None:
            witness = check.witness_bracket.print()
        closure = bracket_closure(
            td_to_pde(td, "nonautonomous"), max_generators=max_generators
        )
        _merge_locus(excluded, closure.excluded)
        added = closure.added
        defect = closure.defect
        dimension = td.n - defect
        note = f"{td.n} dependents - defect {defect}"
    elif system.kind == "pde":
        pde = system.pde
        rank_ok = pde.validate_rank()
        check = pde_completeness(pde)
        verdict_name, verdict = "complete", check.complete
        jacobian = check.jacobian
        _merge_locus(excluded, check.excluded)
        if check.witness_bracket is not None:
            witness = check.witness_bracket.print()
        closure = bracket_closure(pde, max_generators=max_generators)
        _merge_locus(excluded, closure.excluded)
        added = closure.added
        defect = closure.defect
        if pde.m == len(pde.scope):
            dimension = 0
            note = "as many operators as variables: constants only"
        else:
            dimension = len(pde.scope) - pde.m - defect
            note = f"{len(pde.scope)} variables - {pde.m} operators - defect {defect}"
    else:
        pf = system.pfaff
        rank_ok = pf.validate_rank()
        check = pfaff_closure_check(pf, method=method)
        verdict_name, verdict = "closed", check.closed
        _merge_locus(excluded, check.excluded)
        if check.wedge_witness is not None:
            j, obstruction = check.wedge_witness
            witness = f"d({pf.names[j]}) wedge forms = {obstruction.print()}"
        elif check.completeness and check.completeness.witness_bracket is not None:
            witness = check.completeness.witness_bracket.print()
        if pf.m == pf.n:
            defect = 0
            dimension = pf.n
            note = "square nonsingular system: coordinate integrals"
            jacobian = None
        else:
            contragredient = check.contragredient or pfaff_contragredient(pf)
            _merge_locus(excluded, contragredient.excluded)
            closure = bracket_closure(
                contragredient.pde, max_generators=max_generators
            )
            _merge_locus(excluded, closure.excluded)
            added = closure.added
            defect = closure.defect
            dimension = pf.m - defect
            note = f"{pf.m} forms - dual-system defect {defect}"

    certificates = []
    for integral in integrals:
        certificate = verify_first_integral(system, integral, seed=seed)
        _merge_locus(excluded, certificate.excluded)
        certificates.append(certificate)

    return AnalysisReport(
        kind=system.kind,
        variables=list(system.scope.names),
        rank_ok=rank_ok,
        verdict_name=verdict_name,
        verdict=verdict,
        jacobian=jacobian,
        defect=defect,
        dimension=dimension,
        dimension_note=note,
        added_generators=added,
        excluded_locus=excluded,
        integrals=certificates,
        seed=seed,
        warnings=warnings,
        witness=witness,
        timing_seconds=time.perf_counter() - started,
    )


def report_to_dict(report: AnalysisReport) -> dict:
    """Stable JSON-ready rendering of an analysis report."""
    integrals = []
    for certificate in report.integrals:
        entry: dict = {
            "expr": certificate.integral.print(),
            "verdict": "valid" if certificate.valid else "invalid",
        }
        if certificate.residuals is not None:
            entry["residuals"] = [r.print() for r in certificate.residuals]
        if certificate.multipliers is not None:
            entry["multipliers"] = [c.print() for c in certificate.multipliers]
        if certificate.witness_point is not None:
            entry["witness_point"] = {
                name: str(value)
                for name, value in sorted(certificate.witness_point.assignment.items())
            }
            entry["witness_value"] = certificate.witness_value
        if certificate.span is not None and not certificate.span.member:
            entry["witness_minor"] = {
                "rows": certificate.span.witness_rows,
                "cols": certificate.span.witness_cols,
                "minor": certificate.span.witness_minor.print(),
            }
        integrals.append(entry)
    return {
        "kind": report.kind,
        "vars": report.variables,
        "rank_ok": report.rank_ok,
        "verdict": {report.verdict_name: report.verdict},
        "jacobian": report.jacobian,
        "defect": report.defect,
        "dimension": report.dimension,
        "dimension_note": report.dimension_note,
        "witness": report.witness,
        "added_generators": [
            {
                "name": step.name,
                "from": step.describe(),
                "operator": step.operator.print(),
            }
            for step in report.added_generators
        ],
        "excluded_locus": sorted(e.print() for e in report.excluded_locus),
        "integrals": integrals,
        "seed": report.seed,
        "warnings": report.warnings,
    }
