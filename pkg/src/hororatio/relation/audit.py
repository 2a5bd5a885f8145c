"""Maximal-inequality audits and checkers for the window axioms."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Any, Iterable, Optional, Sequence

from .finite_model import FiniteModel
from .sequences import SubsetFunctionSeq, accumulate

__all__ = [
    "WeakRow",
    "LpRow",
    "MaximalAudit",
    "PropertyRow",
    "PropertyReport",
    "maximal_function",
    "audit_maximal",
    "check_properties",
]

SLACK = 1e-12


def _le(a, b, slack: float) -> bool:
    if isinstance(a, Rational) and isinstance(b, Rational):
        return a <= b
    return a <= b + slack * max(1.0, abs(b))


def _ratio(su, sv):
    # v >= 0 only: windows with no v-mass give +inf (u > 0) or 0 (u = 0)
    if sv == 0:
        return math.inf if su > 0 else 0
    if isinstance(su, Rational) and isinstance(sv, Rational):
        return Fraction(su) / Fraction(sv)
    return su / sv


def maximal_function(model: FiniteModel, u: Sequence, v: Sequence, T: Optional[int] = None) -> list:
    """M_T(b) = max over 0 <= n <= T of |RATIO_n[u, v](b)|.

    Window sums are computed once per distinct window; SUM_n[u](b) is that
    sum divided by the mass of b, which cancels in the ratio.
    """
    T = model.top if T is None else T
    w = model.weights
    M: list[Any] = [0] * model.size
    for n in range(T + 1):
        cache: dict[tuple, tuple] = {}
        for b in range(model.size):
            win = model.window(b, n)
            if win not in cache:
                cache[win] = (
                    accumulate(u[p] * w[p] for p in win),
                    accumulate(v[p] * w[p] for p in win),
                )
            su, sv = cache[win]
            r = abs(_ratio(su, sv))
            if r > M[b]:
                M[b] = r
    return M


@dataclass(frozen=True)
class WeakRow:
    epsilon: float
    lhs_mass: Any
    mid_bound: Any
    l1_bound: Any
    passed: bool


@dataclass(frozen=True)
class LpRow:
    p: float
    lhs: float
    rhs: float
    doob_rhs: float
    passed: bool
    vacuous: bool


@dataclass
class MaximalAudit:
    weak: list[WeakRow] = field(default_factory=list)
    lp: list[LpRow] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.weak) and all(r.passed for r in self.lp)


def audit_maximal(
    model: FiniteModel,
    u: Sequence,
    v: Sequence,
    eps_grid: Iterable[float],
    T: Optional[int] = None,
    p_values: Iterable[float] = (),
    *,
    slack: float = SLACK,
) -> MaximalAudit:
    """Weak-type (1,1) and strong L^p audits of the ratio maximal function.

    Weak type: nu_v{M > eps} <= (1/eps) int_{M > eps} u dnu <= ||u||_1 / eps.
    L^p: ||M||^p_{L^p(nu_v)} <= p/(p-1) ||u/v||^p_{L^p(nu_v)}; ``doob_rhs``
    reports the bound with constant (p/(p-1))^p for comparison.
    """
    if any(x < 0 for x in u):
        raise ValueError("weak-type audit needs u >= 0")
    if any(x < 0 for x in v) or not any(x > 0 for x in v):
        raise ValueError("v must be non-negative and not identically zero")
    w = model.weights
    M = maximal_function(model, u, v, T)
    l1 = accumulate(abs(u[b]) * w[b] for b in range(model.size))
    audit = MaximalAudit()
    for eps in eps_grid:
        big = [b for b in range(model.size) if M[b] > eps]
        lhs = accumulate(v[b] * w[b] for b in big)
        mid_mass = accumulate(u[b] * w[b] for b in big)
        if isinstance(eps, Rational) and isinstance(mid_mass, Rational):
            mid, right = Fraction(mid_mass) / Fraction(eps), Fraction(l1) / Fraction(eps)
        else:
            mid, right = mid_mass / eps, l1 / eps
        ok = _le(lhs, mid, slack) and _le(mid, right, slack)
        audit.weak.append(WeakRow(eps, lhs, mid, right, ok))
    support = [b for b in range(model.size) if v[b] > 0]
    vacuous = any(u[b] != 0 for b in range(model.size) if v[b] == 0)
    for p in p_values:
        lhs = math.fsum(float(M[b]) ** p * float(v[b] * w[b]) for b in support)
        norm = math.fsum(abs(float(u[b]) / float(v[b])) ** p * float(v[b] * w[b]) for b in support)
        if vacuous:
            rhs = doob = math.inf
            ok = True
        else:
            rhs = p / (p - 1) * norm
            doob = (p / (p - 1)) ** p * norm
            ok = _le(lhs, rhs, slack)
        audit.lp.append(LpRow(p, lhs, rhs, doob, ok, vacuous))
    return audit


@dataclass(frozen=True)
class PropertyRow:
    name: str
    passed: bool
    checks: int
    witness: str = ""


@dataclass
class PropertyReport:
    rows: list[PropertyRow] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def __getitem__(self, name: str) -> PropertyRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)


def check_properties(
    F: SubsetFunctionSeq,
    points: Sequence,
    pairs: Sequence[tuple] = (),
    automorphisms: Sequence = (),
    n_max: int = 8,
) -> PropertyReport:
    """Check anchoring, the extreme Besicovich dichotomy and setwise invariance.

    Each automorphism carries an ``order`` attribute; it must fix every window
    F_n(b) setwise for ``order < n <= n_max``.  Pairs must be related points
    whose windows are expected to coincide by ``n_max``.  A failure records
    the first witness found.
    """
    report = PropertyReport()

    checks, witness = 0, ""
    for b in points:
        for n in range(n_max + 1):
            checks += 1
            if not F.contains(b, n, b):
                witness = f"point {b!r} missing from its window at n={n}"
                break
        if witness:
            break
    report.rows.append(PropertyRow("anchored", not witness, checks, witness))

    checks, witness = 0, ""
    for b, b2 in pairs:
        equal_from = None
        for n in range(n_max + 1):
            checks += 1
            equal, meet = F.compare_windows(b, b2, n)
            if equal:
                if equal_from is None:
                    equal_from = n
            else:
                if meet:
                    witness = f"windows of {b!r} and {b2!r} overlap without coinciding at n={n}"
                    break
                if equal_from is not None:
                    witness = f"windows of {b!r} and {b2!r} separate again at n={n}"
                    break
        if not witness and equal_from is None:
            witness = f"windows of {b!r} and {b2!r} still differ at n={n_max}"
        if witness:
            break
    report.rows.append(PropertyRow("extreme_besicovich", not witness, checks, witness))

    checks, witness = 0, ""
    low = min((phi.order for phi in automorphisms), default=n_max)
    for b in points:
        for n in range(low + 1, n_max + 1):
            s = None
            for phi in automorphisms:
                if phi.order >= n:
                    continue
                s = F.window(b, n) if s is None else s
                checks += 1
                if {phi(p) for p in s} != s:
                    witness = f"{phi!r} does not fix the window of {b!r} at n={n}"
                    break
            if witness:
                break
        if witness:
            break
    report.rows.append(PropertyRow("asymptotic_invariance", not witness, checks, witness))
    return report
