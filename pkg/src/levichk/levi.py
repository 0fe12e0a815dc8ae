"""Lower-order coupling conditions for the triangularized system.

After the Schur conjugation W = T^(-1) U the system reads

    D_t W = (J + T^(-1) B T - T^(-1) D_t T) W + ...

Well-posedness in C-infinity hinges on the decay, in the symbol order
scale S^q, of two objects:

  * D = T^(-1) B T = B T, nonzero only in row m since B is, and
  * E = T^(-1) D_t T, strictly lower triangular.

Main check: e_{i,j} in S^(j-i) for 1 <= j < i <= m-1, and
d_{m,k} - e_{m,k} in S^(k-m) for k = 1..m-1.

When the first m-2 roots are time-independent (checked structurally,
not by sampling) the same content collapses to the simpler set
d_{m,k} in S^(k-m) for k <= m-2 together with
d_{m,m-1} - D_t(lambda_{m-1}) <xi>^(-1) in S^(-1); the <xi>^(-1)
weight on the correction term follows from e_{m,m-1} = D_t(omega_{m,m-1})
with omega_{m,m-1} carrying weight -1.

A separate second-order scan tests the classical integral-free
sufficient condition  t * c(t,x)^2 <= C (A s(t) - s'(t))  over a grid of
constants, where s = -c_1 c_2 from the root coefficients and c is the
real first-order coefficient in the d/dt, d/dx form of the equation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import reduction as rd
from . import schur
from . import symbolcalc as sc
from .exprlang import (
    ZERO,
    Bindings,
    ExprDiffError,
    ExprEvalError,
    ImagUnit,
    d_dt,
    depends_on_t,
    evaluate,
    mul_e,
    neg_e,
)

__all__ = [
    "compute_D",
    "compute_E",
    "ConditionCheck",
    "LeviReport",
    "check_main_theorem",
    "check_corollary",
    "OleinikReport",
    "check_oleinik",
]


def compute_D(B, T):
    """D = T^(-1) B T = B T as a full matrix; rows 1..m-1 are zero symbols.

    B vanishes off its last row, so d_{m,k} = sum_{j>=k} B_{m,j} omega_{j,k}
    and conjugating by the unitriangular T changes nothing else.
    """
    m = len(B)
    n = B[0][0].dim
    zero = sc.zero(n)
    D = [[zero for _ in range(m)] for _ in range(m)]
    for k in range(1, m + 1):
        acc = sc.zero(n)
        for j in range(k, m + 1):
            acc = sc.add(acc, sc.mul(B[m - 1][j - 1], T[j - 1][k - 1]))
        D[m - 1][k - 1] = sc.canonicalize(acc)
    return tuple(tuple(row) for row in D)


def compute_E(Tinv, roots):
    """E = T^(-1) D_t T, strictly lower triangular, canonicalized.

    The D_t omega entries are rebuilt from the roots so the function only
    needs T^(-1).  Raises ExprDiffError when a root coefficient has no
    symbolic t-derivative (callers report that as inconclusive).
    """
    m = len(Tinv)
    n = roots[0].dim
    zero = sc.zero(n)
    dT = [[zero for _ in range(m)] for _ in range(m)]
    for i in range(2, m + 1):
        for j in range(1, i):
            dT[i - 1][j - 1] = sc.d_t(schur.omega(i, j, roots))
    E = [[zero for _ in range(m)] for _ in range(m)]
    for i in range(1, m + 1):
        for j in range(1, i):
            acc = sc.zero(n)
            for k in range(j + 1, i + 1):
                acc = sc.add(acc, sc.mul(Tinv[i - 1][k - 1], dT[k - 1][j - 1]))
            E[i - 1][j - 1] = sc.canonicalize(acc)
    return tuple(tuple(row) for row in E)


@dataclass
class ConditionCheck:
    cond_id: str
    symbol: str                      # debug serialization of the tested symbol
    verdict: sc.OrderVerdict

    def to_dict(self):
        return {"id": self.cond_id, "symbol": self.symbol, **self.verdict.to_dict()}


@dataclass
class LeviReport:
    mode: str                        # "main" | "corollary"
    overall: str                     # "PASS" | "FAIL" | "INCONCLUSIVE" | "NOT-APPLICABLE"
    corollary_applicable: bool
    conditions: Tuple[ConditionCheck, ...] = ()
    detail: str = ""

    def to_dict(self):
        return {
            "mode": self.mode,
            "overall": self.overall,
            "corollary_applicable": self.corollary_applicable,
            "conditions": [c.to_dict() for c in self.conditions],
            "detail": self.detail,
        }


def _overall(conditions: Sequence[ConditionCheck]) -> str:
    verdicts = {c.verdict.verdict for c in conditions}
    if "FAIL" in verdicts:
        return "FAIL"
    if "INCONCLUSIVE" in verdicts:
        return "INCONCLUSIVE"
    return "PASS"


def _leading_roots_constant(spec: rd.ProblemSpec) -> bool:
    """True when roots 1..m-2 have t-independent coefficient expressions."""
    for root in spec.roots[: spec.order - 2]:
        for c in root:
            if depends_on_t(c):
                return False
    return True


def _grid_for(spec: rd.ProblemSpec, grid: Optional[sc.SampleGrid]) -> sc.SampleGrid:
    if grid is not None:
        return grid
    return sc.default_grid(spec.horizon, spec.dim, params=spec.params)


def _check(cond_id: str, symbol: sc.SymbolPoly, target: int, grid: sc.SampleGrid) -> ConditionCheck:
    canon = sc.canonicalize(symbol)
    verdict = sc.check_order(canon, target, grid)
    return ConditionCheck(cond_id, sc.debug_str(canon), verdict)


def check_main_theorem(spec: rd.ProblemSpec, grid: Optional[sc.SampleGrid] = None) -> LeviReport:
    """Check every coupling condition of the general criterion."""
    grid = _grid_for(spec, grid)
    m = spec.order
    system = rd.build_companion(spec)
    data = schur.build_schur(rd.root_symbols(spec))
    applicable = _leading_roots_constant(spec)
    try:
        E = compute_E(data.Tinv, data.roots)
    except ExprDiffError as exc:
        return LeviReport(
            mode="main",
            overall="INCONCLUSIVE",
            corollary_applicable=applicable,
            detail=f"root coefficient not differentiable in t: {exc}",
        )
    D = compute_D(system.B, data.T)
    conditions: List[ConditionCheck] = []
    for i in range(2, m):
        for j in range(1, i):
            target = j - i
            conditions.append(_check(f"e[{i},{j}] in S^{target}", E[i - 1][j - 1], target, grid))
    for k in range(1, m):
        target = k - m
        symbol = sc.sub(D[m - 1][k - 1], E[m - 1][k - 1])
        conditions.append(
            _check(f"d[{m},{k}]-e[{m},{k}] in S^{target}", symbol, target, grid)
        )
    return LeviReport(
        mode="main",
        overall=_overall(conditions),
        corollary_applicable=applicable,
        conditions=tuple(conditions),
    )


def check_corollary(spec: rd.ProblemSpec, grid: Optional[sc.SampleGrid] = None) -> LeviReport:
    """Simplified condition set; valid only when roots 1..m-2 are t-constant."""
    grid = _grid_for(spec, grid)
    m = spec.order
    if not _leading_roots_constant(spec):
        return LeviReport(
            mode="corollary",
            overall="NOT-APPLICABLE",
            corollary_applicable=False,
            detail=f"requires roots 1..{m - 2} to be time-independent",
        )
    system = rd.build_companion(spec)
    data = schur.build_schur(rd.root_symbols(spec))
    D = compute_D(system.B, data.T)
    conditions: List[ConditionCheck] = []
    for k in range(1, m - 1):
        target = k - m
        conditions.append(_check(f"d[{m},{k}] in S^{target}", D[m - 1][k - 1], target, grid))
    try:
        correction = sc.shift_weight(sc.d_t(data.roots[m - 2]), 1)
    except ExprDiffError as exc:
        return LeviReport(
            mode="corollary",
            overall="INCONCLUSIVE",
            corollary_applicable=True,
            conditions=tuple(conditions),
            detail=f"root coefficient not differentiable in t: {exc}",
        )
    symbol = sc.sub(D[m - 1][m - 2], correction)
    conditions.append(
        _check(f"d[{m},{m - 1}]-Dt(lambda[{m - 1}])<xi>^(-1) in S^-1", symbol, -1, grid)
    )
    return LeviReport(
        mode="corollary",
        overall=_overall(conditions),
        corollary_applicable=True,
        conditions=tuple(conditions),
    )


# ---------------------------------------------------------------------------
# Second-order scan over explicit constants


@dataclass
class OleinikReport:
    applicable: bool
    feasible: Optional[bool] = None
    constants: Optional[Tuple[float, float]] = None   # (C, A)
    worst: Optional[dict] = None
    grids: Optional[dict] = None
    reason: str = ""

    def to_dict(self):
        return {
            "applicable": self.applicable,
            "feasible": self.feasible,
            "constants": None if self.constants is None else list(self.constants),
            "worst": self.worst,
            "grids": self.grids,
            "reason": self.reason,
        }


# log10 grid for both constants: 10^g, g = -3..6 in half steps
_CONST_GRID = tuple(10.0 ** (g / 2.0) for g in range(-6, 13))


def check_oleinik(spec: rd.ProblemSpec, t_min: float = 1e-6,
                  t_points: int = 64, x_points: int = 9) -> OleinikReport:
    """Scan  t c^2 <= C (A s - s')  over a constant grid (order 2, dim 1).

    s = -c_1 c_2 is built from the root coefficients and differentiated
    symbolically; c is i times the stored first-order coefficient, which
    must be real on the grid.  Feasible means some (C, A) satisfies the
    inequality at every sample; the scan visits small constants first.
    The A candidates include the exact threshold 2/t_min on top of the
    log grid: degenerate principal parts with s ~ t^2 near zero satisfy
    A s - s' >= 0 on [t_min, T] only from that value upward, and the log
    grid straddles it.
    """
    if spec.order != 2 or spec.dim != 1:
        return OleinikReport(
            applicable=False,
            reason=f"requires order 2 in one space dimension, got order {spec.order}, dim {spec.dim}",
        )
    rd.validate(spec)
    s_expr = neg_e(mul_e(spec.roots[0][0], spec.roots[1][0]))
    try:
        sprime_expr = d_dt(s_expr)
    except ExprDiffError as exc:
        return OleinikReport(applicable=False, reason=f"s(t) not differentiable: {exc}")
    c_expr = mul_e(ImagUnit(), spec.lower.get((0, (1,)), ZERO))

    ts = np.geomspace(t_min, spec.horizon, t_points)
    xs = np.linspace(-math.pi, math.pi, x_points)
    a_grid = _CONST_GRID + (2.0 / t_min,)
    grids = {
        "t": [float(v) for v in ts],
        "x": [float(v) for v in xs],
        "C": [float(v) for v in _CONST_GRID],
        "A": [float(v) for v in a_grid],
    }
    lhs = np.empty((t_points, x_points))
    rhs_s = np.empty(t_points)
    rhs_sp = np.empty(t_points)
    try:
        for a, t in enumerate(ts):
            sv = evaluate(s_expr, Bindings(t=float(t), x=(0.0,), params=spec.params))
            spv = evaluate(sprime_expr, Bindings(t=float(t), x=(0.0,), params=spec.params))
            if abs(sv.imag) > 1e-10 * (1 + abs(sv)) or abs(spv.imag) > 1e-10 * (1 + abs(spv)):
                return OleinikReport(
                    applicable=False, grids=grids,
                    reason=f"s(t) takes complex values at t={float(t):.6g}",
                )
            rhs_s[a], rhs_sp[a] = sv.real, spv.real
            for b, xv in enumerate(xs):
                cv = evaluate(c_expr, Bindings(t=float(t), x=(float(xv),), params=spec.params))
                if abs(cv.imag) > 1e-10 * (1 + abs(cv)):
                    return OleinikReport(
                        applicable=False, grids=grids,
                        reason=f"first-order coefficient not real at t={float(t):.6g}, x={float(xv):.6g}",
                    )
                lhs[a, b] = float(t) * cv.real * cv.real
    except ExprEvalError as exc:
        return OleinikReport(
            applicable=False, grids=grids, reason=f"coefficient evaluation failed: {exc}"
        )

    lhs_max_x = lhs.max(axis=1)
    scale = 1.0 + float(lhs_max_x.max())

    def _margin(C, A):
        return C * (A * rhs_s - rhs_sp) - lhs_max_x

    best = None
    for A in a_grid:
        for C in _CONST_GRID:
            if _margin(C, A).min() >= -1e-12 * scale:
                best = (C, A)
                break
        if best:
            break
    if best is None:
        # report the violation under the most permissive constants tried
        C, A = _CONST_GRID[-1], a_grid[-1]
    else:
        C, A = best
    margin = _margin(C, A)
    a = int(margin.argmin())
    b = int(lhs[a].argmax())
    worst = {
        "t": float(ts[a]),
        "x": float(xs[b]),
        "lhs": float(lhs[a, b]),
        "rhs": float(C * (A * rhs_s[a] - rhs_sp[a])),
    }
    if best:
        return OleinikReport(
            applicable=True, feasible=True, constants=best, worst=worst, grids=grids
        )
    return OleinikReport(
        applicable=True,
        feasible=False,
        constants=None,
        worst=worst,
        grids=grids,
        reason="no constants on the scan grid satisfy the inequality at all samples",
    )
