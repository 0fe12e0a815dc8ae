"""Reduction of a scalar equation of order m to a first-order system.

The scalar problem is

    D_t^m u = sum_{j=0}^{m-1} A_(m-j)(t, D_x) D_t^j u
              + sum_{k,beta} a_{k,beta}(t, x) D_x^beta D_t^k u + f,

with D_t = -i d/dt, principal coefficients A_(r) derived from the
user-supplied characteristic roots lambda_i(t, xi) = sum_j c_ij(t) xi_j
by Vieta's formulas, and a lower-order table a_{k,beta} constrained by
k + |beta| <= m - 1.  Setting u_k = D_t^(k-1) <D_x>^(m-k) u turns the
equation into

    D_t U = A(t, D_x) U + B(t, x, D_x) U + F,

where A has <xi> on the superdiagonal and b_(1)..b_(m) in the last row,
b_(j) = A_(m-j+1) <xi>^(j-m), and B is zero outside its last row whose
entries are b_j - b_(j) = (sum_beta a_{j-1,beta} xi^beta) <xi>^(j-m).

Root coefficients must not depend on x; weak hyperbolicity (real roots)
is the caller's contract and is not enforced symbolically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Tuple

from . import symbolcalc as sc
from .exprlang import (
    Expr,
    Num,
    depends_on_t,
    param_names,
    to_source,
    x_indices,
)

__all__ = [
    "ProblemSpec",
    "ProblemSpecError",
    "CompanionSystem",
    "validate",
    "root_symbols",
    "principal_from_roots",
    "build_companion",
]


class ProblemSpecError(Exception):
    pass


@dataclass
class ProblemSpec:
    """A Cauchy problem on [0, horizon] x R^dim (or the torus when solved).

    roots[i] lists the coefficient expressions (c_i1, .., c_in) of the
    i-th characteristic root; lower maps (k, beta) to the coefficient of
    D_x^beta D_t^k; data[k] is the initial value of D_t^k u at t = 0.
    """

    order: int
    dim: int
    horizon: float
    roots: Tuple[Tuple[Expr, ...], ...]
    lower: Mapping[Tuple[int, Tuple[int, ...]], Expr] = field(default_factory=dict)
    forcing: Expr = Num(0.0)
    data: Tuple[Expr, ...] = ()
    params: Mapping[str, float] = field(default_factory=dict)


@dataclass
class CompanionSystem:
    """First-order system D_t U = (A + B) U + F with spectral data for U(0)."""

    spec: ProblemSpec
    A: Tuple[Tuple[sc.SymbolPoly, ...], ...]
    B: Tuple[Tuple[sc.SymbolPoly, ...], ...]
    # component k of U(0) is <D_x>^(weight) applied to the data expression
    initial: Tuple[Tuple[int, Expr], ...]
    forcing: Expr


def _check_expr_params(e: Expr, params, what):
    missing = param_names(e) - set(params)
    if missing:
        raise ProblemSpecError(f"{what} references unbound parameters {sorted(missing)}")


def validate(spec: ProblemSpec) -> None:
    """Raise ProblemSpecError on any structural violation."""
    m, n = spec.order, spec.dim
    if m < 2:
        raise ProblemSpecError(f"order must be >= 2, got {m}")
    if n < 1:
        raise ProblemSpecError(f"dimension must be >= 1, got {n}")
    if not spec.horizon > 0:
        raise ProblemSpecError(f"horizon must be > 0, got {spec.horizon}")
    if len(spec.roots) != m:
        raise ProblemSpecError(f"expected {m} roots, got {len(spec.roots)}")
    for i, root in enumerate(spec.roots, start=1):
        if len(root) != n:
            raise ProblemSpecError(
                f"root {i} has {len(root)} coefficient(s), expected {n}"
            )
        for j, c in enumerate(root, start=1):
            used = x_indices(c)
            if used:
                raise ProblemSpecError(
                    f"root {i} component {j} depends on x{min(used)}; "
                    "root coefficients may depend on t and parameters only"
                )
            _check_expr_params(c, spec.params, f"root {i} component {j}")
    for (k, beta), coeff in spec.lower.items():
        beta = tuple(beta)
        if len(beta) != n:
            raise ProblemSpecError(
                f"lower-order key dt={k}, dx={list(beta)} has {len(beta)} dx entries, expected {n}"
            )
        if k < 0 or any(b < 0 for b in beta):
            raise ProblemSpecError(f"negative derivative count in dt={k}, dx={list(beta)}")
        if k + sum(beta) > m - 1:
            raise ProblemSpecError(
                f"lower-order term dt={k}, dx={list(beta)} has total order {k + sum(beta)}"
                f" > {m - 1}"
            )
        bad = {idx for idx in x_indices(coeff) if idx > n}
        if bad:
            raise ProblemSpecError(
                f"lower-order coefficient for dt={k}, dx={list(beta)} uses x{max(bad)}"
                f" but dimension is {n}"
            )
        _check_expr_params(coeff, spec.params, f"lower-order coefficient dt={k}, dx={list(beta)}")
    if spec.data:
        if len(spec.data) != m:
            raise ProblemSpecError(f"expected {m} data expressions, got {len(spec.data)}")
        for k, g in enumerate(spec.data, start=1):
            if depends_on_t(g):
                raise ProblemSpecError(f"initial datum {k} depends on t")
            bad = {idx for idx in x_indices(g) if idx > n}
            if bad:
                raise ProblemSpecError(f"initial datum {k} uses x{max(bad)} but dimension is {n}")
            _check_expr_params(g, spec.params, f"initial datum {k}")
    bad = {idx for idx in x_indices(spec.forcing) if idx > n}
    if bad:
        raise ProblemSpecError(f"forcing uses x{max(bad)} but dimension is {n}")
    _check_expr_params(spec.forcing, spec.params, "forcing")


def root_symbols(spec: ProblemSpec):
    """Characteristic roots as first-order symbols lambda_i = sum_j c_ij xi_j."""
    return [sc.linear_form(list(root), spec.dim) for root in spec.roots]


def principal_from_roots(roots: Sequence[sc.SymbolPoly]):
    """Vieta: tau^m - sum_j A_(m-j) tau^j = prod_i (tau - lambda_i).

    Returns [coeffs[j] for j in 0..m-1] with coeffs[j] = A_(m-j), i.e.
    A_(m-j) = -(-1)^(m-j) e_(m-j)(lambda_1..lambda_m).
    """
    if not roots:
        raise ProblemSpecError("at least one root required")
    dim = roots[0].dim
    m = len(roots)
    elem = [sc.one(dim)] + [sc.zero(dim) for _ in range(m)]
    for lam in roots:
        for r in range(m, 0, -1):
            elem[r] = sc.add(elem[r], sc.mul(lam, elem[r - 1]))
    out = []
    for j in range(m):
        r = m - j
        sign = -((-1.0) ** r)
        out.append(sc.scale(elem[r], Num(sign)))
    return out


def build_companion(spec: ProblemSpec) -> CompanionSystem:
    """Assemble A (principal, Sylvester form), B (last row), U(0), F."""
    validate(spec)
    m, n = spec.order, spec.dim
    roots = root_symbols(spec)
    principal = principal_from_roots(roots)  # principal[j] = A_(m-j)

    zero = sc.zero(n)
    bracket = sc.bracket_power(1, n)

    A = [[zero for _ in range(m)] for _ in range(m)]
    for k in range(m - 1):
        A[k][k + 1] = bracket
    for j in range(1, m + 1):
        # b_(j) = A_(m-j+1) <xi>^(j-m); A_(m-j+1) = principal[j-1]
        A[m - 1][j - 1] = sc.shift_weight(principal[j - 1], m - j)

    B = [[zero for _ in range(m)] for _ in range(m)]
    for j in range(1, m + 1):
        items = []
        for (k, beta), coeff in spec.lower.items():
            if k == j - 1:
                items.append((coeff, tuple(beta), 0))
        if items:
            row_entry = sc.from_terms(n, items)
            B[m - 1][j - 1] = sc.shift_weight(row_entry, m - j)

    data = spec.data if spec.data else tuple(Num(0.0) for _ in range(m))
    initial = tuple((m - k, g) for k, g in enumerate(data, start=1))
    return CompanionSystem(
        spec=spec,
        A=tuple(tuple(row) for row in A),
        B=tuple(tuple(row) for row in B),
        initial=initial,
        forcing=spec.forcing,
    )
