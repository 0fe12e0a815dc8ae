"""Sparse symbol calculus for finite sums  c(t,x) * xi^alpha * <xi>^(-p).

A SymbolPoly is a finite term list over a fixed space dimension n; each
term carries a multi-index alpha in the frequency variables xi_1..xi_n,
an integer Japanese-bracket weight p (the term divides by <xi>^p where
<xi> = sqrt(1 + |xi|^2)), and a coefficient expression in (t, x,
parameters).  Weights are kept >= 0 in user-facing symbols; negative
weights (positive powers of <xi>) appear only inside the companion and
triangular matrices and in canonical forms of symbols of order one.

Order membership a in S^q is decided by a two-stage procedure: exact
canonical-form inspection with the coefficients tested for vanishing on
a sample grid, then (in dimension >= 2) ray sampling of the full symbol
along a ladder of frequencies.  Verdicts are PASS / FAIL / INCONCLUSIVE
and FAIL always carries a concrete witness.  The certification is
relative to the sampled grid and box, which the report records.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np

from .exprlang import (
    Expr,
    ExprError,
    MINUS_I,
    Num,
    ZERO,
    add_e,
    d_dt,
    eval_on_grid,
    evaluate,
    Bindings,
    is_zero,
    mul_e,
    neg_e,
    sub_e,
    to_source,
)

__all__ = [
    "Term",
    "SymbolPoly",
    "SymbolError",
    "SampleGrid",
    "OrderVerdict",
    "zero",
    "one",
    "constant",
    "from_terms",
    "linear_form",
    "bracket_power",
    "add",
    "sub",
    "neg",
    "scale",
    "mul",
    "shift_weight",
    "d_t",
    "nominal_order",
    "eval_at",
    "canonicalize",
    "check_order",
    "debug_str",
    "default_grid",
]


class SymbolError(Exception):
    pass


@dataclass(frozen=True)
class Term:
    alpha: Tuple[int, ...]
    weight: int
    coeff: Expr


@dataclass(frozen=True)
class SymbolPoly:
    dim: int
    terms: Tuple[Term, ...]

    def __str__(self):
        return debug_str(self)


def _merge(dim: int, items: Iterable[Tuple[Tuple[int, ...], int, Expr]]) -> SymbolPoly:
    acc = {}
    for alpha, weight, coeff in items:
        key = (weight, alpha)
        if key in acc:
            acc[key] = add_e(acc[key], coeff)
        else:
            acc[key] = coeff
    terms = tuple(
        Term(alpha, weight, coeff)
        for (weight, alpha), coeff in sorted(acc.items())
        if not is_zero(coeff)
    )
    return SymbolPoly(dim, terms)


# ---------------------------------------------------------------------------
# constructors


def zero(dim: int) -> SymbolPoly:
    return SymbolPoly(dim, ())


def one(dim: int) -> SymbolPoly:
    return constant(Num(1.0), dim)


def constant(coeff: Expr, dim: int) -> SymbolPoly:
    return _merge(dim, [((0,) * dim, 0, coeff)])


def from_terms(dim: int, items: Iterable[Tuple[Expr, Sequence[int], int]]) -> SymbolPoly:
    """Build a symbol from (coeff, alpha, weight) triples."""
    prepared = []
    for coeff, alpha, weight in items:
        alpha = tuple(int(a) for a in alpha)
        if len(alpha) != dim:
            raise SymbolError(f"alpha {alpha} does not match dimension {dim}")
        if any(a < 0 for a in alpha):
            raise SymbolError(f"negative exponent in alpha {alpha}")
        prepared.append((alpha, int(weight), coeff))
    return _merge(dim, prepared)


def linear_form(coeffs: Sequence[Expr], dim: int) -> SymbolPoly:
    """sum_j coeffs[j] * xi_j  (a characteristic-root symbol)."""
    if len(coeffs) != dim:
        raise SymbolError("one coefficient per axis required")
    items = []
    for j, c in enumerate(coeffs):
        alpha = tuple(1 if a == j else 0 for a in range(dim))
        items.append((c, alpha, 0))
    return from_terms(dim, items)


def bracket_power(power: int, dim: int) -> SymbolPoly:
    """<xi>^power as a symbol (stored with weight -power)."""
    return SymbolPoly(dim, (Term((0,) * dim, -power, Num(1.0)),))


# ---------------------------------------------------------------------------
# ring operations


def _check_dims(a: SymbolPoly, b: SymbolPoly):
    if a.dim != b.dim:
        raise SymbolError(f"dimension mismatch: {a.dim} vs {b.dim}")


def add(a: SymbolPoly, b: SymbolPoly) -> SymbolPoly:
    _check_dims(a, b)
    return _merge(a.dim, [(t.alpha, t.weight, t.coeff) for t in a.terms + b.terms])


def scale(a: SymbolPoly, c: Expr) -> SymbolPoly:
    return _merge(a.dim, [(t.alpha, t.weight, mul_e(c, t.coeff)) for t in a.terms])


def neg(a: SymbolPoly) -> SymbolPoly:
    return scale(a, Num(-1.0))


def sub(a: SymbolPoly, b: SymbolPoly) -> SymbolPoly:
    return add(a, neg(b))


def mul(a: SymbolPoly, b: SymbolPoly) -> SymbolPoly:
    _check_dims(a, b)
    items = []
    for ta in a.terms:
        for tb in b.terms:
            alpha = tuple(x + y for x, y in zip(ta.alpha, tb.alpha))
            items.append((alpha, ta.weight + tb.weight, mul_e(ta.coeff, tb.coeff)))
    return _merge(a.dim, items)


def shift_weight(a: SymbolPoly, q: int) -> SymbolPoly:
    """Multiply by <xi>^(-q).  The resulting weights must stay >= 0."""
    shifted = []
    for t in a.terms:
        w = t.weight + q
        if w < 0:
            raise SymbolError(
                f"shift by {q} gives negative weight {w} on term alpha={t.alpha}"
            )
        shifted.append((t.alpha, w, t.coeff))
    return _merge(a.dim, shifted)


def d_t(a: SymbolPoly) -> SymbolPoly:
    """D_t = -i * d/dt applied to every coefficient."""
    items = []
    for t in a.terms:
        dc = d_dt(t.coeff)
        if is_zero(dc):
            continue
        items.append((t.alpha, t.weight, mul_e(MINUS_I, dc)))
    return _merge(a.dim, items)


def nominal_order(a: SymbolPoly) -> Optional[int]:
    """max over terms of |alpha| - p; None for the zero symbol."""
    if not a.terms:
        return None
    return max(sum(t.alpha) - t.weight for t in a.terms)


def eval_at(a: SymbolPoly, t: float, x: Sequence[float], xi: Sequence[float], params=None) -> complex:
    """Pointwise numeric value of the symbol."""
    params = params or {}
    xi = tuple(float(v) for v in xi)
    if len(xi) != a.dim:
        raise SymbolError(f"xi has {len(xi)} components, expected {a.dim}")
    bracket = math.sqrt(1.0 + sum(v * v for v in xi))
    b = Bindings(t=t, x=tuple(x), params=params)
    total = 0j
    for term in a.terms:
        mono = 1.0
        for v, a_j in zip(xi, term.alpha):
            if a_j:
                mono *= v**a_j
        total += evaluate(term.coeff, b) * mono * bracket ** (-term.weight)
    return total


# ---------------------------------------------------------------------------
# canonicalization


def _canon_1d(term: Term) -> list:
    """xi^(2q+r) <xi>^(-p) -> sum_s C(q,s)(-1)^(q-s) xi^r <xi>^(2s-p)."""
    a = term.alpha[0]
    if a < 2:
        return [(term.alpha, term.weight, term.coeff)]
    q, r = divmod(a, 2)
    out = []
    for s in range(q + 1):
        c = math.comb(q, s) * (-1) ** (q - s)
        out.append(((r,), term.weight - 2 * s, mul_e(Num(float(c)), term.coeff)))
    return out


def _grevlex_key(alpha):
    return (sum(alpha), tuple(-a for a in reversed(alpha)))


def _divide_by_xi_squared(group: dict, dim: int):
    """Exact multivariate division of sum_a coeff_a xi^a by |xi|^2.

    Returns the quotient dict when the remainder is structurally zero,
    otherwise None.  Coefficient arithmetic uses the smart constructors,
    so only structurally evident cancellations count as zero.
    """
    lead = tuple(2 if j == 0 else 0 for j in range(dim))
    work = dict(group)
    quotient = {}
    while work:
        alpha = max(work, key=_grevlex_key)
        coeff = work.pop(alpha)
        if alpha[0] < 2:
            return None
        q_alpha = tuple(a - b for a, b in zip(alpha, lead))
        quotient[q_alpha] = add_e(quotient.get(q_alpha, ZERO), coeff)
        # subtract coeff * xi^q_alpha * |xi|^2
        for j in range(dim):
            mono = tuple(a + (2 if jj == j else 0) for jj, a in enumerate(q_alpha))
            updated = sub_e(work.get(mono, ZERO), coeff) if mono != alpha else ZERO
            if mono == alpha:
                continue
            if is_zero(updated):
                work.pop(mono, None)
            else:
                work[mono] = updated
    return quotient


def canonicalize(a: SymbolPoly) -> SymbolPoly:
    """Value-preserving canonical form.

    n = 1: rewrite xi^2 -> <xi>^2 - 1 exhaustively, so every term ends
    with alpha in {0, 1}.  n >= 2: group terms by weight and extract
    exact |xi|^2 = sum xi_j^2 polynomial factors, repeating to fixpoint;
    directional cancellations that are not exact polynomial factors are
    left for ray sampling.
    """
    if a.dim == 1:
        items = []
        for term in a.terms:
            items.extend(_canon_1d(term))
        return _merge(1, items)

    items = [(t.alpha, t.weight, t.coeff) for t in a.terms]
    for _ in range(64):
        current = _merge(a.dim, items)
        groups = {}
        for t in current.terms:
            groups.setdefault(t.weight, {})[t.alpha] = t.coeff
        changed = False
        items = []
        for weight, group in sorted(groups.items()):
            if all(sum(alpha) < 2 for alpha in group):
                items.extend((alpha, weight, c) for alpha, c in group.items())
                continue
            quotient = _divide_by_xi_squared(group, a.dim)
            if quotient is None:
                items.extend((alpha, weight, c) for alpha, c in group.items())
                continue
            changed = True
            # group = Q * |xi|^2 = Q * (<xi>^2 - 1), applied at this weight
            for alpha, c in quotient.items():
                items.append((alpha, weight - 2, c))
                items.append((alpha, weight, neg_e(c)))
        if not changed:
            return _merge(a.dim, items)
    return _merge(a.dim, items)


# ---------------------------------------------------------------------------
# order checking


@dataclass
class SampleGrid:
    """Sampling lattice used for coefficient-vanishing and ray tests."""

    t_values: Tuple[float, ...]
    x_axes: Tuple[Tuple[float, ...], ...]
    params: Mapping[str, float] = field(default_factory=dict)
    tol_zero: float = 1e-10
    ray_radii: Tuple[float, ...] = tuple(float(2**k) for k in range(4, 15))
    n_directions: int = 8
    ray_fit_slack: float = 0.1

    def x_mesh(self):
        """Flattened meshgrid arrays, one per axis (empty tuple if n=0)."""
        if not self.x_axes:
            return ()
        grids = np.meshgrid(*[np.asarray(ax, dtype=float) for ax in self.x_axes], indexing="ij")
        return tuple(g.ravel() for g in grids)

    def directions(self, dim: int):
        if dim == 1:
            return [np.array([1.0]), np.array([-1.0])]
        if dim == 2:
            angles = np.arange(self.n_directions) * (2 * math.pi / self.n_directions)
            return [np.array([math.cos(a), math.sin(a)]) for a in angles]
        rng = np.random.default_rng(7)
        dirs = []
        for _ in range(max(self.n_directions, 2 * dim)):
            v = rng.normal(size=dim)
            dirs.append(v / np.linalg.norm(v))
        return dirs


def default_grid(horizon: float, dim: int, params=None, t_points: int = 17,
                 x_points: int = 9, x_box=(-math.pi, math.pi)) -> SampleGrid:
    t_values = tuple(np.linspace(0.0, float(horizon), t_points))
    x_axes = tuple(tuple(np.linspace(x_box[0], x_box[1], x_points)) for _ in range(dim))
    return SampleGrid(t_values=t_values, x_axes=x_axes, params=dict(params or {}))


@dataclass
class OrderVerdict:
    target: int
    verdict: str                      # "PASS" | "FAIL" | "INCONCLUSIVE"
    method: str                       # "canonical" | "ray-sampling"
    witness: Optional[dict] = None
    detail: str = ""

    def to_dict(self):
        return {
            "target": self.target,
            "verdict": self.verdict,
            "method": self.method,
            "witness": self.witness,
            "detail": self.detail,
        }


class _CoeffEvalFailure(Exception):
    def __init__(self, location):
        self.location = location
        super().__init__(str(location))


def _coeff_abs_on_grid(coeff: Expr, grid: SampleGrid):
    """Max |coeff| over the grid together with an argmax sample point."""
    mesh = grid.x_mesh()
    best = -1.0
    best_point = None
    for t in grid.t_values:
        try:
            vals = np.abs(eval_on_grid(coeff, t, list(mesh), grid.params))
        except (ExprError, FloatingPointError, OverflowError) as err:
            x_loc = tuple(float(m[0]) for m in mesh) if mesh else ()
            raise _CoeffEvalFailure({"t": float(t), "x": x_loc, "error": str(err)})
        if mesh:
            idx = int(np.argmax(vals))
            mx = float(vals[idx])
            point = (float(t), tuple(float(m[idx]) for m in mesh))
        else:
            mx = float(np.max(np.atleast_1d(vals)))
            point = (float(t), ())
        if not math.isfinite(mx):
            raise _CoeffEvalFailure({"t": point[0], "x": list(point[1]), "error": "non-finite coefficient value"})
        if mx > best:
            best = mx
            best_point = point
    return best, best_point


def _ray_scan(a: SymbolPoly, grid: SampleGrid, target: int):
    """Fit |a(t,x,r*w)| ~ r^q on each sampled ray; return (worst_q, info)."""
    mesh = grid.x_mesh()
    # thin the (t, x) samples: rays are about frequency behaviour
    t_samples = grid.t_values[:: max(1, len(grid.t_values) // 5)]
    if mesh:
        stride = max(1, len(mesh[0]) // 9)
        x_samples = [tuple(float(m[i]) for m in mesh) for i in range(0, len(mesh[0]), stride)]
    else:
        x_samples = [()]
    radii = np.asarray(grid.ray_radii, dtype=float)
    log_r = np.log(radii)
    worst = (-math.inf, None)
    for direction in grid.directions(a.dim):
        for t in t_samples:
            for x in x_samples:
                vals = []
                for r in radii:
                    xi = tuple(r * direction)
                    try:
                        vals.append(abs(eval_at(a, float(t), x, xi, grid.params)))
                    except (ExprError, FloatingPointError, OverflowError) as err:
                        raise _CoeffEvalFailure({"t": float(t), "x": x, "xi": xi, "error": str(err)})
                vals = np.asarray(vals)
                if not np.all(np.isfinite(vals)):
                    info = {
                        "direction": [float(v) for v in direction],
                        "t": float(t),
                        "x": list(x),
                        "fitted_q": math.inf,
                    }
                    return math.inf, info
                keep = vals > 1e-250
                if keep.sum() < 3:
                    continue  # symbol numerically zero along this ray
                slope = float(np.polyfit(log_r[keep], np.log(vals[keep]), 1)[0])
                if slope > worst[0]:
                    worst = (slope, {
                        "direction": [float(v) for v in direction],
                        "t": float(t),
                        "x": list(x),
                        "fitted_q": slope,
                    })
    return worst


def check_order(a: SymbolPoly, target: int, grid: SampleGrid) -> OrderVerdict:
    """Decide membership of the symbol in S^target over the sampled box.

    Stage 1 inspects the canonical form: every term with nominal order
    |alpha| - p above the target must have a coefficient vanishing on
    the grid.  A non-vanishing fully reduced term (|alpha| <= 1) is a
    sound failure witness.  In dimension >= 2 unreduced monomials can
    cancel directionally, so the decision is delegated to ray sampling,
    which can certify decay (PASS), exhibit growth (FAIL with the worst
    ray), or come back INCONCLUSIVE.
    """
    canon = canonicalize(a)
    try:
        # probe every coefficient: a singular coefficient anywhere in the
        # symbol invalidates a PASS, not only in the above-target part
        probed = {id(term): _coeff_abs_on_grid(term.coeff, grid) for term in canon.terms}
        offenders = []
        for term in canon.terms:
            if sum(term.alpha) - term.weight <= target:
                continue
            mx, point = probed[id(term)]
            if mx > grid.tol_zero:
                offenders.append((term, mx, point))
        if not offenders:
            residual = canon.dim >= 2 and any(sum(t.alpha) >= 2 for t in canon.terms)
            if not residual:
                return OrderVerdict(target, "PASS", "canonical")
            worst_q, info = _ray_scan(canon, grid, target)
            if info is None or worst_q <= target + grid.ray_fit_slack:
                return OrderVerdict(target, "PASS", "ray-sampling",
                                    detail="canonical stage clean; rays concur")
            return OrderVerdict(target, "INCONCLUSIVE", "ray-sampling", witness=info,
                                detail="canonical stage clean but a sampled ray fits above target")
        reduced_offender = canon.dim == 1 or all(sum(t.alpha) <= 1 for t, _, _ in offenders)
        if reduced_offender:
            term, mx, point = offenders[0]
            return OrderVerdict(
                target, "FAIL", "canonical",
                witness={
                    "alpha": list(term.alpha),
                    "weight": term.weight,
                    "nominal_order": sum(term.alpha) - term.weight,
                    "coeff": to_source(term.coeff),
                    "coeff_abs": mx,
                    "t": point[0],
                    "x": list(point[1]),
                },
            )
        # dim >= 2 with unreduced offending monomials: consult the rays
        worst_q, info = _ray_scan(canon, grid, target)
        if info is not None and worst_q > target + grid.ray_fit_slack:
            term, mx, point = offenders[0]
            witness = {
                "alpha": list(term.alpha),
                "weight": term.weight,
                "nominal_order": sum(term.alpha) - term.weight,
                "coeff": to_source(term.coeff),
                "coeff_abs": mx,
                "t": point[0],
                "x": list(point[1]),
                "ray": info,
            }
            return OrderVerdict(target, "FAIL", "ray-sampling", witness=witness)
        return OrderVerdict(
            target, "INCONCLUSIVE", "ray-sampling", witness=info,
            detail="above-target monomials present but sampled rays stay within target",
        )
    except _CoeffEvalFailure as fail:
        return OrderVerdict(target, "INCONCLUSIVE", "canonical", witness=fail.location,
                            detail="evaluation error at sample")


# ---------------------------------------------------------------------------
# debug serialization


def debug_str(a: SymbolPoly) -> str:
    """Stable textual form: terms sorted by (p, alpha), each rendered as
    (<coeff>)*xi1^a1*...*xin^an*<xi>^(-p)."""
    if not a.terms:
        return "0"
    parts = []
    for term in a.terms:  # terms are stored sorted by (weight, alpha)
        factors = [f"({to_source(term.coeff)})"]
        for j, power in enumerate(term.alpha, start=1):
            factors.append(f"xi{j}^{power}")
        factors.append(f"<xi>^({-term.weight})")
        parts.append("*".join(factors))
    return " + ".join(parts)
