"""Independent brute-force verifiers.

Everything here re-derives a quantity the construction modules produce by
a different route: hard-coded small-order matrices, direct enumeration of
symmetric polynomials, central finite differences, dense eigensolves.
Tests and the `verify` CLI subcommand run these against specs to produce
trust evidence; none of the production code paths call into this module.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import reduction as rd
from . import schur
from . import symbolcalc as sc

__all__ = [
    "OracleError",
    "OracleReport",
    "closed_form_T",
    "enum_homogeneous",
    "symbols_agree",
    "fd_check_E",
    "verify_all",
]


class OracleError(Exception):
    pass


@dataclass
class OracleReport:
    name: str
    max_dev: float
    samples: int
    tol: float
    passed: bool
    seed: int
    note: str = ""

    def to_dict(self):
        return {
            "name": self.name,
            "max_dev": self.max_dev,
            "samples": self.samples,
            "tol": self.tol,
            "passed": self.passed,
            "seed": self.seed,
            "note": self.note,
        }


def closed_form_T(m: int, roots: Sequence[sc.SymbolPoly]):
    """Hard-coded T and T^(-1) for m = 2, 3, 4, canonicalized.

    Transcribed entry by entry; build_T/build_Tinv must reproduce these.
    """
    if m not in (2, 3, 4):
        raise OracleError(f"no closed form stored for m={m}")
    if len(roots) != m:
        raise OracleError(f"expected {m} roots, got {len(roots)}")
    dim = roots[0].dim
    one = sc.one(dim)
    zero = sc.zero(dim)
    l1, l2 = roots[0], roots[1] if m >= 2 else None
    sw = sc.shift_weight
    if m == 2:
        T = ((one, zero), (sw(l1, 1), one))
        Tinv = ((one, zero), (sc.neg(sw(l1, 1)), one))
    elif m == 3:
        T = (
            (one, zero, zero),
            (sw(l1, 1), one, zero),
            (sw(sc.mul(l1, l1), 2), sw(sc.add(l1, l2), 1), one),
        )
        Tinv = (
            (one, zero, zero),
            (sc.neg(sw(l1, 1)), one, zero),
            (sw(sc.mul(l1, l2), 2), sc.neg(sw(sc.add(l1, l2), 1)), one),
        )
    else:
        l3 = roots[2]
        T = (
            (one, zero, zero, zero),
            (sw(l1, 1), one, zero, zero),
            (sw(sc.mul(l1, l1), 2), sw(sc.add(l1, l2), 1), one, zero),
            (
                sw(sc.mul(sc.mul(l1, l1), l1), 3),
                sw(sc.add(sc.add(sc.mul(l1, l1), sc.mul(l2, l2)), sc.mul(l1, l2)), 2),
                sw(sc.add(sc.add(l1, l2), l3), 1),
                one,
            ),
        )
        Tinv = (
            (one, zero, zero, zero),
            (sc.neg(sw(l1, 1)), one, zero, zero),
            (sw(sc.mul(l1, l2), 2), sc.neg(sw(sc.add(l2, l1), 1)), one, zero),
            (
                sc.neg(sw(sc.mul(sc.mul(l1, l2), l3), 3)),
                sw(sc.add(sc.add(sc.mul(l1, l2), sc.mul(l1, l3)), sc.mul(l2, l3)), 2),
                sc.neg(sw(sc.add(sc.add(l1, l2), l3), 1)),
                one,
            ),
        )
    canon = lambda M: tuple(tuple(sc.canonicalize(e) for e in row) for row in M)
    return canon(T), canon(Tinv)


def enum_homogeneous(r: int, k: int, roots: Sequence[sc.SymbolPoly]) -> sc.SymbolPoly:
    """sum over all alpha in N_0^k with |alpha| = r of prod lambda_i^alpha_i,
    times <xi>^(-r), by direct enumeration.  Exponential in r; capped."""
    if r > 8 or k > 8:
        raise OracleError(f"enumeration cap exceeded: r={r}, k={k} (max 8)")
    if k > len(roots):
        raise OracleError(f"k={k} exceeds number of roots {len(roots)}")
    dim = roots[0].dim
    if r == 0:
        return sc.one(dim)
    total = sc.zero(dim)
    for combo in itertools.combinations_with_replacement(range(k), r):
        prod = sc.one(dim)
        for idx in combo:
            prod = sc.mul(prod, roots[idx])
        total = sc.add(total, prod)
    return sc.shift_weight(total, r)


def _sample_points(rng, horizon, dim, n, t_lo=0.0):
    pts = []
    for _ in range(n):
        t = float(rng.uniform(t_lo, horizon - t_lo))
        mag = 10.0 ** float(rng.uniform(0, 3))
        if dim == 1:
            xi = (mag * (1.0 if rng.uniform() < 0.5 else -1.0),)
        else:
            v = rng.normal(size=dim)
            v = v / np.linalg.norm(v)
            xi = tuple(float(mag * c) for c in v)
        pts.append((t, xi))
    return pts


def symbols_agree(a: sc.SymbolPoly, b: sc.SymbolPoly, points, params) -> float:
    """Max pointwise deviation |a - b| / (1 + |a|) over the samples."""
    worst = 0.0
    x0 = tuple(0.0 for _ in range(a.dim))
    for t, xi in points:
        va = sc.eval_at(a, t, x0, xi, params)
        vb = sc.eval_at(b, t, x0, xi, params)
        worst = max(worst, abs(va - vb) / (1.0 + abs(va)))
    return worst


def _matrix_dev(M1, M2, points, params) -> float:
    worst = 0.0
    for i, row in enumerate(M1):
        for j, entry in enumerate(row):
            worst = max(worst, symbols_agree(entry, M2[i][j], points, params))
    return worst


def closed_form_check(spec: rd.ProblemSpec, seed: int = 0, samples: int = 100) -> OracleReport:
    """build_T/build_Tinv against the stored m = 2..4 matrices."""
    m = spec.order
    if m not in (2, 3, 4):
        return OracleReport(
            name="closed_form_T",
            max_dev=0.0,
            samples=0,
            tol=1e-10,
            passed=True,
            seed=seed,
            note=f"skipped: no stored closed form for m={m}",
        )
    roots = rd.root_symbols(spec)
    T_ref, Tinv_ref = closed_form_T(m, roots)
    T = schur.build_T(roots)
    Tinv = schur.build_Tinv(roots)
    rng = np.random.default_rng(seed)
    pts = _sample_points(rng, spec.horizon, spec.dim, samples)
    dev = max(
        _matrix_dev(T, T_ref, pts, spec.params),
        _matrix_dev(Tinv, Tinv_ref, pts, spec.params),
    )
    note = ""
    keys_ok = True
    for built, ref in ((T, T_ref), (Tinv, Tinv_ref)):
        for i in range(m):
            for j in range(m):
                kb = {(t.alpha, t.weight) for t in built[i][j].terms}
                kr = {(t.alpha, t.weight) for t in ref[i][j].terms}
                if kb != kr and not _keys_equivalent(built[i][j], ref[i][j], pts, spec.params):
                    keys_ok = False
                    note = f"canonical term keys differ at entry ({i + 1},{j + 1})"
    return OracleReport(
        name="closed_form_T",
        max_dev=dev,
        samples=samples,
        tol=1e-10,
        passed=keys_ok and dev <= 1e-10,
        seed=seed,
        note=note,
    )


def _keys_equivalent(a: sc.SymbolPoly, b: sc.SymbolPoly, points, params) -> bool:
    """Keys may differ only through terms whose coefficients vanish at all samples."""
    diff_keys = {(t.alpha, t.weight) for t in a.terms} ^ {(t.alpha, t.weight) for t in b.terms}
    x0 = tuple(0.0 for _ in range(a.dim))
    from .exprlang import Bindings, evaluate

    for poly in (a, b):
        for term in poly.terms:
            if (term.alpha, term.weight) in diff_keys:
                for t, _ in points:
                    v = evaluate(term.coeff, Bindings(t=t, x=x0, params=params))
                    if abs(v) > 1e-10:
                        return False
    return True


def omega_enum_check(spec: rd.ProblemSpec, seed: int = 0, samples: int = 40) -> OracleReport:
    """Recurrence omega against enumeration, all j-k <= 6 with k <= 6."""
    roots = rd.root_symbols(spec)
    m = spec.order
    rng = np.random.default_rng(seed)
    pts = _sample_points(rng, spec.horizon, spec.dim, samples)
    worst = 0.0
    count = 0
    for k in range(1, min(m, 6) + 1):
        for j in range(k, min(m, k + 6) + 1):
            if j > m:
                break
            om = schur.omega(j, k, roots)
            ref = enum_homogeneous(j - k, k, roots)
            worst = max(worst, symbols_agree(om, ref, pts, spec.params))
            count += 1
    return OracleReport(
        name="omega_enumeration",
        max_dev=worst,
        samples=samples * count,
        tol=1e-10,
        passed=worst <= 1e-10,
        seed=seed,
    )


def schur_residual_check(spec: rd.ProblemSpec, seed: int = 0) -> OracleReport:
    system = rd.build_companion(spec)
    data = schur.build_schur(rd.root_symbols(spec))
    grid = sc.default_grid(spec.horizon, spec.dim, params=spec.params)
    dev = schur.verify_schur(system.A, data, grid)
    n_dirs = len(grid.directions(spec.dim))
    return OracleReport(
        name="schur_residual",
        max_dev=dev,
        samples=len(grid.t_values) * 4 * n_dirs,
        tol=1e-9,
        passed=dev <= 1e-9,
        seed=seed,
    )


def fd_check_E(spec: rd.ProblemSpec, h: float = 1e-5, samples: int = 100,
               seed: int = 0) -> OracleReport:
    """compute_E against Tinv(t) * (-i) (T(t+h) - T(t-h)) / (2h)."""
    if not 1e-7 <= h <= 1e-3:
        raise OracleError(f"step size h={h} outside [1e-7, 1e-3]")
    from . import levi

    roots = rd.root_symbols(spec)
    data = schur.build_schur(roots)
    E = levi.compute_E(data.Tinv, roots)
    m = spec.order
    rng = np.random.default_rng(seed)
    pts = _sample_points(rng, spec.horizon, spec.dim, samples, t_lo=2 * h)
    x0 = tuple(0.0 for _ in range(spec.dim))

    def eval_T(tv, xi):
        return np.array(
            [[sc.eval_at(e, tv, x0, xi, spec.params) for e in row] for row in data.T],
            dtype=complex,
        )

    worst = 0.0
    for t, xi in pts:
        Tf = eval_T(t + h, xi)
        Tb = eval_T(t - h, xi)
        Tim = np.array(
            [[sc.eval_at(e, t, x0, xi, spec.params) for e in row] for row in data.Tinv],
            dtype=complex,
        )
        fd = Tim @ ((-1j) * (Tf - Tb) / (2 * h))
        Em = np.array(
            [[sc.eval_at(e, t, x0, xi, spec.params) for e in row] for row in E],
            dtype=complex,
        )
        dev = np.abs(fd - Em) / (1.0 + np.abs(Em))
        worst = max(worst, float(np.max(dev)))
    return OracleReport(
        name="E_finite_difference",
        max_dev=worst,
        samples=samples,
        tol=1e-4,
        passed=worst <= 1e-4,
        seed=seed,
    )


def eigenvalue_check(spec: rd.ProblemSpec, samples: int = 100, seed: int = 0) -> OracleReport:
    """Companion eigenvalue multiset against the declared roots.

    Coincident roots make the companion matrix defective; eigenvalues of a
    multiplicity-q cluster carry O(eps^(1/q)) forward error, so the
    tolerance is far looser than for the direct residual checks.
    """
    system = rd.build_companion(spec)
    roots = rd.root_symbols(spec)
    rng = np.random.default_rng(seed)
    pts = _sample_points(rng, spec.horizon, spec.dim, samples)
    x0 = tuple(0.0 for _ in range(spec.dim))
    worst = 0.0
    for t, xi in pts:
        Am = np.array(
            [[sc.eval_at(e, t, x0, xi, spec.params) for e in row] for row in system.A],
            dtype=complex,
        )
        eig = np.sort_complex(np.linalg.eigvals(Am))
        lam = np.sort_complex(
            np.array([sc.eval_at(l, t, x0, xi, spec.params) for l in roots])
        )
        scale = 1.0 + float(np.max(np.abs(lam))) + math.sqrt(sum(c * c for c in xi))
        worst = max(worst, float(np.max(np.abs(eig - lam))) / scale)
    return OracleReport(
        name="companion_eigenvalues",
        max_dev=worst,
        samples=samples,
        tol=1e-4,
        passed=worst <= 1e-4,
        seed=seed,
    )


def verify_all(spec: rd.ProblemSpec, seed: int = 0) -> List[OracleReport]:
    """Run every oracle against one problem; any failing sub-report fails the lot."""
    rd.validate(spec)
    return [
        closed_form_check(spec, seed=seed),
        omega_enum_check(spec, seed=seed),
        schur_residual_check(spec, seed=seed),
        fd_check_E(spec, seed=seed),
        eigenvalue_check(spec, seed=seed),
    ]
