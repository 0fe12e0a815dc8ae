"""Schur triangularization of the companion principal part."""

import math

import numpy as np
import pytest

from levichk import reduction as rd
from levichk import schur
from levichk import symbolcalc as sc
from levichk.exprlang import parse


def roots_from(src_rows, dim=1):
    return [sc.linear_form([parse(c) for c in row], dim) for row in src_rows]


def eval_mat(M, t, xi, params=None, x=None):
    dim = len(xi)
    x = x or tuple(0.0 for _ in range(dim))
    return np.array(
        [[sc.eval_at(e, t, x, xi, params or {}) for e in row] for row in M],
        dtype=complex,
    )


def test_omega_values_m2():
    roots = roots_from([["t"], ["-t"]])
    t, xi = 0.7, 4.0
    br = math.sqrt(1 + 16.0)
    w = schur.omega(2, 1, roots)
    assert sc.eval_at(w, t, (0.0,), (xi,), {}) == pytest.approx(t * xi / br)
    assert sc.eval_at(schur.omega(2, 2, roots), t, (0.0,), (xi,), {}) == 1.0


def test_omega_values_m3():
    # omega_{3,1} = h_2(lambda_1) <xi>^-2, omega_{3,2} = (lambda_1 + lambda_2) <xi>^-1
    roots = roots_from([["1"], ["t"], ["1 - t"]])
    t, xi = 0.3, -2.0
    br2 = 1 + 4.0
    l1, l2 = xi, t * xi
    assert sc.eval_at(schur.omega(3, 1, roots), t, (0.0,), (xi,), {}) == pytest.approx(
        l1 * l1 / br2
    )
    assert sc.eval_at(schur.omega(3, 2, roots), t, (0.0,), (xi,), {}) == pytest.approx(
        (l1 + l2) / math.sqrt(br2)
    )


def test_T_rows_m3():
    roots = roots_from([["1"], ["t"], ["1 - t"]])
    T = schur.build_T(roots)
    t, xi = 0.45, 6.0
    br = math.sqrt(37.0)
    l1, l2 = xi, t * xi
    Tm = eval_mat(T, t, (xi,))
    want = np.array(
        [
            [1, 0, 0],
            [l1 / br, 1, 0],
            [l1 * l1 / br ** 2, (l1 + l2) / br, 1],
        ],
        dtype=complex,
    )
    assert np.max(np.abs(Tm - want)) < 1e-12


def test_Tinv_rows_m3():
    roots = roots_from([["1"], ["t"], ["1 - t"]])
    Tinv = schur.build_Tinv(roots)
    t, xi = 0.45, 6.0
    br = math.sqrt(37.0)
    l1, l2 = xi, t * xi
    Tm = eval_mat(Tinv, t, (xi,))
    want = np.array(
        [
            [1, 0, 0],
            [-l1 / br, 1, 0],
            [l1 * l2 / br ** 2, -(l1 + l2) / br, 1],
        ],
        dtype=complex,
    )
    assert np.max(np.abs(Tm - want)) < 1e-12


def test_Tinv_closed_form_m4():
    # (T^-1)_{i,j} = (-1)^(i-j) e_{i-j}(lambda_1..lambda_{i-1}) <xi>^(j-i)
    roots = roots_from([["1"], ["-1"], ["t"], ["-t"]])
    Tinv = schur.build_Tinv(roots)
    t, xi = 0.8, 3.0
    br = math.sqrt(10.0)
    l = [xi, -xi, t * xi, -t * xi]
    Tm = eval_mat(Tinv, t, (xi,))
    e2_3 = l[0] * l[1] + l[0] * l[2] + l[1] * l[2]
    want_row4 = np.array(
        [
            -l[0] * l[1] * l[2] / br ** 3,
            e2_3 / br ** 2,
            -(l[0] + l[1] + l[2]) / br,
            1,
        ],
        dtype=complex,
    )
    assert np.max(np.abs(Tm[3] - want_row4)) < 1e-12


def test_T_unitriangular():
    roots = roots_from([["1"], ["-1"], ["t"], ["-t"]])
    for M in (schur.build_T(roots), schur.build_Tinv(roots)):
        for i in range(4):
            assert sc.eval_at(M[i][i], 0.5, (0.0,), (2.0,), {}) == 1.0
            for j in range(i + 1, 4):
                assert M[i][j].terms == ()


def test_Tinv_times_T_is_identity():
    rng = np.random.default_rng(3)
    for _ in range(25):
        m = int(rng.integers(2, 7))
        coeffs = rng.uniform(-2, 2, size=(m, 2))
        roots = roots_from([[f"{c[0]:.6f} + {c[1]:.6f}*t"] for c in coeffs])
        T = schur.build_T(roots)
        Tinv = schur.build_Tinv(roots)
        t = float(rng.uniform(0, 1))
        xi = float(rng.uniform(0.5, 50)) * (1 if rng.uniform() < 0.5 else -1)
        P = eval_mat(Tinv, t, (xi,)) @ eval_mat(T, t, (xi,))
        assert np.max(np.abs(P - np.eye(m))) < 1e-10


def test_J_structure():
    roots = roots_from([["1"], ["t"], ["1 - t"]])
    J = schur.build_J(roots)
    t, xi = 0.25, 4.0
    br = math.sqrt(17.0)
    Jm = eval_mat(J, t, (xi,))
    want = np.array(
        [[xi, br, 0], [0, t * xi, br], [0, 0, (1 - t) * xi]], dtype=complex
    )
    assert np.max(np.abs(Jm - want)) < 1e-12


def test_schur_residual_small():
    cases = [
        (2, [["t"], ["-t"]]),
        (3, [["1"], ["t"], ["1 - t"]]),
        (4, [["1"], ["-1"], ["sqrt(t + 0.1)"], ["-(sqrt(t + 0.1))"]]),
        # coincident roots
        (3, [["t"], ["t"], ["t"]]),
        (2, [["0"], ["0"]]),
    ]
    for m, src in cases:
        spec = rd.ProblemSpec(
            order=m,
            dim=1,
            horizon=0.9,
            roots=tuple(tuple(parse(c) for c in row) for row in src),
        )
        sys = rd.build_companion(spec)
        data = schur.build_schur(rd.root_symbols(spec))
        grid = sc.default_grid(0.9, 1)
        assert schur.verify_schur(sys.A, data, grid) < 1e-9


def test_schur_residual_two_dims():
    spec = rd.ProblemSpec(
        order=2,
        dim=2,
        horizon=1.0,
        roots=tuple(tuple(parse(c) for c in row) for row in [["t", "0"], ["0", "2*t"]]),
    )
    sys = rd.build_companion(spec)
    data = schur.build_schur(rd.root_symbols(spec))
    grid = sc.default_grid(1.0, 2)
    assert schur.verify_schur(sys.A, data, grid) < 1e-9


def test_conjugation_gives_J_pointwise():
    rng = np.random.default_rng(17)
    for _ in range(20):
        m = int(rng.integers(2, 6))
        coeffs = rng.uniform(-1.5, 1.5, size=(m, 2))
        src = [[f"{c[0]:.6f} + {c[1]:.6f}*t"] for c in coeffs]
        spec = rd.ProblemSpec(
            order=m,
            dim=1,
            horizon=1.0,
            roots=tuple(tuple(parse(c) for c in row) for row in src),
        )
        sys = rd.build_companion(spec)
        data = schur.build_schur(rd.root_symbols(spec))
        t = float(rng.uniform(0, 1))
        xi = float(rng.uniform(1, 30))
        Am = eval_mat(sys.A, t, (xi,))
        Tm = eval_mat(data.T, t, (xi,))
        Tim = eval_mat(data.Tinv, t, (xi,))
        Jm = eval_mat(data.J, t, (xi,))
        assert np.max(np.abs(Tim @ Am @ Tm - Jm)) < 1e-8 * (1 + abs(xi))
