"""Exact Schur triangularization of the companion principal part.

For the Sylvester matrix A built from roots lambda_1..lambda_m there is a
lower unitriangular T, computable in closed form, with

    T^(-1) A T = J,    J = diag(lambda_1..lambda_m) + <xi> superdiagonal.

Below the diagonal T has entries

    omega_{j,k} = h_{j-k}(lambda_1..lambda_k) <xi>^(k-j),

where h_r is the complete homogeneous symmetric polynomial in the first
k roots.  T^(-1) is again lower unitriangular and is obtained by back
substitution; its entries reduce to signed elementary symmetric
polynomials, which the oracle module cross-checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

from . import symbolcalc as sc
from .exprlang import Num

__all__ = ["omega", "build_T", "build_Tinv", "build_J", "SchurData", "build_schur", "verify_schur"]


def _h_table(roots: Sequence[sc.SymbolPoly], max_r: int):
    """H[k][r] = h_r(lambda_1..lambda_k); recurrence H[k][r] = H[k-1][r] + lambda_k H[k][r-1]."""
    dim = roots[0].dim
    m = len(roots)
    H: List[List[sc.SymbolPoly]] = [[sc.zero(dim)] * (max_r + 1) for _ in range(m + 1)]
    H[0][0] = sc.one(dim)
    for k in range(1, m + 1):
        H[k][0] = sc.one(dim)
        for r in range(1, max_r + 1):
            H[k][r] = sc.add(H[k - 1][r], sc.mul(roots[k - 1], H[k][r - 1]))
    return H


def omega(j: int, k: int, roots: Sequence[sc.SymbolPoly]) -> sc.SymbolPoly:
    """Entry (j, k) of T below the diagonal, 1 <= k <= j <= m.

    Returned in natural (uncanonicalized) form h_{j-k} <xi>^(k-j).
    """
    m = len(roots)
    if not (1 <= k <= j <= m):
        raise ValueError(f"omega indices out of range: j={j}, k={k}, m={m}")
    H = _h_table(roots, j - k)
    return sc.shift_weight(H[k][j - k], j - k)


def build_T(roots: Sequence[sc.SymbolPoly]):
    """Lower unitriangular T with T[j][k] = omega_{j+1,k+1}, canonicalized."""
    m = len(roots)
    dim = roots[0].dim
    zero = sc.zero(dim)
    H = _h_table(roots, m - 1)
    T = [[zero for _ in range(m)] for _ in range(m)]
    for j in range(1, m + 1):
        for k in range(1, j + 1):
            T[j - 1][k - 1] = sc.canonicalize(sc.shift_weight(H[k][j - k], j - k))
    return tuple(tuple(row) for row in T)


def build_Tinv(roots: Sequence[sc.SymbolPoly]):
    """Inverse of T by back substitution; lower unitriangular, canonicalized.

    (T^-1)_{i,j} = -omega_{i,j} - sum_{j<k<i} omega_{i,k} (T^-1)_{k,j}.
    """
    m = len(roots)
    dim = roots[0].dim
    zero = sc.zero(dim)
    one = sc.one(dim)
    H = _h_table(roots, m - 1)

    def om(i, k):
        return sc.shift_weight(H[k][i - k], i - k)

    Tinv = [[zero for _ in range(m)] for _ in range(m)]
    for i in range(1, m + 1):
        Tinv[i - 1][i - 1] = one
        for j in range(i - 1, 0, -1):
            acc = sc.neg(om(i, j))
            for k in range(j + 1, i):
                acc = sc.sub(acc, sc.mul(om(i, k), Tinv[k - 1][j - 1]))
            Tinv[i - 1][j - 1] = sc.canonicalize(acc)
    return tuple(tuple(row) for row in Tinv)


def build_J(roots: Sequence[sc.SymbolPoly]):
    """J = diag(lambda_1..lambda_m) + <xi> on the superdiagonal."""
    m = len(roots)
    dim = roots[0].dim
    zero = sc.zero(dim)
    bracket = sc.bracket_power(1, dim)
    J = [[zero for _ in range(m)] for _ in range(m)]
    for i in range(m):
        J[i][i] = sc.canonicalize(roots[i])
        if i + 1 < m:
            J[i][i + 1] = bracket
    return tuple(tuple(row) for row in J)


@dataclass
class SchurData:
    roots: Tuple[sc.SymbolPoly, ...]
    T: Tuple[Tuple[sc.SymbolPoly, ...], ...]
    Tinv: Tuple[Tuple[sc.SymbolPoly, ...], ...]
    J: Tuple[Tuple[sc.SymbolPoly, ...], ...]


def build_schur(roots: Sequence[sc.SymbolPoly]) -> SchurData:
    roots = tuple(roots)
    return SchurData(roots=roots, T=build_T(roots), Tinv=build_Tinv(roots), J=build_J(roots))


def _eval_matrix(M, t, x, xi, params):
    return [[sc.eval_at(entry, t, x, xi, params) for entry in row] for row in M]


def verify_schur(A, data: SchurData, grid: sc.SampleGrid) -> float:
    """Max over samples of ||T^-1 A T - J||_inf / (1 + <xi>).

    A is the principal companion matrix; the division keeps the residual
    comparable across frequencies since every entry is at most order 1.
    """
    import math

    import numpy as np

    m = len(data.T)
    dim = data.roots[0].dim
    worst = 0.0
    xi_samples = []
    for radius in (1.0, 4.0, 64.0, 1024.0):
        for d in grid.directions(dim):
            xi_samples.append(tuple(radius * c for c in d))
    x0 = tuple(0.0 for _ in range(dim))
    for t in grid.t_values:
        for xi in xi_samples:
            Tm = np.array(_eval_matrix(data.T, t, x0, xi, grid.params), dtype=complex)
            Tinvm = np.array(_eval_matrix(data.Tinv, t, x0, xi, grid.params), dtype=complex)
            Am = np.array(_eval_matrix(A, t, x0, xi, grid.params), dtype=complex)
            Jm = np.array(_eval_matrix(data.J, t, x0, xi, grid.params), dtype=complex)
            resid = Tinvm @ Am @ Tm - Jm
            bracket = math.sqrt(1.0 + sum(c * c for c in xi))
            val = float(np.max(np.abs(resid))) / (1.0 + bracket)
            worst = max(worst, val)
    return worst
