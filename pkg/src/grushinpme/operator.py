"""Discrete Dirichlet Baouendi-Grushin operator on a tensor grid.

The operator is ``A = sum_x D_xx + sum_y diag(|x|^(2 gamma)) D_yy`` with central
second differences and the boundary values eliminated. Since the y-coefficient
depends only on the x-coordinates it is constant along every y-line, so the
y-neighbour entries ``c/h_y**2`` are bitwise equal for (i, j) and (j, i).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.io
import scipy.sparse as sp

from .errors import DimensionMismatch
from .grid import Grid


@dataclass(frozen=True, eq=False)
class SparseOperator:
    grid: Grid
    matrix: sp.csr_matrix
    symmetric: bool = True

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    @cached_property
    def max_abs_diagonal(self) -> float:
        return float(np.max(np.abs(self.diagonal)))


def y_coefficient(grid: Grid) -> np.ndarray:
    """``|x|^(2 gamma)`` at every node (flat order); ``0**0`` is taken as 1."""
    return grid.x_norm() ** (2.0 * grid.spec.gamma)


def _second_difference(n: int, h: float) -> sp.csr_matrix:
    inv_h2 = 1.0 / (h * h)
    off = np.full(n - 1, inv_h2)
    return sp.diags([off, np.full(n, -2.0 * inv_h2), off], [-1, 0, 1], format="csr")


def _along_axis(shape, axis: int, block: sp.spmatrix) -> sp.csr_matrix:
    before = int(np.prod(shape[:axis], dtype=int))
    after = int(np.prod(shape[axis + 1 :], dtype=int))
    out = sp.kron(sp.identity(before, format="csr"), block, format="csr")
    return sp.kron(out, sp.identity(after, format="csr"), format="csr")


def assemble(grid: Grid) -> SparseOperator:
    spec = grid.spec
    shape = grid.shape
    total = sp.csr_matrix((grid.size, grid.size))
    for d in range(spec.m):
        total = total + _along_axis(shape, d, _second_difference(shape[d], grid.spacings[d]))
    coef = sp.diags(y_coefficient(grid), format="csr")
    for d in range(spec.m, spec.ndim):
        total = total + coef @ _along_axis(shape, d, _second_difference(shape[d], grid.spacings[d]))
    total = sp.csr_matrix(total)
    total.eliminate_zeros()
    total.sort_indices()
    return SparseOperator(grid, total)


def _check(op: SparseOperator, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (op.dimension,):
        raise DimensionMismatch(f"field of shape {v.shape} does not match operator dimension {op.dimension}")
    return v


def apply(op: SparseOperator, v: np.ndarray) -> np.ndarray:
    return op.matrix @ _check(op, v)


def grad_energy(op: SparseOperator, v: np.ndarray) -> float:
    """Discrete ``int |grad_gamma v|^2`` as ``-cell_volume * v.(A v)``."""
    v = _check(op, v)
    return -op.grid.cell_volume * float(np.dot(v, op.matrix @ v))


def edge_energy(grid: Grid, v: np.ndarray) -> float:
    """Gradient energy summed over grid edges with one-sided differences to the zero boundary.

    Independent of the assembled matrix; agreement with :func:`grad_energy` is
    the discrete divergence (summation-by-parts) identity.
    """
    spec = grid.spec
    u = np.asarray(v, dtype=float).reshape(grid.shape)
    coef = y_coefficient(grid).reshape(grid.shape)
    total = 0.0
    for d in range(spec.ndim):
        pad = [(0, 0)] * spec.ndim
        pad[d] = (1, 1)
        diffs = np.diff(np.pad(u, pad), axis=d) / grid.spacings[d]
        sq = diffs * diffs
        if d >= spec.m:
            # constant along a y-line, so one slice broadcasts over all n+1 edges
            sq = sq * coef.take([0], axis=d)
        total += float(np.sum(sq))
    return grid.cell_volume * total


def dump_matrix(op: SparseOperator, path) -> None:
    """Write the matrix in Matrix Market coordinate format with 17 significant digits."""
    scipy.io.mmwrite(str(path), op.matrix.tocoo(), symmetry="general", precision=17)
