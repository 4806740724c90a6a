"""Smallest Dirichlet eigenvalue of -A and the Poincare-inequality harness."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .errors import NotConverged, NotPositiveDefinite, PoincareViolated, ZeroField
from .operator import SparseOperator, _check

DEFAULT_TOL = 1e-10
MAX_ITER = 10_000
INNER_RTOL = 1e-12
POINCARE_SLACK = 1e-9


@dataclass(frozen=True)
class EigenResult:
    lambda1: float
    eigenfield: np.ndarray
    residual: float
    iterations: int


class NegatedSolver:
    """Direct solver for ``(-A) w = b`` with a positive-definiteness check.

    The LU factorisation uses a symmetric fill-reducing permutation and no
    row pivoting, so for a symmetric matrix the pivots are the D of an LDL^T
    factorisation: all positive exactly when ``-A`` is positive definite.
    """

    def __init__(self, op: SparseOperator):
        self.neg = (-op.matrix).tocsc()
        try:
            self.lu = spla.splu(
                self.neg,
                permc_spec="MMD_AT_PLUS_A",
                diag_pivot_thresh=0.0,
                options={"SymmetricMode": True},
            )
        except RuntimeError as exc:  # exactly singular
            raise NotPositiveDefinite(f"factorisation of -A failed: {exc}") from exc
        pivots = self.lu.U.diagonal()
        if not np.all(pivots > 0):
            raise NotPositiveDefinite(f"-A has {int(np.sum(pivots <= 0))} non-positive pivots")

    def solve(self, b: np.ndarray) -> np.ndarray:
        w = self.lu.solve(b)
        bnorm = np.linalg.norm(b)
        # iterative refinement until the inner solve meets its relative residual
        for _ in range(5):
            r = b - self.neg @ w
            if np.linalg.norm(r) <= INNER_RTOL * bnorm:
                break
            w = w + self.lu.solve(r)
        return w


def smallest_eigenvalue(op: SparseOperator, tol: float = DEFAULT_TOL, max_iter: int = MAX_ITER) -> EigenResult:
    """Inverse power iteration on ``-A`` from the all-ones vector."""
    if not 0 < tol < 1:
        raise ValueError(f"tol must lie in (0, 1), got {tol}")
    solver = NegatedSolver(op)
    neg = solver.neg
    v = np.ones(op.dimension)
    v /= np.linalg.norm(v)
    rq_prev = math.nan
    for it in range(1, max_iter + 1):
        w = solver.solve(v)
        v = w / np.linalg.norm(w)
        nv = neg @ v
        rq = float(np.dot(v, nv))
        if rq <= 0:
            raise NotPositiveDefinite(f"non-positive Rayleigh quotient {rq} at iteration {it}")
        residual = float(np.linalg.norm(nv - rq * v)) / rq
        if abs(rq - rq_prev) < tol * rq and residual <= tol:
            break
        rq_prev = rq
    else:
        raise NotConverged(f"inverse iteration did not converge in {max_iter} iterations (residual {residual:.3e})")

    if np.sum(v) < 0:
        v = -v
    v = v / math.sqrt(op.grid.cell_volume * float(np.dot(v, v)))
    return EigenResult(rq, v, residual, it)


def rayleigh_quotient(op: SparseOperator, v: np.ndarray) -> float:
    v = _check(op, v)
    vv = float(np.dot(v, v))
    if vv == 0.0:
        raise ZeroField("Rayleigh quotient of the zero field is undefined")
    return -float(np.dot(v, op.matrix @ v)) / vv


@dataclass(frozen=True)
class PoincareReport:
    trials: int
    seed: int
    lambda1: float
    min_quotient: float
    margin: float  # min_quotient / lambda1 - 1


def verify_poincare(
    op: SparseOperator,
    lambda1: float,
    trials: int,
    seed: int,
    center: np.ndarray | None = None,
    spread: float = 1.0,
) -> PoincareReport:
    """Check ``rayleigh_quotient >= lambda1 (1 - 1e-9)`` on seeded random fields.

    Fields are ``center + spread * U(-1, 1)`` componentwise; by default the
    center is zero and ``spread`` is one. Raises :class:`PoincareViolated`
    on the first failure.
    """
    rng = np.random.default_rng(seed)
    base = np.zeros(op.dimension) if center is None else _check(op, center)
    bound = lambda1 * (1.0 - POINCARE_SLACK)
    min_q = math.inf
    for trial in range(trials):
        v = base + spread * rng.uniform(-1.0, 1.0, op.dimension)
        q = rayleigh_quotient(op, v)
        if q < bound:
            raise PoincareViolated(
                f"trial {trial} (seed {seed}): quotient {q:.17g} below lambda1 {lambda1:.17g}",
                seed=seed,
                trial=trial,
                quotient=q,
            )
        min_q = min(min_q, q)
    margin = min_q / lambda1 - 1.0 if trials else math.inf
    return PoincareReport(trials, seed, lambda1, min_q, margin)
