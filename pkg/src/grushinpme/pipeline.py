"""End-to-end experiments: assemble, eigenvalue, hypotheses, simulate, certify."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from .config import RunConfig
from .diagnostics import SIMULATE_ONLY, Certificate, HypothesisReport, Trace, certify, compute_J, compute_mass, fp_residual
from .errors import GrushinError, NonPositiveJ0, NonPositiveSigma, ParamViolation
from .grid import DomainSpec, Grid, build_grid, homogeneous_dimension
from .operator import SparseOperator, apply, assemble, grad_energy
from .solver import SimulationResult, initial_field, run
from .source import (
    BLOWUP,
    GLOBAL,
    ConcavityConstants,
    ConcavityParams,
    ConditionReport,
    SourceModel,
    beta_bound,
    check_blowup_condition,
    check_global_condition,
    check_params,
    concavity_constants,
)
from .spectral import EigenResult, PoincareReport, smallest_eigenvalue, verify_poincare


class HypothesisFailed(GrushinError):
    def __init__(self, message, report: HypothesisReport | None = None):
        super().__init__(message)
        self.report = report


def setup(cfg: RunConfig) -> tuple[Grid, SparseOperator]:
    grid = build_grid(cfg.domain)
    return grid, assemble(grid)


def resolve_params(cfg: RunConfig, lambda1: float) -> ConcavityParams:
    beta = beta_bound(lambda1, cfg.ell, cfg.alpha) if cfg.beta == "auto" else cfg.beta
    return ConcavityParams(cfg.ell, cfg.alpha, beta, cfg.theta)


def check_condition(cfg: RunConfig, params: ConcavityParams, lambda1: float) -> ConditionReport:
    checker = check_blowup_condition if cfg.mode == BLOWUP else check_global_condition
    return checker(cfg.source, params, lambda1, cfg.u_max, cfg.samples)


def blowup_scale(
    op: SparseOperator, source: SourceModel, ell: float, theta: float, phi: np.ndarray, headroom: float
) -> tuple[float, float]:
    """Smallest c with J(c phi) = 0, and ``headroom * c``.

    J(0) = -theta |D| < 0; the bracket is grown by doubling until J turns
    positive, which happens for any source growing faster than u^(ell+1)
    along phi.
    """

    def J(c):
        return compute_J(c * phi, op, source, ell, theta)

    hi = 1.0
    for _ in range(200):
        if J(hi) > 0:
            break
        hi *= 2.0
    else:
        raise NonPositiveJ0("J(c phi) stays nonpositive for every scale tried")
    root = brentq(J, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return root, headroom * root


def initial_data(cfg: RunConfig, grid: Grid, op: SparseOperator, eig: EigenResult | None) -> np.ndarray:
    ini = cfg.solver.initial
    if ini.kind == "eigenfield" and eig is None:
        eig = smallest_eigenvalue(op, cfg.eigen_tol)
    phi = eig.eigenfield if eig is not None else None
    if ini.scale == "auto":
        _, scale = blowup_scale(op, cfg.source, cfg.ell, cfg.theta, phi, ini.headroom)
        ini = replace(ini, scale=scale)
    return initial_field(grid, ini, op, eigenfield=phi)


@dataclass
class CertifyRun:
    certificate: Certificate
    trace: Trace
    result: SimulationResult
    hypotheses: HypothesisReport
    constants: ConcavityConstants | None
    params: ConcavityParams
    eigen: EigenResult
    u0: np.ndarray


def hypotheses(cfg: RunConfig, op: SparseOperator, eig: EigenResult, u0: np.ndarray) -> tuple[HypothesisReport, ConcavityParams]:
    lam = eig.lambda1
    params = resolve_params(cfg, lam)
    try:
        check_params(params, lam, cfg.mode)
        params_ok, message = True, "ok"
        condition = check_condition(cfg, params, lam)
    except ParamViolation as exc:
        params_ok, message, condition = False, str(exc), None
    J0 = compute_J(u0, op, cfg.source, cfg.ell, cfg.theta)
    report = HypothesisReport(
        mode=cfg.mode,
        lambda1=lam,
        params_ok=params_ok,
        params_message=message,
        condition=condition,
        J0=J0,
        J0_required=not (cfg.mode == GLOBAL and params.alpha == 0.0),
    )
    return report, params


def certify_run(cfg: RunConfig) -> CertifyRun:
    """Run the full pipeline for ``cfg.mode`` (blow-up or global).

    Raises :class:`HypothesisFailed` if the hypothesis set does not hold, in
    which case no simulation is attempted.
    """
    if cfg.mode not in (BLOWUP, GLOBAL):
        raise ValueError(f"cannot certify mode {cfg.mode!r}")
    grid, op = setup(cfg)
    eig = smallest_eigenvalue(op, cfg.eigen_tol)
    u0 = initial_data(cfg, grid, op, eig)
    report, params = hypotheses(cfg, op, eig, u0)
    failed = [c.name for c in report.checks() if not c.passed]
    if failed:
        raise HypothesisFailed(f"hypotheses not satisfied: {', '.join(failed)}", report)

    constants = None
    if cfg.mode == BLOWUP:
        mass0 = compute_mass(grid, u0, cfg.ell)
        try:
            constants = concavity_constants(params, report.J0, mass0)
        except (NonPositiveJ0, NonPositiveSigma) as exc:
            raise HypothesisFailed(str(exc), report) from exc
    trace = Trace(op, cfg.source, cfg.ell, params.theta, cfg.mode, constants, params.alpha)
    result = run(grid, op, cfg.solver, u0, trace)
    cert = certify(trace, cfg.mode, result.outcome, report, cfg.solver.t_end, cfg.tolerances)
    return CertifyRun(cert, trace, result, report, constants, params, eig, u0)


def simulate(cfg: RunConfig) -> tuple[SimulationResult, Grid]:
    grid, op = setup(cfg)
    eig = None
    if cfg.solver.initial.kind == "eigenfield":
        eig = smallest_eigenvalue(op, cfg.eigen_tol)
    u0 = initial_data(cfg, grid, op, eig)
    trace = Trace(op, cfg.source, cfg.ell, cfg.theta, SIMULATE_ONLY)
    return run(grid, op, cfg.solver, u0, trace), grid


def eigen(cfg: RunConfig, seed: int | None = None) -> tuple[EigenResult, PoincareReport, Grid, SparseOperator]:
    grid, op = setup(cfg)
    eig = smallest_eigenvalue(op, cfg.eigen_tol)
    report = verify_poincare(op, eig.lambda1, cfg.poincare_trials, cfg.seed if seed is None else seed)
    return eig, report, grid, op


def gamma_sweep(cfg: RunConfig, seed: int | None = None) -> list[dict]:
    rows = []
    for gamma in cfg.sweep_gamma:
        spec = replace(cfg.domain, gamma=gamma)
        op = assemble(build_grid(spec))
        eig = smallest_eigenvalue(op, cfg.eigen_tol)
        poincare = verify_poincare(op, eig.lambda1, cfg.poincare_trials, cfg.seed if seed is None else seed)
        rows.append(
            {
                "gamma": gamma,
                "Q": homogeneous_dimension(spec),
                "lambda1": eig.lambda1,
                "residual": eig.residual,
                "iterations": eig.iterations,
                "poincare_min_quotient": poincare.min_quotient,
            }
        )
    return rows


def sine_product(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Samples of w = prod sin(pi (z_d - a_d)/L_d) and of its exact image under the Grushin operator."""
    spec = grid.spec
    nodes = grid.node_coordinates()
    w = np.ones(grid.size)
    for d, (a, b) in enumerate(spec.extents):
        w *= np.sin(np.pi * (nodes[:, d] - a) / (b - a))
    kx = sum((np.pi / (b - a)) ** 2 for a, b in spec.extents[: spec.m])
    ky = sum((np.pi / (b - a)) ** 2 for a, b in spec.extents[spec.m :])
    image = -(kx + grid.x_norm() ** (2.0 * spec.gamma) * ky) * w
    return w, image


def spatial_convergence(cfg: RunConfig) -> list[dict]:
    """Operator truncation error and lambda1 under uniform refinement."""
    rows = []
    prev = None
    for n in cfg.convergence_nodes:
        spec = DomainSpec(cfg.domain.m, cfg.domain.k, cfg.domain.gamma, cfg.domain.extents, (n,) * cfg.domain.ndim)
        grid = build_grid(spec)
        op = assemble(grid)
        w, image = sine_product(grid)
        err = float(np.max(np.abs(apply(op, w) - image)))
        lam = smallest_eigenvalue(op, cfg.eigen_tol).lambda1
        row = {
            "n": n,
            "h": max(grid.spacings),
            "operator_error": err,
            "operator_ratio": math.nan,
            "lambda1": lam,
            "lambda1_ratio": math.nan,
            "grad_energy": grad_energy(op, w),
        }
        if prev is not None:
            row["operator_ratio"] = prev["operator_error"] / err
            if len(rows) >= 2:
                d_prev = rows[-2]["lambda1"] - prev["lambda1"]
                d_now = prev["lambda1"] - lam
                row["lambda1_ratio"] = d_prev / d_now if d_now else math.nan
        rows.append(row)
        prev = row
    return rows


def cfl_convergence(cfg: RunConfig) -> list[dict]:
    """(Fp) residual ``J(t_end) - J0 - dissipation`` for each cfl in the config."""
    grid, op = setup(cfg)
    eig = smallest_eigenvalue(op, cfg.eigen_tol) if cfg.solver.initial.kind == "eigenfield" else None
    u0 = initial_data(cfg, grid, op, eig)
    rows = []
    for cfl in cfg.convergence_cfl:
        solver = replace(cfg.solver, cfl=cfl)
        trace = Trace(op, cfg.source, cfg.ell, cfg.theta, SIMULATE_ONLY)
        result = run(grid, op, solver, u0, trace)
        res = fp_residual(trace)
        ratio = rows[-1]["fp_residual"] / res if rows and res else math.nan
        rows.append({"cfl": cfl, "outcome": result.outcome.kind, "t": result.outcome.t, "fp_residual": res, "ratio": ratio})
    return rows
