"""Acceptance criteria, one test each.

Every test prints a single ``criterion N PASS|FAIL: ...`` line (visible with
``pytest -s``) before asserting, so the suite doubles as a report.
"""
import math
import time

import numpy as np
import pytest
import scipy.linalg
from scipy.integrate import quad

from grushinpme import pipeline
from grushinpme.cli import EXIT_OK, dispatch
from grushinpme.config import parse_config
from grushinpme.diagnostics import PASS, compute_J
from grushinpme.grid import DomainSpec, build_grid
from grushinpme.operator import assemble
from grushinpme.solver import BLOWUP_DETECTED, REACHED_HORIZON, STEP_UNDERFLOW, initial_state, stable_dt, step
from grushinpme.source import (
    ConcavityParams,
    F_eval,
    SourceModel,
    admissible_alpha_window,
    beta_bound,
    check_blowup_condition,
    f_eval,
)
from grushinpme.spectral import smallest_eigenvalue, verify_poincare

from conftest import grid_and_op, laplacian_eigenvalue
from test_operator import five_point_reference


def report(number, title, ok, detail, elapsed=None, limit=None):
    timing = "" if elapsed is None else f", {elapsed:.2f}s of {limit:g}s"
    ok = bool(ok) and (elapsed is None or elapsed < limit)
    print(f"\ncriterion {number} {'PASS' if ok else 'FAIL'}: {title} ({detail}{timing})")
    assert ok, f"criterion {number}: {detail}{timing}"


def test_criterion_1_operator_reduction():
    t0 = time.perf_counter()
    equal = []
    for nx, ny in [(3, 3), (15, 15), (31, 31), (7, 12)]:
        grid, op = grid_and_op(nx, gamma=0.0, ny=ny)
        equal.append(np.array_equal(op.matrix.toarray(), five_point_reference(nx, ny, *grid.spacings)))
    report(1, "gamma=0 gives the 5-point Laplacian exactly", all(equal), f"{sum(equal)}/{len(equal)} grids identical", time.perf_counter() - t0, 1.0)


def test_criterion_2_eigenvalue_oracle():
    t0 = time.perf_counter()
    rel, errs = [], []
    for n in (15, 31):
        _, op = grid_and_op(n, gamma=0.0)
        lam = smallest_eigenvalue(op).lambda1
        rel.append(abs(lam - laplacian_eigenvalue(1.0 / (n + 1))) / lam)
        errs.append(2 * math.pi**2 - lam)
    ratio = errs[0] / errs[1]
    ok = max(rel) <= 1e-9 and 3.5 <= ratio <= 4.5 and errs[1] > 0
    report(2, "closed-form eigenvalue and O(h^2) approach to 2 pi^2", ok, f"max rel err {max(rel):.2e}, error ratio {ratio:.4f}", time.perf_counter() - t0, 10.0)


def test_criterion_3_degenerate_eigenvalue():
    t0 = time.perf_counter()
    _, op = grid_and_op(31, gamma=1.0)
    lam = smallest_eigenvalue(op).lambda1
    dense = scipy.linalg.eigh(-op.matrix.toarray(), eigvals_only=True, subset_by_index=[0, 0])[0]
    rel = abs(lam - dense) / dense
    poincare = verify_poincare(op, lam, 100, seed=0)  # raises on any violation
    ok = rel <= 1e-8 and poincare.trials == 100 and poincare.margin >= -1e-9
    report(3, "gamma=1 eigenvalue vs dense oracle, Poincare suite", ok, f"rel err {rel:.2e}, 100 trials, min margin {poincare.margin:.3e}", time.perf_counter() - t0, 30.0)


def test_criterion_4_linear_decay():
    t0 = time.perf_counter()
    cfg = parse_config({"preset": "heat-decay"})
    assert cfg.solver.cfl == 0.1 and cfg.ell == 1.0 and not cfg.source.terms
    grid, op = pipeline.setup(cfg)
    eig = smallest_eigenvalue(op, cfg.eigen_tol)
    lam, phi = eig.lambda1, eig.eigenfield
    state = initial_state(grid, phi, 1.0)
    worst = 0.0
    for n in range(1, 1001):
        dt = stable_dt(state.u, op, cfg.solver)
        state = step(state, op, cfg.solver, dt)
        expected = (1.0 - dt * lam) ** n * phi
        worst = max(worst, float(np.max(np.abs(state.u - expected)) / np.max(np.abs(expected))))
    result, _ = pipeline.simulate(cfg)
    t, mass = result.trace.column("t"), result.trace.column("mass")
    rate = -np.polyfit(t, np.log(mass), 1)[0]
    rate_err = abs(rate / (2 * lam) - 1)
    ok = worst <= 1e-10 and rate_err <= 0.01 and result.outcome.step >= 100
    report(4, "linear eigenfield decay", ok, f"recurrence rel err {worst:.2e} over 1000 steps, mass rate {rate:.5f} vs 2 lambda {2 * lam:.5f} ({rate_err:.2%})", time.perf_counter() - t0, 10.0)


def test_criterion_5_F_and_condition_algebra():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(100):
        k = int(rng.integers(1, 4))
        src = SourceModel(tuple(zip(rng.uniform(0.1, 5, k), rng.uniform(1, 6, k))))
        ell, u = rng.uniform(1, 4), rng.uniform(1e-3, 5)
        val, _ = quad(lambda s: s ** (ell - 1) * f_eval(src, s), 0.0, u, epsabs=0, epsrel=1e-13, limit=200)
        exact = 2 * ell / (ell + 1) * val
        worst = max(worst, abs(F_eval(src, ell, u) - exact) / exact)
    lam = smallest_eigenvalue(grid_and_op(31, gamma=1.0)[1]).lambda1
    cube = SourceModel.power(3)

    def verdict(alpha):
        return check_blowup_condition(cube, ConcavityParams(1.0, alpha, beta_bound(lam, 1.0, alpha), 0.01), lam)

    window = admissible_alpha_window(1.0, [3.0])
    at4, past4 = verdict(4.0), verdict(4.01)
    ok = worst <= 1e-10 and window == (2.0, 4.0) and at4.holds and at4.holds_asymptotically and not past4.holds_asymptotically
    report(5, "F vs quadrature and the alpha window for u^3", ok, f"max rel err {worst:.2e}, window {window}, alpha=4 holds={at4.holds_asymptotically}, alpha=4.01 holds={past4.holds_asymptotically}", time.perf_counter() - t0, 5.0)


def test_criterion_6_blowup_certificate():
    t0 = time.perf_counter()
    cfg = parse_config({"preset": "blowup-p3"})
    res = pipeline.certify_run(cfg)
    elapsed = time.perf_counter() - t0
    cert, const = res.certificate, res.constants
    lam = res.eigen.lambda1
    phi = res.eigen.eigenfield
    grid, op = pipeline.setup(cfg)

    # independent recomputation of the constants from their formulas
    sigma = math.sqrt(2.0) - 1.0
    mass0 = grid.cell_volume * float(np.sum(res.u0**2))
    J0 = compute_J(res.u0, op, cfg.source, 1.0, 0.01)
    M = (1 + sigma) * (1 + 1 / sigma) * mass0**2 / (4.0 * 2.0 * J0)
    tstar = M / (sigma * mass0)
    c_root, c = pipeline.blowup_scale(op, cfg.source, 1.0, 0.01, phi, 1.1)
    checks = {ch.name: ch.passed for ch in cert.hypothesis_checks + cert.monitored_checks}
    ok = (
        cert.verdict == PASS
        and all(checks.values())
        and res.params.beta == pytest.approx(lam)
        and abs(compute_J(c_root * phi, op, cfg.source, 1.0, 0.01)) <= 1e-9 * J0
        and np.allclose(res.u0, c * phi, rtol=1e-15, atol=0)
        and J0 > 0
        and const.sigma == pytest.approx(sigma, rel=1e-14)
        and const.Tstar_bound == pytest.approx(tstar, rel=1e-12)
        and cert.outcome in (BLOWUP_DETECTED, STEP_UNDERFLOW)
        and cert.t_detect <= 1.1 * tstar
    )
    report(6, "blow-up certificate for blowup-p3", ok, f"verdict {cert.verdict}, {cert.outcome} at t={cert.t_detect:.6g} vs 1.1 Tstar={1.1 * tstar:.6g}, J0={J0:.6g}", elapsed, 60.0)


@pytest.fixture(scope="module")
def global_run():
    t0 = time.perf_counter()
    res = pipeline.certify_run(parse_config({"preset": "global-linear"}))
    return res, time.perf_counter() - t0


def test_criterion_7_global_certificate(global_run):
    res, elapsed = global_run
    cert = res.certificate
    mass = res.trace.column("mass")
    mass0 = mass[0]
    rises = float(np.max(np.diff(mass)))
    checks = {ch.name: ch.passed for ch in cert.hypothesis_checks + cert.monitored_checks}
    ok = (
        res.eigen.lambda1 > 2.0
        and cert.verdict == PASS
        and all(checks.values())
        and cert.outcome == REACHED_HORIZON
        and res.result.final.t == 5.0
        and float(np.max(mass)) <= mass0 * (1 + 1e-6)
        and rises <= 1e-10 * mass0
    )
    report(7, "global certificate for global-linear", ok, f"lambda1 {res.eigen.lambda1:.6g}, reached t={res.result.final.t:g}, max per-step rise {rises:.3e}, final/initial mass {mass[-1] / mass0:.3e}", elapsed, 60.0)


def test_criterion_8_fp_residual_first_order():
    t0 = time.perf_counter()
    cfg = parse_config({"preset": "global-linear", "convergence": {"cfl": [0.5, 0.25]}})
    rows = pipeline.cfl_convergence(cfg)
    ratio = rows[1]["ratio"]
    ok = all(r["outcome"] == REACHED_HORIZON for r in rows) and 1.7 <= ratio <= 2.3
    report(8, "(Fp) residual halves with cfl", ok, f"residuals {rows[0]['fp_residual']:.4e} -> {rows[1]['fp_residual']:.4e}, ratio {ratio:.4f}", time.perf_counter() - t0, 120.0)


def test_criterion_9_determinism(tmp_path):
    traces = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert dispatch(["certify-blowup", "--preset", "blowup-p3", "--out", str(out)]) == EXIT_OK
        traces.append((out / "trace.csv").read_bytes())
    ok = traces[0] == traces[1] and len(traces[0]) > 0
    lines = len(traces[0].splitlines())
    report(9, "blowup-p3 trace is byte-identical across runs", ok, f"{len(traces[0])} bytes, {lines} lines")
