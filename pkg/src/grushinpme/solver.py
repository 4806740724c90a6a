"""Explicit, positivity-preserving time stepping for u_t = A (u^ell) + f(u).

The step size obeys

    dt = cfl / (ell * U^(ell-1) * max|A_ii| + L_f(U)),   U = max(max u, 1e-30),

which keeps every diagonal update factor ``1 - dt |A_ii| ell U^(ell-1)``
nonnegative, so ``u >= 0`` is preserved step by step.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import InvalidInitialData, NonFinite, PositivityViolated, ValidationError
from .grid import Grid
from .operator import SparseOperator
from .source import SourceModel, f_eval, lipschitz_bound

U_FLOOR = 1e-30

REACHED_HORIZON = "ReachedHorizon"
BLOWUP_DETECTED = "BlowupDetected"
STEP_UNDERFLOW = "StepUnderflow"


@dataclass(frozen=True)
class InitialData:
    """How to build u0.

    kind is ``"eigenfield"`` (scale * first eigenfunction), ``"bump"``
    (scale * product of sines vanishing on the box faces) or ``"file"``
    (node values read from a field CSV). ``scale="auto"`` is only meaningful
    for the blow-up pipeline, which picks it from the sign change of J.
    """

    kind: str = "bump"
    scale: float | str = 1.0
    headroom: float = 1.1
    path: str | None = None


@dataclass(frozen=True)
class SolverConfig:
    ell: float
    source: SourceModel
    t_end: float
    cfl: float = 0.5
    u_blow: float = 1e8
    dt_min: float = 1e-14
    sample_every: int = 1
    initial: InitialData = field(default_factory=InitialData)

    def __post_init__(self):
        if not self.ell >= 1:
            raise ValidationError(f"ell must be >= 1, got {self.ell}", "params.ell")
        if not self.t_end > 0:
            raise ValidationError(f"t_end must be positive, got {self.t_end}", "solver.t_end")
        if not 0 < self.cfl <= 1:
            raise ValidationError(f"cfl must lie in (0, 1], got {self.cfl}", "solver.cfl")
        if not self.u_blow > 0:
            raise ValidationError(f"u_blow must be positive, got {self.u_blow}", "solver.u_blow")
        if not self.dt_min > 0:
            raise ValidationError(f"dt_min must be positive, got {self.dt_min}", "solver.dt_min")
        if self.sample_every < 1:
            raise ValidationError(f"sample_every must be >= 1, got {self.sample_every}", "solver.sample_every")


@dataclass(frozen=True)
class SolverState:
    t: float
    u: np.ndarray
    step_count: int
    mass: float  # int u^(ell+1) at time t
    time_mass_integral: float
    dissipation_integral: float
    dt: float = 0.0  # size of the step that produced this state


@dataclass(frozen=True)
class Outcome:
    kind: str
    t: float
    step: int


@dataclass
class SimulationResult:
    outcome: Outcome
    final: SolverState
    trace: object  # diagnostics.Trace; typed loosely to avoid an import cycle
    min_dt: float = math.inf


def mass_of(grid: Grid, u: np.ndarray, ell: float) -> float:
    return grid.cell_volume * float(np.sum(u ** (ell + 1.0)))


def initial_state(grid: Grid, u0: np.ndarray, ell: float) -> SolverState:
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != (grid.size,):
        raise InvalidInitialData(f"initial field has shape {u0.shape}, grid has {grid.size} nodes")
    if not np.all(np.isfinite(u0)):
        raise InvalidInitialData("initial field contains NaN or Inf")
    if np.any(u0 < 0):
        raise InvalidInitialData(f"initial field has {int(np.sum(u0 < 0))} negative entries")
    if not np.any(u0 > 0):
        raise InvalidInitialData("initial field is identically zero")
    return SolverState(0.0, u0.copy(), 0, mass_of(grid, u0, ell), 0.0, 0.0)


def stable_dt(u: np.ndarray, op: SparseOperator, config: SolverConfig) -> float:
    big_u = max(float(np.max(u)) if u.size else 0.0, U_FLOOR)
    rate = config.ell * big_u ** (config.ell - 1.0) * op.max_abs_diagonal + lipschitz_bound(config.source, big_u)
    return config.cfl / rate


def adaptive_dt(state: SolverState, op: SparseOperator, config: SolverConfig) -> float:
    return min(stable_dt(state.u, op, config), config.t_end - state.t)


def step(state: SolverState, op: SparseOperator, config: SolverConfig, dt: float) -> SolverState:
    ell = config.ell
    grid = op.grid
    u = state.u
    u_new = u + dt * (op.matrix @ u**ell + f_eval(config.source, u))
    n = state.step_count + 1
    if not np.all(np.isfinite(u_new)):
        raise NonFinite(f"non-finite value at step {n}, t={state.t + dt!r}", step=n)
    if np.min(u_new) < 0:
        raise PositivityViolated(f"negative value {np.min(u_new)!r} at step {n}", step=n)
    mass_new = mass_of(grid, u_new, ell)
    u_tau = (u_new - u) / dt
    dissipation = (2.0 * ell / (ell + 1.0)) * dt * grid.cell_volume * float(np.sum(u ** (ell - 1.0) * u_tau * u_tau))
    return SolverState(
        t=state.t + dt,
        u=u_new,
        step_count=n,
        mass=mass_new,
        time_mass_integral=state.time_mass_integral + 0.5 * dt * (state.mass + mass_new),
        dissipation_integral=state.dissipation_integral + dissipation,
        dt=dt,
    )


def run(grid: Grid, op: SparseOperator, config: SolverConfig, u0: np.ndarray | None = None, trace=None) -> SimulationResult:
    """Step until the horizon, a blow-up detection, or step-size collapse.

    ``trace`` is any object with an ``append(state)`` method; by default a
    :class:`grushinpme.diagnostics.Trace` without blow-up constants is used.
    """
    from .diagnostics import Trace

    if u0 is None:
        u0 = initial_field(grid, config.initial, op)
    if trace is None:
        trace = Trace(op, config.source, config.ell, theta=0.0)
    state = initial_state(grid, u0, config.ell)
    trace.append(state)
    recorded = True
    min_dt = math.inf
    while True:
        if float(np.max(state.u)) >= config.u_blow:
            outcome = Outcome(BLOWUP_DETECTED, state.t, state.step_count)
            break
        remaining = config.t_end - state.t
        if remaining <= 0:
            outcome = Outcome(REACHED_HORIZON, state.t, state.step_count)
            break
        dt = stable_dt(state.u, op, config)
        if dt < config.dt_min:
            outcome = Outcome(STEP_UNDERFLOW, state.t, state.step_count)
            break
        if dt >= remaining:
            state = replace(step(state, op, config, remaining), t=config.t_end)
        else:
            state = step(state, op, config, dt)
        min_dt = min(min_dt, state.dt)
        recorded = state.step_count % config.sample_every == 0
        if recorded:
            trace.append(state)
    if not recorded:
        trace.append(state)
    return SimulationResult(outcome, state, trace, min_dt)


def bump(grid: Grid) -> np.ndarray:
    values = np.ones(grid.size)
    nodes = grid.node_coordinates()
    for d, (a, b) in enumerate(grid.spec.extents):
        values *= np.sin(np.pi * (nodes[:, d] - a) / (b - a))
    return values


def initial_field(grid: Grid, descriptor: InitialData, op: SparseOperator | None = None, eigenfield=None) -> np.ndarray:
    if isinstance(descriptor.scale, str):
        raise InvalidInitialData(f"scale {descriptor.scale!r} must be resolved before building the field")
    if descriptor.kind == "bump":
        return descriptor.scale * bump(grid)
    if descriptor.kind == "eigenfield":
        if eigenfield is None:
            from .operator import assemble
            from .spectral import smallest_eigenvalue

            eigenfield = smallest_eigenvalue(op if op is not None else assemble(grid)).eigenfield
        return descriptor.scale * np.asarray(eigenfield)
    if descriptor.kind == "file":
        return descriptor.scale * read_field_csv(grid, descriptor.path)
    raise InvalidInitialData(f"unknown initial data kind {descriptor.kind!r}")


def field_header(grid: Grid) -> list[str]:
    spec = grid.spec
    return [f"x{i + 1}" for i in range(spec.m)] + [f"y{j + 1}" for j in range(spec.k)] + ["value"]


def write_field_csv(grid: Grid, values: np.ndarray, path) -> None:
    """Node coordinates then value, one interior node per row in flat order."""
    nodes = grid.node_coordinates()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(field_header(grid))
        for coords, val in zip(nodes, values):
            w.writerow([f"{c:.17g}" for c in coords] + [f"{val:.17g}"])


def read_field_csv(grid: Grid, path) -> np.ndarray:
    if path is None:
        raise InvalidInitialData("file initial data needs a path")
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InvalidInitialData(f"cannot read {path}: {exc}") from exc
    if not rows or rows[0] != field_header(grid):
        raise InvalidInitialData(f"{path}: expected header {field_header(grid)}")
    body = rows[1:]
    if len(body) != grid.size:
        raise InvalidInitialData(f"{path}: {len(body)} rows for a grid of {grid.size} nodes")
    data = np.array(body, dtype=float)
    if not np.allclose(data[:, :-1], grid.node_coordinates(), rtol=0, atol=1e-12):
        raise InvalidInitialData(f"{path}: node coordinates do not match the grid")
    return data[:, -1]
