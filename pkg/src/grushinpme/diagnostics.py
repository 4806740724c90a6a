"""Energy functionals along a run, the trace, and certificates.

Quantities recorded per sample (all integrals use interior-node quadrature):

    mass          int u^(ell+1)                  (= E'(t))
    grad_energy_l int |grad_gamma u^ell|^2
    J             -grad_energy_l / (ell+1) + int (F(u) - theta)
    E             int_0^t mass dtau (+ M in blow-up mode)
    dissipation   2 ell/(ell+1) int_0^t int u^(ell-1) u_tau^2   (J - J0 should track it)

The concavity defect ``E'' E - (1 + sigma) E'^2`` needs a second difference of
E, so it is written onto the middle row of each consecutive triple of samples
(first and last rows stay unset).
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import IncompatibleTrace, NonFinite
from .grid import integrate
from .operator import SparseOperator, grad_energy
from .solver import BLOWUP_DETECTED, REACHED_HORIZON, STEP_UNDERFLOW, Outcome, SolverState
from .source import BLOWUP, GLOBAL, ConcavityConstants, ConditionReport, F_eval, SourceModel, f_eval

SIMULATE_ONLY = "simulate-only"

TRACE_COLUMNS = (
    "t",
    "dt",
    "mass",
    "grad_energy_l",
    "J",
    "E",
    "E_prime",
    "dissipation",
    "max_u",
    "concavity_defect",
)

PASS = "pass"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"


def compute_J(u: np.ndarray, op: SparseOperator, src: SourceModel, ell: float, theta: float) -> float:
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise NonFinite("J requested for a non-finite field")
    return -grad_energy(op, u**ell) / (ell + 1.0) + integrate(op.grid, F_eval(src, ell, u) - theta)


def compute_mass(grid, u: np.ndarray, ell: float) -> float:
    return integrate(grid, np.asarray(u, dtype=float) ** (ell + 1.0))


@dataclass
class TraceRow:
    t: float
    dt: float
    mass: float
    grad_energy_l: float
    J: float
    E: float
    E_prime: float
    dissipation: float
    max_u: float
    concavity_defect: float | None = None
    # dE'/dt - alpha (ell + 1) J with the scheme's exact instantaneous dE'/dt
    jbound_defect: float | None = None


class Trace:
    """Sequence of :class:`TraceRow`, filled by :func:`grushinpme.solver.run`."""

    def __init__(
        self,
        op: SparseOperator,
        source: SourceModel,
        ell: float,
        theta: float = 0.0,
        mode: str = SIMULATE_ONLY,
        constants: ConcavityConstants | None = None,
        alpha: float | None = None,
    ):
        if mode == BLOWUP and (constants is None or alpha is None):
            raise IncompatibleTrace("a blow-up trace needs concavity constants and alpha")
        self.op = op
        self.source = source
        self.ell = ell
        self.theta = theta
        self.mode = mode
        self.constants = constants
        self.alpha = alpha
        self.rows: list[TraceRow] = []

    def __len__(self):
        return len(self.rows)

    def append(self, state: SolverState) -> TraceRow:
        return append_row(self, state)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_COLUMNS)
            for row in self.rows:
                w.writerow(["" if (v := getattr(row, c)) is None else f"{v:.17g}" for c in TRACE_COLUMNS])


def append_row(trace: Trace, state: SolverState) -> TraceRow:
    op, ell = trace.op, trace.ell
    grid = op.grid
    u = state.u
    w = u**ell
    aw = op.matrix @ w
    mass = compute_mass(grid, u, ell)
    ge = -grid.cell_volume * float(np.dot(w, aw))
    J = -ge / (ell + 1.0) + integrate(grid, F_eval(trace.source, ell, u) - trace.theta)
    E = state.time_mass_integral
    if trace.mode == BLOWUP:
        E += trace.constants.M
    row = TraceRow(
        t=state.t,
        dt=state.dt,
        mass=mass,
        grad_energy_l=ge,
        J=J,
        E=E,
        E_prime=mass,
        dissipation=state.dissipation_integral,
        max_u=float(np.max(u)),
    )
    if trace.mode == BLOWUP:
        # instantaneous d(mass)/dt of the semi-discrete flow
        e2 = (ell + 1.0) * grid.cell_volume * float(np.dot(w, aw + f_eval(trace.source, u)))
        row.jbound_defect = e2 - trace.alpha * (ell + 1.0) * J
    trace.rows.append(row)
    if trace.mode == BLOWUP and len(trace.rows) >= 3:
        _fill_concavity(trace, *trace.rows[-3:])
    return row


def _fill_concavity(trace: Trace, prev: TraceRow, mid: TraceRow, nxt: TraceRow) -> None:
    h1 = mid.t - prev.t
    h2 = nxt.t - mid.t
    if h1 <= 0 or h2 <= 0:
        return
    e2 = 2.0 * ((nxt.E - mid.E) / h2 - (mid.E - prev.E) / h1) / (h1 + h2)
    mid.concavity_defect = e2 * mid.E - (1.0 + trace.constants.sigma) * mid.E_prime**2


# --- certification --------------------------------------------------------


@dataclass(frozen=True)
class Tolerances:
    J_rel: float = 1e-6
    C_rel: float = 1e-6
    mass_rel: float = 1e-10
    final_mass_rel: float = 1e-6
    blowup_margin: float = 0.1
    warmup: int = 3
    floor: float = 1e-12


@dataclass
class Check:
    name: str
    passed: bool | None  # None: could not be evaluated
    margin: float | None = None
    tolerance: float | None = None
    detail: str = ""


@dataclass
class HypothesisReport:
    """Everything decided before the run: parameter constraints, condition, J0."""

    mode: str
    lambda1: float
    params_ok: bool
    params_message: str
    condition: ConditionReport | None
    J0: float
    J0_required: bool = True

    def checks(self) -> list[Check]:
        out = [Check("parameter_constraints", self.params_ok, detail=self.params_message)]
        if self.condition is None:
            out.append(Check("source_condition", False, detail="not evaluated"))
        else:
            c = self.condition
            out.append(Check("source_condition_sampled", c.holds, c.worst_margin, 0.0, f"worst at u={c.worst_u:.6g}"))
            out.append(
                Check(
                    "source_condition_tail",
                    c.holds_asymptotically,
                    c.dominant_coefficient,
                    0.0,
                    f"leading power {c.dominant_power:g}",
                )
            )
        if self.J0_required:
            out.append(Check("J0_positive", self.J0 > 0, self.J0, 0.0))
        else:
            out.append(Check("J0_positive", True, self.J0, 0.0, "not required: alpha = 0 makes the mass bound independent of J"))
        return out


@dataclass
class Certificate:
    mode: str
    hypothesis_checks: list[Check]
    monitored_checks: list[Check]
    verdict: str
    outcome: str
    t_detect: float
    constants: dict | None = None
    lambda1: float | None = None

    def as_dict(self) -> dict:
        return {
            "mode": self.mode,
            "verdict": self.verdict,
            "outcome": self.outcome,
            "t_detect": self.t_detect,
            "lambda1": self.lambda1,
            "constants": self.constants,
            "hypothesis_checks": [asdict(c) for c in self.hypothesis_checks],
            "monitored_checks": [asdict(c) for c in self.monitored_checks],
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, allow_nan=True) + "\n"

    def to_text(self) -> str:
        lines = [f"mode={self.mode}", f"verdict={self.verdict}", f"outcome={self.outcome}", f"t_detect={self.t_detect:.17g}"]
        if self.lambda1 is not None:
            lines.append(f"lambda1={self.lambda1:.17g}")
        for key, val in (self.constants or {}).items():
            lines.append(f"{key}={val:.17g}")
        for group, checks in (("hypothesis", self.hypothesis_checks), ("monitored", self.monitored_checks)):
            for c in checks:
                status = "n/a" if c.passed is None else ("pass" if c.passed else "fail")
                lines.append(f"{group}.{c.name}={status}")
                if c.margin is not None:
                    lines.append(f"{group}.{c.name}.margin={c.margin:.17g}")
                if c.tolerance is not None:
                    lines.append(f"{group}.{c.name}.tolerance={c.tolerance:.17g}")
                if c.detail:
                    lines.append(f"{group}.{c.name}.detail={c.detail}")
        return "\n".join(lines) + "\n"


def _verdict(checks: list[Check]) -> str:
    if any(c.passed is False for c in checks):
        return FAIL
    if any(c.passed is None for c in checks):
        return INCONCLUSIVE
    return PASS


def _worst(values, default=None):
    return float(np.min(values)) if len(values) else default


def certify(
    trace: Trace,
    mode: str,
    outcome: Outcome,
    hypotheses: HypothesisReport,
    t_end: float,
    tolerances: Tolerances = Tolerances(),
) -> Certificate:
    if trace.mode != mode or hypotheses.mode != mode:
        raise IncompatibleTrace(f"trace mode {trace.mode!r} / hypotheses {hypotheses.mode!r} cannot be certified as {mode!r}")
    if mode == BLOWUP:
        monitored = _blowup_checks(trace, outcome, t_end, tolerances)
    elif mode == GLOBAL:
        monitored = _global_checks(trace, outcome, tolerances)
    else:
        raise IncompatibleTrace(f"cannot certify mode {mode!r}")
    hyp = hypotheses.checks()
    return Certificate(
        mode=mode,
        hypothesis_checks=hyp,
        monitored_checks=monitored,
        verdict=_verdict(hyp + monitored),
        outcome=outcome.kind,
        t_detect=outcome.t,
        constants=trace.constants.as_dict() if trace.constants else None,
        lambda1=hypotheses.lambda1,
    )


def _blowup_checks(trace: Trace, outcome: Outcome, t_end: float, tol: Tolerances) -> list[Check]:
    const = trace.constants
    J = trace.column("J")
    J0 = J[0]
    tol_J = tol.J_rel * max(abs(J0), tol.floor)
    checks = [
        Check("J_nondecreasing", bool(_worst(np.diff(J), 0.0) >= -tol_J), _worst(np.diff(J), 0.0), tol_J),
        Check("J_stays_above_J0", bool(_worst(J - J0, 0.0) >= -tol_J), _worst(J - J0, 0.0), tol_J),
    ]

    # second-difference rows exist only once `warmup` samples are available
    defects = [r.concavity_defect for r in trace.rows if r.concavity_defect is not None]
    jdefects = [r.jbound_defect for r in trace.rows if r.jbound_defect is not None]
    tol_C = tol.C_rel * max((1.0 + const.sigma) * const.mass0**2, tol.floor)
    tol_B = tol.C_rel * max(abs(trace.alpha * (trace.ell + 1.0) * const.J0), tol.floor)
    if len(trace.rows) < tol.warmup or not defects:
        checks.append(Check("concavity_defect", None, detail=f"fewer than {tol.warmup} samples"))
    else:
        checks.append(Check("concavity_defect", bool(min(defects) >= -tol_C), min(defects), tol_C))
    checks.append(Check("second_derivative_bound", bool(min(jdefects) >= -tol_B), min(jdefects), tol_B))

    limit = const.Tstar_bound * (1.0 + tol.blowup_margin)
    if outcome.kind in (BLOWUP_DETECTED, STEP_UNDERFLOW):
        checks.append(
            Check("blowup_time_bound", bool(outcome.t <= limit), limit - outcome.t, tol.blowup_margin, f"t_detect={outcome.t:.6g}, Tstar_bound={const.Tstar_bound:.6g}")
        )
    elif t_end < limit:
        checks.append(Check("blowup_time_bound", None, detail=f"horizon {t_end:.6g} ends before {limit:.6g}"))
    else:
        checks.append(Check("blowup_time_bound", False, limit - outcome.t, tol.blowup_margin, "no blow-up before the horizon"))
    return checks


def _global_checks(trace: Trace, outcome: Outcome, tol: Tolerances) -> list[Check]:
    mass = trace.column("mass")
    mass0 = mass[0]
    tol_m = tol.mass_rel * mass0
    rises = np.diff(mass)
    worst_rise = float(np.max(rises)) if len(rises) else 0.0
    final_limit = mass0 * (1.0 + tol.final_mass_rel)
    return [
        Check("mass_nonincreasing", bool(worst_rise <= tol_m), -worst_rise, tol_m),
        Check("reached_horizon", outcome.kind == REACHED_HORIZON, detail=outcome.kind),
        Check("final_mass_bound", bool(mass[-1] <= final_limit), final_limit - mass[-1], tol.final_mass_rel * mass0),
    ]


def fp_residual(trace: Trace) -> float:
    """``J(t) - J(0) - dissipation(t)`` at the last sample."""
    last, first = trace.rows[-1], trace.rows[0]
    return last.J - first.J - last.dissipation
