"""Power-sum nonlinearities, the antiderivative functional and the hypothesis checks.

``f(u) = sum C_i u^p_i`` for ``u >= 0`` (zero for ``u <= 0``) and

    F(u) = 2 ell / (ell + 1) * int_0^u s^(ell - 1) f(s) ds
         = 2 ell / (ell + 1) * sum C_i u^(p_i + ell) / (p_i + ell).

The blow-up and global conditions compare ``alpha F(u)`` against
``u^ell f(u) + beta u^(2 ell) + alpha theta``. Their difference is itself a
power sum, so it is tabulated once with exact rational coefficients: that
removes cancellation in the sampled verdict and makes the tail verdict (sign
of the leading nonzero coefficient) exact for the given float inputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import NonPositiveJ0, NonPositiveSigma, ParamViolation

BLOWUP = "blow-up"
GLOBAL = "global"

DEFAULT_U_MAX = 1e6
DEFAULT_SAMPLES = 400
# left end of the log-spaced sample grid, relative to u_max
SAMPLE_FLOOR = 1e-12


@dataclass(frozen=True)
class SourceModel:
    terms: tuple[tuple[float, float], ...]

    def __post_init__(self):
        terms = tuple((float(c), float(p)) for c, p in self.terms)
        for c, p in terms:
            if not (math.isfinite(c) and c > 0):
                raise ValueError(f"source coefficient must be positive, got {c}")
            if not (math.isfinite(p) and p >= 1):
                raise ValueError(f"source exponent must be >= 1, got {p}")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def power(cls, p: float, c: float = 1.0) -> "SourceModel":
        return cls(((c, p),))

    @property
    def top_power(self) -> float | None:
        return max((p for _, p in self.terms), default=None)


def f_eval(src: SourceModel, u):
    up = np.maximum(u, 0.0)
    out = np.zeros_like(up, dtype=float)
    for c, p in src.terms:
        out = out + c * up**p
    return out if np.ndim(out) else float(out)


def F_eval(src: SourceModel, ell: float, u):
    up = np.maximum(u, 0.0)
    out = np.zeros_like(up, dtype=float)
    for c, p in src.terms:
        out = out + c * up ** (p + ell) / (p + ell)
    out = (2.0 * ell / (ell + 1.0)) * out
    return out if np.ndim(out) else float(out)


def lipschitz_bound(src: SourceModel, u_bound: float) -> float:
    """Lipschitz constant of ``f`` on ``[0, u_bound]``."""
    return float(sum(c * p * u_bound ** (p - 1.0) for c, p in src.terms))


@dataclass(frozen=True)
class ConcavityParams:
    ell: float
    alpha: float
    beta: float
    theta: float


def beta_bound(lambda1: float, ell: float, alpha: float) -> float:
    """``lambda1 (alpha - ell - 1) / (ell + 1)``: upper limit for beta in blow-up mode, lower in global mode."""
    return lambda1 * (alpha - ell - 1.0) / (ell + 1.0)


def check_params(params: ConcavityParams, lambda1: float, mode: str) -> None:
    ell, alpha, beta, theta = params.ell, params.alpha, params.beta, params.theta
    if ell < 1:
        raise ParamViolation(f"ell must be >= 1, got {ell}")
    bound = beta_bound(lambda1, ell, alpha)
    if mode == BLOWUP:
        if not alpha > ell + 1:
            raise ParamViolation(f"blow-up mode requires alpha > ell + 1 = {ell + 1}, got {alpha}")
        if not theta > 0:
            raise ParamViolation(f"blow-up mode requires theta > 0, got {theta}")
        if not 0 < beta <= bound:
            raise ParamViolation(f"blow-up mode requires 0 < beta <= lambda1 (alpha - ell - 1)/(ell + 1) = {bound!r}, got {beta!r}")
    elif mode == GLOBAL:
        if not alpha <= 0:
            raise ParamViolation(f"global mode requires alpha <= 0, got {alpha}")
        if not theta >= 0:
            raise ParamViolation(f"global mode requires theta >= 0, got {theta}")
        if not beta >= bound:
            raise ParamViolation(f"global mode requires beta >= lambda1 (alpha - ell - 1)/(ell + 1) = {bound!r}, got {beta!r}")
    else:
        raise ValueError(f"unknown mode {mode!r}")


def condition_terms(src: SourceModel, params: ConcavityParams) -> dict[Fraction, Fraction]:
    """Exponent -> coefficient of ``g(u) = alpha F(u) - u^ell f(u) - beta u^(2 ell) - alpha theta``."""
    ell = Fraction(params.ell)
    alpha = Fraction(params.alpha)
    terms: dict[Fraction, Fraction] = {}

    def add(power, coef):
        terms[power] = terms.get(power, Fraction(0)) + coef

    for c, p in src.terms:
        c, p = Fraction(c), Fraction(p)
        add(p + ell, c * (2 * ell * alpha / ((ell + 1) * (p + ell)) - 1))
    add(2 * ell, -Fraction(params.beta))
    add(Fraction(0), -alpha * Fraction(params.theta))
    return terms


def condition_margin(src: SourceModel, params: ConcavityParams, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    g = np.zeros_like(u)
    for power, coef in sorted(condition_terms(src, params).items()):
        if coef != 0:
            g = g + float(coef) * u ** float(power)
    return g


@dataclass(frozen=True)
class ConditionReport:
    mode: str
    holds: bool
    holds_asymptotically: bool
    worst_margin: float
    worst_u: float
    samples: int
    u_max: float
    dominant_power: float
    dominant_coefficient: float

    def as_dict(self) -> dict:
        return {
            "mode": self.mode,
            "holds": self.holds,
            "holds_asymptotically": self.holds_asymptotically,
            "worst_margin": self.worst_margin,
            "worst_u": self.worst_u,
            "samples": self.samples,
            "u_max": self.u_max,
            "dominant_power": self.dominant_power,
            "dominant_coefficient": self.dominant_coefficient,
        }


def _check_condition(src, params, lambda1, u_max, n, mode) -> ConditionReport:
    check_params(params, lambda1, mode)
    if not u_max > 0 or n < 2:
        raise ValueError(f"need u_max > 0 and n >= 2, got u_max={u_max}, n={n}")
    u = np.geomspace(u_max * SAMPLE_FLOOR, u_max, n)
    g = condition_margin(src, params, u)
    idx = int(np.argmax(g)) if mode == BLOWUP else int(np.argmin(g))

    nonzero = [(pw, c) for pw, c in condition_terms(src, params).items() if c != 0]
    lead_power, lead_coef = max(nonzero, default=(Fraction(0), Fraction(0)))
    tail_ok = lead_coef <= 0 if mode == BLOWUP else lead_coef >= 0
    holds = bool(g[idx] <= 0) if mode == BLOWUP else bool(g[idx] >= 0)
    return ConditionReport(
        mode=mode,
        holds=holds,
        holds_asymptotically=bool(tail_ok),
        worst_margin=float(g[idx]),
        worst_u=float(u[idx]),
        samples=n,
        u_max=float(u_max),
        dominant_power=float(lead_power),
        dominant_coefficient=float(lead_coef),
    )


def check_blowup_condition(
    src: SourceModel, params: ConcavityParams, lambda1: float, u_max: float = DEFAULT_U_MAX, n: int = DEFAULT_SAMPLES
) -> ConditionReport:
    """Sample ``alpha F <= u^ell f + beta u^(2 ell) + alpha theta`` on ``(0, u_max]``."""
    return _check_condition(src, params, lambda1, u_max, n, BLOWUP)


def check_global_condition(
    src: SourceModel, params: ConcavityParams, lambda1: float, u_max: float = DEFAULT_U_MAX, n: int = DEFAULT_SAMPLES
) -> ConditionReport:
    """Sample ``alpha F >= u^ell f + beta u^(2 ell) + alpha theta`` on ``(0, u_max]``."""
    return _check_condition(src, params, lambda1, u_max, n, GLOBAL)


def admissible_alpha_window(ell: float, powers: Sequence[float]) -> tuple[float, float]:
    """Open-closed interval ``(ell + 1, (ell + 1)(p* + ell) / (2 ell)]`` of blow-up alphas with a nonpositive tail."""
    p_star = max(powers)
    return ell + 1.0, (ell + 1.0) * (p_star + ell) / (2.0 * ell)


@dataclass(frozen=True)
class ConcavityConstants:
    sigma: float
    M: float
    Tstar_bound: float
    J0: float
    mass0: float

    def as_dict(self) -> dict:
        return {"sigma": self.sigma, "M": self.M, "Tstar_bound": self.Tstar_bound, "J0": self.J0, "mass0": self.mass0}


def sigma_of(ell: float, alpha: float) -> float:
    return math.sqrt(2.0 * ell * alpha) / (ell + 1.0) - 1.0


def concavity_constants(params: ConcavityParams, J0: float, mass0: float) -> ConcavityConstants:
    ell, alpha = params.ell, params.alpha
    if not J0 > 0:
        raise NonPositiveJ0(f"J0 = {J0!r} is not positive; blow-up cannot be certified")
    if not mass0 > 0:
        raise ValueError(f"initial mass must be positive, got {mass0}")
    if not 2.0 * ell * alpha > (ell + 1.0) ** 2:
        raise NonPositiveSigma(f"sigma <= 0 for ell={ell}, alpha={alpha}")
    sigma = sigma_of(ell, alpha)
    # the same delta = sigma is used in the Cauchy-Schwarz split
    M = (1.0 + sigma) * (1.0 + 1.0 / sigma) * mass0**2 / (alpha * (ell + 1.0) * J0)
    return ConcavityConstants(sigma, M, M / (sigma * mass0), J0, mass0)
