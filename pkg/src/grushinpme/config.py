"""Run configuration: strict JSON schema, defaults, presets and cross-field checks."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources

import jsonschema

from .diagnostics import SIMULATE_ONLY, Tolerances
from .errors import BadExtent, BadGamma, DomainError, DomainSplit, SchemaError, ValidationError
from .grid import DomainSpec, validate_domain
from .solver import InitialData, SolverConfig
from .source import BLOWUP, DEFAULT_SAMPLES, DEFAULT_U_MAX, GLOBAL, SourceModel
from .spectral import DEFAULT_TOL

MODES = (BLOWUP, GLOBAL, SIMULATE_ONLY)
PRESET_NAMES = ("blowup-p3", "global-linear", "heat-decay", "eigen-gamma-sweep", "convergence-operator")

_number = {"type": "number"}
_pos_int = {"type": "integer", "minimum": 1}


def _obj(properties, required=()):
    return {"type": "object", "properties": properties, "required": list(required), "additionalProperties": False}


SCHEMA = _obj(
    {
        "preset": {"enum": list(PRESET_NAMES)},
        "mode": {"enum": list(MODES)},
        "domain": _obj(
            {
                "m": _pos_int,
                "k": _pos_int,
                "gamma": _number,
                "extents": {"type": "array", "items": {"type": "array", "items": _number, "minItems": 2, "maxItems": 2}},
                "nodes": {"type": "array", "items": _pos_int},
            },
            required=("m", "k", "gamma", "extents", "nodes"),
        ),
        "source": _obj(
            {"terms": {"type": "array", "items": _obj({"C": _number, "p": _number}, required=("C", "p"))}},
            required=("terms",),
        ),
        "params": _obj(
            {"ell": _number, "alpha": _number, "beta": {"anyOf": [_number, {"const": "auto"}]}, "theta": _number},
            required=("ell",),
        ),
        "solver": _obj(
            {
                "t_end": _number,
                "cfl": _number,
                "u_blow": _number,
                "dt_min": _number,
                "sample_every": _pos_int,
                "initial": _obj(
                    {
                        "kind": {"enum": ["eigenfield", "bump", "file"]},
                        "scale": {"anyOf": [_number, {"const": "auto"}]},
                        "headroom": _number,
                        "path": {"type": "string"},
                    },
                    required=("kind",),
                ),
            }
        ),
        "eigen": _obj({"tol": _number, "poincare_trials": {"type": "integer", "minimum": 0}}),
        "conditions": _obj({"u_max": _number, "samples": {"type": "integer", "minimum": 2}}),
        "tolerances": _obj(
            {
                "J_rel": _number,
                "C_rel": _number,
                "mass_rel": _number,
                "final_mass_rel": _number,
                "blowup_margin": _number,
                "warmup": {"type": "integer", "minimum": 3},
            }
        ),
        "sweep": _obj({"gamma": {"type": "array", "items": _number, "minItems": 1}}),
        "convergence": _obj(
            {
                "nodes": {"type": "array", "items": _pos_int, "minItems": 2},
                "cfl": {"type": "array", "items": _number},
            }
        ),
        "seed": {"type": "integer"},
        "output": {"type": "string"},
    }
)



def _without_required(schema):
    if isinstance(schema, dict):
        return {k: _without_required(v) for k, v in schema.items() if k != "required"}
    if isinstance(schema, list):
        return [_without_required(v) for v in schema]
    return schema


# a document that names a preset may override only part of a section
PARTIAL_SCHEMA = _without_required(SCHEMA)

DEFAULTS = {
    "mode": SIMULATE_ONLY,
    "source": {"terms": []},
    "params": {"ell": 1.0},
    "solver": {"t_end": 1.0, "cfl": 0.5, "u_blow": 1e8, "dt_min": 1e-14, "sample_every": 1, "initial": {"kind": "bump", "scale": 1.0}},
    "eigen": {"tol": DEFAULT_TOL, "poincare_trials": 100},
    "conditions": {"u_max": DEFAULT_U_MAX, "samples": DEFAULT_SAMPLES},
    "tolerances": {},
    "seed": 0,
    "output": "out",
}


@dataclass(frozen=True)
class RunConfig:
    mode: str
    domain: DomainSpec
    source: SourceModel
    ell: float
    alpha: float
    beta: float | str  # "auto": largest admissible value, fixed once lambda1 is known
    theta: float
    solver: SolverConfig
    eigen_tol: float
    poincare_trials: int
    u_max: float
    samples: int
    tolerances: Tolerances
    seed: int
    output: str
    sweep_gamma: tuple[float, ...] = ()
    convergence_nodes: tuple[int, ...] = ()
    convergence_cfl: tuple[float, ...] = ()
    document: dict = field(default_factory=dict, compare=False, repr=False)


def preset_document(name: str) -> dict:
    if name not in PRESET_NAMES:
        raise SchemaError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}", "preset")
    text = resources.files("grushinpme").joinpath("presets", f"{name}.json").read_text()
    return json.loads(text)


def preset_text(name: str) -> str:
    preset_document(name)
    return resources.files("grushinpme").joinpath("presets", f"{name}.json").read_text()


def presets() -> dict[str, dict]:
    return {name: preset_document(name) for name in PRESET_NAMES}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _schema_check(doc, where="", schema=SCHEMA):
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = ".".join(str(p) for p in err.absolute_path)
        if err.validator == "additionalProperties":
            unknown = sorted(set(err.instance) - set(err.schema.get("properties", {})))
            path = ".".join(filter(None, [path, unknown[0] if unknown else ""]))
            raise SchemaError(f"unknown key{where}", path)
        raise SchemaError(err.message + where, path)


def parse_config(document) -> RunConfig:
    """Validate ``document`` (a dict or JSON text) and return a :class:`RunConfig` with defaults filled."""
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"not valid JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise SchemaError("configuration must be a JSON object")
    _schema_check(document, schema=PARTIAL_SCHEMA if "preset" in document else SCHEMA)
    doc = copy.deepcopy(document)
    if "preset" in doc:
        doc = _merge(preset_document(doc.pop("preset")), doc)
    doc = _merge(DEFAULTS, doc)
    _schema_check(doc, " (after preset expansion)")
    if "domain" not in doc:
        raise SchemaError("missing required key", "domain")
    return _build(doc)


def _build(doc: dict) -> RunConfig:
    mode = doc["mode"]
    d = doc["domain"]
    domain = DomainSpec(d["m"], d["k"], d["gamma"], [tuple(e) for e in d["extents"]], d["nodes"])
    try:
        validate_domain(domain)
    except DomainError as exc:
        key = {BadGamma: "gamma", BadExtent: "extents", DomainSplit: "extents"}.get(type(exc), "")
        raise ValidationError(str(exc), "domain" + (f".{key}" if key else "")) from exc

    terms = []
    for i, t in enumerate(doc["source"]["terms"]):
        if not t["C"] > 0:
            raise ValidationError(f"coefficient must be positive, got {t['C']}", f"source.terms.{i}.C")
        if not t["p"] >= 1:
            raise ValidationError(f"exponent must be >= 1, got {t['p']}", f"source.terms.{i}.p")
        terms.append((t["C"], t["p"]))
    source = SourceModel(tuple(terms))

    p = doc["params"]
    ell = float(p["ell"])
    if not ell >= 1:
        raise ValidationError(f"ell must be >= 1, got {ell}", "params.ell")
    if mode in (BLOWUP, GLOBAL):
        for key in ("alpha", "beta", "theta"):
            if key not in p:
                raise ValidationError(f"required in {mode} mode", f"params.{key}")
        if not source.terms:
            raise ValidationError(f"{mode} mode needs a nonzero source", "source.terms")
    alpha = float(p.get("alpha", 0.0))
    beta = p.get("beta", 0.0)
    theta = float(p.get("theta", 0.0))
    if mode == BLOWUP:
        if not alpha > ell + 1:
            raise ValidationError(f"blow-up mode requires alpha > ell + 1 = {ell + 1:g}, got {alpha:g}", "params.alpha")
        if not theta > 0:
            raise ValidationError(f"blow-up mode requires theta > 0, got {theta:g}", "params.theta")
        if beta != "auto" and not beta > 0:
            raise ValidationError(f"blow-up mode requires beta > 0, got {beta:g}", "params.beta")
    elif mode == GLOBAL:
        if not alpha <= 0:
            raise ValidationError(f"global mode requires alpha <= 0, got {alpha:g}", "params.alpha")
        if not theta >= 0:
            raise ValidationError(f"global mode requires theta >= 0, got {theta:g}", "params.theta")
        if beta == "auto":
            raise ValidationError("'auto' is only available in blow-up mode", "params.beta")
    if beta != "auto":
        beta = float(beta)

    s = doc["solver"]
    ini = s["initial"]
    scale = ini.get("scale", 1.0)
    initial = InitialData(ini["kind"], scale, float(ini.get("headroom", 1.1)), ini.get("path"))
    if scale == "auto" and not (mode == BLOWUP and initial.kind == "eigenfield"):
        raise ValidationError("'auto' scale needs blow-up mode and eigenfield initial data", "solver.initial.scale")
    if scale != "auto" and not scale >= 0:
        raise ValidationError(f"scale must be nonnegative, got {scale}", "solver.initial.scale")
    if not initial.headroom > 1:
        raise ValidationError(f"headroom must exceed 1, got {initial.headroom}", "solver.initial.headroom")
    if initial.kind == "file" and not initial.path:
        raise ValidationError("file initial data needs a path", "solver.initial.path")
    solver = SolverConfig(
        ell=ell,
        source=source,
        t_end=float(s["t_end"]),
        cfl=float(s["cfl"]),
        u_blow=float(s["u_blow"]),
        dt_min=float(s["dt_min"]),
        sample_every=int(s["sample_every"]),
        initial=initial,
    )

    eig = doc["eigen"]
    if not 0 < eig["tol"] < 1:
        raise ValidationError(f"tol must lie in (0, 1), got {eig['tol']}", "eigen.tol")
    cond = doc["conditions"]
    if not cond["u_max"] > 0:
        raise ValidationError(f"u_max must be positive, got {cond['u_max']}", "conditions.u_max")
    tol = Tolerances(**doc["tolerances"])
    for key, val in doc["tolerances"].items():
        if not val >= 0:
            raise ValidationError(f"must be nonnegative, got {val}", f"tolerances.{key}")
    for g in doc.get("sweep", {}).get("gamma", []):
        if not g >= 0:
            raise ValidationError(f"gamma must be >= 0, got {g}", "sweep.gamma")
    conv = doc.get("convergence", {})
    for c in conv.get("cfl", []):
        if not 0 < c <= 1:
            raise ValidationError(f"cfl must lie in (0, 1], got {c}", "convergence.cfl")

    return RunConfig(
        mode=mode,
        domain=domain,
        source=source,
        ell=ell,
        alpha=alpha,
        beta=beta,
        theta=theta,
        solver=solver,
        eigen_tol=float(eig["tol"]),
        poincare_trials=int(eig["poincare_trials"]),
        u_max=float(cond["u_max"]),
        samples=int(cond["samples"]),
        tolerances=tol,
        seed=int(doc["seed"]),
        output=doc["output"],
        sweep_gamma=tuple(float(g) for g in doc.get("sweep", {}).get("gamma", [])),
        convergence_nodes=tuple(conv.get("nodes", [])),
        convergence_cfl=tuple(float(c) for c in conv.get("cfl", [])),
        document=doc,
    )
