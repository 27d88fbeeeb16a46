"""Experiment configuration: JSON schema, defaults and validation."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from .affine_ifs import validate_expansive
from .errors import ParseError, ValidationError
from .hadamard_spectrum import UNITARITY_TOL, HadamardTriple, make_triple

DEFAULTS: dict[str, Any] = {
    "tau": 1,
    "seed": 0,
    "anchor": "center",
    "output": "out",
    "kernel_points": 100,
    "depths": {
        "quadrature": 12,
        "orbit": 100_000,
        "kernel": 6,
        "truncation": 40,
        "spectrum": 3,
        "ortho": 2,
        "growth": 10_000,
    },
    "tolerances": {
        "unitarity": UNITARITY_TOL,
        "kernel": 1e-9,
        "agreement": 0.01,
        "clip_eps": 1e-300,
    },
    "tail": {
        "alphas": [10.0, 100.0, 1000.0, 10000.0],
        "samples": 10_000,
        "alpha_ref": 1000.0,
        "n_max": None,
        "digit": None,
        "atoms": None,
    },
    "doubling": {"depth": 10, "centers": 32, "radii": None},
    "assumptions": {"doubling": True, "complete_spectrum": True},
}
REQUIRED = ("R", "B", "L")
TOP_LEVEL = set(DEFAULTS) | set(REQUIRED) | {"d"}


@dataclass
class ExperimentConfig:
    d: int
    R: list
    B: list
    L: list
    tau: int
    seed: int
    anchor: str
    output: str
    kernel_points: int
    depths: dict
    tolerances: dict
    tail: dict
    doubling: dict
    assumptions: dict
    triple: HadamardTriple = field(repr=False, compare=False, default=None)

    def echo(self) -> dict:
        """Effective configuration with every default filled in."""
        return {f.name: copy.deepcopy(getattr(self, f.name)) for f in fields(self) if f.name != "triple"}


def _merge(section: str, given: Any) -> dict:
    base = copy.deepcopy(DEFAULTS[section])
    if given is None:
        return base
    if not isinstance(given, dict):
        raise ValidationError(f"'{section}' must be an object")
    unknown = set(given) - set(base)
    if unknown:
        raise ValidationError(f"unknown keys in '{section}': {sorted(unknown)}")
    base.update(given)
    return base


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ValidationError("config must be a JSON object")
    unknown = set(raw) - TOP_LEVEL
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    missing = [k for k in REQUIRED if k not in raw]
    if missing:
        raise ValidationError(f"missing required keys: {missing}")

    R = validate_expansive(raw["R"])
    d = raw.get("d", R.dim)
    if d != R.dim:
        raise ValidationError(f"d = {d} but R is {R.dim}x{R.dim}")
    values = {k: copy.deepcopy(raw.get(k, DEFAULTS[k])) for k in ("tau", "seed", "anchor", "output", "kernel_points")}
    sections = {k: _merge(k, raw.get(k)) for k in ("depths", "tolerances", "tail", "doubling", "assumptions")}
    if values["anchor"] not in ("corner", "center"):
        raise ValidationError(f"anchor must be 'corner' or 'center', got {values['anchor']!r}")
    if not isinstance(values["seed"], int) or isinstance(values["seed"], bool):
        raise ValidationError("seed must be an integer")

    triple = make_triple(R, raw["B"], raw["L"], values["tau"], tol=sections["tolerances"]["unitarity"])
    return ExperimentConfig(
        d=d,
        R=[list(r) for r in R.entries],
        B=[list(b) for b in triple.B.digits],
        L=[list(l) for l in triple.L],
        triple=triple,
        **values,
        **sections,
    )


def parse_config(path) -> ExperimentConfig:
    """Read a UTF-8 JSON config, fill defaults and validate the triple."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None
    return config_from_dict(raw)
