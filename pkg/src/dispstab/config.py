"""Scenario files: flat ``key = <JSON value>`` lines validated by a JSON Schema.

Example::

    # classical KdV soliton
    name = "kdv_classical"
    model = "KDV"
    symbol = "quadratic"
    nonlinearity = "classical"
    speed = 1.0
    stages = ["solve", "spectrum", "criterion"]

Blank lines and lines starting with ``#`` are ignored.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema

from .errors import ConfigError
from .operators import DispersionSpec, Grid, ModelKind, Nonlinearity, make_symbol

ALL_STAGES = ("solve", "spectrum", "criterion", "growing_mode", "moving_kernel", "evolve", "direction")

DEFAULTS = {
    "symbol": "quadratic",
    "symbol_params": {},
    "nonlinearity": "classical",
    "half_length": 80.0,
    "n_points": 512,
    "tolerance": 1e-9,
    "max_iters": 2000,
    "kernel_tol": None,
    "dp_rel_step": 1e-2,
    "dp_noise_rel": 1e-4,
    "stages": list(ALL_STAGES[:6]),
    "n_speeds": 11,
    "lambda_max": None,
    "lambda_points": 40,
    "fit_window": [1e-3, 1e-2],
    "fit_points": 12,
    "evolve_amplitude": 1e-6,
    "evolve_t_final": 40.0,
    "evolve_dt": None,
    "rate_rel_tol": 0.05,
    "seed": 0,
    "direction_n_values": None,
}


def load_schema(name: str = "config") -> dict:
    text = resources.files("dispstab").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; values are JSON."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value'", key or None)
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}", key)
        try:
            out[key] = json.loads(value.strip())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"line {lineno}: value of {key!r} is not valid JSON ({exc.msg})", key) from None
    return out


def _offending_key(err: jsonschema.ValidationError) -> str | None:
    if err.path:
        return str(err.path[0])
    if err.validator == "required":
        return err.message.split("'")[1]
    if err.validator == "additionalProperties":
        extra = set(err.instance) - set(err.schema.get("properties", {}))
        return sorted(extra)[0] if extra else None
    return None


def validate_config(raw: dict) -> dict:
    """Validate against the shipped schema and fill in defaults."""
    validator = jsonschema.Draft202012Validator(load_schema("config"))
    errors = sorted(validator.iter_errors(raw), key=lambda e: (list(map(str, e.path)), e.message))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        key = _offending_key(err)
        raise ConfigError(f"{key or '<root>'}: {err.message}", key)
    cfg = {**DEFAULTS, **raw}
    cfg["model"] = cfg["model"].upper()
    if "speed" not in cfg and "speed_range" not in cfg:
        raise ConfigError("either 'speed' or 'speed_range' is required", "speed")
    return cfg


def load_config(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    cfg = validate_config(parse_config_text(text))
    cfg.setdefault("name", path.stem)
    return cfg


def bundled_scenarios() -> list[str]:
    root = resources.files("dispstab").joinpath("scenarios")
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".cfg"))


def bundled_path(name: str) -> Path:
    if not name.endswith(".cfg"):
        name += ".cfg"
    return Path(str(resources.files("dispstab").joinpath("scenarios", name)))


# ---------------------------------------------------------------------------
# scenario objects
# ---------------------------------------------------------------------------


@dataclass
class Scenario:
    config: dict
    model: ModelKind
    spec: DispersionSpec
    nl: Nonlinearity
    grid: Grid
    stages: list = field(default_factory=list)

    @property
    def name(self) -> str:
        return self.config.get("name", "scenario")

    @property
    def speed(self) -> float:
        if "speed" in self.config:
            return float(self.config["speed"])
        lo, hi = self.config["speed_range"]
        return 0.5 * (lo + hi)


def _build_nonlinearity(value) -> Nonlinearity:
    if value == "classical":
        return Nonlinearity.classical()
    if "power" in value:
        return Nonlinearity.power(int(value["power"]), float(value.get("coeff", 1.0)))
    return Nonlinearity.polynomial({int(k): float(v) for k, v in value["polynomial"].items()})


def build_scenario(cfg: dict) -> Scenario:
    """Turn a validated config into model objects; bad parameter values are config errors."""
    try:
        spec = make_symbol(cfg["symbol"], **cfg["symbol_params"])
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"symbol_params: {exc}", "symbol_params") from None
    try:
        nl = _build_nonlinearity(cfg["nonlinearity"])
    except ValueError as exc:
        raise ConfigError(f"nonlinearity: {exc}", "nonlinearity") from None
    try:
        grid = Grid(float(cfg["half_length"]), int(cfg["n_points"]))
    except ValueError as exc:
        key = "n_points" if "n_points" in str(exc) or "power" in str(exc) else "half_length"
        raise ConfigError(f"{key}: {exc}", key) from None
    return Scenario(cfg, ModelKind.parse(cfg["model"]), spec, nl, grid, list(cfg["stages"]))
