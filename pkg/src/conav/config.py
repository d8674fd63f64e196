"""Run configuration files: loading, ``--set`` overrides and validation.

A config is a YAML mapping::

    scenario: warehouse          # builder name (required)
    params: {seed: 0, r2: 5.0}   # builder keyword arguments
    theta0: null                 # initial parameters, default: the builder's
    solver: {max_iter: 300}      # IpmOptions fields
    bilevel: {step_size: 400}    # BilevelConfig fields (except solver)
    stochastic: false            # co-optimize over sampled tasks
    heldout: [1000, 1001]        # task seeds scored after a stochastic run
    validate: {h: 1.0e-5, tol: 1.0e-3, systems: 200}
    emit: {csv: true, svg: true, trace: true, report: true}

Unknown keys anywhere are errors, as are builder arguments the builder
does not take and values whose type does not match the default.
"""
from __future__ import annotations

import copy
import dataclasses
import inspect
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .bilevel import BilevelConfig
from .errors import ConfigError
from .scenarios import BUILDERS
from .trajopt import IpmOptions

TOP_KEYS = ("scenario", "params", "theta0", "solver", "bilevel", "stochastic", "heldout", "validate", "emit")
VALIDATE_DEFAULTS = {"h": 1e-5, "tol": 1e-3, "systems": 200, "tamper": False}
EMIT_DEFAULTS = {"csv": True, "svg": True, "trace": True, "report": True}


@dataclass
class RunConfig:
    scenario: str
    params: dict = field(default_factory=dict)
    theta0: Optional[np.ndarray] = None
    solver: IpmOptions = field(default_factory=IpmOptions)
    bilevel: BilevelConfig = field(default_factory=BilevelConfig)
    stochastic: bool = False
    heldout: tuple = ()
    validate: dict = field(default_factory=lambda: dict(VALIDATE_DEFAULTS))
    emit: dict = field(default_factory=lambda: dict(EMIT_DEFAULTS))
    source: str = ""

    def build(self):
        from .scenarios import build

        sc = build(self.scenario, **self.params)
        if self.theta0 is not None:
            if self.theta0.shape != sc.env.theta.shape:
                raise ConfigError(f"theta0 has {self.theta0.size} entries, scenario needs {sc.env.dim}")
            sc = sc.with_theta0(self.theta0)
        return sc


def shipped_configs() -> dict:
    """Names and paths of the configs shipped with the package."""
    root = resources.files("conav.scenarios") / "configs"
    return {Path(p.name).stem: Path(str(p)) for p in root.iterdir() if p.name.endswith(".yaml")}


def resolve_path(ref: str) -> Path:
    """A config path, or the name of a shipped config."""
    p = Path(ref)
    if p.exists():
        return p
    shipped = shipped_configs()
    if ref in shipped:
        return shipped[ref]
    raise ConfigError(f"config {ref!r} not found (shipped: {', '.join(sorted(shipped))})")


def parse_override(item: str):
    """``"a.b=value"`` -> ``(["a", "b"], parsed value)``; values are YAML scalars or lists."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, raw = item.split("=", 1)
    keys = key.strip().split(".")
    if not all(keys):
        raise ConfigError(f"bad override key {key!r}")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse override value {raw!r}: {exc}") from None
    return keys, value


def apply_overrides(raw: dict, overrides) -> dict:
    out = copy.deepcopy(raw)
    for item in overrides or ():
        keys, value = parse_override(item)
        node = out
        for k in keys[:-1]:
            nxt = node.get(k)
            if nxt is None:
                nxt = node[k] = {}
            if not isinstance(nxt, dict):
                raise ConfigError(f"override {item!r}: {k!r} is not a mapping")
            node = nxt
        node[keys[-1]] = value
    return out


def load_config(ref: str, overrides=(), seed: Optional[int] = None) -> RunConfig:
    path = resolve_path(ref)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    raw = apply_overrides(raw, overrides)
    if seed is not None:
        raw.setdefault("bilevel", {})
        if raw["bilevel"] is None:
            raw["bilevel"] = {}
        raw["bilevel"]["seed"] = int(seed)
        if "seed" in _builder_params(raw.get("scenario")):
            raw.setdefault("params", {})
            if raw["params"] is None:
                raw["params"] = {}
            raw["params"]["seed"] = int(seed)
    cfg = from_dict(raw)
    cfg.source = str(path)
    return cfg


def _builder_params(name) -> dict:
    fn = BUILDERS.get(name) if isinstance(name, str) else None
    if fn is None:
        return {}
    params = {}
    # builders that pass **kw on name the receiving builder in ``forwards_to``
    while fn is not None:
        for k, p in inspect.signature(fn).parameters.items():
            if p.kind is not p.VAR_KEYWORD:
                params.setdefault(k, p)
        fn = getattr(fn, "forwards_to", None)
    return params


def from_dict(raw: dict) -> RunConfig:
    errors = []
    unknown = sorted(set(raw) - set(TOP_KEYS))
    if unknown:
        errors.append(f"unknown top-level keys: {unknown}")
    name = raw.get("scenario")
    if not isinstance(name, str) or name not in BUILDERS:
        errors.append(f"scenario: expected one of {sorted(BUILDERS)}, got {name!r}")
        raise ConfigError("; ".join(errors))

    params = _mapping(raw, "params", errors)
    accepted = _builder_params(name)
    for k, v in params.items():
        if k not in accepted:
            errors.append(f"params.{k}: not an argument of scenario {name!r}")
            continue
        d = accepted[k].default
        if d is not inspect.Parameter.empty and not _type_ok(v, d):
            errors.append(f"params.{k}: expected {type(d).__name__}, got {type(v).__name__}")

    theta0 = raw.get("theta0")
    if theta0 is not None:
        try:
            theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
            if theta0.ndim != 1 or not np.all(np.isfinite(theta0)):
                raise ValueError
        except (TypeError, ValueError):
            errors.append("theta0: expected a list of finite numbers")
            theta0 = None

    solver = _dataclass_fields(IpmOptions, _mapping(raw, "solver", errors), "solver", errors)
    bl = _mapping(raw, "bilevel", errors)
    if "solver" in bl:
        errors.append("bilevel.solver: set solver options under the top-level 'solver' key")
        bl.pop("solver")
    bl_kw = _dataclass_fields(BilevelConfig, bl, "bilevel", errors)

    stochastic = raw.get("stochastic", False)
    if not isinstance(stochastic, bool):
        errors.append("stochastic: expected true or false")
    heldout = raw.get("heldout") or []
    if not isinstance(heldout, list) or not all(isinstance(s, int) and not isinstance(s, bool) for s in heldout):
        errors.append("heldout: expected a list of integer seeds")
        heldout = []
    validate = _with_defaults(_mapping(raw, "validate", errors), VALIDATE_DEFAULTS, "validate", errors)
    emit = _with_defaults(_mapping(raw, "emit", errors), EMIT_DEFAULTS, "emit", errors)
    if errors:
        raise ConfigError("; ".join(errors))

    try:
        opts = IpmOptions(**solver)
        bcfg = BilevelConfig(solver=opts, **bl_kw)
    except ConfigError as exc:
        raise ConfigError(f"bilevel: {exc}") from None
    return RunConfig(name, params, theta0, opts, bcfg, stochastic, tuple(heldout), validate, emit)


def _mapping(raw, key, errors) -> dict:
    v = raw.get(key)
    if v is None:
        return {}
    if not isinstance(v, dict):
        errors.append(f"{key}: expected a mapping, got {type(v).__name__}")
        return {}
    return dict(v)


def _type_ok(value, default) -> bool:
    if default is None:
        return True
    if isinstance(default, bool):
        return isinstance(value, bool)
    if isinstance(default, (int, float)):
        ok = (int,) if isinstance(default, int) else (int, float)
        return isinstance(value, ok) and not isinstance(value, bool)
    if isinstance(default, (tuple, list)):
        return isinstance(value, (list, tuple))
    return isinstance(value, type(default))


def _dataclass_fields(cls, values: dict, prefix: str, errors) -> dict:
    defaults = {f.name: f.default for f in dataclasses.fields(cls) if f.default is not dataclasses.MISSING}
    out = {}
    for k, v in values.items():
        if k not in defaults:
            errors.append(f"{prefix}.{k}: unknown option")
        elif not _type_ok(v, defaults[k]):
            errors.append(f"{prefix}.{k}: expected {type(defaults[k]).__name__}, got {type(v).__name__}")
        else:
            out[k] = float(v) if isinstance(defaults[k], float) else v
    return out


def _with_defaults(values: dict, defaults: dict, prefix: str, errors) -> dict:
    out = dict(defaults)
    for k, v in values.items():
        if k not in defaults:
            errors.append(f"{prefix}.{k}: unknown option")
        elif not _type_ok(v, defaults[k]):
            errors.append(f"{prefix}.{k}: expected {type(defaults[k]).__name__}, got {type(v).__name__}")
        else:
            out[k] = v
    return out
