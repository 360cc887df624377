"""YAML run configuration with sections env, policy, sim and output.

Schema and defaults (every key optional unless marked required):

    env:
      arms: [0.9, 0.8]          # required, success probabilities in [0, 1]
    policy:
      kind: info-p              # required, one of KINDS
      xi: -0.5                  # ucb-lai
      c: 0.0                    # kl-ucb log-log coefficient
      alpha: 0.001              # ucb2 epoch growth
      grid: {tail_drop: 40.0, divisor: 8.0, fine_divisor: 32.0, base_nodes: 64}
    sim:
      horizon: 1000000          # required
      ensemble: 1
      seed: 0
      checkpoints_per_decade: 32
      workers: null             # null: INFOBANDIT_WORKERS, then CPU count
      record_entropy: true
      voi_level: null
      pretrain_cap: 100000
      fast_sim: {enabled: true, min_n: 1000, mode: null, initial_guess: 16, track: true}
    output:
      dir: out
      subtract_leading: false
      compare: [info-p, thompson, kl-ucb]
      voi_levels: [0, 1, 2, 3, 4, 5]
      regret_fit: null          # [lo, hi] in n; null: last decade
      linear_fit: null          # ln H vs n fit range for identity rules
      log_fit: null             # ln H vs ln n fit range for the others
      checks: []                # [{name, target, rel_tol | abs_tol}]

A check target is a number or the name of a row of the rates table.
"""
from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import yaml

from infobandit.belief import GridSettings
from infobandit.harness import ExperimentConfig, FastSimConfig
from infobandit.policies import KINDS, PolicyConfig

SECTIONS = ("env", "policy", "sim", "output")
REQUIRED = (("env", "arms"), ("policy", "kind"), ("sim", "horizon"))


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Check:
    name: str
    target: Any
    rel_tol: float | None = None
    abs_tol: float | None = None

    def __post_init__(self):
        if (self.rel_tol is None) == (self.abs_tol is None):
            raise ConfigError(f"output.checks[{self.name}]: give exactly one of rel_tol, abs_tol")
        if not isinstance(self.target, (int, float, str)) or isinstance(self.target, bool):
            raise ConfigError(f"output.checks[{self.name}].target: number or rates-table name")

    def passes(self, value: float, target: float) -> bool:
        if self.rel_tol is not None:
            return abs(value - target) <= self.rel_tol * abs(target)
        return abs(value - target) <= self.abs_tol


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "out"
    subtract_leading: bool = False
    compare: tuple = ("info-p", "thompson", "kl-ucb")
    voi_levels: tuple = (0, 1, 2, 3, 4, 5)
    regret_fit: tuple | None = None
    linear_fit: tuple | None = None
    log_fit: tuple | None = None
    checks: tuple = ()


@dataclass(frozen=True)
class RunConfig:
    experiment: ExperimentConfig
    output: OutputConfig = field(default_factory=OutputConfig)


def _section_keys(cls, skip=()):
    return {f.name for f in fields(cls)} - set(skip)


def _reject_unknown(mapping, allowed, where):
    if not isinstance(mapping, dict):
        raise ConfigError(f"{where}: expected a mapping")
    extra = sorted(set(mapping) - set(allowed))
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(map(str, extra))}")


def _pair(value, where):
    if value is None:
        return None
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{where}: expected [lo, hi]")
    lo, hi = (float(v) for v in value)
    if not 0 < lo < hi:
        raise ConfigError(f"{where}: need 0 < lo < hi")
    return lo, hi


def _build(raw: dict) -> RunConfig:
    _reject_unknown(raw, SECTIONS, "config")
    for sec, key in REQUIRED:
        if key not in (raw.get(sec) or {}):
            raise ConfigError(f"{sec}.{key}: required")
    env = raw.get("env") or {}
    pol = dict(raw.get("policy") or {})
    sim = dict(raw.get("sim") or {})
    out = dict(raw.get("output") or {})
    _reject_unknown(env, {"arms"}, "env")
    _reject_unknown(pol, _section_keys(PolicyConfig), "policy")
    sim_keys = _section_keys(ExperimentConfig, ("arms", "policy"))
    _reject_unknown(sim, sim_keys, "sim")
    _reject_unknown(out, _section_keys(OutputConfig), "output")
    try:
        arms = env["arms"]
        if not isinstance(arms, (list, tuple)):
            raise ConfigError("env.arms: expected a list")
        for p in arms:
            if isinstance(p, bool) or not isinstance(p, (int, float)) or not 0.0 <= p <= 1.0:
                raise ConfigError(f"env.arms: {p!r} is not a probability in [0, 1]")
        grid = pol.pop("grid", None) or {}
        _reject_unknown(grid, _section_keys(GridSettings), "policy.grid")
        if pol.get("kind") not in KINDS:
            raise ConfigError(f"policy.kind: one of {', '.join(KINDS)}")
        policy = PolicyConfig(**pol, grid=GridSettings(**grid))
        fast = sim.pop("fast_sim", None) or {}
        _reject_unknown(fast, _section_keys(FastSimConfig), "sim.fast_sim")
        for key in ("horizon", "ensemble", "seed", "checkpoints_per_decade", "pretrain_cap"):
            if key in sim:
                sim[key] = _as_int(sim[key], f"sim.{key}")
        experiment = ExperimentConfig(arms=tuple(arms), policy=policy,
                                      fast_sim=FastSimConfig(**fast), **sim)
        checks = []
        for i, c in enumerate(out.pop("checks", None) or ()):
            _reject_unknown(c, _section_keys(Check), f"output.checks[{i}]")
            checks.append(Check(**c))
        for key in ("regret_fit", "linear_fit", "log_fit"):
            out[key] = _pair(out.get(key), f"output.{key}")
        if "compare" in out:
            bad = [k for k in out["compare"] if k not in KINDS]
            if bad:
                raise ConfigError(f"output.compare: unknown policy {bad[0]!r}")
            out["compare"] = tuple(out["compare"])
        if "voi_levels" in out:
            out["voi_levels"] = tuple(_as_int(m, "output.voi_levels") for m in out["voi_levels"])
        output = OutputConfig(**out, checks=tuple(checks))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(experiment, output)


def _as_int(value, where):
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected an integer")
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        try:
            return _as_int(float(value), where)
        except ValueError:
            pass
    raise ConfigError(f"{where}: expected an integer, got {value!r}")


def _set_path(raw: dict, dotted: str, value):
    parts = dotted.split(".")
    if parts[0] not in SECTIONS or len(parts) < 2:
        raise ConfigError(f"{dotted}: expected section.key with section in {', '.join(SECTIONS)}")
    node = raw
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"{dotted}: {part} is not a mapping")
    node[parts[-1]] = value


def parse_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Read the YAML file (if any) and apply dotted-key overrides on top of it."""
    raw: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            raw = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config: top level must be a mapping")
    raw = copy.deepcopy(raw)
    for key, value in (overrides or {}).items():
        _set_path(raw, key, value)
    return _build(raw)


def to_mapping(config: RunConfig) -> dict:
    """Plain-data echo of a parsed config; `parse_config` of its YAML gives it back."""
    exp = config.experiment
    pol = asdict(exp.policy)
    sim = {f.name: getattr(exp, f.name) for f in fields(ExperimentConfig)
           if f.name not in ("arms", "policy", "fast_sim")}
    sim["fast_sim"] = asdict(exp.fast_sim)
    out = asdict(config.output)
    out["checks"] = [{k: v for k, v in asdict(c).items() if v is not None} for c in config.output.checks]
    for key in ("compare", "voi_levels", "regret_fit", "linear_fit", "log_fit"):
        if out[key] is not None:
            out[key] = list(out[key])
    return {"env": {"arms": list(exp.arms)}, "policy": pol, "sim": sim, "output": out}


def with_policy(config: RunConfig, kind: str) -> RunConfig:
    exp = config.experiment
    return replace(config, experiment=replace(exp, policy=replace(exp.policy, kind=kind)))
