"""Command-line front end: infobandit {run,compare,boundary,voi,entropy,rates}.

Exit status: 0 when every requested check passes, 2 on configuration
errors, 3 when a check fails.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import yaml

from infobandit import __version__
from infobandit.asymptotics import rate_table
from infobandit.config import ConfigError, RunConfig, parse_config, to_mapping, with_policy
from infobandit.harness import (
    below_boundary_fraction,
    boundary_envelope,
    boundary_scatter,
    entropy_decay_experiment,
    run_ensemble,
    run_traces,
    slope_fit,
    voi_experiment,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CHECK = 3

ENSEMBLE_HEADER = ("n", "mean_regret", "se_regret", "mean_lnH", "se_lnH", "mean_n2")
SUBCOMMANDS = ("run", "compare", "boundary", "voi", "entropy", "rates")


def fmt(value) -> str:
    """17 significant digits for floats, plain digits for integers."""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return f"{float(value):.17g}"


def write_csv(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _default_range(horizon):
    return max(2.0, horizon / 10.0), float(horizon)


def _fit_dict(fit):
    lo, hi = fit.ci95
    return {"slope": fit.slope, "se": fit.se, "ci95": [lo, hi], "range": [fit.lo, fit.hi]}


# ---------------------------------------------------------------- subcommands


def _ensemble_summary(res, cfg: RunConfig, prefix=""):
    exp = res.config
    lo, hi = cfg.output.regret_fit or _default_range(exp.horizon)
    regret = res.matrix("regret_since_switch" if exp.voi_level else "regret")
    fit = slope_fit(res.checkpoints, regret, lo, hi, log_x=True)
    final = float(res.mean_regret[-1])
    quantities = {
        f"{prefix}regret_slope": fit.slope,
        f"{prefix}final_regret": final,
        f"{prefix}final_regret_se": float(res.se_regret[-1]),
        f"{prefix}regret_per_log_n": final / math.log(exp.horizon),
    }
    fits = {f"{prefix}regret_slope": _fit_dict(fit)}
    if exp.record_entropy:
        kind = exp.policy.kind
        if kind in ("info-id", "max-ent"):
            lo2, hi2 = cfg.output.linear_fit or (float(res.checkpoints[0]), float(exp.horizon))
            efit = slope_fit(res.checkpoints, res.matrix("log_h"), lo2, hi2)
        else:
            lo2, hi2 = cfg.output.log_fit or _default_range(exp.horizon)
            efit = slope_fit(res.checkpoints, res.matrix("log_h"), lo2, hi2, log_x=True)
        quantities[f"{prefix}log_h_slope"] = efit.slope
        fits[f"{prefix}log_h_slope"] = _fit_dict(efit)
    best = exp.best
    share = np.mean([t.plays[-1, best] / t.plays[-1].sum() for t in res.traces])
    quantities[f"{prefix}best_share"] = float(share)
    return quantities, fits


def _rows(res, subtract):
    return list(res.rows(subtract_leading=subtract))


def cmd_run(cfg: RunConfig, out: Path):
    res = run_ensemble(cfg.experiment)
    files = [write_csv(out / "run.csv", ENSEMBLE_HEADER, _rows(res, cfg.output.subtract_leading))]
    q, fits = _ensemble_summary(res, cfg)
    return q, fits, files


def cmd_compare(cfg: RunConfig, out: Path):
    quantities, fits, files = {}, {}, []
    for kind in cfg.output.compare:
        sub = with_policy(cfg, kind)
        exp = sub.experiment
        if exp.fast_sim.mode is not None and exp.fast_sim.mode != "off":
            exp = replace(exp, fast_sim=replace(exp.fast_sim, mode=None))
        res = run_ensemble(exp)
        files.append(write_csv(out / f"compare_{kind}.csv", ENSEMBLE_HEADER,
                               _rows(res, cfg.output.subtract_leading)))
        q, f = _ensemble_summary(res, replace(sub, experiment=exp), prefix=f"{kind}.")
        quantities.update(q)
        fits.update(f)
    return quantities, fits, files


def cmd_boundary(cfg: RunConfig, out: Path):
    exp = cfg.experiment
    scatter = boundary_scatter(exp, run_traces(exp))
    files = [write_csv(out / "boundary.csv", ("n", "n2_D", "realization"),
                       [(int(a), b, int(c)) for a, b, c in scatter])]
    lo, hi = _default_range(exp.horizon)
    env = boundary_envelope(scatter, lo, hi)
    files.append(write_csv(out / "boundary_envelope.csv", ("ln_n", "max_n2_D", "ratio"), env))
    ratios = env[:, 2] if env.size else np.array([np.nan])
    q = {
        "below_fraction": below_boundary_fraction(scatter),
        "envelope_ratio_min": float(np.min(ratios)),
        "envelope_ratio_max": float(np.max(ratios)),
        "events": int(scatter.shape[0]),
    }
    return q, {}, files


def cmd_voi(cfg: RunConfig, out: Path):
    exp = cfg.experiment
    res = voi_experiment(exp, cfg.output.voi_levels)
    files = []
    for m, r in res.results.items():
        files.append(write_csv(out / f"voi_m{m}.csv", ENSEMBLE_HEADER, _rows(r, False)))
    table = []
    for i, m in enumerate(res.levels):
        switch = np.mean([t.switch_n for t in res.results[m].traces])
        capped = sum(bool(t.diagnostics.get("pretrain_capped")) for t in res.results[m].traces)
        table.append((m, res.delta_r[i], res.se_delta_r[i], switch, capped))
    files.append(write_csv(out / "voi_delta.csv", ("m", "delta_r", "se_delta_r", "mean_switch_n",
                                                   "capped"), table))
    q = {"voi_slope": res.slope, "voi_monotone": float(res.monotone)}
    for m, d in zip(res.levels, res.delta_r):
        q[f"delta_r_m{m}"] = float(d)
    return q, {"voi_slope": {"slope": res.slope, "se": res.slope_se}}, files


def cmd_entropy(cfg: RunConfig, out: Path):
    out_map = entropy_decay_experiment(cfg.experiment, linear_range=cfg.output.linear_fit,
                                       log_range=cfg.output.log_fit)
    quantities, fits, files = {}, {}, []
    for kind, (res, fit) in out_map.items():
        files.append(write_csv(out / f"entropy_{kind}.csv",
                               ("n", "mean_lnH", "se_lnH", "mean_H_pimax"),
                               zip(res.checkpoints, res.mean_log_h, res.se_log_h, res.mean_h_max)))
        quantities[f"{kind}.log_h_slope"] = fit.slope
        fits[f"{kind}.log_h_slope"] = _fit_dict(fit)
        best = res.config.best
        quantities[f"{kind}.best_share"] = float(
            np.mean([t.plays[-1, best] / t.plays[-1].sum() for t in res.traces]))
    return quantities, fits, files


def _predictions(arms):
    if len(arms) != 2 or arms[0] == arms[1]:
        return {}
    p1, p2 = max(arms), min(arms)
    table = {r.name: r.value for r in rate_table(p1, p2)}
    return table


def _evaluate_checks(cfg: RunConfig, quantities: dict, predictions: dict):
    results = []
    for check in cfg.output.checks:
        if check.name not in quantities:
            raise ConfigError(f"output.checks: quantity {check.name!r} is not produced here; "
                              f"available: {', '.join(sorted(quantities))}")
        target = check.target
        if isinstance(target, str):
            if target not in predictions:
                raise ConfigError(f"output.checks: unknown target {target!r}")
            target = predictions[target]
        value = quantities[check.name]
        results.append({"name": check.name, "value": value, "target": float(target),
                        "rel_tol": check.rel_tol, "abs_tol": check.abs_tol,
                        "pass": bool(check.passes(value, float(target)))})
    return results


def _rates(args) -> int:
    try:
        table = rate_table(args.p1, args.p2)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    width = max(len(r.name) for r in table)
    for r in table:
        print(f"{r.name:<{width}}  {fmt(r.value):>24}  {r.units}")
    record = {"params": {"p1": args.p1, "p2": args.p2},
              "rates": {r.name: {"value": r.value, "units": r.units} for r in table}}
    if args.json:
        Path(args.json).write_text(json.dumps(record, indent=2) + "\n")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "boundary": cmd_boundary, "voi": cmd_voi,
            "entropy": cmd_entropy}


def _overrides(args) -> dict:
    ov = {}
    if args.arms is not None:
        ov["env.arms"] = [float(v) for v in args.arms.split(",")]
    for flag, key in (("policy", "policy.kind"), ("horizon", "sim.horizon"),
                      ("ensemble", "sim.ensemble"), ("seed", "sim.seed"),
                      ("workers", "sim.workers"), ("out", "output.dir")):
        value = getattr(args, flag)
        if value is not None:
            ov[key] = value
    for item in args.set or ():
        if "=" not in item:
            raise ConfigError(f"--set {item!r}: expected section.key=value")
        key, text = item.split("=", 1)
        ov[key.strip()] = yaml.safe_load(text)
    return ov


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="infobandit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", nargs="?", help="YAML config file")
        p.add_argument("--arms", help="comma-separated success probabilities")
        p.add_argument("--policy")
        p.add_argument("--horizon", type=float)
        p.add_argument("--ensemble", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override any config key (value parsed as YAML)")
    p = sub.add_parser("rates")
    p.add_argument("--p1", type=float, required=True)
    p.add_argument("--p2", type=float, required=True)
    p.add_argument("--json", help="also write the table as JSON to this path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "rates":
        return _rates(args)
    started = datetime.now(timezone.utc).isoformat()
    try:
        cfg = parse_config(args.config, _overrides(args))
        if args.command == "boundary" and (len(cfg.experiment.arms) != 2
                                           or cfg.experiment.policy.kind != "info-p"):
            raise ConfigError("boundary needs policy.kind info-p and exactly two arms")
        if args.command in ("voi", "entropy") and len(cfg.experiment.arms) != 2:
            raise ConfigError(f"{args.command} needs exactly two arms")
        out = Path(cfg.output.dir)
        quantities, fits, files = COMMANDS[args.command](cfg, out)
        predictions = _predictions(cfg.experiment.arms)
        checks = _evaluate_checks(cfg, quantities, predictions)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    summary = {"command": args.command, "quantities": quantities, "fits": fits,
               "predicted": predictions, "checks": checks}
    summary_path = out / f"{args.command}_summary.json"
    summary_path.write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    files.append(summary_path)
    manifest = {
        "version": __version__,
        "command": args.command,
        "seed": cfg.experiment.seed,
        "config": to_mapping(cfg),
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        "files": [str(f) for f in files],
    }
    manifest_path = out / f"{args.command}_manifest.json"
    manifest["files"].append(str(manifest_path))
    manifest_path.write_text(json.dumps(_jsonable(manifest), indent=2) + "\n")
    for c in checks:
        status = "PASS" if c["pass"] else "FAIL"
        print(f"{status} {c['name']} = {fmt(c['value'])} (target {fmt(c['target'])})")
    print(f"wrote {len(files) + 1} files to {out}")
    return EXIT_CHECK if any(not c["pass"] for c in checks) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
