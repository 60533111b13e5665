"""Command line entry point: ``evdp ci|monitor|conformal|validate``.

Settings come from defaults, then an optional flat ``key = value`` config
file, then command-line flags (flags win). The resolved settings are written
to ``<out>/manifest.txt`` in the same format, so ``--config`` on that file
replays the run byte for byte.

Exit codes: 0 success, 1 validation failure, 2 usage or config error,
3 every requested private combination is undefined (partial sweeps mark the
undefined rows N/A and still exit 0).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields, replace
from pathlib import Path
from typing import Optional

from ..errors import DomainError, MechanismUndefined
from . import experiments as ex
from .csvio import fmt, write_csv
from .render import RENDERERS

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_UNDEFINED = 0, 1, 2, 3
DEFAULT_SEED = 20240601

# config key -> (parser, run-config field or None for top-level keys)
LIST_FLOAT = "floats"
LIST_INT = "ints"
LIST_STR = "strs"
KEYS = {
    "seed": (int, None),
    "out": (str, None),
    "alpha": (float, "alpha"),
    "epsilon": (LIST_FLOAT, "epsilons"),
    "renyi_alpha": (LIST_FLOAT, "renyi_alphas"),
    "mechanism": (LIST_STR, "mechanisms"),
    "n": (LIST_INT, "ns"),
    "batch_size": (int, "batch_size"),
    "bins": (int, "bins"),
    "cells": (int, "cells"),
    "reps": (int, "reps"),
    "jobs": (int, "jobs"),
    "atoms": (int, "atoms"),
    "data": (str, "data"),
    "calibration": (str, "calibration"),
    "candidates": (str, "candidates"),
    "p": (float, "p"),
    "threshold": (float, "threshold"),
    "shift": (float, "shift"),
    "change_batch": (int, "change_batch"),
    "batches": (int, "batches"),
    "c": (float, "c"),
    "test_n": (int, "test_n"),
    "classes": (int, "classes"),
    "signal": (float, "signal"),
    "s_lo": (float, "s_lo"),
    "s_hi": (float, "s_hi"),
}
RUN_CONFIGS = {"ci": ex.CIRun, "monitor": ex.MonitorRun, "conformal": ex.ConformalRun}
MECHANISM_CHOICES = ("gaussian", "laplace", "identity")


class ConfigError(Exception):
    pass


def parse_value(key: str, text: str):
    kind = KEYS[key][0]
    text = text.strip()
    try:
        if kind == LIST_FLOAT:
            return tuple(float(x) for x in text.split(",") if x.strip())
        if kind == LIST_INT:
            return tuple(int(x) for x in text.split(",") if x.strip())
        if kind == LIST_STR:
            vals = tuple(x.strip() for x in text.split(",") if x.strip())
            bad = [v for v in vals if v not in MECHANISM_CHOICES]
            if bad:
                raise ConfigError(f"{key}: unknown mechanism {bad[0]!r}")
            return vals
        return kind(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r}") from None


def read_config(path) -> dict:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    out = {}
    for i, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{i}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key == "command":
            continue
        if key not in KEYS:
            raise ConfigError(f"{path}:{i}: unknown key {key!r}")
        out[key] = parse_value(key, val)
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="evdp", description="Private e-value experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (("ci", "private confidence sets for a bounded mean"),
                        ("monitor", "private anytime-valid risk monitoring"),
                        ("conformal", "private e-conformal prediction sets"),
                        ("validate", "run every invariant check")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="flat key = value file; flags override it")
        for key, (kind, _) in KEYS.items():
            flag = "--" + key.replace("_", "-")
            hint = "comma-separated list" if kind in (LIST_FLOAT, LIST_INT, LIST_STR) else None
            p.add_argument(flag, dest=key, default=None, help=hint)
        if name == "validate":
            p.add_argument("--only", default=None,
                           help="run only checks whose module or property contains this text")
            p.add_argument("--inject-zero-bias", action="store_true", help=argparse.SUPPRESS)
    return ap


def resolve(args: argparse.Namespace) -> tuple[dict, object]:
    """Merge config file and flags; returns (top-level settings, run config)."""
    settings = read_config(args.config) if args.config else {}
    for key in KEYS:
        val = getattr(args, key)
        if val is not None:
            settings[key] = parse_value(key, val)
    top = {"seed": settings.get("seed", DEFAULT_SEED),
           "out": settings.get("out", f"results/{args.command}")}
    cls = RUN_CONFIGS.get(args.command)
    if cls is None:
        return top, None
    names = {f.name for f in fields(cls)}
    kwargs = {}
    for key, val in settings.items():
        target = KEYS[key][1]
        if target is None:
            continue
        if target == "ns" and "n" in names:
            if len(val) != 1:
                raise ConfigError(f"n takes a single value for the {args.command} command")
            target, val = "n", val[0]
        if target not in names:
            raise ConfigError(f"{key} does not apply to the {args.command} command")
        kwargs[target] = val
    return top, replace(cls(), **kwargs)


def write_manifest(path: Path, command: str, top: dict, cfg) -> None:
    inv = {v[1]: k for k, v in KEYS.items() if v[1] is not None}
    lines = [f"command = {command}", f"seed = {top['seed']}", f"out = {top['out']}"]
    for f in fields(cfg):
        val = getattr(cfg, f.name)
        if val is None:
            continue
        text = ",".join(fmt(v) for v in val) if isinstance(val, tuple) else fmt(val)
        lines.append(f"{inv.get(f.name, f.name)} = {text}")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _all_undefined(rows, mech_col: int, status_col: int) -> bool:
    private = [r for r in rows if r[mech_col] != "nonprivate"]
    return bool(private) and all(r[status_col] == "N/A" for r in private)


def cmd_ci(top: dict, cfg: ex.CIRun) -> int:
    out = Path(top["out"])
    rows = ex.run_ci(cfg, top["seed"])
    csv_path = write_csv(out / "ci.csv", ex.CI_DOC, ex.CI_HEADER, rows)
    RENDERERS["ci"](csv_path, out / "ci.svg")
    write_manifest(out / "manifest.txt", "ci", top, cfg)
    return _report_undefined(_all_undefined(rows, 5, 6), rows, 6)


def cmd_monitor(top: dict, cfg: ex.MonitorRun) -> int:
    out = Path(top["out"])
    rows = ex.run_monitor(cfg, top["seed"])
    csv_path = write_csv(out / "monitor.csv", ex.MONITOR_DOC, ex.MONITOR_HEADER, rows)
    RENDERERS["monitor"](csv_path, out / "monitor.svg")
    write_manifest(out / "manifest.txt", "monitor", top, cfg)
    return EXIT_OK


def cmd_conformal(top: dict, cfg: ex.ConformalRun) -> int:
    out = Path(top["out"])
    rows, preds = ex.run_conformal(cfg, top["seed"])
    csv_path = write_csv(out / "conformal.csv", ex.CONFORMAL_DOC, ex.CONFORMAL_HEADER, rows)
    RENDERERS["conformal"](csv_path, out / "conformal.svg")
    for (ra, eps, mech), pr in sorted(preds.items(), key=lambda kv: str(kv[0])):
        name = "nonprivate" if mech == "nonprivate" else f"{mech}_a{fmt(ra)}_e{fmt(eps)}"
        write_csv(out / "predictions" / f"{name}.csv",
                  "id: test point; label: candidate label; included: 1 if in the prediction set",
                  ex.PREDICTION_HEADER, pr)
    write_manifest(out / "manifest.txt", "conformal", top, cfg)
    return _report_undefined(_all_undefined(rows, 3, 4), rows, 4)


def _report_undefined(all_undefined: bool, rows, status_col: int) -> int:
    na = sum(r[status_col] == "N/A" for r in rows)
    if na:
        print(f"note: {na} combination(s) marked N/A (mechanism undefined)", file=sys.stderr)
    if all_undefined:
        print("error: the requested mechanism is undefined for every requested budget; "
              "use the gaussian mechanism", file=sys.stderr)
        return EXIT_UNDEFINED
    return EXIT_OK


def cmd_validate(top: dict, only: Optional[str], inject_zero_bias: bool) -> int:
    from .validate import run_registry, write_report
    results = run_registry(top["seed"], only=only, inject_zero_bias=inject_zero_bias,
                           progress=sys.stderr)
    write_report(Path(top["out"]) / "validate.csv", results)
    failed = [r for r in results if not r.passed]
    for r in failed:
        print(f"FAIL {r.module}: {r.prop}: {r.observed}", file=sys.stderr)
    print(f"{len(results) - len(failed)}/{len(results)} checks passed", file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        top, cfg = resolve(args)
        if args.command == "validate":
            return cmd_validate(top, args.only, args.inject_zero_bias)
        return {"ci": cmd_ci, "monitor": cmd_monitor, "conformal": cmd_conformal}[args.command](top, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MechanismUndefined as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNDEFINED
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
