"""Configuration-driven experiment runner.

Reads a flat ``key = value`` config (``#`` starts a comment), builds the
geometry / operator / problem, dispatches the requested action, and writes
JSON reports, CSV logs and binary fields plus a manifest with checksums.

Exit status: 0 on success, 1 when a certificate blocked a requested solve,
2 on errors.  Identical config and seed reproduce byte-identical reports
(the manifest carries wall-clock timing and is exempt).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import __version__
from .conditions import (
    check_existence_cond,
    check_existence_ineq,
    check_nonexistence,
    lambda_star_bisect,
    lambda_star_bracket,
)
from .errors import ConfigError, PaneitzLabError
from .flow import parabolic_flow
from .geometry import (
    ScalarField,
    SpectralGrid,
    derive_coefficients,
    field_to_csv,
    load_field,
    save_field,
)
from .geometry import load_field_csv
from .monotone import epsilon_continuation, find_sub_super, monotone_solve
from .mountain_pass import mountain_pass_solve
from .operator import build_operator
from .problems import ABSORPTION, SOURCE, ProblemSpec
from .spectral_analysis import (
    invariant_sign,
    positivity_check,
    principal_eigenpair,
    sobolev_constant,
)

__all__ = ["ExperimentConfig", "RunManifest", "parse_config", "run", "main"]

ACTIONS = (
    "solve",
    "flow",
    "eigen",
    "sobolev",
    "check-existence",
    "check-nonexistence",
    "mountain-pass",
    "lambda-star",
    "sweep",
)

# key -> (type tag, default); defaults marked REQUIRED must appear
_REQUIRED = object()
_SCHEMA = {
    "action": ("choice:" + ",".join(ACTIONS), _REQUIRED),
    "n": ("int", 5),
    "R": ("float", 20.0),
    "d": ("int", 0),  # 0 = infer from sizes
    "sizes": ("ints", (64,)),
    "lengths": ("floats", (2.0 * math.pi,)),
    "psi": ("choice:zero,mode,file", "zero"),
    "psi_amplitude": ("float", 1.0),
    "psi_mode": ("ints", (1,)),
    "psi_file": ("str", ""),
    "A": ("str", "1.0"),
    "B": ("str", "1.0"),
    "p": ("float", 3.0),
    "q": ("float", 2.0),
    "mode": ("choice:absorption,source", "absorption"),
    "phi_file": ("str", ""),
    "seed": ("int", 0),
    "out": ("str", "runs"),
    "workers": ("int", 1),
    "save_fields": ("bool", True),
    "precheck_nonexistence": ("bool", True),
    "tol_step": ("float", 1e-10),
    "tol_residual": ("float", 1e-8),
    "max_iter": ("int", 100000),
    "eps_schedule": ("str", "auto"),
    "eps0": ("str", "auto"),
    "mp_tol_residual": ("float", 1e-6),
    "mp_nodes": ("int", 32),
    "mp_max_sweeps": ("int", 600),
    "mp_require_cond": ("bool", True),
    "tau": ("float", 0.05),
    "tmax": ("float", 200.0),
    "flow_sample_every": ("int", 10),
    "lambda_tol": ("float", 1e-3),
    "lambda_max": ("str", "auto"),
    "solver_budget": ("int", 60),
    "positivity_samples": ("int", 4),
    "sweep_lambdas": ("str", ""),
    "sweep_ps": ("str", ""),
    "sweep_qs": ("str", ""),
    "sweep_solve": ("bool", False),
}

_ACTION_REQUIRES = {
    "sweep": ("sweep_lambdas",),
}


@dataclass(frozen=True)
class ExperimentConfig:
    values: dict
    echo: str
    base_dir: Path

    def __getitem__(self, key):
        return self.values[key]


@dataclass
class RunManifest:
    action: str
    version: str
    exit_code: int
    timing_seconds: float
    config_echo: str
    artifacts: list = dc_field(default_factory=list)

    def verify(self, out_dir: Path) -> bool:
        for art in self.artifacts:
            path = out_dir / art["path"]
            if not path.exists():
                return False
            if _sha256(path) != art["sha256"]:
                return False
        return True


def _parse_value(key: str, raw: str, line: int):
    kind, _ = _SCHEMA[key]
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("true", "yes", "1"):
                return True
            if low in ("false", "no", "0"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind == "ints":
            return tuple(int(x) for x in raw.split(","))
        if kind == "floats":
            return tuple(float(x) for x in raw.split(","))
        if kind.startswith("choice:"):
            options = kind.split(":", 1)[1].split(",")
            if raw not in options:
                raise ValueError(f"must be one of {options}, got {raw!r}")
            return raw
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {exc}", line=line) from None


def parse_config(text: str, base_dir: str | Path = ".") -> ExperimentConfig:
    """Parse and validate a flat key = value configuration.

    Unknown keys, malformed values and missing action-specific keys are
    rejected with the offending line number.
    """
    values = {}
    seen = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw_line!r}", line=lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"unknown key {key!r}", line=lineno)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} (first on line {seen[key]})", line=lineno)
        seen[key] = lineno
        values[key] = _parse_value(key, value, lineno)

    for key, (kind, default) in _SCHEMA.items():
        if key not in values:
            if default is _REQUIRED:
                raise ConfigError(f"missing required key {key!r}")
            values[key] = default

    if values["n"] < 5:
        raise ConfigError(f"n must be >= 5, got {values['n']}", line=seen.get("n"))
    if len(values["sizes"]) != len(values["lengths"]):
        raise ConfigError("sizes and lengths must have the same dimension")
    if values["d"] and values["d"] != len(values["sizes"]):
        raise ConfigError(
            f"d = {values['d']} disagrees with sizes of dimension {len(values['sizes'])}"
        )
    for req in _ACTION_REQUIRES.get(values["action"], ()):
        if not values[req]:
            raise ConfigError(
                f"action {values['action']!r} requires key {req!r}"
            )
    return ExperimentConfig(values=values, echo=text, base_dir=Path(base_dir))


# -- builders -----------------------------------------------------------------


def _load_any_field(spec: str, grid: SpectralGrid, base: Path) -> ScalarField:
    path = base / spec
    if spec.endswith(".csv"):
        return load_field_csv(path, grid)
    return load_field(path, grid)


def _coefficient_field(spec: str, grid: SpectralGrid, base: Path) -> ScalarField:
    spec = spec.strip()
    if spec.startswith("@"):
        return _load_any_field(spec[1:], grid, base)
    return ScalarField.constant(grid, float(spec))


def _build(config: ExperimentConfig):
    v = config.values
    params = derive_coefficients(v["n"], v["R"])
    grid = SpectralGrid(v["sizes"], v["lengths"])
    psi = None
    if v["psi"] == "mode":
        mode = v["psi_mode"]
        if len(mode) != grid.d:
            raise ConfigError("psi_mode must have one integer per grid axis")
        mesh = grid.meshgrid()
        phase = np.zeros(grid.shape)
        for m, x, L in zip(mode, mesh, grid.lengths):
            phase = phase + 2.0 * np.pi * m * x / L
        psi = ScalarField(grid, v["psi_amplitude"] * np.sin(phase))
    elif v["psi"] == "file":
        if not v["psi_file"]:
            raise ConfigError("psi = file requires psi_file")
        psi = _load_any_field(v["psi_file"], grid, config.base_dir)
    op = build_operator(params, grid, psi=psi)
    return params, grid, op


def _build_problem(config: ExperimentConfig, grid: SpectralGrid) -> ProblemSpec:
    v = config.values
    A = _coefficient_field(v["A"], grid, config.base_dir)
    B = _coefficient_field(v["B"], grid, config.base_dir)
    return ProblemSpec(A=A, B=B, p=v["p"], q=v["q"], mode=v["mode"])


def _phi_field(config: ExperimentConfig, grid: SpectralGrid) -> ScalarField | None:
    if config.values["phi_file"]:
        return _load_any_field(config.values["phi_file"], grid, config.base_dir)
    return None


def _eps_schedule(config: ExperimentConfig):
    raw = config.values["eps_schedule"]
    if raw == "auto":
        return None
    return [float(x) for x in raw.split(",")]


def _eps0(config: ExperimentConfig):
    raw = config.values["eps0"]
    return None if raw == "auto" else float(raw)


# -- serialization --------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, ScalarField):
        return {
            "min": obj.min(),
            "max": obj.max(),
            "mean": float(obj.values.mean()),
            "points": obj.grid.npoints,
        }
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(x) for x in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


class _Writer:
    def __init__(self, out_dir: Path):
        self.out = out_dir
        self.out.mkdir(parents=True, exist_ok=True)
        self.paths: list[Path] = []

    def json(self, name: str, payload: dict) -> Path:
        path = self.out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")
        self.paths.append(path)
        return path

    def csv_rows(self, name: str, header, rows) -> Path:
        path = self.out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([repr(x) if isinstance(x, float) else x for x in row])
        self.paths.append(path)
        return path

    def field(self, name: str, field: ScalarField) -> None:
        raw, meta = save_field(field, self.out / (name + ".f64"))
        self.paths += [raw, meta]
        self.paths.append(field_to_csv(field, self.out / (name + ".csv")))


# -- action handlers --------------------------------------------------------------


def _solver_report_payload(rep):
    return rep.summary()


def _action_eigen(config, params, grid, op, w: _Writer):
    eig = principal_eigenpair(op)
    sign = invariant_sign(op, eig)
    pos = positivity_check(op, samples=config.values["positivity_samples"],
                           seed=config.values["seed"])
    if config.values["save_fields"]:
        w.field("phi1", eig.phi1)
    w.json("report.json", {
        "action": "eigen",
        "lambda1": eig.lambda1,
        "residual": eig.residual,
        "iterations": eig.iterations,
        "positive": eig.positive,
        "invariant_sign": sign,
        "positivity": _jsonable(pos),
    })
    return 0


def _action_sobolev(config, params, grid, op, w: _Writer):
    S = sobolev_constant(op, seed=config.values["seed"])
    w.json("report.json", {
        "action": "sobolev",
        "S_psi": S,
        "grid": {"sizes": list(grid.sizes), "lengths": list(grid.lengths)},
        "critical_exponent": params.two_sharp,
    })
    return 0


def _certified_infeasible(config, op, prob):
    if not config.values["precheck_nonexistence"]:
        return None
    if prob.mode != SOURCE:
        return None
    rep = check_nonexistence(op, prob)
    if rep.conclusive and rep.satisfied:
        return rep
    return None


def _action_solve(config, params, grid, op, w: _Writer):
    v = config.values
    prob = _build_problem(config, grid)
    blocked = _certified_infeasible(config, op, prob)
    if blocked is not None:
        w.json("report.json", {
            "action": "solve",
            "outcome": "certified-infeasible",
            "certificate": _jsonable(blocked),
        })
        return 1
    if prob.mode == ABSORPTION:
        schedule = _eps_schedule(config)
        if schedule is not None:
            rep = epsilon_continuation(op, prob, schedule,
                                       tol_step=v["tol_step"],
                                       tol_residual=v["tol_residual"],
                                       maxiter=v["max_iter"])
        else:
            bracket = find_sub_super(op, prob)
            rep = monotone_solve(op, prob, bracket,
                                 tol_step=v["tol_step"],
                                 tol_residual=v["tol_residual"],
                                 maxiter=v["max_iter"])
    else:
        rep = mountain_pass_solve(op, prob,
                                  phi=_phi_field(config, grid),
                                  eps0=_eps0(config),
                                  eps_schedule=_eps_schedule(config),
                                  require_cond=v["mp_require_cond"],
                                  n_nodes=v["mp_nodes"],
                                  tol_residual=v["mp_tol_residual"],
                                  max_sweeps=v["mp_max_sweeps"],
                                  seed=v["seed"])
    if v["save_fields"]:
        w.field("solution", rep.u)
    w.json("report.json", {"action": "solve", "outcome": "solved",
                           "solver": _solver_report_payload(rep)})
    return 0


def _action_flow(config, params, grid, op, w: _Writer):
    v = config.values
    prob = _build_problem(config, grid)
    bracket = find_sub_super(op, prob)
    u0 = bracket.lower
    rep, samples = parabolic_flow(op, prob, u0, tau=v["tau"], tmax=v["tmax"],
                                  tol_residual=v["tol_residual"],
                                  sample_every=v["flow_sample_every"])
    if v["save_fields"]:
        w.field("solution", rep.u)
    w.csv_rows("trajectory.csv",
               ["time", "residual", "min_u", "max_u", "energy"],
               [(s.time, s.residual, s.min_u, s.max_u, s.energy) for s in samples])
    w.json("report.json", {"action": "flow", "outcome": "steady" if rep.converged else "tmax",
                           "solver": _solver_report_payload(rep)})
    return 0


def _action_check_existence(config, params, grid, op, w: _Writer):
    prob = _build_problem(config, grid)
    if prob.mode == ABSORPTION:
        rep = check_existence_ineq(op, prob)
    else:
        rep = check_existence_cond(op, prob, phi=_phi_field(config, grid),
                                   seed=config.values["seed"])
    w.json("report.json", {"action": "check-existence", "certificate": _jsonable(rep)})
    return 0


def _action_check_nonexistence(config, params, grid, op, w: _Writer):
    prob = _build_problem(config, grid)
    rep = check_nonexistence(op, prob)
    w.json("report.json", {"action": "check-nonexistence", "certificate": _jsonable(rep)})
    return 0


def _action_mountain_pass(config, params, grid, op, w: _Writer):
    v = config.values
    prob = _build_problem(config, grid)
    if prob.mode != SOURCE:
        raise ConfigError("mountain-pass action requires mode = source")
    blocked = _certified_infeasible(config, op, prob)
    if blocked is not None:
        w.json("report.json", {
            "action": "mountain-pass",
            "outcome": "certified-infeasible",
            "certificate": _jsonable(blocked),
        })
        return 1
    rep = mountain_pass_solve(op, prob,
                              phi=_phi_field(config, grid),
                              eps0=_eps0(config),
                              eps_schedule=_eps_schedule(config),
                              require_cond=v["mp_require_cond"],
                              n_nodes=v["mp_nodes"],
                              tol_residual=v["mp_tol_residual"],
                              max_sweeps=v["mp_max_sweeps"],
                              seed=v["seed"])
    if v["save_fields"]:
        w.field("solution", rep.u)
    w.json("report.json", {"action": "mountain-pass", "outcome": "solved",
                           "solver": _solver_report_payload(rep)})
    return 0


def _action_lambda_star(config, params, grid, op, w: _Writer):
    v = config.values
    lam_max = None if v["lambda_max"] == "auto" else float(v["lambda_max"])
    result = lambda_star_bisect(op, v["p"], v["q"], tol=v["lambda_tol"],
                                lambda_max=lam_max,
                                solver_budget=v["solver_budget"],
                                seed=v["seed"])
    w.json("report.json", {"action": "lambda-star", "result": _jsonable(result)})
    return 0


def _action_sweep(config, params, grid, op, w: _Writer):
    v = config.values
    lambdas = [float(x) for x in v["sweep_lambdas"].split(",")]
    ps = [float(x) for x in v["sweep_ps"].split(",")] if v["sweep_ps"] else [v["p"]]
    qs = [float(x) for x in v["sweep_qs"].split(",")] if v["sweep_qs"] else [v["q"]]
    cells = [(p, q, lam) for p in ps for q in qs for lam in lambdas]
    S = sobolev_constant(op, seed=v["seed"])

    def run_cell(idx_cell):
        idx, (p, q, lam) = idx_cell
        A = ScalarField.constant(grid, 1.0)
        B = ScalarField.constant(grid, lam)
        prob = ProblemSpec(A=A, B=B, p=p, q=q, mode=SOURCE)
        try:
            cond = check_existence_cond(op, prob, S_psi=S)
            cond_sat, cond_margin = cond.satisfied, cond.margin
            cond_payload = _jsonable(cond)
        except PaneitzLabError as exc:
            cond_sat, cond_margin = "error", repr(exc)
            cond_payload = {"error": repr(exc)}
        non = check_nonexistence(op, prob)
        outcome = ""
        resid = ""
        solver_payload = None
        if v["sweep_solve"]:
            try:
                rep = mountain_pass_solve(op, prob, require_cond=False,
                                          tol_residual=v["mp_tol_residual"],
                                          seed=v["seed"])
                outcome, resid = "solved", rep.residual
                solver_payload = rep.summary()
            except PaneitzLabError as exc:
                outcome, resid = "failed", ""
                solver_payload = {"error": repr(exc)}
        # each cell owns a subdirectory; the shared CSV is written after the
        # join point
        w.json(f"cells/{idx:03d}/report.json", {
            "cell": idx, "p": p, "q": q, "lambda": lam,
            "existence": cond_payload, "nonexistence": _jsonable(non),
            "solver": solver_payload,
        })
        return idx, (p, q, lam, cond_sat, cond_margin,
                     non.satisfied if non.conclusive else "inconclusive",
                     non.margin, outcome, resid)

    workers = max(1, int(v["workers"]))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_cell, enumerate(cells)))
    else:
        results = [run_cell(ic) for ic in enumerate(cells)]
    results.sort(key=lambda r: r[0])
    rows = [r[1] for r in results]
    w.csv_rows("sweep.csv",
               ["p", "q", "lambda", "cond_satisfied", "cond_margin",
                "nonexistence_satisfied", "nonexistence_margin",
                "solver_outcome", "solver_residual"],
               rows)
    w.json("report.json", {"action": "sweep", "cells": len(rows), "S_psi": S})
    return 0


_HANDLERS = {
    "eigen": _action_eigen,
    "sobolev": _action_sobolev,
    "solve": _action_solve,
    "flow": _action_flow,
    "check-existence": _action_check_existence,
    "check-nonexistence": _action_check_nonexistence,
    "mountain-pass": _action_mountain_pass,
    "lambda-star": _action_lambda_star,
    "sweep": _action_sweep,
}


def run(config: ExperimentConfig, out_dir: str | Path | None = None,
        workers: int | None = None, seed: int | None = None) -> RunManifest:
    """Execute the configured action and write all artifacts plus a manifest."""
    started = time.monotonic()
    values = dict(config.values)
    if workers is not None:
        values["workers"] = int(workers)
    if seed is not None:
        values["seed"] = int(seed)
    config = ExperimentConfig(values=values, echo=config.echo, base_dir=config.base_dir)
    out = Path(out_dir) if out_dir is not None else Path(values["out"])
    writer = _Writer(out)
    exit_code = 0
    try:
        params, grid, op = _build(config)
        exit_code = _HANDLERS[values["action"]](config, params, grid, op, writer)
    except PaneitzLabError as exc:
        writer.json("error.json", {"error": type(exc).__name__, "message": str(exc)})
        exit_code = 2
    manifest = RunManifest(
        action=values["action"],
        version=__version__,
        exit_code=exit_code,
        timing_seconds=time.monotonic() - started,
        config_echo=config.echo,
        artifacts=[
            {
                "path": str(p.relative_to(out)),
                "sha256": _sha256(p),
                "bytes": p.stat().st_size,
            }
            for p in sorted(set(writer.paths))
        ],
    )
    (out / "manifest.json").write_text(
        json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n"
    )
    return manifest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="paneitz-lab",
        description="Run a configured experiment for the fourth-order singular equation lab.",
    )
    parser.add_argument("config", help="path to a key = value config file")
    parser.add_argument("--out", default=None, help="output directory (overrides config)")
    parser.add_argument("--workers", type=int, default=None, help="sweep worker count")
    parser.add_argument("--seed", type=int, default=None, help="seed override")
    args = parser.parse_args(argv)

    out = args.out or os.environ.get("PANEITZLAB_OUT")
    workers = args.workers
    if workers is None and os.environ.get("PANEITZLAB_WORKERS"):
        workers = int(os.environ["PANEITZLAB_WORKERS"])

    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        config = parse_config(text, base_dir=Path(args.config).resolve().parent)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    manifest = run(config, out_dir=out, workers=workers, seed=args.seed)
    print(f"paneitz-lab: action={manifest.action} exit={manifest.exit_code} "
          f"artifacts={len(manifest.artifacts)} ({manifest.timing_seconds:.2f}s)")
    return manifest.exit_code


if __name__ == "__main__":
    sys.exit(main())
