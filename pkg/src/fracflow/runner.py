"""Run orchestration around the experiment registry: strict JSON
configs, manifest emission, atomic artifact directories, and replay.

A config file only needs the experiment name; every omitted field is
filled from the experiment's defaults and the fully merged config is
echoed into the manifest, so nothing about a run is ever implicit.
Artifacts are written to a staging directory and renamed into place,
which means an output directory either holds a complete run or does not
exist.
"""

from __future__ import annotations

import hashlib
import json
import os
import shutil
import tempfile
import time
from dataclasses import dataclass, field

from .ensemble_stats import format_table
from .errors import ConfigurationError
from .experiments import (
    ExperimentResult,
    NonlinearitySpec,
    SolverConfig,
    get_experiment,
    grid_from_record,
    measure_from_spec,
)
from .random_fields import export_ensemble

_TOP_KEYS = {"experiment", "grid", "measure", "nonlinearity", "solver",
             "n_members", "seed", "out"}


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


@dataclass
class RunConfig:
    """A fully resolved run description; construct via from_dict or
    from_file so defaults are merged and everything validates."""

    experiment: str
    grid: dict
    measure: dict
    nonlinearity: dict
    solver: dict
    n_members: int
    seed: int
    out: str | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigurationError("config must be a mapping")
        extra = set(data) - _TOP_KEYS
        if extra:
            raise ConfigurationError(f"unknown config keys: {sorted(extra)}")
        name = data.get("experiment")
        if not isinstance(name, str):
            raise ConfigurationError("config needs an 'experiment' name")
        exp = get_experiment(name)
        merged = _deep_merge(exp.default_config(), data)
        try:
            n_members = int(merged["n_members"])
            seed = int(merged["seed"])
        except (TypeError, ValueError):
            raise ConfigurationError("n_members and seed must be integers")
        if n_members < 1:
            raise ConfigurationError(f"n_members must be >= 1, got {n_members}")
        cfg = cls(experiment=name, grid=merged["grid"],
                  measure=merged["measure"],
                  nonlinearity=merged["nonlinearity"],
                  solver=merged["solver"], n_members=n_members, seed=seed,
                  out=merged.get("out"))
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}")
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config {path} is not valid JSON: {exc}")
        return cls.from_dict(data)

    def validate(self):
        """Build every referenced spec once; raises on the first bad one."""
        grid = grid_from_record(self.grid)
        measure_from_spec(grid, self.measure)
        NonlinearitySpec.from_record(self.nonlinearity)
        SolverConfig.from_record(self.solver)

    def to_dict(self) -> dict:
        return {"experiment": self.experiment, "grid": self.grid,
                "measure": self.measure, "nonlinearity": self.nonlinearity,
                "solver": self.solver, "n_members": self.n_members,
                "seed": self.seed, "out": self.out}


@dataclass
class RunManifest:
    """Everything needed to reproduce and audit a run: the full config
    echo, per-member seeds, check outcomes, and a sha256 per emitted
    table (wall clock is informational and excluded from any
    byte-for-byte comparison)."""

    experiment: str
    version: str
    config: dict
    workers: int
    wall_clock_s: float
    member_seeds: list
    flagged_members: list
    checks: list
    tables: dict = field(default_factory=dict)
    field_files: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def to_dict(self) -> dict:
        return {"experiment": self.experiment, "version": self.version,
                "config": self.config, "workers": self.workers,
                "wall_clock_s": self.wall_clock_s,
                "member_seeds": self.member_seeds,
                "flagged_members": self.flagged_members,
                "checks": self.checks, "tables": self.tables,
                "field_files": self.field_files}

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "RunManifest":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigurationError(f"cannot read manifest {path}: {exc}")
        except json.JSONDecodeError as exc:
            raise ConfigurationError(
                f"manifest {path} is not valid JSON: {exc}")
        try:
            return cls(experiment=data["experiment"],
                       version=data["version"], config=data["config"],
                       workers=data["workers"],
                       wall_clock_s=data["wall_clock_s"],
                       member_seeds=data["member_seeds"],
                       flagged_members=data["flagged_members"],
                       checks=data["checks"], tables=data["tables"],
                       field_files=data.get("field_files", {}))
        except KeyError as exc:
            raise ConfigurationError(f"manifest {path} missing field {exc}")


def _table_text(result: ExperimentResult, name: str) -> str:
    header, rows = result.tables[name]
    return format_table(header, rows)


def run_experiment(config: RunConfig, workers: int = 1,
                   out=None) -> tuple:
    """Execute a validated config; returns (RunManifest, ExperimentResult)
    and, when an output directory is set, writes the artifact set there
    atomically."""
    from fracflow import __version__

    if workers < 1:
        raise ConfigurationError(f"workers must be >= 1, got {workers}")
    out = config.out if out is None else out
    # fail on an occupied target before burning compute, not after
    if out is not None and os.path.exists(out):
        raise ConfigurationError(
            f"output directory {os.path.abspath(str(out))} already exists; "
            "refusing to overwrite")
    t0 = time.perf_counter()
    result = get_experiment(config.experiment).fn(config.to_dict(), workers)
    wall = time.perf_counter() - t0
    tables = {name: hashlib.sha256(_table_text(result, name).encode())
              .hexdigest() for name in sorted(result.tables)}
    manifest = RunManifest(
        experiment=config.experiment,
        version=__version__,
        config=config.to_dict(),
        workers=workers,
        wall_clock_s=wall,
        member_seeds=[list(s) for s in result.member_seeds],
        flagged_members=[{"member": int(i), "seed": list(s), "error": msg}
                         for i, s, msg in result.flagged],
        checks=[{"name": c.name, "passed": bool(c.passed),
                 "detail": c.detail} for c in result.checks],
        tables=tables,
    )
    if out is not None:
        _write_artifacts(str(out), manifest, result)
    return manifest, result


def _write_artifacts(out: str, manifest: RunManifest,
                     result: ExperimentResult):
    out = os.path.abspath(out)
    if os.path.exists(out):
        raise ConfigurationError(
            f"output directory {out} already exists; refusing to overwrite")
    parent = os.path.dirname(out)
    os.makedirs(parent, exist_ok=True)
    staging = tempfile.mkdtemp(prefix=".staging-", dir=parent)
    try:
        for name in sorted(result.tables):
            with open(os.path.join(staging, f"{name}.tsv"), "w") as fh:
                fh.write(_table_text(result, name))
        for name in sorted(result.fields):
            paths = export_ensemble(result.fields[name],
                                    os.path.join(staging, name))
            manifest.field_files[name] = [os.path.basename(p) for p in paths]
        manifest.save(os.path.join(staging, "manifest.json"))
        os.rename(staging, out)
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise


def replay_run(manifest_path, workers: int = 1, out=None) -> tuple:
    """Re-execute a run from its manifest echo.

    Returns (manifest, result, matches) where matches reports, per
    table, whether the replayed sha256 equals the recorded one; with the
    same config and seed these must all be True for any worker count.
    """
    original = RunManifest.load(manifest_path)
    config_dict = dict(original.config)
    config_dict["out"] = None
    config = RunConfig.from_dict(config_dict)
    manifest, result = run_experiment(config, workers=workers, out=out)
    matches = {name: manifest.tables.get(name) == sha
               for name, sha in original.tables.items()}
    return manifest, result, matches
