"""Experiment sweeps: run a grid of configurations and write CSV summaries.

An experiment is described by a JSON document::

    {
      "base": {"n_users": 10, "horizon": 1000.0, ...},   # SimConfig fields
      "sweep": [120, 100, 90, 80, 70, 60, 40, 20],      # interarrival mu, s
      "mechanisms": ["ps", "market_ps"],
      "behaviors": ["obedient", "strategic"],
      "cells": [["ps", "obedient"], ...],               # optional; replaces
                                                        # mechanisms x behaviors
      "seeds": [1, 2, 3],
      "output": "out/"
    }

A mechanism is ``ps``, ``market_ps``, ``fixed_price`` (price from ``base``)
or ``fixed_price:<price>``. Unknown keys anywhere are rejected.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .core import BEHAVIORS, FIXED_PRICE, MARKET_PS, MARKET_STRATEGIC, OBEDIENT, PS, STRATEGIC
from .core import ConfigError, SimConfig
from .engine import run
from .metrics import efficiency, mean_utility_per_host

SWEEP_MUS = (120.0, 100.0, 90.0, 80.0, 70.0, 60.0, 40.0, 20.0)
SWEEP_CELLS = ((PS, OBEDIENT), (PS, STRATEGIC), (MARKET_PS, MARKET_STRATEGIC))
JOBS_ENV = "MARKETSIM_JOBS"

RUN_COLUMNS = (
    "mechanism", "behavior", "mu_s", "arrival_rate_per_user", "seed",
    "mean_utility_per_host", "efficiency", "tasks_arrived", "tasks_completed",
    "tasks_expired", "total_spend", "final_balance_sum",
)
AGG_METRICS = (
    "mean_utility_per_host", "efficiency", "tasks_arrived", "tasks_completed",
    "tasks_expired", "total_spend", "final_balance_sum",
)
AGG_COLUMNS = ("mechanism", "behavior", "mu_s", "arrival_rate_per_user", "n_seeds") + tuple(
    f"{m}_{s}" for m in AGG_METRICS for s in ("mean", "std"))


def parse_mechanism(label: str) -> tuple[str, Optional[float]]:
    """``"fixed_price:0.5"`` -> ``("fixed_price", 0.5)``; plain names carry no price."""
    name, sep, price = label.partition(":")
    if name not in (PS, MARKET_PS, FIXED_PRICE):
        raise ConfigError("mechanisms", f"unknown mechanism {label!r}")
    if not sep:
        return name, None
    if name != FIXED_PRICE:
        raise ConfigError("mechanisms", f"only fixed_price takes a price: {label!r}")
    try:
        p = float(price)
    except ValueError:
        raise ConfigError("mechanisms", f"bad price in {label!r}") from None
    if not p >= 0:
        raise ConfigError("mechanisms", f"negative price in {label!r}")
    return name, p


@dataclass
class ExperimentSpec:
    base: SimConfig = field(default_factory=SimConfig)
    sweep: list[float] = field(default_factory=lambda: list(SWEEP_MUS))
    mechanisms: list[str] = field(default_factory=lambda: [PS])
    behaviors: list[str] = field(default_factory=lambda: [OBEDIENT])
    seeds: list[int] = field(default_factory=lambda: [1])
    output: Optional[str] = None
    cells: Optional[list[tuple[str, str]]] = None

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if not self.sweep:
            raise ConfigError("sweep", "needs at least one interarrival mean")
        for mu in self.sweep:
            if isinstance(mu, bool) or not isinstance(mu, (int, float)) or not mu > 0:
                raise ConfigError("sweep", f"interarrival mean must be positive, got {mu!r}")
        if not self.seeds:
            raise ConfigError("seeds", "needs at least one seed")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds", "seeds must be distinct")
        for s in self.seeds:
            if isinstance(s, bool) or not isinstance(s, int) or not 0 <= s < 2**64:
                raise ConfigError("seeds", f"seed must be a 64-bit unsigned integer, got {s!r}")
        for m in self.mechanisms:
            parse_mechanism(m)
        for b in self.behaviors:
            if b not in BEHAVIORS:
                raise ConfigError("behaviors", f"unknown behavior {b!r}")
        for cell in self.grid():
            if len(cell) != 2:
                raise ConfigError("cells", f"cell must be [mechanism, behavior]: {cell!r}")
            parse_mechanism(cell[0])
            if cell[1] not in BEHAVIORS:
                raise ConfigError("cells", f"unknown behavior {cell[1]!r}")

    def grid(self) -> list[tuple[str, str]]:
        if self.cells is not None:
            return [tuple(c) for c in self.cells]
        return [(m, b) for m in self.mechanisms for b in self.behaviors]

    def configs(self) -> list[tuple[tuple, SimConfig]]:
        """Every (key, config) pair, sorted by (mechanism, behavior, mu, seed)."""
        out = []
        for label, behavior in self.grid():
            mech, price = parse_mechanism(label)
            for mu in self.sweep:
                for seed in self.seeds:
                    changes = dict(mechanism=mech, behavior=behavior,
                                   interarrival_mu=float(mu), seed=seed)
                    if price is not None:
                        changes["price"] = price
                    out.append(((label, behavior, float(mu), seed), self.base.with_(**changes)))
        out.sort(key=lambda kc: kc[0])
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        if not isinstance(data, dict):
            raise ConfigError("config", "top level must be a JSON object")
        known = {"base", "sweep", "mechanisms", "behaviors", "cells", "seeds", "output"}
        for key in data:
            if key not in known:
                raise ConfigError(key, "unknown configuration key")
        kwargs = dict(data)
        base = kwargs.pop("base", {})
        if not isinstance(base, dict):
            raise ConfigError("base", "must be an object")
        try:
            kwargs["base"] = SimConfig.from_dict(base)
        except TypeError as exc:
            raise ConfigError("base", str(exc)) from None
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "ExperimentSpec":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON: {exc}") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {
            "base": self.base.to_dict(),
            "sweep": list(self.sweep),
            "mechanisms": list(self.mechanisms),
            "behaviors": list(self.behaviors),
            "cells": None if self.cells is None else [list(c) for c in self.cells],
            "seeds": list(self.seeds),
            "output": self.output,
        }


def load_sweep_spec(n_seeds: int = 30, **base_changes) -> ExperimentSpec:
    """The utility-versus-load sweep: three behavior/mechanism cells over SWEEP_MUS."""
    return ExperimentSpec(
        base=SimConfig(**base_changes),
        sweep=list(SWEEP_MUS),
        mechanisms=sorted({m for m, _ in SWEEP_CELLS}),
        behaviors=sorted({b for _, b in SWEEP_CELLS}),
        cells=[tuple(c) for c in SWEEP_CELLS],
        seeds=list(range(1, n_seeds + 1)),
    )


def run_one(key: tuple, cfg: SimConfig) -> dict:
    """One simulation, reduced to a ``runs.csv`` row."""
    label, behavior, mu, seed = key
    rec = run(cfg)
    return {
        "mechanism": label,
        "behavior": behavior,
        "mu_s": mu,
        "arrival_rate_per_user": 1.0 / mu,
        "seed": seed,
        "mean_utility_per_host": mean_utility_per_host(rec),
        "efficiency": efficiency(rec),
        "tasks_arrived": rec.arrived,
        "tasks_completed": rec.completed,
        "tasks_expired": rec.expired,
        "total_spend": rec.total_spend,
        "final_balance_sum": rec.final_balance_sum,
    }


def _run_star(args):
    return run_one(*args)


def default_jobs() -> int:
    env = os.environ.get(JOBS_ENV)
    if env:
        try:
            jobs = int(env)
        except ValueError:
            raise ConfigError(JOBS_ENV, f"not an integer: {env!r}") from None
        if jobs < 1:
            raise ConfigError(JOBS_ENV, "must be at least 1")
        return jobs
    return os.cpu_count() or 1


def run_rows(spec: ExperimentSpec, jobs: Optional[int] = None, progress=None) -> list[dict]:
    """Run every configuration of ``spec``; rows come back in sorted key order."""
    work = spec.configs()
    jobs = default_jobs() if jobs is None else jobs
    if jobs <= 1 or len(work) <= 1:
        rows = []
        for item in work:
            rows.append(run_one(*item))
            if progress:
                progress(len(rows), len(work))
        return rows
    rows = []
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        for row in pool.map(_run_star, work, chunksize=max(1, len(work) // (4 * jobs))):
            rows.append(row)
            if progress:
                progress(len(rows), len(work))
    return rows


def aggregate(rows: Sequence[dict]) -> list[dict]:
    """Mean and sample standard deviation across seeds per (mechanism, behavior, mu)."""
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault((r["mechanism"], r["behavior"], r["mu_s"]), []).append(r)
    out = []
    for (mech, beh, mu), grp in sorted(groups.items()):
        row = {"mechanism": mech, "behavior": beh, "mu_s": mu,
               "arrival_rate_per_user": 1.0 / mu, "n_seeds": len(grp)}
        for m in AGG_METRICS:
            vals = [float(r[m]) for r in grp]
            row[f"{m}_mean"] = math.fsum(vals) / len(vals)
            row[f"{m}_std"] = statistics.stdev(vals) if len(vals) > 1 else 0.0
        out.append(row)
    return out


def fmt(x) -> str:
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return f"{x:.9g}"
    return str(x)


def to_csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r[c]) for c in columns])
    return buf.getvalue()


@dataclass
class ExperimentResult:
    rows: list[dict]
    agg: list[dict]

    @property
    def runs_csv(self) -> str:
        return to_csv(self.rows, RUN_COLUMNS)

    @property
    def agg_csv(self) -> str:
        return to_csv(self.agg, AGG_COLUMNS)

    def write(self, out_dir: str | os.PathLike) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        runs_path = out / "runs.csv"
        agg_path = out / "agg.csv"
        runs_path.write_text(self.runs_csv)
        agg_path.write_text(self.agg_csv)
        return runs_path, agg_path


def run_experiment(spec: ExperimentSpec, out_dir: Optional[str | os.PathLike] = None,
                   jobs: Optional[int] = None, progress=None) -> ExperimentResult:
    """Run the sweep; write ``runs.csv`` and ``agg.csv`` when an output dir is known."""
    rows = run_rows(spec, jobs, progress)
    result = ExperimentResult(rows, aggregate(rows))
    target = out_dir if out_dir is not None else spec.output
    if target is not None:
        result.write(target)
    return result
