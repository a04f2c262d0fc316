"""Read run directories back from disk and compare two runs seed by seed."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigMismatchError, SchemaError
from .runner import AOI_SCHEMA, METRICS_SCHEMA

REQUIRED_METRICS = ("epoch", "mean_reward")


def read_versioned_csv(path, schema: str, required=()) -> dict[str, np.ndarray]:
    """Columns of a CSV whose first row is ``schema,<version>``; empty cells become NaN."""
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"{path} does not exist")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2 or len(rows[0]) != 2 or rows[0][0] != "schema":
        raise SchemaError(f"{path}: missing schema header row")
    if rows[0][1] != schema:
        raise SchemaError(f"{path}: unsupported schema {rows[0][1]!r}, expected {schema!r}")
    header = rows[1]
    missing = [c for c in required if c not in header]
    if missing:
        raise SchemaError(f"{path}: missing columns {missing}")
    body = rows[2:]
    out = {}
    for k, name in enumerate(header):
        out[name] = np.array([float(r[k]) if r[k] != "" else math.nan for r in body], dtype=np.float64)
    return out


def read_metrics(path) -> dict[str, np.ndarray]:
    return read_versioned_csv(path, METRICS_SCHEMA, REQUIRED_METRICS)


def read_aoi(path) -> dict[str, np.ndarray]:
    return read_versioned_csv(path, AOI_SCHEMA, ("slot",))


@dataclass
class RunData:
    path: Path
    config: dict
    metrics: dict[int, dict[str, np.ndarray]]   # seed -> columns

    @property
    def seeds(self) -> list[int]:
        return sorted(self.metrics)


def load_run(directory) -> RunData:
    directory = Path(directory)
    cfg_path = directory / "config.yaml"
    if not cfg_path.exists():
        raise SchemaError(f"{directory} has no config.yaml")
    config = yaml.safe_load(cfg_path.read_text(encoding="utf-8")) or {}
    metrics = {}
    for seed_dir in sorted(directory.glob("seed_*")):
        metrics[int(seed_dir.name.split("_", 1)[1])] = read_metrics(seed_dir / "metrics.csv")
    if not metrics:
        raise SchemaError(f"{directory} contains no seed_* results")
    return RunData(directory, config, metrics)


def config_diff(a: dict, b: dict, keys=("env", "epochs")) -> dict:
    """Differences in the parts of two configs that must agree for a comparison."""
    diff = {}

    def walk(prefix, x, y):
        if isinstance(x, dict) and isinstance(y, dict):
            for k in sorted(set(x) | set(y)):
                walk(f"{prefix}.{k}", x.get(k), y.get(k))
        elif x != y:
            diff[prefix] = (x, y)

    for key in keys:
        walk(key, a.get(key), b.get(key))
    return diff


def final_window(num_epochs: int, fraction: float = 0.1) -> slice:
    width = max(1, int(round(num_epochs * fraction)))
    return slice(num_epochs - width, num_epochs)


def seed_curves(run: RunData, column: str = "mean_reward") -> np.ndarray:
    """``(seeds, epochs)`` array; seeds that aborted early are padded with NaN."""
    length = max(len(m[column]) for m in run.metrics.values())
    out = np.full((len(run.seeds), length), np.nan)
    for k, seed in enumerate(run.seeds):
        values = run.metrics[seed][column]
        out[k, : len(values)] = values
    return out


@dataclass
class CompareReport:
    seeds: list[int]
    mean_a: np.ndarray
    sd_a: np.ndarray
    mean_b: np.ndarray
    sd_b: np.ndarray
    final_a: dict[int, float]
    final_b: dict[int, float]
    window: slice

    @property
    def final_mean_a(self) -> float:
        return float(np.mean(list(self.final_a.values())))

    @property
    def final_mean_b(self) -> float:
        return float(np.mean(list(self.final_b.values())))

    @property
    def gap(self) -> float:
        return self.final_mean_a - self.final_mean_b

    @property
    def wins(self) -> int:
        """Seeds where run A's final-window mean is at least run B's."""
        return sum(self.final_a[s] >= self.final_b[s] for s in self.seeds)

    @property
    def win_fraction(self) -> float:
        return self.wins / len(self.seeds) if self.seeds else math.nan

    def summary(self, name_a: str = "A", name_b: str = "B") -> str:
        lines = [f"final window: epochs {self.window.start}..{self.window.stop - 1}",
                 f"{'seed':>6} {name_a:>12} {name_b:>12}"]
        for s in self.seeds:
            lines.append(f"{s:>6} {self.final_a[s]:>12.5f} {self.final_b[s]:>12.5f}")
        lines.append(f"{'mean':>6} {self.final_mean_a:>12.5f} {self.final_mean_b:>12.5f}")
        lines.append(f"gap ({name_a} - {name_b}): {self.gap:+.5f}")
        lines.append(f"{name_a} >= {name_b} in {self.wins}/{len(self.seeds)} seeds "
                     f"(win fraction {self.win_fraction:.2f})")
        return "\n".join(lines)


def compare_runs(a: RunData, b: RunData, window_fraction: float = 0.1, check_config: bool = True) -> CompareReport:
    if check_config:
        diff = config_diff(a.config, b.config)
        if diff:
            raise ConfigMismatchError(diff)
    seeds = sorted(set(a.seeds) & set(b.seeds))
    if not seeds:
        raise ConfigMismatchError({"seeds": (a.seeds, b.seeds)})
    curves_a = seed_curves(RunData(a.path, a.config, {s: a.metrics[s] for s in seeds}))
    curves_b = seed_curves(RunData(b.path, b.config, {s: b.metrics[s] for s in seeds}))
    epochs = min(curves_a.shape[1], curves_b.shape[1])
    if epochs == 0:
        raise SchemaError("runs contain no epochs to compare")
    curves_a, curves_b = curves_a[:, :epochs], curves_b[:, :epochs]
    window = final_window(epochs, window_fraction)
    return CompareReport(
        seeds,
        np.nanmean(curves_a, axis=0),
        np.nanstd(curves_a, axis=0),
        np.nanmean(curves_b, axis=0),
        np.nanstd(curves_b, axis=0),
        {s: float(np.nanmean(curves_a[k, window])) for k, s in enumerate(seeds)},
        {s: float(np.nanmean(curves_b[k, window])) for k, s in enumerate(seeds)},
        window,
    )


def compare(dir_a, dir_b, window_fraction: float = 0.1, check_config: bool = True) -> CompareReport:
    return compare_runs(load_run(dir_a), load_run(dir_b), window_fraction, check_config)
