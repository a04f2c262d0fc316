"""Figures rendered from the CSV files only.

PNG metadata (software tag, timestamps) is stripped so the same CSV input
produces byte-identical images.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .compare import load_run, read_aoi, seed_curves  # noqa: E402
from .errors import SchemaError  # noqa: E402

_PNG_META = {"Software": None}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="png", dpi=100, metadata=_PNG_META)
    plt.close(fig)
    return path


def reward_band(run_dir) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(epochs, mean, sd)`` across seeds; one seed gives ``sd == 0``."""
    curves = seed_curves(load_run(run_dir))
    return np.arange(curves.shape[1]), np.nanmean(curves, axis=0), np.nanstd(curves, axis=0)


def plot_rewards(run_dirs, out_path, labels=None) -> Path:
    run_dirs = list(run_dirs)
    labels = labels or [Path(d).name for d in run_dirs]
    fig, ax = plt.subplots(figsize=(7, 4))
    for run_dir, label in zip(run_dirs, labels):
        x, mean, sd = reward_band(run_dir)
        ax.plot(x, mean, label=label, linewidth=1.2)
        ax.fill_between(x, mean - sd, mean + sd, alpha=0.25)
    ax.set_xlabel("epoch")
    ax.set_ylabel("average reward per epoch")
    ax.legend(loc="lower right")
    ax.grid(alpha=0.3)
    return _save(fig, out_path)


def aoi_trace(run_dir, seed: int | None = None, start: int = 0, length: int = 500) -> dict[str, np.ndarray]:
    run_dir = Path(run_dir)
    if seed is None:
        seeds = sorted(int(p.name.split("_", 1)[1]) for p in run_dir.glob("seed_*"))
        if not seeds:
            raise SchemaError(f"{run_dir} contains no seed_* results")
        seed = seeds[0]
    cols = read_aoi(run_dir / f"seed_{seed}" / "aoi.csv")
    taus = {k: v for k, v in cols.items() if k.startswith("tau_")}
    if not taus:
        raise SchemaError(f"{run_dir}: aoi.csv has no tau_* columns")
    window = slice(start, start + length)
    out = {"slot": cols["slot"][window]}
    out.update({k: v[window] for k, v in taus.items()})
    return out


def plot_aoi(run_dir, out_path, seed: int | None = None, start: int = 0, length: int = 500) -> Path:
    trace = aoi_trace(run_dir, seed, start, length)
    fig, ax = plt.subplots(figsize=(7, 3))
    for name, values in trace.items():
        if name != "slot":
            ax.step(trace["slot"], values, where="post", label=name, linewidth=1.0)
    ax.set_xlabel("slot n")
    ax.set_ylabel("policy AoI")
    ax.legend(loc="upper right")
    ax.grid(alpha=0.3)
    return _save(fig, out_path)
