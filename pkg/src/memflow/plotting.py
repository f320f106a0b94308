"""Static plots from completed run directories.

Reads the CSV artifacts written by a run (step log and state dumps) and
emits three PNG figures: free energy with the dissipation overlay, density
profiles at the dumped times, and the conserved vacancy mass.  Output is
deterministic: fixed figure geometry, no timestamps.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

__all__ = ["plot_run"]


def _read_csv(path: Path) -> dict[str, list[float]]:
    with open(path) as f:
        rows = list(csv.DictReader(f))
    if not rows:
        raise ValueError(f"{path} has no data rows")
    return {key: [float(r[key]) for r in rows] for key in rows[0]}


def plot_run(run_dir) -> list[Path]:
    """Render energy.png, profiles.png and mass.png for a run directory.

    Raises FileNotFoundError when the step log is missing.
    """
    run_dir = Path(run_dir)
    log_path = run_dir / "step_log.csv"
    if not log_path.is_file():
        raise FileNotFoundError(f"{log_path} is missing; not a run directory?")
    log = _read_csv(log_path)
    written = []

    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=130)
    ax.plot(log["t"], log["E"], color="tab:blue", label="free energy E(t)")
    ax.set_xlabel("t")
    ax.set_ylabel("E", color="tab:blue")
    ax2 = ax.twinx()
    ax2.plot(log["t"], log["dissipation"], color="tab:red", alpha=0.7,
             label="dissipation")
    ax2.set_ylabel("dissipation", color="tab:red")
    ax.set_title("free energy and dissipation")
    fig.tight_layout()
    out = run_dir / "energy.png"
    fig.savefig(out)
    plt.close(fig)
    written.append(out)

    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=130)
    ax.plot(log["t"], log["mass_D"], color="tab:green")
    ax.set_xlabel("t")
    ax.set_ylabel("vacancy mass")
    ax.set_title("conserved vacancy mass")
    fig.tight_layout()
    out = run_dir / "mass.png"
    fig.savefig(out)
    plt.close(fig)
    written.append(out)

    dumps = sorted(run_dir.glob("state_t*.csv"),
                   key=lambda p: float(p.stem[7:]))
    if dumps:
        sample = _read_csv(dumps[0])
        out = run_dir / "profiles.png"
        if "y" in sample:
            _plot_profiles_2d(dumps[-1], out)
        else:
            _plot_profiles_1d(dumps, out)
        written.append(out)
    return written


def _plot_profiles_1d(dumps: list[Path], out: Path) -> None:
    fig, axes = plt.subplots(1, 3, figsize=(11.0, 3.6), dpi=130, sharex=True)
    for path in dumps:
        data = _read_csv(path)
        label = f"t = {path.stem[7:]}"
        for axis, key in zip(axes, ("n", "p", "D")):
            axis.plot(data["x"], data[key], label=label)
    for axis, key in zip(axes, ("n", "p", "D")):
        axis.set_xlabel("x")
        axis.set_ylabel(key)
    axes[0].legend(fontsize=7)
    fig.suptitle("density profiles at dump times")
    fig.tight_layout()
    fig.savefig(out)
    plt.close(fig)


def _plot_profiles_2d(dump: Path, out: Path) -> None:
    import numpy as np

    data = _read_csv(dump)
    x = np.array(data["x"])
    y = np.array(data["y"])
    xs, ys = np.unique(x), np.unique(y)
    fig, axes = plt.subplots(1, 3, figsize=(12.0, 3.4), dpi=130)
    for axis, key in zip(axes, ("n", "p", "D")):
        grid = np.full((ys.size, xs.size), np.nan)
        ix = np.searchsorted(xs, x)
        iy = np.searchsorted(ys, y)
        grid[iy, ix] = np.array(data[key])
        im = axis.pcolormesh(xs, ys, grid, shading="nearest")
        axis.set_xlabel("x")
        axis.set_ylabel("y")
        axis.set_title(key)
        fig.colorbar(im, ax=axis, shrink=0.85)
    fig.suptitle(f"densities at t = {dump.stem[7:]}")
    fig.tight_layout()
    fig.savefig(out)
    plt.close(fig)
