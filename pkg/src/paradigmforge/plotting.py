"""Figure rendering for reports and learning curves.

SVG output is byte-deterministic: fixed hash salt, no embedded date, text
kept as text elements (so tests and humans can grep curve labels).
"""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .paradigms import PHENOMENON_BY_PARADIGM  # noqa: E402

CHANCE_LEVEL = 50.0

matplotlib.rcParams["svg.hashsalt"] = "paradigmforge"
matplotlib.rcParams["svg.fonttype"] = "none"


class PlottingError(RuntimeError):
    pass


def _save_deterministic(fig, path: Path) -> None:
    if path.suffix == ".svg":
        fig.savefig(path, format="svg", metadata={"Date": None})
    else:
        fig.savefig(path)
    plt.close(fig)


def _read_series(csv_paths) -> dict[str, list[tuple[int, float]]]:
    """paradigm -> [(step, accuracy)] merged from one or more series CSVs."""
    series: dict[str, list[tuple[int, float]]] = defaultdict(list)
    for path in csv_paths:
        text = Path(path).read_text(encoding="utf-8")
        reader = csv.DictReader(io.StringIO(text))
        required = {"paradigm", "accuracy", "checkpoint_step"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise PlottingError(f"{path}: not a series CSV (needs {sorted(required)})")
        for lineno, row in enumerate(reader, start=2):
            try:
                series[row["paradigm"]].append(
                    (int(row["checkpoint_step"]), float(row["accuracy"]))
                )
            except (KeyError, ValueError) as exc:
                raise PlottingError(f"{path}:{lineno}: malformed row: {exc}") from exc
    for points in series.values():
        points.sort()
    return dict(series)


def plot_curves(csv_paths, out_dir: str | Path, group_by_phenomenon: bool = True) -> list[Path]:
    """One SVG per phenomenon group: accuracy vs training step, chance line.

    Output is a pure function of the input CSVs. Paradigms without a known
    phenomenon label group under "other".
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    series = _read_series(csv_paths)
    if not series:
        raise PlottingError("series CSVs contain no rows")

    groups: dict[str, list[str]] = defaultdict(list)
    for paradigm in sorted(series):
        if group_by_phenomenon:
            groups[PHENOMENON_BY_PARADIGM.get(paradigm, "other")].append(paradigm)
        else:
            groups["all"].append(paradigm)

    written: list[Path] = []
    for group in sorted(groups):
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for paradigm in groups[group]:
            points = series[paradigm]
            ax.plot(
                [s for s, _ in points],
                [a for _, a in points],
                marker="o",
                markersize=3,
                label=paradigm,
            )
        ax.axhline(CHANCE_LEVEL, color="gray", linestyle="--", linewidth=1, label="chance")
        ax.set_xlabel("training step")
        ax.set_ylabel("accuracy (%)")
        ax.set_ylim(0, 100)
        ax.set_title(group.replace("_", " "))
        ax.legend(fontsize=7, loc="best")
        fig.tight_layout()
        path = out_dir / f"curve_{group}.svg"
        _save_deterministic(fig, path)
        written.append(path)
    return written


def plot_comparison(
    accuracies: dict[str, dict[str, float]],
    out_path: str | Path,
    title: str = "per-paradigm accuracy",
) -> Path:
    """Grouped bar figure: one bar cluster per paradigm, one bar per arm."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    arms = list(accuracies)
    if not arms:
        raise PlottingError("nothing to plot")
    paradigms = sorted({p for by_arm in accuracies.values() for p in by_arm})
    fig, ax = plt.subplots(figsize=(max(7, 1.1 * len(paradigms)), 4.5))
    width = 0.8 / len(arms)
    for i, arm in enumerate(arms):
        xs = [j + i * width for j in range(len(paradigms))]
        ys = [accuracies[arm].get(p, 0.0) for p in paradigms]
        ax.bar(xs, ys, width=width, label=arm)
    ax.axhline(CHANCE_LEVEL, color="gray", linestyle="--", linewidth=1)
    ax.set_xticks([j + 0.4 - width / 2 for j in range(len(paradigms))])
    ax.set_xticklabels(paradigms, rotation=30, ha="right", fontsize=7)
    ax.set_ylabel("accuracy (%)")
    ax.set_ylim(0, 100)
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save_deterministic(fig, out_path)
    return out_path
