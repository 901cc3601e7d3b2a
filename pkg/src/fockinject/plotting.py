"""Plot emitter: CSV in, SVG (or gnuplot data + script) out. No recomputation."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from pathlib import Path

# header -> default (x, y, series) columns for the artifacts the runner writes
DEFAULT_AXES = {
    ("variant", "stage", "gate_count", "kind", "rank"): ("gate_count", "rank", "variant"),
    ("variant", "trial", "rank", "sigma_max"): ("trial", "rank", "variant"),
    ("layers", "trial", "purity", "worst_case_bound", "haar_bound"): ("trial", "purity", "layers"),
    ("modes", "photons", "draw", "collision_probability", "bound"): ("draw", "collision_probability", "modes"),
    ("s", "method", "value", "std_error", "bias_corrected"): (None, "value", "method"),
    ("n", "trial", "exact_re", "exact_im", "gurvits_re", "gurvits_im", "std_error", "abs_error"):
        ("n", "abs_error", None),
}

SVG_SALT = "fockinject"


class PlotError(Exception):
    """CSV missing, unreadable, or lacking the requested columns."""


@dataclass
class Series:
    label: str
    x: list[float]
    y: list[float]


def read_table(path) -> tuple[list[str], list[dict[str, str]]]:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise PlotError(f"cannot read {path}: {exc}") from exc
    if not rows:
        return [], []
    header = rows[0]
    return header, [dict(zip(header, r)) for r in rows[1:] if r]


def _number(text: str, col: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise PlotError(f"column {col!r} holds non-numeric value {text!r}") from exc


def collect_series(path, x: str | None = None, y: str | None = None,
                   series: str | None = None) -> tuple[str, str, list[Series]]:
    """Resolve axes against the header and split rows into series."""
    header, rows = read_table(path)
    if not header:
        return x or "", y or "", []
    if y is None:
        if tuple(header) not in DEFAULT_AXES:
            raise PlotError(f"unrecognised header {header}; pass --x/--y explicitly")
        dx, y, dseries = DEFAULT_AXES[tuple(header)]
        x = x if x is not None else dx
        series = series if series is not None else dseries
    for col in (x, y, series):
        if col is not None and col not in header:
            raise PlotError(f"column {col!r} missing from {path} (header {header})")
    groups: dict[str, Series] = {}
    for i, row in enumerate(rows):
        label = row[series] if series else y
        s = groups.setdefault(label, Series(label, [], []))
        s.x.append(_number(row[x], x) if x else float(i))
        s.y.append(_number(row[y], y))
    return x or "row", y, list(groups.values())


def write_svg(path, xlabel: str, ylabel: str, series: list[Series]) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = SVG_SALT
    fig, ax = plt.subplots(figsize=(6, 4))
    for s in series:
        ax.plot(s.x, s.y, marker="o", markersize=3, linewidth=1, label=s.label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if series:
        ax.legend()
    fig.tight_layout()
    tmp = Path(str(path) + ".tmp")
    fig.savefig(tmp, format="svg", metadata={"Date": None})
    plt.close(fig)
    os.replace(tmp, path)


def write_gnuplot(path, xlabel: str, ylabel: str, series: list[Series]) -> tuple[Path, Path]:
    """Writes ``<stem>.dat`` (one indexed block per series) and ``<stem>.gp``."""
    base = Path(path).with_suffix("")
    dat, script = base.with_suffix(".dat"), base.with_suffix(".gp")
    blocks = []
    for s in series:
        lines = [f"# {s.label}"] + [f"{repr(a)} {repr(b)}" for a, b in zip(s.x, s.y)]
        blocks.append("\n".join(lines))
    dat.write_text("\n\n\n".join(blocks) + "\n", encoding="utf-8")
    plots = ", ".join(
        f"'{dat.name}' index {i} with linespoints title '{s.label}'" for i, s in enumerate(series)
    )
    body = [
        "set terminal svg",
        f"set output '{base.with_suffix('.svg').name}'",
        f"set xlabel '{xlabel}'",
        f"set ylabel '{ylabel}'",
        f"plot {plots}" if plots else "plot [0:1] [0:1] NaN notitle",
    ]
    script.write_text("\n".join(body) + "\n", encoding="utf-8")
    return dat, script
