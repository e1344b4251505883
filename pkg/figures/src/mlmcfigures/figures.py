"""Convergence and cost figures from the engine's CSV outputs.

Two plots:

  * plot_level_stats: a 2x2 panel (cost per sample, variance, |mean|,
    kurtosis against the level) from per-level statistics CSVs, log-scale
    vertical axes, with reference-slope guide lines O(l 2^l), O(2^-3l/2),
    O(2^-l), O(2^l/2) and fitted-slope annotations per series;
  * plot_cost_sweep: cost * tol^2 against the normalized tolerance on log-log
    axes with |log tol| and |log tol|^3 guide curves, plus an absolute-error
    scatter panel against the reference value.

Rendering is a pure function of the CSV contents: a fixed style, pinned
hash salt, and stripped metadata make repeated runs byte-identical.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

LEVEL_COLUMNS = ("level", "sample_cost", "mean", "abs_mean", "var",
                 "kurtosis", "n")
SWEEP_COLUMNS = ("tol", "P", "cost", "L", "bias")

_STYLE = {
    "figure.figsize": (9.0, 7.0),
    "figure.dpi": 110,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "mlmc-figures",
    "legend.fontsize": 8,
}
_COLORS = ("tab:blue", "tab:red", "tab:green", "tab:purple")
_MARKERS = ("o", "s", "^", "d")


class FigureDataError(ValueError):
    """Input CSV is missing, empty, or lacks a required column."""


@dataclass
class FigureSpec:
    """Inputs of one figure: labelled CSVs, output path, axis ranges."""

    inputs: dict[str, str]          # series label -> CSV path
    output: str
    normalization: str | None = None  # sidecar file with the reference value
    level_range: tuple[int, int] | None = None
    guide_anchor: int = 0           # series point index guides are pinned to


def read_table(path: str, required: tuple[str, ...]) -> dict[str, np.ndarray]:
    """CSV with a header row -> dict of float columns; validates columns."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise FigureDataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise FigureDataError(f"{path} has no data rows")
    missing = [c for c in required if c not in rows[0]]
    if missing:
        raise FigureDataError(f"{path} lacks required columns {missing}")
    try:
        return {c: np.array([float(r[c]) for r in rows]) for c in required}
    except ValueError as exc:
        raise FigureDataError(f"{path} has a non-numeric entry: {exc}") \
            from exc


def read_normalization(path: str) -> float:
    """Reference value from a sidecar file holding one number."""
    try:
        text = Path(path).read_text(encoding="utf-8").strip()
        value = float(text.split()[0])
    except (OSError, ValueError, IndexError) as exc:
        raise FigureDataError(
            f"normalization sidecar {path} unreadable: {exc}") from exc
    if value == 0.0:
        raise FigureDataError("normalization value must be nonzero")
    return value


def fitted_slope(x: np.ndarray, y: np.ndarray) -> float:
    """Least-squares slope of log2(y) against x (levels)."""
    good = y > 0
    if good.sum() < 2:
        raise FigureDataError("need >= 2 positive values for a slope fit")
    return float(np.polyfit(x[good], np.log2(y[good]), 1)[0])


def _guide(ax, x, y_anchor, shape, label):
    """Dashed guide curve through the anchor point with the given shape."""
    ref = shape(x) / shape(x[0])
    ax.plot(x, y_anchor * ref, "k--", linewidth=0.9, alpha=0.6, label=label)


def _finish(fig, output: str):
    out = Path(output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fmt = out.suffix.lstrip(".") or "png"
    meta = {"Date": None} if fmt == "svg" else {"Software": None}
    fig.savefig(out, format=fmt, metadata=meta)
    plt.close(fig)
    return str(out)


def plot_level_stats(spec: FigureSpec) -> str:
    """2x2 per-level statistics panels for one or more series."""
    tables = {label: read_table(path, LEVEL_COLUMNS)
              for label, path in spec.inputs.items()}
    if spec.level_range is not None:
        lo, hi = spec.level_range
        for label, t in tables.items():
            keep = (t["level"] >= lo) & (t["level"] <= hi)
            tables[label] = {c: v[keep] for c, v in t.items()}
            if not keep.any():
                raise FigureDataError(f"{label}: no rows in level range")

    panels = [
        ("sample_cost", "cost per sample",
         lambda l: (l + 1) * 2.0**l, r"$O(\ell\,2^\ell)$"),
        ("var", "variance",
         lambda l: 2.0 ** (-1.5 * l), r"$O(2^{-3\ell/2})$"),
        ("abs_mean", "|mean|",
         lambda l: 2.0**-l, r"$O(2^{-\ell})$"),
        ("kurtosis", "kurtosis",
         lambda l: 2.0 ** (0.5 * l), r"$O(2^{\ell/2})$"),
    ]
    extra_guides = {"var": (lambda l: 2.0**-l, r"$O(2^{-\ell})$")}

    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(2, 2)
        for ax, (column, title, shape, guide_label) in zip(axes.flat, panels):
            for (label, t), color, marker in zip(tables.items(), _COLORS,
                                                 _MARKERS):
                x, y = t["level"], t[column]
                slope = fitted_slope(x, y)
                ax.plot(x, y, color=color, marker=marker, markersize=4,
                        label=f"{label} (slope {slope:+.2f})")
            anchor_t = next(iter(tables.values()))
            x = anchor_t["level"]
            y0 = anchor_t[column][spec.guide_anchor]
            _guide(ax, x, y0, shape, guide_label)
            if column in extra_guides:
                _guide(ax, x, y0, *extra_guides[column])
            ax.set_yscale("log", base=2)
            ax.set_xlabel(r"level $\ell$")
            ax.set_title(title)
            ax.legend()
        fig.tight_layout()
        return _finish(fig, spec.output)


def plot_cost_sweep(spec: FigureSpec) -> str:
    """cost * tol^2 against normalized tolerance, plus the error panel."""
    if spec.normalization is None:
        raise FigureDataError("cost sweep needs a normalization sidecar")
    ref = read_normalization(spec.normalization)
    tables = {label: read_table(path, SWEEP_COLUMNS)
              for label, path in spec.inputs.items()}

    with plt.rc_context(_STYLE):
        fig, (ax_cost, ax_err) = plt.subplots(
            1, 2, figsize=(_STYLE["figure.figsize"][0], 3.8))
        for (label, t), color, marker in zip(tables.items(), _COLORS,
                                             _MARKERS):
            tol_n = t["tol"] / abs(ref)
            order = np.argsort(tol_n)
            work = t["cost"][order] * t["tol"][order] ** 2
            ax_cost.plot(tol_n[order], work, color=color, marker=marker,
                         markersize=4, label=label)
            err = np.abs(t["P"] - ref)
            ax_err.plot(tol_n, err, linestyle="none", marker=marker,
                        markersize=4, color=color, label=label)
        # guide curves through the tightest-tolerance point of the first series
        t0 = next(iter(tables.values()))
        tol_n = np.sort(t0["tol"] / abs(ref))
        w0 = (t0["cost"] * t0["tol"] ** 2)[np.argmin(t0["tol"])]
        for power, ls in ((1, "--"), (3, ":")):
            shape = np.abs(np.log(tol_n)) ** power
            shape = shape / shape[0]
            ax_cost.plot(tol_n, w0 * shape, f"k{ls}", linewidth=0.9,
                         alpha=0.6,
                         label=rf"$O(|\log \varepsilon|^{power})$")
        ax_cost.set_xscale("log")
        ax_cost.set_yscale("log")
        ax_cost.set_xlabel(r"normalized tolerance $\varepsilon$")
        ax_cost.set_ylabel(r"cost $\times\ \varepsilon^2$")
        ax_cost.legend()
        grid = np.array(sorted(set(np.concatenate(
            [t["tol"] / abs(ref) for t in tables.values()]))))
        ax_err.plot(grid, 3.0 * grid * abs(ref), "k--", linewidth=0.9,
                    alpha=0.6, label=r"$3\varepsilon$")
        ax_err.set_xscale("log")
        ax_err.set_yscale("log")
        ax_err.set_xlabel(r"normalized tolerance $\varepsilon$")
        ax_err.set_ylabel("|estimate - reference|")
        ax_err.legend()
        fig.tight_layout()
        return _finish(fig, spec.output)
