"""Render figures from bornlab CSV logs.

Strictly a downstream consumer: no numeric computation beyond axis
transforms.  Four figure kinds are supported, one per CSV schema:

* ``concentration`` — two panels (mean, variance) of a loss estimate vs the
  shot count, one series per qubit count, with dashed vertical reference
  lines where shots = 2^n.  The variance panel is log-scaled.
* ``variance`` — loss variance vs qubit count: closed-form theory as lines,
  empirical estimates as points with error bars, log-scaled y axis.
* ``profile`` — bodyness weight profiles w(l) vs l per (n, sigma).
* ``training`` — exact-TVD training curves, one series per input CSV.

Identical inputs produce identical image bytes (fixed style, fixed DPI).
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import pandas as pd

FIGURE_KINDS = ("concentration", "variance", "profile", "training")

CONCENTRATION_COLUMNS = [
    "n", "sigma", "depth", "ansatz", "shots", "theory_B", "theory_C",
    "theory_total", "empirical_mean", "empirical_var", "empirical_stderr",
    "draws", "seed",
]
PROFILE_COLUMNS = ["n", "sigma", "l", "weight"]
TRAINING_COLUMNS = ["iter", "loss_estimate", "tvd_exact", "lr", "grad_norm"]

_DPI = 150
_STYLE = {
    "figure.figsize": (7.0, 4.5),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "svg.hashsalt": "bornlab-figures",
}


class SchemaError(ValueError):
    """Input CSV does not match the documented schema."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    csv_paths: tuple[str, ...]
    output_path: str
    logx: bool | None = None  # None = the kind's default
    logy: bool | None = None

    def __post_init__(self) -> None:
        if self.kind not in FIGURE_KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}")
        if not self.csv_paths:
            raise SchemaError("need at least one input CSV")


def _read(path: str, columns: list[str]) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path)
    except Exception as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    if list(frame.columns) != columns:
        raise SchemaError(
            f"{path}: header {list(frame.columns)} does not match {columns}"
        )
    if frame.empty:
        raise SchemaError(f"{path}: no data rows")
    return frame


def _sigma_series_key(frame: pd.DataFrame) -> pd.Series:
    """Group rows into bandwidth series.

    A sigma value repeated across several n forms a constant-sigma series;
    otherwise rows sharing the sigma/n ratio form a scaled series (labels
    like ``sigma=n/4``); leftovers become singleton series.
    """
    sigma = frame["sigma"].astype(float)
    n = frame["n"].astype(float)
    labels = pd.Series(index=frame.index, dtype=object)
    by_value = frame.groupby(sigma)["n"].nunique()
    constant_values = set(by_value[by_value > 1].index)
    ratio = (sigma / n).round(9)
    by_ratio = frame[~sigma.isin(constant_values)].groupby(ratio)["n"].nunique()
    ratio_values = set(by_ratio[by_ratio > 1].index)
    for idx in frame.index:
        s = sigma[idx]
        if s in constant_values:
            labels[idx] = f"sigma={s:g}"
        elif ratio[idx] in ratio_values:
            labels[idx] = f"sigma={ratio[idx]:g}n"
        else:
            labels[idx] = f"sigma={s:g} (n={int(n[idx])})"
    return labels


def build_figure(spec: FigureSpec) -> plt.Figure:
    with plt.rc_context(_STYLE):
        if spec.kind == "concentration":
            return _concentration_figure(spec)
        if spec.kind == "variance":
            return _variance_figure(spec)
        if spec.kind == "profile":
            return _profile_figure(spec)
        return _training_figure(spec)


def _concentration_figure(spec: FigureSpec) -> plt.Figure:
    frames = [_read(p, CONCENTRATION_COLUMNS) for p in spec.csv_paths]
    data = pd.concat(frames, ignore_index=True)
    fig, (ax_mean, ax_var) = plt.subplots(1, 2, figsize=(9.0, 4.0))
    logx = True if spec.logx is None else spec.logx
    logy = True if spec.logy is None else spec.logy
    for n, group in data.groupby("n"):
        group = group.sort_values("shots")
        (line,) = ax_mean.plot(group["shots"], group["empirical_mean"],
                               marker="o", label=f"n={int(n)}")
        ax_var.plot(group["shots"], group["empirical_var"], marker="o",
                    color=line.get_color(), label=f"n={int(n)}")
        for ax in (ax_mean, ax_var):
            ax.axvline(2.0 ** int(n), color=line.get_color(),
                       linestyle="--", linewidth=0.8, alpha=0.7)
    if logx:
        ax_mean.set_xscale("log")
        ax_var.set_xscale("log")
    if logy:
        ax_var.set_yscale("log")
    fixed = data["theory_total"].dropna()
    if len(fixed):
        ax_mean.axhline(float(fixed.iloc[0]), color="k", linestyle=":",
                        linewidth=0.8, label="fixed point")
    ax_mean.set_xlabel("shots")
    ax_mean.set_ylabel("mean loss estimate")
    ax_var.set_xlabel("shots")
    ax_var.set_ylabel("variance of loss estimate")
    ax_mean.legend(fontsize=7)
    fig.tight_layout()
    return fig


def _variance_figure(spec: FigureSpec) -> plt.Figure:
    frames = [_read(p, CONCENTRATION_COLUMNS) for p in spec.csv_paths]
    data = pd.concat(frames, ignore_index=True)
    fig, ax = plt.subplots()
    data = data.assign(series=_sigma_series_key(data))
    for (series, depth), group in data.groupby(["series", "depth"]):
        group = group.sort_values("n")
        label = series if data["depth"].nunique() == 1 else f"{series}, L={depth}"
        theory = group.dropna(subset=["theory_total"])
        color = None
        if len(theory):
            (line,) = ax.plot(theory["n"], theory["theory_total"], "-",
                              label=f"{label} (theory)")
            color = line.get_color()
        ax.errorbar(group["n"], group["empirical_var"],
                    yerr=group["empirical_stderr"].fillna(0.0), fmt="o",
                    capsize=3, color=color, label=f"{label} (empirical)")
    if spec.logx is True:
        ax.set_xscale("log")
    if spec.logy is not False:
        ax.set_yscale("log")
    ax.set_xlabel("qubits n")
    ax.set_ylabel("loss variance over random parameters")
    ax.legend(fontsize=7)
    fig.tight_layout()
    return fig


def _profile_figure(spec: FigureSpec) -> plt.Figure:
    frames = [_read(p, PROFILE_COLUMNS) for p in spec.csv_paths]
    data = pd.concat(frames, ignore_index=True)
    fig, ax = plt.subplots()
    for (n, sigma), group in data.groupby(["n", "sigma"]):
        group = group.sort_values("l")
        ax.plot(group["l"], group["weight"], label=f"n={int(n)}, sigma={sigma:g}")
    if spec.logx is True:
        ax.set_xscale("log")
    if spec.logy is True:
        ax.set_yscale("log")
    ax.set_xlabel("bodyness level l")
    ax.set_ylabel("weight w(l)")
    ax.legend(fontsize=7)
    fig.tight_layout()
    return fig


def _training_figure(spec: FigureSpec) -> plt.Figure:
    fig, ax = plt.subplots()
    for path in spec.csv_paths:
        frame = _read(path, TRAINING_COLUMNS)
        ax.plot(frame["iter"], frame["tvd_exact"], label=Path(path).stem)
    if spec.logx is True:
        ax.set_xscale("log")
    if spec.logy is True:
        ax.set_yscale("log")
    else:
        ax.set_ylim(bottom=0.0)
    ax.set_xlabel("iteration")
    ax.set_ylabel("exact TVD")
    ax.legend(fontsize=7)
    fig.tight_layout()
    return fig


def render(spec: FigureSpec) -> str:
    """Build the figure and write it to the output path."""
    fig = build_figure(spec)
    out = Path(spec.output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=_DPI, metadata={"Software": "render_figures"})
    plt.close(fig)
    return str(out)
