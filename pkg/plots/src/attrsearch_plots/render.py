"""Figure rendering from validated bundles.

Output is reproducible: the Agg backend, a pinned svg hash salt, fixed sizes,
and suppressed date metadata make identical bundles render to identical
bytes (per matplotlib version).  Every figure carries the experiment seed
and config hash in a footer and in the file metadata.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .bundle import BundleError, PlotBundle, read_heatmap, read_series, read_table

FORMATS = ("png", "svg")

plt.rcParams["svg.hashsalt"] = "attrsearch-plots"
plt.rcParams["figure.dpi"] = 100

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]


def _footer(fig, bundle: PlotBundle) -> None:
    fig.text(0.99, 0.01, f"seed={bundle.seed} config={bundle.config_hash}",
             ha="right", va="bottom", fontsize=6, color="#888888")


def _save(fig, path: Path, fmt: str, bundle: PlotBundle) -> None:
    stamp = f"seed={bundle.seed} config={bundle.config_hash}"
    if fmt == "svg":
        metadata = {"Date": None, "Description": stamp}
    else:
        metadata = {"Description": stamp}
    fig.savefig(path, format=fmt, metadata=metadata)
    plt.close(fig)


def render_curves(bundle: PlotBundle, fig_spec: dict, out: Path, fmt: str) -> Path:
    rows = read_series(bundle.root / fig_spec["series"], metric=fig_spec["metric"])
    order = fig_spec.get("samplers") or sorted({r.sampler for r in rows})
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for k, sampler in enumerate(order):
        sub = [r for r in rows if r.sampler == sampler]
        if not sub:
            raise BundleError(f"series has no rows for sampler {sampler!r}")
        x = np.array([r.budget for r in sub])
        mean = np.array([r.mean for r in sub])
        lo = np.array([r.ci_low for r in sub])
        hi = np.array([r.ci_high for r in sub])
        color = _COLORS[k % len(_COLORS)]
        if len(x) > 1:
            ax.plot(x, mean, label=sampler, color=color, marker="o", markersize=3)
            ax.fill_between(x, lo, hi, color=color, alpha=0.2, linewidth=0)
        else:
            ax.errorbar(x, mean, yerr=[mean - lo, hi - mean], label=sampler,
                        color=color, marker="o", capsize=4)
    ax.set_xlabel(fig_spec.get("x_label", "budget"))
    ax.set_ylabel(fig_spec.get("y_label", fig_spec["metric"]))
    ax.set_title(fig_spec.get("title", ""))
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    _footer(fig, bundle)
    path = out / f"{fig_spec.get('name', 'curves')}.{fmt}"
    _save(fig, path, fmt, bundle)
    return path


def render_heatmap(bundle: PlotBundle, fig_spec: dict, out: Path, fmt: str) -> Path:
    row_attr, col_attr, row_labels, col_labels, matrix = read_heatmap(
        bundle.root / fig_spec["matrix"]
    )
    data = np.ma.masked_invalid(np.asarray(matrix))
    fig, ax = plt.subplots(
        figsize=(max(4.0, 0.5 * len(col_labels) + 2), max(3.2, 0.3 * len(row_labels) + 1.5))
    )
    cmap = plt.get_cmap("Greys").copy()
    cmap.set_bad("#f0e8e8")
    im = ax.imshow(data, cmap=cmap, aspect="auto", vmin=0.0)
    ax.set_xticks(range(len(col_labels)), col_labels, rotation=45, ha="right", fontsize=7)
    ax.set_yticks(range(len(row_labels)), row_labels, fontsize=7)
    ax.set_xlabel(fig_spec.get("x_label", col_attr))
    ax.set_ylabel(fig_spec.get("y_label", row_attr))
    ax.set_title(fig_spec.get("title", ""))
    fig.colorbar(im, ax=ax, shrink=0.85)
    fig.tight_layout(rect=(0, 0.03, 1, 1))
    _footer(fig, bundle)
    path = out / f"{fig_spec.get('name', 'heatmap')}.{fmt}"
    _save(fig, path, fmt, bundle)
    return path


def render_ablation(bundle: PlotBundle, fig_spec: dict, out: Path, fmt: str) -> Path:
    header, rows = read_table(bundle.root / fig_spec["table"])
    axis_col = fig_spec.get("axis")
    if axis_col is None:
        candidates = [c for c in header if c not in
                      ("sampler", "budget", "metric", "mean", "ci_low", "ci_high")]
        if not candidates:
            raise BundleError("ablation table has no axis column")
        axis_col = candidates[0]
    metric = fig_spec.get("metric")
    value_col = fig_spec.get("value", "mean")
    if metric and "metric" in header:
        rows = [r for r in rows if r["metric"] == metric]
    if value_col not in header or axis_col not in header:
        raise BundleError(f"ablation table lacks {value_col!r}/{axis_col!r} columns")

    samplers = sorted({r["sampler"] for r in rows}) if "sampler" in header else [""]
    axis_values = sorted({r[axis_col] for r in rows}, key=_axis_key)
    width = 0.8 / max(len(samplers), 1)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    base = np.arange(len(axis_values))
    for k, sampler in enumerate(samplers):
        heights, errs = [], []
        for v in axis_values:
            match = [r for r in rows
                     if r.get("sampler", "") == sampler and r[axis_col] == v]
            if not match:
                heights.append(np.nan)
                errs.append(0.0)
                continue
            row = match[0]
            heights.append(float(row[value_col]))
            if "ci_low" in row and "ci_high" in row:
                try:
                    errs.append((float(row["ci_high"]) - float(row["ci_low"])) / 2)
                except ValueError:
                    errs.append(0.0)
            else:
                errs.append(0.0)
        ax.bar(base + k * width, heights, width=width,
               yerr=errs if any(errs) else None,
               label=sampler or None, color=_COLORS[k % len(_COLORS)], capsize=3)
    ax.set_xticks(base + 0.4 - width / 2, axis_values)
    ax.set_xlabel(fig_spec.get("x_label", axis_col))
    ax.set_ylabel(fig_spec.get("y_label", value_col))
    ax.set_title(fig_spec.get("title", ""))
    if samplers != [""]:
        ax.legend(fontsize=8)
    ax.grid(alpha=0.3, axis="y")
    _footer(fig, bundle)
    path = out / f"{fig_spec.get('name', 'ablation')}.{fmt}"
    _save(fig, path, fmt, bundle)
    return path


def _axis_key(v: str):
    try:
        return (0, float(v))
    except ValueError:
        return (1, v)


_RENDERERS = {"curves": render_curves, "heatmap": render_heatmap,
              "ablation": render_ablation}


def render_bundle(bundle: PlotBundle, out_dir, fmt: str = "png") -> list[Path]:
    if fmt not in FORMATS:
        raise BundleError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for k, fig_spec in enumerate(bundle.figures):
        spec = dict(fig_spec)
        spec.setdefault("name", f"{spec['kind']}-{k}" if k else spec["kind"])
        written.append(_RENDERERS[spec["kind"]](bundle, spec, out, fmt))
    return written
