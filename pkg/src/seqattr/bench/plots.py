"""SVG report plots.

Strictly self-contained matplotlib output: the config hash seeds the SVG id
salt and rides in the metadata, and the date stamp is suppressed so repeated
runs produce stable files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_METHOD_COLORS = {
    "oracle": "#2f2f2f",
    "random": "#9e9e9e",
    "kernel-shap": "#1f77b4",
    "lime": "#ff7f0e",
    "gradient-x-input": "#2ca02c",
    "integrated-gradients": "#d62728",
    "deeplift": "#9467bd",
    "gim": "#8c564b",
    "chefer": "#e377c2",
}
_MODEL_MARKERS = {"transformer": "o", "stage-recurrent": "s", "stage-attn": "^"}


def _color(method: str) -> str:
    return _METHOD_COLORS.get(method, "#17becf")


def _marker(model: str) -> str:
    return _MODEL_MARKERS.get(model, "D")


def _save(fig, path: Path, config_hash: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    plt.rcParams["svg.hashsalt"] = config_hash
    fig.savefig(
        path,
        format="svg",
        metadata={"Date": None, "Description": f"config_hash={config_hash}"},
        bbox_inches="tight",
    )
    plt.close(fig)


def faithfulness_scatter(reports, task: str, path, config_hash: str) -> None:
    """Comprehensiveness (x, higher better) vs sufficiency (y, lower better)
    for one task; one point per (method, model)."""
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    seen_methods, seen_models = [], []
    for r in reports:
        ax.scatter(
            r.comprehensiveness, r.sufficiency,
            c=_color(r.method), marker=_marker(r.model), s=60,
            edgecolors="black", linewidths=0.4,
        )
        if r.method not in seen_methods:
            seen_methods.append(r.method)
        if r.model not in seen_models:
            seen_models.append(r.model)
    handles = [
        plt.Line2D([], [], color=_color(m), marker="o", linestyle="", label=m)
        for m in seen_methods
    ] + [
        plt.Line2D([], [], color="#555555", marker=_marker(a), linestyle="", label=a)
        for a in seen_models
    ]
    ax.legend(handles=handles, fontsize=7, loc="best", framealpha=0.8)
    ax.set_xlabel("comprehensiveness (higher is better)")
    ax.set_ylabel("sufficiency (lower is better)")
    ax.set_title(f"faithfulness — {task}")
    ax.grid(alpha=0.3)
    _save(fig, path, config_hash)


def runtime_scatter(reports, path, config_hash: str) -> None:
    """Per-record runtime (x, log scale) vs comprehensiveness (y); one point
    per (method, model, task)."""
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    seen = []
    for r in reports:
        ax.scatter(
            r.runtime_per_record, r.comprehensiveness,
            c=_color(r.method), marker=_marker(r.model), s=50,
            edgecolors="black", linewidths=0.4,
        )
        if r.method not in seen:
            seen.append(r.method)
    ax.set_xscale("log")
    handles = [
        plt.Line2D([], [], color=_color(m), marker="o", linestyle="", label=m)
        for m in seen
    ]
    ax.legend(handles=handles, fontsize=7, loc="best", framealpha=0.8)
    ax.set_xlabel("seconds per record (log scale)")
    ax.set_ylabel("comprehensiveness")
    ax.set_title("runtime vs comprehensiveness")
    ax.grid(alpha=0.3, which="both")
    _save(fig, path, config_hash)
