"""Report figures, rendered off-screen with the Agg canvas."""

from __future__ import annotations

from typing import Sequence

from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .metrics import MetricReport
from .workflow import NodeKind, Workflow

_METRICS = (("readability", "LRM(readability)"), ("sf", "SF(sf-exhaustive)"), ("tc", "TC"), ("e2erc", "E2ERC"))
_KIND_COLOURS = {
    NodeKind.TRIGGER: "#4c72b0",
    NodeKind.CONDITION: "#dd8452",
    NodeKind.OUTPUT: "#55a868",
    NodeKind.JOIN: "#8c8c8c",
    NodeKind.UNSUPPORTED: "#c44e52",
}


def _save(fig: Figure, path) -> None:
    FigureCanvasAgg(fig)
    # no Software tag, so the bytes depend only on the drawing
    fig.savefig(path, format="png", dpi=100, metadata={"Software": None})


def plot_metrics(reports: Sequence[MetricReport], path) -> None:
    """Grouped bars of the four ratio metrics per tree."""
    fig = Figure(figsize=(max(4.0, 1.2 * len(reports) + 2), 3.2))
    ax = fig.add_subplot()
    width = 0.8 / len(_METRICS)
    xs = range(len(reports))
    for k, (attr, label) in enumerate(_METRICS):
        ax.bar([x + k * width for x in xs], [getattr(r, attr) for r in reports], width, label=label)
    ax.set_xticks([x + 0.4 - width / 2 for x in xs])
    ax.set_xticklabels([r.tree for r in reports], rotation=30, ha="right", fontsize=7)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("ratio")
    ax.legend(fontsize=6, loc="lower right")
    fig.tight_layout()
    _save(fig, path)


def plot_history(history: Sequence[dict], path, seed_readability: float | None = None) -> None:
    """Best readability per evolution iteration."""
    fig = Figure(figsize=(5, 3))
    ax = fig.add_subplot()
    ax.plot([h["iteration"] for h in history], [h["readability"] for h in history], drawstyle="steps-post")
    if seed_readability is not None:
        ax.axhline(seed_readability, linestyle="--", linewidth=0.8, color="grey", label="seed")
        ax.legend(fontsize=7)
    ax.set_xlabel("iteration")
    ax.set_ylabel("best readability")
    fig.tight_layout()
    _save(fig, path)


def plot_workflow(w: Workflow, path) -> None:
    """Nodes at their layout positions, coloured by kind, with connections."""
    fig = Figure(figsize=(8, 5))
    ax = fig.add_subplot()
    pos = {n.name: n.position for n in w.nodes}
    for c in w.connections:
        if c.from_node in pos and c.to_node in pos:
            (x0, y0), (x1, y1) = pos[c.from_node], pos[c.to_node]
            style = "--" if c.branch == 1 else "-"
            ax.plot([x0, x1], [-y0, -y1], style, color="#bbbbbb", linewidth=0.6, zorder=1)
    for kind, colour in _KIND_COLOURS.items():
        members = [n for n in w.nodes if n.kind is kind]
        if members:
            ax.scatter([n.position[0] for n in members], [-n.position[1] for n in members],
                       s=18, color=colour, label=kind.value, zorder=2)
    ax.set_axis_off()
    ax.legend(fontsize=6, loc="upper right")
    ax.set_title(w.name, fontsize=9)
    fig.tight_layout()
    _save(fig, path)
