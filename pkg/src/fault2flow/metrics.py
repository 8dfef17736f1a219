"""Evaluation metrics for a fault tree and the workflow generated from it.

TC and E2ERC compare the two graphs through provenance tags: every workflow
node that implements a fault-tree node names it, and untagged nodes are
contracted away.  SF is computed exactly by enumerating leaf-truth regions,
and the readability score is a deterministic structural proxy.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import EmptyTree, ExecutionError, LeafCapExceeded
from .executor import ExecutionTrace, execute
from .pasta import SNAKE_CASE, BasicEvent, FaultTree, Gate, TopEvent, evaluate
from .regions import leaf_regions
from .workflow import Workflow


# --------------------------------------------------------------------------
# topological consistency

def provenance_pairs(w: Workflow) -> set[tuple[str, str]]:
    """Tag pairs (u, v) where a u-tagged node reaches a v-tagged node through untagged nodes only."""
    pairs = set()
    for node in w.nodes:
        if node.provenance is None:
            continue
        seen: set[str] = set()
        stack = list(w.successors(node.name))
        while stack:
            name = stack.pop()
            if name in seen or name not in w.by_name:
                continue
            seen.add(name)
            target = w.by_name[name]
            if target.provenance is not None:
                pairs.add((node.provenance, target.provenance))
            else:
                stack.extend(w.successors(name))
    return pairs


def edge_coverage(tree: FaultTree, w: Workflow) -> tuple[int, int]:
    """(covered, total) tree edges."""
    edges = tree.edges
    if not edges:
        raise EmptyTree(f"tree {tree.name!r} has no edges")
    return len(edges & provenance_pairs(w)), len(edges)


def topological_consistency(tree: FaultTree, w: Workflow) -> float:
    covered, total = edge_coverage(tree, w)
    return covered / total


# --------------------------------------------------------------------------
# end-to-end reachability

def _path_in_trace(tree: FaultTree, path: Sequence[str], seq: Sequence[str]) -> bool:
    """Whether ``seq`` visits ``path`` in order, with everything between
    consecutive path nodes inside the earlier node's subtree."""

    def match(i, start):
        # path[i] was matched at seq[start - 1]; find path[i + 1] after it
        if i == len(path) - 1:
            return True
        scope = tree.descendants(path[i])
        for j in range(start, len(seq)):
            if seq[j] == path[i + 1] and match(i + 1, j + 1):
                return True
            if seq[j] not in scope:
                return False
        return False

    return any(match(0, k + 1) for k, tag in enumerate(seq) if tag == path[0])


def path_coverage(tree: FaultTree, traces: Iterable[ExecutionTrace]) -> tuple[int, int]:
    """(covered, total) top-to-leaf paths."""
    paths = tree.paths()
    if not paths:
        raise EmptyTree(f"tree {tree.name!r} has no top-to-leaf paths")
    sequences = {t.provenance_visited for t in traces}
    covered = sum(1 for p in paths if any(_path_in_trace(tree, p, s) for s in sequences))
    return covered, len(paths)


def e2e_reachability(tree: FaultTree, w: Workflow, traces: Iterable[ExecutionTrace]) -> float:
    covered, total = path_coverage(tree, traces)
    return covered / total


# --------------------------------------------------------------------------
# semantic fidelity

def semantic_fidelity(tree: FaultTree, w: Workflow, leaf_cap: int = 12) -> float:
    """Fraction of leaf-truth regions on which the workflow agrees with the tree."""
    leaves = len(tree.basic_events())
    if leaves > leaf_cap:
        raise LeafCapExceeded(f"tree {tree.name!r} has {leaves} leaves; cap is {leaf_cap}")
    regions = leaf_regions(tree)
    agree = 0
    for region in regions:
        try:
            got = execute(w, region.assignment).triggered
        except ExecutionError:
            continue
        agree += got == evaluate(tree, region.assignment)
    return agree / len(regions)


# --------------------------------------------------------------------------
# readability

@dataclass(frozen=True)
class ReadabilityWeights:
    naming: float = 0.25
    depth: float = 0.25
    redundancy: float = 0.25
    degenerate: float = 0.25


def _shape(tree: FaultTree, node_id: str, memo: dict) -> tuple:
    if node_id not in memo:
        node = tree.by_id[node_id]
        if isinstance(node, BasicEvent):
            c = node.condition
            memo[node_id] = ("basic", c.parameter, c.operator, c.threshold)
        else:
            # every gate kind is symmetric in its children
            kids = sorted(_shape(tree, c, memo) for c in node.children)
            memo[node_id] = (node.kind, node.k, tuple(kids))
    return memo[node_id]


def structural_shapes(tree: FaultTree) -> dict[str, tuple]:
    """Order-insensitive shape of every reachable gate and basic event."""
    memo: dict[str, tuple] = {}
    return {
        i: _shape(tree, i, memo) for i in tree.reachable() if not isinstance(tree.by_id[i], TopEvent)
    }


def max_depth(tree: FaultTree) -> int:
    """Longest top-to-leaf path, counted in edges."""
    return max(len(p) - 1 for p in tree.paths())


def readability_score(tree: FaultTree, weights: ReadabilityWeights | None = None) -> float:
    w = weights or ReadabilityWeights()
    reachable = tree.reachable()
    leaves = len(tree.basic_events())

    names = [*reachable, *(p.name for p in tree.schema)]
    naming = sum(1 for n in names if SNAKE_CASE.match(n)) / len(names)

    ideal = 1 + math.ceil(math.log2(leaves)) if leaves > 1 else 1
    excess = max(0, max_depth(tree) - ideal)
    depth_pen = excess / (excess + 2)

    shapes = structural_shapes(tree)
    counts: dict[tuple, int] = {}
    for shape in shapes.values():
        counts[shape] = counts.get(shape, 0) + 1
    redundancy = sum(1 for s in shapes.values() if counts[s] > 1) / len(shapes)

    gates = [tree.by_id[i] for i in reachable if isinstance(tree.by_id[i], Gate)]
    degenerate = sum(1 for g in gates if len(g.children) == 1) / len(gates) if gates else 0.0

    score = (
        (1 - w.naming)
        + w.naming * naming
        - w.depth * depth_pen
        - w.redundancy * redundancy
        - w.degenerate * degenerate
    )
    return min(1.0, max(0.0, score))


# --------------------------------------------------------------------------
# reports

@dataclass(frozen=True)
class MetricReport:
    tree: str
    tc: float
    e2erc: float
    sf: float
    readability: float
    pasta_edges: int
    covered_edges: int
    ref_paths: int
    covered_paths: int
    succeeded: int = 0
    failed: int = 0

    def __post_init__(self):
        for name in ("tc", "e2erc", "sf", "readability"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} = {value} is outside [0, 1]")

    @property
    def tc_fraction(self) -> Fraction:
        return Fraction(self.covered_edges, self.pasta_edges)

    @property
    def e2erc_fraction(self) -> Fraction:
        return Fraction(self.covered_paths, self.ref_paths)


def measure(
    tree: FaultTree,
    w: Workflow,
    traces: Sequence[ExecutionTrace],
    succeeded: int = 0,
    failed: int = 0,
    leaf_cap: int = 12,
    weights: ReadabilityWeights | None = None,
) -> MetricReport:
    covered_edges, edges = edge_coverage(tree, w)
    covered_paths, paths = path_coverage(tree, traces)
    return MetricReport(
        tree=tree.name,
        tc=covered_edges / edges,
        e2erc=covered_paths / paths,
        sf=semantic_fidelity(tree, w, leaf_cap),
        readability=readability_score(tree, weights),
        pasta_edges=edges,
        covered_edges=covered_edges,
        ref_paths=paths,
        covered_paths=covered_paths,
        succeeded=succeeded,
        failed=failed,
    )


COLUMNS = ("tree", "LRM(readability)", "SF(sf-exhaustive)", "TC", "E2ERC", "Succ./Fail.")


def _fmt(x: float) -> str:
    return f"{x:.4f}"


def _row(r: MetricReport) -> list[str]:
    return [r.tree, _fmt(r.readability), _fmt(r.sf), _fmt(r.tc), _fmt(r.e2erc), f"{r.succeeded}/{r.failed}"]


def total_row(reports: Sequence[MetricReport]) -> list[str]:
    """Aggregate line: mean ratios, summed success counts."""
    def mean(attr):
        return _fmt(sum(getattr(r, attr) for r in reports) / len(reports))

    return [
        "TOTAL",
        mean("readability"),
        mean("sf"),
        mean("tc"),
        mean("e2erc"),
        f"{sum(r.succeeded for r in reports)}/{sum(r.failed for r in reports)}",
    ]


def render_table(reports: Sequence[MetricReport]) -> str:
    rows = [list(COLUMNS), *(_row(r) for r in reports)]
    if len(reports) > 1:
        rows.append(total_row(reports))
    widths = [max(len(row[i]) for row in rows) for i in range(len(COLUMNS))]
    lines = []
    for k, row in enumerate(rows):
        cells = [row[0].ljust(widths[0])] + [c.rjust(wd) for c, wd in zip(row[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
        if k == 0:
            lines.append("  ".join("-" * wd for wd in widths))
    return "\n".join(lines) + "\n"


def render_tsv(reports: Sequence[MetricReport]) -> str:
    rows = [list(COLUMNS), *(_row(r) for r in reports)]
    if len(reports) > 1:
        rows.append(total_row(reports))
    return "".join("\t".join(row) + "\n" for row in rows)


def render_json(reports: Sequence[MetricReport]) -> str:
    return json.dumps({"reports": [asdict(r) for r in reports]}, indent=2, ensure_ascii=False) + "\n"
