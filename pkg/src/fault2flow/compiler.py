"""Lowering of a fault tree into a workflow graph.

Every gate becomes a short-circuit chain of IF nodes.  Each child of a gate
is entered through a NoOp join tagged with the gate's id, and each top event
is entered through a join tagged with its own id, so every tree edge has a
tagged source node directly upstream of the tagged child.  Top events are
evaluated one after another in declaration order; every satisfied top emits
its label and control moves on to the next top, which is what lets a single
run report several fault classes at once.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace

from .errors import InputError, KofnTooWide, SelfCheckFailed
from .pasta import NO_FAULT, BasicEvent, FaultTree, Gate, self_check
from .workflow import Connection, FormField, NodeKind, WfCondition, WfNode, Workflow

KOFN_LIMIT = 8
LAYER_DX = 240
LAYER_DY = 160


@dataclass(frozen=True)
class CompileOptions:
    no_fault_label: str = NO_FAULT
    share_condition_nodes: bool = False


def leaf_input_params(tree: FaultTree) -> list[FormField]:
    """One numeric form field per measured parameter the leaves read."""
    return [FormField(name, tree.params[name].unit) for name in tree.measured_inputs()]


class _Builder:
    def __init__(self, tree: FaultTree, opts: CompileOptions):
        self.tree = tree
        self.opts = opts
        self.nodes: dict[str, WfNode] = {}
        self.connections: list[Connection] = []
        self.taken: set[str] = set()
        self.memo: dict[tuple[str, str, str], str] = {}

    def reserve(self, base: str) -> str:
        name, n = base, 1
        while name in self.taken:
            n += 1
            name = f"{base} ({n})"
        self.taken.add(name)
        return name

    def add(self, node: WfNode) -> None:
        self.nodes[node.name] = node

    def link(self, source: str, port: int, target: str) -> None:
        self.connections.append(Connection(source, port, target))

    def condition_of(self, basic: BasicEvent) -> WfCondition:
        cond = basic.condition
        spec = self.tree.params[cond.parameter]
        if spec.derived:
            return WfCondition(spec.formula[0], cond.operator, cond.threshold, spec.formula[1])
        return WfCondition(cond.parameter, cond.operator, cond.threshold)

    def lower(self, node_id: str, on_true: str, on_false: str) -> str:
        """Emit nodes for ``node_id`` and return the name of its entry node."""
        key = (node_id, on_true, on_false)
        if self.opts.share_condition_nodes and key in self.memo:
            return self.memo[key]
        node = self.tree.by_id[node_id]
        if isinstance(node, BasicEvent):
            entry = self.reserve(f"if {node.id}")
            self.add(WfNode(entry, NodeKind.CONDITION, condition=self.condition_of(node), provenance=node.id))
            self.link(entry, 0, on_true)
            self.link(entry, 1, on_false)
        else:
            entry = self.lower_gate(node, on_true, on_false)
        self.memo[key] = entry
        return entry

    def lower_gate(self, gate: Gate, on_true: str, on_false: str) -> str:
        # disjunction of conjunctions; AND is one group, OR is singletons
        if gate.kind == "and":
            groups = [gate.children]
        elif gate.kind == "or":
            groups = [(c,) for c in gate.children]
        else:
            groups = list(itertools.combinations(gate.children, gate.k))

        def link_name(j, m):
            if gate.kind == "and":
                return f"{gate.id}[{m + 1}]"
            if gate.kind == "or":
                return f"{gate.id}[{j + 1}]"
            return f"{gate.id}[{j + 1}.{m + 1}]"

        links = [[self.reserve(link_name(j, m)) for m in range(len(g))] for j, g in enumerate(groups)]
        for j, group in enumerate(groups):
            next_group = links[j + 1][0] if j + 1 < len(groups) else on_false
            for m, child in enumerate(group):
                here = links[j][m]
                self.add(WfNode(here, NodeKind.JOIN, provenance=gate.id))
                then = links[j][m + 1] if m + 1 < len(group) else on_true
                self.link(here, 0, self.lower(child, then, next_group))
        return links[0][0]

    def build(self) -> Workflow:
        tree, opts = self.tree, self.opts
        trigger = self.reserve("form input")
        self.add(WfNode(trigger, NodeKind.TRIGGER, fields=tuple(leaf_input_params(tree))))
        tops = tree.tops
        enters = [self.reserve(f"enter {t.id}") for t in tops]
        emits = [self.reserve(f"emit {t.label}") for t in tops]
        no_fault = self.reserve(f"emit {opts.no_fault_label}")
        self.link(trigger, 0, enters[0])
        for i, top in enumerate(tops):
            after = enters[i + 1] if i + 1 < len(tops) else None
            self.add(WfNode(enters[i], NodeKind.JOIN, provenance=top.id))
            self.link(enters[i], 0, self.lower(top.child, emits[i], after or no_fault))
            self.add(WfNode(emits[i], NodeKind.OUTPUT, label=top.label, is_fault=True, provenance=top.id))
            if after:
                self.link(emits[i], 0, after)
        self.add(WfNode(no_fault, NodeKind.OUTPUT, label=opts.no_fault_label))
        nodes = layout(list(self.nodes.values()), self.connections)
        return Workflow(tree.name, tuple(nodes), tuple(self.connections))


def layout(nodes: list[WfNode], connections: list[Connection]) -> list[WfNode]:
    """Layered positions: column = longest path from the trigger, row = order within the column.

    ``nodes`` must already be in topological order, which the builder guarantees.
    """
    preds: dict[str, list[str]] = {n.name: [] for n in nodes}
    for c in connections:
        preds[c.to_node].append(c.from_node)
    depth: dict[str, int] = {}
    rows: dict[int, int] = {}
    placed = []
    for node in nodes:
        d = max((depth[p] + 1 for p in preds[node.name]), default=0)
        depth[node.name] = d
        row = rows.get(d, 0)
        rows[d] = row + 1
        placed.append(replace(node, position=(d * LAYER_DX, row * LAYER_DY)))
    return placed


def compile_tree(tree: FaultTree, opts: CompileOptions | None = None) -> Workflow:
    """Lower a self-checked fault tree into a workflow."""
    opts = opts or CompileOptions()
    report = self_check(tree)
    if not report.passed:
        raise SelfCheckFailed(report)
    if opts.no_fault_label in tree.fault_classes:
        raise InputError(f"no-fault label {opts.no_fault_label!r} collides with a fault class")
    for node_id in tree.reachable():
        node = tree.by_id[node_id]
        if isinstance(node, Gate) and node.kind == "kofn" and len(node.children) > KOFN_LIMIT:
            raise KofnTooWide(
                f"kofn gate {node.id!r} has {len(node.children)} children; at most {KOFN_LIMIT} are expanded"
            )
    return _Builder(tree, opts).build()


compile = compile_tree
