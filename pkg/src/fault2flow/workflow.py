"""
Workflow graph IR and its n8n document form.

A workflow has one form trigger, IF nodes (two branch ports, 0 = true and
1 = false), Set nodes that emit a fault class, and NoOp join nodes that
merge control flow.  Fault-tree provenance rides along in each serialized
node under ``meta.fault2flow.provenance``.
"""

from __future__ import annotations

import enum
import json
import re
import uuid
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Mapping

from .errors import SchemaError, ValidationFailed, WorkflowCycle
from .pasta import COMPARE, NO_FAULT, CheckReport, Condition, Finding, Interval, format_number

N8N_TYPES = {
    "trigger": ("n8n-nodes-base.formTrigger", 2.2),
    "condition": ("n8n-nodes-base.if", 2.2),
    "output": ("n8n-nodes-base.set", 3.4),
    "join": ("n8n-nodes-base.noOp", 1),
}
_KIND_OF_TYPE = {t: k for k, (t, _) in N8N_TYPES.items()}
_N8N_OPERATION = {"<": "lt", "<=": "lte", ">": "gt", ">=": "gte"}
_OPERATOR_OF = {v: k for k, v in _N8N_OPERATION.items()}
_NAMESPACE = uuid.UUID("5d1c1f0e-8f4e-4f61-9a51-6c2b7f7c2a10")


class NodeKind(str, enum.Enum):
    TRIGGER = "trigger"
    CONDITION = "condition"
    OUTPUT = "output"
    JOIN = "join"
    UNSUPPORTED = "unsupported"


@dataclass(frozen=True)
class FormField:
    name: str
    unit: str = ""


@dataclass(frozen=True)
class WfCondition:
    """Threshold test on a form field or on the quotient of two fields."""

    numerator: str
    operator: str
    threshold: float
    denominator: str | None = None

    @property
    def operand(self) -> str:
        return self.numerator if self.denominator is None else f"{self.numerator}/{self.denominator}"

    @property
    def fields(self) -> tuple[str, ...]:
        return (self.numerator,) if self.denominator is None else (self.numerator, self.denominator)

    def holds(self, value: float) -> bool:
        return COMPARE[self.operator](value, self.threshold)

    def __str__(self):
        return f"{self.operand} {self.operator} {format_number(self.threshold)}"


@dataclass(frozen=True)
class WfNode:
    name: str
    kind: NodeKind
    fields: tuple[FormField, ...] = ()
    condition: WfCondition | None = None
    label: str | None = None
    is_fault: bool = False
    provenance: str | None = None
    position: tuple[int, int] = (0, 0)
    n8n_type: str | None = None


@dataclass(frozen=True)
class Connection:
    from_node: str
    branch: int
    to_node: str


@dataclass(frozen=True, eq=False)
class Workflow:
    name: str
    nodes: tuple[WfNode, ...]
    connections: tuple[Connection, ...] = ()

    def __post_init__(self):
        nodes = tuple(self.nodes)
        order = {}
        for i, node in enumerate(nodes):
            order.setdefault(node.name, i)
        conns = sorted(
            enumerate(self.connections),
            key=lambda ic: (order.get(ic[1].from_node, len(nodes)), ic[1].branch, ic[0]),
        )
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "connections", tuple(c for _, c in conns))
        cycle = _find_cycle(self.connections)
        if cycle is not None:
            raise WorkflowCycle(f"connections form a cycle through node {cycle!r}")

    def __eq__(self, other):
        if not isinstance(other, Workflow):
            return NotImplemented
        return (self.name, self.nodes, self.connections) == (other.name, other.nodes, other.connections)

    def __hash__(self):
        return hash((self.name, self.nodes, self.connections))

    @cached_property
    def by_name(self) -> Mapping[str, WfNode]:
        return {n.name: n for n in self.nodes}

    @cached_property
    def outgoing(self) -> Mapping[str, Mapping[int, tuple[str, ...]]]:
        out: dict[str, dict[int, list[str]]] = {}
        for c in self.connections:
            out.setdefault(c.from_node, {}).setdefault(c.branch, []).append(c.to_node)
        return {k: {p: tuple(v) for p, v in ports.items()} for k, ports in out.items()}

    def successors(self, name: str) -> list[str]:
        return [t for port in sorted(self.outgoing.get(name, {})) for t in self.outgoing[name][port]]

    @property
    def trigger(self) -> WfNode | None:
        triggers = [n for n in self.nodes if n.kind is NodeKind.TRIGGER]
        return triggers[0] if len(triggers) == 1 else None

    def replace(self, *, nodes=None, connections=None, name=None) -> "Workflow":
        return Workflow(
            self.name if name is None else name,
            self.nodes if nodes is None else nodes,
            self.connections if connections is None else connections,
        )


def _find_cycle(connections) -> str | None:
    graph: dict[str, list[str]] = {}
    for c in connections:
        graph.setdefault(c.from_node, []).append(c.to_node)
    state: dict[str, int] = {}

    for start in list(graph):
        if start in state:
            continue
        stack = [(start, iter(graph.get(start, ())))]
        state[start] = 1
        while stack:
            node, children = stack[-1]
            for child in children:
                if state.get(child) == 1:
                    return child
                if child not in state:
                    state[child] = 1
                    stack.append((child, iter(graph.get(child, ()))))
                    break
            else:
                state[node] = 2
                stack.pop()
    return None


# --------------------------------------------------------------------------
# validation

def validate_workflow(w: Workflow) -> CheckReport:
    findings: list[Finding] = []

    def error(node, message):
        findings.append(Finding("error", node, message))

    names: set[str] = set()
    for node in w.nodes:
        if node.name in names:
            error(node.name, "DuplicateName: node name used more than once")
        names.add(node.name)
        if node.kind is NodeKind.UNSUPPORTED:
            error(node.name, f"UnsupportedNode: node type {node.n8n_type!r} is not interpretable")

    for c in w.connections:
        for end in (c.from_node, c.to_node):
            if end not in names:
                error(end, f"UnknownNode: connection {c.from_node}[{c.branch}] -> {c.to_node}")

    cycle = _find_cycle(w.connections)
    if cycle is not None:
        error(cycle, "Cycle: connections are cyclic")

    triggers = [n for n in w.nodes if n.kind is NodeKind.TRIGGER]
    if len(triggers) != 1:
        error("-", f"TriggerCount: expected exactly one trigger, found {len(triggers)}")
    declared = {f.name for t in triggers for f in t.fields}

    for node in w.nodes:
        ports = w.outgoing.get(node.name, {})
        allowed = 2 if node.kind is NodeKind.CONDITION else 1
        for port in ports:
            if not 0 <= port < allowed:
                error(node.name, f"BadPort: branch port {port} on a {node.kind.value} node")
        if node.kind is NodeKind.CONDITION:
            for port in (0, 1):
                if not ports.get(port):
                    which = "true" if port == 0 else "false"
                    error(node.name, f"MissingBranch: {which} branch (port {port}) is not connected")
            if node.condition is None:
                error(node.name, "MissingCondition: IF node without a condition")
            else:
                for f in node.condition.fields:
                    if f not in declared:
                        error(node.name, f"UnknownField: condition reads undeclared field {f!r}")
        if node.kind is NodeKind.OUTPUT:
            if not node.label:
                error(node.name, "MissingLabel: output node without a fault-class label")
            elif node.is_fault and node.provenance is None:
                findings.append(
                    Finding("warning", node.name, f"output {node.label!r} carries no provenance")
                )

    if len(triggers) == 1:
        seen = {triggers[0].name}
        frontier = [triggers[0].name]
        while frontier:
            for nxt in w.successors(frontier.pop()):
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        for node in w.nodes:
            if node.name not in seen:
                error(node.name, "Unreachable: not reachable from the trigger")
        if not any(f.severity == "error" for f in findings):
            findings.extend(_infeasible_outputs(w, triggers[0].name))
    return CheckReport(tuple(findings))


def _infeasible_outputs(w: Workflow, start: str) -> list[Finding]:
    """Warn about outputs that no consistent set of branch choices reaches.

    Each operand (field or field quotient) is tracked as an independent
    interval, so this can only under-report.
    """
    reached: set[str] = set()
    seen: set[tuple] = set()
    stack = [(start, ())]
    while stack:
        name, spans = stack.pop()
        key = (name, spans)
        if key in seen:
            continue
        seen.add(key)
        node = w.by_name[name]
        if node.kind is NodeKind.OUTPUT:
            reached.add(name)
        ports = w.outgoing.get(name, {})
        if node.kind is NodeKind.CONDITION:
            cond = Condition(node.condition.operand, node.condition.operator, node.condition.threshold)
            current = dict(spans)
            base = current.get(cond.parameter, Interval())
            for port, span in ((0, Interval.of(cond)), (1, Interval.negation_of(cond))):
                narrowed = base & span
                if narrowed.empty:
                    continue
                nxt = tuple(sorted({**current, cond.parameter: narrowed}.items()))
                for target in ports.get(port, ()):
                    stack.append((target, nxt))
        else:
            for target in ports.get(0, ()):
                stack.append((target, spans))
    return [
        Finding("warning", n.name, f"output {n.label!r} is unreachable under any input")
        for n in w.nodes
        if n.kind is NodeKind.OUTPUT and n.name not in reached
    ]


# --------------------------------------------------------------------------
# n8n documents

def _uid(*parts: str) -> str:
    return str(uuid.uuid5(_NAMESPACE, "\x1f".join(parts)))


def _node_parameters(w: Workflow, node: WfNode) -> dict[str, Any]:
    if node.kind is NodeKind.TRIGGER:
        return {
            "formTitle": w.name,
            "formFields": {
                "values": [
                    {"fieldLabel": f.name, "fieldType": "number", "placeholder": f.unit, "requiredField": True}
                    for f in node.fields
                ]
            },
            "options": {},
        }
    if node.kind is NodeKind.CONDITION:
        cond = node.condition
        left = f"$json.{cond.numerator}"
        if cond.denominator is not None:
            left += f" / $json.{cond.denominator}"
        return {
            "conditions": {
                "options": {"caseSensitive": True, "leftValue": "", "typeValidation": "strict", "version": 2},
                "conditions": [
                    {
                        "id": _uid(w.name, node.name, "condition"),
                        "leftValue": "={{ " + left + " }}",
                        "rightValue": cond.threshold,
                        "operator": {"type": "number", "operation": _N8N_OPERATION[cond.operator]},
                    }
                ],
                "combinator": "and",
            },
            "options": {},
        }
    if node.kind is NodeKind.OUTPUT:
        return {
            "mode": "manual",
            "assignments": {
                "assignments": [
                    {"id": _uid(w.name, node.name, "label"), "name": "fault_class", "value": node.label, "type": "string"},
                    {"id": _uid(w.name, node.name, "fault"), "name": "fault", "value": node.is_fault, "type": "boolean"},
                ]
            },
            "options": {},
        }
    return {}


def to_document(w: Workflow) -> dict[str, Any]:
    nodes = []
    for node in w.nodes:
        n8n_type, version = N8N_TYPES[node.kind.value]
        entry = {
            "id": _uid(w.name, node.name),
            "name": node.name,
            "type": n8n_type,
            "typeVersion": version,
            "position": list(node.position),
            "parameters": _node_parameters(w, node),
        }
        if node.provenance is not None:
            entry["meta"] = {"fault2flow": {"provenance": node.provenance}}
        nodes.append(entry)
    connections: dict[str, Any] = {}
    for node in w.nodes:
        ports = w.outgoing.get(node.name)
        if not ports:
            continue
        width = max(ports) + 1
        main = [
            [{"node": target, "type": "main", "index": 0} for target in ports.get(p, ())]
            for p in range(width)
        ]
        connections[node.name] = {"main": main}
    return {"name": w.name, "nodes": nodes, "connections": connections}


def export_n8n(w: Workflow) -> str:
    report = validate_workflow(w)
    if not report.passed:
        raise ValidationFailed(report)
    return json.dumps(to_document(w), indent=2, ensure_ascii=False) + "\n"


_LEFT_VALUE = re.compile(
    r"=\{\{\s*\$json\.([A-Za-z_][A-Za-z0-9_]*)\s*(?:/\s*\$json\.([A-Za-z_][A-Za-z0-9_]*)\s*)?\}\}\Z"
)


def _expect(value, kind, path):
    if not isinstance(value, kind):
        raise SchemaError(path, f"expected {kind.__name__ if isinstance(kind, type) else 'value'}")
    return value


def _condition_from(params, path) -> WfCondition:
    conds = _expect(_expect(params.get("conditions"), dict, f"{path}/conditions").get("conditions"),
                    list, f"{path}/conditions/conditions")
    if len(conds) != 1:
        raise SchemaError(f"{path}/conditions/conditions", "expected exactly one comparison")
    cond = _expect(conds[0], dict, f"{path}/conditions/conditions/0")
    cpath = f"{path}/conditions/conditions/0"
    left = _expect(cond.get("leftValue"), str, f"{cpath}/leftValue")
    match = _LEFT_VALUE.match(left.strip())
    if match is None:
        raise SchemaError(f"{cpath}/leftValue", f"unsupported expression {left!r}")
    operation = _expect(cond.get("operator"), dict, f"{cpath}/operator").get("operation")
    if operation not in _OPERATOR_OF:
        raise SchemaError(f"{cpath}/operator/operation", f"unsupported operation {operation!r}")
    right = cond.get("rightValue")
    if isinstance(right, str):
        try:
            right = float(right)
        except ValueError:
            raise SchemaError(f"{cpath}/rightValue", f"not a number: {right!r}") from None
    if isinstance(right, bool) or not isinstance(right, (int, float)):
        raise SchemaError(f"{cpath}/rightValue", "expected a number")
    return WfCondition(match.group(1), _OPERATOR_OF[operation], float(right), match.group(2))


def _output_from(params, path) -> tuple[str, bool]:
    items = _expect(
        _expect(params.get("assignments"), dict, f"{path}/assignments").get("assignments"),
        list,
        f"{path}/assignments/assignments",
    )
    values = {a.get("name"): a.get("value") for a in items if isinstance(a, dict)}
    label = values.get("fault_class")
    if not isinstance(label, str):
        raise SchemaError(f"{path}/assignments/assignments", "no string 'fault_class' assignment")
    fault = values.get("fault", label != NO_FAULT)
    return label, bool(fault)


def from_document(doc: Any) -> Workflow:
    _expect(doc, dict, "")
    name = _expect(doc.get("name"), str, "/name")
    if "nodes" not in doc:
        raise SchemaError("/nodes", "missing")
    if "connections" not in doc:
        raise SchemaError("/connections", "missing")
    raw_nodes = _expect(doc["nodes"], list, "/nodes")
    nodes = []
    for i, raw in enumerate(raw_nodes):
        path = f"/nodes/{i}"
        _expect(raw, dict, path)
        node_name = _expect(raw.get("name"), str, f"{path}/name")
        n8n_type = _expect(raw.get("type"), str, f"{path}/type")
        pos = raw.get("position", [0, 0])
        if not (isinstance(pos, list) and len(pos) == 2 and all(isinstance(v, (int, float)) for v in pos)):
            raise SchemaError(f"{path}/position", "expected [x, y]")
        params = _expect(raw.get("parameters", {}), dict, f"{path}/parameters")
        meta = raw.get("meta") or {}
        provenance = (meta.get("fault2flow") or {}).get("provenance") if isinstance(meta, dict) else None
        kind = NodeKind(_KIND_OF_TYPE.get(n8n_type, "unsupported"))
        extra: dict[str, Any] = {}
        if kind is NodeKind.TRIGGER:
            values = _expect(
                _expect(params.get("formFields", {}), dict, f"{path}/parameters/formFields").get("values", []),
                list,
                f"{path}/parameters/formFields/values",
            )
            extra["fields"] = tuple(
                FormField(_expect(v.get("fieldLabel"), str, f"{path}/parameters/formFields/values/{j}/fieldLabel"),
                          v.get("placeholder", ""))
                for j, v in enumerate(values)
            )
        elif kind is NodeKind.CONDITION:
            extra["condition"] = _condition_from(params, f"{path}/parameters")
        elif kind is NodeKind.OUTPUT:
            extra["label"], extra["is_fault"] = _output_from(params, f"{path}/parameters")
        elif kind is NodeKind.UNSUPPORTED:
            extra["n8n_type"] = n8n_type
        nodes.append(
            WfNode(node_name, kind, provenance=provenance, position=(int(pos[0]), int(pos[1])), **extra)
        )
    raw_conns = _expect(doc["connections"], dict, "/connections")
    connections = []
    for source, group in raw_conns.items():
        path = f"/connections/{source}"
        main = _expect(_expect(group, dict, path).get("main"), list, f"{path}/main")
        for port, targets in enumerate(main):
            for j, target in enumerate(_expect(targets or [], list, f"{path}/main/{port}")):
                node = _expect(_expect(target, dict, f"{path}/main/{port}/{j}").get("node"), str,
                               f"{path}/main/{port}/{j}/node")
                connections.append(Connection(source, port, node))
    return Workflow(name, tuple(nodes), tuple(connections))


def import_n8n(document: str | bytes | Mapping) -> Workflow:
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SchemaError("", f"not JSON: {exc}") from None
    return from_document(document)
