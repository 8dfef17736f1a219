"""Mind map to fault tree translation, plus the retrying hook wrapper.

Translation is purely structural: the root's children are fault classes,
annotated internal nodes are gates (AND when unannotated) and condition
leaves are basic events.  Where a language model would produce the DSL
text, :func:`translate_with_hook` accepts any callable and keeps asking
until the result parses and self-checks.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .errors import (
    EmptyFaultClass,
    Fault2FlowError,
    HookExhausted,
    TranslationError,
    UnannotatedLeaf,
    UnknownParameter,
)
from .mindmap import MapNode, MindMap, parse_plantuml
from .pasta import (
    BasicEvent,
    CheckReport,
    Condition,
    FaultTree,
    Finding,
    Gate,
    ParamSpec,
    TopEvent,
    emit_pasta,
    parse_pasta,
    self_check,
)

TranslatorHook = Callable[[str, str], str]


def normalize_label(text: str) -> str:
    """Lowercase, spaces to underscores, drop everything else that is not alphanumeric."""
    out = re.sub(r"\s+", "_", text.strip().lower())
    out = re.sub(r"[^a-z0-9_]", "", out)
    out = re.sub(r"_+", "_", out).strip("_")
    if not out:
        out = "node"
    if out[0].isdigit():
        out = "n_" + out
    return out


class _Translator:
    def __init__(self, schema: Iterable[ParamSpec], default_gate: str, declare_measured: bool):
        self.schema: dict[str, ParamSpec] = {p.name: p for p in schema}
        self.default_gate = default_gate
        self.declare_measured = declare_measured
        self.ids: set[str] = set()
        self.nodes: list = []

    def fresh(self, base: str) -> str:
        name, k = base, 1
        while name in self.ids:
            k += 1
            name = f"{base}_{k}"
        self.ids.add(name)
        return name

    def measured(self, name: str, where: str) -> str:
        spec = self.schema.get(name)
        if spec is None:
            if not self.declare_measured:
                raise UnknownParameter(f"{where}: parameter {name!r} is not in the schema")
            self.schema[name] = ParamSpec(name)
            return name
        if spec.derived:
            raise UnknownParameter(f"{where}: ratio operand {name!r} is itself a ratio")
        return name

    def parameter(self, text: str, where: str) -> str:
        text = text.lower()
        if "/" not in text:
            if text in self.schema:
                return text
            return self.measured(text, where)
        num, den = text.split("/")
        for spec in self.schema.values():
            if spec.derived and spec.formula == (num, den):
                return spec.name
        self.measured(num, where)
        self.measured(den, where)
        name = f"{num}_{den}"
        if name in self.schema:
            raise UnknownParameter(f"{where}: cannot declare ratio {num}/{den}; {name!r} is taken")
        self.schema[name] = ParamSpec(name, "", "derived", (num, den))
        return name

    def lower(self, node: MapNode, path: str) -> str:
        where = f"{path}/{node.text}"
        if not node.children:
            cond = node.condition
            if cond is None:
                raise UnannotatedLeaf(f"{where}: leaf has no condition annotation")
            param = self.parameter(cond.parameter, where)
            basic = BasicEvent(self.fresh(normalize_label(node.text)), Condition(param, cond.operator, cond.threshold))
            self.nodes.append(basic)
            return basic.id
        if node.condition is not None:
            raise TranslationError(f"{where}: condition annotation on a node with children")
        gate_id = self.fresh(normalize_label(node.text))
        return self.gate(gate_id, node, where)

    def gate(self, gate_id: str, node: MapNode, where: str) -> str:
        kind = (node.gate_kind or self.default_gate).lower()
        children = tuple(self.lower(c, where) for c in node.children)
        self.nodes.append(Gate(gate_id, kind, children))
        return gate_id


def _has_condition(node: MapNode) -> bool:
    return node.condition is not None or any(_has_condition(c) for c in node.children)


def mindmap_to_faulttree(
    m: MindMap,
    schema: Sequence[ParamSpec] = (),
    default_gate: str = "and",
    declare_measured: bool = False,
) -> FaultTree:
    """Translate an annotation-complete mind map.

    Ratios written ``a/b`` resolve to a schema ratio with that formula or
    are declared on the fly as ``a_b``.  With ``declare_measured`` unknown
    measured parameters are declared too (with an empty unit).
    """
    if default_gate not in ("and", "or"):
        raise ValueError("default_gate must be 'and' or 'or'")
    root = m.root
    if not root.children:
        raise EmptyFaultClass(f"{root.text}: mind map has no fault classes")
    t = _Translator(schema, default_gate, declare_measured)
    labels = []
    for top in root.children:
        label = normalize_label(top.text)
        if label in labels:
            raise TranslationError(f"{root.text}/{top.text}: fault class {label!r} appears twice")
        if not _has_condition(top):
            raise EmptyFaultClass(f"{root.text}/{top.text}: fault class has no condition below it")
        labels.append(label)
    t.ids.update(labels)

    tops = []
    for top, label in zip(root.children, labels):
        where = f"{root.text}/{top.text}"
        if not top.children:
            child = t.lower(MapNode(label, top.annotation), root.text)
        elif len(top.children) == 1 and top.annotation is None:
            child = t.lower(top.children[0], where)
        else:
            child = t.gate(t.fresh(f"{label}_gate"), top, where)
        tops.append(TopEvent(label, child))
    return FaultTree(normalize_label(root.text), tuple(t.schema.values()), (*t.nodes, *tops))


# --------------------------------------------------------------------------
# hook wrapper

@dataclass
class HookResult:
    tree: FaultTree
    attempts: int
    feedback: list[str] = field(default_factory=list)


def _findings_for(text: str) -> tuple[FaultTree | None, list[Finding]]:
    try:
        tree = parse_pasta(text)
    except Fault2FlowError as exc:
        return None, [Finding("error", "-", f"{exc.code}: {exc}")]
    report = self_check(tree)
    return (tree if report.passed else None), list(report.findings)


def render_feedback(findings: Sequence[Finding]) -> str:
    return "".join(f.render() + "\n" for f in findings)


def translate_with_hook(source: str, hook: TranslatorHook, retries: int = 3) -> HookResult:
    """Ask ``hook`` for DSL text until one answer parses and self-checks.

    Each retry receives the findings of every failed attempt so far.
    """
    if retries < 1:
        raise ValueError("retries must be at least 1")
    failures: list[list[Finding]] = []
    feedback = ""
    history = []
    for attempt in range(1, retries + 1):
        try:
            candidate = hook(source, feedback)
        except Fault2FlowError as exc:
            tree, findings = None, [Finding("error", "-", f"{exc.code}: {exc}")]
        else:
            tree, findings = _findings_for(candidate)
        if tree is not None:
            return HookResult(tree, attempt, history)
        failures.append(findings)
        rendered = render_feedback(findings)
        history.append(rendered)
        feedback += rendered
    raise HookExhausted(f"hook produced no valid fault tree in {retries} attempt(s)", failures)


def mindmap_hook(schema: Sequence[ParamSpec] = (), declare_measured: bool = False) -> TranslatorHook:
    """Deterministic hook: translate PlantUML source, ignoring feedback."""

    def hook(source: str, feedback: str) -> str:
        return emit_pasta(mindmap_to_faulttree(parse_plantuml(source), schema, declare_measured=declare_measured))

    return hook


def check_report_of(text: str) -> CheckReport:
    """Findings for a candidate text, parse errors included."""
    _, findings = _findings_for(text)
    return CheckReport(tuple(findings))
