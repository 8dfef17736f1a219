"""
PASTA-style fault-tree DSL: data model, parser, canonical emitter,
self-check and direct evaluation.

The grammar is line oriented::

    tree <id>
    param <id> unit "<text>" [range <lo> <hi>]
    ratio <id> = <id> / <id> [range <lo> <hi>]
    basic <id> : <param-id> <op> <number>
    gate <id> = and(<ids>) | or(<ids>) | kofn(<k>; <ids>)
    top <fault_class_id> = <id>

``#`` starts a comment, identifiers match ``[a-z_][a-z0-9_]*``.
References may point forward; they are resolved once the whole source has
been read.
"""

from __future__ import annotations

import math
import operator
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Union

from .errors import (
    CycleDetected,
    DivisionByZero,
    DslSyntaxError,
    DuplicateId,
    MissingParameter,
    UnresolvedReference,
)

OPERATORS = ("<", "<=", ">", ">=")
COMPARE = {"<": operator.lt, "<=": operator.le, ">": operator.gt, ">=": operator.ge}
GATE_KINDS = ("and", "or", "kofn")
IDENTIFIER = re.compile(r"[a-z_][a-z0-9_]*\Z")
SNAKE_CASE = re.compile(r"[a-z][a-z0-9]*(?:_[a-z0-9]+)*\Z")
NO_FAULT = "no_fault"


def format_number(value: float) -> str:
    """Shortest text that parses back to exactly ``value``."""
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


@dataclass(frozen=True)
class ParamSpec:
    name: str
    unit: str = ""
    kind: str = "measured"
    formula: tuple[str, str] | None = None
    plausible: tuple[float, float] | None = None

    @property
    def derived(self) -> bool:
        return self.kind == "derived"


@dataclass(frozen=True)
class Condition:
    parameter: str
    operator: str
    threshold: float

    def __post_init__(self):
        if self.operator not in OPERATORS:
            raise ValueError(f"unknown operator {self.operator!r}")
        if not math.isfinite(self.threshold):
            raise ValueError(f"threshold must be finite, got {self.threshold!r}")

    def holds(self, value: float) -> bool:
        return COMPARE[self.operator](value, self.threshold)

    def __str__(self):
        return f"{self.parameter} {self.operator} {format_number(self.threshold)}"


@dataclass(frozen=True)
class BasicEvent:
    id: str
    condition: Condition


@dataclass(frozen=True)
class Gate:
    id: str
    kind: str
    children: tuple[str, ...]
    k: int | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if (self.kind == "kofn") != (self.k is not None):
            raise ValueError("k is required for kofn gates and only for them")


@dataclass(frozen=True)
class TopEvent:
    """A fault class. Its id doubles as the fault-class label."""

    id: str
    child: str

    @property
    def label(self) -> str:
        return self.id


Node = Union[TopEvent, Gate, BasicEvent]


@dataclass(frozen=True, eq=False)
class FaultTree:
    """Immutable fault tree.

    ``nodes`` keeps declaration order, which fixes the order of top events.
    Structural equality ignores the order of non-top declarations.
    """

    name: str
    schema: tuple[ParamSpec, ...]
    nodes: tuple[Node, ...]

    def __post_init__(self):
        object.__setattr__(self, "schema", tuple(self.schema))
        object.__setattr__(self, "nodes", tuple(self.nodes))
        _check_structure(self)

    # structural identity ------------------------------------------------

    def _key(self):
        return (self.name, self.schema, tuple(self.tops), frozenset(self.nodes))

    def __eq__(self, other):
        if not isinstance(other, FaultTree):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        return f"FaultTree({self.name!r}, {len(self.schema)} params, {len(self.nodes)} nodes)"

    # lookups ------------------------------------------------------------

    @cached_property
    def by_id(self) -> Mapping[str, Node]:
        return {node.id: node for node in self.nodes}

    @cached_property
    def params(self) -> Mapping[str, ParamSpec]:
        return {p.name: p for p in self.schema}

    @property
    def tops(self) -> list[TopEvent]:
        return [n for n in self.nodes if isinstance(n, TopEvent)]

    @property
    def fault_classes(self) -> list[str]:
        return [t.label for t in self.tops]

    def children(self, node_id: str) -> tuple[str, ...]:
        node = self.by_id[node_id]
        if isinstance(node, TopEvent):
            return (node.child,)
        if isinstance(node, Gate):
            return node.children
        return ()

    @cached_property
    def edges(self) -> frozenset[tuple[str, str]]:
        """Parent to child edges (the logic graph's directed edge set)."""
        return frozenset(
            (node.id, child) for node in self.nodes for child in self.children(node.id)
        )

    def reachable(self) -> list[str]:
        """Node ids reachable from the top events, in depth-first pre-order."""
        seen: dict[str, None] = {}

        def visit(node_id):
            if node_id in seen:
                return
            seen[node_id] = None
            for child in self.children(node_id):
                visit(child)

        for top in self.tops:
            visit(top.id)
        return list(seen)

    def basic_events(self) -> list[BasicEvent]:
        """Reachable basic events in first-use order."""
        return [self.by_id[i] for i in self.reachable() if isinstance(self.by_id[i], BasicEvent)]

    def descendants(self, node_id: str) -> frozenset[str]:
        return self._descendants[node_id]

    @cached_property
    def _descendants(self) -> Mapping[str, frozenset[str]]:
        memo: dict[str, frozenset[str]] = {}

        def walk(node_id):
            if node_id not in memo:
                below = {node_id}
                for child in self.children(node_id):
                    below |= walk(child)
                memo[node_id] = frozenset(below)
            return memo[node_id]

        for node in self.nodes:
            walk(node.id)
        return memo

    def paths(self) -> list[tuple[str, ...]]:
        """All top-event to basic-event paths."""
        found = []

        def walk(path):
            node = self.by_id[path[-1]]
            if isinstance(node, BasicEvent):
                found.append(path)
                return
            for child in dict.fromkeys(self.children(node.id)):
                walk(path + (child,))

        for top in self.tops:
            walk((top.id,))
        return found

    def measured_inputs(self, conditions: Iterable[Condition] | None = None) -> list[str]:
        """Measured parameters referenced by basic events, first-reference order."""
        if conditions is None:
            conditions = [b.condition for b in self.basic_events()]
        out: dict[str, None] = {}
        for cond in conditions:
            spec = self.params[cond.parameter]
            for name in spec.formula if spec.derived else (spec.name,):
                out.setdefault(name)
        return list(out)

    def replace(self, *, name=None, schema=None, nodes=None) -> "FaultTree":
        return FaultTree(
            self.name if name is None else name,
            self.schema if schema is None else schema,
            self.nodes if nodes is None else nodes,
        )


def _check_structure(tree: FaultTree) -> None:
    seen_params: set[str] = set()
    for spec in tree.schema:
        if spec.name in seen_params:
            raise DuplicateId(f"parameter {spec.name!r} declared twice")
        seen_params.add(spec.name)
    params = {p.name: p for p in tree.schema}
    for spec in tree.schema:
        if spec.derived:
            if spec.formula is None:
                raise UnresolvedReference(f"derived parameter {spec.name!r} has no formula")
            for operand in spec.formula:
                if operand not in params:
                    raise UnresolvedReference(
                        f"ratio {spec.name!r} references undeclared parameter {operand!r}"
                    )
                if params[operand].derived:
                    raise UnresolvedReference(
                        f"ratio {spec.name!r} references derived parameter {operand!r}"
                    )

    ids: dict[str, Node] = {}
    for node in tree.nodes:
        if node.id in ids:
            raise DuplicateId(f"node {node.id!r} declared twice")
        ids[node.id] = node
    if not any(isinstance(n, TopEvent) for n in tree.nodes):
        raise UnresolvedReference("tree declares no top event")

    for node in tree.nodes:
        if isinstance(node, BasicEvent):
            if node.condition.parameter not in params:
                raise UnresolvedReference(
                    f"basic event {node.id!r} references undeclared parameter "
                    f"{node.condition.parameter!r}"
                )
            continue
        kids = (node.child,) if isinstance(node, TopEvent) else node.children
        for child in kids:
            if child not in ids:
                raise UnresolvedReference(f"{node.id!r} references undeclared node {child!r}")
            if isinstance(ids[child], TopEvent):
                raise UnresolvedReference(
                    f"{node.id!r} references top event {child!r}; top events cannot be children"
                )

    # three-colour DFS, reports the first node found on a cycle
    state: dict[str, int] = {}

    def visit(node_id):
        state[node_id] = 1
        node = ids[node_id]
        kids = (node.child,) if isinstance(node, TopEvent) else getattr(node, "children", ())
        for child in kids:
            if state.get(child) == 1:
                raise CycleDetected(f"cycle through node {child!r}")
            if child not in state:
                visit(child)
        state[node_id] = 2

    for node in tree.nodes:
        if node.id not in state:
            visit(node.id)


# --------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"[^"\n]*")
  | (?P<op><=|>=|<|>)
  | (?P<punct>[=:/(),;])
    """,
    re.VERBOSE,
)


@dataclass
class _Token:
    kind: str
    text: str
    column: int


class _LineParser:
    """Recursive-descent parser over the tokens of a single statement."""

    def __init__(self, line: str, lineno: int):
        self.lineno = lineno
        self.tokens = self._tokenize(line)
        self.pos = 0

    def _tokenize(self, line):
        tokens, pos = [], 0
        while pos < len(line):
            if line[pos] == "#":
                break
            match = _TOKEN.match(line, pos)
            if match is None:
                raise DslSyntaxError(f"unexpected character {line[pos]!r}", self.lineno, pos + 1)
            if match.lastgroup != "ws":
                tokens.append(_Token(match.lastgroup, match.group(), pos + 1))
            pos = match.end()
        self.end_column = pos + 1
        return tokens

    def error(self, message, token=None):
        column = token.column if token else self.end_column
        raise DslSyntaxError(message, self.lineno, column)

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self, expected):
        token = self.peek()
        if token is None:
            self.error(f"expected {expected}, found end of line")
        self.pos += 1
        return token

    def keyword(self, word):
        token = self.next(repr(word))
        if token.kind != "ident" or token.text != word:
            self.error(f"expected {word!r}, found {token.text!r}", token)

    def punct(self, char):
        token = self.next(repr(char))
        if token.text != char:
            self.error(f"expected {char!r}, found {token.text!r}", token)

    def ident(self):
        token = self.next("identifier")
        if token.kind != "ident":
            self.error(f"expected identifier, found {token.text!r}", token)
        if not IDENTIFIER.match(token.text):
            self.error(f"identifier {token.text!r} must match [a-z_][a-z0-9_]*", token)
        return token.text

    def number(self):
        token = self.next("number")
        if token.kind != "number":
            self.error(f"expected number, found {token.text!r}", token)
        return float(token.text)

    def integer(self):
        token = self.next("integer")
        if token.kind != "number" or not re.fullmatch(r"\d+", token.text):
            self.error(f"expected integer, found {token.text!r}", token)
        return int(token.text)

    def string(self):
        token = self.next("quoted string")
        if token.kind != "string":
            self.error(f"expected quoted string, found {token.text!r}", token)
        return token.text[1:-1]

    def operator(self):
        token = self.next("comparison operator")
        if token.kind != "op":
            self.error(f"expected one of {', '.join(OPERATORS)}, found {token.text!r}", token)
        return token.text

    def at_keyword(self, word):
        token = self.peek()
        return token is not None and token.kind == "ident" and token.text == word

    def done(self):
        token = self.peek()
        if token is not None:
            self.error(f"unexpected {token.text!r} after statement", token)

    def ident_list(self):
        ids = []
        if self.peek() is not None and self.peek().text == ")":
            return ids
        ids.append(self.ident())
        while self.peek() is not None and self.peek().text == ",":
            self.pos += 1
            ids.append(self.ident())
        return ids

    def optional_range(self):
        if not self.at_keyword("range"):
            return None
        self.pos += 1
        lo, hi = self.number(), self.number()
        if not lo < hi:
            self.error(f"range lower bound {lo} must be below upper bound {hi}")
        return (lo, hi)


def _parse_statements(text: str):
    """Yield (lineno, statement-tuple) for every non-blank line."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        p = _LineParser(raw, lineno)
        if not p.tokens:
            continue
        head = p.next("statement")
        word = head.text
        if word == "tree":
            stmt = ("tree", p.ident())
        elif word == "param":
            name = p.ident()
            p.keyword("unit")
            unit = p.string()
            stmt = ("param", ParamSpec(name, unit, "measured", None, p.optional_range()))
        elif word == "ratio":
            name = p.ident()
            p.punct("=")
            num = p.ident()
            p.punct("/")
            den = p.ident()
            stmt = ("param", ParamSpec(name, "", "derived", (num, den), p.optional_range()))
        elif word == "basic":
            name = p.ident()
            p.punct(":")
            param = p.ident()
            op = p.operator()
            tok = p.peek()
            threshold = p.number()
            if not math.isfinite(threshold):
                p.error("threshold must be finite", tok)
            stmt = ("node", BasicEvent(name, Condition(param, op, threshold)))
        elif word == "gate":
            name = p.ident()
            p.punct("=")
            kind_tok = p.next("gate kind")
            kind = kind_tok.text
            if kind not in GATE_KINDS:
                p.error(f"unknown gate kind {kind!r}; expected and, or, kofn", kind_tok)
            p.punct("(")
            k = None
            if kind == "kofn":
                k = p.integer()
                p.punct(";")
            children = p.ident_list()
            p.punct(")")
            stmt = ("node", Gate(name, kind, tuple(children), k))
        elif word == "top":
            name = p.ident()
            p.punct("=")
            stmt = ("node", TopEvent(name, p.ident()))
        else:
            p.error(f"unknown statement {word!r}", head)
        p.done()
        yield lineno, stmt


def parse_pasta(text: str) -> FaultTree:
    """Parse DSL source into a :class:`FaultTree`."""
    name = None
    schema: list[ParamSpec] = []
    nodes: list[Node] = []
    declared: dict[str, int] = {}
    for lineno, (kind, value) in _parse_statements(text):
        if kind == "tree":
            if name is not None:
                raise DslSyntaxError("second 'tree' header", lineno, 1)
            name = value
            continue
        if name is None:
            raise DslSyntaxError("source must start with a 'tree <id>' header", lineno, 1)
        if kind == "param":
            if any(p.name == value.name for p in schema):
                raise DuplicateId(f"parameter {value.name!r} declared twice (line {lineno})")
            schema.append(value)
        else:
            if value.id in declared:
                raise DuplicateId(
                    f"node {value.id!r} declared twice (lines {declared[value.id]} and {lineno})"
                )
            declared[value.id] = lineno
            nodes.append(value)
    if name is None:
        raise DslSyntaxError("empty source: missing 'tree <id>' header", 1, 1)
    return FaultTree(name, tuple(schema), tuple(nodes))


def parse_schema(text: str) -> tuple[ParamSpec, ...]:
    """Collect the parameter declarations of a source, ignoring everything else.

    Useful for handing an existing tree's schema to the mind-map translator.
    """
    return tuple(value for _, (kind, value) in _parse_statements(text) if kind == "param")


# --------------------------------------------------------------------------
# emitting

def _param_line(spec: ParamSpec) -> str:
    if spec.derived:
        line = f"ratio {spec.name} = {spec.formula[0]} / {spec.formula[1]}"
    else:
        line = f'param {spec.name} unit "{spec.unit}"'
    if spec.plausible is not None:
        lo, hi = spec.plausible
        line += f" range {format_number(lo)} {format_number(hi)}"
    return line


def _node_line(node: Node) -> str:
    if isinstance(node, BasicEvent):
        return f"basic {node.id} : {node.condition}"
    if isinstance(node, Gate):
        inner = ", ".join(node.children)
        if node.kind == "kofn":
            inner = f"{node.k}; {inner}"
        return f"gate {node.id} = {node.kind}({inner})"
    return f"top {node.id} = {node.child}"


def emit_pasta(tree: FaultTree) -> str:
    """Canonical source: schema, then each top preceded by its not-yet-emitted
    descendants in post-order, then any unreachable declarations."""
    lines = [f"tree {tree.name}"]
    lines.extend(_param_line(spec) for spec in tree.schema)
    emitted: set[str] = set()

    def post_order(node_id):
        if node_id in emitted:
            return
        emitted.add(node_id)
        for child in tree.children(node_id):
            post_order(child)
        lines.append(_node_line(tree.by_id[node_id]))

    for top in tree.tops:
        post_order(top.id)
    for node in tree.nodes:
        post_order(node.id)
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# self-check

@dataclass(frozen=True)
class Finding:
    severity: str
    node: str
    message: str

    def render(self) -> str:
        return f"{self.severity} {self.node} {self.message}"


@dataclass(frozen=True)
class CheckReport:
    findings: tuple[Finding, ...] = ()

    @property
    def passed(self) -> bool:
        return not self.errors

    @property
    def errors(self) -> list[Finding]:
        return [f for f in self.findings if f.severity == "error"]

    @property
    def warnings(self) -> list[Finding]:
        return [f for f in self.findings if f.severity == "warning"]

    def render(self) -> str:
        status = "passed" if self.passed else "FAILED"
        body = "".join(f.render() + "\n" for f in self.findings)
        return f"{body}{status}: {len(self.errors)} error(s), {len(self.warnings)} warning(s)\n"


@dataclass(frozen=True)
class Interval:
    """Real interval with open or closed ends; infinite bounds are unbounded."""

    lo: float = -math.inf
    lo_closed: bool = False
    hi: float = math.inf
    hi_closed: bool = False

    @classmethod
    def of(cls, cond: Condition) -> "Interval":
        t = cond.threshold
        return {
            "<": cls(hi=t),
            "<=": cls(hi=t, hi_closed=True),
            ">": cls(lo=t),
            ">=": cls(lo=t, lo_closed=True),
        }[cond.operator]

    @classmethod
    def negation_of(cls, cond: Condition) -> "Interval":
        flipped = {"<": ">=", "<=": ">", ">": "<=", ">=": "<"}[cond.operator]
        return cls.of(Condition(cond.parameter, flipped, cond.threshold))

    def __and__(self, other: "Interval") -> "Interval":
        if self.lo > other.lo or (self.lo == other.lo and not self.lo_closed):
            lo, lo_closed = self.lo, self.lo_closed
        else:
            lo, lo_closed = other.lo, other.lo_closed
        if self.hi < other.hi or (self.hi == other.hi and not self.hi_closed):
            hi, hi_closed = self.hi, self.hi_closed
        else:
            hi, hi_closed = other.hi, other.hi_closed
        return Interval(lo, lo_closed, hi, hi_closed)

    @property
    def empty(self) -> bool:
        if self.lo < self.hi:
            return False
        return not (self.lo == self.hi and self.lo_closed and self.hi_closed)


def self_check(tree: FaultTree) -> CheckReport:
    findings: list[Finding] = []
    reachable = set(tree.reachable())
    for node in tree.nodes:
        if node.id not in reachable:
            findings.append(Finding("error", node.id, "unreachable from every top event"))
        if isinstance(node, Gate):
            arity = len(node.children)
            if arity < 1:
                findings.append(Finding("error", node.id, "gate arity violation: no children"))
            if node.kind == "kofn" and not 1 <= node.k <= arity:
                findings.append(
                    Finding("error", node.id, f"kofn bound violation: k={node.k} with {arity} children")
                )
            if node.kind == "and":
                findings.extend(_unsatisfiable_siblings(tree, node))
    labels: dict[str, str] = {}
    for top in tree.tops:
        if top.label == NO_FAULT:
            findings.append(Finding("error", top.id, f"duplicate fault class: {NO_FAULT!r} is reserved"))
        if top.label in labels:
            findings.append(Finding("error", top.id, f"duplicate fault class {top.label!r}"))
        labels[top.label] = top.id

    used: set[str] = set()
    for node in tree.nodes:
        if isinstance(node, BasicEvent):
            spec = tree.params[node.condition.parameter]
            used.add(spec.name)
            if spec.derived:
                used.update(spec.formula)
            if spec.plausible is not None:
                lo, hi = spec.plausible
                if not lo <= node.condition.threshold <= hi:
                    findings.append(
                        Finding(
                            "warning",
                            node.id,
                            f"threshold {format_number(node.condition.threshold)} outside "
                            f"plausible range [{format_number(lo)}, {format_number(hi)}] of {spec.name}",
                        )
                    )
    for spec in tree.schema:
        if spec.name not in used:
            findings.append(Finding("warning", spec.name, "parameter never referenced"))
    return CheckReport(tuple(findings))


def _unsatisfiable_siblings(tree: FaultTree, gate: Gate) -> list[Finding]:
    per_param: dict[str, list[Condition]] = {}
    for child in dict.fromkeys(gate.children):
        node = tree.by_id.get(child)
        if isinstance(node, BasicEvent):
            per_param.setdefault(node.condition.parameter, []).append(node.condition)
    out = []
    for param, conds in per_param.items():
        span = Interval()
        for cond in conds:
            span = span & Interval.of(cond)
        if span.empty:
            text = " and ".join(str(c) for c in conds)
            out.append(Finding("warning", gate.id, f"unsatisfiable conjunction: {text}"))
    return out


# --------------------------------------------------------------------------
# evaluation

def parameter_value(tree: FaultTree, assignment: Mapping[str, float], name: str) -> float:
    spec = tree.params[name]
    if not spec.derived:
        if name not in assignment:
            raise MissingParameter(f"no value for measured parameter {name!r}")
        return float(assignment[name])
    num, den = (parameter_value(tree, assignment, operand) for operand in spec.formula)
    if den == 0:
        raise DivisionByZero(f"derived parameter {name!r}: denominator {spec.formula[1]!r} is zero")
    return num / den


def leaf_truths(tree: FaultTree, assignment: Mapping[str, float]) -> dict[str, bool]:
    values: dict[str, float] = {}
    truths = {}
    for basic in tree.basic_events():
        param = basic.condition.parameter
        if param not in values:
            values[param] = parameter_value(tree, assignment, param)
        truths[basic.id] = basic.condition.holds(values[param])
    return truths


def evaluate_truths(tree: FaultTree, truths: Mapping[str, bool]) -> frozenset[str]:
    """Fault classes fired when basic events take the given truth values."""
    memo: dict[str, bool] = {}

    def value(node_id):
        if node_id in memo:
            return memo[node_id]
        node = tree.by_id[node_id]
        if isinstance(node, BasicEvent):
            result = truths[node_id]
        elif isinstance(node, TopEvent):
            result = value(node.child)
        else:
            hits = sum(value(c) for c in node.children)
            if node.kind == "and":
                result = hits == len(node.children)
            elif node.kind == "or":
                result = hits > 0
            else:
                result = hits >= node.k
        memo[node_id] = result
        return result

    return frozenset(top.label for top in tree.tops if value(top.id))


def evaluate(tree: FaultTree, assignment: Mapping[str, float]) -> frozenset[str]:
    """Fault classes triggered by a measured-parameter assignment."""
    for key, val in assignment.items():
        if not math.isfinite(val):
            raise ValueError(f"non-finite value for {key!r}")
    return evaluate_truths(tree, leaf_truths(tree, assignment))
