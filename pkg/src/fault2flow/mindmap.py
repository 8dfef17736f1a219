"""PlantUML mind maps with machine-readable annotations.

A node label may end in one bracketed annotation: ``[AND]``, ``[OR]`` or a
threshold condition such as ``[C2H2/C2H4 < 0.1]``.  Only the ``*`` marker
dialect is emitted; ``+`` and ``-`` side markers are read as ``*``, and
colour or styling directives are dropped.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Union

from .errors import DepthJump, DslSyntaxError, MultipleRoots
from .pasta import OPERATORS, format_number

GATE_ANNOTATIONS = ("AND", "OR")


@dataclass(frozen=True)
class MapCondition:
    """``parameter`` is either a name or ``a/b`` for a ratio."""

    parameter: str
    operator: str
    threshold: float

    def __post_init__(self):
        if self.operator not in OPERATORS:
            raise ValueError(f"unknown operator {self.operator!r}")

    def __str__(self):
        return f"{self.parameter} {self.operator} {format_number(self.threshold)}"


Annotation = Union[str, MapCondition, None]


@dataclass(frozen=True)
class MapNode:
    text: str
    annotation: Annotation = None
    children: tuple["MapNode", ...] = ()

    @property
    def gate_kind(self) -> str | None:
        return self.annotation if isinstance(self.annotation, str) else None

    @property
    def condition(self) -> MapCondition | None:
        return self.annotation if isinstance(self.annotation, MapCondition) else None

    def walk(self, depth: int = 1) -> Iterator[tuple[int, "MapNode"]]:
        yield depth, self
        for child in self.children:
            yield from child.walk(depth + 1)


@dataclass(frozen=True)
class MindMap:
    root: MapNode

    def conditions(self) -> list[MapCondition]:
        return [n.condition for _, n in self.root.walk() if n.condition is not None]


_NODE = re.compile(r"(?P<markers>[*+\-]+)(?:\[#[^\]]*\])?_?(?:\s+(?P<rest>.*))?\Z")
_NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_PARAM = r"[A-Za-z_][A-Za-z0-9_]*(?:\s*/\s*[A-Za-z_][A-Za-z0-9_]*)?"
_ANNOTATION = re.compile(
    rf"(?:^|\s)\[\s*(?:(?P<gate>AND|OR)|(?P<param>{_PARAM})\s*(?P<op><=|>=|<|>)\s*(?P<num>{_NUMBER}))\s*\]\s*\Z",
    re.IGNORECASE,
)


def _split_label(rest: str) -> tuple[str, Annotation]:
    match = _ANNOTATION.search(rest)
    if match is None:
        return rest.strip(), None
    text = rest[: match.start()].strip()
    if match.group("gate"):
        return text, match.group("gate").upper()
    param = re.sub(r"\s+", "", match.group("param"))
    return text, MapCondition(param, match.group("op"), float(match.group("num")))


def parse_plantuml(text: str) -> MindMap:
    lines = text.splitlines()
    try:
        start = next(i for i, l in enumerate(lines) if l.strip() == "@startmindmap")
    except StopIteration:
        raise DslSyntaxError("missing @startmindmap", 1, 1) from None
    try:
        end = next(i for i in range(start + 1, len(lines)) if lines[i].strip() == "@endmindmap")
    except StopIteration:
        raise DslSyntaxError("missing @endmindmap", len(lines), 1) from None

    # (depth, text, annotation, children) built bottom-up via a stack
    stack: list[tuple[int, str, Annotation, list]] = []
    root = None
    in_style = False
    for lineno in range(start + 1, end):
        raw = lines[lineno].strip()
        if in_style:
            in_style = not raw.lower().startswith("</style>")
            continue
        if raw.lower().startswith("<style>"):
            in_style = True
            continue
        match = _NODE.match(raw)
        if match is None:
            continue  # comments, skinparams, titles and other styling
        depth = len(match.group("markers"))
        label, annotation = _split_label(match.group("rest") or "")
        if depth == 1:
            if root is not None or stack:
                raise MultipleRoots(f"line {lineno + 1}: second depth-1 node {label!r}")
        elif not stack or depth > stack[-1][0] + 1:
            parent_depth = stack[-1][0] if stack else 0
            raise DepthJump(
                f"line {lineno + 1}: node {label!r} at depth {depth} under a node at depth {parent_depth}"
            )
        while stack and stack[-1][0] >= depth:
            _close(stack)
        stack.append((depth, label, annotation, []))
    while len(stack) > 1:
        _close(stack)
    if not stack:
        raise DslSyntaxError("mind map has no nodes", end + 1, 1)
    _, label, annotation, children = stack[0]
    return MindMap(MapNode(label, annotation, tuple(children)))


def _close(stack) -> None:
    _, label, annotation, children = stack.pop()
    stack[-1][3].append(MapNode(label, annotation, tuple(children)))


def emit_plantuml(m: MindMap) -> str:
    lines = ["@startmindmap"]
    for depth, node in m.root.walk():
        parts = ["*" * depth]
        if node.text:
            parts.append(node.text)
        if node.annotation is not None:
            parts.append(f"[{node.annotation}]")
        lines.append(" ".join(parts))
    lines.append("@endmindmap")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# regulation outlines

_HEADING = re.compile(r"(#{1,6})\s+(.*\S)\s*\Z")
_BULLET = re.compile(r"(\s*)[-*+]\s+(.*\S)\s*\Z")


def outline_to_mindmap(markdown: str) -> MindMap:
    """Deterministic mind-map generator for structured regulation outlines.

    The first level-1 heading is the root, deeper headings nest by level and
    bullets nest under the latest heading by indentation (two spaces per
    level).  Prose lines are ignored; bracketed annotations pass through.
    """
    entries: list[tuple[int, str]] = []
    heading_depth = 0
    for raw in markdown.splitlines():
        heading = _HEADING.match(raw)
        if heading:
            heading_depth = len(heading.group(1))
            entries.append((heading_depth, heading.group(2)))
            continue
        bullet = _BULLET.match(raw)
        if bullet and heading_depth:
            indent = len(bullet.group(1).expandtabs(2)) // 2
            entries.append((heading_depth + 1 + indent, bullet.group(2)))
    if not entries or entries[0][0] != 1:
        raise DslSyntaxError("outline must start with a level-1 heading", 1, 1)
    body = "\n".join("*" * depth + " " + text for depth, text in entries)
    return parse_plantuml(f"@startmindmap\n{body}\n@endmindmap\n")
