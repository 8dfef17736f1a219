"""Deterministic interpreter for the workflow subset the compiler emits."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

from .errors import DanglingBranch, DivisionByZero, ExecutionError, MissingField
from .workflow import NodeKind, Workflow


@dataclass(frozen=True)
class ExecutionTrace:
    input: Mapping[str, float]
    visited: tuple[str, ...]
    triggered: frozenset[str]
    provenance_visited: tuple[str, ...]

    def dump(self, w: Workflow) -> str:
        return dump_trace(w, self)


def _operand_value(cond, assignment) -> float:
    num = float(assignment[cond.numerator])
    if cond.denominator is None:
        return num
    den = float(assignment[cond.denominator])
    if den == 0:
        raise DivisionByZero(f"{cond.operand}: denominator {cond.denominator!r} is zero")
    return num / den


def execute(w: Workflow, assignment: Mapping[str, float]) -> ExecutionTrace:
    """Walk the workflow from its trigger on one input.

    Conditions follow port 0 when they hold and port 1 otherwise; every
    other node fans out over port 0 in connection order.
    """
    trigger = w.trigger
    if trigger is None:
        raise ExecutionError("workflow needs exactly one trigger")
    for f in trigger.fields:
        if f.name not in assignment:
            raise MissingField(f"input has no value for field {f.name!r}")

    visited: list[str] = []
    stack = [trigger.name]
    while stack:
        name = stack.pop()
        visited.append(name)
        node = w.by_name[name]
        ports = w.outgoing.get(name, {})
        if node.kind is NodeKind.CONDITION:
            missing = [f for f in node.condition.fields if f not in assignment]
            if missing:
                raise MissingField(f"input has no value for field {missing[0]!r}")
            port = 0 if node.condition.holds(_operand_value(node.condition, assignment)) else 1
            targets = ports.get(port, ())
            if not targets:
                raise DanglingBranch(f"{name!r} took branch {port}, which is not connected")
        else:
            targets = ports.get(0, ())
        # reversed so the first connection is explored first
        stack.extend(reversed(targets))

    outputs = [w.by_name[n] for n in visited if w.by_name[n].kind is NodeKind.OUTPUT]
    return ExecutionTrace(
        input=dict(assignment),
        visited=tuple(visited),
        triggered=frozenset(n.label for n in outputs if n.is_fault),
        provenance_visited=tuple(
            w.by_name[n].provenance for n in visited if w.by_name[n].provenance is not None
        ),
    )


TraceOrError = Union[ExecutionTrace, ExecutionError]


def batch_execute(
    w: Workflow, inputs: Sequence[Mapping[str, float]], workers: int | None = None
) -> list[TraceOrError]:
    """Execute every input; failures are returned in place, not raised."""

    def one(assignment):
        try:
            return execute(w, assignment)
        except ExecutionError as exc:
            return exc

    if workers and workers > 1 and len(inputs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, inputs))
    return [one(a) for a in inputs]


def dump_trace(w: Workflow, trace: ExecutionTrace) -> str:
    lines = [f"{name} [{w.by_name[name].provenance or '-'}]" for name in trace.visited]
    fired = ",".join(sorted(trace.triggered)) or "none"
    lines.append(f"TRIGGERED: {fired}")
    return "\n".join(lines) + "\n"
