"""Leaf-truth regions of a set of threshold conditions.

The real line of every constrained parameter is cut at its thresholds into
open cells and threshold points.  A *region* picks one cell per parameter;
its representative assignment of measured values is found by solving the
ratio constraints along the ratio graph (measured parameters as vertices,
referenced ratios as edges).  Regions whose realized assignment does not
reproduce the intended leaf truths (only possible when the ratio graph has
cycles) are dropped.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

from .pasta import Condition, FaultTree, ParamSpec


@dataclass(frozen=True)
class Cell:
    value: float
    truths: tuple[bool, ...]
    point: bool


@dataclass(frozen=True)
class Region:
    values: Mapping[str, float]
    assignment: Mapping[str, float]
    truths: Mapping[Condition, bool]


def _open_representative(lo: float, hi: float) -> float:
    if math.isinf(lo) and math.isinf(hi):
        return 1.0 if lo == 0 else 0.0
    if math.isinf(lo):
        return hi - max(1.0, abs(hi))
    if math.isinf(hi):
        return lo + max(1.0, abs(lo))
    return (lo + hi) / 2


def parameter_cells(conditions: Sequence[Condition], positive: bool = False) -> list[Cell]:
    """Distinct truth patterns of ``conditions`` (all on one parameter).

    Open cells are preferred as representatives; a threshold point only
    survives when its truth pattern differs from both neighbouring cells.
    """
    thresholds = sorted({c.threshold for c in conditions})
    lower = 0.0 if positive else -math.inf
    if positive:
        thresholds = [t for t in thresholds if t > 0]
    bounds = [lower, *thresholds, math.inf]
    candidates = [
        (False, _open_representative(a, b) if not (a == 0 and math.isinf(b)) else 1.0)
        for a, b in zip(bounds, bounds[1:])
    ]
    candidates += [(True, t) for t in thresholds]
    cells: dict[tuple[bool, ...], Cell] = {}
    for point, value in candidates:
        truths = tuple(c.holds(value) for c in conditions)
        cells.setdefault(truths, Cell(value, truths, point))
    return sorted(cells.values(), key=lambda c: c.value)


def _ratio_solve(known: float, ratio: float, solve_denominator: bool) -> float:
    """Value of the free operand, nudged by a few ulps so the ratio is exact."""
    guess = known / ratio if solve_denominator else ratio * known

    def ok(x):
        return x != 0 and ((known / x) if solve_denominator else (x / known)) == ratio

    if ok(guess):
        return guess
    up = down = guess
    for _ in range(4):
        up, down = math.nextafter(up, math.inf), math.nextafter(down, -math.inf)
        for x in (up, down):
            if ok(x):
                return x
    return guess


def neutral_value(spec: ParamSpec) -> float:
    """Midpoint of the plausible range when declared, else 1.0."""
    if spec.plausible is not None:
        lo, hi = spec.plausible
        mid = (lo + hi) / 2
        if mid > 0:
            return mid
    return 1.0


class RegionSpace:
    """Cells and region enumeration for a schema and a set of conditions."""

    def __init__(self, schema: Iterable[ParamSpec], conditions: Iterable[Condition]):
        self.params = {p.name: p for p in schema}
        self.conditions = list(dict.fromkeys(conditions))
        by_param: dict[str, list[Condition]] = {}
        for cond in self.conditions:
            by_param.setdefault(cond.parameter, []).append(cond)
        self.by_param = by_param
        positive = set()
        for name in by_param:
            spec = self.params[name]
            if spec.derived:
                positive.add(name)
                positive.update(spec.formula)
        self.positive = positive
        self.cells = {
            name: parameter_cells(conds, name in positive) for name, conds in by_param.items()
        }

    @classmethod
    def of_tree(cls, tree: FaultTree, *others: FaultTree) -> "RegionSpace":
        schema = {p.name: p for t in (*others, tree) for p in t.schema}
        conds = [b.condition for t in (tree, *others) for b in t.basic_events()]
        return cls(schema.values(), conds)

    @property
    def size(self) -> int:
        return math.prod(len(c) for c in self.cells.values())

    # -- realization -----------------------------------------------------

    def realize(self, values: Mapping[str, float]) -> dict[str, float]:
        """Measured values reproducing the requested parameter values.

        Ratio components without a directly fixed vertex are rooted at a
        denominator of one unit.
        """
        out: dict[str, float] = {}
        edges = []
        for name, value in values.items():
            spec = self.params[name]
            if spec.derived:
                edges.append((spec.formula[0], spec.formula[1], value))
            else:
                out[name] = value

        def propagate():
            changed = True
            while changed:
                changed = False
                for num, den, ratio in edges:
                    if num in out and den not in out:
                        out[den] = _ratio_solve(out[num], ratio, True)
                        changed = True
                    elif den in out and num not in out:
                        out[num] = _ratio_solve(out[den], ratio, False)
                        changed = True

        propagate()
        for num, den, _ in edges:
            if num not in out and den not in out:
                out[den] = 1.0
                propagate()
        return {
            name: out[name] if name in out else neutral_value(spec)
            for name, spec in self.params.items()
            if not spec.derived
        }

    def parameter_values(self, assignment: Mapping[str, float]) -> dict[str, float]:
        out = {}
        for name in self.by_param:
            spec = self.params[name]
            if spec.derived:
                num, den = (assignment[o] for o in spec.formula)
                out[name] = num / den if den != 0 else math.nan
            else:
                out[name] = assignment[name]
        return out

    def truths(self, assignment: Mapping[str, float]) -> dict[Condition, bool]:
        values = self.parameter_values(assignment)
        return {c: c.holds(values[c.parameter]) for c in self.conditions}

    # -- enumeration -----------------------------------------------------

    def regions(self, cap: int | None = None) -> list[Region]:
        """One region per satisfiable leaf-truth combination (product order)."""
        names = list(self.cells)
        out = []
        for combo in itertools.product(*(self.cells[n] for n in names)):
            if cap is not None and len(out) >= cap:
                break
            values = {n: cell.value for n, cell in zip(names, combo)}
            region = self._region(values, combo, names)
            if region is not None:
                out.append(region)
        return out

    def _region(self, values, combo, names):
        assignment = self.realize(values)
        truths = self.truths(assignment)
        for name, cell in zip(names, combo):
            got = tuple(truths[c] for c in self.by_param[name])
            if got != cell.truths:
                return None
        return Region(values, assignment, truths)

    def contexts(self, exclude: str, cap: int | None = None) -> Iterator[dict[str, float]]:
        """Cell representatives of every parameter except ``exclude``."""
        names = [n for n in self.cells if n != exclude]
        for i, combo in enumerate(itertools.product(*(self.cells[n] for n in names))):
            if cap is not None and i >= cap:
                return
            yield {n: cell.value for n, cell in zip(names, combo)}


def leaf_regions(tree: FaultTree, cap: int | None = None) -> list[Region]:
    return RegionSpace.of_tree(tree).regions(cap)


def truths_by_basic(tree: FaultTree, region: Region) -> dict[str, bool]:
    return {b.id: region.truths[b.condition] for b in tree.basic_events()}
