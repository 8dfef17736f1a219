"""Test synthesis and the verify-regenerate loop.

Expected results always come from :func:`~fault2flow.pasta.evaluate`, so a
suite is an executable statement of what the fault tree means.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping, Sequence

from .errors import ExecutionError, SchemaError, UnsatisfiableStrategy
from .executor import ExecutionTrace, batch_execute
from .metrics import e2e_reachability
from .pasta import FaultTree, evaluate
from .regions import RegionSpace
from .workflow import Workflow

ORIGINS = ("boundary", "region", "random")
DEFAULT_RANDOM_RANGE = (0.0, 100.0)


@dataclass(frozen=True)
class TestCase:
    __test__ = False  # keep pytest from collecting this class

    input: Mapping[str, float]
    expected: frozenset[str]
    origin: str

    def key(self):
        return tuple(sorted(self.input.items()))


@dataclass(frozen=True)
class TestStrategy:
    __test__ = False

    boundary_epsilon: float = 1e-3
    region_cap: int = 4096
    random_count: int = 16
    seed: int = 0
    origins: tuple[str, ...] = ORIGINS

    def __post_init__(self):
        if not self.boundary_epsilon > 0:
            raise ValueError("boundary_epsilon must be positive")
        unknown = set(self.origins) - set(ORIGINS)
        if unknown:
            raise ValueError(f"unknown test origins: {sorted(unknown)}")


def _boundary_cases(tree: FaultTree, space: RegionSpace, strategy: TestStrategy):
    eps = strategy.boundary_epsilon
    pairs = dict.fromkeys((b.condition.parameter, b.condition.threshold) for b in tree.basic_events())
    for param, t in pairs:
        for context in space.contexts(param, strategy.region_cap):
            for value in (t - eps, t, t + eps):
                if param in space.positive and value <= 0:
                    continue
                yield space.realize({**context, param: value})


def _random_cases(tree: FaultTree, strategy: TestStrategy):
    rng = random.Random(strategy.seed)
    measured = [p for p in tree.schema if not p.derived]
    made = attempts = 0
    while made < strategy.random_count and attempts < 10 * strategy.random_count:
        attempts += 1
        draw = {p.name: rng.uniform(*(p.plausible or DEFAULT_RANDOM_RANGE)) for p in measured}
        try:
            evaluate(tree, draw)
        except ExecutionError:
            continue
        made += 1
        yield draw


def generate_tests(tree: FaultTree, strategy: TestStrategy | None = None) -> list[TestCase]:
    """Boundary, region and random cases, deduplicated by input, in that order."""
    strategy = strategy or TestStrategy()
    space = RegionSpace.of_tree(tree)
    regions = space.regions(strategy.region_cap)
    if not regions:
        raise UnsatisfiableStrategy(f"tree {tree.name!r} has no satisfiable leaf-truth region")

    sources = {
        "boundary": lambda: _boundary_cases(tree, space, strategy),
        "region": lambda: (r.assignment for r in regions),
        "random": lambda: _random_cases(tree, strategy),
    }
    cases: dict[tuple, TestCase] = {}
    for origin in ORIGINS:
        if origin not in strategy.origins:
            continue
        for assignment in sources[origin]():
            try:
                expected = evaluate(tree, assignment)
            except ExecutionError:
                continue
            case = TestCase(dict(assignment), expected, origin)
            cases.setdefault(case.key(), case)
    return list(cases.values())


# --------------------------------------------------------------------------
# suite documents

def suite_document(tree: FaultTree, cases: Sequence[TestCase], strategy: TestStrategy | None = None) -> dict:
    doc = {"tree": tree.name}
    if strategy is not None:
        doc["strategy"] = {k: v for k, v in asdict(strategy).items() if k != "origins"}
        doc["strategy"]["origins"] = list(strategy.origins)
    doc["cases"] = [
        {"input": dict(c.input), "expected": sorted(c.expected), "origin": c.origin} for c in cases
    ]
    return doc


def dump_suite(tree: FaultTree, cases: Sequence[TestCase], strategy: TestStrategy | None = None) -> str:
    return json.dumps(suite_document(tree, cases, strategy), indent=2, ensure_ascii=False) + "\n"


def load_suite(text: str) -> list[TestCase]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("", f"not JSON: {exc}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("cases"), list):
        raise SchemaError("/cases", "expected a list of cases")
    cases = []
    for i, raw in enumerate(doc["cases"]):
        path = f"/cases/{i}"
        if not isinstance(raw, dict):
            raise SchemaError(path, "expected an object")
        inputs, expected, origin = raw.get("input"), raw.get("expected"), raw.get("origin", "region")
        if not isinstance(inputs, dict) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) for v in inputs.values()
        ):
            raise SchemaError(f"{path}/input", "expected a map of finite numbers")
        if not isinstance(expected, list) or not all(isinstance(x, str) for x in expected):
            raise SchemaError(f"{path}/expected", "expected a list of labels")
        if origin not in ORIGINS:
            raise SchemaError(f"{path}/origin", f"unknown origin {origin!r}")
        cases.append(TestCase({k: float(v) for k, v in inputs.items()}, frozenset(expected), origin))
    return cases


# --------------------------------------------------------------------------
# verification loop

@dataclass(frozen=True)
class Failure:
    case: TestCase
    actual: frozenset[str] | None
    trace: ExecutionTrace | None
    error: str | None = None

    def render(self) -> str:
        inputs = ", ".join(f"{k}={v!r}" for k, v in sorted(self.case.input.items()))
        expected = ",".join(sorted(self.case.expected)) or "none"
        if self.error is not None:
            return f"[{self.case.origin}] {inputs}: expected {expected}, raised {self.error}"
        actual = ",".join(sorted(self.actual)) or "none"
        path = " > ".join(self.trace.visited)
        return f"[{self.case.origin}] {inputs}: expected {expected}, got {actual} via {path}"


@dataclass
class VerifyReport:
    passed: bool
    iterations_used: int
    failures: list[Failure] = field(default_factory=list)
    coverage: float = 0.0
    workflow: Workflow | None = None
    traces: list[ExecutionTrace] = field(default_factory=list)

    def render(self) -> str:
        status = "passed" if self.passed else "FAILED"
        lines = [
            f"verify {status} after {self.iterations_used} iteration(s); "
            f"{len(self.failures)} failure(s); e2erc {self.coverage:.4f}"
        ]
        lines.extend(f.render() for f in self.failures)
        return "\n".join(lines) + "\n"


Regenerator = Callable[[FaultTree, Sequence[Failure]], Workflow]


def run_suite(w: Workflow, tests: Sequence[TestCase], workers: int | None = None):
    """Execute every case; returns (failures, successful traces)."""
    failures, traces = [], []
    results = batch_execute(w, [t.input for t in tests], workers)
    for case, result in zip(tests, results):
        if isinstance(result, ExecutionError):
            failures.append(Failure(case, None, None, f"{result.code}: {result}"))
            continue
        traces.append(result)
        if result.triggered != case.expected:
            failures.append(Failure(case, result.triggered, result))
    return failures, traces


def verify(
    tree: FaultTree,
    w: Workflow,
    tests: Sequence[TestCase],
    max_iterations: int = 5,
    regenerator: Regenerator | None = None,
    workers: int | None = None,
) -> VerifyReport:
    """Run the suite, feeding failures to ``regenerator`` until it passes or the cap is hit."""
    if max_iterations < 1:
        raise ValueError("max_iterations must be at least 1")
    iteration = 0
    while True:
        iteration += 1
        failures, traces = run_suite(w, tests, workers)
        if not failures or regenerator is None or iteration >= max_iterations:
            break
        w = regenerator(tree, failures)
    return VerifyReport(
        passed=not failures,
        iterations_used=iteration,
        failures=failures,
        coverage=e2e_reachability(tree, w, traces),
        workflow=w,
        traces=traces,
    )
