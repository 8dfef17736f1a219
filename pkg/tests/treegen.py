"""Seeded generators of random fault trees and mind maps for property tests."""

from random import Random

from fault2flow.mindmap import MapCondition, MapNode, MindMap
from fault2flow.pasta import BasicEvent, Condition, FaultTree, Gate, ParamSpec, TopEvent

OPS = ("<", "<=", ">", ">=")
UNITS = ("µL/L", "°C", "%", "A", "")


def random_tree(rng: Random, max_depth: int = 6, max_leaves: int = 12, kofn: bool = True) -> FaultTree:
    n_measured = rng.randint(1, 4)
    schema = []
    for i in range(n_measured):
        plausible = (0.0, float(rng.choice((10, 100, 1000)))) if rng.random() < 0.5 else None
        schema.append(ParamSpec(f"m{i}", rng.choice(UNITS), "measured", None, plausible))
    if n_measured >= 2:
        for j in range(rng.randint(0, 2)):
            a, b = rng.sample(range(n_measured), 2)
            schema.append(ParamSpec(f"r{j}", "", "derived", (f"m{a}", f"m{b}")))

    basics: list[BasicEvent] = []
    gates: list[Gate] = []

    def new_basic():
        spec = rng.choice(schema)
        if spec.derived:
            threshold = rng.choice((0.1, 0.5, 1, 2.5, 3))
        else:
            threshold = rng.choice((-5, 0, 1.5, 10, 42, 99.25))
        b = BasicEvent(f"b{len(basics)}", Condition(spec.name, rng.choice(OPS), float(threshold)))
        basics.append(b)
        return b.id

    def build(depth):
        if basics and (len(basics) >= max_leaves or rng.random() < 0.1):
            return rng.choice(basics).id  # shared leaf
        if depth >= max_depth or rng.random() < 0.45:
            return new_basic()
        width = rng.randint(1, 4)
        children = tuple(build(depth + 1) for _ in range(width))
        kind = rng.choice(("and", "or", "kofn") if kofn else ("and", "or"))
        g = Gate(f"g{len(gates)}", kind, children, rng.randint(1, width) if kind == "kofn" else None)
        gates.append(g)
        return g.id

    tops = [TopEvent(f"fault_{i}", build(1)) for i in range(rng.randint(1, 3))]
    return FaultTree(f"tree_{rng.randrange(10**6)}", tuple(schema), (*basics, *gates, *tops))


WORDS = ("oil", "gas", "temp", "high", "low", "arc", "H2", "fan", "code", "2")


def random_mindmap(rng: Random, max_depth: int = 6, max_fanout: int = 5) -> MindMap:
    def text():
        return " ".join(rng.choice(WORDS) for _ in range(rng.randint(1, 3)))

    def annotation(leaf):
        r = rng.random()
        if leaf or r < 0.3:
            param = rng.choice(("H2", "CH4", "C2H2/C2H4", "x"))
            return MapCondition(param, rng.choice(OPS), rng.choice((0.1, 3.0, 150.0, -2.5)))
        if r < 0.6:
            return rng.choice(("AND", "OR"))
        return None

    def node(depth):
        n = 0 if depth >= max_depth else rng.randint(0, max_fanout)
        kids = tuple(node(depth + 1) for _ in range(n))
        return MapNode(text(), annotation(not kids) if rng.random() < 0.8 else None, kids)

    return MindMap(node(1))
