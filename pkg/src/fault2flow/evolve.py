"""Island-model evolutionary search over fault-tree genomes.

Genomes are DSL sources.  Every candidate is parsed, self-checked and
compared with the seed on every leaf-truth region; only candidates that are
exactly equivalent to the seed may enter an elite archive, so readability is
never bought with a change of diagnosis.

The default mutator is a set of semantics-preserving rewrites.  A model-backed
mutator plugs into the same ``(parent, inspirations, rng) -> child`` seam.
"""

from __future__ import annotations

import functools
import hashlib
import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from random import Random
from typing import Callable, Sequence

from .errors import Fault2FlowError, NotApplicable, SeedInvalid
from .metrics import ReadabilityWeights, readability_score, structural_shapes
from .pasta import (
    SNAKE_CASE,
    FaultTree,
    Gate,
    TopEvent,
    emit_pasta,
    evaluate_truths,
    parse_pasta,
    self_check,
)
from .regions import RegionSpace, truths_by_basic

Mutator = Callable[[str, Sequence[str], Random], str]


# --------------------------------------------------------------------------
# candidates and ordering

@dataclass(frozen=True)
class Candidate:
    genome: str
    valid: bool
    equivalent: bool
    readability: float
    size: int
    island: int = 0
    generation: int = 0
    id: str = ""

    @property
    def ok(self) -> bool:
        return self.valid and self.equivalent

    def fitness(self) -> dict:
        return {
            "valid": self.valid,
            "equivalent": self.equivalent,
            "readability": self.readability,
            "size": self.size,
            "id": self.id,
        }


def fitness_key(c: Candidate) -> tuple:
    """Sort key: smaller is fitter."""
    return (not c.ok, -c.readability, c.size, c.id)


def fitness_order(a: Candidate, b: Candidate) -> int:
    """-1 when ``a`` is fitter, 1 when ``b`` is, 0 for the same key."""
    ka, kb = fitness_key(a), fitness_key(b)
    return (ka > kb) - (ka < kb)


def genome_id(genome: str) -> str:
    try:
        canonical = emit_pasta(parse_pasta(genome))
    except Fault2FlowError:
        canonical = genome
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


class Evaluator:
    """Scores genomes against a fixed seed tree."""

    def __init__(self, seed: FaultTree, leaf_cap: int = 12, weights: ReadabilityWeights | None = None):
        self.seed = seed
        self.leaf_cap = leaf_cap
        self.weights = weights
        self._regions: dict[frozenset, list] = {}

    def regions_with(self, tree: FaultTree):
        key = frozenset(b.condition for b in tree.basic_events())
        if key not in self._regions:
            self._regions[key] = RegionSpace.of_tree(self.seed, tree).regions()
        return self._regions[key]

    def equivalent(self, tree: FaultTree) -> bool:
        if len({b.condition for b in tree.basic_events()} | {b.condition for b in self.seed.basic_events()}) > self.leaf_cap:
            return False
        if set(tree.fault_classes) != set(self.seed.fault_classes):
            return False
        for region in self.regions_with(tree):
            a = evaluate_truths(self.seed, truths_by_basic(self.seed, region))
            b = evaluate_truths(tree, truths_by_basic(tree, region))
            if a != b:
                return False
        return True

    def __call__(self, genome: str, island: int = 0, generation: int = 0) -> Candidate:
        gid = genome_id(genome)
        try:
            tree = parse_pasta(genome)
        except (Fault2FlowError, ValueError):
            return Candidate(genome, False, False, 0.0, 0, island, generation, gid)
        size = len(tree.nodes)
        if not self_check(tree).passed:
            return Candidate(genome, False, False, 0.0, size, island, generation, gid)
        equivalent = self.equivalent(tree)
        score = readability_score(tree, self.weights)
        return Candidate(genome, True, equivalent, score, size, island, generation, gid)


# --------------------------------------------------------------------------
# elite archive

class EliteArchive:
    """Per-island sorted candidate lists with a shared capacity."""

    def __init__(self, islands: int, capacity: int):
        self.capacity = capacity
        self.islands: list[list[Candidate]] = [[] for _ in range(islands)]

    def insert(self, island: int, cand: Candidate) -> bool:
        pop = self.islands[island]
        if not cand.ok or any(c.id == cand.id for c in pop):
            return False
        if len(pop) >= self.capacity:
            if fitness_key(cand) >= fitness_key(pop[-1]):
                return False
            pop.pop()
        pop.append(replace(cand, island=island))
        pop.sort(key=fitness_key)
        return True

    def best(self) -> Candidate:
        return min((c for pop in self.islands for c in pop), key=fitness_key)

    def check(self) -> None:
        for pop in self.islands:
            assert len(pop) <= self.capacity
            assert pop == sorted(pop, key=fitness_key)
            assert len({c.id for c in pop}) == len(pop)
            assert all(c.ok for c in pop)

    def to_json(self) -> list:
        return [[asdict(c) for c in pop] for pop in self.islands]

    @classmethod
    def from_json(cls, data: list, capacity: int) -> "EliteArchive":
        archive = cls(len(data), capacity)
        archive.islands = [[Candidate(**c) for c in pop] for pop in data]
        return archive


# --------------------------------------------------------------------------
# rewrites

def _prune(tree: FaultTree, nodes) -> FaultTree:
    """Drop declarations no top event reaches any more."""
    draft = tree.replace(nodes=tuple(nodes))
    keep = set(draft.reachable())
    return draft.replace(nodes=tuple(n for n in draft.nodes if n.id in keep))


def _redirect(tree: FaultTree, old: str, new: str) -> FaultTree:
    nodes = []
    for n in tree.nodes:
        if isinstance(n, TopEvent) and n.child == old:
            n = TopEvent(n.id, new)
        elif isinstance(n, Gate) and old in n.children:
            n = replace(n, children=tuple(new if c == old else c for c in n.children))
        nodes.append(n)
    return _prune(tree, nodes)


def _gates(tree: FaultTree) -> list[Gate]:
    return [tree.by_id[i] for i in tree.reachable() if isinstance(tree.by_id[i], Gate)]


def gate_flatten(tree: FaultTree, rng: Random) -> FaultTree:
    """Inline one same-kind AND/OR child into its parent gate."""
    sites = [
        (g, c)
        for g in _gates(tree)
        if g.kind in ("and", "or")
        for c in dict.fromkeys(g.children)
        if isinstance(tree.by_id[c], Gate) and tree.by_id[c].kind == g.kind
    ]
    if not sites:
        raise NotApplicable("no nested gate of the same kind")
    g, c = rng.choice(sites)
    inner = tree.by_id[c].children
    children = []
    for x in g.children:
        children.extend(inner if x == c else (x,))
    nodes = [replace(n, children=tuple(children)) if n.id == g.id else n for n in tree.nodes]
    return _prune(tree, nodes)


def dedupe_subtrees(tree: FaultTree, rng: Random) -> FaultTree:
    """Point every use of one structural twin at the other."""
    groups: dict[tuple, list[str]] = {}
    for node_id, shape in structural_shapes(tree).items():
        groups.setdefault(shape, []).append(node_id)
    twins = [ids for ids in groups.values() if len(ids) > 1]
    if not twins:
        raise NotApplicable("no structurally identical subtrees")
    ids = rng.choice(twins)
    keep = min(ids)
    # twins share a shape, so neither can sit below the other
    drop = rng.choice([i for i in ids if i != keep])
    return _redirect(tree, drop, keep)


def strip_degenerate(tree: FaultTree, rng: Random) -> FaultTree:
    """Replace a one-child gate with its child."""
    sites = [g for g in _gates(tree) if len(g.children) == 1]
    if not sites:
        raise NotApplicable("no one-child gate")
    g = rng.choice(sites)
    return _redirect(tree, g.id, g.children[0])


def _snake(name: str) -> str:
    out = re.sub(r"[^a-z0-9]+", "_", name.lower()).strip("_")
    if not out or out[0].isdigit():
        out = "n_" + out
    return out


def rename_normalize(tree: FaultTree, rng: Random) -> FaultTree:
    """Rename gate and basic-event ids to snake_case.

    Top events keep their ids (they are the diagnosis labels) and
    parameters keep theirs (they are the workflow's input fields).
    """
    taken = {n.id for n in tree.nodes}
    mapping = {}
    for n in tree.nodes:
        if isinstance(n, TopEvent) or SNAKE_CASE.match(n.id):
            continue
        base = new = _snake(n.id)
        k = 1
        while new in taken:
            k += 1
            new = f"{base}_{k}"
        taken.add(new)
        mapping[n.id] = new
    if not mapping:
        raise NotApplicable("all ids are already snake_case")

    def rename(i):
        return mapping.get(i, i)

    nodes = []
    for n in tree.nodes:
        if isinstance(n, TopEvent):
            n = TopEvent(n.id, rename(n.child))
        elif isinstance(n, Gate):
            n = replace(n, id=rename(n.id), children=tuple(map(rename, n.children)))
        else:
            n = replace(n, id=rename(n.id))
        nodes.append(n)
    return tree.replace(nodes=tuple(nodes))


def canonical_order(tree: FaultTree) -> FaultTree:
    """Sort every gate's children by structural shape, then id."""
    shapes = structural_shapes(tree)
    nodes = []
    for n in tree.nodes:
        if isinstance(n, Gate):
            kids = sorted(n.children, key=lambda c: (repr(shapes.get(c)), c))
            n = replace(n, children=tuple(kids))
        nodes.append(n)
    return tree.replace(nodes=tuple(nodes))


def reorder_canonical(tree: FaultTree, rng: Random) -> FaultTree:
    out = canonical_order(tree)
    if out.nodes == tree.nodes:
        raise NotApplicable("children already in canonical order")
    return out


REWRITES = {
    "gate_flatten": gate_flatten,
    "dedupe_subtrees": dedupe_subtrees,
    "strip_degenerate": strip_degenerate,
    "rename_normalize": rename_normalize,
    "reorder_canonical": reorder_canonical,
}


def as_mutator(rewrite: Callable[[FaultTree, Random], FaultTree]) -> Mutator:
    @functools.wraps(rewrite)
    def mutate(parent: str, inspirations: Sequence[str], rng: Random) -> str:
        return emit_pasta(rewrite(parse_pasta(parent), rng))

    return mutate


def default_mutator(parent: str, inspirations: Sequence[str], rng: Random) -> str:
    """Apply the first applicable rewrite, trying them in random order.

    Inspirations are accepted for interface parity with model-backed
    mutators and ignored here.
    """
    tree = parse_pasta(parent)
    names = sorted(REWRITES)
    rng.shuffle(names)
    for name in names:
        try:
            return emit_pasta(REWRITES[name](tree, rng))
        except NotApplicable:
            continue
    raise NotApplicable("no rewrite applies")


# --------------------------------------------------------------------------
# search

@dataclass
class EvolveConfig:
    islands: int = 4
    population_per_island: int = 16
    iterations: int = 200
    inspiration_count: int = 2
    migration_interval: int = 10
    migration_size: int = 2
    seed: int = 0
    mutator: Mutator = default_mutator
    workers: int | None = None
    leaf_cap: int = 12
    weights: ReadabilityWeights | None = None

    def __post_init__(self):
        if self.islands < 1:
            raise ValueError("islands must be at least 1")
        if self.population_per_island < 1:
            raise ValueError("population_per_island must be at least 1")
        if self.migration_size > self.population_per_island:
            raise ValueError("migration_size must not exceed population_per_island")
        if self.inspiration_count >= self.population_per_island:
            raise ValueError("inspiration_count must be below population_per_island")
        if self.migration_interval < 1:
            raise ValueError("migration_interval must be at least 1")

    def settings(self) -> dict:
        keys = ("islands", "population_per_island", "iterations", "inspiration_count",
                "migration_interval", "migration_size", "seed", "leaf_cap")
        return {k: getattr(self, k) for k in keys}


@dataclass
class EvolveResult:
    best: Candidate
    archive: EliteArchive
    history: list[dict] = field(default_factory=list)
    seed: Candidate | None = None
    mutator_failures: int = 0
    iterations_done: int = 0
    rng_states: list = field(default_factory=list)


def island_rng(seed: int, island: int) -> Random:
    digest = hashlib.sha256(f"{seed}:{island}".encode()).digest()
    return Random(int.from_bytes(digest[:8], "big"))


def _rank_choice(pop: list[Candidate], rng: Random) -> int:
    n = len(pop)
    return rng.choices(range(n), weights=range(n, 0, -1))[0]


class _Island:
    def __init__(self, index: int, rng: Random):
        self.index = index
        self.rng = rng
        self.failures = 0

    def step(self, archive: EliteArchive, cfg: EvolveConfig, evaluator: Evaluator, generation: int) -> None:
        pop = archive.islands[self.index]
        rng = self.rng
        p = _rank_choice(pop, rng)
        others = [c for i, c in enumerate(pop) if i != p]
        inspirations = rng.sample(others, min(cfg.inspiration_count, len(others)))
        try:
            child = cfg.mutator(pop[p].genome, [c.genome for c in inspirations], rng)
        except Exception:  # any mutator failure discards the child
            self.failures += 1
            return
        archive.insert(self.index, evaluator(child, self.index, generation))


def _migrate(archive: EliteArchive, size: int) -> None:
    n = len(archive.islands)
    if n < 2 or size < 1:
        return
    outgoing = [list(pop[:size]) for pop in archive.islands]
    for i, emigrants in enumerate(outgoing):
        for cand in emigrants:
            archive.insert((i + 1) % n, cand)


def _rng_state_to_json(state):
    version, internal, gauss = state
    return [version, list(internal), gauss]


def _rng_state_from_json(data):
    version, internal, gauss = data
    return (version, tuple(internal), gauss)


def evolve(seed_genome: str, cfg: EvolveConfig | None = None, resume: dict | None = None) -> EvolveResult:
    """Run the island search; ``resume`` is a loaded checkpoint document."""
    cfg = cfg or EvolveConfig()
    try:
        seed_tree = parse_pasta(seed_genome)
    except Fault2FlowError as exc:
        raise SeedInvalid(f"seed genome does not parse: {exc}") from None
    report = self_check(seed_tree)
    if not report.passed:
        raise SeedInvalid("seed genome fails self-check: " + "; ".join(f.message for f in report.errors))
    leaves = len({b.condition for b in seed_tree.basic_events()})
    if leaves > cfg.leaf_cap:
        raise SeedInvalid(f"seed has {leaves} distinct leaf conditions; equivalence is exhaustive up to {cfg.leaf_cap}")

    evaluator = Evaluator(seed_tree, cfg.leaf_cap, cfg.weights)
    seed = evaluator(seed_genome)
    islands = [_Island(i, island_rng(cfg.seed, i)) for i in range(cfg.islands)]

    if resume is not None:
        archive = EliteArchive.from_json(resume["archive"], cfg.population_per_island)
        for isl, state in zip(islands, resume["rng_states"]):
            isl.rng.setstate(_rng_state_from_json(state))
        history = list(resume["history"])
        start = resume["iterations_done"]
        failures = resume.get("mutator_failures", 0)
    else:
        archive = EliteArchive(cfg.islands, cfg.population_per_island)
        for isl in islands:
            archive.insert(isl.index, seed)
            for _ in range(cfg.population_per_island - 1):
                try:
                    child = cfg.mutator(seed_genome, [], isl.rng)
                except Exception:
                    isl.failures += 1
                    continue
                archive.insert(isl.index, evaluator(child, isl.index, 0))
        history, start, failures = [], 0, 0

    pool = ThreadPoolExecutor(cfg.workers) if cfg.workers and cfg.workers > 1 else None
    try:
        for gen in range(start + 1, cfg.iterations + 1):
            # islands own disjoint archive slots and rngs, so running them on
            # threads cannot change the outcome
            if pool is not None:
                list(pool.map(lambda isl: isl.step(archive, cfg, evaluator, gen), islands))
            else:
                for isl in islands:
                    isl.step(archive, cfg, evaluator, gen)
            if gen % cfg.migration_interval == 0:
                _migrate(archive, cfg.migration_size)
            history.append({"iteration": gen, **archive.best().fitness()})
    finally:
        if pool is not None:
            pool.shutdown()

    return EvolveResult(
        best=archive.best(),
        archive=archive,
        history=history,
        seed=seed,
        mutator_failures=failures + sum(isl.failures for isl in islands),
        iterations_done=max(start, cfg.iterations),
        rng_states=[isl.rng.getstate() for isl in islands],
    )


def checkpoint_document(cfg: EvolveConfig, result: EvolveResult) -> dict:
    return {
        "config": cfg.settings(),
        "iterations_done": result.iterations_done,
        "mutator_failures": result.mutator_failures,
        "archive": result.archive.to_json(),
        "rng_states": [_rng_state_to_json(s) for s in result.rng_states],
        "history": result.history,
    }


def save_checkpoint(path, cfg: EvolveConfig, result: EvolveResult) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(checkpoint_document(cfg, result), fh, indent=2, ensure_ascii=False)
        fh.write("\n")


def load_checkpoint(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
