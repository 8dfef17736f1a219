"""``fault2flow`` command line.

Exit codes: 0 success, 1 a check or verification failed, 2 bad input,
3 execution error, 4 push error, 64 usage error.  Errors are also written to
standard error as one JSON object per line.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import __version__
from .compiler import CompileOptions, compile_tree
from .errors import Fault2FlowError, InputError
from .evolve import EvolveConfig, evolve, load_checkpoint, save_checkpoint
from .executor import execute
from .metrics import ReadabilityWeights, measure, render_json, render_table, render_tsv
from .mindmap import emit_plantuml, outline_to_mindmap, parse_plantuml
from .n8n_client import push_workflow
from .pasta import emit_pasta, parse_pasta, parse_schema, self_check
from .project import Project
from .translate import mindmap_hook, translate_with_hook
from .verify import TestStrategy, dump_suite, generate_tests, load_suite, verify
from .workflow import export_n8n, import_n8n

EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _read(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None


def _write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _tree(path):
    return parse_pasta(_read(path))


def _workflow(path):
    return import_n8n(_read(path))


def _weights(project: Project) -> ReadabilityWeights:
    s = project.settings
    return ReadabilityWeights(
        s["readability.naming"], s["readability.depth"], s["readability.redundancy"], s["readability.degenerate"]
    )


def _strategy(args, project: Project) -> TestStrategy:
    s = project.settings
    return TestStrategy(
        boundary_epsilon=args.epsilon if args.epsilon is not None else s["epsilon"],
        region_cap=args.region_cap if args.region_cap is not None else s["region_cap"],
        random_count=args.random_count if args.random_count is not None else s["random_count"],
        seed=args.seed if args.seed is not None else s["seed"],
    )


def _emit(out, text: str) -> None:
    if out:
        _write(out, text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------
# commands

def cmd_init(args, project):
    Project.init(args.directory)
    print(f"initialized project in {args.directory}")
    return 0


def cmd_mindmap(args, project):
    _emit(args.output, emit_plantuml(outline_to_mindmap(_read(args.outline))))
    return 0


def cmd_lint(args, project):
    report = self_check(_tree(args.tree))
    sys.stdout.write(report.render())
    return 0 if report.passed else 1


def cmd_translate(args, project):
    schema = parse_schema(_read(args.schema)) if args.schema else ()
    hook = mindmap_hook(schema, declare_measured=not args.schema)
    source = _read(args.map)
    parse_plantuml(source)  # surface syntax errors directly rather than as hook failures
    result = translate_with_hook(source, hook, args.retries)
    _emit(args.output, emit_pasta(result.tree))
    return 0


def cmd_compile(args, project):
    w = compile_tree(_tree(args.tree), CompileOptions(share_condition_nodes=args.share_conditions))
    _emit(args.output, export_n8n(w))
    return 0


def _parse_inputs(pairs):
    values = {}
    for pair in pairs or ():
        key, sep, raw = pair.partition("=")
        if not sep or not key:
            raise UsageError(f"--input expects key=value, got {pair!r}")
        try:
            values[key.strip()] = float(raw)
        except ValueError:
            raise InputError(f"--input {key}: not a number: {raw!r}") from None
    return values


def cmd_exec(args, project):
    values = _parse_inputs(args.input)
    w = _workflow(args.workflow)
    sys.stdout.write(execute(w, values).dump(w))
    return 0


def cmd_gen_tests(args, project):
    tree = _tree(args.tree)
    strategy = _strategy(args, project)
    _emit(args.output, dump_suite(tree, generate_tests(tree, strategy), strategy))
    return 0


def _suite_for(args, tree, project):
    if getattr(args, "suite", None):
        return load_suite(_read(args.suite))
    return generate_tests(tree, _strategy(args, project))


def cmd_verify(args, project):
    tree = _tree(args.tree)
    w = _workflow(args.workflow)
    regenerator = (lambda t, failures: compile_tree(t)) if args.regenerate else None
    max_iter = args.max_iter if args.max_iter is not None else project["max_iterations"]
    report = verify(tree, w, _suite_for(args, tree, project), max_iter, regenerator)
    sys.stdout.write(report.render())
    return 0 if report.passed else 1


def cmd_metrics(args, project):
    tree = _tree(args.tree)
    w = _workflow(args.workflow)
    report = verify(tree, w, _suite_for(args, tree, project), 1)
    metrics = measure(
        tree, w, report.traces, int(report.passed), int(not report.passed), project["leaf_cap"], _weights(project)
    )
    sys.stdout.write(render_table([metrics]))
    return 0


def cmd_evolve(args, project):
    seed_text = _read(args.tree)
    s = project.settings
    cfg = EvolveConfig(
        islands=args.islands or s["evolve.islands"],
        population_per_island=args.population or s["evolve.population"],
        iterations=args.iters if args.iters is not None else s["evolve.iterations"],
        inspiration_count=s["evolve.inspirations"],
        migration_interval=s["evolve.migration_interval"],
        migration_size=s["evolve.migration_size"],
        seed=args.seed if args.seed is not None else s["seed"],
        workers=args.workers,
        leaf_cap=s["leaf_cap"],
        weights=_weights(project),
    )
    resume = load_checkpoint(args.resume) if args.resume else None
    result = evolve(seed_text, cfg, resume)
    _emit(args.output, emit_pasta(parse_pasta(result.best.genome)))
    if args.checkpoint:
        save_checkpoint(args.checkpoint, cfg, result)
    if args.plot:
        from .plotting import plot_history

        plot_history(result.history, args.plot, result.seed.readability)
    print(
        f"best {result.best.id}: readability {result.best.readability:.4f} "
        f"(seed {result.seed.readability:.4f}), size {result.best.size}",
        file=sys.stderr,
    )
    return 0


def cmd_push(args, project):
    document = json.loads(export_n8n(_workflow(args.workflow)))
    key = project.api_key()
    if not key:
        raise InputError(f"no API key: set the {project['n8n.api_key_env']} environment variable")
    endpoint = args.endpoint or project["n8n.endpoint"]
    timeout = args.timeout if args.timeout is not None else project["n8n.timeout"]
    print(push_workflow(document, endpoint, key, timeout))
    return 0


def run_pipeline(tree_paths, reports_dir, name, project, plot=True, stream=None):
    """compile, gen-tests, verify and metrics for each tree; writes report files."""
    from .plotting import plot_metrics

    reports_dir = Path(reports_dir)
    rows, notes = [], []
    strategy = TestStrategy(project["epsilon"], project["region_cap"], project["random_count"], project["seed"])
    for path in tree_paths:
        started = time.perf_counter()
        tree = _tree(path)
        w = compile_tree(tree)
        stem = Path(path).name.removesuffix(".pasta")
        _write(reports_dir / f"{stem}.workflow.json", export_n8n(w))
        cases = generate_tests(tree, strategy)
        _write(reports_dir / f"{stem}.suite.json", dump_suite(tree, cases, strategy))
        report = verify(tree, w, cases, project["max_iterations"])
        rows.append(
            measure(tree, w, report.traces, int(report.passed), int(not report.passed),
                    project["leaf_cap"], _weights(project))
        )
        status = f"passed on iteration {report.iterations_used}" if report.passed else "FAILED"
        notes.append(f"{tree.name}: {len(cases)} cases, verify {status}")
        if stream is not None:
            print(f"{tree.name}: {time.perf_counter() - started:.2f}s", file=stream)
    text = render_table(rows) + "\n" + "".join(n + "\n" for n in notes)
    _write(reports_dir / f"{name}.report.txt", text)
    _write(reports_dir / f"{name}.report.tsv", render_tsv(rows))
    _write(reports_dir / f"{name}.report.json", render_json(rows))
    if plot:
        plot_metrics(rows, reports_dir / f"{name}.png")
    return rows, text


def cmd_pipeline(args, project):
    name = args.name or (Path(args.trees[0]).name.removesuffix(".pasta") if len(args.trees) == 1 else "pipeline")
    reports = args.reports or Path(args.project) / "reports"
    rows, text = run_pipeline(args.trees, reports, name, project, plot=not args.no_plot)
    sys.stdout.write(text)
    return 0 if all(r.failed == 0 and r.tc == 1.0 and r.e2erc == 1.0 for r in rows) else 1


# --------------------------------------------------------------------------
# argument parsing

def _strategy_flags(p):
    p.add_argument("--seed", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--region-cap", type=int)
    p.add_argument("--random-count", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fault2flow", description="Fault trees to verified n8n workflows.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--project", default=".", help="project directory holding fault2flow.config")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("init", help="create the project layout and a default config")
    p.add_argument("directory", nargs="?", default=".")
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("mindmap", help="regulation outline (markdown) to PlantUML mind map")
    p.add_argument("outline")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_mindmap)

    p = sub.add_parser("lint", help="self-check a fault tree")
    p.add_argument("tree")
    p.set_defaults(func=cmd_lint)

    p = sub.add_parser("translate", help="mind map to fault tree")
    p.add_argument("map")
    p.add_argument("-o", "--output")
    p.add_argument("--schema", help=".pasta file whose parameter declarations are used")
    p.add_argument("--retries", type=int, default=3)
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("compile", help="fault tree to n8n workflow document")
    p.add_argument("tree")
    p.add_argument("-o", "--output")
    p.add_argument("--share-conditions", action="store_true")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("exec", help="run a workflow on one input")
    p.add_argument("workflow")
    p.add_argument("--input", nargs="*", metavar="KEY=VALUE")
    p.set_defaults(func=cmd_exec)

    p = sub.add_parser("gen-tests", help="synthesize a test suite from a fault tree")
    p.add_argument("tree")
    p.add_argument("-o", "--output")
    _strategy_flags(p)
    p.set_defaults(func=cmd_gen_tests)

    p = sub.add_parser("verify", help="run a suite against a workflow")
    p.add_argument("tree")
    p.add_argument("workflow")
    p.add_argument("--suite")
    p.add_argument("--max-iter", type=int)
    p.add_argument("--regenerate", action="store_true", help="recompile from the tree after a failed round")
    _strategy_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("metrics", help="TC, E2ERC, SF and readability table")
    p.add_argument("tree")
    p.add_argument("workflow")
    p.add_argument("--suite")
    _strategy_flags(p)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("evolve", help="optimize a fault tree for readability")
    p.add_argument("tree")
    p.add_argument("-o", "--output")
    p.add_argument("--iters", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--islands", type=int)
    p.add_argument("--population", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--checkpoint", help="write a .evo.json checkpoint")
    p.add_argument("--resume", help="continue from a .evo.json checkpoint")
    p.add_argument("--plot", help="write the best-readability history as PNG")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("push", help="create and activate a workflow on an n8n host")
    p.add_argument("workflow")
    p.add_argument("--endpoint")
    p.add_argument("--timeout", type=float)
    p.set_defaults(func=cmd_push)

    p = sub.add_parser("pipeline", help="compile, gen-tests, verify and metrics in one report")
    p.add_argument("trees", nargs="+")
    p.add_argument("--reports", help="output directory (default: <project>/reports)")
    p.add_argument("--name", help="report file stem")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_pipeline)
    return parser


def _error_line(code: str, message: str, exit_code: int) -> None:
    print(json.dumps({"error": code, "message": message, "exit": exit_code}), file=sys.stderr)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        project = Project.load(args.project)
        return args.func(args, project)
    except UsageError as exc:
        _error_line("UsageError", str(exc), EXIT_USAGE)
        return EXIT_USAGE
    except Fault2FlowError as exc:
        _error_line(exc.code, str(exc), exc.exit_code)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
