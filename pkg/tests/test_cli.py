import json
import subprocess
import sys

import pytest

from conftest import DATA, TREE_FILES, check_golden
from fault2flow.cli import main, run_pipeline
from fault2flow.project import CONFIG_NAME, Project

TREES = DATA / "trees"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def error_of(err):
    return json.loads(err.strip().splitlines()[-1])


def test_lint_clean(capsys):
    code, out, _ = run(capsys, "lint", TREES / "three_ratio.pasta")
    assert code == 0 and out == "passed: 0 error(s), 0 warning(s)\n"


def test_lint_cyclic_tree(tmp_path, capsys):
    path = tmp_path / "cyclic.pasta"
    path.write_text('tree c\nparam x unit ""\nbasic a : x < 1\ngate g = and(h, a)\ngate h = or(g)\ntop f = g\n')
    code, _, err = run(capsys, "lint", path)
    assert code == 2
    assert error_of(err)["error"] == "CycleDetected" and error_of(err)["exit"] == 2


def test_lint_failing_self_check(tmp_path, capsys):
    path = tmp_path / "orphan.pasta"
    path.write_text('tree o\nparam x unit ""\nbasic a : x < 1\nbasic b : x < 2\ntop f = a\n')
    code, out, _ = run(capsys, "lint", path)
    assert code == 1 and out.startswith("error b unreachable")


def test_compile_exec_round(tmp_path, capsys):
    wf = tmp_path / "w.json"
    assert run(capsys, "compile", TREES / "three_ratio.pasta", "-o", wf)[0] == 0
    code, out, _ = run(capsys, "exec", wf, "--input", "c2h2=0.5", "c2h4=10", "ch4=5", "h2=10", "c2h6=5")
    assert code == 0
    assert out.splitlines()[-1] == "TRIGGERED: low_temperature_overheating"


def test_exec_missing_field(tmp_path, capsys):
    wf = tmp_path / "w.json"
    run(capsys, "compile", TREES / "three_ratio.pasta", "-o", wf)
    code, _, err = run(capsys, "exec", wf, "--input", "c2h2=0.5", "c2h4=10", "ch4=5", "c2h6=5")
    assert code == 3
    assert error_of(err)["error"] == "MissingField" and "'h2'" in error_of(err)["message"]


def test_exec_division_by_zero(tmp_path, capsys):
    wf = tmp_path / "w.json"
    run(capsys, "compile", TREES / "three_ratio.pasta", "-o", wf)
    code, _, err = run(capsys, "exec", wf, "--input", "c2h2=0.5", "c2h4=0", "ch4=5", "h2=10", "c2h6=5")
    assert code == 3 and error_of(err)["error"] == "DivisionByZero"


@pytest.mark.parametrize(
    "argv",
    [[], ["frobnicate"], ["lint"], ["exec", "w.json", "--input", "novalue"], ["gen-tests", "t", "--seed", "x"]],
)
def test_usage_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 64 and error_of(err)["error"] == "UsageError"


def test_missing_file_is_input_error(capsys):
    code, _, err = run(capsys, "lint", "does/not/exist.pasta")
    assert code == 2 and error_of(err)["error"] == "InputError"


def test_gen_tests_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.suite.json", tmp_path / "b.suite.json"
    run(capsys, "gen-tests", TREES / "tap_changer.pasta", "-o", a, "--seed", 3)
    run(capsys, "gen-tests", TREES / "tap_changer.pasta", "-o", b, "--seed", 3)
    assert a.read_bytes() == b.read_bytes()
    assert json.loads(a.read_text())["strategy"]["seed"] == 3


def test_verify_and_metrics(tmp_path, capsys):
    tree, wf, suite = TREES / "tap_changer.pasta", tmp_path / "w.json", tmp_path / "s.suite.json"
    run(capsys, "compile", tree, "-o", wf)
    run(capsys, "gen-tests", tree, "-o", suite)
    code, out, _ = run(capsys, "verify", tree, wf, "--suite", suite)
    assert code == 0 and out.startswith("verify passed after 1 iteration(s)")
    code, out, _ = run(capsys, "metrics", tree, wf, "--suite", suite)
    assert code == 0 and out.splitlines()[2].split()[-3:] == ["1.0000", "1.0000", "1/0"]


def mutate(path):
    doc = json.loads(path.read_text())
    for node in doc["nodes"]:
        if node["type"] == "n8n-nodes-base.if":
            op = node["parameters"]["conditions"]["conditions"][0]["operator"]
            op["operation"] = {"gte": "lt", "lt": "gte", "gt": "lte", "lte": "gt"}[op["operation"]]
            break
    path.write_text(json.dumps(doc))


def test_verify_failure_and_regenerate(tmp_path, capsys):
    tree, wf = TREES / "tap_changer.pasta", tmp_path / "w.json"
    run(capsys, "compile", tree, "-o", wf)
    mutate(wf)
    code, out, _ = run(capsys, "verify", tree, wf)
    assert code == 1 and out.startswith("verify FAILED")
    code, out, _ = run(capsys, "verify", tree, wf, "--regenerate")
    assert code == 0 and "after 2 iteration(s)" in out


def test_mindmap_and_translate(tmp_path, capsys):
    puml, tree = tmp_path / "m.puml", tmp_path / "t.pasta"
    assert run(capsys, "mindmap", DATA / "regulations" / "three_ratio.md", "-o", puml)[0] == 0
    assert puml.read_text() == (DATA / "mindmaps" / "three_ratio.puml").read_text()
    assert run(capsys, "translate", puml, "--schema", TREES / "three_ratio.pasta", "-o", tree)[0] == 0
    assert run(capsys, "lint", tree)[0] == 0


def test_translate_without_schema_declares_params(tmp_path, capsys):
    code, out, _ = run(capsys, "translate", DATA / "mindmaps" / "characteristic_gas.puml")
    assert code == 0 and 'param h2 unit ""' in out


def test_translate_bad_map(tmp_path, capsys):
    path = tmp_path / "bad.puml"
    path.write_text("@startmindmap\n* a\n*** b\n@endmindmap\n")
    code, _, err = run(capsys, "translate", path)
    assert code == 2 and error_of(err)["error"] == "DepthJump"


def test_evolve_command(tmp_path, capsys):
    out_tree, ckpt, plot = tmp_path / "best.pasta", tmp_path / "run.evo.json", tmp_path / "h.png"
    code, _, err = run(capsys, "evolve", TREES / "degenerate_wrapped.pasta", "--iters", 10, "--seed", 1,
                       "--islands", 2, "--population", 6, "-o", out_tree, "--checkpoint", ckpt, "--plot", plot)
    assert code == 0 and err.startswith("best ")
    assert run(capsys, "lint", out_tree)[0] == 0
    assert json.loads(ckpt.read_text())["iterations_done"] == 10
    assert plot.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    code, _, _ = run(capsys, "evolve", TREES / "degenerate_wrapped.pasta", "--iters", 12, "--seed", 1,
                     "--islands", 2, "--population", 6, "--resume", ckpt, "-o", out_tree)
    assert code == 0


def test_evolve_bad_seed(tmp_path, capsys):
    path = tmp_path / "x.pasta"
    path.write_text("tree\n")
    code, _, err = run(capsys, "evolve", path)
    assert code == 2


def test_push_without_key(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("FAULT2FLOW_N8N_KEY", raising=False)
    wf = tmp_path / "w.json"
    run(capsys, "compile", TREES / "tap_changer.pasta", "-o", wf)
    code, _, err = run(capsys, "push", wf)
    assert code == 2 and "FAULT2FLOW_N8N_KEY" in error_of(err)["message"]


def test_push_network_error(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("FAULT2FLOW_N8N_KEY", "k")
    wf = tmp_path / "w.json"
    run(capsys, "compile", TREES / "tap_changer.pasta", "-o", wf)
    code, _, err = run(capsys, "push", wf, "--endpoint", "http://127.0.0.1:9", "--timeout", 1)
    assert code == 4 and error_of(err)["error"] == "NetworkError"


def test_init_and_config(tmp_path, capsys):
    root = tmp_path / "proj"
    assert run(capsys, "init", root)[0] == 0
    assert (root / CONFIG_NAME).exists() and (root / "trees").is_dir()
    (root / CONFIG_NAME).write_text("max_iterations = 7\n")
    assert Project.load(root)["max_iterations"] == 7
    (root / CONFIG_NAME).write_text("bogus = 1\n")
    code, _, err = run(capsys, "--project", root, "lint", TREES / "tap_changer.pasta")
    assert code == 2 and error_of(err)["error"] == "ConfigError"


def test_pipeline_single_tree(tmp_path, capsys):
    code, out, _ = run(capsys, "pipeline", TREES / "three_ratio.pasta", "--reports", tmp_path, "--no-plot")
    assert code == 0
    assert "three_ratio: " in out and "verify passed on iteration 1" in out
    assert (tmp_path / "three_ratio.report.txt").read_text() == out
    assert (tmp_path / "three_ratio.workflow.json").exists()
    assert not (tmp_path / "three_ratio.png").exists()


def test_pipeline_golden_reports(tmp_path, capsys):
    code, out, _ = run(capsys, "pipeline", *TREE_FILES, "--reports", tmp_path, "--name", "fixtures")
    assert code == 0
    for suffix in ("report.txt", "report.tsv", "report.json"):
        check_golden(f"reports/fixtures.{suffix}", (tmp_path / f"fixtures.{suffix}").read_text())
    for path in TREE_FILES:
        stem = path.stem
        check_golden(f"workflows/{stem}.json", (tmp_path / f"{stem}.workflow.json").read_text())
    png = (tmp_path / "fixtures.png").read_bytes()
    again = tmp_path / "again"
    run_pipeline(TREE_FILES, again, "fixtures", Project.load(tmp_path))
    assert (again / "fixtures.png").read_bytes() == png
    assert (again / "fixtures.report.txt").read_text() == out


def test_pipeline_failure_exit(tmp_path, capsys):
    path = tmp_path / "bad.pasta"
    path.write_text('tree b\nparam x unit ""\nbasic a : x < 1\nbasic b : x < 2\ntop f = a\n')
    code, _, err = run(capsys, "pipeline", path, "--reports", tmp_path)
    assert code == 1 and error_of(err)["error"] == "SelfCheckFailed"


def test_console_script_and_module(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "fault2flow.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("fault2flow ")
