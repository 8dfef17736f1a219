import os
from importlib import resources
from pathlib import Path

import pytest

from fault2flow.pasta import parse_pasta

DATA = Path(str(resources.files("fault2flow") / "data"))
GOLDEN = Path(__file__).parent / "golden"
TRANSCRIPTS = Path(__file__).parent / "transcripts"

TREE_FILES = sorted((DATA / "trees").glob("*.pasta"))
CASE_FILES = sorted((DATA / "cases").glob("*.pasta"))
MAP_FILES = sorted((DATA / "mindmaps").glob("*.puml"))


def load_tree(name: str):
    """Bundled tree by stem, looking in trees/ then cases/."""
    for folder in ("trees", "cases"):
        path = DATA / folder / f"{name}.pasta"
        if path.exists():
            return parse_pasta(path.read_text(encoding="utf-8"))
    raise FileNotFoundError(name)


def check_golden(relpath: str, actual) -> None:
    """Compare with a golden file; FAULT2FLOW_UPDATE_GOLDEN=1 rewrites it."""
    path = GOLDEN / relpath
    data = actual.encode("utf-8") if isinstance(actual, str) else actual
    if os.environ.get("FAULT2FLOW_UPDATE_GOLDEN") == "1":
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    assert path.exists(), f"missing golden file {relpath}; rerun with FAULT2FLOW_UPDATE_GOLDEN=1"
    assert path.read_bytes() == data, f"{relpath} differs from its golden file"


@pytest.fixture
def three_ratio():
    return load_tree("three_ratio")


@pytest.fixture
def winding():
    return load_tree("winding_thermal")


# acceptance summary: one line per criterion ---------------------------------

_CRITERIA: dict[str, list[str]] = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.split("::")[-1]
    if "test_acceptance.py" not in report.nodeid or not name.startswith("test_criterion_"):
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        number = name.split("_")[2]
        _CRITERIA.setdefault(number, []).append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA, key=int):
        outcomes = _CRITERIA[number]
        status = "PASS" if all(o == "passed" for o in outcomes) else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {status} ({len(outcomes)} check(s))")
