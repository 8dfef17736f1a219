import json

import pytest

from conftest import CASE_FILES, TREE_FILES, load_tree
from fault2flow.compiler import compile_tree
from fault2flow.errors import SchemaError, UnsatisfiableStrategy
from fault2flow.pasta import evaluate, parse_pasta
from fault2flow.verify import (
    TestCase,
    TestStrategy,
    dump_suite,
    generate_tests,
    load_suite,
    run_suite,
    verify,
)
from mutants import operator_flips

SINGLE = parse_pasta('tree t\nparam x unit ""\nbasic b : x < 10\ntop f = b\n')


def test_boundary_cases_for_single_condition():
    cases = generate_tests(SINGLE, TestStrategy(boundary_epsilon=0.5, origins=("boundary",)))
    assert [(c.input["x"], c.expected) for c in cases] == [
        (9.5, frozenset({"f"})),
        (10.0, frozenset()),
        (10.5, frozenset()),
    ]


def test_region_cases_cover_each_side():
    cases = generate_tests(SINGLE, TestStrategy(origins=("region",)))
    assert sorted(c.expected == {"f"} for c in cases) == [False, True]


def test_random_cases_use_plausible_range():
    tree = parse_pasta('tree t\nparam x unit "" range 5 6\nbasic b : x < 5.5\ntop f = b\n')
    cases = generate_tests(tree, TestStrategy(random_count=20, origins=("random",)))
    assert len(cases) == 20
    assert all(5 <= c.input["x"] <= 6 for c in cases)


def test_expected_sets_come_from_evaluate(three_ratio):
    for case in generate_tests(three_ratio):
        assert case.expected == evaluate(three_ratio, case.input)


def test_cases_are_unique_by_input(three_ratio):
    cases = generate_tests(three_ratio)
    assert len({c.key() for c in cases}) == len(cases)


def test_fixed_seed_gives_identical_suites(three_ratio):
    strategy = TestStrategy(seed=7)
    a = dump_suite(three_ratio, generate_tests(three_ratio, strategy), strategy)
    b = dump_suite(three_ratio, generate_tests(load_tree("three_ratio"), strategy), strategy)
    assert a == b
    other = TestStrategy(seed=8)
    assert dump_suite(three_ratio, generate_tests(three_ratio, other), strategy) != a


def test_region_cap_limits_region_cases(three_ratio):
    cases = generate_tests(three_ratio, TestStrategy(region_cap=3, origins=("region",)))
    assert len(cases) == 3


def test_unsatisfiable_strategy():
    # a self-check-clean tree whose only parameter has no realizable cell pair would be degenerate;
    # a cap of zero regions models that
    with pytest.raises(UnsatisfiableStrategy):
        generate_tests(SINGLE, TestStrategy(region_cap=0))


def test_strategy_validation():
    with pytest.raises(ValueError):
        TestStrategy(boundary_epsilon=0)
    with pytest.raises(ValueError):
        TestStrategy(origins=("fuzz",))


def test_suite_round_trip(three_ratio):
    cases = generate_tests(three_ratio)
    assert load_suite(dump_suite(three_ratio, cases)) == cases


@pytest.mark.parametrize(
    "text, path",
    [
        ("[]", "/cases"),
        ('{"cases": [1]}', "/cases/0"),
        ('{"cases": [{"input": {"x": "a"}, "expected": []}]}', "/cases/0/input"),
        ('{"cases": [{"input": {"x": 1}, "expected": "f"}]}', "/cases/0/expected"),
        ('{"cases": [{"input": {"x": 1}, "expected": [], "origin": "x"}]}', "/cases/0/origin"),
        ("nope", ""),
    ],
)
def test_load_suite_errors(text, path):
    with pytest.raises(SchemaError) as info:
        load_suite(text)
    assert info.value.path == path


@pytest.mark.parametrize("path", [*TREE_FILES, *CASE_FILES], ids=lambda p: p.stem)
def test_compiled_fixtures_pass_first_time(path):
    tree = parse_pasta(path.read_text(encoding="utf-8"))
    report = verify(tree, compile_tree(tree), generate_tests(tree))
    assert (report.passed, report.iterations_used, report.coverage) == (True, 1, 1.0)


def test_flipped_operator_is_caught_and_named(three_ratio):
    w = compile_tree(three_ratio)
    name, _, mutant = next(operator_flips(w))
    report = verify(three_ratio, mutant, generate_tests(three_ratio))
    assert not report.passed
    assert report.iterations_used == 1
    assert any(name in f.trace.visited for f in report.failures if f.trace)
    assert name in report.render()


def test_regenerator_restores_correctness(three_ratio):
    _, _, mutant = next(operator_flips(compile_tree(three_ratio)))
    calls = []

    def recompile(tree, failures):
        calls.append(len(failures))
        return compile_tree(tree)

    report = verify(three_ratio, mutant, generate_tests(three_ratio), regenerator=recompile)
    assert (report.passed, report.iterations_used) == (True, 2)
    assert len(calls) == 1 and calls[0] > 0


def test_iteration_cap(three_ratio):
    _, _, mutant = next(operator_flips(compile_tree(three_ratio)))
    report = verify(three_ratio, mutant, generate_tests(three_ratio), max_iterations=3,
                    regenerator=lambda tree, failures: mutant)
    assert (report.passed, report.iterations_used) == (False, 3)
    with pytest.raises(ValueError):
        verify(three_ratio, mutant, [], max_iterations=0)


def test_soundness_single_wrong_expectation():
    w = compile_tree(SINGLE)
    cases = [TestCase({"x": 1.0}, frozenset({"f"}), "region"), TestCase({"x": 50.0}, frozenset({"f"}), "region")]
    report = verify(SINGLE, w, cases)
    assert not report.passed
    assert [f.case.input for f in report.failures] == [{"x": 50.0}]
    assert report.failures[0].render().startswith("[region] x=50.0: expected f, got none via form input > ")


def test_errors_become_failures():
    failures, traces = run_suite(compile_tree(SINGLE), [TestCase({}, frozenset(), "random")])
    assert traces == [] and failures[0].error.startswith("MissingField")
    assert "raised MissingField" in failures[0].render()


def test_parallel_suite_matches_serial(three_ratio):
    w = compile_tree(three_ratio)
    tests = generate_tests(three_ratio)
    serial = verify(three_ratio, w, tests)
    threaded = verify(three_ratio, w, tests, workers=4)
    assert serial.traces == threaded.traces and serial.passed == threaded.passed


def test_suite_document_shape(three_ratio):
    strategy = TestStrategy()
    doc = json.loads(dump_suite(three_ratio, generate_tests(three_ratio, strategy), strategy))
    assert list(doc) == ["tree", "strategy", "cases"]
    assert list(doc["cases"][0]) == ["input", "expected", "origin"]
