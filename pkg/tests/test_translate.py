
import pytest

from conftest import DATA, load_tree
from fault2flow.errors import EmptyFaultClass, HookExhausted, TranslationError, UnannotatedLeaf, UnknownParameter
from fault2flow.mindmap import parse_plantuml
from fault2flow.pasta import Gate, ParamSpec, emit_pasta, evaluate_truths, parse_pasta
from fault2flow.regions import RegionSpace, truths_by_basic
from fault2flow.translate import (
    mindmap_hook,
    mindmap_to_faulttree,
    normalize_label,
    render_feedback,
    translate_with_hook,
)

SCHEMA = (ParamSpec("h2", "µL/L"), ParamSpec("c2h2"), ParamSpec("c2h4"))


def doc(body):
    return parse_plantuml(f"@startmindmap\n{body}\n@endmindmap\n")


def test_normalize_label():
    assert normalize_label("Low temperature overheating (150-300 °C)") == "low_temperature_overheating_150300_c"
    assert normalize_label("  Arc  in oil ") == "arc_in_oil"
    assert normalize_label("2nd stage") == "n_2nd_stage"


def test_or_node_becomes_or_gate():
    t = mindmap_to_faulttree(doc("* dga\n** spark\n*** either [OR]\n**** a [H2 > 1]\n**** b [H2 < 0.5]"), SCHEMA)
    gate = t.by_id[t.children("spark")[0]]
    assert gate == Gate("either", "or", ("a", "b"))


def test_unannotated_internal_node_defaults_to_and():
    t = mindmap_to_faulttree(doc("* dga\n** spark\n*** a [H2 > 1]\n*** b [C2H2 >= 5]"), SCHEMA)
    assert t.by_id["spark_gate"].kind == "and"
    t = mindmap_to_faulttree(doc("* dga\n** spark\n*** a [H2 > 1]\n*** b [C2H2 >= 5]"), SCHEMA, default_gate="or")
    assert t.by_id["spark_gate"].kind == "or"


def test_single_condition_fault_class():
    t = mindmap_to_faulttree(doc("* dga\n** Moisture [H2 >= 150]"), SCHEMA)
    assert t.children("moisture") == ("moisture_2",)
    assert t.by_id["moisture_2"].condition.parameter == "h2"


def test_ratio_resolves_to_declared_ratio():
    schema = (*SCHEMA, ParamSpec("acetylene_ratio", "", "derived", ("c2h2", "c2h4")))
    t = mindmap_to_faulttree(doc("* dga\n** arc [C2H2/C2H4 < 0.1]"), schema)
    assert t.basic_events()[0].condition.parameter == "acetylene_ratio"


def test_ratio_is_auto_declared():
    t = mindmap_to_faulttree(doc("* dga\n** arc [C2H2/C2H4 < 0.1]"), SCHEMA)
    assert t.params["c2h2_c2h4"] == ParamSpec("c2h2_c2h4", "", "derived", ("c2h2", "c2h4"))


def test_unknown_parameter():
    with pytest.raises(UnknownParameter):
        mindmap_to_faulttree(doc("* dga\n** arc [CO < 3]"), SCHEMA)


def test_declare_measured_fills_schema():
    t = mindmap_to_faulttree(doc("* dga\n** arc [CO2/CO < 3]"), (), declare_measured=True)
    assert [p.name for p in t.schema] == ["co2", "co", "co2_co"]


def test_unannotated_leaf_reports_path():
    with pytest.raises(UnannotatedLeaf, match="dga/spark/mystery"):
        mindmap_to_faulttree(doc("* dga\n** spark\n*** a [H2 > 1]\n*** mystery"), SCHEMA)


def test_empty_root():
    with pytest.raises(EmptyFaultClass):
        mindmap_to_faulttree(doc("* dga"), SCHEMA)


def test_fault_class_without_conditions():
    with pytest.raises(EmptyFaultClass):
        mindmap_to_faulttree(doc("* dga\n** spark [AND]"), SCHEMA)


def test_condition_on_internal_node_rejected():
    with pytest.raises(TranslationError):
        mindmap_to_faulttree(doc("* dga\n** spark\n*** a [H2 > 1]\n**** b [H2 > 2]"), SCHEMA)


def test_duplicate_fault_class_rejected():
    with pytest.raises(TranslationError):
        mindmap_to_faulttree(doc("* dga\n** Spark [H2 > 1]\n** spark [H2 > 2]"), SCHEMA)


def _equivalent(a, b):
    for region in RegionSpace.of_tree(a, b).regions():
        if evaluate_truths(a, truths_by_basic(a, region)) != evaluate_truths(b, truths_by_basic(b, region)):
            return False
    return True


@pytest.mark.parametrize("stem", ["three_ratio", "characteristic_gas"])
def test_bundled_maps_translate_to_equivalent_trees(stem):
    ref = load_tree(stem)
    m = parse_plantuml((DATA / "mindmaps" / f"{stem}.puml").read_text(encoding="utf-8"))
    tree = mindmap_to_faulttree(m, ref.schema)
    # leaves correspond 1:1 to condition annotations
    assert len(tree.basic_events()) == len(m.conditions())
    assert {b.condition for b in tree.basic_events()} == {b.condition for b in ref.basic_events()}
    assert tree.fault_classes == ref.fault_classes
    assert _equivalent(tree, ref)


def test_translation_is_deterministic():
    m = parse_plantuml((DATA / "mindmaps" / "three_ratio.puml").read_text(encoding="utf-8"))
    schema = load_tree("three_ratio").schema
    assert emit_pasta(mindmap_to_faulttree(m, schema)) == emit_pasta(mindmap_to_faulttree(m, schema))


def test_equivalence_helper_detects_difference():
    a = parse_pasta('tree t\nparam x unit ""\nbasic a : x < 1\ntop f = a\n')
    b = parse_pasta('tree t\nparam x unit ""\nbasic a : x <= 1\ntop f = a\n')
    assert not _equivalent(a, b)


# hook wrapper -------------------------------------------------------------

VALID = 'tree t\nparam x unit ""\nbasic a : x < 1\ntop f = a\n'


def test_identity_hook_on_valid_source():
    result = translate_with_hook(VALID, lambda source, feedback: source, retries=3)
    assert result.attempts == 1
    assert result.tree == parse_pasta(VALID)


def test_garbage_hook_exhausts():
    with pytest.raises(HookExhausted) as info:
        translate_with_hook(VALID, lambda s, f: "not a tree", retries=3)
    assert len(info.value.failures) == 3
    assert all(f[0].severity == "error" for f in info.value.failures)


def test_hook_that_fails_once_then_succeeds():
    seen = []

    def scripted(source, feedback):
        seen.append(feedback)
        if len(seen) == 1:
            return 'tree t\nparam x unit ""\nbasic a : x < 1\nbasic lost : x < 2\ntop f = a\n'
        return source

    result = translate_with_hook(VALID, scripted, retries=3)
    assert result.attempts == 2
    assert seen[0] == ""
    assert seen[1] == "error lost unreachable from every top event\n"
    assert result.feedback == [seen[1]]


def test_hook_retries_must_be_positive():
    with pytest.raises(ValueError):
        translate_with_hook(VALID, lambda s, f: s, retries=0)


def test_mindmap_hook_produces_tree():
    source = (DATA / "mindmaps" / "characteristic_gas.puml").read_text(encoding="utf-8")
    result = translate_with_hook(source, mindmap_hook(load_tree("characteristic_gas").schema))
    assert result.attempts == 1
    assert len(result.tree.fault_classes) == 7


def test_render_feedback_format():
    from fault2flow.pasta import Finding

    assert render_feedback([Finding("warning", "g", "msg")]) == "warning g msg\n"
