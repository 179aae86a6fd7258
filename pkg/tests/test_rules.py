"""Three-valued evaluation: connective truth tables, atom semantics in open
and closed worlds, and the explain/trace rendering."""

from datetime import date

import pytest

from careflow.dsl import parse_rule
from careflow.patient import ClinicalEvent
from careflow.rules import (
    Verdict,
    World,
    evaluate,
    explain,
    kleene_all,
    kleene_any,
    kleene_at_least,
    kleene_not,
    trace_to_doc,
)
from tests.conftest import make_snapshot

M, N, U = Verdict.MET, Verdict.NOT_MET, Verdict.UNKNOWN


# -- connective truth tables --------------------------------------------------

def test_not_table():
    assert kleene_not(M) is N
    assert kleene_not(N) is M
    assert kleene_not(U) is U


@pytest.mark.parametrize(
    "verdicts, expected",
    [
        ([M, M], M),
        ([M, N], N),
        ([M, U], U),
        ([N, U], N),
        ([U, U], U),
        ([], M),
    ],
)
def test_all_table(verdicts, expected):
    assert kleene_all(verdicts) is expected


@pytest.mark.parametrize(
    "verdicts, expected",
    [
        ([N, N], N),
        ([M, N], M),
        ([N, U], U),
        ([M, U], M),
        ([U, U], U),
        ([], N),
    ],
)
def test_any_table(verdicts, expected):
    assert kleene_any(verdicts) is expected


@pytest.mark.parametrize(
    "n, verdicts, expected",
    [
        (1, [M, N, N], M),
        (2, [M, N, N], N),          # one MET, no UNKNOWN slack
        (2, [M, U, N], U),          # the UNKNOWN could still tip it
        (2, [M, M, U], M),
        (3, [M, U, U], U),
        (3, [M, U, N], N),          # even granting both unknowns only 3 > 1+1
        (1, [U, U], U),
        (1, [N, N], N),
    ],
)
def test_at_least_table(n, verdicts, expected):
    assert kleene_at_least(n, verdicts) is expected


# -- atoms against snapshots --------------------------------------------------

def test_has_fact_present_absent_both_worlds():
    snap = make_snapshot(facts={"sx:bloating": None})
    rule = parse_rule("has(sx:bloating)")
    assert evaluate(rule, snap, World.OPEN)[0] is M
    missing = parse_rule("has(sx:ascites)")
    assert evaluate(missing, snap, World.OPEN)[0] is U
    assert evaluate(missing, snap, World.CLOSED)[0] is N


def test_cmp_numeric_thresholds():
    snap = make_snapshot(facts={"lab:ca125": 90})
    assert evaluate(parse_rule("cmp(lab:ca125 >= 35)"), snap)[0] is M
    assert evaluate(parse_rule("cmp(lab:ca125 < 35)"), snap)[0] is N
    assert evaluate(parse_rule("cmp(lab:ca125 != 90)"), snap)[0] is N
    assert evaluate(parse_rule("cmp(lab:ca125 = 90)"), snap)[0] is M


def test_cmp_label_equality():
    snap = make_snapshot(facts={"img:tvus": "suspicious-mass"})
    assert evaluate(parse_rule("cmp(img:tvus = suspicious-mass)"), snap)[0] is M
    assert evaluate(parse_rule("cmp(img:tvus != suspicious-mass)"), snap)[0] is N


def test_cmp_ordering_on_label_is_missing_data():
    # a non-numeric observation cannot satisfy an ordering comparison
    snap = make_snapshot(facts={"lab:ca125": "elevated"})
    rule = parse_rule("cmp(lab:ca125 >= 35)")
    assert evaluate(rule, snap, World.OPEN)[0] is U
    assert evaluate(rule, snap, World.CLOSED)[0] is N


def test_cmp_fact_without_value_is_absent():
    snap = make_snapshot(facts={"lab:ca125": None})
    assert evaluate(parse_rule("cmp(lab:ca125 >= 35)"), snap, World.OPEN)[0] is U


def test_demo_match_mismatch_missing():
    snap = make_snapshot(demographics={"menopause": "post"})
    assert evaluate(parse_rule("demo(menopause=post)"), snap)[0] is M
    assert evaluate(parse_rule("demo(menopause=pre)"), snap)[0] is N
    assert evaluate(parse_rule("demo(sex=female)"), snap, World.OPEN)[0] is U
    assert evaluate(parse_rule("demo(sex=female)"), snap, World.CLOSED)[0] is N


def test_event_atom_window():
    ev = ClinicalEvent(id="e1", kind="order", code="lab:ca125", date=date(2025, 3, 1))
    snap = make_snapshot(as_of=date(2025, 3, 20), events=(ev,))
    assert evaluate(parse_rule("event(order, lab:ca125)"), snap)[0] is M
    assert evaluate(parse_rule("event(order, lab:ca125, within 30d)"), snap)[0] is M
    assert evaluate(parse_rule("event(order, lab:ca125, within 10d)"), snap, World.OPEN)[0] is U
    assert evaluate(parse_rule("event(result, lab:ca125)"), snap, World.OPEN)[0] is U


def test_closed_world_flips_only_absence():
    # present-but-false stays NOT_MET in both worlds
    snap = make_snapshot(facts={"lab:ca125": 10})
    rule = parse_rule("cmp(lab:ca125 >= 35)")
    assert evaluate(rule, snap, World.OPEN)[0] is N
    assert evaluate(rule, snap, World.CLOSED)[0] is N


# -- propagation through nested rules ----------------------------------------

def test_nested_rule_propagation():
    snap = make_snapshot(
        facts={"exam:pelvic-mass": "present"},
        demographics={},
    )
    rule = parse_rule(
        "ANY(ALL(has(exam:pelvic-mass), demo(menopause=post)), has(sx:ascites))"
    )
    verdict, trace = evaluate(rule, snap, World.OPEN)
    assert verdict is U  # both disjuncts unknown
    assert evaluate(rule, snap, World.CLOSED)[0] is N


def test_trace_structure_mirrors_rule():
    snap = make_snapshot(facts={"sx:bloating": None})
    rule = parse_rule("ATLEAST(1, has(sx:bloating), has(sx:ascites))")
    verdict, trace = evaluate(rule, snap)
    assert verdict is M
    assert len(trace.children) == 2
    assert trace.children[0].verdict is M
    assert trace.children[1].verdict is U
    assert trace.children[1].missing == ("sx:ascites",)


def test_explain_lines_show_verdicts_and_indent():
    snap = make_snapshot(facts={"sx:bloating": None})
    rule = parse_rule("ATLEAST(1, has(sx:bloating), has(sx:ascites))")
    _, trace = evaluate(rule, snap)
    lines = explain(trace)
    assert lines[0].startswith("[MET] ATLEAST 1 of 2")
    assert lines[1] == "  [MET] has(sx:bloating): matched sx:bloating"
    assert lines[2] == "  [UNKNOWN] has(sx:ascites): no data (sx:ascites)"


def test_trace_to_doc_shape():
    snap = make_snapshot(facts={"lab:ca125": 90})
    _, trace = evaluate(parse_rule("cmp(lab:ca125 >= 35)"), snap)
    doc = trace_to_doc(trace)
    assert doc["node"] == "cmp(lab:ca125 >= 35)"
    assert doc["verdict"] == "MET"
    assert doc["matched"] == ["lab:ca125=90"]
    assert "children" not in doc
