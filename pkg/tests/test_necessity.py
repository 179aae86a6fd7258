"""Determinations, guideline lookup precedence, batch simulation, CPT selection."""

import pytest

from careflow.errors import AmbiguousCodeMatch, NoCodeMatch, NoGuidelineFound
from careflow.guidelines import load_registry
from careflow.necessity import (
    BatchError,
    ProcedureSpec,
    Status,
    determination_to_doc,
    determine,
    select_cpt,
    simulate_batch,
)
from careflow.rules import Verdict, World
from tests.conftest import make_snapshot

SYMPTOMS = {"sx:bloating": None, "sx:pelvic-pain": None}


def test_postmenopausal_mass_approved(registry):
    snap = make_snapshot(
        facts={"exam:pelvic-mass": "present"}, demographics={"menopause": "post"}
    )
    det = determine(registry, "anthem", "lab:ca125", snap)
    assert det.status is Status.APPROVED
    assert det.guideline_id == "gl:anthem-ca125"
    assert det.trace.verdict is Verdict.MET


def test_premenopausal_mass_with_suspected_epithelial_approved(registry):
    snap = make_snapshot(
        facts={"exam:pelvic-mass": "present", "dx:suspected-epithelial-ovarian": None},
        demographics={"menopause": "pre"},
    )
    assert determine(registry, "anthem", "lab:ca125", snap).status is Status.APPROVED


def test_symptom_cluster_alone_approved(registry):
    snap = make_snapshot(facts=SYMPTOMS)
    assert determine(registry, "anthem", "lab:ca125", snap).status is Status.APPROVED


def test_no_relevant_data_depends_on_world(registry):
    snap = make_snapshot()
    assert (
        determine(registry, "anthem", "lab:ca125", snap, world=World.OPEN).status
        is Status.INSUFFICIENT_INFORMATION
    )
    assert (
        determine(registry, "anthem", "lab:ca125", snap, world=World.CLOSED).status
        is Status.DENIED
    )


def test_premenopausal_mass_without_suspicion_is_not_denied_outright(registry):
    # branch 2 hinges on a suspicion code that is merely absent
    snap = make_snapshot(
        facts={"exam:pelvic-mass": "present"}, demographics={"menopause": "pre"}
    )
    det = determine(registry, "anthem", "lab:ca125", snap, world=World.OPEN)
    assert det.status is Status.INSUFFICIENT_INFORMATION
    assert "dx:suspected-epithelial-ovarian" in det.missing_codes


def test_reasoning_quotes_source_and_ends_with_status(registry):
    snap = make_snapshot(facts=SYMPTOMS)
    det = determine(registry, "anthem", "lab:ca125", snap)
    assert det.reasoning[0].startswith("applying guideline gl:anthem-ca125")
    assert any(line.startswith("| ") for line in det.reasoning)
    assert det.reasoning[-1] == "status: APPROVED"


def test_unknown_code_raises(registry):
    with pytest.raises(NoGuidelineFound):
        determine(registry, "anthem", "rx:unlisted", make_snapshot())


def test_lookup_precedence_payer_then_class_then_nccn():
    registry = load_registry(
        {
            "guidelines": [
                {
                    "id": "gl:acme-specific",
                    "payer": "acme",
                    "title": "specific",
                    "intervention_codes": ["lab:x"],
                    "rule": "has(sx:bloating)",
                    "source_text": [],
                },
                {
                    "id": "gl:acme-class",
                    "payer": "acme",
                    "title": "labs generally",
                    "intervention_codes": ["lab:*"],
                    "rule": "has(sx:bloating)",
                    "source_text": [],
                },
                {
                    "id": "gl:nccn-fallback",
                    "payer": "nccn",
                    "title": "fallback",
                    "intervention_codes": ["lab:y", "img:z"],
                    "rule": "has(sx:bloating)",
                    "source_text": [],
                },
            ]
        }
    )
    assert registry.lookup("acme", "lab:x").id == "gl:acme-specific"
    assert registry.lookup("acme", "lab:y").id == "gl:acme-class"
    assert registry.lookup("acme", "img:z").id == "gl:nccn-fallback"
    assert registry.lookup("other", "img:z").id == "gl:nccn-fallback"
    with pytest.raises(NoGuidelineFound):
        registry.lookup("acme", "rx:nope")


def test_simulate_batch_embeds_errors_in_order(registry):
    snap = make_snapshot(facts=SYMPTOMS)
    results = simulate_batch(
        registry, "anthem", ["lab:ca125", "rx:unlisted", "lab:cbc-lft"], snap
    )
    assert [type(r).__name__ for r in results] == [
        "Determination",
        "BatchError",
        "Determination",
    ]
    assert results[1].code == "rx:unlisted"
    assert "no guideline" in results[1].error
    docs = [determination_to_doc(r) for r in results]
    assert docs[0]["status"] == "APPROVED"
    assert "error" in docs[1]


def test_select_cpt_contrast_switch(code_map):
    with_contrast = ProcedureSpec.of(
        "CT", ["abdomen", "pelvis"], {"contrast": True}
    )
    without = ProcedureSpec.of("ct", ["pelvis", "abdomen"], {"contrast": False})
    assert select_cpt(with_contrast, code_map) == "cpt:74177"
    assert select_cpt(without, code_map) == "cpt:74176"


def test_select_cpt_body_sites_must_match_exactly(code_map):
    spec = ProcedureSpec.of("CT", ["abdomen"], {"contrast": True})
    with pytest.raises(NoCodeMatch):
        select_cpt(spec, code_map)


def test_select_cpt_extra_spec_attributes_are_tolerated(code_map):
    spec = ProcedureSpec.of(
        "CT", ["abdomen", "pelvis"], {"contrast": True, "priority": "urgent"}
    )
    assert select_cpt(spec, code_map) == "cpt:74177"


def test_select_cpt_ambiguity_is_an_error(code_map):
    from careflow.necessity import load_code_map

    table = load_code_map(
        {
            "rows": [
                {"modality": "mri", "body_sites": ["head"], "attributes": {}, "code": "cpt:1"},
                {"modality": "MRI", "body_sites": ["head"], "attributes": {}, "code": "cpt:2"},
            ]
        }
    )
    with pytest.raises(AmbiguousCodeMatch):
        select_cpt(ProcedureSpec.of("mri", ["head"], {}), table)
