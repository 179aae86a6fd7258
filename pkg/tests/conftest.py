import json
from datetime import date

import pytest

# one line per acceptance criterion, printed after the run (uncaptured)
acceptance_lines: list = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.write_line(line)

from careflow.assets import asset_text
from careflow.graph import load_graph
from careflow.guidelines import load_registry
from careflow.necessity import load_code_map
from careflow.patient import ClinicalFact, PatientSnapshot, load_record


@pytest.fixture(scope="session")
def graph():
    return load_graph(json.loads(asset_text("ovarian-graph.json")))


@pytest.fixture(scope="session")
def registry():
    return load_registry(json.loads(asset_text("ovarian-registry.json")))


@pytest.fixture(scope="session")
def code_map():
    return load_code_map(json.loads(asset_text("ovarian-code-map.json")))


@pytest.fixture(scope="session")
def vignette_record():
    return load_record(json.loads(asset_text("ovarian-vignette.json")))


@pytest.fixture(scope="session")
def scenario_doc():
    return json.loads(asset_text("ovarian-scenario.json"))


def make_snapshot(facts=None, demographics=None, as_of=date(2025, 3, 10), events=()):
    """Ad hoc snapshot for rule evaluation tests.

    ``facts`` maps code to value (or to a (value, date) pair for a specific
    effective date).
    """
    built = []
    for code, value in (facts or {}).items():
        if isinstance(value, tuple):
            value, effective = value
        else:
            effective = as_of
        built.append(ClinicalFact(code=code, effective_date=effective, value=value))
    return PatientSnapshot(
        record_id="pt-test",
        as_of=as_of,
        demographics=dict(demographics or {}),
        facts=tuple(built),
        events=tuple(events),
    )
