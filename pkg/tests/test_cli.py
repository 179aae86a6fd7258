"""Exit codes and outputs of the careflow command."""

import json
import socket

import pytest

from careflow.assets import asset_text
from careflow.cli import (
    EXIT_DENIED,
    EXIT_DOMAIN,
    EXIT_INSUFFICIENT,
    EXIT_IO,
    EXIT_OK,
    main,
)

VIGNETTE = "src/careflow/assets/ovarian-vignette.json"


@pytest.fixture()
def vignette_path(tmp_path):
    p = tmp_path / "vignette.json"
    p.write_text(asset_text("ovarian-vignette.json"))
    return str(p)


@pytest.fixture()
def empty_patient_path(tmp_path):
    p = tmp_path / "patient.json"
    p.write_text(asset_text("ovarian-scenario-patient.json"))
    return str(p)


def test_validate_bundled_assets_clean(capsys):
    assert main(["validate"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "0 error(s)" in out


def test_validate_broken_graph_fails(tmp_path, capsys):
    graph = json.loads(asset_text("ovarian-graph.json"))
    graph["nodes"][1]["guideline_ids"] = ["gl:phantom"]
    p = tmp_path / "graph.json"
    p.write_text(json.dumps(graph))
    assert main(["validate", "--graph", str(p)]) == EXIT_DOMAIN
    out = capsys.readouterr().out
    assert "gl:phantom" in out


def test_validate_unreadable_graph_is_io_error(capsys):
    assert main(["validate", "--graph", "/does/not/exist.json"]) == EXIT_IO
    assert "error:" in capsys.readouterr().err


def test_run_writes_result_and_audit(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["run", "--out", str(out)]) == EXIT_OK
    result = json.loads(out.read_text())
    assert result["scenario_id"] == "ovarian-diagnosis-journey"
    audit = (tmp_path / "r.audit.jsonl").read_text()
    assert audit.splitlines()[0] == '{"audit":"careflow","version":1}'


def test_run_unwritable_out_is_io_error(tmp_path):
    assert main(["run", "--out", str(tmp_path / "nope" / "r.json")]) == EXIT_IO


def test_necessity_approved(vignette_path):
    assert main(["necessity", "lab:ca125", "--patient", vignette_path]) == EXIT_OK


def test_necessity_insufficient_open_world(empty_patient_path):
    code = main(
        ["necessity", "lab:ca125", "--patient", empty_patient_path, "--as-of", "2025-03-10"]
    )
    assert code == EXIT_INSUFFICIENT


def test_necessity_denied_closed_world(empty_patient_path):
    code = main(
        [
            "necessity",
            "lab:ca125",
            "--patient",
            empty_patient_path,
            "--as-of",
            "2025-03-10",
            "--world",
            "closed",
        ]
    )
    assert code == EXIT_DENIED


def test_necessity_unknown_code_is_domain_error(vignette_path, capsys):
    assert main(["necessity", "rx:unlisted", "--patient", vignette_path]) == EXIT_DOMAIN
    assert "no guideline" in capsys.readouterr().err


def test_necessity_prints_reasoning(vignette_path, capsys):
    main(["necessity", "lab:ca125", "--patient", vignette_path])
    out = capsys.readouterr().out
    assert "applying guideline gl:anthem-ca125" in out
    assert out.rstrip().endswith("status: APPROVED")


def test_serve_busy_port_is_domain_error(capsys):
    blocker = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    blocker.bind(("127.0.0.1", 0))
    blocker.listen(1)
    port = blocker.getsockname()[1]
    try:
        assert main(["serve", "--port", str(port)]) == EXIT_DOMAIN
        assert "cannot bind" in capsys.readouterr().err
    finally:
        blocker.close()
