"""Command line entry points.

Four subcommands cover the operational surface: ``validate`` checks a
graph/registry pair for structural problems, ``run`` replays a scenario and
writes the result bundle, ``necessity`` issues a single determination, and
``serve`` starts the HTTP service.

Exit codes: 0 success (or an APPROVED determination), 3 DENIED,
4 INSUFFICIENT_INFORMATION, 1 for domain failures (validation errors, no
matching guideline, a busy port), 2 for unreadable or unwritable files.
"""

from __future__ import annotations

import argparse
import json
import os
import socket
import sys
from datetime import date
from typing import Optional, Sequence

from .errors import AssetReadError, CareflowError, ParseError
from .graph import load_graph, validate
from .guidelines import load_registry
from .necessity import Status, determine
from .patient import load_record, snapshot_at
from .rules import World
from .scenario import load_scenario, resolve_ref, result_audit_export, result_export, run_scenario

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_IO = 2
EXIT_DENIED = 3
EXIT_INSUFFICIENT = 4

DEFAULT_GRAPH = "bundled:ovarian-graph"
DEFAULT_REGISTRY = "bundled:ovarian-registry"
DEFAULT_CODE_MAP = "bundled:ovarian-code-map"
DEFAULT_SCENARIO = "bundled:ovarian-scenario"


def _load_json_ref(ref: str) -> dict:
    text = resolve_ref(ref)
    if isinstance(text, dict):
        return text
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{ref}: not valid JSON: {exc.msg}", exc.lineno, exc.colno) from None


def cmd_validate(args: argparse.Namespace) -> int:
    graph = load_graph(_load_json_ref(args.graph))
    registry = load_registry(_load_json_ref(args.registry))
    issues = validate(graph, registry)
    for issue in issues:
        print(f"{issue.severity}: {issue.location}: {issue.message}")
    errors = sum(1 for i in issues if i.severity == "error")
    print(f"{graph.id}: {len(issues)} issue(s), {errors} error(s)")
    return EXIT_OK if errors == 0 else EXIT_DOMAIN


def cmd_run(args: argparse.Namespace) -> int:
    scenario = load_scenario(_load_json_ref(args.scenario))
    result = run_scenario(scenario)
    out_path = args.out
    if out_path is None:
        out_path = f"{scenario.id}.result.json"
    audit_path = args.audit
    if audit_path is None:
        base = out_path[: -len(".json")] if out_path.endswith(".json") else out_path
        audit_path = f"{base}.audit.jsonl"
    try:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(result_export(result))
        with open(audit_path, "w", encoding="utf-8") as fh:
            fh.write(result_audit_export(result))
    except OSError as exc:
        raise AssetReadError(f"cannot write output: {exc}") from None
    failed = sum(1 for step in result.steps if "error" in step)
    print(f"{scenario.id}: {len(result.steps)} step(s), {failed} failed")
    print(f"result: {out_path}")
    print(f"audit: {audit_path}")
    return EXIT_OK if failed == 0 else EXIT_DOMAIN


def cmd_necessity(args: argparse.Namespace) -> int:
    registry = load_registry(_load_json_ref(args.registry))
    record = load_record(_load_json_ref(args.patient))
    as_of = date.fromisoformat(args.as_of) if args.as_of else record.latest_data_date()
    snapshot = snapshot_at(record, as_of)
    world = World.OPEN if args.world == "open" else World.CLOSED
    det = determine(registry, record.payer_id, args.code, snapshot, world=world)
    print("\n".join(det.reasoning))
    if det.status is Status.APPROVED:
        return EXIT_OK
    if det.status is Status.DENIED:
        return EXIT_DENIED
    return EXIT_INSUFFICIENT


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    port = args.port
    if port is None:
        port = int(os.environ.get("PORT", "8000"))
    store = args.store or os.environ.get("CAREFLOW_STORE") or ".careflow-sessions"
    # uvicorn exits with its own code on a bind failure; probe first so a
    # busy port surfaces as a domain error rather than an I/O one.
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((args.host, port))
    except OSError as exc:
        print(f"error: cannot bind {args.host}:{port}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    finally:
        probe.close()
    app = create_app(store)
    uvicorn.run(app, host=args.host, port=port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="careflow",
        description="Care-path guidance, gap detection, and necessity checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="check a graph and registry for problems")
    p_validate.add_argument("--graph", default=DEFAULT_GRAPH)
    p_validate.add_argument("--registry", default=DEFAULT_REGISTRY)
    p_validate.set_defaults(func=cmd_validate)

    p_run = sub.add_parser("run", help="replay a scenario and write the result bundle")
    p_run.add_argument("--scenario", default=DEFAULT_SCENARIO)
    p_run.add_argument("--out", default=None, help="result path (default <scenario-id>.result.json)")
    p_run.add_argument("--audit", default=None, help="audit path (default <out>.audit.jsonl)")
    p_run.set_defaults(func=cmd_run)

    p_nec = sub.add_parser("necessity", help="issue one determination for a code")
    p_nec.add_argument("code", help="intervention code, e.g. lab:ca125")
    p_nec.add_argument("--registry", default=DEFAULT_REGISTRY)
    p_nec.add_argument("--patient", required=True)
    p_nec.add_argument("--as-of", default=None, help="snapshot date (default: latest data date)")
    p_nec.add_argument("--world", choices=["open", "closed"], default="open")
    p_nec.set_defaults(func=cmd_necessity)

    p_serve = sub.add_parser("serve", help="start the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=None, help="default $PORT or 8000")
    p_serve.add_argument("--store", default=None, help="session directory, default $CAREFLOW_STORE")
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AssetReadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (CareflowError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
