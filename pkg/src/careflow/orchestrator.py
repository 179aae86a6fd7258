"""Twin registry and synchronous function-call dispatch with a logical clock
and an append-only audit log. No wall-clock time enters the log, so replays
are byte-identical."""

from __future__ import annotations

import datetime
import json
from dataclasses import dataclass, is_dataclass
from typing import Any, Callable, Mapping, Optional

from .errors import DuplicateTwinError, TwinCallError

AUDIT_HEADER = {"audit": "careflow", "version": 1}


@dataclass(frozen=True)
class TwinMessage:
    id: str
    logical_time: int
    sender: str
    recipient: str
    function: str
    payload: Any
    correlation_id: str


@dataclass(frozen=True)
class AuditEntry:
    logical_time: int
    twin: str
    kind: str  # "request" | "response" | "reasoning" | "error"
    text: str
    refs: tuple[str, ...] = ()


class TwinContext:
    """Handed to twin functions: lets them delegate calls and emit reasoning
    lines that land in the audit under the active correlation id."""

    def __init__(self, orchestrator: "Orchestrator", twin_id: str):
        self._orchestrator = orchestrator
        self.twin_id = twin_id

    def call(self, recipient: str, function: str, payload: Any = None) -> Any:
        return self._orchestrator.call(self.twin_id, recipient, function, payload)

    def reason(self, *lines: str) -> None:
        for line in lines:
            self._orchestrator._append(self.twin_id, "reasoning", line)


class Orchestrator:
    """Routes function-call messages between registered twins.

    Every dispatch appends exactly one request entry and exactly one response
    or error entry; reasoning entries from the handler interleave between
    them. The integer clock advances by one per entry.
    """

    def __init__(self, clock: int = 0, message_seq: int = 0, correlation_seq: int = 0):
        # Non-zero seeds let a session resume its logical clock after reload.
        self._twins: dict[str, Mapping[str, Callable]] = {}
        self._contexts: dict[str, TwinContext] = {}
        self._audit: list[AuditEntry] = []
        self._clock = clock
        self._message_seq = message_seq
        self._correlation_seq = correlation_seq
        self._correlation_stack: list[str] = []

    # -- registration -------------------------------------------------------

    def register_twin(self, twin_id: str, functions: Mapping[str, Callable]) -> TwinContext:
        if twin_id in self._twins:
            raise DuplicateTwinError(f"twin id {twin_id!r} already registered")
        self._twins[twin_id] = dict(functions)
        context = TwinContext(self, twin_id)
        self._contexts[twin_id] = context
        return context

    def twins(self) -> list[str]:
        return list(self._twins)

    def functions_of(self, twin_id: str) -> list[str]:
        return sorted(self._twins.get(twin_id, {}))

    def resolve_function(self, function: str) -> Optional[str]:
        """The first registered twin exposing ``function``, else None."""
        for twin_id, table in self._twins.items():
            if function in table:
                return twin_id
        return None

    # -- clock and audit ----------------------------------------------------

    @property
    def clock(self) -> int:
        return self._clock

    @property
    def message_seq(self) -> int:
        return self._message_seq

    @property
    def correlation_seq(self) -> int:
        return self._correlation_seq

    def audit_log(self) -> tuple[AuditEntry, ...]:
        return tuple(self._audit)

    def _append(self, twin: str, kind: str, text: str, refs: tuple[str, ...] = ()) -> None:
        if kind == "reasoning" and not refs and self._correlation_stack:
            refs = (self._correlation_stack[-1],)
        self._clock += 1
        self._audit.append(AuditEntry(self._clock, twin, kind, text, refs))

    def _next_message_id(self) -> str:
        self._message_seq += 1
        return f"m{self._message_seq:04d}"

    def _next_correlation_id(self) -> str:
        self._correlation_seq += 1
        return f"c{self._correlation_seq:04d}"

    # -- dispatch -----------------------------------------------------------

    def call(self, sender: str, recipient: str, function: str, payload: Any = None) -> Any:
        """Dispatch and unwrap: returns the response payload or raises
        TwinCallError when the dispatch produced an error response."""
        request = TwinMessage(
            id=self._next_message_id(),
            logical_time=self._clock + 1,
            sender=sender,
            recipient=recipient,
            function=function,
            payload=payload,
            correlation_id=self._next_correlation_id(),
        )
        response = self.dispatch(request)
        if isinstance(response.payload, dict) and "twin-call-error" in response.payload:
            raise TwinCallError(recipient, function, response.payload["twin-call-error"])
        return response.payload

    def dispatch(self, message: TwinMessage) -> TwinMessage:
        corr = message.correlation_id
        self._append(
            message.sender,
            "request",
            f"{message.recipient}.{message.function}({summarize(message.payload)})",
            (message.id, corr),
        )
        table = self._twins.get(message.recipient)
        if table is None:
            return self._error_response(message, f"unknown twin {message.recipient!r}")
        handler = table.get(message.function)
        if handler is None:
            return self._error_response(
                message, f"twin {message.recipient!r} has no function {message.function!r}"
            )
        self._correlation_stack.append(corr)
        try:
            result = handler(self._contexts[message.recipient], message.payload)
        except TwinCallError as exc:
            return self._error_response(message, str(exc))
        except Exception as exc:
            return self._error_response(message, f"{type(exc).__name__}: {exc}")
        finally:
            self._correlation_stack.pop()
        response_id = self._next_message_id()
        self._append(
            message.recipient,
            "response",
            f"{message.function} -> {summarize(result)}",
            (response_id, corr),
        )
        return TwinMessage(
            id=response_id,
            logical_time=self._clock,
            sender=message.recipient,
            recipient=message.sender,
            function=message.function,
            payload=result,
            correlation_id=corr,
        )

    def _error_response(self, message: TwinMessage, detail: str) -> TwinMessage:
        response_id = self._next_message_id()
        self._append(message.recipient, "error", detail, (response_id, message.correlation_id))
        return TwinMessage(
            id=response_id,
            logical_time=self._clock,
            sender=message.recipient,
            recipient=message.sender,
            function=message.function,
            payload={"twin-call-error": detail},
            correlation_id=message.correlation_id,
        )


# ---------------------------------------------------------------------------
# Payload summaries and audit export
# ---------------------------------------------------------------------------

def summarize(value: Any, depth: int = 0) -> str:
    """Compact, deterministic one-line rendering of a payload for the audit.

    Deliberately shallow: nested structures render as counts beyond depth 1,
    keeping audit lines stable and short.
    """
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return json.dumps(value)
    if isinstance(value, str):
        return value if len(value) <= 60 else value[:57] + "..."
    if isinstance(value, datetime.date):
        return value.isoformat()
    if isinstance(value, dict):
        if depth >= 1:
            return f"{{{len(value)} fields}}"
        inner = ", ".join(f"{k}={summarize(v, depth + 1)}" for k, v in sorted(value.items()))
        return f"{{{inner}}}"
    if isinstance(value, (list, tuple)):
        if depth >= 1:
            return f"[{len(value)} items]"
        return "[" + ", ".join(summarize(v, depth + 1) for v in value) + "]"
    if is_dataclass(value):
        return _summarize_dataclass(value)
    return type(value).__name__


def _summarize_dataclass(value: Any) -> str:
    name = type(value).__name__
    for attrs in (
        ("id", "kind", "code", "date"),  # ClinicalEvent
        ("code", "status"),  # Determination
        ("code", "error"),  # BatchError
        ("node_id", "rank"),  # Recommendation
        ("kind", "subject"),  # GapFinding / Deviation
        ("record_id", "as_of"),  # PatientSnapshot
    ):
        if all(hasattr(value, a) for a in attrs):
            parts = []
            for a in attrs:
                v = getattr(value, a)
                v = v.value if hasattr(v, "value") and not isinstance(v, str) else v
                parts.append(f"{a}={summarize(v, depth=2)}")
            return f"{name}({', '.join(parts)})"
    return name


def entry_to_doc(entry: AuditEntry) -> dict:
    # Field order is fixed; exports are compared byte-for-byte.
    return {
        "t": entry.logical_time,
        "twin": entry.twin,
        "kind": entry.kind,
        "text": entry.text,
        "refs": list(entry.refs),
    }


def audit_export(entries) -> str:
    """Line-delimited export: one header line, then one line per entry with
    the fixed field order t, twin, kind, text, refs. Accepts AuditEntry
    values or previously exported entry documents."""
    lines = [json.dumps(AUDIT_HEADER, separators=(",", ":"))]
    for entry in entries:
        doc = entry if isinstance(entry, dict) else entry_to_doc(entry)
        ordered = {k: doc[k] for k in ("t", "twin", "kind", "text", "refs")}
        lines.append(json.dumps(ordered, separators=(",", ":"), ensure_ascii=True))
    return "\n".join(lines) + "\n"
