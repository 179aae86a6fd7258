"""Namespaced clinical codes of the form ``<namespace>:<value>``.

The namespace set is fixed; values are free-form tokens (CPT numbers, symptom
slugs, lab panel names). Codes outside the known namespaces are syntactically
acceptable but flagged as warnings by graph validation.
"""

from __future__ import annotations

import re

NAMESPACES = frozenset({"sx", "exam", "lab", "img", "cpt", "dx", "rx", "demo"})

_CODE_RE = re.compile(r"^([a-z][a-z0-9_]*):([A-Za-z0-9][A-Za-z0-9_.\-]*)$")


def parse_code(text: str) -> tuple[str, str]:
    """Split a code into (namespace, value); raises ValueError on bad form."""
    m = _CODE_RE.match(text)
    if not m:
        raise ValueError(f"malformed code {text!r}: expected <namespace>:<value>")
    return m.group(1), m.group(2)


def is_code(text: str) -> bool:
    return _CODE_RE.match(text) is not None


def namespace_of(code: str) -> str:
    return parse_code(code)[0]


def is_known_namespace(code: str) -> bool:
    """True when the code's namespace belongs to the fixed set."""
    return namespace_of(code) in NAMESPACES
