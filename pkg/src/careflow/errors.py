"""Exception types shared across the careflow package."""


class CareflowError(Exception):
    """Base class for all careflow domain errors."""


class ParseError(CareflowError):
    """Malformed DSL text or asset document, with a 1-based source location."""

    def __init__(self, message: str, line: int = 1, column: int = 1):
        super().__init__(f"{message} (line {line}, column {column})")
        self.message = message
        self.line = line
        self.column = column


class StructuralError(CareflowError):
    """A document parsed but violates a structural invariant (dangling
    reference, duplicate id, missing required section)."""


class AssetReadError(CareflowError):
    """An asset file or bundled resource could not be read at all."""


class UnknownNodeError(CareflowError):
    """A node id was requested that does not exist in the graph."""


class NoGuidelineFound(CareflowError):
    """No guideline resolves for a (payer, code) pair, including fallbacks."""

    def __init__(self, payer: str, code: str):
        super().__init__(f"no guideline found for payer={payer!r} code={code!r}")
        self.payer = payer
        self.code = code


class NoCodeMatch(CareflowError):
    """No code-mapping row matches the requested procedure."""


class AmbiguousCodeMatch(CareflowError):
    """Two or more code-mapping rows match the requested procedure."""


class ExtractionError(CareflowError):
    """The text-extraction gateway failed for a note."""

    def __init__(self, note_id: str, cause: str):
        super().__init__(f"extraction failed for note {note_id!r}: {cause}")
        self.note_id = note_id
        self.cause = cause


class DuplicateTwinError(CareflowError):
    """A twin id was registered twice on the same orchestrator."""


class TwinCallError(CareflowError):
    """A dispatched twin call returned an error response."""

    def __init__(self, recipient: str, function: str, detail: str):
        super().__init__(f"{recipient}.{function} failed: {detail}")
        self.recipient = recipient
        self.function = function
        self.detail = detail
