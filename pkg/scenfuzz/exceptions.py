"""
scenfuzz exception hierarchy
"""

from typing import List, Optional


class ScenfuzzError(Exception):
    """Base class for every error raised by scenfuzz"""


class ConfigError(ScenfuzzError):
    """Campaign configuration is unusable (exit code 2)"""


class ScenarioParseError(ScenfuzzError):
    """A scenario program failed to parse or validate"""

    def __init__(self, diagnostics: List["Diagnostic"], path: Optional[str] = None):  # noqa: F821
        self.diagnostics = list(diagnostics)
        self.path = path
        first = self.diagnostics[0] if self.diagnostics else None
        where = f"{path}:" if path else ""
        if first is not None:
            message = f"{where}{first.line}:{first.column}: {first.kind.value}: {first.message}"
            if len(self.diagnostics) > 1:
                message += f" (+{len(self.diagnostics) - 1} more)"
        else:
            message = f"{where} invalid scenario"
        super().__init__(message)


class InfeasibleSample(ScenfuzzError):
    """A sample point cannot be turned into a concrete scene"""


class StaleFeedback(ScenfuzzError):
    """Feedback refers to a point drawn by a different campaign"""


class MapError(ScenfuzzError):
    """Map document is malformed or violates a map invariant"""


class UnknownLane(MapError):
    """A lane id is not present in the map"""


class UnknownDimension(ScenfuzzError):
    """A requested feature dimension does not exist"""


class SutError(ScenfuzzError):
    """Base class for system-under-test failures"""


class SutTimeout(SutError):
    """The SUT did not answer within the action deadline"""


class SutUnreachable(SutError):
    """The SUT endpoint could not be reached"""


class SutProtocolError(SutError):
    """The SUT answered with something that is not a valid action"""


class SpawnCollision(ScenfuzzError):
    """A spawned agent would overlap an alive agent"""


class CoverageError(ScenfuzzError):
    pass


class MeshTooFine(CoverageError):
    """The coverage mesh would exceed the configured point budget"""


class EmptySampleSet(CoverageError):
    """Coverage requested for an empty point set"""


class ErrorTableError(ScenfuzzError):
    pass


class IndexGap(ErrorTableError):
    """Row index does not equal the current row count"""


class StorageFull(ErrorTableError):
    """The error table could not be written to disk"""


class RowNotFound(ErrorTableError):
    pass


class HashMismatch(ErrorTableError):
    """Scenario file changed since the campaign was recorded"""


class ReplayMismatch(ScenfuzzError):
    """A replayed rollout produced a different robustness vector"""


class ExpressionError(ScenfuzzError):
    """A scenario expression could not be evaluated"""
