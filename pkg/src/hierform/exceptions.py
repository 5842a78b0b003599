"""Exception hierarchy.

Every error raised on purpose by the library derives from
:class:`FormationError`. Most also derive from a builtin (``ValueError``,
``IndexError``, ``RuntimeError``) so callers that only know the builtins
still catch them.
"""


class FormationError(Exception):
    """Base class for all library errors."""


# graph construction

class DuplicateEdge(FormationError, ValueError):
    pass


class SelfLoop(FormationError, ValueError):
    pass


class IndexOutOfRange(FormationError, IndexError):
    pass


class TooFewAgents(FormationError, ValueError):
    pass


# geometry

class DimensionMismatch(FormationError, ValueError):
    pass


class DegenerateSource(FormationError, ValueError):
    """The source configuration does not affinely span its ambient space."""


class DegenerateConfiguration(FormationError, ValueError):
    pass


# stress

class NotRooted(FormationError, ValueError):
    pass


class NoValidStress(FormationError, ValueError):
    pass


class MissingEdgeWeight(FormationError, KeyError):
    pass


class NotLocalizable(FormationError, ValueError):
    pass


class Cancelled(FormationError, RuntimeError):
    """Raised when a caller-supplied cancellation token is set."""


# reorganization

class DegenerateLeaders(FormationError, ValueError):
    pass


class TooFewLeaders(FormationError, ValueError):
    pass


class NoViableAssignment(FormationError, ValueError):
    pass


class LeadersDoNotSpan(FormationError, ValueError):
    pass


class NotViableAssignment(FormationError, ValueError):
    pass


# simulation

class ZeroWeightSum(FormationError, ZeroDivisionError):
    pass


class ScheduleExhausted(FormationError, RuntimeError):
    pass


# scenario / trace io

class ParseError(FormationError, ValueError):
    pass


class ScenarioValidationError(FormationError, ValueError):
    """Collects every problem found in a scenario, not just the first.

    ``errors`` is a list of ``(field_path, message)`` pairs where the path
    is a dotted string such as ``events.3.A``.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        lines = [f"{path or '<root>'}: {msg}" for path, msg in self.errors]
        super().__init__(
            f"{len(self.errors)} validation error(s):\n  " + "\n  ".join(lines)
        )


class SchemaVersionMismatch(FormationError, ValueError):
    pass
