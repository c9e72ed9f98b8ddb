"""Exception types shared across the package."""


class PrmcError(Exception):
    """Base class for all package errors."""


class LayoutError(PrmcError):
    """Operands disagree on alphabet layout, or a track reference is invalid."""


class CapacityError(PrmcError):
    """A configured resource cap was exceeded (desk-scale limit, not wrongness)."""


class ValidationError(PrmcError):
    """A model violates a structural invariant; carries the failed check and a witness."""

    def __init__(self, check, message, witness=None):
        super().__init__(f"{check}: {message}" + (f" (witness: {witness})" if witness is not None else ""))
        self.check = check
        self.witness = witness


class FormulaError(PrmcError):
    """Syntax or static-analysis error in a formula; carries a source position."""

    def __init__(self, message, pos=None):
        super().__init__(message if pos is None else f"{message} (at column {pos})")
        self.pos = pos


class ModelSyntaxError(PrmcError):
    """Syntax error in a model or automaton document; carries a line number."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class UnsupportedStar(PrmcError):
    """An iterated announcement does not meet the preconditions of the learner."""


class Diverged(PrmcError):
    """The relation learner exhausted its budget without converging.

    Divergence (modulo budget) certifies that the disappearance relation is not
    regular; the last hypothesis is attached for inspection.
    """

    def __init__(self, reason, hypothesis=None, stats=None):
        super().__init__(reason)
        self.hypothesis = hypothesis
        self.stats = stats or {}
