"""Exception types raised across the package."""


class GraphonStabError(Exception):
    """Base class for all package errors."""


class DomainError(GraphonStabError, ValueError):
    """An argument lies outside the domain of the operation."""


class InvariantError(GraphonStabError, ValueError):
    """An object violates a structural invariant (symmetry, range, ...)."""


class RangeError(GraphonStabError, ValueError):
    """A perturbed kernel leaves [0, 1] under the reject policy."""


class SingularityError(GraphonStabError, ValueError):
    """The exponential perturbation was applied to a kernel that reaches 0."""


class ShapeError(GraphonStabError, ValueError):
    """Dimensions of operands do not match."""


class ConfigError(GraphonStabError, ValueError):
    """Malformed experiment or model configuration."""


class UndefinedGapError(GraphonStabError, ValueError):
    """The eigengap is taken over an empty set of band eigenvalues."""


class DivergenceError(GraphonStabError, ArithmeticError):
    """Training produced a non-finite loss."""

    def __init__(self, step, loss):
        super().__init__(f"non-finite loss {loss!r} at step {step}")
        self.step = step
        self.loss = loss
