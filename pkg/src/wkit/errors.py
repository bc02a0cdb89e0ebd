"""Exception hierarchy for wkit."""


class WkitError(Exception):
    """Base class for all wkit errors."""


class OrderError(WkitError, ValueError):
    """Requested jet order exceeds what the jet carries."""


class MissingPointError(WkitError, KeyError):
    """A base point is not among the sample points of a jet."""


class ConfigurationError(WkitError, ValueError):
    pass


class StencilError(WkitError, ValueError):
    """A finite-difference stencil left the set's membership oracle."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class GeometryError(WkitError, ValueError):
    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class SizeError(WkitError, RuntimeError):
    """A resource guard (sample count, cube budget) was exceeded."""


class EmptyInputError(WkitError, ValueError):
    pass


class DomainError(WkitError, ValueError):
    """Evaluation point outside the region an operator is defined on."""


class JetCheckError(WkitError):
    """Refusal to extend a jet that failed the Whitney criterion."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class CuspConditionError(WkitError):
    """A chart's closed set failed a cusp verifier."""

    def __init__(self, message, violation=None):
        super().__init__(message)
        self.violation = violation


class IndexingError(WkitError, IndexError):
    pass


class CoverageError(WkitError, ValueError):
    pass


class GlueError(WkitError):
    def __init__(self, message, chart_pair=None, sample=None, defect=None):
        super().__init__(message)
        self.chart_pair = chart_pair
        self.sample = sample
        self.defect = defect


class ChartDomainError(WkitError, ValueError):
    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node
