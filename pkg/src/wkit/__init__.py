"""Finite-order Whitney jets, cusp-condition checks, Whitney extension and atlas patching."""

__version__ = "0.1.0"

from .errors import (ChartDomainError, ConfigurationError, CoverageError, CuspConditionError,
                     GlueError, IndexingError, JetCheckError, WkitError)
from .jets import JetField, MultiIndex, multi_indices, seminorm_abs, whitney_jet_check
from .domains import SampledClosedSet, domain_from_spec
from .cusp import check_no_narrow_fjords, check_outward_cusps
from .extension import extend_jet, verify_jet_agreement, whitney_decompose
from .patching import Atlas, ExtensionOperator, global_extension_operator
from .mappings import CircleMap, submersion_chart_check

__all__ = [
    "__version__", "WkitError", "ConfigurationError", "JetCheckError", "CuspConditionError",
    "IndexingError", "CoverageError", "GlueError", "ChartDomainError",
    "JetField", "MultiIndex", "multi_indices", "seminorm_abs", "whitney_jet_check",
    "SampledClosedSet", "domain_from_spec", "check_outward_cusps", "check_no_narrow_fjords",
    "whitney_decompose", "extend_jet", "verify_jet_agreement",
    "Atlas", "ExtensionOperator", "global_extension_operator",
    "CircleMap", "submersion_chart_check",
]
