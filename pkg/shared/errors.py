"""
Exception hierarchy for hypobv.
"""

from typing import Any, Dict, Optional


class HypoBVError(Exception):
    """Base class for all domain errors."""
    exit_code: int = 1

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}


class VerdictFailure(HypoBVError):
    """An asserted identity or verdict did not hold."""
    exit_code = 2


class NumericNonConvergence(HypoBVError, ArithmeticError):
    """A numerical procedure did not reach its tolerance."""
    exit_code = 3


class SchemaError(HypoBVError, ValueError):
    """Input does not validate against the expected schema."""
    exit_code = 64


class FileError(HypoBVError, OSError):
    """An input file is missing or unreadable."""
    exit_code = 66


# polyops

class NonConstantLeading(SchemaError):
    """The leading t-coefficient Q_m depends on x."""


class ConstantPoly(SchemaError):
    """The polynomial is constant."""


class DimensionMismatch(SchemaError):
    """Point or operand dimension does not match the polynomial."""


# symfun

class TDependence(SchemaError):
    """An x-operator was expected but the polynomial involves t."""


class OrderTooHigh(SchemaError):
    """Requested bump derivative exceeds the configured K_max."""


# weights

class TruncationSuspect(NumericNonConvergence):
    """The supremum is attained at the truncation depth."""


class TruncationExceeded(NumericNonConvergence):
    """No admissible index exists within the truncation depth."""


class NoFit(VerdictFailure):
    """A bound guaranteed to exist could not be fitted."""


# indices

class RootSolverFailed(NumericNonConvergence):
    """The companion-matrix eigenvalue problem is ill-conditioned."""


# cauchyext

class ConditionViolation(VerdictFailure):
    """Preconditions of the Gevrey cutoff construction are not met."""


class OrderTooSmall(SchemaError):
    """Truncation order is below the t-degree of the operator."""


# boundary

class KindProfileMismatch(SchemaError):
    """The reference kernel does not solve the given operator."""


class QuadratureNoConvergence(NumericNonConvergence):
    """Adaptive quadrature failed to reach its tolerance."""


class NoConvergence(NumericNonConvergence):
    """The boundary-value trail is not Cauchy over the step schedule."""


class ResidualTooLarge(NumericNonConvergence):
    """The extension residual is too large for the requested tolerance."""


class OscillatoryQuadratureFailure(NumericNonConvergence):
    """Mollified Fourier evaluation did not stabilize."""


class AdmissibilityFailure(VerdictFailure):
    """The contour shift A or the radius R is not admissible."""
