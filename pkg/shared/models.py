"""
Shared data models for hypobv reports and jobs.
"""

from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field


class VerdictStatus(str, Enum):
    """Verdict on a truncation."""
    HOLDS = "holds-on-truncation"
    FAILS = "fails"
    INCONCLUSIVE = "inconclusive"


class RelationKind(str, Enum):
    """Relation between two weight sequences."""
    SUBSET = "subset"
    PREC = "prec"
    ASYMP = "asymp"
    NONE = "none"
    INCONCLUSIVE = "inconclusive"


class CaseTag(str, Enum):
    """Semi-elliptic case taxonomy."""
    ELLIPTIC = "elliptic"
    PARABOLIC_LIKE = "parabolic_like"
    CASE_III = "case_iii"
    NOT_SEMIELLIPTIC = "not_semielliptic"


class ExtensionMode(str, Enum):
    """Truncation modes of an extension build."""
    PLAIN = "plain"
    FINITE_ORDER = "finite_order"
    GEVREY = "gevrey"


class PairingMethod(str, Enum):
    """Boundary value evaluators."""
    DIRECT = "direct"
    STOKES = "stokes"


class JobStatus(str, Enum):
    """Outcome of a job."""
    OK = "ok"
    VERDICT_FAILURE = "verdict_failure"
    NON_CONVERGENCE = "non_convergence"
    SCHEMA_ERROR = "schema_error"
    FILE_ERROR = "file_error"
    ERROR = "error"


class Verdict(BaseModel):
    """One condition verdict with its witness and fitted constants."""
    name: str
    status: VerdictStatus
    witness: Optional[List[int]] = None
    constants: Dict[str, float] = Field(default_factory=dict)
    trace: Optional[List[Tuple[int, float]]] = None
    note: Optional[str] = None


class ConditionReport(BaseModel):
    """Verdicts of the weight-sequence conditions on a truncation."""
    p_max: int
    a: Optional[float] = None
    m1: Verdict
    m2: Verdict
    m2_star: Verdict
    m3_prime: Verdict
    m4: Optional[Verdict] = None
    dichotomy: Optional[str] = None  # prec or asymp against p!^(1/a)


class RootMargin(BaseModel):
    """Distance of the t-roots from the real axis at x."""
    x: List[float]
    value: float
    roots: List[Tuple[float, float]] = Field(default_factory=list)


class A0Check(BaseModel):
    """Numeric verification of an a0 candidate along rays."""
    a: float
    passed: bool
    derivative_bound: float  # fitted C of the derivative characterization
    margin_bound: float  # fitted C of the root-margin characterization
    radius: float
    derivative_slope: float
    margin_slope: float
    maximality_slope: float
    maximality_growth: float
    maximal: bool


class IndexReport(BaseModel):
    """Hypoellipticity indices of a polynomial."""
    b0: str
    semi_elliptic: VerdictStatus
    n: Optional[List[int]] = None
    witness: Optional[List[float]] = None
    a0: Optional[str] = None
    gamma0: Optional[str] = None
    mu0: Optional[str] = None
    case_tag: CaseTag = CaseTag.NOT_SEMIELLIPTIC
    min_principal: Optional[float] = None
    degree_bound_holds: bool = True
    degree_chain_holds: Optional[bool] = None
    degree_max_holds: Optional[bool] = None
    seed: Optional[int] = None
    numeric_a0_check: Optional[A0Check] = None


class ResidualPoint(BaseModel):
    """Residual sample on the dyadic window."""
    t: float
    residual: float
    weighted: Optional[float] = None


class ExtensionReport(BaseModel):
    """Verification of an extension build."""
    mode: ExtensionMode
    order: int
    traces_exact: bool
    slope: Optional[float] = None
    profile: List[ResidualPoint] = Field(default_factory=list)
    amplitude: Optional[float] = None
    amplitude_fitted: bool = False
    cauchy_growth_l1: Optional[float] = None
    m2_h: Optional[float] = None
    fitted_l: Optional[float] = None
    monotone: Optional[bool] = None
    convergent_branch: bool = False
    h: Optional[float] = None
    h_trend: Optional[List[Tuple[float, Optional[float]]]] = None


class TrailPoint(BaseModel):
    """One approximant of a boundary-value limit."""
    t: float
    s: float
    value: Tuple[float, float]


class PairingResult(BaseModel):
    """A boundary value paired with a test function."""
    method: PairingMethod
    value: Tuple[float, float]
    error: float
    trail: List[TrailPoint] = Field(default_factory=list)
    order: Optional[float] = None
    slot: Optional[int] = None

    @property
    def complex_value(self) -> complex:
        return complex(self.value[0], self.value[1])


class StokesResult(BaseModel):
    """Both sides of the integration by parts identity."""
    lhs: Tuple[float, float]
    rhs: Tuple[float, float]
    abs_diff: float
    tolerance: float


class GrowthFit(BaseModel):
    """Growth class of a zero solution near t = 0."""
    kind: str  # polynomial or gevrey
    n: int
    slope: float
    window: Tuple[float, float]
    fit_residual: float
    h_fit: Optional[float] = None
    b0: Optional[float] = None


class FundamentalSolutionReport(BaseModel):
    """Fundamental solution diagnostics in one space dimension."""
    amplitude: float
    radius: float
    delta_checks: List[Dict[str, Any]] = Field(default_factory=list)
    samples: List[Dict[str, Any]] = Field(default_factory=list)
    regularity_s: Optional[float] = None


class Job(BaseModel):
    """A batch job."""
    job_id: Optional[str] = None
    command: str
    poly: Optional[Any] = None
    phi: Optional[Any] = None
    phis: Optional[List[Any]] = None
    sequence: Optional[Any] = None
    parameters: Dict[str, Any] = Field(default_factory=dict)
    config: Optional[Dict[str, Any]] = None
    expect: str = "pass"  # pass or fail
    out: Optional[str] = None
    base_dir: Optional[str] = Field(default=None, exclude=True)


class JobResult(BaseModel):
    """Result of a job."""
    job_id: str
    command: str
    status: JobStatus
    success: bool
    result: Optional[Dict[str, Any]] = None
    error_message: Optional[str] = None
    exit_code: int = 0
    expected_failure: bool = False
    warnings: List[str] = Field(default_factory=list)


class Report(BaseModel):
    """Schema-versioned report of one job or a suite."""
    schema_version: str = Field(default="hypobv-report/1", alias="schema")
    job: Optional[Dict[str, Any]] = None
    results: List[JobResult] = Field(default_factory=list)
    provenance: Dict[str, Any] = Field(default_factory=dict)
    warnings: List[str] = Field(default_factory=list)
    summary: Dict[str, int] = Field(default_factory=dict)
    exit_code: int = 0

    model_config = {"populate_by_name": True}


class SeminormQuery(BaseModel):
    """Weighted sup-seminorm request: weight sequence M, scale h, box K and derivative cap."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    M: Any
    h: float = Field(gt=0)
    K: List[Tuple[float, float]] = Field(min_length=1)
    a_max: int = Field(ge=1)
    points: Optional[int] = Field(default=None, ge=2)
