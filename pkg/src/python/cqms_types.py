"""
cqms - Type Definitions

Pydantic models shared by the numerical modules, the suites and the CLI:
matrix documents, seminorm values, metric estimates, check reports and result
records, plus the exception hierarchy used across the package.
"""

from enum import StrEnum
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator

CQMS_VERSION = "1.0.0"


class CqmsError(Exception):
    """Base class for all errors raised by the package."""


class InputError(CqmsError, ValueError):
    """An argument violates an operation's preconditions."""


class ConfigError(InputError):
    """A configuration document is malformed or references missing files."""


class ValidationFailure(CqmsError):
    """A validation check failed; carries the offending report."""

    def __init__(self, message: str, report: Optional["CheckReport"] = None):
        super().__init__(message)
        self.report = report


class NumericalFailure(CqmsError):
    """A numerical routine failed to produce a usable result."""


class EstimateKind(StrEnum):
    """How a reported number relates to the quantity it estimates."""
    EXACT = "exact"
    UPPER = "upper"
    LOWER = "lower"
    HEURISTIC = "heuristic"


class CMatrix(BaseModel):
    """
    Dense complex matrix in the row-major JSON layout {"rows","cols","re","im"}.
    """
    rows: int = Field(..., gt=0, description="Number of rows")
    cols: int = Field(..., gt=0, description="Number of columns")
    re: List[float] = Field(..., description="Real parts, row-major")
    im: List[float] = Field(..., description="Imaginary parts, row-major")

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _check_entries(self) -> "CMatrix":
        expected = self.rows * self.cols
        if len(self.re) != expected or len(self.im) != expected:
            raise ValueError(
                f"expected {expected} entries for a {self.rows}x{self.cols} matrix, "
                f"got {len(self.re)} real and {len(self.im)} imaginary"
            )
        if not (np.all(np.isfinite(self.re)) and np.all(np.isfinite(self.im))):
            raise ValueError("matrix entries must be finite")
        return self

    @classmethod
    def from_array(cls, array: Any) -> "CMatrix":
        """Build a document from anything numpy can turn into a 2-d array."""
        a = np.atleast_2d(np.asarray(array, dtype=complex))
        if a.ndim != 2:
            raise InputError(f"expected a 2-d array, got shape {a.shape}")
        flat = a.ravel(order="C")
        return cls(rows=a.shape[0], cols=a.shape[1],
                   re=[float(v) for v in flat.real], im=[float(v) for v in flat.imag])

    def to_array(self) -> np.ndarray:
        """Return the matrix as a complex numpy array."""
        values = np.asarray(self.re, dtype=float) + 1j * np.asarray(self.im, dtype=float)
        return values.reshape(self.rows, self.cols)


class OperatorSystemModel(BaseModel):
    """JSON document for an operator system: {"ambient_dim": k, "basis": [...]}"""
    ambient_dim: int = Field(..., gt=0, description="Size k of the ambient matrix algebra M_k")
    basis: List[CMatrix] = Field(..., min_length=1, description="Basis, identity first")

    model_config = ConfigDict(frozen=True)


class LinearMapModel(BaseModel):
    """JSON document for a map into M_n: {"n": n, "images": [...]}"""
    n: int = Field(..., gt=0, description="Matrix level of the target algebra")
    images: List[CMatrix] = Field(..., min_length=1, description="Images of the basis elements")

    model_config = ConfigDict(frozen=True)


class SeminormValue(BaseModel):
    """
    Value of a seminorm evaluation.

    Exact evaluations have lower == value == upper. Bracketed evaluations
    report certified ends of an interval containing the true value.
    """
    value: float = Field(..., ge=0.0, description="Reported value")
    lower: float = Field(..., ge=0.0, description="Certified lower end")
    upper: float = Field(..., ge=0.0, description="Certified upper end")
    kind: Literal["exact", "bracketed"] = Field(default="exact")

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _check_order(self) -> "SeminormValue":
        slack = 1e-12 * (1.0 + self.upper)
        if not (self.lower <= self.value + slack and self.value <= self.upper + slack):
            raise ValueError(f"bracket [{self.lower}, {self.upper}] does not contain {self.value}")
        return self

    @classmethod
    def exact(cls, value: float) -> "SeminormValue":
        v = max(float(value), 0.0)
        return cls(value=v, lower=v, upper=v, kind="exact")

    @classmethod
    def bracketed(cls, lower: float, upper: float, value: Optional[float] = None) -> "SeminormValue":
        lo = max(float(lower), 0.0)
        hi = max(float(upper), lo)
        return cls(value=lo if value is None else min(max(float(value), lo), hi),
                   lower=lo, upper=hi, kind="bracketed")

    @computed_field
    @property
    def width(self) -> float:
        """Width of the bracket (0 for exact values)."""
        return self.upper - self.lower


class Witness(BaseModel):
    """An element, map or construction that certifies a reported number."""
    label: str = Field(..., description="What the witness is")
    matrices: List[CMatrix] = Field(default_factory=list, description="Matrices making up the witness")
    value: Optional[float] = Field(default=None, description="Value the witness re-evaluates to")
    note: Optional[str] = Field(default=None)

    model_config = ConfigDict(frozen=True)


class MetricEstimate(BaseModel):
    """
    A number tagged with how it bounds the true quantity.
    """
    value: float = Field(..., ge=0.0, description="Reported value")
    kind: EstimateKind = Field(..., description="exact | upper | lower | heuristic")
    n: int = Field(default=1, ge=1, description="Matrix level")
    seed: Optional[int] = Field(default=None, description="Seed of the sampling that produced the value")
    bracket: Optional[Tuple[float, float]] = Field(default=None, description="Optional [lower, upper] pair")
    witnesses: List[Witness] = Field(default_factory=list)
    params: Dict[str, Any] = Field(default_factory=dict, description="Sampling parameters")

    model_config = ConfigDict(frozen=True, use_enum_values=True)

    @property
    def lower(self) -> Optional[float]:
        if self.bracket is not None:
            return self.bracket[0]
        if self.kind in (EstimateKind.EXACT, EstimateKind.LOWER):
            return self.value
        return None

    @property
    def upper(self) -> Optional[float]:
        if self.bracket is not None:
            return self.bracket[1]
        if self.kind in (EstimateKind.EXACT, EstimateKind.UPPER):
            return self.value
        return None

    @property
    def certified(self) -> bool:
        return self.kind != EstimateKind.HEURISTIC


class CheckReport(BaseModel):
    """
    Outcome of a validation check.
    """
    name: str = Field(..., description="Name of the check")
    passed: bool = Field(..., description="Whether the check passed")
    inconclusive: bool = Field(default=False, description="No evidence either way; never counts as a pass")
    message: Optional[str] = Field(default=None)
    details: Dict[str, Any] = Field(default_factory=dict)

    model_config = ConfigDict(frozen=True)

    @classmethod
    def pass_report(cls, name: str, message: Optional[str] = None,
                    details: Optional[Dict[str, Any]] = None) -> "CheckReport":
        """Create a passing report"""
        return cls(name=name, passed=True, message=message, details=details or {})

    @classmethod
    def fail_report(cls, name: str, message: str,
                    details: Optional[Dict[str, Any]] = None) -> "CheckReport":
        """Create a failing report"""
        return cls(name=name, passed=False, message=message, details=details or {})

    @classmethod
    def inconclusive_report(cls, name: str, message: str,
                            details: Optional[Dict[str, Any]] = None) -> "CheckReport":
        """Create a report for a check that could not be carried out"""
        return cls(name=name, passed=False, inconclusive=True, message=message,
                   details=details or {})

    @classmethod
    def combine(cls, name: str, reports: List["CheckReport"]) -> "CheckReport":
        """Fold several reports into one that passes iff all of them pass."""
        failed = [r.name for r in reports if not r.passed]
        details = {r.name: r.model_dump() for r in reports}
        if not failed:
            return cls.pass_report(name, f"{len(reports)} checks passed", details)
        if all(r.inconclusive for r in reports if not r.passed):
            return cls.inconclusive_report(name, f"inconclusive: {', '.join(failed)}", details)
        return cls.fail_report(name, f"failed: {', '.join(failed)}", details)


class FejerBound(BaseModel):
    """Quadrature value of a Fejér-kernel integral with an error estimate."""
    value: float = Field(..., ge=0.0)
    error_estimate: float = Field(..., ge=0.0, description="Difference to the half-resolution rule")
    points: int = Field(..., gt=0)

    model_config = ConfigDict(frozen=True)


class ResultRecord(BaseModel):
    """
    Everything a suite run produced. Runtime is kept out of the serialized
    record so that identical runs produce identical documents.
    """
    suite: str
    config_hash: str = Field(..., description="sha256 of the canonical configuration document")
    seed: int
    version: str = Field(default=CQMS_VERSION)
    estimates: Dict[str, MetricEstimate] = Field(default_factory=dict)
    checks: List[CheckReport] = Field(default_factory=list)
    tables: Dict[str, List[Dict[str, Any]]] = Field(default_factory=dict)
    runtime_seconds: float = Field(default=0.0, exclude=True)

    @computed_field
    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)
