"""
Pydantic models for convergence studies and the HTTP API.
Defines report, request and response schemas with validation.
"""

import math
from typing import List, Dict, Any, Optional
from pydantic import BaseModel, Field, validator

from src.core.config import config

ERROR_COLUMNS = ("sigma_err", "u_err", "asym_err")


def convergence_rate(e_coarse: float, e_fine: float, h_coarse: float, h_fine: float) -> float:
    """ln(e_i / e_{i+1}) / ln(h_i / h_{i+1}), valid for any refinement ratio."""
    if e_coarse == e_fine:
        return 0.0
    return math.log(e_coarse / e_fine) / math.log(h_coarse / h_fine)


class ErrorRow(BaseModel):
    n: int = Field(..., description="Cells per side")
    h: float = Field(..., description="Mesh size 1/n")
    sigma_err: float = Field(..., description="Sigma-norm error of the stress pair")
    u_err: float = Field(..., description="Weighted L2 error of the recovered displacement")
    asym_err: float = Field(..., description="Weighted norm of the skew part of the discrete stress")
    sigma_rate: Optional[float] = Field(None, description="Rate towards the next finer mesh")
    u_rate: Optional[float] = Field(None, description="Rate towards the next finer mesh")
    asym_rate: Optional[float] = Field(None, description="Rate towards the next finer mesh")
    unknowns: int = Field(0, description="Free unknowns of the solved system")

    @validator('sigma_err', 'u_err', 'asym_err')
    def validate_error(cls, v):
        if not math.isfinite(v) or v < 0.0:
            raise ValueError("Errors must be finite and non-negative")
        return v


class ErrorReport(BaseModel):
    case_id: str = Field(..., description="Manufactured case, exp1 or exp2")
    degree: int = Field(..., description="Polynomial degree k")
    params: Dict[str, float] = Field(default_factory=dict, description="mu, lambda, gamma")
    diagonal: str = Field("north-east", description="Mesh split direction")
    rows: List[ErrorRow] = Field(default_factory=list, description="One row per mesh, coarse to fine")
    partial: bool = Field(False, description="True when the study stopped early")
    failure: Optional[str] = Field(None, description="Reason the study stopped")

    model_config = {
        "json_schema_extra": {
            "example": {
                "case_id": "exp1",
                "degree": 1,
                "params": {"mu": 0.5, "lambda": 1.0, "gamma": 1.0},
                "diagonal": "north-east",
                "rows": [
                    {"n": 4, "h": 0.25, "sigma_err": 1.273, "u_err": 2.908e-2, "asym_err": 1.912e-1,
                     "sigma_rate": 1.0, "u_rate": 1.0, "asym_rate": 1.1},
                    {"n": 6, "h": 0.1667, "sigma_err": 0.8444, "u_err": 1.911e-2, "asym_err": 1.2e-1},
                ],
                "partial": False,
            }
        }
    }

    @validator('rows')
    def validate_rows(cls, v):
        if any(a.h <= b.h for a, b in zip(v, v[1:])):
            raise ValueError("Mesh sizes must be strictly decreasing")
        return v

    def with_rates(self) -> "ErrorReport":
        """Copy with rates filled on every row but the last."""
        rows = [row.model_copy() for row in self.rows]
        for coarse, fine in zip(rows, rows[1:]):
            for name in ERROR_COLUMNS:
                rate = convergence_rate(getattr(coarse, name), getattr(fine, name), coarse.h, fine.h)
                setattr(coarse, name.replace("_err", "_rate"), rate)
        if rows:
            for name in ERROR_COLUMNS:
                setattr(rows[-1], name.replace("_err", "_rate"), None)
        return self.model_copy(update={"rows": rows})

    def rates(self, name: str) -> List[float]:
        column = name.replace("_err", "_rate")
        return [getattr(row, column) for row in self.rows[:-1]]


class StudyRequest(BaseModel):
    case_id: str = Field("exp1", description="Manufactured case, exp1 or exp2")
    # Unset fields fall back to the environment defaults held by config
    degree: int = Field(default_factory=lambda: config.degree, description="Polynomial degree k, 1..3")
    n_list: List[int] = Field(default_factory=lambda: list(config.n_list), description="Strictly increasing cells per side")
    mu: float = Field(default_factory=lambda: config.mu, description="Lame shear modulus")
    lam: float = Field(default_factory=lambda: config.lam, alias="lambda", description="Lame first parameter")
    gamma: float = Field(default_factory=lambda: config.gamma, description="Grad-div stabilization weight")
    diagonal: str = Field(default_factory=lambda: config.diagonal, description="Mesh split direction")
    quadrature_bump: int = Field(default_factory=lambda: config.quadrature_bump, description="Extra quadrature exactness")

    model_config = {
        "populate_by_name": True,
        "json_schema_extra": {
            "example": {
                "case_id": "exp1",
                "degree": 1,
                "n_list": [4, 6, 8],
                "mu": 0.5,
                "lambda": 1.0,
                "gamma": 1.0,
                "diagonal": "north-east",
            }
        },
    }

    @validator('case_id')
    def validate_case_id(cls, v):
        if v not in ("exp1", "exp2"):
            raise ValueError("case_id must be 'exp1' or 'exp2'")
        return v

    @validator('degree')
    def validate_degree(cls, v):
        if v not in (1, 2, 3):
            raise ValueError("degree must be 1, 2 or 3")
        return v

    @validator('n_list')
    def validate_n_list(cls, v):
        if not v or any(n <= 0 for n in v) or any(a >= b for a, b in zip(v, v[1:])):
            raise ValueError("n_list must be non-empty, positive and strictly increasing")
        return v

    @validator('diagonal')
    def validate_diagonal(cls, v):
        if v not in ("north-east", "north-west"):
            raise ValueError("diagonal must be 'north-east' or 'north-west'")
        return v


class StudyResponse(BaseModel):
    study_id: str = Field(..., description="Identifier of the stored study")
    report: ErrorReport = Field(..., description="Errors and rates per mesh")
    metadata: Dict[str, Any] = Field(default_factory=dict, description="Timing and solver statistics")


class ErrorResponse(BaseModel):
    code: int = Field(..., description="Error code")
    message: str = Field(..., description="Error message")

    model_config = {
        "json_schema_extra": {
            "example": {
                "code": 500,
                "message": "Zero pivot in block p"
            }
        }
    }


class HealthResponse(BaseModel):
    service: str = Field(..., description="Service status")
    solver: str = Field(..., description="Solver agent status")
    uptime_seconds: float = Field(..., description="Service uptime in seconds")

    model_config = {
        "json_schema_extra": {
            "example": {
                "service": "ok",
                "solver": "ok",
                "uptime_seconds": 123.45
            }
        }
    }


class StudyEvent(BaseModel):
    event_id: str = Field(..., description="Unique event ID")
    study_id: str = Field(..., description="Study ID")
    timestamp: str = Field(..., description="Event timestamp in ISO 8601 format")
    case_id: str = Field(..., description="Manufactured case")
    degree: int = Field(..., description="Polynomial degree k")
    n_list: List[int] = Field(..., description="Meshes of the study")
    latency_ms: float = Field(..., description="Wall time of the study in milliseconds")
    partial: bool = Field(False, description="Whether the study stopped early")


class StudyEventList(BaseModel):
    events: List[StudyEvent] = Field(..., description="List of study events")
    has_more: bool = Field(..., description="Whether more events are available")


class DeterminantRequest(BaseModel):
    r1: float = Field(..., ge=0.0, description="r1* of the triangle")
    r2: float = Field(..., ge=0.0, description="r2* of the triangle")


class DeterminantResponse(BaseModel):
    r1: float
    r2: float
    determinant: float = Field(..., description="Numeric determinant of M_T")
    closed_form: float = Field(..., description="Closed-form determinant")
    relative_difference: float = Field(..., description="|numeric - closed| / closed")
