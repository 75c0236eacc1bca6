"""
Configuration module for the axisymmetric elasticity solver.
Handles environment-driven defaults with validation.
"""

import os
import logging
from typing import Dict, Any, List, Optional, Union
from pydantic import BaseModel, Field, validator
from dotenv import load_dotenv

from src.fem.spaces import SUPPORTED_DEGREES

load_dotenv()

DIAGONALS = ("north-east", "north-west")
OUTPUT_FORMATS = ("csv", "markdown")
LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]


def parse_n_list(value: Union[str, List[int]]) -> List[int]:
    """Accept '4,6,8' or a list of integers."""
    if isinstance(value, str):
        parts = [part.strip() for part in value.split(",") if part.strip()]
        return [int(part) for part in parts]
    return [int(n) for n in value]


def check_n_list(v: List[int]) -> List[int]:
    if not v:
        raise ValueError("n_list must not be empty")
    if any(n <= 0 for n in v):
        raise ValueError("n_list entries must be positive integers")
    if any(a >= b for a, b in zip(v, v[1:])):
        raise ValueError("n_list must be strictly increasing")
    return v


def check_degree(v: int) -> int:
    if v not in SUPPORTED_DEGREES:
        raise ValueError(f"degree must be one of {SUPPORTED_DEGREES}")
    return v


def check_diagonal(v: str) -> str:
    if v not in DIAGONALS:
        raise ValueError(f"diagonal must be one of {DIAGONALS}")
    return v


class Config(BaseModel):
    """Configuration settings loaded from environment variables."""

    # Material and stabilization, the convergence experiments use mu = 1/2, lambda = 1, gamma = 1
    mu: float = 0.5
    lam: float = 1.0
    gamma: float = 1.0

    # Study defaults
    degree: int = 1
    n_list: List[int] = [4, 6, 8, 10, 12]
    diagonal: str = "north-east"
    quadrature_bump: int = 0

    log_level: str = "INFO"

    @validator('mu')
    def validate_mu(cls, v):
        if v <= 0.0:
            raise ValueError("MU must be positive")
        return v

    @validator('lam', 'gamma')
    def validate_non_negative(cls, v):
        if v < 0.0:
            raise ValueError("LAMBDA and GAMMA must be non-negative")
        return v

    @validator('degree')
    def validate_degree(cls, v):
        return check_degree(v)

    @validator('n_list', pre=True)
    def validate_n_list(cls, v):
        return check_n_list(parse_n_list(v))

    @validator('diagonal')
    def validate_diagonal(cls, v):
        return check_diagonal(v)

    @validator('quadrature_bump')
    def validate_bump(cls, v):
        if v < 0:
            raise ValueError("QUAD_BUMP must be non-negative")
        return v

    @validator('log_level')
    def validate_log_level(cls, v):
        if v.upper() not in LOG_LEVELS:
            raise ValueError(f"LOG_LEVEL must be one of {LOG_LEVELS}")
        return v.upper()

    def material_defaults(self) -> Dict[str, Any]:
        return {"mu": self.mu, "lambda": self.lam, "gamma": self.gamma}

    def study_defaults(self) -> Dict[str, Any]:
        return {
            "degree": self.degree,
            "n_list": list(self.n_list),
            "diagonal": self.diagonal,
            "quadrature_bump": self.quadrature_bump,
        }


class RunConfig(BaseModel):
    """One command-line run: experiment, discretization, material and output."""

    experiment: int = Field(1, description="Manufactured experiment, 1 or 2")
    degree: int = Field(1, description="Polynomial degree k of BDM_k")
    n_list: List[int] = Field(default_factory=lambda: [4, 6, 8, 10, 12], description="Cells per side, h = 1/n")
    mu: float = Field(0.5, description="Lame shear modulus")
    lam: float = Field(1.0, alias="lambda", description="Lame first parameter")
    gamma: float = Field(1.0, description="Grad-div stabilization weight")
    diagonal: str = Field("north-east", description="Split direction of each square")
    quadrature_bump: int = Field(0, description="Extra quadrature exactness")
    output_format: str = Field("csv", description="csv or markdown")
    output_path: Optional[str] = Field(None, description="Write the table here instead of stdout")

    model_config = {
        "populate_by_name": True,
        "json_schema_extra": {
            "example": {
                "experiment": 1,
                "degree": 2,
                "n_list": [4, 6, 8],
                "mu": 0.5,
                "lambda": 1.0,
                "gamma": 1.0,
                "diagonal": "north-east",
                "quadrature_bump": 0,
                "output_format": "markdown",
            }
        },
    }

    @validator('experiment')
    def validate_experiment(cls, v):
        if v not in (1, 2):
            raise ValueError("experiment must be 1 or 2")
        return v

    @validator('degree')
    def validate_degree(cls, v):
        return check_degree(v)

    @validator('n_list', pre=True)
    def validate_n_list(cls, v):
        return check_n_list(parse_n_list(v))

    @validator('mu')
    def validate_mu(cls, v):
        if v <= 0.0:
            raise ValueError("mu must be positive")
        return v

    @validator('lam', 'gamma')
    def validate_non_negative(cls, v):
        if v < 0.0:
            raise ValueError("lambda and gamma must be non-negative")
        return v

    @validator('diagonal')
    def validate_diagonal(cls, v):
        return check_diagonal(v)

    @validator('quadrature_bump')
    def validate_bump(cls, v):
        if v < 0:
            raise ValueError("quadrature_bump must be non-negative")
        return v

    @validator('output_format')
    def validate_output_format(cls, v):
        if v not in OUTPUT_FORMATS:
            raise ValueError(f"output_format must be one of {OUTPUT_FORMATS}")
        return v

    @property
    def case_id(self) -> str:
        return f"exp{self.experiment}"


config = Config(
    mu=float(os.getenv("MU", "0.5")),
    lam=float(os.getenv("LAMBDA", "1.0")),
    gamma=float(os.getenv("GAMMA", "1.0")),
    degree=int(os.getenv("DEGREE", "1")),
    n_list=os.getenv("N_LIST", "4,6,8,10,12"),
    diagonal=os.getenv("DIAGONAL", "north-east"),
    quadrature_bump=int(os.getenv("QUAD_BUMP", "0")),
    log_level=os.getenv("LOG_LEVEL", "INFO")
)

logging.basicConfig(
    level=getattr(logging, config.log_level),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    datefmt='%Y-%m-%d %H:%M:%S'
)
