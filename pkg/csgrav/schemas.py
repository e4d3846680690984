from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from csgrav.config import DEFAULT_SIGNATURE, DEFAULT_TOLERANCES, SOLVER_TOL

# Chart dimension each command runs on
COMMAND_DIMENSIONS = {"verify": 3, "correspond": 3, "chern": 4, "extremize": 3}


# Base response schema
class BaseResponse(BaseModel):
    ok: bool
    error: Optional[str] = None
    detail: Optional[str] = None


# Run specification
class ChartSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dim: int = Field(default=3, ge=1, le=4)
    periods: Optional[List[float]] = Field(None, description="Torus periods; defaults to 1 per axis")

    @field_validator("periods")
    @classmethod
    def periods_positive(cls, value):
        if value is not None and any(p <= 0 for p in value):
            raise ValueError("periods must be strictly positive")
        return value

    @model_validator(mode="after")
    def periods_match_dim(self):
        if self.periods is None:
            self.periods = [1.0] * self.dim
        elif len(self.periods) != self.dim:
            raise ValueError(f"chart of dim {self.dim} needs {self.dim} periods")
        return self


class FieldSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: Literal["flat", "trig-random", "perturbed-flat"] = "trig-random"
    max_frequency: int = Field(default=2, ge=0, le=8)
    amplitude: float = Field(default=0.3, ge=0)
    coframe_amplitude: float = Field(default=0.1, ge=0)
    magnitude: float = Field(default=1e-2, ge=0)
    sections: int = Field(default=20, ge=1, description="Random sections drawn by 'correspond'")
    samples: int = Field(default=100, ge=1, description="Sample points per pointwise check")
    p_contamination: float = Field(default=0.0, ge=0, description="Transvection part mixed into omega")


class SolverSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    max_iters: int = Field(default=500, ge=0)
    step0: float = Field(default=1e-2, gt=0)
    tol: float = Field(default=SOLVER_TOL, ge=0)
    stationarity_dirs: int = Field(default=10, ge=0)


class RunSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    command: Literal["verify", "correspond", "chern", "extremize"]
    seed: int = Field(default=42, ge=0)
    signature: List[int] = Field(default_factory=lambda: list(DEFAULT_SIGNATURE))
    chart: ChartSpec = Field(default_factory=ChartSpec)
    field_spec: FieldSpec = Field(default_factory=FieldSpec)
    grid: Optional[List[int]] = Field(None, description="Per-axis counts; defaults to 4*max_frequency+1")
    tolerances: Dict[str, float] = Field(default_factory=dict)
    solver: Optional[SolverSpec] = None

    @field_validator("signature")
    @classmethod
    def signature_entries(cls, value):
        if len(value) != 3:
            raise ValueError("signature must have exactly 3 entries")
        if any(v not in (-1, 1) for v in value):
            raise ValueError("signature entries must be +1 or -1")
        return value

    @field_validator("grid")
    @classmethod
    def grid_counts(cls, value):
        if value is not None and any(c < 2 for c in value):
            raise ValueError("grid counts must be >= 2")
        return value

    @field_validator("tolerances")
    @classmethod
    def known_tolerances(cls, value):
        unknown = sorted(set(value) - set(DEFAULT_TOLERANCES))
        if unknown:
            raise ValueError(f"unknown tolerance names: {', '.join(unknown)}")
        negative = sorted(name for name, tol in value.items() if tol < 0)
        if negative:
            raise ValueError(f"tolerances must be >= 0: {', '.join(negative)}")
        return value

    @model_validator(mode="after")
    def command_requirements(self):
        expected = COMMAND_DIMENSIONS[self.command]
        if self.chart.dim != expected:
            raise ValueError(f"'{self.command}' runs on a {expected}-chart, got dim {self.chart.dim}")
        if self.grid is not None and len(self.grid) != self.chart.dim:
            raise ValueError(f"grid needs {self.chart.dim} counts, got {len(self.grid)}")
        if self.command == "extremize":
            if self.solver is None:
                raise ValueError("'extremize' needs a solver block")
            if self.grid is not None and any(c < 3 for c in self.grid):
                raise ValueError("lattice runs need at least 3 sites per axis")
        return self

    def tolerance(self, name: str) -> float:
        return self.tolerances.get(name, DEFAULT_TOLERANCES[name])

    def grid_counts_or_default(self) -> List[int]:
        if self.grid is not None:
            return list(self.grid)
        return [4 * max(self.field_spec.max_frequency, 1) + 1] * self.chart.dim


# Report schemas
class CheckRecord(BaseModel):
    name: str
    anchor: str = Field(..., description="Identity or property the check realizes")
    status: Literal["PASS", "FAIL"]
    measured: float
    tolerance: float
    comparison: Literal["le", "ge"] = "le"
    detail: Optional[str] = None


class Environment(BaseModel):
    version: str
    build_hash: str
    numpy: str


class Report(BaseResponse):
    command: str
    spec: RunSpec
    checks: List[CheckRecord] = Field(default_factory=list)
    results: Dict[str, Any] = Field(default_factory=dict)
    environment: Environment
    wall_time: Optional[float] = None


class ErrorResponse(BaseResponse):
    ok: bool = False
