from typing import Literal, Optional

from pydantic import BaseModel, Field, computed_field, field_validator, model_validator

from fellcheck.config import DEFAULT_ATOL, DEFAULT_RTOL

# Matrix wire format: rows in order, each entry an [re, im] pair
MatrixJSON = list[list[list[float]]]


class ToleranceConfig(BaseModel):
    atol: float = Field(DEFAULT_ATOL, ge=0)
    rtol: float = Field(DEFAULT_RTOL, ge=0)

    @model_validator(mode="after")
    def not_both_zero(self):
        if self.atol == 0 and self.rtol == 0:
            raise ValueError("atol and rtol cannot both be zero")
        return self

    def bound(self, *norms: float) -> float:
        """Effective tolerance atol + rtol·Π norms."""
        scale = 1.0
        for n in norms:
            scale *= n
        return self.atol + self.rtol * scale


class FixtureSpec(BaseModel):
    kind: Literal["tree", "ck", "parity", "delta", "random"]
    m: int = Field(2, ge=1)
    L: int = Field(2, ge=1)
    A: Optional[list[list[int]]] = None
    seed: Optional[int] = None
    dim: Optional[int] = Field(None, ge=1)

    @model_validator(mode="after")
    def check_kind_fields(self):
        if self.kind == "ck":
            if self.A is None:
                raise ValueError("ck fixture requires an adjacency matrix A")
            if len(self.A) != self.m or any(len(row) != self.m for row in self.A):
                raise ValueError(f"A must be {self.m}x{self.m}")
            if any(v not in (0, 1) for row in self.A for v in row):
                raise ValueError("A entries must be 0 or 1")
        if self.kind == "random":
            if self.seed is None or self.dim is None:
                raise ValueError("random fixture requires seed and dim")
        return self


class RepEnvelope(BaseModel):
    dim: int = Field(..., ge=1)
    generators: list[str] = Field(..., min_length=1)
    matrices: dict[str, MatrixJSON] = Field(default_factory=dict)
    tolerance: Optional[ToleranceConfig] = None
    mode: Literal["generators", "full-table"] = "generators"
    table: Optional[dict[str, MatrixJSON]] = None
    depth: Optional[int] = Field(None, ge=1)
    fixture: Optional[FixtureSpec] = None

    @field_validator("generators")
    @classmethod
    def labels_unique(cls, v):
        if len(set(v)) != len(v):
            raise ValueError("generator labels must be unique")
        return v

    @model_validator(mode="after")
    def check_shapes(self):
        if self.mode == "generators":
            if set(self.matrices) != set(self.generators):
                raise ValueError("matrices must have exactly one entry per generator")
        else:
            if not self.table:
                raise ValueError("full-table mode requires a non-empty table")
            unknown = set(self.matrices) - set(self.generators)
            if unknown:
                raise ValueError(f"matrices for unknown generators: {sorted(unknown)}")
        blocks = list(self.matrices.items()) + list((self.table or {}).items())
        for key, matrix in blocks:
            if len(matrix) != self.dim or any(len(row) != self.dim for row in matrix):
                raise ValueError(f"matrix {key!r} is not {self.dim}x{self.dim}")
            if any(len(entry) != 2 for row in matrix for entry in row):
                raise ValueError(f"matrix {key!r} entries must be [re, im] pairs")
        return self


class CheckResult(BaseModel):
    name: str
    residual: float
    tolerance: float
    witness: Optional[str] = None
    detail: Optional[str] = None

    @computed_field
    @property
    def passed(self) -> bool:
        return self.residual <= self.tolerance

    @model_validator(mode="after")
    def failure_needs_witness(self):
        if not self.residual <= self.tolerance and not self.witness:
            raise ValueError(f"failed check {self.name!r} carries no witness")
        return self


class Provenance(BaseModel):
    input_sha256: Optional[str] = None
    tool_version: str


class CheckReport(BaseModel):
    checks: list[CheckResult] = Field(default_factory=list)
    provenance: Optional[Provenance] = None
    notes: list[str] = Field(default_factory=list)

    @computed_field
    @property
    def summary(self) -> dict[str, int]:
        passed = sum(1 for c in self.checks if c.passed)
        return {"passed": passed, "failed": len(self.checks) - passed}

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, result: CheckResult) -> CheckResult:
        self.checks.append(result)
        return result

    def extend(self, other: "CheckReport"):
        self.checks.extend(other.checks)
        self.notes.extend(other.notes)

    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def get(self, name: str) -> Optional[CheckResult]:
        return next((c for c in self.checks if c.name == name), None)


class ValidationReport(CheckReport):
    max_product_length: int
    distinct_products: int = 0

    @property
    def accepted(self) -> bool:
        return self.passed


class FiberReport(BaseModel):
    word: str
    rank: int = Field(..., ge=0)
    stabilized: bool
    residual_max: float


class ConvergenceRow(BaseModel):
    n: int = Field(..., ge=1)
    error: float


class ConvergenceTable(BaseModel):
    word: str
    rows: list[ConvergenceRow] = Field(default_factory=list)

    def errors(self) -> list[float]:
        return [row.error for row in self.rows]

    def error_at(self, n: int) -> float:
        for row in self.rows:
            if row.n == n:
                return row.error
        raise KeyError(n)

    def to_csv(self) -> str:
        lines = ["n,error"] + [f"{row.n},{row.error:.17g}" for row in self.rows]
        return "\n".join(lines) + "\n"

    def is_strictly_decreasing(self) -> bool:
        errs = self.errors()
        return all(b < a for a, b in zip(errs, errs[1:]))

    def halves(self, start: Optional[int] = None) -> bool:
        """Last error is at most half the error at `start` (default: first row)."""
        if not self.rows:
            return False
        first = self.rows[0].error if start is None else self.error_at(start)
        return self.rows[-1].error <= 0.5 * first
