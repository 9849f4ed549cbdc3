from pydantic import BaseModel, Field, model_validator
from typing import Dict, List, Optional


class RangeBody(BaseModel):
    """Inclusive integer bounds for a range column."""
    lo: int = Field(..., ge=0)
    hi: int = Field(..., ge=0)

    @model_validator(mode="after")
    def _ordered(self) -> "RangeBody":
        if self.lo > self.hi:
            raise ValueError("lo must be <= hi")
        return self


class SelectRequest(BaseModel):
    """A subspace: columns absent from ``where`` and ``ranges`` are unconstrained."""
    where: Dict[str, str] = Field(default_factory=dict, description="Column name to exact value")
    ranges: Dict[str, RangeBody] = Field(default_factory=dict, description="Column name to integer range")
    extra: str = Field("", max_length=1024, description="Opaque query text distinguishing equal subspaces")


class DeleteRequest(BaseModel):
    where: Dict[str, str] = Field(default_factory=dict)
    ranges: Dict[str, RangeBody] = Field(default_factory=dict)


class InsertRequest(BaseModel):
    """A complete record; every column must be given."""
    record: Dict[str, str]


class SelectResponse(BaseModel):
    rows: List[List[str]]
    row_count: int
    served_from: str
    version: Optional[str] = None


class WriteResponse(BaseModel):
    changed: int
    invalidated: bool
    increments: int = 0
