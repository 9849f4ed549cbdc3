from datetime import datetime, timezone
from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from app.models.query import Record
from app.models.version import Version, VersionCompare

# Revisions are seeded from milliseconds since the epoch, so they must fit
# in a signed 64 bit integer for every time before this one.
HEADROOM_HORIZON = datetime(2200, 1, 1, tzinfo=timezone.utc)
INT63 = 1 << 63


class WrapperConfig(BaseModel):
    """Tunables of the caching wrapper."""
    max_queries_per_time_step: int = Field(1000, gt=0)
    revision_max_depth: int = Field(4, ge=1)
    increment_attempts: int = Field(3, ge=1)
    version_compare: VersionCompare = VersionCompare.PARTIAL
    invalidate_on_noop: bool = True
    # Store the table's write sequence number with cached results (harness only)
    record_snapshot: bool = False

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _headroom(self) -> "WrapperConfig":
        horizon_ms = int(HEADROOM_HORIZON.timestamp() * 1000)
        if horizon_ms * self.max_queries_per_time_step >= INT63:
            raise ValueError(
                f"max_queries_per_time_step={self.max_queries_per_time_step} overflows 64 bit revisions before 2200"
            )
        return self


class ServedFrom(str, Enum):
    LOCAL = "local"
    GLOBAL = "global"
    DATABASE = "database"


class CachedEntry(BaseModel):
    """A cached select result tagged with the version it was computed for."""
    version: str
    row_count: int = Field(..., ge=0)
    rows: List[List[str]]
    snapshot_seq: Optional[int] = None

    model_config = ConfigDict(frozen=True)

    @field_validator("version")
    @classmethod
    def _version_format(cls, value: str) -> str:
        Version.parse(value)
        return value

    @model_validator(mode="after")
    def _framing(self) -> "CachedEntry":
        if self.row_count != len(self.rows):
            raise ValueError(f"row_count {self.row_count} does not match {len(self.rows)} rows")
        return self

    @classmethod
    def build(cls, version: Version, rows, snapshot_seq: Optional[int] = None) -> "CachedEntry":
        ordered = sorted(list(r) for r in rows)
        return cls(version=version.render(), row_count=len(ordered), rows=ordered, snapshot_seq=snapshot_seq)

    @property
    def parsed_version(self) -> Version:
        return Version.parse(self.version)

    def records(self) -> frozenset:
        return frozenset(tuple(r) for r in self.rows)

    def encode(self) -> bytes:
        return self.model_dump_json(exclude_none=True).encode("utf-8")

    @classmethod
    def decode(cls, raw: Optional[bytes]) -> Optional["CachedEntry"]:
        """Parse a cached value; a torn or foreign value reads as a miss."""
        if raw is None:
            return None
        try:
            return cls.model_validate_json(raw)
        except (ValidationError, ValueError):
            return None


class SelectOutcome(BaseModel):
    rows: frozenset
    served_from: ServedFrom
    version: Optional[str] = None
    snapshot_seq: Optional[int] = None

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    def sorted_rows(self) -> List[Record]:
        return sorted(self.rows)


class WriteOutcome(BaseModel):
    """Result of insert/delete through the wrapper."""
    changed: int
    seq: int
    committed_ms: float
    invalidated: bool
    increments: int = 0

    model_config = ConfigDict(frozen=True)
