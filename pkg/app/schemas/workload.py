from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.models.version import VersionCompare
from app.schemas.cache import LatencyModel

SCHEMA_VERSION = 1


class Strategy(str, Enum):
    REVISION = "revision"
    NAIVE = "naive"
    NONE = "none"


class SchedulerMode(str, Enum):
    VIRTUAL = "virtual"
    THREADS = "threads"


class LocalTopology(str, Enum):
    """How workers map to local caches."""
    SHARED = "shared"
    PER_WORKER = "per_worker"
    ALIAS = "alias"


class SchemeKind(str, Enum):
    GRAPH = "graph"
    TRIMMED = "trimmed"
    PROJECTED = "projected"


class EvictionTarget(str, Enum):
    GLOBAL = "global"
    LOCAL = "local"
    BOTH = "both"


class EvictionSchedule(BaseModel):
    """Random injected evictions: ``none`` or ``every:<interval_ms>[:<target>]``."""
    interval_ms: Optional[float] = Field(None, gt=0)
    target: EvictionTarget = EvictionTarget.BOTH

    model_config = ConfigDict(frozen=True)

    @property
    def enabled(self) -> bool:
        return self.interval_ms is not None

    @classmethod
    def parse(cls, text: str) -> "EvictionSchedule":
        text = text.strip()
        if text in ("", "none"):
            return cls()
        parts = text.split(":")
        if parts[0] != "every" or len(parts) not in (2, 3):
            raise ValueError(f"bad eviction schedule {text!r}; expected none or every:<ms>[:global|local|both]")
        target = EvictionTarget(parts[2]) if len(parts) == 3 else EvictionTarget.BOTH
        return cls(interval_ms=float(parts[1]), target=target)

    def render(self) -> str:
        if not self.enabled:
            return "none"
        return f"every:{self.interval_ms:g}:{self.target.value}"


class WorkloadSpec(BaseModel):
    """A simulated run: workers issuing random inserts, line deletes and plane selects."""
    workers: int = Field(10, ge=1)
    ops: int = Field(10_000, ge=0)
    grid: int = Field(10, ge=1)
    p_select: float = Field(0.99, ge=0, le=1)
    p_insert: float = Field(0.009, ge=0, le=1)
    p_delete: float = Field(0.001, ge=0, le=1)
    seed: int = 0
    fill: int = Field(500, ge=0)
    strategy: Strategy = Strategy.REVISION
    scheduler: SchedulerMode = SchedulerMode.VIRTUAL
    scheme: SchemeKind = SchemeKind.GRAPH
    # Extra columns the workload never constrains (exercises projection)
    padding_columns: int = Field(0, ge=0)
    local: LocalTopology = LocalTopology.SHARED
    horizon_ms: float = Field(100.0, gt=0)
    evictions: EvictionSchedule = EvictionSchedule()
    skew_ms: float = Field(0.0, ge=0)
    version_compare: VersionCompare = VersionCompare.PARTIAL
    invalidate_on_noop: bool = True
    cache_latency: LatencyModel = LatencyModel(min_ms=0.05, max_ms=0.2)
    db_latency: LatencyModel = LatencyModel(min_ms=0.2, max_ms=1.0)
    # Delay between the table acknowledging a write and the wrapper invalidating
    write_gap: LatencyModel = LatencyModel(min_ms=0.0, max_ms=0.5)
    # Workers issue operations back to back unless told otherwise
    think_time: LatencyModel = LatencyModel()

    model_config = ConfigDict(frozen=True)

    @field_validator("evictions", mode="before")
    @classmethod
    def _parse_evictions(cls, value):
        if isinstance(value, str):
            return EvictionSchedule.parse(value)
        return value

    @field_validator("cache_latency", "db_latency", "write_gap", "think_time", mode="before")
    @classmethod
    def _parse_latency(cls, value):
        if isinstance(value, str):
            return LatencyModel.parse(value)
        return value

    @model_validator(mode="after")
    def _mix(self) -> "WorkloadSpec":
        total = self.p_select + self.p_insert + self.p_delete
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"operation probabilities sum to {total}, expected 1")
        if self.scheduler is SchedulerMode.THREADS and self.skew_ms:
            raise ValueError("clock skew is only modelled under the virtual scheduler")
        return self

    @property
    def k(self) -> int:
        return 3 + self.padding_columns

    @property
    def skew_allowance_ms(self) -> float:
        # Two workers can be at most 2 * skew apart
        return 2.0 * self.skew_ms


class OpKind(str, Enum):
    SELECT = "select"
    INSERT = "insert"
    DELETE = "delete"


class OpEvent(BaseModel):
    """One completed operation of a worker."""
    worker: int
    index: int
    kind: OpKind
    query: List[str]
    invoke_ms: float
    return_ms: float
    served_from: Optional[str] = None
    snapshot_seq: Optional[int] = None
    result_digest: Optional[str] = None
    rows: Optional[int] = None
    changed: Optional[int] = None
    write_seq: Optional[int] = None
    committed_ms: Optional[float] = None
    naive_hit: Optional[bool] = None
    stale: Optional[bool] = None
    stale_age_ms: Optional[float] = None
    stale_lag_ms: Optional[float] = None

    @model_validator(mode="after")
    def _ordered(self) -> "OpEvent":
        if self.return_ms < self.invoke_ms:
            raise ValueError("return time precedes invoke time")
        return self

    @property
    def from_cache(self) -> bool:
        return self.served_from in ("local", "global")


class PairedRun(BaseModel):
    """Metrics of the same op streams replayed under the naive strategy."""
    hits: int
    misses: int
    hit_ratio: float
    stale: int
    revision_dominates: bool


class FreshnessReport(BaseModel):
    """Metrics of one run, in the order they are reported."""
    schema_version: int = SCHEMA_VERSION
    strategy: Strategy
    scheduler: SchedulerMode
    workers: int
    ops_per_worker: int
    grid: int
    seed: int
    p_select: float
    p_insert: float
    p_delete: float
    selects: int = 0
    cache_misses: int = 0
    cache_hits: int = 0
    hit_ratio: float = 0.0
    stale: int = 0
    max_stale_age_ms: float = 0.0
    median_stale_age_ms: float = 0.0
    fresh: int = 0
    fresh_ratio: float = 0.0
    inserts: int = 0
    deletes: int = 0
    naive_hits: int = 0
    naive_misses: int = 0
    naive_hit_ratio: float = 0.0
    epsilon_ms: float = 0.0
    skew_allowance_ms: float = 0.0
    max_stale_lag_ms: float = 0.0
    bound_violations: int = 0
    oracle_mismatches: int = 0
    max_revision_depth: int = 0
    evictions_attempted: int = 0
    evictions_accepted: int = 0
    evictions_refused: int = 0
    ledger_violations: int = 0
    cache_counters: Dict[str, Dict[str, int]] = Field(default_factory=dict)
    paired_naive: Optional[PairedRun] = None
    invariant_failures: List[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def _consistent(self) -> "FreshnessReport":
        if self.cache_hits + self.cache_misses != self.selects:
            raise ValueError("hits + misses must equal selects")
        if self.fresh + self.stale != self.cache_hits:
            raise ValueError("fresh + stale must equal hits")
        return self

    @property
    def ok(self) -> bool:
        return not self.invariant_failures
