from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing import Optional
import random


class LatencyModel(BaseModel):
    """Uniform per-operation delay in milliseconds (simulation only)."""
    min_ms: float = Field(0.0, ge=0)
    max_ms: float = Field(0.0, ge=0)

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _ordered(self) -> "LatencyModel":
        if self.max_ms < self.min_ms:
            raise ValueError("max_ms must be >= min_ms")
        return self

    @property
    def is_zero(self) -> bool:
        return self.max_ms == 0.0

    def sample(self, rng: random.Random) -> float:
        if self.max_ms == self.min_ms:
            return self.min_ms
        return rng.uniform(self.min_ms, self.max_ms)

    @classmethod
    def parse(cls, text: str) -> "LatencyModel":
        """Parse "0.2" (fixed) or "0.1-0.5" (uniform range)."""
        low, sep, high = text.partition("-")
        if not sep:
            return cls(min_ms=float(low), max_ms=float(low))
        return cls(min_ms=float(low), max_ms=float(high))


class CacheConfig(BaseModel):
    """Configuration of the in-memory cache backend."""
    # Keys younger than the horizon are never evicted
    horizon_ms: float = Field(3_600_000.0, gt=0)
    capacity: Optional[int] = Field(None, ge=1)
    latency: LatencyModel = LatencyModel()
    # Record every successful write for realRevision checks
    ledger: bool = False

    model_config = ConfigDict(frozen=True)
