import enum
from typing import Iterable, Tuple


class VersionCompare(str, enum.Enum):
    """How a cached version is checked against the current one."""
    PARTIAL = "partial"
    EXACT = "exact"


class Version:
    """
    Revisions of the probed counters, in probe order.

    Compared numerically; the dotted form is only a serialization.
    """

    __slots__ = ("revisions",)

    def __init__(self, revisions: Iterable[int]):
        self.revisions: Tuple[int, ...] = tuple(int(r) for r in revisions)

    def __len__(self) -> int:
        return len(self.revisions)

    def __eq__(self, other) -> bool:
        return isinstance(other, Version) and self.revisions == other.revisions

    def __hash__(self) -> int:
        return hash(self.revisions)

    def __repr__(self) -> str:
        return f"Version({self.render()})"

    def dominates(self, other: "Version") -> bool:
        """``self`` ⪰ ``other``: same length and no revision smaller."""
        return len(self) == len(other) and all(a >= b for a, b in zip(self.revisions, other.revisions))

    def satisfies(self, current: "Version", mode: VersionCompare = VersionCompare.PARTIAL) -> bool:
        """Whether an entry tagged with ``self`` may be served for ``current``."""
        if mode is VersionCompare.EXACT:
            return self == current
        return self.dominates(current)

    def render(self) -> str:
        return ".".join(str(r) for r in self.revisions)

    @classmethod
    def parse(cls, text: str) -> "Version":
        if not text:
            return cls(())
        parts = text.split(".")
        if not all(p.isdigit() for p in parts):
            raise ValueError(f"malformed version {text!r}")
        return cls(int(p) for p in parts)
