"""
Key schemes: which revision counters a select probes and a write increments.

Every scheme must keep the intersection property: the probe list of a read
and the increment list of a write share a pattern iff their subspaces
intersect (trimmed and projected schemes may over-approximate).
"""

import logging
from abc import ABC, abstractmethod
from typing import List, Mapping, Optional, Sequence, Tuple

from app.core.exceptions import RangeError
from app.models.query import STAR, Pattern, PatternToken, Query, check_length, check_query
from app.schemas.table import TableSchema
from app.services.dyadic import (
    DyadicClause,
    dyadic_cover,
    dyadic_incr_keys_all,
    dyadic_probe_keys,
)
from app.services.planner import RANGE, Projection, TrimmedPlan, instantiate, project, project_ranges
from app.services.variants import READ_RULES, WRITE_RULES, SubstitutionRules, expand_groups

logger = logging.getLogger(__name__)

RangeMap = Mapping[int, Tuple[int, int]]
TokenGroups = List[Tuple[PatternToken, ...]]


class KeyScheme(ABC):
    """Maps queries to ordered probe and increment pattern lists."""

    def __init__(self, schema: TableSchema):
        self.schema = schema

    @abstractmethod
    def probe_patterns(self, q: Query, ranges: Optional[RangeMap] = None) -> List[Pattern]:
        ...

    @abstractmethod
    def increment_patterns(self, q: Query, ranges: Optional[RangeMap] = None) -> List[Pattern]:
        ...

    def probe_patterns_any(self, clauses: Sequence[Query]) -> List[Pattern]:
        """Deduplicated concatenation of per-clause probe lists."""
        return list(dict.fromkeys(p for q in clauses for p in self.probe_patterns(q)))

    def _check(self, q: Query, ranges: Optional[RangeMap]) -> None:
        check_length(q, self.schema.k)
        check_query(q)
        widths = self.schema.range_widths
        for col in ranges or {}:
            if col not in widths:
                raise RangeError(f"column {col} is not a range column")
            if q[col] is not STAR:
                raise RangeError(f"column {col} has both a value and a range")

    def _range_cover(self, col: int, token, ranges: Optional[RangeMap]) -> List[DyadicClause]:
        width = self.schema.range_widths[col]
        if ranges and col in ranges:
            lo, hi = ranges[col]
            return dyadic_cover(lo, hi, width)
        if token is STAR:
            return [DyadicClause.root(width)]
        try:
            value = int(token)
        except ValueError:
            raise RangeError(f"value {token!r} of range column {col} is not an integer") from None
        return [DyadicClause.point(value, width)]

    def _range_groups(self, col: int, token, ranges: Optional[RangeMap], read: bool) -> TokenGroups:
        cover = self._range_cover(col, token, ranges)
        keys = dyadic_probe_keys(cover) if read else dyadic_incr_keys_all(cover)
        return keys.token_groups()


class GraphScheme(KeyScheme):
    """Full read/write neighborhoods; dyadic columns use their bit counters."""

    def _choices(self, q: Query, ranges: Optional[RangeMap], rules: SubstitutionRules) -> List[TokenGroups]:
        self._check(q, ranges)
        widths = self.schema.range_widths
        choices = []
        for i, token in enumerate(q):
            if i in widths:
                choices.append(self._range_groups(i, token, ranges, read=rules is READ_RULES))
            else:
                choices.append([(t,) for t in rules.choices(token)])
        return choices

    def probe_patterns(self, q: Query, ranges: Optional[RangeMap] = None) -> List[Pattern]:
        return expand_groups(self._choices(q, ranges, READ_RULES))

    def increment_patterns(self, q: Query, ranges: Optional[RangeMap] = None) -> List[Pattern]:
        return expand_groups(self._choices(q, ranges, WRITE_RULES))


class TrimmedScheme(KeyScheme):
    """Counters restricted to a whitelist plan; unlisted query shapes are rejected."""

    def __init__(self, plan: TrimmedPlan):
        super().__init__(plan.schema)
        self.plan = plan

    def _expand(self, abstract: List[Pattern], q: Query, ranges: Optional[RangeMap], read: bool) -> List[Pattern]:
        out: List[Pattern] = []
        for pattern in abstract:
            concrete = instantiate(pattern, q)
            choices = [
                self._range_groups(i, q[i], ranges, read) if t is RANGE else [(t,)]
                for i, t in enumerate(concrete)
            ]
            out.extend(expand_groups(choices))
        return out

    def probe_patterns(self, q: Query, ranges: Optional[RangeMap] = None) -> List[Pattern]:
        self._check(q, ranges)
        return self._expand(self.plan.match_read(q, ranges).patterns, q, ranges, read=True)

    def increment_patterns(self, q: Query, ranges: Optional[RangeMap] = None) -> List[Pattern]:
        self._check(q, ranges)
        return self._expand(self.plan.match_write(q, ranges).patterns, q, ranges, read=False)


class ProjectedScheme(KeyScheme):
    """
    Counters over the relevant columns only.

    Reads must not constrain other columns. Writes that do are widened to the
    projected columns, which can only invalidate more.
    """

    def __init__(self, schema: TableSchema, projection: Projection, inner: Optional[KeyScheme] = None):
        super().__init__(schema)
        self.projection = projection
        self.inner = inner or GraphScheme(projection.schema(schema))

    def probe_patterns(self, q: Query, ranges: Optional[RangeMap] = None) -> List[Pattern]:
        self._check(q, ranges)
        return self.inner.probe_patterns(project(q, self.projection), project_ranges(ranges, self.projection))

    def increment_patterns(self, q: Query, ranges: Optional[RangeMap] = None) -> List[Pattern]:
        self._check(q, ranges)
        return self.inner.increment_patterns(
            project(q, self.projection, relax=True),
            project_ranges(ranges, self.projection, relax=True),
        )
