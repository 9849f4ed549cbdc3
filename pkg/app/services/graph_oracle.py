"""
Brute-force checks of the dependency graphs over a small value domain.

Used by ``revcache verify-graph`` and by the test suite.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Set, Tuple

from app.models.query import (
    Pattern,
    Query,
    contains_record,
    edge_e_double_prime,
    edge_e_prime,
    enumerate_patterns,
    enumerate_queries,
    enumerate_records,
    format_tuple,
    intersects,
    witness,
)
from app.services.variants import read_variants, write_variants

logger = logging.getLogger(__name__)


@dataclass
class GraphVerification:
    k: int
    domain: int
    queries: int = 0
    patterns: int = 0
    closure_pairs: int = 0
    closure_counterexamples: int = 0
    intersection_counterexamples: int = 0
    witness_counterexamples: int = 0
    neighborhood_counterexamples: int = 0
    examples: List[str] = field(default_factory=list)

    @property
    def counterexamples(self) -> int:
        return (
            self.closure_counterexamples
            + self.intersection_counterexamples
            + self.witness_counterexamples
            + self.neighborhood_counterexamples
        )

    @property
    def ok(self) -> bool:
        return self.counterexamples == 0

    def _note(self, message: str) -> None:
        if len(self.examples) < 10:
            self.examples.append(message)


def verify_graph(k: int, domain: int) -> GraphVerification:
    """
    Check, for every pair of queries over ``domain`` values:

    * closure: subspaces intersect iff some pattern links them through E' then E''
    * intersection: ``intersects`` agrees with a scan over all records
    * witness: a witness exists iff the subspaces intersect, and lies in both

    and, for every query, that the variant lists are exactly its E'/E'' neighborhoods.
    """
    values = [str(v) for v in range(domain)]
    minimal = ["0"] * k
    queries: List[Query] = list(enumerate_queries(k, values))
    patterns: List[Pattern] = list(enumerate_patterns(k, values))
    records = list(enumerate_records(k, values))
    result = GraphVerification(k, domain, queries=len(queries), patterns=len(patterns))

    out_edges: Dict[Query, Set[Pattern]] = {}
    in_edges: Dict[Query, Set[Pattern]] = {}
    for q in queries:
        out_edges[q] = {p for p in patterns if edge_e_prime(q, p)}
        in_edges[q] = {p for p in patterns if edge_e_double_prime(p, q)}
        if set(write_variants(q)) != out_edges[q]:
            result.neighborhood_counterexamples += 1
            result._note(f"write variants of {format_tuple(q)} differ from E' neighborhood")
        if set(read_variants(q)) != in_edges[q]:
            result.neighborhood_counterexamples += 1
            result._note(f"read variants of {format_tuple(q)} differ from E'' neighborhood")

    members: Dict[Query, Set[Tuple[str, ...]]] = {
        q: {r for r in records if contains_record(q, r)} for q in queries
    }
    for q in queries:
        for q2 in queries:
            result.closure_pairs += 1
            overlap = intersects(q, q2)
            linked = bool(out_edges[q] & in_edges[q2])
            if overlap != linked:
                result.closure_counterexamples += 1
                result._note(f"closure differs for write {format_tuple(q)}, read {format_tuple(q2)}")
            scanned = bool(members[q] & members[q2]) if domain else overlap
            if overlap != scanned:
                result.intersection_counterexamples += 1
                result._note(f"intersects {format_tuple(q)} {format_tuple(q2)} disagrees with scan")
            w = witness(q, q2, minimal)
            if (w is None) == overlap or (w is not None and not (contains_record(q, w) and contains_record(q2, w))):
                result.witness_counterexamples += 1
                result._note(f"bad witness {w} for {format_tuple(q)} {format_tuple(q2)}")

    logger.info(
        "verified k=%d domain=%d: %d queries, %d patterns, %d counterexamples",
        k, domain, len(queries), len(patterns), result.counterexamples,
    )
    return result
