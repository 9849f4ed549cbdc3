"""
Dyadic range scheme for integer columns of bit width w.

A range is covered by maximal aligned power-of-two intervals, i.e. subtrees
of the full binary trie over [0, 2^w). A trie node at depth d is rendered as
w pattern positions: its d prefix bits followed by STAR (the subtree counter)
or by PERCENT (the collapsed counter shared by all of its descendants).

A read probes the subtree counter of every cover node and the percent counter
of every proper ancestor of a cover node. A write to a node increments the
subtree counters of the node and all its ancestors, plus its own percent
counter. Two ranges intersect iff their key sets do.
"""

from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

from app.core.exceptions import RangeError
from app.models.query import PERCENT, STAR, Bit, PatternToken

MAX_WIDTH = 32


@dataclass(frozen=True, order=True)
class DyadicClause:
    """A trie node: the interval [prefix * 2^(w-d), (prefix + 1) * 2^(w-d) - 1]."""
    width: int
    prefix: Tuple[int, ...] = ()

    def __post_init__(self):
        if not 1 <= self.width <= MAX_WIDTH:
            raise RangeError(f"bit width {self.width} outside [1, {MAX_WIDTH}]")
        if len(self.prefix) > self.width or any(b not in (0, 1) for b in self.prefix):
            raise RangeError(f"invalid prefix {self.prefix} for width {self.width}")

    @classmethod
    def root(cls, width: int) -> "DyadicClause":
        return cls(width, ())

    @classmethod
    def point(cls, value: int, width: int) -> "DyadicClause":
        check_range(value, value, width)
        return cls(width, tuple((value >> (width - 1 - i)) & 1 for i in range(width)))

    @property
    def depth(self) -> int:
        return len(self.prefix)

    @property
    def is_leaf(self) -> bool:
        return self.depth == self.width

    @property
    def lo(self) -> int:
        value = 0
        for bit in self.prefix:
            value = (value << 1) | bit
        return value << (self.width - self.depth)

    @property
    def hi(self) -> int:
        return self.lo + (1 << (self.width - self.depth)) - 1

    def ancestors(self) -> List["DyadicClause"]:
        """Proper prefixes, root first."""
        return [DyadicClause(self.width, self.prefix[:d]) for d in range(self.depth)]

    def subtree_tokens(self) -> Tuple[PatternToken, ...]:
        return tuple(Bit(b) for b in self.prefix) + (STAR,) * (self.width - self.depth)

    def ancestor_tokens(self) -> Tuple[PatternToken, ...]:
        return tuple(Bit(b) for b in self.prefix) + (PERCENT,) * (self.width - self.depth)

    def label(self) -> str:
        """``(0,1,*)`` style rendering of the subtree."""
        return "(" + ",".join([str(b) for b in self.prefix] + ["*"] * (self.width - self.depth)) + ")"


@dataclass(frozen=True)
class DyadicKeySet:
    """Subtree counters and percent (ancestor) counters of one column."""
    subtree: Tuple[DyadicClause, ...]
    ancestor: Tuple[DyadicClause, ...]

    def __len__(self) -> int:
        return len(self.subtree) + len(self.ancestor)

    def token_groups(self) -> List[Tuple[PatternToken, ...]]:
        """Pattern positions of every counter, subtree counters first."""
        return [c.subtree_tokens() for c in self.subtree] + [c.ancestor_tokens() for c in self.ancestor]

    def intersects(self, other: "DyadicKeySet") -> bool:
        return bool(set(self.subtree) & set(other.subtree)) or bool(set(self.ancestor) & set(other.ancestor))


def check_range(lo: int, hi: int, width: int) -> None:
    if not 1 <= width <= MAX_WIDTH:
        raise RangeError(f"bit width {width} outside [1, {MAX_WIDTH}]")
    if not 0 <= lo <= hi < (1 << width):
        raise RangeError(f"range [{lo}, {hi}] is not within [0, 2^{width})")


def dyadic_cover(lo: int, hi: int, width: int) -> List[DyadicClause]:
    """
    Canonical cover of [lo, hi] by maximal aligned intervals, ascending.

    Args:
        lo: Lower bound (inclusive)
        hi: Upper bound (inclusive)
        width: Column bit width

    Returns:
        List[DyadicClause]: Disjoint trie nodes whose union is exactly [lo, hi]

    Raises:
        RangeError: If the bounds are outside [0, 2^width) or lo > hi
    """
    check_range(lo, hi, width)
    cover = []
    start = lo
    while start <= hi:
        size = width
        while size > 0 and (start % (1 << size) != 0 or start + (1 << size) - 1 > hi):
            size -= 1
        depth = width - size
        node = start >> size
        cover.append(DyadicClause(width, tuple((node >> (depth - 1 - i)) & 1 for i in range(depth))))
        start += 1 << size
    return cover


def _dedup(clauses: Iterable[DyadicClause]) -> Tuple[DyadicClause, ...]:
    return tuple(dict.fromkeys(clauses))


def dyadic_probe_keys(cover: Sequence[DyadicClause]) -> DyadicKeySet:
    """Counters a read over ``cover`` depends on."""
    ancestors = sorted({a for node in cover for a in node.ancestors()}, key=lambda c: (c.depth, c.prefix))
    return DyadicKeySet(_dedup(cover), tuple(ancestors))


def dyadic_incr_keys(clause: DyadicClause) -> DyadicKeySet:
    """Counters a write to ``clause`` increments."""
    subtree = (*clause.ancestors(), clause)
    ancestor = () if clause.is_leaf else (clause,)
    return DyadicKeySet(subtree, ancestor)


def dyadic_incr_keys_all(cover: Sequence[DyadicClause]) -> DyadicKeySet:
    """Union of the increment sets of every clause of a cover."""
    subtree: List[DyadicClause] = []
    ancestor: List[DyadicClause] = []
    for clause in cover:
        keys = dyadic_incr_keys(clause)
        subtree.extend(keys.subtree)
        ancestor.extend(keys.ancestor)
    return DyadicKeySet(_dedup(subtree), _dedup(ancestor))


def probe_bound(width: int) -> int:
    """Largest probe key set over all ranges of the given width."""
    return max(width + 1, 4 * width - 3)


def incr_bound(width: int) -> int:
    """Largest increment key set of a single clause."""
    return width + 1


@dataclass
class DyadicVerification:
    width: int
    ranges: int = 0
    range_node_pairs: int = 0
    counterexamples: int = 0
    cover_errors: int = 0
    max_probe_keys: int = 0
    max_incr_keys: int = 0
    max_cover_size: int = 0
    first_counterexample: Optional[Tuple[Tuple[int, int], str]] = None

    @property
    def ok(self) -> bool:
        return (
            self.counterexamples == 0
            and self.cover_errors == 0
            and self.max_probe_keys <= probe_bound(self.width)
            and self.max_incr_keys <= incr_bound(self.width)
        )


def _node_id(clause: DyadicClause) -> int:
    value = 0
    for bit in clause.prefix:
        value = (value << 1) | bit
    return (1 << clause.depth) | value


def verify_dyadic(width: int) -> DyadicVerification:
    """
    Exhaustively check that key sets intersect exactly when ranges do.

    Every read range is tested against every trie node as a write clause.
    Since each write range is covered exactly by its clauses, this decides
    every (read range, write range) pair. Key sets are bitmasks over node ids.
    """
    nodes = [
        DyadicClause(width, tuple((v >> (d - 1 - i)) & 1 for i in range(d)))
        for d in range(width + 1)
        for v in range(1 << d)
    ]
    offset = 1 << (width + 1)
    incr_masks = []
    result = DyadicVerification(width)
    for node in nodes:
        keys = dyadic_incr_keys(node)
        mask = 0
        for c in keys.subtree:
            mask |= 1 << _node_id(c)
        for c in keys.ancestor:
            mask |= 1 << (_node_id(c) + offset)
        incr_masks.append((node, mask))
        result.max_incr_keys = max(result.max_incr_keys, len(keys))

    size = 1 << width
    for lo in range(size):
        for hi in range(lo, size):
            cover = dyadic_cover(lo, hi, width)
            result.ranges += 1
            result.max_cover_size = max(result.max_cover_size, len(cover))
            start = lo
            for clause in cover:
                if clause.lo != start:
                    result.cover_errors += 1
                start = clause.hi + 1
            if start != hi + 1:
                result.cover_errors += 1

            probe = dyadic_probe_keys(cover)
            result.max_probe_keys = max(result.max_probe_keys, len(probe))
            mask = 0
            for c in probe.subtree:
                mask |= 1 << _node_id(c)
            for c in probe.ancestor:
                mask |= 1 << (_node_id(c) + offset)

            for node, incr in incr_masks:
                result.range_node_pairs += 1
                shared = (incr & mask) != 0
                overlap = node.lo <= hi and lo <= node.hi
                if shared != overlap:
                    result.counterexamples += 1
                    if result.first_counterexample is None:
                        result.first_counterexample = ((lo, hi), node.label())
    return result
