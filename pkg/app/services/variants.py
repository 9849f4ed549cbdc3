"""
Cache-key neighborhoods of a query.

Read variants are the revision counters a select probes, write variants the
counters an invalidation increments. Both lists are produced in one fixed
order because versions are compared position by position: at each prefix
length the variants keeping the original token come before the variants
substituting it, so the first column varies fastest.
"""

import enum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from app.core.exceptions import ConfigurationError
from app.models.query import QMARK, STAR, Pattern, PatternToken, Query, check_query


class TokenClass(str, enum.Enum):
    """Token classes a substitution rule can match."""
    STAR = "star"
    NON_STAR = "non_star"


class SubstitutionRules:
    """One of the two rule sets the algorithm uses."""

    __slots__ = ("name", "_rules")

    def __init__(self, rules: Mapping[TokenClass, PatternToken], name: str = ""):
        rules = dict(rules)
        if rules not in (_READ, _WRITE):
            raise ConfigurationError(
                "substitution rules must be {NonStar -> ?} or {Star -> ?, NonStar -> *}"
            )
        self.name = name or ("read" if rules == _READ else "write")
        self._rules: Dict[TokenClass, PatternToken] = rules

    def replacement(self, token: PatternToken) -> Optional[PatternToken]:
        cls = TokenClass.STAR if token is STAR else TokenClass.NON_STAR
        return self._rules.get(cls)

    def choices(self, token: PatternToken) -> Tuple[PatternToken, ...]:
        """The token itself, then its substitute if a rule applies."""
        replacement = self.replacement(token)
        return (token,) if replacement is None else (token, replacement)

    def __repr__(self) -> str:
        return f"SubstitutionRules({self.name})"


_READ = {TokenClass.NON_STAR: QMARK}
_WRITE = {TokenClass.STAR: QMARK, TokenClass.NON_STAR: STAR}

READ_RULES = SubstitutionRules(_READ)
WRITE_RULES = SubstitutionRules(_WRITE)


def expand_groups(choices: Sequence[Sequence[Tuple[PatternToken, ...]]]) -> List[Pattern]:
    """
    Cartesian product of per-position alternatives in canonical order.

    Each alternative is a tuple of tokens, so one logical column may
    contribute several pattern positions (a dyadic column contributes w).
    Alternatives listed earlier at the last position come first in the
    result; the first position varies fastest.
    """
    prefixes: List[Pattern] = [()]
    for alternatives in choices:
        prefixes = [prefix + group for group in alternatives for prefix in prefixes]
    return prefixes


def all_variants_of(q: Query, rules: SubstitutionRules) -> List[Pattern]:
    """Every pattern obtained by applying ``rules`` at any subset of positions."""
    check_query(q)
    return expand_groups([[(t,) for t in rules.choices(token)] for token in q])


def read_variants(q: Query) -> List[Pattern]:
    """Counters probed by a select: each value may become QMARK."""
    return all_variants_of(q, READ_RULES)


def write_variants(q: Query) -> List[Pattern]:
    """Counters incremented by a write: STAR may become QMARK, a value STAR."""
    return all_variants_of(q, WRITE_RULES)
