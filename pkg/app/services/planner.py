"""
Key planning: dimension projection, whitelist trimming and DNF expansion.

Trimming works on templates, queries whose constrained positions are
parameter slots (``$name``) rather than values. Any two slots at the same
position are assumed to possibly hold equal values, so a trimmed plan can
keep extra counters but never loses a dependency.
"""

import enum
import logging
import re
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Set, Tuple

from app.core.exceptions import (
    ConfigurationError,
    DimensionError,
    DroppedConstraintError,
    WhitelistParseError,
    WhitelistViolationError,
)
from app.models.query import QMARK, STAR, Pattern, Query, Wildcard, check_length, format_token
from app.schemas.table import ColumnSpec, TableSchema
from app.services.variants import READ_RULES, WRITE_RULES, SubstitutionRules, expand_groups, read_variants

logger = logging.getLogger(__name__)


class Slot(enum.Enum):
    """Abstract template tokens."""
    BOUND = "$"
    # Position of a dyadic column; expanded into its bit counters at runtime
    RANGE = "#"


BOUND = Slot.BOUND
RANGE = Slot.RANGE

TemplateToken = object
Template = Tuple[TemplateToken, ...]


# --- projection -------------------------------------------------------------

@dataclass(frozen=True)
class Projection:
    """Relevant column indices (0-based, strictly increasing)."""
    indices: Tuple[int, ...]
    k: int

    def __post_init__(self):
        if not self.indices:
            raise ConfigurationError("projection must keep at least one column")
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise ConfigurationError(f"projection indices must be strictly increasing: {self.indices}")
        if self.indices[0] < 0 or self.indices[-1] >= self.k:
            raise ConfigurationError(f"projection indices {self.indices} outside 0..{self.k - 1}")

    @classmethod
    def from_names(cls, schema: TableSchema, names: Sequence[str]) -> "Projection":
        return cls(tuple(sorted(schema.index_of(n) for n in names)), schema.k)

    @classmethod
    def identity(cls, k: int) -> "Projection":
        return cls(tuple(range(k)), k)

    def schema(self, schema: TableSchema) -> TableSchema:
        return TableSchema(columns=tuple(schema.columns[i] for i in self.indices))


def project(q: Query, proj: Projection, relax: bool = False) -> Query:
    """
    Keep only the projected positions of ``q``.

    Args:
        q: Query over the full schema
        proj: Relevant columns
        relax: Drop constraints on other columns instead of failing; only safe
            for writes, whose subspace may be widened

    Raises:
        DroppedConstraintError: If a constrained column is not projected
    """
    check_length(q, proj.k)
    if not relax:
        kept = set(proj.indices)
        dropped = [i for i, token in enumerate(q) if token is not STAR and i not in kept]
        if dropped:
            raise DroppedConstraintError(f"projection drops constrained columns {dropped}")
    return tuple(q[i] for i in proj.indices)


def project_ranges(ranges: Optional[Mapping[int, Tuple[int, int]]], proj: Projection,
                   relax: bool = False) -> Dict[int, Tuple[int, int]]:
    """Re-index range constraints onto the projected schema."""
    position = {col: i for i, col in enumerate(proj.indices)}
    out = {}
    for col, bounds in (ranges or {}).items():
        if col not in position:
            if relax:
                continue
            raise DroppedConstraintError(f"projection drops range-constrained column {col}")
        out[position[col]] = bounds
    return out


# --- DNF --------------------------------------------------------------------

def dnf_expand(clauses: Sequence[Query], probe=None) -> Tuple[List[Pattern], List[Query]]:
    """
    Probe and invalidation lists of a WHERE clause in disjunctive normal form.

    Args:
        clauses: One query per conjunctive clause
        probe: Function giving the probe list of one clause; read variants by default

    Returns:
        Tuple of the deduplicated concatenation of per-clause probes, and the
        clauses themselves (a write invalidates each clause separately)
    """
    if not clauses:
        raise ConfigurationError("a DNF needs at least one clause")
    k = len(clauses[0])
    for q in clauses:
        if len(q) != k:
            raise DimensionError(k, len(q))
    if probe is None:
        probe = read_variants
    patterns = list(dict.fromkeys(p for q in clauses for p in probe(q)))
    return patterns, list(clauses)


# --- trimming ---------------------------------------------------------------

def _abstract(template: Template) -> Template:
    return tuple(t if t is STAR or t is RANGE else BOUND for t in template)


def _variants(template: Template, rules: SubstitutionRules) -> List[Pattern]:
    choices = []
    for token in template:
        if token is RANGE:
            choices.append([(RANGE,)])
        else:
            choices.append([(t,) for t in rules.choices(token)])
    return expand_groups(choices)


def format_template_token(token, name: str = "") -> str:
    if token is BOUND:
        return f"${name}" if name else "$"
    if token is RANGE:
        return f"#{name}"
    if isinstance(token, Wildcard):
        return format_token(token)
    if isinstance(token, BoundName):
        return f"${token.name}"
    return str(token)


@dataclass(frozen=True)
class BoundName:
    """A named parameter slot as written in a whitelist."""
    name: str


@dataclass
class TemplatePlan:
    """One whitelisted template with its trimmed key list."""
    template: Template
    patterns: List[Pattern]
    line: int = 0

    @property
    def shape(self) -> Tuple[bool, ...]:
        return tuple(t is not STAR for t in self.template)


@dataclass
class TrimmedPlan:
    """Kept counters plus per-template probe and increment lists."""
    schema: TableSchema
    kept: List[Pattern]
    reads: List[TemplatePlan]
    writes: List[TemplatePlan]
    _read_index: Dict[Tuple[bool, ...], TemplatePlan] = field(default_factory=dict, repr=False)
    _write_index: Dict[Tuple[bool, ...], TemplatePlan] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        # Templates with the same star positions have identical abstract plans
        for t in self.reads:
            self._read_index.setdefault(t.shape, t)
        for t in self.writes:
            self._write_index.setdefault(t.shape, t)

    @staticmethod
    def shape_of(q: Query, ranges: Optional[Mapping[int, Tuple[int, int]]] = None) -> Tuple[bool, ...]:
        ranges = ranges or {}
        return tuple(t is not STAR or i in ranges for i, t in enumerate(q))

    def match_read(self, q: Query, ranges=None) -> TemplatePlan:
        return self._match(self._read_index, q, ranges, "read")

    def match_write(self, q: Query, ranges=None) -> TemplatePlan:
        return self._match(self._write_index, q, ranges, "write")

    def _match(self, index, q, ranges, kind) -> TemplatePlan:
        check_length(q, self.schema.k)
        plan = index.get(self.shape_of(q, ranges))
        if plan is None:
            raise WhitelistViolationError(f"{kind} query {self.render_template(q)} matches no whitelisted template")
        return plan

    def render_pattern(self, p: Pattern) -> str:
        names = self.schema.names
        return "(" + ",".join(format_template_token(t, names[i]) for i, t in enumerate(p)) + ")"

    def render_template(self, template) -> str:
        return "(" + ",".join(format_template_token(t) for t in template) + ")"

    def probe_sets(self) -> Dict[str, List[str]]:
        return {self.render_template(t.template): [self.render_pattern(p) for p in t.patterns] for t in self.reads}

    def increment_sets(self) -> Dict[str, List[str]]:
        return {self.render_template(t.template): [self.render_pattern(p) for p in t.patterns] for t in self.writes}


def trim(schema: TableSchema, read_templates: Sequence[Template], write_templates: Sequence[Template],
         lines: Optional[Tuple[Sequence[int], Sequence[int]]] = None) -> TrimmedPlan:
    """
    Keep only counters that some write increments and some read probes.

    Args:
        schema: Table schema; dyadic columns keep their full bit counters
        read_templates: Whitelisted select templates
        write_templates: Whitelisted insert/delete templates
        lines: Source line numbers for diagnostics

    Returns:
        TrimmedPlan: Kept set and per-template sublists in canonical order
    """
    range_columns = set(schema.range_widths)

    def normalize(template: Template) -> Template:
        check_length(template, schema.k)
        return tuple(RANGE if i in range_columns else t for i, t in enumerate(template))

    reads = [normalize(t) for t in read_templates]
    writes = [normalize(t) for t in write_templates]
    read_lists = [_variants(_abstract(t), READ_RULES) for t in reads]
    write_lists = [_variants(_abstract(t), WRITE_RULES) for t in writes]

    written: Set[Pattern] = {p for ps in write_lists for p in ps}
    probed: Set[Pattern] = {p for ps in read_lists for p in ps}
    kept_set = written & probed
    # Deterministic order: first appearance across read templates
    kept = [p for p in dict.fromkeys(p for ps in read_lists for p in ps) if p in kept_set]

    read_lines, write_lines = lines or ([0] * len(reads), [0] * len(writes))
    plan = TrimmedPlan(
        schema=schema,
        kept=kept,
        reads=[
            TemplatePlan(t, [p for p in ps if p in kept_set], line)
            for t, ps, line in zip(read_templates, read_lists, read_lines)
        ],
        writes=[
            TemplatePlan(t, [p for p in ps if p in kept_set], line)
            for t, ps, line in zip(write_templates, write_lists, write_lines)
        ],
    )
    logger.info(
        "trimmed plan: %d read templates, %d write templates, %d of %d counters kept",
        len(reads), len(writes), len(kept), len(written | probed),
    )
    return plan


def instantiate(pattern: Pattern, q: Query) -> Pattern:
    """Replace BOUND slots by the runtime query's values; RANGE stays for the caller."""
    return tuple(q[i] if t is BOUND else t for i, t in enumerate(pattern))


# --- whitelist files --------------------------------------------------------

@dataclass
class Whitelist:
    schema: TableSchema
    reads: List[Template]
    writes: List[Template]
    read_lines: List[int]
    write_lines: List[int]

    def plan(self) -> TrimmedPlan:
        return trim(self.schema, self.reads, self.writes, (self.read_lines, self.write_lines))


_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


def _tokens(line: str):
    """Yield (column, text) pairs, columns 1-based."""
    for m in re.finditer(r"\S+", line):
        yield m.start() + 1, m.group()


def parse_whitelist(text: str) -> Whitelist:
    """
    Parse a whitelist.

    Grammar (one statement per line, ``#`` starts a comment)::

        columns <name>[:range:<w>] ...
        read  <token> ...
        write <token> ...

    where a token is ``*`` (unconstrained) or ``$name`` (a parameter slot).
    The ``columns`` line must come first.

    Raises:
        WhitelistParseError: With the line and column of the offending token
    """
    schema: Optional[TableSchema] = None
    reads: List[Template] = []
    writes: List[Template] = []
    read_lines: List[int] = []
    write_lines: List[int] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        tokens = list(_tokens(line))
        if not tokens:
            continue
        col, keyword = tokens[0]
        args = tokens[1:]
        if keyword == "columns":
            if schema is not None:
                raise WhitelistParseError("duplicate columns line", lineno, col)
            schema = _parse_columns(args, lineno, col)
            continue
        if keyword not in ("read", "write"):
            raise WhitelistParseError(f"unknown statement {keyword!r}", lineno, col)
        if schema is None:
            raise WhitelistParseError("columns line must come first", lineno, col)
        if len(args) != schema.k:
            where = args[schema.k][0] if len(args) > schema.k else len(line.rstrip()) + 1
            raise WhitelistParseError(f"expected {schema.k} tokens, got {len(args)}", lineno, where)
        template = tuple(_parse_token(token, lineno, c) for c, token in args)
        if keyword == "read":
            reads.append(template)
            read_lines.append(lineno)
        else:
            writes.append(template)
            write_lines.append(lineno)

    if schema is None:
        raise WhitelistParseError("missing columns line", 1, 1)
    return Whitelist(schema, reads, writes, read_lines, write_lines)


def _parse_columns(args, lineno: int, col: int) -> TableSchema:
    if not args:
        raise WhitelistParseError("columns line declares no columns", lineno, col)
    columns = []
    for c, text in args:
        name, _, annotation = text.partition(":")
        if not _NAME.fullmatch(name):
            raise WhitelistParseError(f"invalid column name {name!r}", lineno, c)
        width = None
        if annotation:
            kind, _, bits = annotation.partition(":")
            if kind != "range" or not bits.isdigit() or not 1 <= int(bits) <= 32:
                raise WhitelistParseError(f"bad annotation {annotation!r}; expected range:<w>", lineno, c)
            width = int(bits)
        columns.append(ColumnSpec(name=name, range_width=width))
    try:
        return TableSchema(columns=tuple(columns))
    except ValueError as e:
        raise WhitelistParseError(str(e), lineno, col) from e


def _parse_token(text: str, lineno: int, col: int):
    if text == "*":
        return STAR
    if text.startswith("$") and _NAME.fullmatch(text[1:]):
        return BoundName(text[1:])
    raise WhitelistParseError(f"invalid token {text!r}; expected '*' or '$name'", lineno, col)


def load_whitelist(path: str) -> Whitelist:
    with open(path, encoding="utf-8") as f:
        return parse_whitelist(f.read())
