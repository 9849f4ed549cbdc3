import pytest

from app.core.exceptions import (
    ConfigurationError,
    DimensionError,
    DroppedConstraintError,
    WhitelistParseError,
    WhitelistViolationError,
)
from app.models.query import QMARK, STAR
from app.schemas.plan import PlanDocument
from app.schemas.table import TableSchema
from app.services.planner import (
    BOUND,
    BoundName,
    Projection,
    dnf_expand,
    load_whitelist,
    parse_whitelist,
    project,
    project_ranges,
)
from app.services.variants import read_variants

PLAYED = """
# who played which game on which day
columns user game date
read  *     $game $date
write $user $game $date   # insert
write $user *     *       # delete a user
"""

CRUD = """
columns id value
read  $id *
write $id $value
write $id *
"""


class TestTrimming:
    """Whitelist trimming keeps counters both read and written."""

    def test_played_probes(self):
        plan = parse_whitelist(PLAYED).plan()
        assert plan.probe_sets() == {"(*,$game,$date)": ["(*,$game,$date)", "(*,?,?)"]}

    def test_played_increments(self):
        plan = parse_whitelist(PLAYED).plan()
        assert plan.increment_sets() == {
            "($user,$game,$date)": ["(*,$game,$date)"],
            "($user,*,*)": ["(*,?,?)"],
        }
        assert plan.kept == [(STAR, BOUND, BOUND), (STAR, QMARK, QMARK)]

    def test_crud_needs_one_probe(self):
        plan = parse_whitelist(CRUD).plan()
        assert [len(t.patterns) for t in plan.reads] == [1]
        assert plan.probe_sets() == {"($id,*)": ["($id,*)"]}

    def test_match_by_shape(self):
        plan = parse_whitelist(PLAYED).plan()
        assert plan.match_read((STAR, "g", "d")).line == 4
        assert plan.match_write(("u", STAR, STAR)).line == 6
        with pytest.raises(WhitelistViolationError):
            plan.match_read(("u", STAR, STAR))

    def test_range_columns_keep_their_slot(self):
        text = "columns user day:range:8\nread $user *\nwrite $user $day\n"
        whitelist = parse_whitelist(text)
        assert whitelist.schema.range_widths == {1: 8}
        plan = whitelist.plan()
        assert plan.reads[0].patterns
        assert all(p[1] is not STAR for p in plan.writes[0].patterns)

    def test_plan_document(self):
        document = PlanDocument.from_plan(parse_whitelist(PLAYED).plan())
        assert document.columns == ["user", "game", "date"]
        assert document.kept == ["(*,$game,$date)", "(*,?,?)"]
        assert document.reads[0].line == 4
        assert document.writes[1].patterns == ["(*,?,?)"]

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "played.wl"
        path.write_text(PLAYED, encoding="utf-8")
        whitelist = load_whitelist(str(path))
        assert whitelist.reads == [(STAR, BoundName("game"), BoundName("date"))]
        assert whitelist.write_lines == [5, 6]


class TestWhitelistParsing:
    """Diagnostics carry the line and column of the offending token."""

    @pytest.mark.parametrize(
        "text,line,column",
        [
            ("read * *\n", 1, 1),
            ("columns a b\nread * $x $y\n", 2, 11),
            ("columns a b\nread *\n", 2, 7),
            ("columns a b\nread * x\n", 2, 8),
            ("columns a b\nupdate * *\n", 2, 1),
            ("columns a 9b\n", 1, 11),
            ("columns a b:range:0\n", 1, 11),
            ("columns a\ncolumns b\n", 2, 1),
            ("", 1, 1),
        ],
    )
    def test_errors(self, text, line, column):
        with pytest.raises(WhitelistParseError) as info:
            parse_whitelist(text)
        assert (info.value.line, info.value.column) == (line, column)

    def test_duplicate_column_names(self):
        with pytest.raises(WhitelistParseError):
            parse_whitelist("columns a a\n")

    def test_comments_and_blank_lines(self):
        whitelist = parse_whitelist("\n# nothing\ncolumns a\n\nread $a  # by key\n")
        assert whitelist.read_lines == [5]


class TestProjection:
    """Dimension reduction onto the relevant columns."""

    def test_project_read(self):
        proj = Projection((1, 2), 3)
        assert project((STAR, "g", "d"), proj) == ("g", "d")

    def test_read_constraint_cannot_be_dropped(self):
        with pytest.raises(DroppedConstraintError):
            project(("u", "g", STAR), Projection((1, 2), 3))

    def test_write_is_widened(self):
        assert project(("u", "g", "d"), Projection((1, 2), 3), relax=True) == ("g", "d")

    def test_ranges_reindexed(self):
        proj = Projection((0, 2), 3)
        assert project_ranges({2: (1, 5)}, proj) == {1: (1, 5)}
        assert project_ranges({1: (1, 5)}, proj, relax=True) == {}
        with pytest.raises(DroppedConstraintError):
            project_ranges({1: (1, 5)}, proj)

    @pytest.mark.parametrize("indices", [(), (1, 0), (0, 3)])
    def test_invalid(self, indices):
        with pytest.raises(ConfigurationError):
            Projection(indices, 3)

    def test_from_names(self):
        schema = TableSchema.from_names(["user", "game", "date"])
        assert Projection.from_names(schema, ["date", "game"]).indices == (1, 2)
        assert Projection.identity(3).schema(schema) == schema


class TestDnf:
    """WHERE clauses in disjunctive normal form."""

    def test_union_of_probes(self):
        patterns, clauses = dnf_expand([("1", STAR), (STAR, "2")])
        assert patterns == list(dict.fromkeys(read_variants(("1", STAR)) + read_variants((STAR, "2"))))
        assert clauses == [("1", STAR), (STAR, "2")]

    def test_shared_patterns_deduplicated(self):
        patterns, _ = dnf_expand([("1", STAR), ("2", STAR)])
        assert patterns == [("1", STAR), (QMARK, STAR), ("2", STAR)]

    def test_empty_and_ragged(self):
        with pytest.raises(ConfigurationError):
            dnf_expand([])
        with pytest.raises(DimensionError):
            dnf_expand([("1", STAR), (STAR,)])
