import pytest

from app.core.exceptions import DroppedConstraintError, RangeError, WhitelistViolationError
from app.models.query import PERCENT, QMARK, STAR, Bit
from app.schemas.table import TableSchema
from app.services.planner import Projection, parse_whitelist
from app.services.schemes import GraphScheme, ProjectedScheme, TrimmedScheme
from app.services.variants import read_variants, write_variants

PLAYED = """
columns user game date
read  *     $game $date
write $user $game $date
write $user *     *
"""


@pytest.fixture
def played():
    return TrimmedScheme(parse_whitelist(PLAYED).plan())


class TestGraphScheme:
    """Full neighborhoods."""

    def test_matches_variants(self, schema):
        scheme = GraphScheme(schema)
        q = ("1", STAR, "3")
        assert scheme.probe_patterns(q) == read_variants(q)
        assert scheme.increment_patterns(q) == write_variants(q)

    def test_any_deduplicates(self, schema):
        scheme = GraphScheme(schema)
        patterns = scheme.probe_patterns_any([("1", STAR, STAR), ("2", STAR, STAR)])
        assert patterns.count((QMARK, STAR, STAR)) == 1
        assert len(patterns) == 3

    def test_range_column_bits(self):
        scheme = GraphScheme(TableSchema.parse("user,day:range:2"))
        probes = scheme.probe_patterns(("u", STAR), {1: (1, 2)})
        # A range column spans w pattern positions
        assert all(len(p) == 3 for p in probes)
        assert len(probes) == 2 * 5
        assert probes[:2] == [("u", Bit.ZERO, Bit.ONE), (QMARK, Bit.ZERO, Bit.ONE)]
        assert ("u", PERCENT, PERCENT) in probes
        assert ("u", Bit.ONE, PERCENT) in probes

    def test_range_on_plain_column_rejected(self, schema):
        with pytest.raises(RangeError):
            GraphScheme(schema).probe_patterns((STAR, STAR, STAR), {0: (0, 1)})

    def test_non_integer_range_value(self):
        scheme = GraphScheme(TableSchema.parse("user,day:range:4"))
        with pytest.raises(RangeError):
            scheme.increment_patterns(("u", "monday"))


class TestTrimmedScheme:
    """Whitelisted templates instantiated with runtime values."""

    def test_probe(self, played):
        assert played.probe_patterns((STAR, "chess", "mon")) == [(STAR, "chess", "mon"), (STAR, QMARK, QMARK)]

    def test_insert_and_delete(self, played):
        assert played.increment_patterns(("ann", "chess", "mon")) == [(STAR, "chess", "mon")]
        assert played.increment_patterns(("ann", STAR, STAR)) == [(STAR, QMARK, QMARK)]

    def test_unlisted_shape_rejected(self, played):
        with pytest.raises(WhitelistViolationError):
            played.probe_patterns(("ann", STAR, STAR))
        with pytest.raises(WhitelistViolationError):
            played.increment_patterns((STAR, STAR, "mon"))

    def test_intersection_kept(self, played):
        read = set(played.probe_patterns((STAR, "chess", "mon")))
        assert read & set(played.increment_patterns(("bob", "chess", "mon")))
        assert read & set(played.increment_patterns(("bob", STAR, STAR)))
        assert not read & set(played.increment_patterns(("bob", "go", "mon")))

    def test_fewer_keys_than_graph(self, played, schema):
        graph = GraphScheme(schema)
        q = (STAR, "chess", "mon")
        assert len(played.probe_patterns(q)) < len(graph.probe_patterns(q))


class TestProjectedScheme:
    """Counters over the game and date columns only."""

    @pytest.fixture
    def projected(self, schema):
        return ProjectedScheme(schema, Projection((1, 2), 3))

    def test_probe(self, projected):
        assert projected.probe_patterns((STAR, "chess", "mon")) == read_variants(("chess", "mon"))

    def test_read_on_dropped_column(self, projected):
        with pytest.raises(DroppedConstraintError):
            projected.probe_patterns(("ann", STAR, STAR))

    def test_write_widened(self, projected):
        assert projected.increment_patterns(("ann", "chess", "mon")) == write_variants(("chess", "mon"))
        assert projected.increment_patterns(("ann", STAR, STAR)) == write_variants((STAR, STAR))

    def test_widened_write_still_intersects(self, projected):
        read = set(projected.probe_patterns((STAR, "chess", STAR)))
        assert read & set(projected.increment_patterns(("ann", STAR, STAR)))
