import pytest

from app.core.exceptions import ConfigurationError, DimensionError, UnsupportedTokenError
from app.models.query import (
    PERCENT,
    QMARK,
    STAR,
    Bit,
    contains_record,
    edge_e_double_prime,
    edge_e_prime,
    format_tuple,
    intersects,
    parse_query,
    witness,
)
from app.models.version import Version, VersionCompare


class TestQuerySpace:
    """Subspace membership, intersection and witnesses."""

    def test_contains_record(self):
        assert contains_record(("2", STAR, STAR), ("2", "5", "7"))
        assert not contains_record(("2", STAR, STAR), ("3", "5", "7"))
        assert contains_record((STAR, STAR, STAR), ("a", "b", "c"))

    def test_contains_record_length_mismatch(self):
        with pytest.raises(DimensionError):
            contains_record(("2", STAR), ("2", "5", "7"))

    def test_intersects(self):
        assert intersects(("U", STAR, STAR), (STAR, "G", "D"))
        assert not intersects(("1", "2"), ("1", "3"))

    def test_star_value_is_not_star_token(self):
        """The value "*" only matches itself."""
        assert not intersects(("*",), ("x",))
        assert intersects((STAR,), ("x",))

    def test_witness(self):
        assert witness(("1", STAR), (STAR, "2"), ["0", "0"]) == ("1", "2")
        assert witness((STAR, STAR), (STAR, STAR), ["m", "n"]) == ("m", "n")
        assert witness(("1", "2"), ("1", "3"), ["0", "0"]) is None

    def test_witness_needs_minimal_value(self):
        with pytest.raises(ConfigurationError):
            witness((STAR,), (STAR,), [None])

    def test_parse_and_format(self):
        q = parse_query("(2,*,x)")
        assert q == ("2", STAR, "x")
        assert format_tuple(q) == "(2,*,x)"
        assert parse_query("") == ()


class TestDependencyEdges:
    """Edges of the three-layer revision dependency graph."""

    def test_e_prime(self):
        assert edge_e_prime(("U", STAR, STAR), (STAR, QMARK, QMARK))
        assert not edge_e_prime(("U", STAR, STAR), (QMARK, STAR, STAR))
        assert edge_e_prime(("1", "2"), ("1", "2"))

    def test_e_double_prime(self):
        assert edge_e_double_prime((STAR, QMARK, "1"), (STAR, "0", "1"))
        assert not edge_e_double_prime((STAR, QMARK, "1"), (STAR, STAR, "1"))
        assert edge_e_double_prime(("1", "2"), ("1", "2"))

    def test_percent_rejected(self):
        with pytest.raises(UnsupportedTokenError):
            edge_e_prime((STAR,), (PERCENT,))
        with pytest.raises(UnsupportedTokenError):
            edge_e_double_prime((Bit.ONE,), ("1",))


class TestVersion:
    """Vectors of revisions compared position by position."""

    def test_dominates(self):
        assert Version([3, 5]).dominates(Version([3, 4]))
        assert not Version([3, 5]).dominates(Version([4, 5]))
        assert not Version([3]).dominates(Version([3, 0]))

    def test_exact_mode(self):
        assert Version([3, 5]).satisfies(Version([3, 4]))
        assert not Version([3, 5]).satisfies(Version([3, 4]), VersionCompare.EXACT)
        assert Version([3, 4]).satisfies(Version([3, 4]), VersionCompare.EXACT)

    def test_render_parse(self):
        v = Version([1700000000000000, 7])
        assert Version.parse(v.render()) == v
        assert Version.parse("") == Version(())
        with pytest.raises(ValueError):
            Version.parse("1.x")
