import pytest

from app.core.exceptions import ConfigurationError
from app.models.query import QMARK, STAR
from app.services.graph_oracle import verify_graph
from app.services.variants import (
    READ_RULES,
    WRITE_RULES,
    SubstitutionRules,
    TokenClass,
    all_variants_of,
    read_variants,
    write_variants,
)


class TestVariants:
    """Read and write neighborhoods in canonical order."""

    def test_read_variants_order(self):
        assert all_variants_of((STAR, "3", "2"), READ_RULES) == [
            (STAR, "3", "2"),
            (STAR, QMARK, "2"),
            (STAR, "3", QMARK),
            (STAR, QMARK, QMARK),
        ]

    def test_read_variants_of_played_select(self):
        assert read_variants((STAR, "G", "D")) == [
            (STAR, "G", "D"),
            (STAR, QMARK, "D"),
            (STAR, "G", QMARK),
            (STAR, QMARK, QMARK),
        ]
        assert read_variants((STAR, STAR, STAR)) == [(STAR, STAR, STAR)]

    def test_write_variants_of_user_delete(self):
        assert write_variants(("U", STAR, STAR)) == [
            ("U", STAR, STAR),
            (STAR, STAR, STAR),
            ("U", QMARK, STAR),
            (STAR, QMARK, STAR),
            ("U", STAR, QMARK),
            (STAR, STAR, QMARK),
            ("U", QMARK, QMARK),
            (STAR, QMARK, QMARK),
        ]

    def test_write_variants_follow_rules(self):
        variants = write_variants((STAR, "2", "3"))
        assert len(variants) == len(set(variants)) == 8
        assert (STAR, "2", STAR) in variants
        assert set(write_variants(("2", "2", "0"))) == {
            (a, b, c) for a in ("2", STAR) for b in ("2", STAR) for c in ("0", STAR)
        }

    def test_empty_query(self):
        assert all_variants_of((), READ_RULES) == [()]
        assert all_variants_of((), WRITE_RULES) == [()]

    @pytest.mark.parametrize("k", [1, 2, 3, 4])
    def test_write_list_has_two_to_the_k_entries(self, k):
        assert len(write_variants(tuple(str(i) for i in range(k)))) == 2 ** k
        assert len(write_variants((STAR,) * k)) == 2 ** k

    def test_unknown_rules_rejected(self):
        with pytest.raises(ConfigurationError):
            SubstitutionRules({TokenClass.STAR: QMARK})


class TestGraphClosure:
    """Exhaustive checks over small domains."""

    @pytest.mark.parametrize("k,domain", [(1, 1), (2, 2), (2, 3), (3, 2)])
    def test_small_domains(self, k, domain):
        result = verify_graph(k, domain)
        assert result.ok, result.examples
        assert result.closure_pairs == result.queries ** 2

    @pytest.mark.slow
    def test_three_columns_three_values(self):
        result = verify_graph(3, 3)
        assert result.ok, result.examples
        assert result.queries == 64
