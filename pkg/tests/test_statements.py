"""Core statement operations against spec'd cases and the brute-force oracle.

The canonical instance below (M=8 draws, L=4 entities, integer values with
ties) was generated once with numpy default_rng(11) over base abilities
(0, 2, 4, 6) plus integer noise in [-2, 2]; every expected value was computed
with the enumeration oracle in oracles.py and frozen here.
"""

import math

import numpy as np
import pytest
from fractions import Fraction

import oracles
from credrank import (
    ComparisonCounts,
    GlobalStatement,
    LocalSets,
    PosteriorDraws,
    count_pairwise,
    evaluate_at_point,
    global_probability,
    global_set,
    local_indicator,
    local_sets,
    local_statement,
)

CANON_VALUES = [
    [-2, 0, 5, 6],
    [0, 3, 5, 4],
    [0, 0, 4, 8],
    [0, 0, 4, 4],
    [1, 4, 6, 7],
    [2, 1, 2, 6],
    [0, 3, 6, 5],
    [2, 0, 3, 7],
]
CANON_WINS = [
    [0, 2, 0, 0],
    [4, 0, 0, 0],
    [7, 8, 0, 2],
    [8, 8, 5, 0],
]
CANON_SETS_025 = {  # alpha = 0.25: (below, above) per entity
    0: ([], [2, 3]),
    1: ([], [2, 3]),
    2: ([0, 1], []),
    3: ([0, 1], []),
}
CANON_BITS_T0 = {
    0: [1, 1, 1, 1, 1, 0, 1, 1],
    1: [1, 1, 1, 1, 1, 1, 1, 1],
    2: [1, 1, 1, 1, 1, 0, 1, 1],
    3: [1, 1, 1, 1, 1, 1, 1, 1],
}
CANON_BITS_T05 = {l: [1] * 8 for l in range(4)}


@pytest.fixture(scope="module")
def canon():
    draws = PosteriorDraws(
        values=np.array(CANON_VALUES, dtype=float),
        entity_ids=("e0", "e1", "e2", "e3"),
    )
    return draws, count_pairwise(draws)


class TestPosteriorDraws:
    def test_validation(self):
        with pytest.raises(ValueError):
            PosteriorDraws(values=np.zeros((0, 2)), entity_ids=("a", "b"))
        with pytest.raises(ValueError):
            PosteriorDraws(values=np.zeros((2, 2)), entity_ids=("a", "a"))
        with pytest.raises(ValueError):
            PosteriorDraws(values=np.array([[np.inf]]), entity_ids=("a",))

    def test_immutable(self):
        d = PosteriorDraws(values=np.zeros((2, 2)), entity_ids=("a", "b"))
        with pytest.raises(ValueError):
            d.values[0, 0] = 1.0


class TestCountPairwise:
    def test_two_entities(self):
        # draws (1,2), (1,3), (0,5): entity 1 above entity 0 in every draw
        d = PosteriorDraws(values=[[1, 2], [1, 3], [0, 5]], entity_ids=("a", "b"))
        c = count_pairwise(d)
        assert c.wins[1, 0] == 3
        assert c.wins[0, 1] == 0

    def test_single_entity(self):
        d = PosteriorDraws(values=[[1.0], [2.0]], entity_ids=("a",))
        c = count_pairwise(d)
        assert c.wins.shape == (1, 1)
        assert c.wins[0, 0] == 0

    def test_matches_bruteforce(self, canon):
        draws, counts = canon
        assert counts.wins.tolist() == CANON_WINS
        assert counts.wins.tolist() == oracles.wins_matrix(draws.values)

    def test_ties_partition_draws(self, canon):
        draws, counts = canon
        total = counts.wins + counts.wins.T + counts.ties()
        off_diagonal = ~np.eye(4, dtype=bool)
        assert (total[off_diagonal] == counts.M).all()
        assert counts.tie_summary() == {"tied_pairs": 3, "tied_pair_draws": 4}

    def test_immutable_and_validated(self):
        with pytest.raises(ValueError):
            ComparisonCounts(wins=np.array([[1]]), M=3)


class TestLocalSets:
    def test_alpha_zero_empty(self, canon):
        _, counts = canon
        for entity in range(4):
            s = local_sets(counts, entity, 0.0)
            assert s.below.size == 0 and s.above.size == 0

    def test_alpha_one_any_win(self, canon):
        _, counts = canon
        for entity in range(4):
            s = local_sets(counts, entity, 1.0)
            expected_above = [k for k in range(4) if counts.wins[k, entity] >= 1]
            expected_below = [k for k in range(4) if counts.wins[entity, k] >= 1]
            assert s.above.tolist() == expected_above
            assert s.below.tolist() == expected_below

    def test_alpha_quarter_frozen(self, canon):
        _, counts = canon
        for entity, (below, above) in CANON_SETS_025.items():
            s = local_sets(counts, entity, 0.25)
            assert s.below.tolist() == below
            assert s.above.tolist() == above
            assert s.n == len(set(below) | set(above))

    def test_errors(self, canon):
        _, counts = canon
        with pytest.raises(IndexError):
            local_sets(counts, 4, 0.5)
        with pytest.raises(ValueError):
            local_sets(counts, 0, 1.5)

    def test_entity_never_in_own_sets(self):
        with pytest.raises(ValueError):
            LocalSets(entity=1, below=np.array([1]), above=np.array([]), alpha=0.5)


class TestLocalIndicator:
    def test_empty_sets_vacuous(self, canon):
        draws, _ = canon
        s = LocalSets(entity=0, below=np.array([], int), above=np.array([], int), alpha=0.0)
        assert local_indicator(draws, s, 0.0).tolist() == [1] * 8

    def test_t_zero_requires_all(self, canon):
        draws, counts = canon
        for entity, bits in CANON_BITS_T0.items():
            s = local_sets(counts, entity, 0.25)
            assert local_indicator(draws, s, 0.0).tolist() == bits

    def test_t_half_frozen(self, canon):
        draws, counts = canon
        for entity, bits in CANON_BITS_T05.items():
            s = local_sets(counts, entity, 0.25)
            assert local_indicator(draws, s, 0.5).tolist() == bits

    def test_matches_oracle_over_t_grid(self, canon):
        draws, counts = canon
        for entity in range(4):
            s = local_sets(counts, entity, 0.25)
            for j in range(11):
                got = local_indicator(draws, s, j / 10)
                want = oracles.local_bits(
                    draws.values, entity, s.below.tolist(), s.above.tolist(), Fraction(j, 10)
                )
                assert got.tolist() == want

    def test_prob_is_exact_count(self, canon):
        draws, counts = canon
        stmt = local_statement(draws, local_sets(counts, 0, 0.25), 0.0)
        assert stmt.prob_count == 7
        assert stmt.prob == 7 / 8


class TestGlobalSet:
    def test_gamma_one_everyone(self, canon):
        draws, counts = canon
        stmt = global_set(draws, counts, 0.25, 0.0, 1.0)
        assert stmt.members.tolist() == [0, 1, 2, 3]

    def test_gamma_zero_all_draws(self, canon):
        draws, counts = canon
        stmt = global_set(draws, counts, 0.25, 0.0, 0.0)
        assert stmt.members.tolist() == [1, 3]

    def test_frozen_members(self, canon):
        draws, counts = canon
        stmt = global_set(draws, counts, 0.25, 0.0, 0.25)
        assert stmt.members.tolist() == [0, 1, 2, 3]
        assert not stmt.complete
        with pytest.raises(ValueError):
            _ = stmt.prob

    def test_members_may_be_empty(self):
        # at alpha=1 the sets overlap; the tied third draw fails both locals,
        # so gamma=0 admits nobody
        draws = PosteriorDraws(
            values=[[1.0, 2.0], [2.0, 1.0], [1.0, 1.0]], entity_ids=("a", "b")
        )
        counts = count_pairwise(draws)
        stmt = global_set(draws, counts, 1.0, 0.0, 0.0)
        assert stmt.members.size == 0


class TestGlobalProbability:
    def test_q_one(self, canon):
        draws, counts = canon
        stmt = global_probability(global_set(draws, counts, 0.25, 0.0, 0.25), 1.0)
        assert stmt.prob == 1.0

    def test_single_member_q_zero(self, canon):
        draws, counts = canon
        base = global_set(draws, counts, 0.25, 0.0, 0.25)
        lone = GlobalStatement(
            alpha=0.25, t=0.0, gamma=0.25,
            members=np.array([0]), locals=(base.locals[0],), M=8,
        )
        stmt = global_probability(lone, 0.0)
        assert stmt.prob_count == base.locals[0].prob_count == 7

    def test_frozen_counts(self, canon):
        draws, counts = canon
        skeleton = global_set(draws, counts, 0.25, 0.0, 0.25)
        assert global_probability(skeleton, 0.5).prob_count == 8
        assert global_probability(skeleton, 0.0).prob_count == 7

    def test_empty_statement_prob_one(self):
        draws = PosteriorDraws(
            values=[[1.0, 2.0], [2.0, 1.0], [1.0, 1.0]], entity_ids=("a", "b")
        )
        counts = count_pairwise(draws)
        stmt = global_probability(global_set(draws, counts, 1.0, 0.0, 0.0), 0.0)
        assert stmt.g == 0
        assert stmt.prob == 1.0


def _chain_statement():
    """Hand-built t=q=0 statement asserting e0 < e1 < e2."""
    m = 4
    ones = np.ones(m, dtype=np.uint8)
    locals_ = []
    sets_spec = {0: ([], [1, 2]), 1: ([0], [2]), 2: ([0, 1], [])}
    from credrank import LocalStatement

    for entity, (below, above) in sets_spec.items():
        s = LocalSets(
            entity=entity,
            below=np.array(below, int),
            above=np.array(above, int),
            alpha=0.1,
        )
        locals_.append(LocalStatement(sets=s, t=0.0, holds=ones, prob_count=m))
    skeleton = GlobalStatement(
        alpha=0.1, t=0.0, gamma=0.0, members=np.array([0, 1, 2]),
        locals=tuple(locals_), M=m,
    )
    return global_probability(skeleton, 0.0)


class TestEvaluateAtPoint:
    def test_ordered_truth_true(self):
        assert evaluate_at_point(_chain_statement(), np.array([0.0, 1.0, 2.0])) is True

    def test_reversed_truth_false(self):
        assert evaluate_at_point(_chain_statement(), np.array([2.0, 1.0, 0.0])) is False

    def test_tie_raises(self):
        with pytest.raises(ValueError, match="tie"):
            evaluate_at_point(_chain_statement(), np.array([1.0, 1.0, 2.0]))

    def test_held_out_draw_matches_oracle(self, canon):
        draws, counts = canon
        stmt = global_probability(global_set(draws, counts, 0.25, 0.0, 0.25), 0.5)
        members, per = oracles.members_and_bits(
            draws.values, CANON_WINS, Fraction(1, 4), Fraction(0), Fraction(1, 4)
        )
        # draw 3 has ties between e2 and e3 at value 4; perturb to break them
        truth = draws.values[3] + np.array([0.0, 0.25, 0.0, 0.5])
        got = evaluate_at_point(stmt, truth)
        want = oracles.point_global(truth, per, members, Fraction(0), Fraction(1, 2))
        assert got == want is True

    def test_incomplete_statement_rejected(self, canon):
        draws, counts = canon
        skeleton = global_set(draws, counts, 0.25, 0.0, 0.25)
        with pytest.raises(ValueError):
            evaluate_at_point(skeleton, np.arange(4.0))
