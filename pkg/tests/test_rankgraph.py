"""Ranking derivation: transitive closure, Hasse reduction, maximal chains,
cycle diagnostics."""

import numpy as np
import pytest

import oracles
from credrank import (
    CycleError,
    GlobalStatement,
    LocalSets,
    LocalStatement,
    PosteriorDraws,
    count_pairwise,
    derive_rankings,
    global_probability,
    global_set,
)


def _statement_from_sets(sets_spec: dict, m: int = 4) -> GlobalStatement:
    ones = np.ones(m, dtype=np.uint8)
    locals_ = []
    for entity, (below, above) in sorted(sets_spec.items()):
        s = LocalSets(
            entity=entity,
            below=np.array(below, int),
            above=np.array(above, int),
            alpha=0.5,
        )
        locals_.append(LocalStatement(sets=s, t=0.0, holds=ones, prob_count=m))
    skeleton = GlobalStatement(
        alpha=0.5, t=0.0, gamma=0.0,
        members=np.array(sorted(sets_spec)), locals=tuple(locals_), M=m,
    )
    return global_probability(skeleton, 0.0)


def test_three_edge_chain():
    # relations 2>1, 3>1, 3>2 (zero-based: 1>0, 2>0, 2>1) collapse to 0<1<2
    stmt = _statement_from_sets({1: ([0], [2]), 2: ([0, 1], [])})
    graph = derive_rankings(stmt)
    assert graph.chains == ((0, 1, 2),)
    assert graph.hasse_edges == {(0, 1), (1, 2)}
    assert graph.closure_edges == {(0, 1), (0, 2), (1, 2)}


def test_empty_statement_empty_graph():
    stmt = _statement_from_sets({})
    graph = derive_rankings(stmt)
    assert graph.nodes == ()
    assert graph.chains == ()
    assert graph.hasse_edges == frozenset()


def test_vacuous_members_are_not_nodes():
    stmt = _statement_from_sets({0: ([], []), 2: ([1], [])})
    graph = derive_rankings(stmt)
    assert graph.nodes == (1, 2)
    assert graph.chains == ((1, 2),)


def test_requires_zero_errors():
    stmt = _statement_from_sets({1: ([0], [])})
    import dataclasses

    with pytest.raises(ValueError):
        derive_rankings(dataclasses.replace(stmt, t=0.5))
    with pytest.raises(ValueError):
        derive_rankings(dataclasses.replace(stmt, q=0.5))


def test_cycle_detected():
    # rock-paper-scissors draws: every pair is 2-1, so alpha=0.5 orders all
    # three pairs cyclically
    draws = PosteriorDraws(
        values=[[0, 1, 2], [2, 0, 1], [1, 2, 0]], entity_ids=("r", "p", "s")
    )
    counts = count_pairwise(draws)
    stmt = global_probability(global_set(draws, counts, 0.5, 0.0, 1.0), 0.0)
    with pytest.raises(CycleError) as err:
        derive_rankings(stmt)
    cycle = err.value.cycle
    assert len(cycle) >= 3
    assert cycle[0] == cycle[-1]


def test_closure_matches_floyd_warshall():
    # canonical instance at (alpha, gamma) = (0.25, 0) has the three edges
    # (0,3), (1,2), (1,3)
    values = np.array(
        [
            [-2, 0, 5, 6],
            [0, 3, 5, 4],
            [0, 0, 4, 8],
            [0, 0, 4, 4],
            [1, 4, 6, 7],
            [2, 1, 2, 6],
            [0, 3, 6, 5],
            [2, 0, 3, 7],
        ],
        dtype=float,
    )
    draws = PosteriorDraws(values=values, entity_ids=("e0", "e1", "e2", "e3"))
    counts = count_pairwise(draws)
    stmt = global_probability(global_set(draws, counts, 0.25, 0.0, 0.0), 0.0)
    graph = derive_rankings(stmt)
    assert len(graph.relation_edges) >= 3
    want = oracles.reachability_closure(graph.nodes, graph.relation_edges)
    assert graph.closure_edges == want
    assert stmt.prob_count == 8
    assert graph.chains == ((0, 3), (1, 2), (1, 3))


def test_long_chain_is_iterative():
    # 1500-step path; recursion-based DFS would blow the default stack
    n = 1500
    sets_spec = {i: ([i - 1], []) for i in range(1, n)}
    sets_spec[0] = ([], [])
    stmt = _statement_from_sets(sets_spec, m=2)
    graph = derive_rankings(stmt)
    assert graph.chains == (tuple(range(n)),)
    assert len(graph.closure_edges) == n * (n - 1) // 2


def test_chain_cap():
    # complete bipartite 3 -> 3: nine maximal chains of length 2
    sets_spec = {i: ([], [3, 4, 5]) for i in range(3)}
    stmt = _statement_from_sets(sets_spec, m=2)
    graph = derive_rankings(stmt)
    assert len(graph.chains) == 9
    with pytest.raises(RuntimeError):
        derive_rankings(stmt, max_chains=4)
