"""Transitivity structure of a zero-error global statement.

With ``t = q = 0`` a global statement asserts every pairwise comparison in
its member locals simultaneously, so the comparisons compose transitively:
any directed path of the comparison graph is itself a ranking, and every
such ranking is jointly credible at the statement's posterior probability.
"""

from __future__ import annotations

from dataclasses import dataclass

import networkx as nx
import numpy as np

from .statements import GlobalStatement

__all__ = ["CycleError", "RankingGraph", "derive_rankings"]


class CycleError(Exception):
    """Independently thresholded pairwise comparisons turned out mutually
    inconsistent; carries one offending cycle as a node list."""

    def __init__(self, cycle: list[int]):
        self.cycle = list(cycle)
        path = " -> ".join(str(v) for v in self.cycle)
        super().__init__(f"comparison relation is cyclic: {path}")


@dataclass(frozen=True)
class RankingGraph:
    """Comparison graph of a ``t = q = 0`` statement.

    Edges point from the worse entity to the better one.  ``chains`` are the
    maximal paths of the Hasse (transitively reduced) graph, listed worst to
    best; entities that appear in no comparison are not nodes.
    """

    nodes: tuple[int, ...]
    relation_edges: frozenset[tuple[int, int]]
    closure_edges: frozenset[tuple[int, int]]
    hasse_edges: frozenset[tuple[int, int]]
    chains: tuple[tuple[int, ...], ...]
    prob_count: int
    M: int

    @property
    def prob(self) -> float:
        return self.prob_count / self.M


def _statement_edges(statement: GlobalStatement) -> set[tuple[int, int]]:
    edges: set[tuple[int, int]] = set()
    for ls in statement.locals:
        entity = int(ls.sets.entity)
        for worse in ls.sets.below:
            edges.add((int(worse), entity))
        for better in ls.sets.above:
            edges.add((entity, int(better)))
    return edges


def _maximal_chains(hasse: nx.DiGraph, max_chains: int) -> list[tuple[int, ...]]:
    chains: list[tuple[int, ...]] = []
    sources = sorted(v for v in hasse if hasse.in_degree(v) == 0)
    for source in sources:
        # Iterative DFS; chains can be as long as the node count.
        stack: list[tuple[int, tuple[int, ...]]] = [(source, (source,))]
        while stack:
            node, path = stack.pop()
            successors = sorted(hasse.successors(node), reverse=True)
            if not successors:
                chains.append(path)
                if len(chains) > max_chains:
                    raise RuntimeError(
                        f"more than {max_chains} maximal chains; raise max_chains "
                        "or derive rankings from a sparser statement"
                    )
                continue
            for nxt in successors:
                stack.append((nxt, path + (nxt,)))
    return sorted(chains)


def derive_rankings(statement: GlobalStatement, max_chains: int = 1_000_000) -> RankingGraph:
    """Build the comparison graph of a complete ``t = q = 0`` statement,
    its transitive closure, the Hasse reduction, and all maximal chains.

    The raw pairwise relation can be cyclic because each pair was
    thresholded independently; a cycle makes the closure meaningless, so it
    aborts with :class:`CycleError` naming one cycle.
    """
    if not statement.complete:
        raise ValueError("statement has no q yet; call global_probability")
    if statement.t != 0.0 or statement.q != 0.0:
        raise ValueError("rankings require a statement with t = 0 and q = 0")
    edges = _statement_edges(statement)
    graph = nx.DiGraph()
    graph.add_edges_from(sorted(edges))
    try:
        cycle_edges = nx.find_cycle(graph)
    except nx.NetworkXNoCycle:
        pass
    else:
        nodes = [int(a) for a, _ in cycle_edges] + [int(cycle_edges[-1][1])]
        raise CycleError(nodes)
    closure = nx.transitive_closure_dag(graph)
    # For a DAG the transitive reduction depends only on reachability, so
    # reducing the raw relation equals reducing its closure and is cheaper.
    hasse = nx.transitive_reduction(graph)
    chains = _maximal_chains(hasse, max_chains)
    return RankingGraph(
        nodes=tuple(int(v) for v in sorted(graph.nodes)),
        relation_edges=frozenset((int(a), int(b)) for a, b in edges),
        closure_edges=frozenset((int(a), int(b)) for a, b in closure.edges),
        hasse_edges=frozenset((int(a), int(b)) for a, b in hasse.edges),
        chains=tuple(chains),
        prob_count=int(statement.prob_count),
        M=statement.M,
    )
