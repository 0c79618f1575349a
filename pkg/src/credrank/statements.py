"""Ordering statements estimated from posterior ability draws.

Entities (players, lineups, anything with a latent scalar ability) are
compared through M joint posterior draws.  Pairwise win counts induce, for
each entity, the sets of entities confidently ordered above and below it; a
local statement asserts those orderings up to a tolerated failure fraction
``t``; a global statement bundles the entities whose local statement clears
posterior probability ``1 - gamma``, tolerating a failure fraction ``q``
among them.

Every probability in this module is an exact count of draws over M, so
downstream checks can assert equalities and inequalities without floating
point slack.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "PosteriorDraws",
    "ComparisonCounts",
    "LocalSets",
    "LocalStatement",
    "GlobalStatement",
    "count_pairwise",
    "local_sets",
    "local_indicator",
    "local_statement",
    "global_set",
    "global_probability",
    "evaluate_at_point",
]

_SNAP_EPS = 1e-9


def _snap_count(x: float) -> float:
    """Round ``x`` to the nearest integer when it sits within representation
    error of one.

    Count thresholds like ``(1 - alpha) * M`` are decimal-valued; computing
    them in binary floating point can land a hair on the wrong side of the
    integer they equal mathematically, flipping strict/non-strict comparisons
    against integer counts.  A 1e-9 neighbourhood is safe for any count below
    ~1e6 and keeps results identical to exact rational arithmetic for
    decimal-grid parameters.
    """
    r = round(x)
    return float(r) if abs(x - r) < _SNAP_EPS else x


def _floor_frac(frac: float, n: int) -> int:
    """``floor(frac * n)`` computed as if ``frac`` were an exact decimal."""
    return int(math.floor(_snap_count(frac * n)))


def _check_unit(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
    return value


@dataclass(frozen=True)
class PosteriorDraws:
    """M x L matrix of ability draws plus entity labels.

    Rows are draws, columns are entities.  Immutable after construction (the
    array is marked read-only), so instances can be shared freely across
    workers.
    """

    values: np.ndarray
    entity_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 2:
            raise ValueError("draws must be a 2-D (draws x entities) array")
        m, l = values.shape
        if m < 1 or l < 1:
            raise ValueError("need at least one draw and one entity")
        ids = tuple(str(e) for e in self.entity_ids)
        if len(ids) != l:
            raise ValueError(f"got {len(ids)} entity ids for {l} columns")
        if len(set(ids)) != l:
            raise ValueError("entity ids must be unique")
        if not np.isfinite(values).all():
            raise ValueError("draws must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "entity_ids", ids)

    @property
    def M(self) -> int:
        return self.values.shape[0]

    @property
    def L(self) -> int:
        return self.values.shape[1]

    def column(self, entity_id: str) -> int:
        try:
            return self.entity_ids.index(entity_id)
        except ValueError:
            raise KeyError(f"unknown entity id {entity_id!r}") from None


@dataclass(frozen=True)
class ComparisonCounts:
    """Pairwise win counts over the draws.

    ``wins[a, b]`` is the number of draws in which entity ``a`` is strictly
    above entity ``b``.  A draw with an exact tie satisfies neither direction;
    ties are recoverable as ``M - wins - wins.T`` and surface only in
    diagnostics.
    """

    wins: np.ndarray
    M: int

    def __post_init__(self) -> None:
        wins = np.array(self.wins, dtype=np.int64, copy=True)
        if wins.ndim != 2 or wins.shape[0] != wins.shape[1]:
            raise ValueError("wins must be a square matrix")
        if (np.diagonal(wins) != 0).any():
            raise ValueError("diagonal of wins must be zero")
        if (wins < 0).any() or (wins > self.M).any():
            raise ValueError("win counts must lie in [0, M]")
        wins.setflags(write=False)
        object.__setattr__(self, "wins", wins)

    @property
    def L(self) -> int:
        return self.wins.shape[0]

    def ties(self) -> np.ndarray:
        """Per-pair count of draws with an exact tie (symmetric, zero diagonal)."""
        t = self.M - self.wins - self.wins.T
        np.fill_diagonal(t, 0)
        return t

    def tie_summary(self) -> dict[str, int]:
        upper = self.ties()[np.triu_indices(self.L, k=1)]
        return {
            "tied_pairs": int((upper > 0).sum()),
            "tied_pair_draws": int(upper.sum()),
        }


def count_pairwise(draws: PosteriorDraws) -> ComparisonCounts:
    """Count, for every ordered pair, the draws where the first entity is
    strictly above the second.

    One full pass over the draw matrix per entity: O(M * L^2) work total.
    The per-entity passes are independent (no shared mutable state), so the
    loop parallelizes over entities; the result is deterministic either way.
    """
    m, l = draws.values.shape
    values_t = np.ascontiguousarray(draws.values.T)  # entity-major for locality
    wins = np.empty((l, l), dtype=np.int64)
    for j in range(l):
        wins[:, j] = (values_t > values_t[j][None, :]).sum(axis=1)
    return ComparisonCounts(wins=wins, M=m)


@dataclass(frozen=True)
class LocalSets:
    """Entities confidently ordered below/above one entity at level 1 - alpha.

    For ``alpha > 0.5`` the strict threshold can place a pair in both sets;
    statement arithmetic uses the union cardinality, so this stays
    well-defined (a doubly-listed entity can still satisfy at most one of its
    two comparisons per draw).
    """

    entity: int
    below: np.ndarray
    above: np.ndarray
    alpha: float

    def __post_init__(self) -> None:
        below = np.array(self.below, dtype=np.int64, copy=True)
        above = np.array(self.above, dtype=np.int64, copy=True)
        if self.entity in below or self.entity in above:
            raise ValueError("an entity cannot appear in its own local sets")
        below.setflags(write=False)
        above.setflags(write=False)
        object.__setattr__(self, "below", below)
        object.__setattr__(self, "above", above)

    @property
    def n(self) -> int:
        """Cardinality of ``below ∪ above``."""
        if self.below.size == 0 or self.above.size == 0:
            return int(self.below.size + self.above.size)
        return int(np.union1d(self.below, self.above).size)


def local_sets(counts: ComparisonCounts, entity: int, alpha: float) -> LocalSets:
    """Entities ordered above/below ``entity`` in a fraction strictly greater
    than ``1 - alpha`` of the draws."""
    alpha = _check_unit("alpha", alpha)
    if not 0 <= entity < counts.L:
        raise IndexError(f"entity index {entity} out of range [0, {counts.L})")
    threshold = _snap_count((1.0 - alpha) * counts.M)
    above = np.flatnonzero(counts.wins[:, entity] > threshold)
    below = np.flatnonzero(counts.wins[entity, :] > threshold)
    return LocalSets(entity=entity, below=below, above=above, alpha=alpha)


def _success_counts(values: np.ndarray, sets: LocalSets) -> np.ndarray:
    col = values[:, sets.entity, None]
    return (values[:, sets.above] > col).sum(axis=1) + (
        values[:, sets.below] < col
    ).sum(axis=1)


def local_indicator(draws: PosteriorDraws, sets: LocalSets, t: float) -> np.ndarray:
    """Per-draw indicator of the local statement with failure budget ``t``.

    Bit i is 1 iff at least ``(1 - t) * n`` of the ``n = |below ∪ above|``
    pairwise comparisons hold in draw i, i.e. at most ``floor(t * n)``
    comparisons fail.  Empty sets make the statement vacuous: all bits are 1.
    """
    t = _check_unit("t", t)
    n = sets.n
    if n == 0:
        return np.ones(draws.M, dtype=np.uint8)
    succ = _success_counts(draws.values, sets)
    need = n - _floor_frac(t, n)
    return (succ >= need).astype(np.uint8)


@dataclass(frozen=True)
class LocalStatement:
    """A local ordering statement: sets, failure budget, per-draw indicator,
    and the exact count of draws in which it holds."""

    sets: LocalSets
    t: float
    holds: np.ndarray
    prob_count: int

    def __post_init__(self) -> None:
        holds = np.array(self.holds, dtype=np.uint8, copy=True)
        holds.setflags(write=False)
        object.__setattr__(self, "holds", holds)
        if int(holds.sum()) != self.prob_count:
            raise ValueError("prob_count disagrees with the indicator vector")

    @property
    def M(self) -> int:
        return int(self.holds.size)

    @property
    def prob(self) -> float:
        return self.prob_count / self.M


def local_statement(draws: PosteriorDraws, sets: LocalSets, t: float) -> LocalStatement:
    bits = local_indicator(draws, sets, t)
    return LocalStatement(sets=sets, t=t, holds=bits, prob_count=int(bits.sum()))


@dataclass(frozen=True)
class GlobalStatement:
    """A global ordering statement.

    Built in two stages: :func:`global_set` fixes the member entities and
    their local statements, then :func:`global_probability` fixes the global
    failure budget ``q`` and the per-draw indicator.  ``cost`` and ``reward``
    are attached by the optimizer once a scoring configuration is known.
    """

    alpha: float
    t: float
    gamma: float
    members: np.ndarray
    locals: tuple[LocalStatement, ...]
    M: int
    q: float | None = None
    holds: np.ndarray | None = None
    prob_count: int | None = None
    cost: float | None = None
    reward: float | None = None

    def __post_init__(self) -> None:
        members = np.array(self.members, dtype=np.int64, copy=True)
        members.setflags(write=False)
        object.__setattr__(self, "members", members)
        if len(self.locals) != members.size:
            raise ValueError("need exactly one local statement per member")

    @property
    def complete(self) -> bool:
        return self.q is not None

    @property
    def g(self) -> int:
        return int(self.members.size)

    @property
    def prob(self) -> float:
        if self.prob_count is None:
            raise ValueError("statement has no q yet; call global_probability")
        return self.prob_count / self.M

    @property
    def action(self) -> tuple[float, float, float, float | None]:
        return (self.alpha, self.t, self.gamma, self.q)

    def local_for(self, entity: int) -> LocalStatement:
        pos = np.flatnonzero(self.members == entity)
        if pos.size == 0:
            raise KeyError(f"entity {entity} is not a member of this statement")
        return self.locals[int(pos[0])]

    def referenced(self) -> np.ndarray:
        """All entity indices the statement compares: members plus their sets."""
        parts = [self.members]
        for ls in self.locals:
            parts.append(ls.sets.below)
            parts.append(ls.sets.above)
        return np.unique(np.concatenate(parts)) if parts else np.empty(0, np.int64)


def global_set(
    draws: PosteriorDraws,
    counts: ComparisonCounts,
    alpha: float,
    t: float,
    gamma: float,
) -> GlobalStatement:
    """Members whose local statement holds in at least ``(1 - gamma) * M``
    draws, with their local statements.  The returned statement has no global
    failure budget yet (``q is None``)."""
    gamma = _check_unit("gamma", gamma)
    t = _check_unit("t", t)
    m = draws.M
    allowed_fail = _floor_frac(gamma, m)
    values_t = np.ascontiguousarray(draws.values.T)  # entity-major for locality
    members: list[int] = []
    locals_: list[LocalStatement] = []
    for entity in range(draws.L):
        sets = local_sets(counts, entity, alpha)
        n = sets.n
        if n == 0:
            bits = np.ones(m, dtype=np.uint8)
        else:
            succ = (values_t[sets.above] > values_t[entity][None, :]).sum(axis=0)
            succ += (values_t[sets.below] < values_t[entity][None, :]).sum(axis=0)
            bits = (succ >= n - _floor_frac(t, n)).astype(np.uint8)
        stmt = LocalStatement(sets=sets, t=t, holds=bits, prob_count=int(bits.sum()))
        if m - stmt.prob_count <= allowed_fail:
            members.append(entity)
            locals_.append(stmt)
    return GlobalStatement(
        alpha=float(alpha),
        t=float(t),
        gamma=gamma,
        members=np.array(members, dtype=np.int64),
        locals=tuple(locals_),
        M=m,
    )


def global_probability(statement: GlobalStatement, q: float) -> GlobalStatement:
    """Complete a statement skeleton with global failure budget ``q``.

    Draw i satisfies the global statement iff at least ``g - floor(q * g)``
    of the ``g`` member locals hold there.  An empty member set makes the
    statement vacuous: probability 1 by convention (its cost is 0 anyway).
    """
    q = _check_unit("q", q)
    g = statement.g
    if g == 0:
        holds = np.ones(statement.M, dtype=np.uint8)
    else:
        colsum = np.zeros(statement.M, dtype=np.int64)
        for ls in statement.locals:
            colsum += ls.holds
        need = g - _floor_frac(q, g)
        holds = (colsum >= need).astype(np.uint8)
    return replace(statement, q=q, holds=holds, prob_count=int(holds.sum()))


def evaluate_at_point(statement: GlobalStatement, truth: np.ndarray) -> bool:
    """Evaluate a complete statement at a single ability vector.

    This is the statement's defining indicator applied to one point instead
    of a posterior draw; it is what frequentist coverage checks use.  Exact
    ties among the entities the statement references leave the orderings
    undefined and raise ``ValueError``.
    """
    if not statement.complete:
        raise ValueError("statement has no q yet; call global_probability")
    truth = np.asarray(truth, dtype=np.float64)
    if truth.ndim != 1:
        raise ValueError("truth must be a 1-D ability vector")
    referenced = statement.referenced()
    if referenced.size and referenced.max() >= truth.size:
        raise IndexError("truth vector shorter than referenced entity indices")
    if np.unique(truth[referenced]).size != referenced.size:
        raise ValueError("tie among referenced entities; ordering undefined")
    g = statement.g
    if g == 0:
        return True
    held = 0
    for ls in statement.locals:
        sets = ls.sets
        n = sets.n
        if n == 0:
            held += 1
            continue
        value = truth[sets.entity]
        succ = int((truth[sets.above] > value).sum() + (truth[sets.below] < value).sum())
        if succ >= n - _floor_frac(ls.t, n):
            held += 1
    return held >= g - _floor_frac(statement.q, g)
