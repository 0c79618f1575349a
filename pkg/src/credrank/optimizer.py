"""Reward-driven search for the best global statement.

An action ``(alpha, t, gamma, q)`` determines a global statement; its reward
is a size-minus-error cost times the statement's posterior probability,
optionally floored at zero below a minimum credibility.  The search is a
box-constrained pattern search with step halving and multiple starts.  The
expensive part of every evaluation, the per-alpha comparison structure, is
computed once per grid value and cached, so the thousands of actions a
search visits cost little beyond the first one at each alpha.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .statements import (
    ComparisonCounts,
    GlobalStatement,
    PosteriorDraws,
    _floor_frac,
    _snap_count,
    count_pairwise,
    global_probability,
    global_set,
)

__all__ = [
    "Action",
    "RewardConfig",
    "StatementEngine",
    "cost",
    "reward",
    "attach_scores",
    "pattern_search",
    "optimize",
]

_H_FUNCS = {"identity": lambda x: float(x), "log1p": math.log1p}
_H_VECTOR = {"identity": lambda v: v.astype(np.float64), "log1p": np.log1p}

DEFAULT_BOX: tuple[tuple[float, float], ...] = (
    (0.0, 0.05),  # alpha
    (0.0, 0.1),   # t
    (0.0, 0.5),   # gamma
    (0.0, 0.1),   # q
)


def default_alpha_grid(alpha_max: float = 0.05, points: int = 21) -> tuple[float, ...]:
    """Evenly spaced alpha grid from 0, rounded to clean decimals."""
    return tuple(float(v) for v in np.round(np.linspace(0.0, alpha_max, points), 12))


@dataclass(frozen=True, order=True)
class Action:
    """A point in the search space: local confidence level and the three
    failure/credibility budgets."""

    alpha: float
    t: float
    gamma: float
    q: float

    def astuple(self) -> tuple[float, float, float, float]:
        return (self.alpha, self.t, self.gamma, self.q)


@dataclass(frozen=True)
class RewardConfig:
    """Scoring and search configuration.

    ``h`` names the size transform of the cost ("identity" or "log1p"; both
    map 0 to 0).  ``epsilon``, when set, zeroes the reward of statements
    whose posterior probability falls below ``1 - epsilon``.  ``box`` bounds
    the four coordinates, alpha additionally restricted to ``alpha_grid``.
    ``delta0``/``delta_min`` are the initial and terminal pattern-search step
    sizes as fractions of the per-coordinate box width.
    """

    h: str = "identity"
    epsilon: float | None = None
    box: tuple[tuple[float, float], ...] = DEFAULT_BOX
    alpha_grid: tuple[float, ...] = field(default_factory=default_alpha_grid)
    starts: tuple[Action, ...] | None = None
    delta0: float = 0.25
    delta_min: float = 2.0 ** -10

    def __post_init__(self) -> None:
        if self.h not in _H_FUNCS:
            raise ValueError(f"h must be one of {sorted(_H_FUNCS)}, got {self.h!r}")
        if self.epsilon is not None and not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1) or be None")
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        if len(box) != 4:
            raise ValueError("box needs one (lo, hi) interval per coordinate")
        for lo, hi in box:
            if not (0.0 <= lo <= hi <= 1.0):
                raise ValueError(f"box interval ({lo}, {hi}) is not inside [0, 1]")
        grid = tuple(float(a) for a in self.alpha_grid)
        if len(grid) < 1 or grid[0] != 0.0:
            raise ValueError("alpha_grid must start at 0")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("alpha_grid must be strictly increasing")
        if grid[0] < box[0][0] or grid[-1] > box[0][1]:
            raise ValueError("alpha_grid must lie inside the box's alpha interval")
        if not 0.0 < self.delta_min <= self.delta0 <= 1.0:
            raise ValueError("need 0 < delta_min <= delta0 <= 1")
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "alpha_grid", grid)
        if self.starts is not None:
            starts = tuple(self.starts)
            for a in starts:
                _validate_start(a, box, grid)
            object.__setattr__(self, "starts", starts)

    def start_points(self) -> tuple[Action, ...]:
        if self.starts is not None:
            return self.starts
        return default_starts(self.box, self.alpha_grid)


def snap_to_grid(value: float, grid: tuple[float, ...]) -> float:
    """Nearest grid value; equidistant values resolve to the smaller one."""
    arr = np.asarray(grid)
    return float(arr[int(np.argmin(np.abs(arr - value)))])


def default_starts(
    box: tuple[tuple[float, float], ...], grid: tuple[float, ...]
) -> tuple[Action, ...]:
    """The box corners (alpha snapped to the grid) minus duplicates, plus the
    box center."""
    points: set[tuple[float, float, float, float]] = set()
    for corner in itertools.product(*box):
        points.add((snap_to_grid(corner[0], grid), corner[1], corner[2], corner[3]))
    center = tuple((lo + hi) / 2.0 for lo, hi in box)
    points.add((snap_to_grid(center[0], grid), center[1], center[2], center[3]))
    return tuple(Action(*p) for p in sorted(points))


def _validate_start(action: Action, box, grid) -> None:
    for value, (lo, hi), name in zip(
        action.astuple(), box, ("alpha", "t", "gamma", "q")
    ):
        if not lo <= value <= hi:
            raise ValueError(f"start {name}={value} outside box [{lo}, {hi}]")
    if not any(abs(action.alpha - g) < 1e-12 for g in grid):
        raise ValueError(f"start alpha={action.alpha} is not on the alpha grid")


def cost(statement: GlobalStatement, h: str = "identity") -> float:
    """Size-minus-error quality of a complete statement.

    ``{h(g) - h(floor(q * g))} * sum over members of
    {h(n_l) - h(floor(t * n_l))}`` where ``g`` is the member count and
    ``n_l`` the size of member l's comparison set.  Empty statements and
    statements made only of vacuous locals cost 0.
    """
    if not statement.complete:
        raise ValueError("statement has no q yet; call global_probability")
    hf = _H_FUNCS[h]
    hv = _H_VECTOR[h]
    g = statement.g
    if g == 0:
        return 0.0
    head = hf(g) - hf(_floor_frac(statement.q, g))
    sizes = np.array([ls.sets.n for ls in statement.locals], dtype=np.int64)
    floors = np.array(
        [_floor_frac(ls.t, ls.sets.n) for ls in statement.locals], dtype=np.int64
    )
    body = float((hv(sizes) - hv(floors)).sum())
    return head * body


def _passes_floor(prob_count: int, m: int, epsilon: float | None) -> bool:
    if epsilon is None:
        return True
    return prob_count >= _snap_count((1.0 - epsilon) * m)


def reward(statement: GlobalStatement, config: RewardConfig) -> float:
    """Cost times posterior probability, zeroed below the credibility floor."""
    if not statement.complete:
        raise ValueError("statement has no q yet; call global_probability")
    if not _passes_floor(statement.prob_count, statement.M, config.epsilon):
        return 0.0
    return cost(statement, config.h) * (statement.prob_count / statement.M)


def attach_scores(statement: GlobalStatement, config: RewardConfig) -> GlobalStatement:
    return replace(
        statement, cost=cost(statement, config.h), reward=reward(statement, config)
    )


class StatementEngine:
    """Caches the per-alpha comparison structure so that reward evaluations
    are cheap.

    For each alpha the engine stores, per entity, the size of its comparison
    set and the per-draw count of failing comparisons.  Every statement
    quantity for any ``(t, gamma, q)`` then reduces to integer thresholding
    of those counts, exactly mirroring the stand-alone statement operations.
    All caches are immutable once built; sharing an engine across searches is
    safe and is what makes multi-start cheap.
    """

    def __init__(self, draws: PosteriorDraws, counts: ComparisonCounts | None = None):
        self.draws = draws
        self.counts = counts if counts is not None else count_pairwise(draws)
        self._values_t = np.ascontiguousarray(draws.values.T)
        m, l = draws.M, draws.L
        self._fail_dtype = np.uint16 if l <= 0xFFFF else np.uint32
        self._alpha_cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}
        self._count_cache: dict[tuple[float, float], tuple[np.ndarray, np.ndarray]] = {}
        self._colsum_cache: dict[tuple[float, float, int], np.ndarray] = {}

    # -- cached layers ----------------------------------------------------

    def _alpha_layer(self, alpha: float) -> tuple[np.ndarray, np.ndarray]:
        """(set sizes, per-draw failure counts) for every entity at alpha."""
        key = float(alpha)
        cached = self._alpha_cache.get(key)
        if cached is not None:
            return cached
        values_t = self._values_t
        wins = self.counts.wins
        l, m = values_t.shape
        threshold = _snap_count((1.0 - key) * m)
        n_vec = np.empty(l, dtype=np.int64)
        fails = np.empty((l, m), dtype=self._fail_dtype)
        for entity in range(l):
            above = np.flatnonzero(wins[:, entity] > threshold)
            below = np.flatnonzero(wins[entity, :] > threshold)
            if above.size and below.size:
                n = int(np.union1d(above, below).size)
            else:
                n = int(above.size + below.size)
            row = values_t[entity][None, :]
            succ = (values_t[above] > row).sum(axis=0)
            succ += (values_t[below] < row).sum(axis=0)
            n_vec[entity] = n
            fails[entity] = (n - succ).astype(self._fail_dtype)
        self._alpha_cache[key] = (n_vec, fails)
        return n_vec, fails

    @staticmethod
    def _floor_vec(frac: float, n_vec: np.ndarray) -> np.ndarray:
        x = frac * n_vec
        r = np.rint(x)
        return np.where(np.abs(x - r) < 1e-9, r, np.floor(x)).astype(np.int64)

    def _local_hold_counts(self, alpha: float, t: float) -> tuple[np.ndarray, np.ndarray]:
        """(allowed failures per entity, per-entity count of holding draws)."""
        key = (float(alpha), float(t))
        cached = self._count_cache.get(key)
        if cached is not None:
            return cached
        n_vec, fails = self._alpha_layer(alpha)
        allowed = self._floor_vec(t, n_vec)
        hold_counts = (fails <= allowed[:, None]).sum(axis=1)
        self._count_cache[key] = (allowed, hold_counts)
        return allowed, hold_counts

    def _member_mask(self, alpha: float, t: float, gamma: float) -> tuple[np.ndarray, int]:
        _, hold_counts = self._local_hold_counts(alpha, t)
        allowed_fail = _floor_frac(gamma, self.draws.M)
        mask = hold_counts >= self.draws.M - allowed_fail
        return mask, allowed_fail

    def _member_colsum(self, alpha: float, t: float, allowed_fail: int, mask: np.ndarray) -> np.ndarray:
        key = (float(alpha), float(t), allowed_fail)
        cached = self._colsum_cache.get(key)
        if cached is not None:
            return cached
        allowed, _ = self._local_hold_counts(alpha, t)
        n_vec, fails = self._alpha_layer(alpha)
        colsum = (fails[mask] <= allowed[mask, None]).sum(axis=0)
        self._colsum_cache[key] = colsum
        return colsum

    # -- evaluation -------------------------------------------------------

    def prob_count(self, action: Action) -> tuple[int, int]:
        """(count of draws satisfying the statement, member count)."""
        mask, allowed_fail = self._member_mask(action.alpha, action.t, action.gamma)
        g = int(mask.sum())
        m = self.draws.M
        if g == 0:
            return m, 0
        colsum = self._member_colsum(action.alpha, action.t, allowed_fail, mask)
        need = g - _floor_frac(action.q, g)
        return int((colsum >= need).sum()), g

    def score(self, action: Action, config: RewardConfig) -> float:
        """Reward of the statement at ``action`` under ``config``."""
        mask, allowed_fail = self._member_mask(action.alpha, action.t, action.gamma)
        g = int(mask.sum())
        m = self.draws.M
        if g == 0:
            return 0.0
        colsum = self._member_colsum(action.alpha, action.t, allowed_fail, mask)
        need = g - _floor_frac(action.q, g)
        prob_count = int((colsum >= need).sum())
        if not _passes_floor(prob_count, m, config.epsilon):
            return 0.0
        n_vec, _ = self._alpha_layer(action.alpha)
        allowed, _ = self._local_hold_counts(action.alpha, action.t)
        hv = _H_VECTOR[config.h]
        body = float((hv(n_vec[mask]) - hv(allowed[mask])).sum())
        hf = _H_FUNCS[config.h]
        head = hf(g) - hf(_floor_frac(action.q, g))
        return head * body * (prob_count / m)

    def sweep(
        self,
        alphas,
        ts,
        gammas,
        qs,
        config: RewardConfig,
    ) -> tuple[np.ndarray, np.ndarray]:
        """Rewards and probability counts over a full action lattice.

        Returns arrays of shape (len(alphas), len(ts), len(gammas), len(qs)).
        Intended for small problems: exhaustive sweeps are the test oracle
        for the pattern search, not a production path.
        """
        m = self.draws.M
        hf = _H_FUNCS[config.h]
        hv = _H_VECTOR[config.h]
        shape = (len(alphas), len(ts), len(gammas), len(qs))
        rewards = np.zeros(shape, dtype=np.float64)
        prob_counts = np.zeros(shape, dtype=np.int64)
        for ia, alpha in enumerate(alphas):
            n_vec, fails = self._alpha_layer(alpha)
            for it, t in enumerate(ts):
                allowed, hold_counts = self._local_hold_counts(alpha, t)
                h_body_terms = hv(n_vec) - hv(allowed)
                for ig, gamma in enumerate(gammas):
                    allowed_fail = _floor_frac(gamma, m)
                    mask = hold_counts >= m - allowed_fail
                    g = int(mask.sum())
                    if g == 0:
                        prob_counts[ia, it, ig, :] = m
                        continue
                    colsum = self._member_colsum(alpha, t, allowed_fail, mask)
                    body = float(h_body_terms[mask].sum())
                    needs = g - np.array([_floor_frac(q, g) for q in qs])
                    counts = (colsum[None, :] >= needs[:, None]).sum(axis=1)
                    prob_counts[ia, it, ig, :] = counts
                    heads = np.array([hf(g) - hf(g - int(n)) for n in needs])
                    ok = np.ones(len(qs), dtype=bool)
                    if config.epsilon is not None:
                        ok = counts >= _snap_count((1.0 - config.epsilon) * m)
                    rewards[ia, it, ig, :] = np.where(
                        ok, heads * body * (counts / m), 0.0
                    )
        return rewards, prob_counts

    def statement(self, action: Action, config: RewardConfig | None = None) -> GlobalStatement:
        """Materialize the full statement object through the stand-alone
        operations (the engine's fast path is only for scoring)."""
        skeleton = global_set(self.draws, self.counts, action.alpha, action.t, action.gamma)
        statement = global_probability(skeleton, action.q)
        if config is not None:
            statement = attach_scores(statement, config)
        return statement


def _neighborhood(
    action: Action,
    delta: float,
    box: tuple[tuple[float, float], ...],
    grid: tuple[float, ...],
) -> list[Action]:
    """The 3^4 coordinate-wise perturbations of size delta (as a fraction of
    each box width), clamped to the box, alpha snapped to the grid."""
    choices: list[list[float]] = []
    for value, (lo, hi) in zip(action.astuple(), box):
        step = delta * (hi - lo)
        pts = {min(hi, max(lo, value - step)), value, min(hi, max(lo, value + step))}
        choices.append(sorted(pts))
    out = set()
    for alpha, t, gamma, q in itertools.product(*choices):
        out.add(Action(snap_to_grid(alpha, grid), t, gamma, q))
    return sorted(out)


def _search(engine: StatementEngine, config: RewardConfig, start: Action) -> tuple[Action, float]:
    """Pattern search from one start; returns the best action visited."""
    memo: dict[Action, float] = {}

    def score(a: Action) -> float:
        r = memo.get(a)
        if r is None:
            r = engine.score(a, config)
            memo[a] = r
        return r

    current = start
    current_reward = score(start)
    # Best action visited so far.  Positive-reward ties resolve to the
    # lexicographically smallest action (plateaus collapse onto their
    # smallest-error corner); an all-zero landscape returns the start.
    best, best_reward = current, current_reward
    delta = config.delta0
    for _ in range(1_000_000):
        candidates = _neighborhood(current, delta, config.box, config.alpha_grid)
        scored = [(score(a), a) for a in candidates]
        nxt_reward, nxt = min(scored, key=lambda p: (-p[0], p[1]))
        for r, a in scored:
            if r > best_reward or (r == best_reward and r > 0.0 and a < best):
                best, best_reward = a, r
        improved = nxt_reward > current_reward
        current, current_reward = nxt, nxt_reward
        if not improved:
            if delta / 2.0 < config.delta_min:
                break
            delta /= 2.0
    else:  # pragma: no cover - the reward landscape is finite
        raise RuntimeError("pattern search failed to terminate")
    return best, best_reward


def pattern_search(
    draws: PosteriorDraws,
    counts: ComparisonCounts,
    config: RewardConfig,
    start: Action,
    engine: StatementEngine | None = None,
) -> tuple[Action, GlobalStatement]:
    """Step-halving coordinate search from one start.

    Each iteration scores the 3^4 perturbations of the current action
    (center included), moves to the argmax with ties broken toward the
    lexicographically smallest action, and halves the step once no strict
    improvement is found; it stops when the next halving would drop below
    ``delta_min``.  Returns the best action visited and its statement.
    Deterministic given inputs.
    """
    _validate_start(start, config.box, config.alpha_grid)
    if engine is None:
        engine = StatementEngine(draws, counts)
    best, _ = _search(engine, config, start)
    return best, engine.statement(best, config)


def optimize(
    draws: PosteriorDraws,
    counts: ComparisonCounts,
    config: RewardConfig,
) -> tuple[Action, GlobalStatement]:
    """Run the pattern search from every configured start and keep the
    highest-reward result, ties broken toward the lexicographically smallest
    action.  Starts share one cached engine, so extra starts are cheap."""
    starts = config.start_points()
    if not starts:
        raise ValueError("need at least one start")
    engine = StatementEngine(draws, counts)
    results = [_search(engine, config, start) for start in starts]
    best, _ = min(results, key=lambda p: (-p[1], p[0]))
    return best, engine.statement(best, config)
