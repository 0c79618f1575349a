"""Simulation harness: synthetic leagues, generative replication, metrics.

The study protocol mirrors the fitting pipeline end to end: fit the model to
a base set of encounters, pick posterior rows as ground truths, simulate new
point differences for the observed lineups under each truth, refit under a
(possibly different) prior, search for the reward-optimal statement with a
credibility floor, and score the result against the truth.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, replace

import numpy as np

from .dataio import EncounterRecord, EncounterTable, Registry, build_table
from .optimizer import RewardConfig, optimize
from .sampler import PriorSpec, SamplerConfig, SamplerResult, lineup_draws, run_chains
from .statements import count_pairwise, evaluate_at_point

__all__ = [
    "SimDesign",
    "SimTruth",
    "SimMetrics",
    "League",
    "make_league",
    "draw_truths",
    "simulate_dataset",
    "run_cell",
    "run_study",
    "metrics_to_csv",
]


@dataclass(frozen=True)
class SimDesign:
    """One cell of the study grid: truth-generating prior k, fitting prior m,
    league-size label d, data-doubling factor s, replicate j, seed."""

    j: int
    k: int
    d: str
    s: int
    m: int
    seed: int

    def __post_init__(self) -> None:
        if self.k not in (1, 2, 3) or self.m not in (1, 2, 3):
            raise ValueError("prior indices must be 1, 2 or 3")
        if self.s not in (1, 2):
            raise ValueError("s must be 1 or 2")


@dataclass(frozen=True)
class SimTruth:
    xi: np.ndarray
    sigma2: float


@dataclass(frozen=True)
class SimMetrics:
    design: SimDesign
    statement_prob: float
    covered: bool
    n_locals: int
    mean_entities_per_local: float
    t_hat: float
    q_hat: float
    alpha_hat: float
    gamma_hat: float
    wall_time: float


@dataclass(frozen=True)
class League:
    """A synthetic league with known generating abilities."""

    table: EncounterTable
    registry: Registry
    abilities: np.ndarray
    sigma: float


def make_league(
    n_teams: int = 8,
    roster: int = 10,
    n_encounters: int = 850,
    seed: int = 0,
    ability_sd: float = 1.0,
    noise_sd: float = 8.0,
) -> League:
    """Generate a league of random encounters in the package's own format.

    Teams are ``T01..``, players ``P01..`` within each team; every encounter
    picks two distinct teams and a uniform 5-player lineup per side, and the
    point difference is Gaussian around the difference of summed abilities,
    rounded to an integer.
    """
    if n_teams < 2 or roster < 5:
        raise ValueError("need at least two teams and five players per team")
    rng = np.random.default_rng(seed)
    teams = [f"T{i + 1:02d}" for i in range(n_teams)]
    names = [f"P{i + 1:02d}" for i in range(roster)]
    abilities = rng.normal(0.0, ability_sd, size=n_teams * roster)
    records = []
    for e in range(n_encounters):
        ta, tb = rng.choice(n_teams, size=2, replace=False)
        pa = rng.choice(roster, size=5, replace=False)
        pb = rng.choice(roster, size=5, replace=False)
        mean = abilities[ta * roster + pa].sum() - abilities[tb * roster + pb].sum()
        diff = int(np.rint(rng.normal(mean, noise_sd)))
        records.append(
            EncounterRecord(
                encounter_id=f"E{e + 1:05d}",
                team_a=teams[ta],
                team_b=teams[tb],
                players_a=tuple(names[j] for j in pa),
                players_b=tuple(names[j] for j in pb),
                points_a=max(diff, 0),
                points_b=max(-diff, 0),
            )
        )
    table, registry = build_table(records)
    # Registry indexing follows first appearance, not generation order.
    indexed = np.empty(registry.n_players)
    for entry in registry.players:
        team_no = int(entry.team[1:]) - 1
        player_no = int(entry.name[1:]) - 1
        indexed[entry.index] = abilities[team_no * roster + player_no]
    return League(table=table, registry=registry, abilities=indexed, sigma=noise_sd)


def draw_truths(fit: SamplerResult, count: int, seed: int = 0) -> list[SimTruth]:
    """Uniform without-replacement selection of posterior rows, each paired
    with its noise-variance draw."""
    m = fit.draws.M
    if count > m:
        raise ValueError(f"cannot select {count} of {m} posterior rows")
    rng = np.random.default_rng(seed)
    rows = rng.choice(m, size=count, replace=False)
    return [
        SimTruth(xi=fit.draws.values[r].copy(), sigma2=float(fit.sigma2[r]))
        for r in rows
    ]


def simulate_dataset(
    truth: SimTruth,
    table: EncounterTable,
    s: int,
    rng: np.random.Generator,
) -> EncounterTable:
    """Simulate point differences for the observed encounters under a truth.

    Differences are Gaussian around the true lineup-ability difference and
    rounded to the nearest integer (real scores are integers; the statement
    machinery is rank-based, so rounding only feeds the existing tie
    handling).  ``s = 2`` appends an independent second realization of every
    encounter.
    """
    if s not in (1, 2):
        raise ValueError("s must be 1 or 2")
    means = truth.xi[table.lineup_a].sum(axis=1) - truth.xi[table.lineup_b].sum(axis=1)
    sd = float(np.sqrt(truth.sigma2))
    ids = list(table.encounter_ids)
    teams_a = list(table.teams_a)
    teams_b = list(table.teams_b)
    lineup_a = table.lineup_a
    lineup_b = table.lineup_b
    diffs = np.rint(rng.normal(means, sd)).astype(np.int64)
    if s == 2:
        second = np.rint(rng.normal(means, sd)).astype(np.int64)
        diffs = np.concatenate([diffs, second])
        ids = ids + [f"{e}#2" for e in table.encounter_ids]
        teams_a = teams_a * 2
        teams_b = teams_b * 2
        lineup_a = np.vstack([lineup_a, lineup_a])
        lineup_b = np.vstack([lineup_b, lineup_b])
    return EncounterTable(
        encounter_ids=tuple(ids),
        teams_a=tuple(teams_a),
        teams_b=tuple(teams_b),
        lineup_a=lineup_a,
        lineup_b=lineup_b,
        points_a=np.maximum(diffs, 0),
        points_b=np.maximum(-diffs, 0),
        n_players=table.n_players,
    )


def _sub_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence(entropy=seed, spawn_key=key).generate_state(1)[0])


def run_cell(
    design: SimDesign,
    table: EncounterTable,
    registry: Registry,
    truth: SimTruth,
    *,
    sampler_config: SamplerConfig,
    reward_config: RewardConfig,
    entity: str = "players",
    workers: int = 1,
) -> SimMetrics:
    """One study cell: simulate under the truth, refit under prior m, find
    the optimal statement, and score it at the truth."""
    try:
        rng = np.random.default_rng(_sub_seed(design.seed, 1))
        sim_table = simulate_dataset(truth, table, design.s, rng)
        fit_config = replace(sampler_config, seed=_sub_seed(design.seed, 2))
        fit = run_chains(
            fit_config,
            sim_table,
            PriorSpec(kind=design.m),
            reference=registry.reference_index,
            entity_ids=registry.player_keys,
            workers=workers,
        )
        if entity == "players":
            draws = fit.draws
            truth_vector = truth.xi
        elif entity == "lineups":
            lineups = [
                [registry.player_index[k] for k in key]
                for key in registry.lineup_keys()
            ]
            draws = lineup_draws(fit.draws, lineups)
            truth_vector = np.array([truth.xi[lu].sum() for lu in lineups])
        else:
            raise ValueError("entity must be 'players' or 'lineups'")
        counts = count_pairwise(draws)
        start = time.perf_counter()
        action, statement = optimize(draws, counts, reward_config)
        wall = time.perf_counter() - start
        covered = evaluate_at_point(statement, truth_vector)
        sizes = [ls.sets.n for ls in statement.locals if ls.sets.n > 0]
        return SimMetrics(
            design=design,
            statement_prob=statement.prob,
            covered=bool(covered),
            n_locals=len(sizes),
            mean_entities_per_local=float(np.mean(sizes)) if sizes else 0.0,
            t_hat=action.t,
            q_hat=action.q,
            alpha_hat=action.alpha,
            gamma_hat=action.gamma,
            wall_time=wall,
        )
    except Exception as exc:
        raise RuntimeError(f"cell {design} failed: {exc}") from exc


def run_study(
    table: EncounterTable,
    registry: Registry,
    *,
    ks=(3,),
    ms=(1, 3),
    ss=(1, 2),
    replicates: int = 5,
    seed: int = 0,
    d_label: str = "desk",
    sampler_config: SamplerConfig | None = None,
    reward_config: RewardConfig | None = None,
    entity: str = "players",
) -> list[SimMetrics]:
    """Run the full grid of cells at a configurable scale.

    Fits one base posterior per truth-generating prior k, selects
    ``replicates`` truths from it, and runs every (j, k, s, m) combination.
    Each cell is internally deterministic given the root seed.
    """
    if sampler_config is None:
        sampler_config = SamplerConfig(
            chains=2, burn_in=300, thin=2, target_draws=500, seed=seed
        )
    if reward_config is None:
        reward_config = RewardConfig(epsilon=0.1)
    metrics: list[SimMetrics] = []
    for k in ks:
        base_config = replace(sampler_config, seed=_sub_seed(seed, 0, k))
        base_fit = run_chains(
            base_config,
            table,
            PriorSpec(kind=k),
            reference=registry.reference_index,
            entity_ids=registry.player_keys,
        )
        truths = draw_truths(base_fit, replicates, seed=_sub_seed(seed, 1, k))
        for j, truth in enumerate(truths, start=1):
            for s in ss:
                for m in ms:
                    design = SimDesign(
                        j=j,
                        k=k,
                        d=d_label,
                        s=s,
                        m=m,
                        seed=_sub_seed(seed, 2, k, j, s, m),
                    )
                    metrics.append(
                        run_cell(
                            design,
                            table,
                            registry,
                            truth,
                            sampler_config=sampler_config,
                            reward_config=reward_config,
                            entity=entity,
                        )
                    )
    return metrics


def metrics_to_csv(metrics) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        [
            "j",
            "k",
            "d",
            "s",
            "m",
            "seed",
            "statement_prob",
            "covered",
            "n_locals",
            "mean_entities_per_local",
            "t_hat",
            "q_hat",
            "alpha_hat",
            "gamma_hat",
            "wall_time",
        ]
    )
    for row in metrics:
        d = row.design
        writer.writerow(
            [
                d.j,
                d.k,
                d.d,
                d.s,
                d.m,
                d.seed,
                repr(row.statement_prob),
                int(row.covered),
                row.n_locals,
                repr(row.mean_entities_per_local),
                repr(row.t_hat),
                repr(row.q_hat),
                repr(row.alpha_hat),
                repr(row.gamma_hat),
                repr(row.wall_time),
            ]
        )
    return buf.getvalue()
