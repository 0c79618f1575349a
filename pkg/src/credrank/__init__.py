"""credrank: uncertainty-calibrated ordering statements from posterior draws.

The package turns M joint posterior draws of entity abilities into ordering
statements whose posterior probability is an exact draw count, searches for
the reward-optimal statement by pattern search, and ships the surrounding
pipeline: a Gibbs sampler for the lineup point-difference model, encounter
ingestion, a simulation harness, and statement/graph exporters.
"""

__version__ = "0.1.0"

from .optimizer import (
    Action,
    RewardConfig,
    StatementEngine,
    attach_scores,
    cost,
    optimize,
    pattern_search,
    reward,
)
from .rankgraph import CycleError, RankingGraph, derive_rankings
from .sampler import (
    ChainState,
    Design,
    PriorSpec,
    SamplerConfig,
    SamplerResult,
    build_design,
    gibbs_step,
    lineup_draws,
    prior_spec,
    run_chains,
    split_rhat,
    xi_full_conditional,
)
from .statements import (
    ComparisonCounts,
    GlobalStatement,
    LocalSets,
    LocalStatement,
    PosteriorDraws,
    count_pairwise,
    evaluate_at_point,
    global_probability,
    global_set,
    local_indicator,
    local_sets,
    local_statement,
)

__all__ = [
    "__version__",
    "Action",
    "ChainState",
    "ComparisonCounts",
    "CycleError",
    "Design",
    "GlobalStatement",
    "LocalSets",
    "LocalStatement",
    "PosteriorDraws",
    "PriorSpec",
    "RankingGraph",
    "RewardConfig",
    "SamplerConfig",
    "SamplerResult",
    "StatementEngine",
    "attach_scores",
    "build_design",
    "cost",
    "count_pairwise",
    "derive_rankings",
    "evaluate_at_point",
    "gibbs_step",
    "global_probability",
    "global_set",
    "lineup_draws",
    "local_indicator",
    "local_sets",
    "local_statement",
    "optimize",
    "pattern_search",
    "prior_spec",
    "reward",
    "run_chains",
    "split_rhat",
    "xi_full_conditional",
]
