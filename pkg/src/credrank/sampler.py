"""Gibbs sampler for the lineup point-difference model.

Each encounter pits two disjoint five-player lineups; the observed point
difference is Gaussian around the difference of the summed player abilities.
Abilities are identified by pinning one reference player (by default the
most frequently appearing one) at zero.  Three prior families are supported:

* prior 1 - Laplace(mu, fixed scale), an informative choice;
* prior 2 - Laplace(mu, sigma * lambda^-1/2) with lambda ~ Gamma(1, 1);
* prior 3 - Normal(mu, sigma^2 * lambda) with lambda ~ Half-Cauchy(0, 1);

always with mu ~ Normal(0, 3^2) and the improper pi(sigma^2) ∝ 1/sigma^2.
The Laplace priors are sampled through their exponential scale-mixture
representation (inverse-Gaussian updates for the reciprocal mixing scales);
prior 3's lambda is updated by slice sampling on the log scale.  All other
updates are exact conjugate draws.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .dataio import EncounterTable
from .statements import PosteriorDraws

__all__ = [
    "SamplerError",
    "PriorSpec",
    "prior_spec",
    "SamplerConfig",
    "ChainState",
    "Design",
    "build_design",
    "xi_full_conditional",
    "gibbs_step",
    "run_chains",
    "SamplerResult",
    "lineup_draws",
    "split_rhat",
]


class SamplerError(Exception):
    """Unrecoverable sampling failure (bad configuration or persistent
    numerical rejection)."""


@dataclass(frozen=True)
class PriorSpec:
    """Prior family for the abilities; see the module docstring."""

    kind: int
    laplace_scale: float = 3.0
    gamma_shape: float = 1.0
    gamma_rate: float = 1.0
    cauchy_scale: float = 1.0
    mu_sd: float = 3.0

    def __post_init__(self) -> None:
        if self.kind not in (1, 2, 3):
            raise ValueError("prior kind must be 1, 2 or 3")
        for name in ("laplace_scale", "gamma_shape", "gamma_rate", "cauchy_scale", "mu_sd"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")


def prior_spec(kind: int) -> PriorSpec:
    return PriorSpec(kind=kind)


@dataclass(frozen=True)
class SamplerConfig:
    chains: int = 13
    burn_in: int = 2000
    thin: int = 20
    target_draws: int = 10000
    seed: int = 0
    max_iterations: int | None = None

    def __post_init__(self) -> None:
        if self.chains < 1 or self.thin < 1 or self.target_draws < 1:
            raise ValueError("chains, thin and target_draws must be positive")
        if self.burn_in < 0:
            raise ValueError("burn_in must be nonnegative")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be positive when given")

    @property
    def kept_per_chain(self) -> int:
        return -(-self.target_draws // self.chains)

    @property
    def iterations_per_chain(self) -> int:
        return self.burn_in + self.thin * self.kept_per_chain


@dataclass
class ChainState:
    """Current parameter values of one chain.

    ``xi`` spans all L entities with the reference pinned at exactly 0;
    ``omega`` holds the per-player latent mixing scales of the Laplace
    priors (for prior 3 it mirrors the common variance ``sigma2 * lam``).
    """

    xi: np.ndarray
    mu: float
    sigma2: float
    lam: float
    omega: np.ndarray


@dataclass(frozen=True)
class Design:
    """Signed incidence structure of the encounters.

    Row i of the implied design has +1 at the players of the first lineup
    and -1 at those of the second; the reference player's column is dropped
    so its ability is pinned to 0.
    """

    lineup_a: np.ndarray
    lineup_b: np.ndarray
    reference: int
    L: int
    free: np.ndarray
    xtx: np.ndarray

    @property
    def N(self) -> int:
        return self.lineup_a.shape[0]

    @property
    def n_free(self) -> int:
        return self.free.size

    def mean_diffs(self, xi_full: np.ndarray) -> np.ndarray:
        """Model mean of every encounter's point difference."""
        if self.N == 0:
            return np.zeros(0)
        return xi_full[self.lineup_a].sum(axis=1) - xi_full[self.lineup_b].sum(axis=1)

    def xty(self, y: np.ndarray) -> np.ndarray:
        full = np.zeros(self.L)
        if self.N:
            np.add.at(full, self.lineup_a.ravel(), np.repeat(y, 5))
            np.subtract.at(full, self.lineup_b.ravel(), np.repeat(y, 5))
        return full[self.free]


def appearance_counts(table: EncounterTable) -> np.ndarray:
    counts = np.zeros(table.n_players, dtype=np.int64)
    if table.N:
        np.add.at(counts, table.lineup_a.ravel(), 1)
        np.add.at(counts, table.lineup_b.ravel(), 1)
    return counts


def build_design(
    table: EncounterTable,
    L: int | None = None,
    reference: int | None = None,
) -> Design:
    """Build the signed incidence structure for a set of encounters.

    ``reference`` defaults to the most frequently appearing player (smallest
    index on ties); callers holding a registry should pass its reference so
    that ties break on entity ids instead.
    """
    L = table.n_players if L is None else int(L)
    a = np.asarray(table.lineup_a, dtype=np.int64)
    b = np.asarray(table.lineup_b, dtype=np.int64)
    if a.ndim != 2 or a.shape[1] != 5 or b.shape != a.shape:
        raise ValueError("lineups must be N x 5 index arrays")
    if a.size and (a.min() < 0 or b.min() < 0 or max(a.max(), b.max()) >= L):
        raise ValueError("player index out of range")
    for i in range(a.shape[0]):
        row = np.concatenate([a[i], b[i]])
        if np.unique(row).size != 10:
            raise ValueError(f"encounter {i}: lineups overlap or repeat a player")
    if reference is None:
        counts = np.zeros(L, dtype=np.int64)
        if a.size:
            np.add.at(counts, a.ravel(), 1)
            np.add.at(counts, b.ravel(), 1)
        reference = int(np.argmax(counts))
    if not 0 <= reference < L:
        raise ValueError("reference index out of range")
    free = np.array([i for i in range(L) if i != reference], dtype=np.int64)
    pos = np.full(L, -1, dtype=np.int64)
    pos[free] = np.arange(free.size)
    n = free.size
    xtx = np.zeros((n, n))
    signs = np.concatenate([np.ones(5), -np.ones(5)])
    for i in range(a.shape[0]):
        row = np.concatenate([a[i], b[i]])
        keep = row != reference
        p = pos[row[keep]]
        s = signs[keep]
        xtx[np.ix_(p, p)] += np.outer(s, s)
    if a.shape[0] and n:
        rank = np.linalg.matrix_rank(xtx)
        if rank < n:
            warnings.warn(
                f"design rank {rank} < {n} free abilities; the posterior may be improper",
                stacklevel=2,
            )
    return Design(lineup_a=a, lineup_b=b, reference=reference, L=L, free=free, xtx=xtx)


def xi_full_conditional(
    design: Design,
    y: np.ndarray,
    sigma2: float,
    prior_var: np.ndarray,
    mu: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of the Gaussian full conditional of the free
    abilities, given the noise variance, the per-ability prior variances and
    the prior mean."""
    prec = design.xtx / sigma2 + np.diag(1.0 / prior_var)
    rhs = design.xty(y) / sigma2 + mu / prior_var
    chol = cho_factor(prec, lower=True)
    mean = cho_solve(chol, rhs)
    cov = cho_solve(chol, np.eye(design.n_free))
    return mean, cov


def _draw_xi_free(
    design: Design,
    xty: np.ndarray,
    sigma2: float,
    prior_var: np.ndarray,
    mu: float,
    rng: np.random.Generator,
) -> np.ndarray:
    prec = design.xtx / sigma2
    prec[np.diag_indices_from(prec)] += 1.0 / prior_var
    chol = np.linalg.cholesky(prec)
    rhs = xty / sigma2 + mu / prior_var
    mean = cho_solve((chol, True), rhs)
    z = rng.standard_normal(design.n_free)
    return mean + solve_triangular(chol, z, lower=True, trans="T")


def _draw_inv_gamma(
    rng: np.random.Generator, shape: float, scale: float, diag: dict
) -> float:
    if shape <= 0 or scale <= 0:
        raise SamplerError(
            f"inverse-gamma conditional degenerate (shape={shape}, scale={scale})"
        )
    for _ in range(100):
        g = rng.gamma(shape)
        if g > 0:
            v = scale / g
            if np.isfinite(v) and v > 0:
                return float(v)
        diag["retries"] += 1
    raise SamplerError("variance draw kept underflowing; data may be degenerate")


def _draw_omega(
    rng: np.random.Generator,
    xi_free: np.ndarray,
    mu: float,
    a2: float,
    diag: dict,
) -> np.ndarray:
    # 1/omega | . ~ InverseGaussian(a / |xi - mu|, a^2), the standard
    # conditional of the exponential mixing scale of a Laplace(mu, 1/a).
    dev = np.abs(xi_free - mu)
    mean = np.sqrt(a2) / np.clip(dev, 1e-12, None)
    mean = np.clip(mean, 1e-12, 1e12)
    for _ in range(100):
        recip = rng.wald(mean, a2)
        if np.all(np.isfinite(recip)) and np.all(recip > 0):
            return 1.0 / recip
        diag["retries"] += 1
    raise SamplerError("mixing-scale draw kept failing; abilities may have collapsed")


def _slice_sample_log_lambda(
    rng: np.random.Generator,
    lam: float,
    n: int,
    dev_sq: float,
    sigma2: float,
    cauchy_scale: float,
    w: float = 1.0,
    max_steps: int = 50,
) -> float:
    """One slice-sampling update of log(lambda) under
    xi ~ N(mu, sigma2 * lambda), lambda ~ Half-Cauchy(0, cauchy_scale)."""

    def logpost(u: float) -> float:
        return (
            (1.0 - n / 2.0) * u
            - dev_sq * math.exp(-u) / (2.0 * sigma2)
            - np.logaddexp(0.0, 2.0 * (u - math.log(cauchy_scale)))
        )

    u0 = math.log(lam)
    log_y = logpost(u0) + math.log(rng.uniform(1e-300, 1.0))
    lo = u0 - w * rng.uniform()
    hi = lo + w
    steps = max_steps
    while steps > 0 and logpost(lo) > log_y:
        lo -= w
        steps -= 1
    steps = max_steps
    while steps > 0 and logpost(hi) > log_y:
        hi += w
        steps -= 1
    for _ in range(1000):
        u = rng.uniform(lo, hi)
        if logpost(u) > log_y:
            return math.exp(u)
        if u < u0:
            lo = u
        else:
            hi = u
    return lam  # pragma: no cover - shrinking always terminates in practice


def gibbs_step(
    state: ChainState,
    design: Design,
    y: np.ndarray,
    prior: PriorSpec,
    rng: np.random.Generator,
    *,
    xty: np.ndarray | None = None,
    diag: dict | None = None,
) -> ChainState:
    """One full scan: abilities block, prior mean, noise variance, latent
    mixing scales, shrinkage parameter.  Numerically rejected variance draws
    are retried and counted in ``diag['retries']``."""
    if diag is None:
        diag = {"retries": 0}
    if xty is None:
        xty = design.xty(y)
    n = design.n_free
    kind = prior.kind

    if kind in (1, 2):
        prior_var = state.omega
    else:
        prior_var = np.full(n, state.sigma2 * state.lam)
    xi_free = _draw_xi_free(design, xty, state.sigma2, prior_var, state.mu, rng)
    xi = np.zeros(design.L)
    xi[design.free] = xi_free

    prec_mu = 1.0 / prior.mu_sd**2 + float((1.0 / prior_var).sum())
    mean_mu = float((xi_free / prior_var).sum()) / prec_mu
    mu = mean_mu + rng.standard_normal() / math.sqrt(prec_mu)

    resid = y - design.mean_diffs(xi)
    rss = float(resid @ resid)
    dev_sq = float(((xi_free - mu) ** 2).sum())
    n_obs = design.N
    if kind == 1:
        # sigma2 enters only the likelihood here; with no data its improper
        # prior has no proper conditional, so it is simply held.
        sigma2 = state.sigma2 if n_obs == 0 else _draw_inv_gamma(
            rng, n_obs / 2.0, rss / 2.0, diag
        )
    elif kind == 2:
        sigma2 = _draw_inv_gamma(
            rng,
            n_obs / 2.0 + n,
            (rss + state.lam * float(state.omega.sum())) / 2.0,
            diag,
        )
    else:
        sigma2 = _draw_inv_gamma(
            rng, (n_obs + n) / 2.0, (rss + dev_sq / state.lam) / 2.0, diag
        )

    lam = state.lam
    if kind == 1:
        omega = _draw_omega(rng, xi_free, mu, 1.0 / prior.laplace_scale**2, diag)
    elif kind == 2:
        omega = _draw_omega(rng, xi_free, mu, lam / sigma2, diag)
        lam = float(
            rng.gamma(
                prior.gamma_shape + n,
                1.0 / (prior.gamma_rate + float(omega.sum()) / (2.0 * sigma2)),
            )
        )
    else:
        lam = _slice_sample_log_lambda(
            rng, lam, n, dev_sq, sigma2, prior.cauchy_scale
        )
        omega = np.full(n, sigma2 * lam)

    return ChainState(xi=xi, mu=mu, sigma2=sigma2, lam=lam, omega=omega)


@dataclass(frozen=True)
class SamplerResult:
    """Kept posterior draws plus everything diagnostics need.

    ``draws`` concatenates the chains in chain order and is truncated to the
    configured target; ``chain_draws`` keeps the untruncated per-chain
    layout for split-chain diagnostics.  ``sigma2``/``mu``/``lam`` align with
    ``draws`` row for row.
    """

    draws: PosteriorDraws
    sigma2: np.ndarray
    mu: np.ndarray
    lam: np.ndarray
    chain_draws: np.ndarray
    reference: int
    retries: int
    config: SamplerConfig
    prior: PriorSpec

    def diagnostics(self) -> dict:
        rhat = split_rhat(self.chain_draws)
        finite = rhat[np.isfinite(rhat)]
        return {
            "prior": self.prior.kind,
            "chains": self.config.chains,
            "kept_per_chain": self.config.kept_per_chain,
            "burn_in": self.config.burn_in,
            "thin": self.config.thin,
            "seed": self.config.seed,
            "reference_index": self.reference,
            "retries": self.retries,
            "rhat_max": float(finite.max()) if finite.size else float("nan"),
            "rhat": {
                eid: float(r)
                for eid, r in zip(self.draws.entity_ids, rhat)
            },
        }


def _chain_rng(seed: int, chain: int) -> np.random.Generator:
    # Counter-based streams keyed by (seed, chain): results do not depend on
    # whether chains run serially or in parallel.
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(chain,)))
    )


def _init_state(design: Design, y: np.ndarray, rng: np.random.Generator) -> ChainState:
    n = design.n_free
    xi = np.zeros(design.L)
    xi[design.free] = rng.normal(0.0, 1.0, n)
    base = float(np.var(y)) if y.size > 1 else 1.0
    sigma2 = max(base, 1e-2) * rng.uniform(0.5, 2.0)
    return ChainState(
        xi=xi,
        mu=float(rng.normal(0.0, 1.0)),
        sigma2=sigma2,
        lam=1.0,
        omega=np.ones(n),
    )


def _run_single_chain(args) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, int]:
    chain, config, design, y, prior = args
    rng = _chain_rng(config.seed, chain)
    diag = {"retries": 0}
    xty = design.xty(y)
    state = _init_state(design, y, rng)
    for _ in range(config.burn_in):
        state = gibbs_step(state, design, y, prior, rng, xty=xty, diag=diag)
    kept = config.kept_per_chain
    xi_out = np.empty((kept, design.L))
    sig_out = np.empty(kept)
    mu_out = np.empty(kept)
    lam_out = np.empty(kept)
    for k in range(kept):
        for _ in range(config.thin):
            state = gibbs_step(state, design, y, prior, rng, xty=xty, diag=diag)
        xi_out[k] = state.xi
        sig_out[k] = state.sigma2
        mu_out[k] = state.mu
        lam_out[k] = state.lam
    return xi_out, sig_out, mu_out, lam_out, diag["retries"]


def run_chains(
    config: SamplerConfig,
    table: EncounterTable,
    prior: PriorSpec,
    *,
    reference: int | None = None,
    entity_ids=None,
    workers: int = 1,
) -> SamplerResult:
    """Run independent chains, discard burn-in, thin, and concatenate the
    kept draws to the configured target.  Reproducible given the seed, with
    or without parallel workers."""
    design = build_design(table, reference=reference)
    if design.n_free == 0:
        raise SamplerError("need at least two players to compare")
    if (
        config.max_iterations is not None
        and config.iterations_per_chain > config.max_iterations
    ):
        raise SamplerError(
            f"target of {config.target_draws} draws needs "
            f"{config.iterations_per_chain} iterations per chain "
            f"(burn_in {config.burn_in} + thin {config.thin} x "
            f"{config.kept_per_chain} kept), above the budget of "
            f"{config.max_iterations}"
        )
    if entity_ids is None:
        width = max(3, len(str(design.L - 1)))
        entity_ids = tuple(f"p{i:0{width}d}" for i in range(design.L))
    y = np.asarray(table.diff, dtype=np.float64)
    jobs = [(c, config, design, y, prior) for c in range(config.chains)]
    if workers > 1 and config.chains > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(_run_single_chain, jobs))
    else:
        outputs = [_run_single_chain(job) for job in jobs]
    chain_draws = np.stack([out[0] for out in outputs])
    target = config.target_draws
    values = chain_draws.reshape(-1, design.L)[:target]
    sigma2 = np.concatenate([out[1] for out in outputs])[:target]
    mu = np.concatenate([out[2] for out in outputs])[:target]
    lam = np.concatenate([out[3] for out in outputs])[:target]
    retries = int(sum(out[4] for out in outputs))
    draws = PosteriorDraws(values=values, entity_ids=tuple(entity_ids))
    return SamplerResult(
        draws=draws,
        sigma2=sigma2,
        mu=mu,
        lam=lam,
        chain_draws=chain_draws,
        reference=design.reference,
        retries=retries,
        config=config,
        prior=prior,
    )


def lineup_draws(
    player_draws: PosteriorDraws,
    lineups,
    ids=None,
) -> PosteriorDraws:
    """Ability draws of lineups as sums of their players' ability draws.

    ``lineups`` is a sequence of 5-index collections into the player draws;
    it must already be deduplicated.  Default entity ids are the canonical
    lineup keys: the sorted player ids joined with '|'.
    """
    arr = np.asarray([sorted(int(i) for i in lu) for lu in lineups], dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != 5:
        raise ValueError("each lineup must contain exactly five player indices")
    if arr.size and (arr.min() < 0 or arr.max() >= player_draws.L):
        raise IndexError("player index out of range")
    for row in arr:
        if np.unique(row).size != 5:
            raise ValueError("a lineup cannot repeat a player")
    keys = ["|".join(sorted(player_draws.entity_ids[i] for i in row)) for row in arr]
    if len(set(keys)) != len(keys):
        raise ValueError("lineups must be deduplicated")
    values = player_draws.values[:, arr].sum(axis=2)
    if ids is None:
        ids = keys
    return PosteriorDraws(values=values, entity_ids=tuple(ids))


def split_rhat(chain_draws: np.ndarray) -> np.ndarray:
    """Split-chain potential scale reduction per column.

    Each chain's kept draws are split in half; the statistic compares
    between- and within-sequence variance across the 2 x chains halves.
    Constant columns (the reference ability) report exactly 1.
    """
    chain_draws = np.asarray(chain_draws, dtype=np.float64)
    if chain_draws.ndim == 2:
        chain_draws = chain_draws[None, :, :]
    c, n, l = chain_draws.shape
    half = n // 2
    if half < 2:
        raise ValueError("need at least 4 kept draws per chain for split R-hat")
    seqs = np.concatenate(
        [chain_draws[:, :half, :], chain_draws[:, half : 2 * half, :]], axis=0
    )
    means = seqs.mean(axis=1)
    within = seqs.var(axis=1, ddof=1).mean(axis=0)
    between = half * means.var(axis=0, ddof=1)
    var_plus = (half - 1) / half * within + between / half
    out = np.ones(l)
    ok = within > 0
    out[ok] = np.sqrt(var_plus[ok] / within[ok])
    return out
