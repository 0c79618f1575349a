"""Command-line pipeline: league, sample, statements, optimize, simulate.

Exit codes: 0 on success, 1 on a domain error (bad data, cyclic rankings,
sampler failure), 2 on a usage error (bad flags, missing input file).  Every
subcommand persists a manifest next to its outputs so runs can be replayed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, dataio, simlab
from .optimizer import Action, RewardConfig, attach_scores, optimize
from .rankgraph import CycleError, derive_rankings
from .sampler import PriorSpec, SamplerConfig, SamplerError, lineup_draws, run_chains
from .statements import count_pairwise, global_probability, global_set

_DOMAIN_ERRORS = (
    dataio.DataFormatError,
    CycleError,
    SamplerError,
    ValueError,
    KeyError,
    RuntimeError,
)


def _default_workers() -> int:
    env = os.environ.get("CREDRANK_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _unit_float(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"{value} is outside [0, 1]")
    return value


def _require_inputs(args, *paths) -> int | None:
    for p in paths:
        if p is not None and not Path(p).is_file():
            print(f"error: input file not found: {p}", file=sys.stderr)
            return 2
    return None


def _prepare_outdir(args, inputs) -> Path:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    resolved_inputs = {Path(p).resolve() for p in inputs if p is not None}
    args._outdir = outdir
    args._inputs = resolved_inputs
    return outdir


def _output_path(args, name: str) -> Path:
    path = args._outdir / name
    if path.resolve() in args._inputs:
        raise RuntimeError(f"output {path} would overwrite an input")
    return path


def _write_manifest(args, inputs) -> None:
    manifest = {
        "subcommand": args.command,
        "inputs": [str(p) for p in inputs if p is not None],
        "config": getattr(args, "config", None),
        "seed": getattr(args, "seed", None),
        "output_dir": str(args._outdir),
        "version": __version__,
        "argv": sys.argv[1:] if sys.argv[0].endswith(("credrank", "cli.py")) else None,
        "args": {
            k: v
            for k, v in vars(args).items()
            if not k.startswith("_") and k != "func" and _jsonable(v)
        },
    }
    with open(_output_path(args, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def _jsonable(v) -> bool:
    return isinstance(v, (str, int, float, bool, list, tuple, type(None)))


def _reward_config_from(args) -> RewardConfig:
    fields: dict = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
        if "box" in raw:
            raw["box"] = tuple(tuple(pair) for pair in raw["box"])
        if "alpha_grid" in raw:
            raw["alpha_grid"] = tuple(raw["alpha_grid"])
        if "starts" in raw and raw["starts"] is not None:
            raw["starts"] = tuple(Action(*s) for s in raw["starts"])
        fields.update(raw)
    if getattr(args, "h", None):
        fields["h"] = args.h
    if getattr(args, "epsilon", None) is not None:
        fields["epsilon"] = args.epsilon
    if getattr(args, "delta0", None) is not None:
        fields["delta0"] = args.delta0
    if getattr(args, "delta_min", None) is not None:
        fields["delta_min"] = args.delta_min
    return RewardConfig(**fields)


# -- subcommands -------------------------------------------------------------


def cmd_league(args) -> int:
    league = simlab.make_league(
        n_teams=args.teams,
        roster=args.roster,
        n_encounters=args.encounters,
        seed=args.seed,
        ability_sd=args.ability_sd,
        noise_sd=args.noise_sd,
    )
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    dataio.write_encounters(league.table, league.registry, args.out)
    print(
        f"wrote {league.table.N} encounters, {league.registry.n_players} players, "
        f"{league.registry.n_lineups} lineups -> {args.out}"
    )
    return 0


def cmd_sample(args) -> int:
    bad = _require_inputs(args, args.encounters)
    if bad:
        return bad
    _prepare_outdir(args, [args.encounters])
    table, registry = dataio.parse_encounters(args.encounters)
    config = SamplerConfig(
        chains=args.chains,
        burn_in=args.burn_in,
        thin=args.thin,
        target_draws=args.target_draws,
        seed=args.seed,
        max_iterations=args.max_iterations,
    )
    result = run_chains(
        config,
        table,
        PriorSpec(kind=args.prior),
        reference=registry.reference_index,
        entity_ids=registry.player_keys,
        workers=args.workers,
    )
    dataio.write_draws(result.draws, _output_path(args, "draws_players.csv"))
    dataio.write_column(_output_path(args, "sigma2.csv"), "sigma2", result.sigma2)
    if args.emit_lineups:
        lineups = [
            [registry.player_index[k] for k in key] for key in registry.lineup_keys()
        ]
        dataio.write_draws(
            lineup_draws(result.draws, lineups),
            _output_path(args, "draws_lineups.csv"),
        )
    with open(_output_path(args, "diagnostics.json"), "w", encoding="utf-8") as fh:
        json.dump(result.diagnostics(), fh, indent=2)
        fh.write("\n")
    _write_manifest(args, [args.encounters])
    diag = result.diagnostics()
    print(
        f"sampled {result.draws.M} draws x {result.draws.L} players "
        f"(prior {args.prior}, rhat_max {diag['rhat_max']:.3f}) -> {args._outdir}"
    )
    return 0


def _load_draws(args) -> "dataio.PosteriorDraws":
    draws = dataio.read_draws(args.draws)
    entities = None
    if getattr(args, "entities", None):
        entities = [e.strip() for e in args.entities.split(",") if e.strip()]
    elif getattr(args, "entities_file", None):
        entities = [
            line.strip()
            for line in Path(args.entities_file).read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
    if entities:
        draws = dataio.project_draws(draws, entities)
    return draws


def cmd_statements(args) -> int:
    bad = _require_inputs(args, args.draws, getattr(args, "entities_file", None))
    if bad:
        return bad
    _prepare_outdir(args, [args.draws])
    draws = _load_draws(args)
    counts = count_pairwise(draws)
    statement = global_probability(
        global_set(draws, counts, args.alpha, args.t, args.gamma), args.q
    )
    statement = attach_scores(statement, RewardConfig(h=args.h))
    report = dataio.export_statement_report(statement, draws.entity_ids, counts)
    with open(_output_path(args, "statement.json"), "w", encoding="utf-8") as fh:
        fh.write(report)
    if args.caterpillar:
        with open(_output_path(args, "caterpillar.csv"), "w", encoding="utf-8") as fh:
            fh.write(dataio.export_caterpillar(draws))
    if args.graph:
        if args.t != 0.0 or args.q != 0.0:
            print("error: --graph requires --t 0 --q 0", file=sys.stderr)
            return 2
        graph = derive_rankings(statement)
        with open(_output_path(args, "rankings.dot"), "w", encoding="utf-8") as fh:
            fh.write(dataio.export_graph(graph, draws.entity_ids))
    _write_manifest(args, [args.draws])
    print(
        f"statement at (alpha={args.alpha}, t={args.t}, gamma={args.gamma}, "
        f"q={args.q}): {statement.g} members, prob {statement.prob:.4f} "
        f"-> {args._outdir}"
    )
    return 0


def cmd_optimize(args) -> int:
    bad = _require_inputs(args, args.draws, getattr(args, "config", None))
    if bad:
        return bad
    _prepare_outdir(args, [args.draws, getattr(args, "config", None)])
    draws = _load_draws(args)
    counts = count_pairwise(draws)
    config = _reward_config_from(args)
    action, statement = optimize(draws, counts, config)
    search_record = {
        "search": {
            "optimal_action": list(action.astuple()),
            "starts": [list(s.astuple()) for s in config.start_points()],
            "h": config.h,
            "epsilon": config.epsilon,
            "box": [list(pair) for pair in config.box],
            "delta0": config.delta0,
            "delta_min": config.delta_min,
        }
    }
    report = dataio.export_statement_report(
        statement, draws.entity_ids, counts, extra=search_record
    )
    with open(_output_path(args, "statement.json"), "w", encoding="utf-8") as fh:
        fh.write(report)
    if action.t == 0.0 and action.q == 0.0:
        graph = derive_rankings(statement)
        with open(_output_path(args, "rankings.dot"), "w", encoding="utf-8") as fh:
            fh.write(dataio.export_graph(graph, draws.entity_ids))
    _write_manifest(args, [args.draws, getattr(args, "config", None)])
    print(
        f"optimal action (alpha={action.alpha}, t={action.t}, "
        f"gamma={action.gamma}, q={action.q}): {statement.g} members, "
        f"prob {statement.prob:.4f}, reward {statement.reward:.4f} -> {args._outdir}"
    )
    return 0


def cmd_simulate(args) -> int:
    bad = _require_inputs(args, args.encounters)
    if bad:
        return bad
    _prepare_outdir(args, [args.encounters])
    table, registry = dataio.parse_encounters(args.encounters)
    sampler_config = SamplerConfig(
        chains=args.chains,
        burn_in=args.burn_in,
        thin=args.thin,
        target_draws=args.target_draws,
        seed=args.seed,
    )
    metrics = simlab.run_study(
        table,
        registry,
        ks=tuple(args.k),
        ms=tuple(args.m),
        ss=tuple(args.s),
        replicates=args.replicates,
        seed=args.seed,
        sampler_config=sampler_config,
        reward_config=RewardConfig(epsilon=args.epsilon),
    )
    with open(_output_path(args, "metrics.csv"), "w", encoding="utf-8") as fh:
        fh.write(simlab.metrics_to_csv(metrics))
    _write_manifest(args, [args.encounters])
    print(f"simulated {len(metrics)} cells -> {args._outdir}")
    return 0


# -- parser ------------------------------------------------------------------


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="credrank",
        description="Uncertainty-calibrated ordering statements from posterior draws.",
    )
    parser.add_argument("--version", action="version", version=f"credrank {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    league = sub.add_parser("league", help="generate a synthetic encounter file")
    league.add_argument("--teams", type=int, default=8)
    league.add_argument("--roster", type=int, default=10)
    league.add_argument("--encounters", type=int, default=850)
    league.add_argument("--seed", type=int, default=0)
    league.add_argument("--ability-sd", type=float, default=1.0)
    league.add_argument("--noise-sd", type=float, default=8.0)
    league.add_argument("--out", required=True, help="output CSV path")
    league.set_defaults(func=cmd_league)

    sample = sub.add_parser("sample", help="fit the lineup model and emit draws")
    sample.add_argument("encounters", help="encounter CSV")
    sample.add_argument("--prior", type=int, choices=(1, 2, 3), default=3)
    sample.add_argument("--chains", type=int, default=13)
    sample.add_argument("--burn-in", type=int, default=2000)
    sample.add_argument("--thin", type=int, default=20)
    sample.add_argument("--target-draws", type=int, default=10000)
    sample.add_argument("--max-iterations", type=int, default=None)
    sample.add_argument("--seed", type=int, default=0)
    sample.add_argument("--workers", type=int, default=_default_workers())
    sample.add_argument("--emit-lineups", action="store_true")
    sample.add_argument("--out", required=True, help="output directory")
    sample.set_defaults(func=cmd_sample)

    statements = sub.add_parser("statements", help="statement at a fixed action")
    statements.add_argument("draws", help="draws CSV")
    statements.add_argument("--alpha", type=_unit_float, default=0.025)
    statements.add_argument("--t", type=_unit_float, default=0.1)
    statements.add_argument("--gamma", type=_unit_float, default=0.05)
    statements.add_argument("--q", type=_unit_float, default=0.1)
    statements.add_argument("--h", choices=("identity", "log1p"), default="identity")
    statements.add_argument("--entities", default=None, help="comma-separated ids")
    statements.add_argument("--entities-file", default=None, help="one id per line")
    statements.add_argument("--graph", action="store_true", help="export rankings.dot")
    statements.add_argument("--caterpillar", action="store_true")
    statements.add_argument("--out", required=True, help="output directory")
    statements.set_defaults(func=cmd_statements)

    optimize_p = sub.add_parser("optimize", help="search for the optimal statement")
    optimize_p.add_argument("draws", help="draws CSV")
    optimize_p.add_argument("--config", default=None, help="RewardConfig JSON")
    optimize_p.add_argument("--h", choices=("identity", "log1p"), default=None)
    optimize_p.add_argument("--epsilon", type=float, default=None)
    optimize_p.add_argument("--delta0", type=float, default=None)
    optimize_p.add_argument("--delta-min", type=float, default=None)
    optimize_p.add_argument("--entities", default=None)
    optimize_p.add_argument("--entities-file", default=None)
    optimize_p.add_argument("--out", required=True, help="output directory")
    optimize_p.set_defaults(func=cmd_optimize)

    simulate = sub.add_parser("simulate", help="run the simulation study")
    simulate.add_argument("encounters", help="base encounter CSV")
    simulate.add_argument("--replicates", type=int, default=5)
    simulate.add_argument("--k", type=_int_list, default=[3], help="truth priors")
    simulate.add_argument("--m", type=_int_list, default=[1, 3], help="fit priors")
    simulate.add_argument("--s", type=_int_list, default=[1, 2])
    simulate.add_argument("--epsilon", type=float, default=0.1)
    simulate.add_argument("--chains", type=int, default=2)
    simulate.add_argument("--burn-in", type=int, default=300)
    simulate.add_argument("--thin", type=int, default=2)
    simulate.add_argument("--target-draws", type=int, default=500)
    simulate.add_argument("--seed", type=int, default=0)
    simulate.add_argument("--workers", type=int, default=_default_workers())
    simulate.add_argument("--out", required=True, help="output directory")
    simulate.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _DOMAIN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
