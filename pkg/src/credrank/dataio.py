"""Encounter-file parsing, the entity registry, and report/graph exporters.

The encounter CSV is this package's own on-disk format (one row per
encounter, header mandatory, UTF-8, comma separated):

    encounter_id,team_a,team_b,player_a1,...,player_a5,player_b1,...,player_b5,points_a,points_b

Players are keyed as ``TEAM_Name`` at parse time so that a player who moves
between teams mid-season becomes two distinct entities.  Draw matrices are
CSV as well: a header row of entity ids, then one row per draw with
round-trip-exact decimal reals.
"""

from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import dataclass

import numpy as np

from .rankgraph import RankingGraph
from .statements import ComparisonCounts, GlobalStatement, PosteriorDraws

__all__ = [
    "DataFormatError",
    "ENCOUNTER_COLUMNS",
    "EncounterRecord",
    "EncounterTable",
    "Registry",
    "parse_encounters",
    "write_encounters",
    "encounters_to_csv",
    "to_records",
    "build_table",
    "subset",
    "project_draws",
    "read_draws",
    "write_draws",
    "read_column",
    "write_column",
    "export_statement_report",
    "parse_statement_report",
    "export_graph",
    "export_caterpillar",
]


class DataFormatError(Exception):
    """Malformed or inconsistent input data."""


ENCOUNTER_COLUMNS: tuple[str, ...] = (
    "encounter_id",
    "team_a",
    "team_b",
    "player_a1",
    "player_a2",
    "player_a3",
    "player_a4",
    "player_a5",
    "player_b1",
    "player_b2",
    "player_b3",
    "player_b4",
    "player_b5",
    "points_a",
    "points_b",
)


@dataclass(frozen=True)
class EncounterRecord:
    encounter_id: str
    team_a: str
    team_b: str
    players_a: tuple[str, ...]
    players_b: tuple[str, ...]
    points_a: int
    points_b: int

    @property
    def diff(self) -> int:
        return self.points_a - self.points_b

    def keys_a(self) -> tuple[str, ...]:
        return tuple(f"{self.team_a}_{p}" for p in self.players_a)

    def keys_b(self) -> tuple[str, ...]:
        return tuple(f"{self.team_b}_{p}" for p in self.players_b)


@dataclass(frozen=True)
class PlayerEntry:
    key: str
    index: int
    team: str
    name: str
    appearances: int


@dataclass(frozen=True)
class Registry:
    """Dense indices for players and lineups plus bookkeeping for teams,
    appearance counts, and the identifiability reference."""

    players: tuple[PlayerEntry, ...]
    player_index: dict[str, int]
    lineup_index: dict[tuple[str, ...], int]
    teams: dict[str, tuple[str, ...]]

    @property
    def n_players(self) -> int:
        return len(self.players)

    @property
    def n_lineups(self) -> int:
        return len(self.lineup_index)

    @property
    def player_keys(self) -> tuple[str, ...]:
        return tuple(entry.key for entry in self.players)

    def lineup_keys(self) -> tuple[tuple[str, ...], ...]:
        out: list[tuple[str, ...]] = [()] * len(self.lineup_index)
        for key, idx in self.lineup_index.items():
            out[idx] = key
        return tuple(out)

    def lineup_ids(self) -> tuple[str, ...]:
        return tuple("|".join(key) for key in self.lineup_keys())

    @property
    def reference_key(self) -> str:
        # Most frequently appearing player; ties break on the smaller key.
        if not self.players:
            raise DataFormatError("empty registry has no reference player")
        return min(self.players, key=lambda e: (-e.appearances, e.key)).key

    @property
    def reference_index(self) -> int:
        return self.player_index[self.reference_key]


def _lineup_key(keys: tuple[str, ...]) -> tuple[str, ...]:
    return tuple(sorted(keys))


@dataclass(frozen=True)
class EncounterTable:
    """Array form of a set of encounters, indexed against a Registry."""

    encounter_ids: tuple[str, ...]
    teams_a: tuple[str, ...]
    teams_b: tuple[str, ...]
    lineup_a: np.ndarray
    lineup_b: np.ndarray
    points_a: np.ndarray
    points_b: np.ndarray
    n_players: int

    @property
    def N(self) -> int:
        return len(self.encounter_ids)

    @property
    def diff(self) -> np.ndarray:
        return self.points_a - self.points_b


def build_table(records) -> tuple[EncounterTable, Registry]:
    """Index a sequence of EncounterRecords into a table and registry.

    Indexing is deterministic in record order: players and lineups get dense
    indices in order of first appearance.
    """
    player_index: dict[str, int] = {}
    entries: list[list] = []  # key, team, name, appearances
    lineup_index: dict[tuple[str, ...], int] = {}
    teams: dict[str, set[str]] = {}
    ids: list[str] = []
    teams_a: list[str] = []
    teams_b: list[str] = []
    la: list[list[int]] = []
    lb: list[list[int]] = []
    pa: list[int] = []
    pb: list[int] = []

    def index_side(team: str, names: tuple[str, ...], keys: tuple[str, ...]) -> list[int]:
        side = []
        for name, key in zip(names, keys):
            idx = player_index.get(key)
            if idx is None:
                idx = len(entries)
                player_index[key] = idx
                entries.append([key, team, name, 0])
                teams.setdefault(team, set()).add(key)
            entries[idx][3] += 1
            side.append(idx)
        return side

    for rec in records:
        keys_a = rec.keys_a()
        keys_b = rec.keys_b()
        if len(set(keys_a + keys_b)) != 10:
            raise DataFormatError(
                f"encounter {rec.encounter_id!r}: lineups overlap or repeat a player"
            )
        if rec.points_a < 0 or rec.points_b < 0:
            raise DataFormatError(
                f"encounter {rec.encounter_id!r}: points must be nonnegative"
            )
        ids.append(rec.encounter_id)
        teams_a.append(rec.team_a)
        teams_b.append(rec.team_b)
        la.append(index_side(rec.team_a, rec.players_a, keys_a))
        lb.append(index_side(rec.team_b, rec.players_b, keys_b))
        pa.append(rec.points_a)
        pb.append(rec.points_b)
        for keys in (keys_a, keys_b):
            lk = _lineup_key(keys)
            if lk not in lineup_index:
                lineup_index[lk] = len(lineup_index)

    registry = Registry(
        players=tuple(
            PlayerEntry(key=k, index=i, team=t, name=n, appearances=c)
            for i, (k, t, n, c) in enumerate(entries)
        ),
        player_index=dict(player_index),
        lineup_index=dict(lineup_index),
        teams={t: tuple(sorted(ps)) for t, ps in teams.items()},
    )
    table = EncounterTable(
        encounter_ids=tuple(ids),
        teams_a=tuple(teams_a),
        teams_b=tuple(teams_b),
        lineup_a=np.array(la, dtype=np.int64).reshape(-1, 5),
        lineup_b=np.array(lb, dtype=np.int64).reshape(-1, 5),
        points_a=np.array(pa, dtype=np.int64),
        points_b=np.array(pb, dtype=np.int64),
        n_players=len(entries),
    )
    return table, registry


def _parse_rows(rows) -> list[EncounterRecord]:
    records = []
    header = next(rows, None)
    if header is None or tuple(h.strip() for h in header) != ENCOUNTER_COLUMNS:
        raise DataFormatError(
            f"line 1: expected header {','.join(ENCOUNTER_COLUMNS)}"
        )
    for lineno, row in enumerate(rows, start=2):
        if not row:
            continue
        if len(row) != len(ENCOUNTER_COLUMNS):
            raise DataFormatError(
                f"line {lineno}: expected {len(ENCOUNTER_COLUMNS)} fields, got {len(row)}"
            )
        try:
            points_a = int(row[13])
            points_b = int(row[14])
        except ValueError as exc:
            raise DataFormatError(f"line {lineno}: bad points field ({exc})") from None
        if points_a < 0 or points_b < 0:
            raise DataFormatError(f"line {lineno}: points must be nonnegative")
        rec = EncounterRecord(
            encounter_id=row[0],
            team_a=row[1],
            team_b=row[2],
            players_a=tuple(row[3:8]),
            players_b=tuple(row[8:13]),
            points_a=points_a,
            points_b=points_b,
        )
        if len(set(rec.keys_a() + rec.keys_b())) != 10:
            raise DataFormatError(
                f"line {lineno}: lineups overlap or repeat a player"
            )
        records.append(rec)
    return records


def parse_encounters(path) -> tuple[EncounterTable, Registry]:
    """Parse an encounter CSV into a table and registry."""
    with open(path, newline="", encoding="utf-8") as fh:
        records = _parse_rows(csv.reader(fh))
    if not records:
        raise DataFormatError("no encounters in file")
    return build_table(records)


def to_records(table: EncounterTable, registry: Registry) -> list[EncounterRecord]:
    keys = registry.player_keys
    records = []
    for i in range(table.N):
        team_a = table.teams_a[i]
        team_b = table.teams_b[i]
        names_a = tuple(keys[j][len(team_a) + 1 :] for j in table.lineup_a[i])
        names_b = tuple(keys[j][len(team_b) + 1 :] for j in table.lineup_b[i])
        records.append(
            EncounterRecord(
                encounter_id=table.encounter_ids[i],
                team_a=team_a,
                team_b=team_b,
                players_a=names_a,
                players_b=names_b,
                points_a=int(table.points_a[i]),
                points_b=int(table.points_b[i]),
            )
        )
    return records


def encounters_to_csv(table: EncounterTable, registry: Registry) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ENCOUNTER_COLUMNS)
    for rec in to_records(table, registry):
        writer.writerow(
            [rec.encounter_id, rec.team_a, rec.team_b]
            + list(rec.players_a)
            + list(rec.players_b)
            + [rec.points_a, rec.points_b]
        )
    return buf.getvalue()


def write_encounters(table: EncounterTable, registry: Registry, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(encounters_to_csv(table, registry))


def subset(
    table: EncounterTable,
    registry: Registry,
    *,
    teams=None,
    players=None,
    lineups=None,
) -> tuple[EncounterTable, Registry]:
    """Filter encounters and reindex densely.

    Exactly one filter may be given: ``teams`` keeps encounters between the
    listed teams; ``players`` keeps encounters whose ten player keys all
    belong to the list; ``lineups`` keeps encounters whose two canonical
    lineup ids are both listed.
    """
    given = [f for f in (teams, players, lineups) if f is not None]
    if len(given) != 1:
        raise ValueError("pass exactly one of teams=, players=, lineups=")
    records = to_records(table, registry)
    if teams is not None:
        tset = set(teams)
        unknown = tset - set(registry.teams)
        if unknown:
            raise KeyError(f"unknown team(s): {sorted(unknown)}")
        kept = [r for r in records if r.team_a in tset and r.team_b in tset]
    elif players is not None:
        pset = set(players)
        unknown = pset - set(registry.player_index)
        if unknown:
            raise KeyError(f"unknown player key(s): {sorted(unknown)[:5]}")
        kept = [
            r
            for r in records
            if set(r.keys_a()) <= pset and set(r.keys_b()) <= pset
        ]
    else:
        lset = set(lineups)
        known = set(registry.lineup_ids())
        unknown = lset - known
        if unknown:
            raise KeyError(f"unknown lineup id(s): {sorted(unknown)[:3]}")
        kept = [
            r
            for r in records
            if "|".join(_lineup_key(r.keys_a())) in lset
            and "|".join(_lineup_key(r.keys_b())) in lset
        ]
    if not kept:
        warnings.warn("filter retained no encounters", stacklevel=2)
    return build_table(kept)


def project_draws(draws: PosteriorDraws, entity_ids) -> PosteriorDraws:
    """Restrict a draw matrix to the listed entities, in the listed order."""
    cols = [draws.column(eid) for eid in entity_ids]
    return PosteriorDraws(values=draws.values[:, cols], entity_ids=tuple(entity_ids))


# -- draw matrices ---------------------------------------------------------


def write_draws(draws: PosteriorDraws, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(draws.entity_ids)
        for row in draws.values:
            writer.writerow([repr(float(v)) for v in row])


def read_draws(path) -> PosteriorDraws:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise DataFormatError("line 1: missing entity-id header")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataFormatError(
                    f"line {lineno}: expected {len(header)} values, got {len(row)}"
                )
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise DataFormatError(f"line {lineno}: bad value ({exc})") from None
    if not rows:
        raise DataFormatError("no draws")
    return PosteriorDraws(values=np.array(rows), entity_ids=tuple(header))


def write_column(path, name: str, values) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([name])
        for v in np.asarray(values).ravel():
            writer.writerow([repr(float(v))])


def read_column(path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader, None)
        return np.array([float(row[0]) for row in reader if row])


# -- exports ---------------------------------------------------------------


def _resolve_ids(ids) -> tuple[str, ...]:
    if isinstance(ids, Registry):
        return ids.player_keys
    return tuple(str(i) for i in ids)


def export_statement_report(
    statement: GlobalStatement,
    ids,
    counts: ComparisonCounts | None = None,
    extra: dict | None = None,
) -> str:
    """Serialize a complete statement as a JSON document: the action, the
    global probability/cost/reward, and per member the below/above id lists
    with their counts and the local probability."""
    if not statement.complete:
        raise ValueError("statement has no q yet; call global_probability")
    labels = _resolve_ids(ids)
    members = []
    for entity, ls in zip(statement.members, statement.locals):
        below = [labels[j] for j in ls.sets.below]
        above = [labels[j] for j in ls.sets.above]
        members.append(
            {
                "id": labels[int(entity)],
                "prob": ls.prob,
                "prob_count": ls.prob_count,
                "n_below": len(below),
                "n_above": len(above),
                "below": below,
                "above": above,
            }
        )
    doc = {
        "action": {
            "alpha": statement.alpha,
            "t": statement.t,
            "gamma": statement.gamma,
            "q": statement.q,
        },
        "draw_count": statement.M,
        "prob": statement.prob,
        "prob_count": statement.prob_count,
        "cost": statement.cost,
        "reward": statement.reward,
        "member_count": statement.g,
        "members": members,
        "ties": counts.tie_summary() if counts is not None else None,
    }
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def parse_statement_report(text: str) -> dict:
    doc = json.loads(text)
    for field in ("action", "prob", "members"):
        if field not in doc:
            raise DataFormatError(f"statement report is missing {field!r}")
    return doc


def export_graph(graph: RankingGraph, ids) -> str:
    """DOT digraph of the Hasse edges; an arrow points at the better entity."""
    labels = _resolve_ids(ids)

    def quote(s: str) -> str:
        return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'

    lines = ["digraph ordering_statement {"]
    for node in graph.nodes:
        lines.append(f"  {quote(labels[node])};")
    for worse, better in sorted(graph.hasse_edges):
        lines.append(f"  {quote(labels[worse])} -> {quote(labels[better])};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_caterpillar(draws: PosteriorDraws) -> str:
    """Per-entity posterior quartiles as CSV, sorted by median.

    Quartiles use linear interpolation between order statistics (the type-7
    definition, numpy's default), so plots rebuild bit-for-bit.
    """
    q1, med, q3 = np.percentile(draws.values, [25.0, 50.0, 75.0], axis=0)
    order = sorted(range(draws.L), key=lambda j: (med[j], draws.entity_ids[j]))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["entity_id", "median", "q1", "q3"])
    for j in order:
        writer.writerow(
            [draws.entity_ids[j], repr(float(med[j])), repr(float(q1[j])), repr(float(q3[j]))]
        )
    return buf.getvalue()
