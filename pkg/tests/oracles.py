"""Brute-force reference implementations used by the tests.

Everything here enumerates the definitions directly: per-draw and per-pair
loops, thresholds as exact rationals (Fractions or scaled integers).  None
of it touches the package's statement machinery, so agreement is evidence,
not tautology.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np


def wins_matrix(values) -> list[list[int]]:
    values = np.asarray(values)
    m, l = values.shape
    wins = [[0] * l for _ in range(l)]
    for i in range(m):
        for a in range(l):
            for b in range(l):
                if a != b and values[i][a] > values[i][b]:
                    wins[a][b] += 1
    return wins


def local_sets(wins, m: int, entity: int, alpha: Fraction) -> tuple[list[int], list[int]]:
    l = len(wins)
    below = [
        k for k in range(l) if k != entity and Fraction(wins[entity][k], m) > 1 - alpha
    ]
    above = [
        k for k in range(l) if k != entity and Fraction(wins[k][entity], m) > 1 - alpha
    ]
    return below, above


def success_count(values, entity: int, below, above, draw: int) -> int:
    succ = 0
    for k in above:
        if values[draw][k] > values[draw][entity]:
            succ += 1
    for k in below:
        if values[draw][entity] > values[draw][k]:
            succ += 1
    return succ


def local_bits(values, entity: int, below, above, t: Fraction) -> list[int]:
    values = np.asarray(values)
    m = values.shape[0]
    n = len(set(below) | set(above))
    if n == 0:
        return [1] * m
    bits = []
    for i in range(m):
        succ = success_count(values, entity, below, above, i)
        bits.append(1 if Fraction(succ, 1) >= (1 - t) * n else 0)
    return bits


def members_and_bits(values, wins, alpha: Fraction, t: Fraction, gamma: Fraction):
    """Member entities at (alpha, t, gamma) plus each entity's local data."""
    values = np.asarray(values)
    m, l = values.shape
    members = []
    per_entity = []
    for entity in range(l):
        below, above = local_sets(wins, m, entity, alpha)
        bits = local_bits(values, entity, below, above, t)
        per_entity.append((below, above, bits))
        if Fraction(sum(bits), m) >= 1 - gamma:
            members.append(entity)
    return members, per_entity


def global_bits(per_entity, members, m: int, q: Fraction) -> list[int]:
    g = len(members)
    if g == 0:
        return [1] * m
    floor_qg = math.floor(q * g)
    bits = []
    for i in range(m):
        held = sum(per_entity[e][2][i] for e in members)
        bits.append(1 if held >= g - floor_qg else 0)
    return bits


def cost(per_entity, members, t: Fraction, q: Fraction, h) -> float:
    g = len(members)
    if g == 0:
        return 0.0
    head = h(g) - h(math.floor(q * g))
    body = 0.0
    for e in members:
        below, above, _ = per_entity[e]
        n = len(set(below) | set(above))
        body += h(n) - h(math.floor(t * n))
    return head * body


def reward(per_entity, members, m: int, t: Fraction, q: Fraction, h, epsilon) -> float:
    bits = global_bits(per_entity, members, m, q)
    count = sum(bits)
    if epsilon is not None and Fraction(count, m) < 1 - Fraction(epsilon):
        return 0.0
    return cost(per_entity, members, t, q, h) * (count / m)


def point_indicator(truth, entity, below, above, t: Fraction) -> bool:
    n = len(set(below) | set(above))
    if n == 0:
        return True
    succ = sum(1 for k in above if truth[k] > truth[entity]) + sum(
        1 for k in below if truth[entity] > truth[k]
    )
    return Fraction(succ, 1) >= (1 - t) * n


def point_global(truth, per_entity, members, t: Fraction, q: Fraction) -> bool:
    g = len(members)
    if g == 0:
        return True
    held = sum(
        1
        for e in members
        if point_indicator(truth, e, per_entity[e][0], per_entity[e][1], t)
    )
    return held >= g - math.floor(q * g)


def reachability_closure(nodes, edges) -> set[tuple[int, int]]:
    """Floyd-Warshall style transitive closure."""
    nodes = sorted(nodes)
    reach = {(a, b) for a, b in edges}
    for mid in nodes:
        for a in nodes:
            for b in nodes:
                if (a, mid) in reach and (mid, b) in reach:
                    reach.add((a, b))
    return reach


def percentile_type7(data, p: float) -> float:
    """Linear interpolation between order statistics."""
    xs = sorted(float(v) for v in data)
    n = len(xs)
    if n == 1:
        return xs[0]
    h = (n - 1) * p
    lo = math.floor(h)
    hi = min(lo + 1, n - 1)
    return xs[lo] + (h - lo) * (xs[hi] - xs[lo])


def mean_diffs_naive(xi, lineup_a, lineup_b) -> list[float]:
    out = []
    for row_a, row_b in zip(lineup_a, lineup_b):
        total = 0.0
        for k in row_a:
            total += xi[k]
        for k in row_b:
            total -= xi[k]
        out.append(total)
    return out


def lineup_sums_naive(values, lineups) -> list[list[float]]:
    values = np.asarray(values)
    out = []
    for i in range(values.shape[0]):
        row = []
        for lineup in lineups:
            row.append(sum(values[i][k] for k in lineup))
        out.append(row)
    return out
