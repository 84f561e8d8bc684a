"""Conversion of weighted designs into small unweighted experiment batches.

A weighted design assigns fractional weights that cannot be realized with a
handful of lab experiments.  Instead of rounding weights to replication
counts, the conversion first sieves out the least important support points
while the retained total weight stays at or above a floor, and then -- if
still too many points remain -- picks the subset of the allowed size with the
best two-stage criterion value.  Each survivor appears exactly once per
batch; replications across a campaign arise naturally when later iterations
re-propose earlier points.
"""

from __future__ import annotations

from itertools import combinations
from math import comb

import numpy as np

from .criteria import TwoStageContext, criterion_value
from .errors import DomainError, InfeasibleDesignError
from .modeling import (
    NoiseModel,
    ParametricModel,
    UnweightedDesign,
    WeightedDesign,
    one_point_info_bank,
)

#: Largest number of subsets enumerated exhaustively before the greedy
#: backward elimination takes over.
EXHAUSTIVE_LIMIT = 100_000


def sieve(xi: WeightedDesign, min_total_weight: float) -> UnweightedDesign:
    """Drop the least important support points while the rest keep enough weight.

    Points are removed smallest weight first (ties broken lexicographically by
    coordinates) for as long as the remaining total weight stays >= the floor.
    Survivors are returned once each, ordered by descending weight.
    """
    if not 0.0 < min_total_weight <= 1.0:
        raise DomainError(f"weight floor {min_total_weight} outside (0, 1]")
    pts = xi.support_points
    w = xi.support_weights.copy()
    removal_order = sorted(range(len(w)), key=lambda i: (w[i], *pts[i]))
    remaining = float(w.sum())
    removed = set()
    for i in removal_order:
        if len(removed) == len(w) - 1:
            break  # never remove the last point
        if remaining - w[i] >= min_total_weight:
            removed.add(i)
            remaining -= w[i]
    keep = [i for i in range(len(w)) if i not in removed]
    keep.sort(key=lambda i: (-w[i], *pts[i]))
    return UnweightedDesign(pts[keep])


def _subset_value(
    ctx: TwoStageContext,
    bank: np.ndarray,
    prior: np.ndarray,
    indices: tuple[int, ...],
) -> float:
    M_subset = bank[list(indices)].mean(axis=0)
    return criterion_value(ctx.criterion, ctx.alpha * prior + (1.0 - ctx.alpha) * M_subset)


def select_batch(
    ctx: TwoStageContext,
    survivors: UnweightedDesign,
    max_batch_size: int,
    model: ParametricModel,
    noise: NoiseModel,
) -> UnweightedDesign:
    """Best subdesign of at most ``max_batch_size`` experiments.

    Small instances are enumerated exhaustively (provably optimal among
    subsets); larger ones fall back to greedy backward elimination, dropping
    whichever point costs the criterion least.  Ties always resolve to the
    lexicographically smallest coordinate set, so the choice is deterministic.
    """
    if max_batch_size < 1:
        raise DomainError("batch size bound must be at least 1")
    n = survivors.size
    if n <= max_batch_size:
        return survivors
    pts = survivors.points
    bank = one_point_info_bank(model, pts, ctx.theta_ref, noise)
    prior = ctx.prior_info(model, noise)

    def sort_key(indices: tuple[int, ...]):
        return sorted(map(tuple, pts[list(indices)]))

    if comb(n, max_batch_size) <= EXHAUSTIVE_LIMIT:
        best: tuple[int, ...] | None = None
        best_value = np.inf
        for subset in combinations(range(n), max_batch_size):
            value = _subset_value(ctx, bank, prior, subset)
            if value < best_value or (
                value == best_value and best is not None and sort_key(subset) < sort_key(best)
            ):
                best, best_value = subset, value
        if best is None or not np.isfinite(best_value):
            raise InfeasibleDesignError("every candidate subdesign has infinite criterion value")
        return UnweightedDesign(pts[list(best)])

    current = list(range(n))
    while len(current) > max_batch_size:
        best_drop = None
        best_value = np.inf
        for drop in current:
            rest = tuple(i for i in current if i != drop)
            value = _subset_value(ctx, bank, prior, rest)
            if value < best_value or (
                value == best_value
                and best_drop is not None
                and sort_key(rest) < sort_key(tuple(i for i in current if i != best_drop))
            ):
                best_drop, best_value = drop, value
        if best_drop is None or not np.isfinite(best_value):
            raise InfeasibleDesignError("greedy elimination ran out of finite-value subdesigns")
        current.remove(best_drop)
    return UnweightedDesign(pts[current])
