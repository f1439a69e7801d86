"""Perturbed-Ranking: integral (vertex-weighted) and fractional AdWords variants."""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass

import numpy as np

from ..core import ADWORDS, VERTEX_WEIGHTED, AllocationBuilder, Instance, RunReport
from ..errors import ArgumentError, ModeError
from .balance import _require_admissible

RANK_MODES = ("random", "deterministic", "uniform-grid")


@dataclass(frozen=True)
class RankAssignment:
    """How offline ranks are produced.

    ``uniform-grid`` gives the k-th vertex (0-based) of every offline block
    the rank (k+1)/count.  ``overrides`` pins individual vertices, e.g. a
    special vertex whose rank is swept on a grid.
    """

    mode: str = "random"
    seed: int | None = None
    values: tuple | None = None
    overrides: tuple = ()

    def __post_init__(self):
        if self.mode not in RANK_MODES:
            raise ArgumentError(f"unknown rank mode {self.mode!r}")
        if self.mode == "random" and self.seed is None:
            raise ArgumentError("random ranks need a seed")
        if self.mode == "deterministic" and self.values is None:
            raise ArgumentError("deterministic ranks need explicit values")

    @classmethod
    def random(cls, seed: int) -> "RankAssignment":
        return cls("random", seed=int(seed))

    @classmethod
    def deterministic(cls, values) -> "RankAssignment":
        return cls("deterministic", values=tuple(float(v) for v in values))

    @classmethod
    def uniform_grid(cls, overrides: dict | None = None) -> "RankAssignment":
        return cls("uniform-grid", overrides=tuple(sorted((overrides or {}).items())))

    def ranks(self, instance: Instance) -> np.ndarray:
        n = instance.n_offline
        if self.mode == "random":
            y = np.random.default_rng(self.seed).random(n)
        elif self.mode == "deterministic":
            if len(self.values) != n:
                raise ArgumentError(f"{len(self.values)} ranks given for {n} offline vertices")
            y = np.asarray(self.values, dtype=float)
        else:
            y = np.concatenate([(np.arange(b.count) + 1.0) / b.count for b in instance.offline_blocks])
        y = y.copy()
        for u, v in self.overrides:
            y[int(u)] = float(v)
        if np.any(y < 0.0) or np.any(y > 1.0):
            raise ArgumentError("ranks must lie in [0, 1]")
        return y

    def describe(self) -> str:
        if self.mode == "random":
            return f"random:{self.seed}"
        if self.mode == "uniform-grid":
            return "uniform-grid" + "".join(f";{u}={v!r}" for u, v in self.overrides)
        return "deterministic"


class _SegmentHeads:
    """Per-segment rank orders with monotone read pointers.

    Orders are cached by segment stop; a segment that starts below the cached
    start forces a rebuild, otherwise ids below the start are skipped.
    """

    def __init__(self, key: np.ndarray, available: np.ndarray):
        self.key = key
        self.available = available
        self._cache: dict = {}

    def head(self, start: int, stop: int):
        ent = self._cache.get(stop)
        if ent is None or start < ent[2]:
            ids = np.arange(start, stop)
            order = ids[np.lexsort((ids, -self.key[start:stop]))].tolist()
            ent = [order, 0, start]
            self._cache[stop] = ent
        order, ptr, _ = ent
        avail = self.available
        while ptr < len(order) and (order[ptr] < start or not avail[order[ptr]]):
            ptr += 1
        ent[1] = ptr
        return order[ptr] if ptr < len(order) else None


def _greedy(instance: Instance, key: np.ndarray, remaining: np.ndarray, weighted: bool):
    """Pour every arrival down its neighbors in priority order (ties to lowest id)."""
    n = instance.n_offline
    available = np.ones(n, dtype=bool)
    heads = _SegmentHeads(key, available)
    values = instance.values
    out = AllocationBuilder()
    for t, segs in instance.iter_arrivals():
        heap = []
        for k, (s, e, bid) in enumerate(segs):
            u = heads.head(s, e)
            if u is not None:
                mult = 1.0 if bid is None else bid
                heap.append((-key[u] * mult, u, k))
        heapq.heapify(heap)
        rem = 1.0
        while heap and rem > 1e-12:
            _, u, k = heapq.heappop(heap)
            s, e, bid = segs[k]
            price = values[u] if bid is None else bid
            if weighted:
                take = 1.0
                available[u] = False
            else:
                room = remaining[u] / price
                take = min(rem, room)
                remaining[u] -= take * price
                if take >= room or remaining[u] <= 1e-12 * max(1.0, price):
                    remaining[u] = 0.0
                    available[u] = False
            out.add(t, u, u + 1, take, price)
            rem -= take
            if rem > 1e-12:
                nu = heads.head(s, e)
                if nu is not None:
                    heapq.heappush(heap, (-key[nu] * (1.0 if bid is None else bid), nu, k))
    return out.build(n, instance.n_online)


def run_perturbed_ranking_integral(instance: Instance, f, ranks: RankAssignment) -> RunReport:
    """Match each arrival to the unmatched neighbor maximising ``f(y_u) * w_u``."""
    if instance.mode != VERTEX_WEIGHTED:
        raise ModeError(f"integral Perturbed-Ranking needs a vertex-weighted instance, got {instance.mode}")
    _require_admissible(f)
    t0 = time.perf_counter()
    y = ranks.ranks(instance)
    key = f(y) * instance.values
    alloc = _greedy(instance, key, np.ones(instance.n_offline), weighted=True)
    return RunReport("pr", alloc.objective(instance), seed=ranks.seed, ranks=ranks.describe(),
                     wall_time=time.perf_counter() - t0, allocation=alloc)


def run_perturbed_ranking_adwords(instance: Instance, f, ranks: RankAssignment) -> RunReport:
    """Pour each arrival greedily by ``f(y_u) * w_uv`` among non-exhausted neighbors."""
    if instance.mode != ADWORDS:
        raise ModeError(f"AdWords Perturbed-Ranking needs an AdWords instance, got {instance.mode}")
    _require_admissible(f)
    t0 = time.perf_counter()
    y = ranks.ranks(instance)
    key = np.asarray(f(y), dtype=float)
    alloc = _greedy(instance, key, instance.effective_budgets(), weighted=False)
    return RunReport("pr-adwords", alloc.objective(instance), seed=ranks.seed, ranks=ranks.describe(),
                     wall_time=time.perf_counter() - t0, allocation=alloc)
