"""Online budget-additive welfare with hidden budgets via vertex decomposition.

Every offline vertex u is split into stages as bids are released.  While the
released bids of u stay within B_u, each arrival adjacent to u opens a stage
whose budget is that arrival's bid.  The first arrival pushing the released
total above B_u reveals the budget and opens a last stage holding what is
left of B_u.  A stage created at arrival i bids w_uv towards every arrival
v from i on.  MSVV then runs over the stages.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ..core import (ADWORDS, BUDGET_ADDITIVE, AllocationBuilder, EdgeBlock, Instance, OfflineBlock,
                    OnlineBlock, RunReport)
from ..errors import ArgumentError, ModeError
from .balance import _require_admissible, _trace_header
from .waterfill import BudgetedWaterFiller

MAX_TABLE_ENTRIES = 4_000_000


class StageBuilder:
    """Creates stages arrival by arrival, never ahead of budget revelation."""

    def __init__(self, budgets):
        self.budgets = np.asarray(budgets, dtype=float)
        if np.any(self.budgets <= 0):
            raise ArgumentError("budget-additive vertices need positive budgets")
        self.released = np.zeros(len(self.budgets))
        self.revealed_at = np.full(len(self.budgets), -1)
        self.parent: list = []
        self.stage_budget: list = []
        self.created_at: list = []
        self.stages_of: dict = {}

    def arrive(self, t: int, bids) -> list:
        """bids: (u, w_uv) in ascending u.  Returns the new stage ids."""
        new = []
        for u, w in bids:
            if self.revealed_at[u] >= 0:
                continue
            before = self.released[u]
            self.released[u] = before + w
            if self.released[u] > self.budgets[u]:
                self.revealed_at[u] = t
                budget = self.budgets[u] - before
            else:
                budget = w
            if budget <= 0.0:
                continue
            sid = len(self.parent)
            self.parent.append(u)
            self.stage_budget.append(budget)
            self.created_at.append(t)
            self.stages_of.setdefault(u, []).append(sid)
            new.append(sid)
        return new


def _bids_of(segs):
    out = []
    for s, e, bid in segs:
        for u in range(s, e):
            out.append((u, bid))
    out.sort()
    return out


def _stage_segments(bids, stages_of) -> list:
    pairs = sorted((sid, w) for u, w in bids for sid in stages_of.get(u, ()))
    segs = []
    for sid, w in pairs:
        if segs and segs[-1][1] == sid and segs[-1][2] == w:
            segs[-1][1] = sid + 1
        else:
            segs.append([sid, sid + 1, w])
    return [tuple(g) for g in segs]


@dataclass
class Decomposition:
    instance: Instance
    parent: np.ndarray
    created_at: np.ndarray
    revealed_at: np.ndarray


def decompose_instance(instance: Instance) -> Decomposition:
    """Build the staged AdWords instance for a budget-additive instance."""
    if instance.mode != BUDGET_ADDITIVE:
        raise ModeError(f"decomposition needs a budget-additive instance, got {instance.mode}")
    sb = StageBuilder(instance.values)
    arrivals = []
    for t, segs in instance.iter_arrivals():
        bids = _bids_of(segs)
        sb.arrive(t, bids)
        arrivals.append(dict(bids))
    n_st, n_on = len(sb.parent), instance.n_online
    if n_st == 0:
        raise ArgumentError("instance has no edges to decompose")
    if n_st * n_on > MAX_TABLE_ENTRIES:
        raise ArgumentError("instance too large to materialise its decomposition")
    table = np.zeros((n_st, n_on))
    for j, (u, c) in enumerate(zip(sb.parent, sb.created_at)):
        for i in range(c, n_on):
            table[j, i] = arrivals[i].get(u, 0.0)
    g = Instance(
        ADWORDS,
        (OfflineBlock(n_st, tuple(float(b) for b in sb.stage_budget), label="stages"),),
        (OnlineBlock(n_on, 0, label="arrivals"),),
        (EdgeBlock(0, 0, "table", tuple(tuple(r) for r in table.tolist())),),
    )
    return Decomposition(g, np.asarray(sb.parent), np.asarray(sb.created_at), sb.revealed_at.copy())


def run_budget_additive(instance: Instance, f, step: float = 1e-3, trace: bool = False) -> RunReport:
    """MSVV over stages built online; reports virtual (stage) and actual welfare."""
    if instance.mode != BUDGET_ADDITIVE:
        raise ModeError(f"budget-additive run needs a budget-additive instance, got {instance.mode}")
    _require_admissible(f)
    t0 = time.perf_counter()
    sb = StageBuilder(instance.values)
    wf = BudgetedWaterFiller(f, step, [], trace=trace)
    out = AllocationBuilder()
    virtual = 0.0
    for t, segs in instance.iter_arrivals():
        bids = _bids_of(segs)
        new = sb.arrive(t, bids)
        if new:
            wf.extend([sb.stage_budget[s] for s in new])
        for s, e, amt, bid in wf.arrive(t, _stage_segments(bids, sb.stages_of)):
            virtual += amt * bid * (e - s)
            run = None
            for sid in range(s, e):
                u = sb.parent[sid]
                if run is not None and run[1] == u:
                    run[1] = u + 1
                else:
                    if run is not None:
                        out.add(t, run[0], run[1], amt, bid)
                    run = [u, u + 1]
            out.add(t, run[0], run[1], amt, bid)
    alloc = out.build(instance.n_offline, instance.n_online)
    actual = float(np.sum(np.minimum(instance.values, alloc.spent())))
    return RunReport("budget-additive", actual, step=step, wall_time=time.perf_counter() - t0,
                     allocation=alloc, trace=wf.trace(_trace_header(instance, f, step)),
                     extras={"virtual_value": virtual, "actual_value": actual, "stages": len(sb.parent)})
