"""Perturbed-Balance (vertex-weighted) and MSVV (fractional AdWords)."""

from __future__ import annotations

import time

from ..core import ADWORDS, VERTEX_WEIGHTED, AllocationBuilder, Instance, RunReport
from ..errors import ArgumentError, ModeError
from .waterfill import BudgetedWaterFiller, WaterFiller


def _require_admissible(f) -> None:
    if not f.admissible:
        raise ArgumentError("perturbation function is not admissible for algorithm runs (M > 1)")


def _trace_header(instance, f, step, seed=None) -> dict:
    kind, param = f.descriptor()
    return {"instance": instance.digest(), "f": f"{kind}:{param}", "step": step, "seed": seed}


def run_perturbed_balance_vw(instance: Instance, f, step: float = 1e-3, trace: bool = False) -> RunReport:
    """Fractional water-filling towards the largest ``f(x_u) * w_u``."""
    if instance.mode != VERTEX_WEIGHTED:
        raise ModeError(f"Perturbed-Balance needs a vertex-weighted instance, got {instance.mode}")
    _require_admissible(f)
    t0 = time.perf_counter()
    n = instance.n_offline
    wf = WaterFiller(f, step, [1.0] * n, instance.values.tolist(), trace=trace)
    out = AllocationBuilder()
    for t, segs in instance.iter_arrivals():
        for s, e, amt, w in wf.arrive(t, segs):
            out.add(t, s, e, amt, w)
    alloc = out.build(n, instance.n_online)
    return RunReport("pb", alloc.objective(instance), step=step, wall_time=time.perf_counter() - t0,
                     allocation=alloc, trace=wf.trace(_trace_header(instance, f, step)))


def run_msvv(instance: Instance, f, step: float = 1e-3, trace: bool = False) -> RunReport:
    """Fractional water-filling towards the largest ``f(spent_u / B_u) * w_uv``.

    Unlimited budgets are replaced by (sum of incident bids + 1), which never binds.
    """
    if instance.mode != ADWORDS:
        raise ModeError(f"MSVV needs an AdWords instance, got {instance.mode}")
    _require_admissible(f)
    t0 = time.perf_counter()
    n = instance.n_offline
    wf = BudgetedWaterFiller(f, step, instance.effective_budgets().tolist(), trace=trace)
    out = AllocationBuilder()
    for t, segs in instance.iter_arrivals():
        for s, e, amt, bid in wf.arrive(t, segs):
            out.add(t, s, e, amt, bid)
    alloc = out.build(n, instance.n_online)
    return RunReport("msvv", alloc.objective(instance), step=step, wall_time=time.perf_counter() - t0,
                     allocation=alloc, trace=wf.trace(_trace_header(instance, f, step)))
