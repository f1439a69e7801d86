"""Replay checker for the epsilon-approximate Perturbed-Balance condition.

A pour to u while v is arriving is acceptable when
``w_u f(x_u - eps) >= w_a f(x_a + eps)`` for every neighbor a of v with
``x_a < 1``, where f is extended by +inf below 0 and by 0 above 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import VERTEX_WEIGHTED, Instance, Trace
from ..errors import ArgumentError, ModeError

OPEN_BELOW = 1.0 - 1e-12


def _extended(f, x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x, dtype=float)
    low = x < 0.0
    mid = (~low) & (x <= 1.0)
    out[low] = np.inf
    out[mid] = f(x[mid])
    return out


@dataclass
class APBResult:
    ok: bool
    first_violation: tuple | None = None
    events_checked: int = 0


def check_apb_trace(trace: Trace, instance: Instance, f, eps: float, tol: float = 1e-12) -> APBResult:
    """Replay ``trace`` on ``instance`` and report the first event breaking the condition."""
    if instance.mode != VERTEX_WEIGHTED:
        raise ModeError("the balance condition is defined for vertex-weighted instances")
    if not eps > 0:
        raise ArgumentError(f"eps must be positive, got {eps}")
    n = instance.n_offline
    w = instance.values
    x = np.zeros(n)
    segments = instance.arrival_segments
    nbrs_cache: dict = {}
    last_t = -1
    for k, (t, u, m) in enumerate(trace.events()):
        if t < last_t or not (0 <= t < len(segments)):
            raise ArgumentError(f"trace event {k}: arrival index {t} out of order or out of range")
        if not (0 <= u < n):
            raise ArgumentError(f"trace event {k}: offline id {u} not in instance")
        last_t = t
        nbrs = nbrs_cache.get(t)
        if nbrs is None:
            nbrs_cache.clear()
            nbrs = np.concatenate([np.arange(s, e) for s, e, _ in segments[t]] or [np.zeros(0, int)])
            nbrs_cache[t] = nbrs
        if not np.any(nbrs == u):
            raise ArgumentError(f"trace event {k}: offline {u} is not adjacent to arrival {t}")
        open_ = nbrs[x[nbrs] < OPEN_BELOW]
        mine = w[u] * _extended(f, np.array([x[u] - eps]))[0]
        best = float(np.max(w[open_] * _extended(f, x[open_] + eps))) if len(open_) else 0.0
        if mine < best - tol:
            return APBResult(False, (t, u, m), k)
        x[u] += m
    return APBResult(True, None, len(trace))


def project_trace(trace: Trace, online_origin, offline_origin, copies: int, header: dict | None = None) -> Trace:
    """Map a trace on a duplicated instance back to the original: each copy match is 1/N of a pour."""
    on = np.asarray(online_origin)
    off = np.asarray(offline_origin)
    return Trace(on[trace.arrival], off[trace.offline], trace.amount / copies,
                 dict(header if header is not None else trace.header))


def matching_trace(report, header: dict | None = None) -> Trace:
    """Events of an integral matching, in arrival order."""
    a = report.allocation
    order = np.argsort(a.online, kind="stable")
    return Trace(a.online[order], a.start[order], a.amount[order], dict(header or {}))


def rank_event_holds(ranks: np.ndarray, offline_origin, copies: int, eps: float) -> bool:
    """Whether every vertex's sorted copy ranks sit within eps/2 of the grid i/N."""
    origin = np.asarray(offline_origin)
    grid = np.arange(1, copies + 1) / copies
    for g in np.unique(origin):
        y = np.sort(ranks[origin == g])
        if len(y) != copies or np.max(np.abs(y - grid)) > eps / 2.0:
            return False
    return True
