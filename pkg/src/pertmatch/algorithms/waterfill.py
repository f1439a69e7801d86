"""Quantised water-filling shared by Perturbed-Balance and MSVV.

Each arriving unit of online mass is poured in quanta of ``step``; every
quantum goes to the neighbor with the highest perturbed level, ties to the
lowest offline id.  Neighbors that are indistinguishable (contiguous ids,
same capacity, same bid, same fill) are pooled into one class whose members
split every quantum evenly, so symmetric vertices never drift apart.
Consecutive quanta won by the same class are granted in one batch.
"""

from __future__ import annotations

import heapq
import math
from bisect import bisect_left, bisect_right

import numpy as np

from ..core import Trace
from ..errors import ArgumentError

EXHAUSTED = 1.0 - 1e-12
MASS_EPS = 1e-12
MAX_TRACE_EVENTS = 2_000_000


class _Class:
    __slots__ = ("start", "stop", "size", "cap", "mult", "rate", "fill", "poured")

    def __init__(self, start, stop, cap, mult, rate, fill):
        self.start = start
        self.stop = stop
        self.size = stop - start
        self.cap = cap
        self.mult = mult
        self.rate = rate
        self.fill = fill
        self.poured = 0.0


class WaterFiller:
    """Incremental water-filling state over a growable set of offline vertices.

    ``capacity[u]`` is the budget of u (1.0 for vertex-weighted runs) and
    ``weight[u]`` the level multiplier used when a segment carries no bid.
    Fill is the fraction of capacity used.
    """

    def __init__(self, f, step: float, capacity, weight=None, trace: bool = False):
        if not (step > 0.0):
            raise ArgumentError(f"step must be positive, got {step}")
        if step > 1e-2:
            raise ArgumentError(f"step must be at most 1e-2, got {step}")
        self.f = f
        self.step = float(step)
        self.capacity = []
        self.weight = []
        self.n = 0
        self._starts: list = []
        self._fill: dict = {}
        self._events = [] if trace else None
        self.extend(capacity, weight)

    # -- run list ----------------------------------------------------------

    def extend(self, capacity, weight=None) -> None:
        capacity = [float(c) for c in capacity]
        weight = capacity if weight is None else [float(w) for w in weight]
        base = self.n
        for k, c in enumerate(capacity):
            if k == 0 or c != capacity[k - 1] or weight[k] != weight[k - 1]:
                self._starts.append(base + k)
                self._fill[base + k] = 0.0
        self.capacity.extend(capacity)
        self.weight.extend(weight)
        self.n += len(capacity)

    def _split(self, x: int) -> None:
        if x >= self.n:
            return
        i = bisect_right(self._starts, x) - 1
        s = self._starts[i]
        if s != x:
            self._starts.insert(i + 1, x)
            self._fill[x] = self._fill[s]

    def _run_end(self, i: int) -> int:
        return self._starts[i + 1] if i + 1 < len(self._starts) else self.n

    def _same_kind(self, a: int, b: int) -> bool:
        return self.capacity[a] == self.capacity[b] and self.weight[a] == self.weight[b]

    def _assign(self, start: int, stop: int, fill: float) -> None:
        self._split(start)
        self._split(stop)
        starts = self._starts
        i = bisect_right(starts, start)
        j = bisect_left(starts, stop)
        for s in starts[i:j]:
            del self._fill[s]
        del starts[i:j]
        self._fill[start] = fill
        # merge with the following run, then with the preceding one
        k = i - 1
        if k + 1 < len(starts):
            nxt = starts[k + 1]
            if self._mergeable(start, nxt):
                del self._fill[nxt]
                del starts[k + 1]
        if k > 0:
            prv = starts[k - 1]
            if self._mergeable(prv, start):
                del self._fill[start]
                del starts[k]

    def _mergeable(self, a: int, b: int) -> bool:
        fa, fb = self._fill[a], self._fill[b]
        if fa >= EXHAUSTED and fb >= EXHAUSTED:
            return True
        return fa == fb and self._same_kind(a, b)

    def fills(self) -> np.ndarray:
        out = np.empty(self.n)
        for i, s in enumerate(self._starts):
            out[s:self._run_end(i)] = self._fill[s]
        return out

    # -- one arrival -------------------------------------------------------

    def _classes(self, segments) -> list:
        classes = []
        for s, e, bid in segments:
            self._split(s)
            self._split(e)
        for s, e, bid in sorted(segments, key=lambda g: g[0]):
            starts = self._starts
            i = bisect_left(starts, s)
            while i < len(starts) and starts[i] < e:
                a = starts[i]
                b = self._run_end(i)
                fill = self._fill[a]
                i += 1
                if fill >= EXHAUSTED:
                    continue
                cap = self.capacity[a]
                mult = self.weight[a] if bid is None else bid
                if classes:
                    last = classes[-1]
                    if last.stop == a and last.fill == fill and last.cap == cap and last.mult == mult:
                        last.stop = b
                        last.size = b - last.start
                        continue
                classes.append(_Class(a, b, cap, mult, 0.0, fill))
        for c in classes:
            # fill gained per unit of online mass poured into the class
            c.rate = c.mult / (c.size * c.cap) if self._budgeted else 1.0 / (c.size * c.cap)
        return classes

    _budgeted = False

    def _level(self, c: _Class, fill: float) -> float:
        return self.f.scalar(fill) * c.mult

    def arrive(self, t: int, segments) -> list:
        """Pour one unit of online mass; returns (start, stop, mass per member, mult) records."""
        classes = self._classes(segments)
        if not classes:
            return []
        step = self.step
        heap = [(-self._level(c, c.fill), c.start, k) for k, c in enumerate(classes)]
        heapq.heapify(heap)
        rem = 1.0
        while heap and rem > MASS_EPS:
            neg, _, k = heapq.heappop(heap)
            c = classes[k]
            room = (1.0 - c.fill) / c.rate
            qmax = min(math.ceil(rem / step - 1e-9), math.ceil(room / step - 1e-9))
            qmax = max(qmax, 1)
            if heap:
                q = self._run_length(c, -heap[0][0], heap[0][1], qmax)
            else:
                q = qmax
            amount = min(q * step, rem, room)
            if self._events is not None:
                self._record(t, c, q, amount)
            rem -= amount
            c.poured += amount
            if amount >= room - 1e-15 or c.fill + amount * c.rate >= EXHAUSTED:
                c.fill = 1.0
            else:
                c.fill += amount * c.rate
                heapq.heappush(heap, (-self._level(c, c.fill), c.start, k))
        out = []
        for c in classes:
            if c.poured > 0.0:
                out.append((c.start, c.stop, c.poured / c.size, c.mult))
            self._assign(c.start, c.stop, c.fill)
        return out

    def _run_length(self, c: _Class, top: float, top_start: int, qmax: int) -> int:
        """Number of consecutive quanta c wins against a rival at level ``top``."""
        delta = self.step * c.rate

        def wins(i):
            lv = self._level(c, min(c.fill + i * delta, 1.0))
            return lv > top or (lv == top and c.start < top_start)

        if qmax <= 1 or wins(qmax - 1):
            return qmax
        lo, hi = 0, 1
        while hi < qmax - 1 and wins(hi):
            lo, hi = hi, min(2 * hi, qmax - 1)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if wins(mid):
                lo = mid
            else:
                hi = mid
        return lo + 1

    def _record(self, t, c, q, amount):
        step = self.step
        if len(self._events) + q * c.size > MAX_TRACE_EVENTS:
            raise ArgumentError("trace too large; disable tracing for this instance")
        left = amount
        while left > MASS_EPS:
            piece = min(step, left)
            share = piece / c.size
            for u in range(c.start, c.stop):
                self._events.append((t, u, share))
            left -= piece

    def trace(self, header: dict | None = None) -> Trace | None:
        if self._events is None:
            return None
        return Trace.from_events(self._events, header)


class BudgetedWaterFiller(WaterFiller):
    """Water-filling where fill is spent budget over capacity and levels use bids."""

    _budgeted = True
