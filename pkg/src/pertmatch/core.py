"""Shared domain types: perturbation functions, block-structured instances,
allocations and allocation traces, plus their file formats."""

from __future__ import annotations

import bisect
import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

from .errors import DomainError, FormatError, ArgumentError

FORMAT_VERSION = 1

VERTEX_WEIGHTED = "vertex-weighted"
ADWORDS = "adwords"
BUDGET_ADDITIVE = "budget-additive-unknown"
MODES = (VERTEX_WEIGHTED, ADWORDS, BUDGET_ADDITIVE)

PATTERNS = ("complete", "upper-triangle", "identity", "table")

# A segment is a contiguous range of offline ids sharing one bid towards the
# arriving vertex: (start, stop, bid). bid is None in vertex-weighted mode.
Segment = tuple


def _check_version(d: dict, what: str) -> None:
    v = d.get("format_version")
    if v != FORMAT_VERSION:
        raise FormatError(f"unsupported {what} format_version {v!r} (expected {FORMAT_VERSION})")


# ---------------------------------------------------------------------------
# Perturbation functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PerturbationFunction:
    """Non-increasing, right-continuous map on [0, 1].

    kind is one of ``canonical`` (``M * (1 - e^(x-1))``), ``linear``
    (``1 - x``) or ``tabulated`` (piecewise linear through ``breakpoints``;
    a repeated x encodes a jump, the later entry being the value at x).
    """

    kind: str
    M: float = 1.0
    breakpoints: tuple = ()

    def __post_init__(self):
        if self.kind == "canonical":
            if not (self.M > 0 and math.isfinite(self.M)):
                raise ArgumentError(f"canonical scale M must be positive, got {self.M}")
        elif self.kind == "linear":
            pass
        elif self.kind == "tabulated":
            pts = tuple((float(x), float(v)) for x, v in self.breakpoints)
            object.__setattr__(self, "breakpoints", pts)
            _validate_breakpoints(pts)
        else:
            raise ArgumentError(f"unknown perturbation function kind {self.kind!r}")

    @classmethod
    def canonical(cls, M: float = 1.0) -> "PerturbationFunction":
        return cls("canonical", M=float(M))

    @classmethod
    def linear(cls) -> "PerturbationFunction":
        return cls("linear")

    @classmethod
    def tabulated(cls, points: Sequence[Sequence[float]]) -> "PerturbationFunction":
        return cls("tabulated", breakpoints=tuple(tuple(p) for p in points))

    @property
    def admissible(self) -> bool:
        """Whether the function maps into [0, 1] and may drive an algorithm."""
        return self.kind != "canonical" or self.M <= 1.0

    # -- evaluation --------------------------------------------------------

    @cached_property
    def _xs(self) -> np.ndarray:
        return np.array([p[0] for p in self.breakpoints])

    @cached_property
    def _vs(self) -> np.ndarray:
        return np.array([p[1] for p in self.breakpoints])

    @cached_property
    def _xs_list(self) -> list:
        return [p[0] for p in self.breakpoints]

    @cached_property
    def _cum(self) -> np.ndarray:
        xs, vs = self._xs, self._vs
        pieces = np.diff(xs) * (vs[:-1] + vs[1:]) / 2.0
        return np.concatenate([[0.0], np.cumsum(pieces)])

    def __call__(self, x):
        """Evaluate f; raises DomainError outside [0, 1]."""
        arr = np.asarray(x, dtype=float)
        if np.any(arr < 0.0) or np.any(arr > 1.0) or np.any(np.isnan(arr)):
            raise DomainError("perturbation function evaluated outside [0, 1]")
        out = self._eval_array(arr)
        return float(out) if out.ndim == 0 else out

    def _eval_array(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "canonical":
            return self.M * (1.0 - np.exp(x - 1.0))
        if self.kind == "linear":
            return 1.0 - x
        xs, vs = self._xs, self._vs
        idx = np.searchsorted(xs, x, side="right") - 1
        idx = np.clip(idx, 0, len(xs) - 1)
        last = idx >= len(xs) - 1
        nxt = np.minimum(idx + 1, len(xs) - 1)
        width = xs[nxt] - xs[idx]
        with np.errstate(invalid="ignore", divide="ignore"):
            t = np.where(last | (width <= 0), 0.0, (x - xs[idx]) / np.where(width > 0, width, 1.0))
        return vs[idx] + t * (vs[nxt] - vs[idx])

    def scalar(self, x: float) -> float:
        """Unchecked scalar evaluation for inner loops; x is clamped to [0, 1]."""
        if x < 0.0:
            x = 0.0
        elif x > 1.0:
            x = 1.0
        if self.kind == "canonical":
            return self.M * (1.0 - math.exp(x - 1.0))
        if self.kind == "linear":
            return 1.0 - x
        xs = self._xs_list
        i = bisect.bisect_right(xs, x) - 1
        if i >= len(xs) - 1:
            return self.breakpoints[-1][1]
        x0, v0 = self.breakpoints[i]
        x1, v1 = self.breakpoints[i + 1]
        return v0 + (x - x0) / (x1 - x0) * (v1 - v0)

    def antiderivative(self, x):
        """F(x) = integral of f over [0, x], vectorised."""
        arr = np.asarray(x, dtype=float)
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise DomainError("antiderivative evaluated outside [0, 1]")
        if self.kind == "canonical":
            out = self.M * (arr - np.exp(arr - 1.0) + math.exp(-1.0))
        elif self.kind == "linear":
            out = arr - arr * arr / 2.0
        else:
            xs, vs, cum = self._xs, self._vs, self._cum
            idx = np.clip(np.searchsorted(xs, arr, side="right") - 1, 0, len(xs) - 1)
            left = vs[idx]
            here = self._eval_array(arr)
            out = cum[idx] + (arr - xs[idx]) * (left + here) / 2.0
        return float(out) if out.ndim == 0 else out

    def integrate(self, a: float, b: float) -> float:
        """Integral of f over [a, b] with 0 <= a <= b <= 1."""
        if a > b:
            raise ArgumentError(f"integration bounds reversed: a={a} > b={b}")
        if a < 0.0 or b > 1.0:
            raise DomainError("integration bounds outside [0, 1]")
        return float(self.antiderivative(b) - self.antiderivative(a))

    def breakpoint_xs(self) -> np.ndarray:
        return self._xs.copy() if self.kind == "tabulated" else np.array([], dtype=float)

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        d = {"format_version": FORMAT_VERSION, "kind": self.kind}
        if self.kind == "canonical":
            d["M"] = self.M
        if self.kind == "tabulated":
            d["breakpoints"] = [list(p) for p in self.breakpoints]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PerturbationFunction":
        _check_version(d, "perturbation function")
        kind = d.get("kind")
        if kind == "canonical":
            return cls.canonical(d.get("M", 1.0))
        if kind == "linear":
            return cls.linear()
        if kind == "tabulated":
            return cls.tabulated(d.get("breakpoints", []))
        raise FormatError(f"unknown perturbation function kind {kind!r}")

    def descriptor(self) -> tuple[str, str]:
        """(f_kind, f_param) columns for CSV output."""
        if self.kind == "canonical":
            return "canonical", repr(self.M)
        if self.kind == "linear":
            return "linear", ""
        digest = hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()
        return "tabulated", digest[:12]


def _validate_breakpoints(pts) -> None:
    if len(pts) < 2:
        raise ArgumentError("tabulated function needs at least two breakpoints")
    if pts[0][0] != 0.0 or pts[-1][0] != 1.0:
        raise ArgumentError("tabulated breakpoints must start at x=0 and end at x=1")
    for (x0, v0), (x1, v1) in zip(pts, pts[1:]):
        if x1 < x0:
            raise ArgumentError("tabulated breakpoints must have non-decreasing x")
        if v1 > v0:
            raise ArgumentError("tabulated function must be non-increasing")
    for x, v in pts:
        if not (0.0 <= v <= 1.0):
            raise ArgumentError(f"tabulated value {v} outside [0, 1]")
    xs = [p[0] for p in pts]
    for x in set(xs):
        if xs.count(x) > 2:
            raise ArgumentError(f"breakpoint x={x} repeated more than twice")


def load_function(path) -> PerturbationFunction:
    with open(path) as fh:
        return PerturbationFunction.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# Instances
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OfflineBlock:
    """``count`` offline vertices sharing budget-visibility flags.

    ``value`` is the weight (vertex-weighted) or budget of every vertex, or a
    tuple with one entry per vertex.
    """

    count: int
    value: float | tuple = 1.0
    budget_known: bool = True
    unlimited: bool = False
    label: str = ""


@dataclass(frozen=True)
class OnlineBlock:
    count: int
    arrival_rank: int = 0
    label: str = ""


@dataclass(frozen=True)
class EdgeBlock:
    """Edges between an offline block (optionally a slice of it) and an
    online block.

    Patterns, with j the local online index and k the local index inside
    the offline slice: ``complete`` (all k), ``upper-triangle`` (k >= j),
    ``identity`` (k == j) and ``table`` (bid[k][j], zero meaning no edge).
    ``bid`` is a scalar, a per-online-vertex tuple, a table, or None in
    vertex-weighted mode where bids equal the offline weights.
    """

    offline_block: int
    online_block: int
    pattern: str = "complete"
    bid: float | tuple | None = None
    offline_slice: tuple | None = None


def _freeze(x):
    if isinstance(x, (list, tuple, np.ndarray)):
        return tuple(_freeze(v) for v in x)
    if x is None:
        return None
    return float(x)


@dataclass(frozen=True)
class Instance:
    mode: str
    offline_blocks: tuple
    online_blocks: tuple
    edges: tuple

    def __post_init__(self):
        object.__setattr__(self, "offline_blocks", tuple(self.offline_blocks))
        object.__setattr__(self, "online_blocks", tuple(self.online_blocks))
        object.__setattr__(self, "edges", tuple(self.edges))
        self.validate()

    # -- layout ------------------------------------------------------------

    @cached_property
    def offline_offsets(self) -> np.ndarray:
        counts = [b.count for b in self.offline_blocks]
        return np.concatenate([[0], np.cumsum(counts)]).astype(int)

    @cached_property
    def arrival_order(self) -> list:
        """Online block indices in arrival order (rank, then listing order)."""
        return sorted(range(len(self.online_blocks)),
                      key=lambda b: (self.online_blocks[b].arrival_rank, b))

    @cached_property
    def online_offsets(self) -> dict:
        out, pos = {}, 0
        for b in self.arrival_order:
            out[b] = pos
            pos += self.online_blocks[b].count
        return out

    @property
    def n_offline(self) -> int:
        return int(self.offline_offsets[-1])

    @property
    def n_online(self) -> int:
        return sum(b.count for b in self.online_blocks)

    @cached_property
    def values(self) -> np.ndarray:
        """Per-offline weight or budget (unlimited vertices carry their nominal value)."""
        parts = []
        for b in self.offline_blocks:
            if isinstance(b.value, tuple):
                parts.append(np.asarray(b.value, dtype=float))
            else:
                parts.append(np.full(b.count, float(b.value)))
        return np.concatenate(parts) if parts else np.zeros(0)

    @cached_property
    def unlimited(self) -> np.ndarray:
        return np.concatenate([np.full(b.count, b.unlimited) for b in self.offline_blocks])

    def offline_block_of(self, u: int) -> int:
        return int(np.searchsorted(self.offline_offsets, u, side="right") - 1)

    @cached_property
    def _edges_by_online(self) -> dict:
        out = {b: [] for b in range(len(self.online_blocks))}
        for k, e in enumerate(self.edges):
            out[e.online_block].append(k)
        return out

    def _slice(self, e: EdgeBlock) -> tuple:
        if e.offline_slice is None:
            return 0, self.offline_blocks[e.offline_block].count
        return int(e.offline_slice[0]), int(e.offline_slice[1])

    @cached_property
    def _table_columns(self) -> dict:
        """For table edges: per online column, runs of consecutive rows with equal bid."""
        out = {}
        for k, e in enumerate(self.edges):
            if e.pattern != "table":
                continue
            tab = np.asarray(e.bid, dtype=float)
            cols = []
            for j in range(tab.shape[1]):
                col = tab[:, j]
                nz = np.flatnonzero(col > 0)
                runs = []
                if len(nz):
                    brk = np.flatnonzero((np.diff(nz) != 1) | (np.diff(col[nz]) != 0)) + 1
                    for grp in np.split(nz, brk):
                        runs.append((int(grp[0]), int(grp[-1]) + 1, float(col[grp[0]])))
                cols.append(runs)
            out[k] = cols
        return out

    def segments(self, block: int, j: int) -> list:
        """Neighbor segments of local online vertex j of online block ``block``."""
        segs = []
        vw = self.mode == VERTEX_WEIGHTED
        for k in self._edges_by_online[block]:
            e = self.edges[k]
            off = int(self.offline_offsets[e.offline_block])
            s0, s1 = self._slice(e)
            if e.pattern == "table":
                for a, b, bid in self._table_columns[k][j]:
                    segs.append((off + s0 + a, off + s0 + b, None if vw else bid))
                continue
            if e.bid is None:
                bid = None
            elif isinstance(e.bid, tuple):
                bid = e.bid[j]
            else:
                bid = e.bid
            if bid is not None and bid <= 0.0:
                continue
            if vw:
                bid = None
            if e.pattern == "complete":
                segs.append((off + s0, off + s1, bid))
            elif e.pattern == "upper-triangle":
                if s0 + j < s1:
                    segs.append((off + s0 + j, off + s1, bid))
            elif e.pattern == "identity":
                if s0 + j < s1:
                    segs.append((off + s0 + j, off + s0 + j + 1, bid))
        return segs

    @cached_property
    def arrival_segments(self) -> list:
        """Segments of every online vertex, indexed by arrival position."""
        return [self.segments(b, j) for b in self.arrival_order for j in range(self.online_blocks[b].count)]

    def iter_arrivals(self) -> Iterator[tuple]:
        """Yield (online id, segments) in arrival order."""
        return enumerate(self.arrival_segments)

    def edge_list(self, limit: int = 5_000_000) -> tuple:
        """Materialised edges as arrays (offline, online, bid)."""
        us, vs, ws = [], [], []
        total = 0
        vals = self.values
        for t, segs in self.iter_arrivals():
            for s, e, bid in segs:
                total += e - s
                if total > limit:
                    raise ArgumentError("instance too large to materialise its edge list")
                ids = np.arange(s, e)
                us.append(ids)
                vs.append(np.full(e - s, t))
                ws.append(vals[s:e] if bid is None else np.full(e - s, bid))
        if not us:
            return np.zeros(0, int), np.zeros(0, int), np.zeros(0)
        u, v, w = np.concatenate(us), np.concatenate(vs), np.concatenate(ws)
        key = u.astype(np.int64) * max(self.n_online, 1) + v
        if len(np.unique(key)) != len(key):
            raise FormatError("instance lists the same offline/online pair more than once")
        return u, v, w

    def incident_bid_totals(self) -> np.ndarray:
        """Sum of incident bids per offline vertex."""
        diff = np.zeros(self.n_offline + 1)
        vals = self.values
        for _, segs in self.iter_arrivals():
            for s, e, bid in segs:
                if bid is None:
                    diff[s:e] += vals[s:e]
                else:
                    diff[s] += bid
                    diff[e] -= bid
        if self.mode == VERTEX_WEIGHTED:
            return diff[:-1]
        return np.cumsum(diff)[:-1]

    def effective_budgets(self) -> np.ndarray:
        """Budgets with unlimited vertices replaced by a never-binding cap."""
        b = self.values.copy()
        if self.unlimited.any():
            tot = self.incident_bid_totals()
            b[self.unlimited] = tot[self.unlimited] + 1.0
        return b

    # -- validation --------------------------------------------------------

    def validate(self) -> None:
        if self.mode not in MODES:
            raise FormatError(f"unknown instance mode {self.mode!r}")
        for i, b in enumerate(self.offline_blocks):
            if b.count < 1:
                raise FormatError(f"offline block {i} has non-positive count")
            vals = b.value if isinstance(b.value, tuple) else (b.value,)
            if isinstance(b.value, tuple) and len(b.value) != b.count:
                raise FormatError(f"offline block {i} value vector has wrong length")
            if any(not math.isfinite(v) or v < 0 for v in vals):
                raise FormatError(f"offline block {i} has negative or non-finite values")
            if self.mode != VERTEX_WEIGHTED and not b.unlimited and any(v <= 0 for v in vals):
                raise FormatError(f"offline block {i} has a non-positive budget")
            if self.mode == BUDGET_ADDITIVE and (b.budget_known or b.unlimited):
                raise FormatError("budget-additive instances carry hidden finite budgets")
            if self.mode == VERTEX_WEIGHTED and b.unlimited:
                raise FormatError("unlimited budgets are an AdWords notion")
        for i, b in enumerate(self.online_blocks):
            if b.count < 1:
                raise FormatError(f"online block {i} has non-positive count")
        for i, e in enumerate(self.edges):
            if e.pattern not in PATTERNS:
                raise FormatError(f"edge {i}: unknown pattern {e.pattern!r}")
            if not (0 <= e.offline_block < len(self.offline_blocks)):
                raise FormatError(f"edge {i}: offline block {e.offline_block} does not exist")
            if not (0 <= e.online_block < len(self.online_blocks)):
                raise FormatError(f"edge {i}: online block {e.online_block} does not exist")
            s0, s1 = self._slice(e)
            if not (0 <= s0 < s1 <= self.offline_blocks[e.offline_block].count):
                raise FormatError(f"edge {i}: offline slice out of range")
            n_on = self.online_blocks[e.online_block].count
            if e.pattern == "table":
                tab = np.asarray(e.bid, dtype=float)
                if tab.shape != (s1 - s0, n_on):
                    raise FormatError(f"edge {i}: bid table shape {tab.shape} != {(s1 - s0, n_on)}")
                flat = tab.ravel()
            elif e.bid is None:
                if self.mode != VERTEX_WEIGHTED:
                    raise FormatError(f"edge {i}: bids are required outside vertex-weighted mode")
                flat = np.zeros(0)
            elif isinstance(e.bid, tuple):
                if len(e.bid) != n_on:
                    raise FormatError(f"edge {i}: bid vector length != online block size")
                flat = np.asarray(e.bid, dtype=float)
            else:
                flat = np.asarray([e.bid], dtype=float)
            if np.any(flat < 0) or not np.all(np.isfinite(flat)):
                raise FormatError(f"edge {i}: bids must be finite and nonnegative")
            if self.mode == VERTEX_WEIGHTED and e.bid is not None:
                blk = self.offline_blocks[e.offline_block]
                w = np.asarray(blk.value if isinstance(blk.value, tuple) else [blk.value] * blk.count)[s0:s1]
                if e.pattern == "table":
                    ok = np.all((tab == 0) | np.isclose(tab, w[:, None]))
                else:
                    ok = np.allclose(flat[flat > 0], w[0]) and np.allclose(w, w[0])
                if not ok:
                    raise FormatError(f"edge {i}: vertex-weighted bids must equal offline weights")

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        def val(v):
            return list(v) if isinstance(v, tuple) else v

        def bid(b):
            if isinstance(b, tuple):
                return [list(r) if isinstance(r, tuple) else r for r in b]
            return b

        return {
            "format_version": FORMAT_VERSION,
            "mode": self.mode,
            "offline_blocks": [
                {"count": b.count, "weight_or_budget": val(b.value), "budget_known": b.budget_known,
                 "unlimited": b.unlimited, "label": b.label}
                for b in self.offline_blocks
            ],
            "online_blocks": [
                {"count": b.count, "arrival_rank": b.arrival_rank, "label": b.label}
                for b in self.online_blocks
            ],
            "edges": [
                {"offline_block": e.offline_block, "online_block": e.online_block, "pattern": e.pattern,
                 "bid": bid(e.bid), "offline_slice": list(e.offline_slice) if e.offline_slice else None}
                for e in self.edges
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Instance":
        _check_version(d, "instance")
        try:
            off = tuple(
                OfflineBlock(int(b["count"]), _freeze(b["weight_or_budget"]), bool(b.get("budget_known", True)),
                             bool(b.get("unlimited", False)), b.get("label", ""))
                for b in d["offline_blocks"])
            on = tuple(OnlineBlock(int(b["count"]), int(b.get("arrival_rank", 0)), b.get("label", ""))
                       for b in d["online_blocks"])
            edges = tuple(
                EdgeBlock(int(e["offline_block"]), int(e["online_block"]), e.get("pattern", "complete"),
                          _freeze(e.get("bid")),
                          tuple(e["offline_slice"]) if e.get("offline_slice") else None)
                for e in d["edges"])
            return cls(d["mode"], off, on, edges)
        except KeyError as exc:
            raise FormatError(f"instance file missing key {exc}") from None

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def save_instance(instance: Instance, path) -> None:
    with open(path, "w") as fh:
        json.dump(instance.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_instance(path) -> Instance:
    with open(path) as fh:
        return Instance.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# Allocations and traces
# ---------------------------------------------------------------------------


class AllocationBuilder:
    def __init__(self):
        self._rows = []

    def add(self, online: int, start: int, stop: int, amount: float, bid: float) -> None:
        self._rows.append((online, start, stop, amount, bid))

    def build(self, n_offline: int, n_online: int) -> "Allocation":
        if self._rows:
            cols = list(zip(*self._rows))
            return Allocation(n_offline, n_online, np.array(cols[0], int), np.array(cols[1], int),
                              np.array(cols[2], int), np.array(cols[3], float), np.array(cols[4], float))
        z = np.zeros(0)
        return Allocation(n_offline, n_online, z.astype(int), z.astype(int), z.astype(int), z, z)


@dataclass
class Allocation:
    """Fractional assignment stored as range records.

    Record i gives every offline vertex in ``[start[i], stop[i])`` the
    online-mass ``amount[i]`` of online vertex ``online[i]``; ``bid[i]`` is the
    value per unit of that mass.
    """

    n_offline: int
    n_online: int
    online: np.ndarray
    start: np.ndarray
    stop: np.ndarray
    amount: np.ndarray
    bid: np.ndarray

    def _range_sum(self, per_member: np.ndarray) -> np.ndarray:
        diff = np.zeros(self.n_offline + 1)
        np.add.at(diff, self.start, per_member)
        np.add.at(diff, self.stop, -per_member)
        return np.cumsum(diff)[:-1]

    def offline_mass(self) -> np.ndarray:
        return self._range_sum(self.amount)

    def spent(self) -> np.ndarray:
        return self._range_sum(self.amount * self.bid)

    def online_mass(self) -> np.ndarray:
        out = np.zeros(self.n_online)
        np.add.at(out, self.online, self.amount * (self.stop - self.start))
        return out

    def entries(self, limit: int = 1_000_000) -> dict:
        """Expanded sparse map (offline, online) -> x_uv."""
        if int(np.sum(self.stop - self.start)) > limit:
            raise ArgumentError("allocation too large to expand into entries")
        out: dict = {}
        for v, s, e, a in zip(self.online, self.start, self.stop, self.amount):
            for u in range(s, e):
                out[(u, int(v))] = out.get((u, int(v)), 0.0) + float(a)
        return out

    def objective(self, instance: Instance) -> float:
        if instance.mode == VERTEX_WEIGHTED:
            return float(np.sum(instance.values * np.minimum(1.0, self.offline_mass())))
        caps = np.where(instance.unlimited, np.inf, instance.values)
        return float(np.sum(np.minimum(caps, self.spent())))

    def violations(self, instance: Instance, tol: float = 1e-9) -> list:
        """Feasibility audit; returns human-readable violations (empty if feasible)."""
        out = []
        if np.any(self.amount < -tol):
            out.append("negative allocation amount")
        om = self.online_mass()
        for v in np.flatnonzero(om > 1.0 + tol):
            out.append(f"online {v}: matched mass {om[v]:.12g} > 1")
        if instance.mode == VERTEX_WEIGHTED:
            m = self.offline_mass()
            for u in np.flatnonzero(m > 1.0 + tol):
                out.append(f"offline {u}: matched portion {m[u]:.12g} > 1")
        else:
            sp = self.spent()
            caps = instance.values
            bad = (~instance.unlimited) & (sp > caps * (1.0 + tol) + tol)
            for u in np.flatnonzero(bad):
                out.append(f"offline {u}: spent {sp[u]:.12g} > budget {caps[u]:.12g}")
        return out


@dataclass
class Trace:
    """Ordered micro-allocation events (online id, offline id, online mass)."""

    arrival: np.ndarray
    offline: np.ndarray
    amount: np.ndarray
    header: dict = field(default_factory=dict)

    @classmethod
    def from_events(cls, events: list, header: dict | None = None) -> "Trace":
        if events:
            a, u, m = zip(*events)
            return cls(np.array(a, int), np.array(u, int), np.array(m, float), dict(header or {}))
        return cls(np.zeros(0, int), np.zeros(0, int), np.zeros(0), dict(header or {}))

    def __len__(self) -> int:
        return len(self.arrival)

    def events(self) -> Iterator[tuple]:
        for a, u, m in zip(self.arrival, self.offline, self.amount):
            yield int(a), int(u), float(m)

    def replay_mass(self, n_offline: int) -> np.ndarray:
        """Per-offline matched mass after replaying every event in order."""
        out = np.zeros(n_offline)
        for _, u, m in self.events():
            out[u] += m
        return out

    def to_text(self) -> str:
        lines = [f"# format_version {FORMAT_VERSION}"]
        for k in sorted(self.header):
            lines.append(f"# {k} {json.dumps(self.header[k])}")
        for a, u, m in self.events():
            lines.append(f"{a} {u} {m!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Trace":
        header, events, version = {}, [], None
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, rest = line[1:].strip().partition(" ")
                if key == "format_version":
                    version = int(rest)
                else:
                    header[key] = json.loads(rest)
                continue
            parts = line.split()
            if len(parts) != 3:
                raise FormatError(f"bad trace line: {line!r}")
            events.append((int(parts[0]), int(parts[1]), float(parts[2])))
        if version != FORMAT_VERSION:
            raise FormatError(f"unsupported trace format_version {version!r}")
        return cls.from_events(events, header)


@dataclass
class RunReport:
    """Outcome of one algorithm run."""

    algorithm: str
    value: float
    step: float | None = None
    seed: int | None = None
    ranks: str | None = None
    wall_time: float = 0.0
    allocation: Allocation | None = None
    trace: Trace | None = None
    extras: dict = field(default_factory=dict)

    def summary(self) -> dict:
        """JSON-ready view without the allocation, trace or timing."""
        out = {"algorithm": self.algorithm, "value": self.value, "step": self.step,
               "seed": self.seed, "ranks": self.ranks}
        out.update(self.extras)
        return out
