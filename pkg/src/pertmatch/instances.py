"""Instance generators: upper triangles, the two adversarial families, the
copy construction used by the ranking/balance reduction, and random fuzz
instances.  Each generator returns the instance together with its
parameters and, where one is known, a closed-form offline optimum."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (ADWORDS, BUDGET_ADDITIVE, MODES, VERTEX_WEIGHTED, EdgeBlock, Instance, OfflineBlock,
                   OnlineBlock, PerturbationFunction)
from .errors import ArgumentError, DegenerateError


@dataclass
class GeneratedInstance:
    instance: Instance
    params: dict
    opt_closed_form: float | None = None
    opt_formula_id: str | None = None
    rounding: dict = field(default_factory=dict)
    maps: dict = field(default_factory=dict)

    def metadata(self) -> dict:
        return {"params": self.params, "opt_closed_form": self.opt_closed_form,
                "opt_formula_id": self.opt_formula_id, "rounding": self.rounding,
                "instance_hash": self.instance.digest()}


def ceil_count(x: float) -> int:
    """Ceiling that ignores floating-point noise just above an integer."""
    return int(math.ceil(x - 1e-9))


def _check_unit(name, x, lo=0.0, hi=1.0):
    if not (lo <= x <= hi):
        raise ArgumentError(f"{name} must lie in [{lo}, {hi}], got {x}")


# ---------------------------------------------------------------------------
# Upper triangle
# ---------------------------------------------------------------------------


def gen_upper_triangle(n: int, weights=None, mode: str = VERTEX_WEIGHTED) -> GeneratedInstance:
    """n offline, n online, online j adjacent to offline k iff k >= j.

    In AdWords and budget-additive modes ``weights`` become budgets and
    every bid is 1.
    """
    if n < 1:
        raise ArgumentError("upper triangle needs n >= 1")
    if mode not in MODES:
        raise ArgumentError(f"unknown mode {mode!r}")
    if weights is None:
        value, wsum = 1.0, float(n)
    else:
        value = tuple(float(w) for w in weights)
        if len(value) != n:
            raise ArgumentError("need one weight per offline vertex")
        wsum = sum(value)
    known = mode != BUDGET_ADDITIVE
    off = (OfflineBlock(n, value, budget_known=known, label="U"),)
    bid = None if mode == VERTEX_WEIGHTED else 1.0
    inst = Instance(mode, off, (OnlineBlock(n, 0, label="V"),), (EdgeBlock(0, 0, "upper-triangle", bid),))
    if mode == VERTEX_WEIGHTED:
        opt = wsum
    else:
        opt = float(n) if weights is None else None
    return GeneratedInstance(inst, {"n": n, "weights": None if weights is None else list(value), "mode": mode},
                             opt, "perfect-matching" if opt is not None else None)


# ---------------------------------------------------------------------------
# Instance 1 (vertex-weighted, forces the shape of f)
# ---------------------------------------------------------------------------


def instance1_sizes(alpha: float, beta: float, n: int) -> dict:
    """Rounded per-group sizes with their real-valued targets."""
    ea = math.exp(alpha)
    real = {"U1": beta * ea * n + 1, "U2": float(n), "V1": beta * (ea - 1) * n, "V2": beta * n, "V3": float(n)}
    rounded = {"U1": ceil_count(beta * ea * n) + 1, "U2": n, "V1": ceil_count(beta * (ea - 1) * n),
               "V2": ceil_count(beta * n), "V3": n}
    return {"real": real, "rounded": rounded}


def gen_instance1(alpha: float, beta: float, n: int, m: int, f: PerturbationFunction) -> GeneratedInstance:
    """m groups; U2 (all groups) gets the lowest ids so ties favour it."""
    _check_unit("alpha", alpha)
    _check_unit("beta", beta)
    if n < 1 or m < 1:
        raise ArgumentError("n and m must be positive")
    sz = instance1_sizes(alpha, beta, n)["rounded"]
    fa = f(alpha)
    off = [OfflineBlock(n * m, fa, label="U2")]
    on, edges = [], []
    group_w = []
    for i in range(1, m + 1):
        w = f(i / m * beta)
        group_w.append(w)
        off.append(OfflineBlock(sz["U1"], w, label=f"U1,{i}"))
    u1 = {i: i for i in range(1, m + 1)}  # offline block index of U_{1,i}
    v1, v2 = {}, {}
    for i in range(1, m + 1):
        if sz["V1"] > 0:
            v1[i] = len(on)
            on.append(OnlineBlock(sz["V1"], i - 1, label=f"V1,{i}"))
    for i in range(1, m + 1):
        if sz["V2"] > 0:
            v2[i] = len(on)
            on.append(OnlineBlock(sz["V2"], m + i - 1, label=f"V2,{i}"))
    v3 = len(on)
    on.append(OnlineBlock(n * m, 2 * m, label="V3"))
    for i in range(1, m + 1):
        if i in v1:
            edges.append(EdgeBlock(u1[i], v1[i], "upper-triangle"))
        if i in v2:
            tail = (sz["U1"] - sz["V2"], sz["U1"])
            edges.append(EdgeBlock(u1[i], v2[i], "complete", offline_slice=tail))
            edges.append(EdgeBlock(0, v2[i], "complete"))
    edges.append(EdgeBlock(0, v3, "upper-triangle"))
    inst = Instance(VERTEX_WEIGHTED, tuple(off), tuple(on), tuple(edges))

    matched = sz["V1"] + sz["V2"]
    opt = n * m * fa + sum(matched * w for w in group_w)
    prelimit = n * m * fa + sum(ceil_count(beta * math.exp(alpha) * n) * w for w in group_w)
    return GeneratedInstance(
        inst, {"alpha": alpha, "beta": beta, "n": n, "m": m, "f": f.to_dict()}, float(opt),
        "instance1-opt-exact-counts",
        rounding={**instance1_sizes(alpha, beta, n), "opt_prelimit_rounded_u1": float(prelimit)})


def instance1_limit_opt(alpha: float, beta: float, f) -> float:
    """Per-(n m) optimum as n, m grow: f(alpha) + e^alpha * int_0^beta f."""
    return f(alpha) + math.exp(alpha) * f.integrate(0.0, beta)


def instance1_limit_alg(alpha: float, beta: float, f) -> float:
    """Per-(n m) Perturbed-Balance value as n, m grow."""
    return (math.exp(alpha) - 1.0) * f.integrate(0.0, beta) + (beta + 1.0 - math.exp(beta - 1.0)) * f(alpha)


def instance1_limit_ratio(alpha: float, beta: float, f) -> float:
    return instance1_limit_alg(alpha, beta, f) / instance1_limit_opt(alpha, beta, f)


def audit_instance1(gen: GeneratedInstance) -> list:
    """Recount blocks and patterns against the construction; returns mismatches."""
    p = gen.params
    sz = instance1_sizes(p["alpha"], p["beta"], p["n"])["rounded"]
    n, m = p["n"], p["m"]
    inst = gen.instance
    bad = []
    if inst.offline_blocks[0].count != n * m:
        bad.append("U2 size")
    for i in range(1, m + 1):
        if inst.offline_blocks[i].count != sz["U1"]:
            bad.append(f"U1,{i} size")
    labels = {b.label: b for b in inst.online_blocks}
    for i in range(1, m + 1):
        for part in ("V1", "V2"):
            want = sz[part]
            got = labels.get(f"{part},{i}")
            if (got.count if got else 0) != want:
                bad.append(f"{part},{i} size")
    if labels["V3"].count != n * m:
        bad.append("V3 size")
    order = [inst.online_blocks[b].label for b in inst.arrival_order]
    want_order = ([f"V1,{i}" for i in range(1, m + 1)] * (sz["V1"] > 0)
                  + [f"V2,{i}" for i in range(1, m + 1)] * (sz["V2"] > 0) + ["V3"])
    if order != want_order:
        bad.append("arrival order")
    return bad


def instance1_group_signatures(gen: GeneratedInstance) -> list:
    """Per-group structure with weights stripped; identical across groups."""
    inst = gen.instance
    sigs = []
    for i in range(1, gen.params["m"] + 1):
        parts = []
        for e in inst.edges:
            if e.offline_block == i or (e.offline_block == 0 and inst.online_blocks[e.online_block].label.endswith(f",{i}")):
                on = inst.online_blocks[e.online_block]
                parts.append((on.label.split(",")[0], on.count, e.pattern, e.offline_slice,
                              "U2" if e.offline_block == 0 else "U1", inst.offline_blocks[e.offline_block].count))
        sigs.append(tuple(parts))
    return sigs


# ---------------------------------------------------------------------------
# Instance 2 (AdWords, one unlimited vertex)
# ---------------------------------------------------------------------------


def _instance2(bids: list, n: int, params: dict, formula: str) -> GeneratedInstance:
    off = (OfflineBlock(1, 1.0, unlimited=True, label="u0"), OfflineBlock(n, 1.0, label="U"))
    on = (OnlineBlock(n, 0, label="Va"), OnlineBlock(n, 1, label="Vb"))
    edges = (EdgeBlock(0, 0, "complete", tuple(bids)),
             EdgeBlock(1, 0, "complete", 1.0),
             EdgeBlock(1, 1, "complete", 1.0))
    inst = Instance(ADWORDS, off, on, edges)
    return GeneratedInstance(inst, params, float(n + sum(bids)), formula)


def gen_instance2_canonical(alpha: float, n: int) -> GeneratedInstance:
    """Bids b_i = f(i/n)/f(alpha) from the unlimited vertex, canonical f."""
    if not (0.0 < alpha < 1.0):
        raise ArgumentError(f"alpha must lie in (0, 1), got {alpha}")
    if n < 1:
        raise ArgumentError("n must be positive")
    f = PerturbationFunction.canonical()
    fa = f(alpha)
    bids = [f(i / n) / fa for i in range(1, n + 1)]
    return _instance2(bids, n, {"alpha": alpha, "n": n, "f": f.to_dict()}, "instance2-opt")


def gen_instance2_general(alpha: float, beta: float, n: int, f: PerturbationFunction) -> GeneratedInstance:
    """Bids capped by f(i/n - alpha)/f(beta) once i >= alpha n."""
    if not (0.0 <= beta <= alpha < 1.0):
        raise ArgumentError(f"need 0 <= beta <= alpha < 1, got alpha={alpha}, beta={beta}")
    if n < 1:
        raise ArgumentError("n must be positive")
    fa, fb = f(alpha), f(beta)
    if fa <= 0.0 or fb <= 0.0:
        raise DegenerateError("f(alpha) and f(beta) must be positive")
    bids = []
    for i in range(1, n + 1):
        x = i / n
        b = f(x) / fa
        if i >= alpha * n - 1e-9:
            b = min(b, f(max(x - alpha, 0.0)) / fb)
        bids.append(b)
    return _instance2(bids, n, {"alpha": alpha, "beta": beta, "n": n, "f": f.to_dict()}, "instance2-general-opt")


def instance2_ratio_limit(alpha: float, f) -> float:
    """Expected-ratio bound (alpha int_0^alpha f + f(alpha)) / (int_0^1 f + f(alpha))."""
    return (alpha * f.integrate(0.0, alpha) + f(alpha)) / (f.integrate(0.0, 1.0) + f(alpha))


# ---------------------------------------------------------------------------
# Copy construction
# ---------------------------------------------------------------------------


def duplicate_instance(g: Instance, copies: int, opt: float | None = None) -> GeneratedInstance:
    """N copies of every vertex (offline weight w/N, online copies arrive back to back),
    with complete bipartite blocks between copy groups of adjacent pairs."""
    if g.mode != VERTEX_WEIGHTED:
        raise ArgumentError("duplication is defined for vertex-weighted instances")
    N = int(copies)
    if N < 1:
        raise ArgumentError("copies must be positive")
    us, vs, _ = g.edge_list(limit=100_000)
    n_off, n_on = g.n_offline, g.n_online
    weights = tuple(float(w) / N for w in np.repeat(g.values, N))
    off = (OfflineBlock(n_off * N, weights, label="copies"),)
    on = tuple(OnlineBlock(N, t, label=f"v{t}") for t in range(n_on))
    edges = tuple(EdgeBlock(0, int(v), "complete", offline_slice=(int(u) * N, int(u) * N + N))
                  for u, v in sorted(zip(us.tolist(), vs.tolist()), key=lambda p: (p[1], p[0])))
    inst = Instance(VERTEX_WEIGHTED, off, on, edges)
    if opt is None and n_off + n_on <= 500:
        from .oracle import opt_exact
        opt = opt_exact(g)
    maps = {"offline_origin": np.repeat(np.arange(n_off), N), "online_origin": np.repeat(np.arange(n_on), N)}
    return GeneratedInstance(inst, {"copies": N, "source_hash": g.digest()}, opt,
                             "opt-preserved-by-copies" if opt is not None else None, maps=maps)


# ---------------------------------------------------------------------------
# Random instances
# ---------------------------------------------------------------------------


def gen_random(seed: int, n_offline: int, n_online: int, density: float = 1.0, mode: str = VERTEX_WEIGHTED,
               budget_range=(0.1, 1.0), bid_range=(0.1, 1.0)) -> GeneratedInstance:
    """Reproducible random bipartite instance stored as one bid table."""
    if not (0.0 < density <= 1.0):
        raise ArgumentError(f"density must lie in (0, 1], got {density}")
    if mode not in MODES:
        raise ArgumentError(f"unknown mode {mode!r}")
    if n_offline < 1 or n_online < 1:
        raise ArgumentError("sizes must be positive")
    for lo, hi in (budget_range, bid_range):
        if not (0.0 < lo <= hi):
            raise ArgumentError("ranges must be positive and ordered")
    rng = np.random.default_rng(seed)
    values = rng.uniform(budget_range[0], budget_range[1], n_offline)
    mask = rng.random((n_offline, n_online)) < density
    if mode == VERTEX_WEIGHTED:
        table = np.where(mask, values[:, None], 0.0)
    else:
        table = np.where(mask, rng.uniform(bid_range[0], bid_range[1], (n_offline, n_online)), 0.0)
    off = (OfflineBlock(n_offline, tuple(values.tolist()), budget_known=mode != BUDGET_ADDITIVE, label="L"),)
    on = (OnlineBlock(n_online, 0, label="R"),)
    edges = (EdgeBlock(0, 0, "table", tuple(tuple(r) for r in table.tolist())),)
    params = {"seed": seed, "n_offline": n_offline, "n_online": n_online, "density": density, "mode": mode,
              "budget_range": list(budget_range), "bid_range": list(bid_range)}
    return GeneratedInstance(Instance(mode, off, on, edges), params)
