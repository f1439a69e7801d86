"""Exact offline optima for small instances, competitive-ratio estimation and
the Monte Carlo check of the order-statistics concentration bound."""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from .core import VERTEX_WEIGHTED, Instance
from .errors import ArgumentError, CapacityError

MATCHING_LIMIT = 500
LP_LIMIT = 100
LP_TOL = 1e-7


def _dense_weights(instance: Instance) -> np.ndarray:
    u, v, w = instance.edge_list()
    W = np.zeros((instance.n_offline, instance.n_online))
    W[u, v] = w
    return W


def opt_exact(instance: Instance) -> float:
    """Offline optimum: max-weight matching (vertex-weighted) or the budgeted LP."""
    if instance.mode == VERTEX_WEIGHTED:
        if instance.n_offline + instance.n_online > MATCHING_LIMIT:
            raise CapacityError(f"matching oracle limited to {MATCHING_LIMIT} vertices; use the closed-form OPT")
        W = _dense_weights(instance)
        rows, cols = optimize.linear_sum_assignment(W, maximize=True)
        return float(W[rows, cols].sum())
    if instance.n_offline > LP_LIMIT or instance.n_online > LP_LIMIT:
        raise CapacityError(f"LP oracle limited to {LP_LIMIT}x{LP_LIMIT}; use the closed-form OPT")
    return _budgeted_lp(instance)


def _budgeted_lp(instance: Instance) -> float:
    """max sum_u r_u  s.t.  r_u <= B_u,  r_u <= sum_v w_uv x_uv,  sum_u x_uv <= 1,  x >= 0."""
    u, v, w = instance.edge_list()
    n_off, n_on, n_e = instance.n_offline, instance.n_online, len(u)
    if n_e == 0:
        return 0.0
    c = np.concatenate([np.zeros(n_e), -np.ones(n_off)])
    A = np.zeros((n_off + n_on, n_e + n_off))
    A[u, np.arange(n_e)] = -w
    A[np.arange(n_off), n_e + np.arange(n_off)] = 1.0
    A[n_off + v, np.arange(n_e)] = 1.0
    b = np.concatenate([np.zeros(n_off), np.ones(n_on)])
    caps = [None if unl else float(B) for B, unl in zip(instance.values, instance.unlimited)]
    bounds = [(0, None)] * n_e + [(0, cap) for cap in caps]
    res = optimize.linprog(c, A_ub=A, b_ub=b, bounds=bounds, method="highs")
    if res.status != 0:
        raise ArgumentError(f"LP solver failed: {res.message}")
    return float(-res.fun)


# ---------------------------------------------------------------------------
# Brute-force references (independent of scipy's solvers)
# ---------------------------------------------------------------------------


def brute_force_matching(instance: Instance) -> float:
    """Exhaustive max-weight matching over all permutations; at most 5 x 5."""
    if instance.mode != VERTEX_WEIGHTED:
        raise ArgumentError("matching enumeration needs a vertex-weighted instance")
    n = max(instance.n_offline, instance.n_online)
    if n > 7:
        raise CapacityError("matching enumeration limited to 7 vertices per side")
    W = np.zeros((n, n))
    W[:instance.n_offline, :instance.n_online] = _dense_weights(instance)
    cols = np.arange(n)
    return float(max(W[list(p), cols].sum() for p in itertools.permutations(range(n))))


def brute_force_budgeted(instance: Instance) -> float:
    """Budgeted optimum by enumerating every vertex of every linear piece.

    For each set S of offline vertices declared capped, the objective
    sum_{u in S} B_u + sum_{u not in S} sum_v w_uv x_uv is linear on the
    polytope where capped vertices spend at least B_u and the others at most
    B_u.  Each such LP is solved by visiting all basic solutions.  Intended
    for instances of at most 3 x 3.
    """
    if instance.mode == VERTEX_WEIGHTED:
        raise ArgumentError("budgeted enumeration needs an AdWords or budget-additive instance")
    n_off, n_on = instance.n_offline, instance.n_online
    if n_off * n_on > 9:
        raise CapacityError("budgeted enumeration limited to 3 x 3")
    W = _dense_weights(instance)
    pairs = [(a, b) for a in range(n_off) for b in range(n_on) if W[a, b] > 0]
    k = len(pairs)
    if k == 0:
        return 0.0
    B = np.where(instance.unlimited, W.sum(axis=1) + 1.0, instance.values)
    # rows: online capacity (<= 1), offline spend (<= B or >= B), nonnegativity (-x <= 0)
    G = np.zeros((n_on + n_off + k, k))
    for j, (a, b) in enumerate(pairs):
        G[b, j] = 1.0
        G[n_on + a, j] = W[a, b]
        G[n_on + n_off + j, j] = -1.0
    h = np.concatenate([np.ones(n_on), B, np.zeros(k)])
    combos = np.array(list(itertools.combinations(range(len(h)), k)))
    mats = G[combos]
    rhs = h[combos]
    det = np.linalg.det(mats)
    ok = np.abs(det) > 1e-10
    sols = np.linalg.solve(mats[ok], rhs[ok][..., None])[..., 0]
    best = 0.0
    for S in itertools.product((False, True), repeat=n_off):
        S = np.array(S)
        sign = np.ones(len(h))
        sign[n_on:n_on + n_off][S] = -1.0  # capped: spend >= B  <=>  -spend <= -B
        lhs = (sols @ G.T) * sign
        feas = np.all(lhs <= h * sign + 1e-9, axis=1)
        if not feas.any():
            continue
        spend = sols[feas] @ G[n_on:n_on + n_off].T
        val = np.where(S, B, spend).sum(axis=1)
        best = max(best, float(val.max()))
    return best


# ---------------------------------------------------------------------------
# Decomposition check
# ---------------------------------------------------------------------------


@dataclass
class OptEquality:
    opt_g: float
    opt_gprime: float
    equal: bool


def opt_equality_check(g: Instance, tol: float = LP_TOL) -> OptEquality:
    """Compare the optimum of a budget-additive instance with that of its stage decomposition."""
    from .algorithms.budget_additive import decompose_instance

    a = opt_exact(g)
    b = opt_exact(decompose_instance(g).instance)
    return OptEquality(a, b, abs(a - b) <= tol * max(1.0, abs(a)))


# ---------------------------------------------------------------------------
# Ratio estimation
# ---------------------------------------------------------------------------

RANDOMIZED = ("pr", "pr-adwords")


@dataclass
class RatioEstimate:
    mean: float
    stderr: float
    trials: int
    values: list
    seed: int | None
    opt: float
    opt_source: str
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "trials": self.trials, "seed": self.seed,
                "opt": self.opt, "opt_source": self.opt_source, "values": self.values, **self.extras}


def trial_seeds(seed: int, trials: int) -> list:
    """Per-trial seeds: the k-th spawned child of SeedSequence(seed)."""
    return [int(child.generate_state(1)[0]) for child in np.random.SeedSequence(seed).spawn(trials)]


def _estimate(values, opt, seed, source, extras=None) -> RatioEstimate:
    vals = np.asarray(values, dtype=float) / opt
    se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
    return RatioEstimate(float(vals.mean()), se, len(vals), vals.tolist(), seed, float(opt), source, extras or {})


def _one_trial(args):
    from .algorithms import ALGORITHMS, RankAssignment

    alg, instance, f, s = args
    return ALGORITHMS[alg](instance, f, RankAssignment.random(s)).value


def competitive_ratio(algorithm_id: str, instance: Instance, f, trials: int = 1, seed: int | None = 0,
                      opt: float | None = None, step: float = 1e-3, workers: int = 1) -> RatioEstimate:
    """Run an algorithm and divide by OPT (given closed form, else the exact oracle)."""
    from .algorithms import ALGORITHMS

    if algorithm_id not in ALGORITHMS:
        raise ArgumentError(f"unknown algorithm {algorithm_id!r}")
    if trials < 1:
        raise ArgumentError("trials must be at least 1")
    source = "closed-form" if opt is not None else "oracle"
    if opt is None:
        opt = opt_exact(instance)
    if opt <= 0:
        raise ArgumentError("OPT is zero; ratio undefined")
    if algorithm_id in RANDOMIZED:
        if seed is None:
            raise ArgumentError("randomized algorithms need a seed")
        jobs = [(algorithm_id, instance, f, s) for s in trial_seeds(seed, trials)]
        if workers > 1:
            with ProcessPoolExecutor(workers) as ex:
                values = list(ex.map(_one_trial, jobs))
        else:
            values = [_one_trial(j) for j in jobs]
        return _estimate(values, opt, seed, source)
    if trials != 1:
        raise ArgumentError(f"{algorithm_id} is deterministic; use trials=1")
    report = ALGORITHMS[algorithm_id](instance, f, step)
    return _estimate([report.value], opt, seed, source, {"step": step})


def grid_expected_ratio(instance: Instance, f, vertex: int, points: int, opt: float | None = None,
                        algorithm_id: str = "pr-adwords") -> RatioEstimate:
    """Expected ratio of Perturbed-Ranking over a midpoint grid for one vertex's rank,
    every other vertex on the uniform grid."""
    from .algorithms import ALGORITHMS, RankAssignment

    if points < 1:
        raise ArgumentError("points must be positive")
    source = "closed-form" if opt is not None else "oracle"
    if opt is None:
        opt = opt_exact(instance)
    values = []
    for k in range(points):
        ranks = RankAssignment.uniform_grid({vertex: (k + 0.5) / points})
        values.append(ALGORITHMS[algorithm_id](instance, f, ranks).value)
    est = _estimate(values, opt, None, source, {"grid_points": points, "grid_vertex": vertex})
    est.stderr = 0.0  # deterministic quadrature, not sampling
    return est


# ---------------------------------------------------------------------------
# Concentration of uniform order statistics
# ---------------------------------------------------------------------------


@dataclass
class ConcentrationReport:
    n: int
    eps: float
    trials: int
    successes: int
    empirical_prob: float
    bound: float
    lower_confidence: float
    confidence: float
    vacuous: bool
    passed: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def concentration_bound(n: int) -> float:
    """1 - 2 n exp(-sqrt(n) / 6)."""
    return 1.0 - 2.0 * n * math.exp(-math.sqrt(n) / 6.0)


def concentration_check(n: int, eps: float, trials: int, seed: int = 0, confidence: float = 0.99,
                        chunk_elements: int = 2_000_000) -> ConcentrationReport:
    """Probability that all sorted uniforms sit within eps of i/n, against the bound."""
    if n < 1 or trials < 1:
        raise ArgumentError("n and trials must be positive")
    lo = 4.0 * n ** -0.25
    if not (lo < eps < 1.0):
        raise ArgumentError(f"hypothesis 4 n^(-1/4) < eps < 1 fails: need {lo:.6g} < eps < 1, got eps={eps}")
    rng = np.random.default_rng(seed)
    grid = np.arange(1, n + 1) / n
    per = max(1, chunk_elements // n)
    ok = 0
    done = 0
    while done < trials:
        c = min(per, trials - done)
        y = np.sort(rng.random((c, n)), axis=1)
        ok += int(np.count_nonzero(np.max(np.abs(y - grid), axis=1) <= eps))
        done += c
    p = ok / trials
    bound = concentration_bound(n)
    alpha = 1.0 - confidence
    lower = 0.0 if ok == 0 else float(stats.beta.ppf(alpha, ok, trials - ok + 1))
    vacuous = bound <= 0.0
    return ConcentrationReport(n, eps, trials, ok, p, bound, lower, confidence, vacuous,
                               vacuous or lower >= bound)
