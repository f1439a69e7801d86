"""Numerical checks of the inequality systems that constrain f, and the
certified-quadrature infeasibility computation for AdWords ratios."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate, optimize

from .errors import ArgumentError, DegenerateError, DomainError

GAMMA_CANONICAL = 1.0 - 1.0 / math.e
ROOT_TOL = 1e-12


def _pass_tolerance(f) -> float:
    return 1e-7 if f.kind == "tabulated" else 1e-9


def _grid(resolution: int, f, lo=0.0, hi=1.0) -> np.ndarray:
    if resolution < 1:
        raise ArgumentError("grid resolution must be positive")
    pts = np.linspace(lo, hi, resolution + 1)
    extra = f.breakpoint_xs()
    extra = extra[(extra >= lo) & (extra <= hi)]
    return np.unique(np.concatenate([pts, extra]))


@dataclass
class ConstraintReport:
    constraint: str
    grid: dict
    worst_alpha: float
    worst_beta: float | None
    worst_slack: float
    worst_left: float
    worst_right: float
    tolerance: float
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# Vertex-weighted constraint family
# ---------------------------------------------------------------------------


def eq1_sides(f, gamma_cap: float, alpha, beta):
    """Left (beta + 1 - e^(beta-1) - G) f(alpha) and right (1 - (1-G) e^alpha) int_0^beta f."""
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    left = (beta + 1.0 - np.exp(beta - 1.0) - gamma_cap) * f(alpha)
    right = (1.0 - (1.0 - gamma_cap) * np.exp(alpha)) * f.antiderivative(beta)
    return left, right


def check_eq1(f, gamma_cap: float, grid_resolution: int = 200, region=None) -> ConstraintReport:
    """Scan the (alpha, beta) grid for the smallest slack.

    ``region`` = (alpha_lo, alpha_hi, beta_lo, beta_hi) restricts the scan.
    """
    if not f.admissible:
        raise ArgumentError("check_eq1 needs an admissible f")
    a_lo, a_hi, b_lo, b_hi = region if region is not None else (0.0, 1.0, 0.0, 1.0)
    A = _grid(grid_resolution, f, a_lo, a_hi)
    Bv = _grid(grid_resolution, f, b_lo, b_hi)
    fa = f(A)
    Fb = f.antiderivative(Bv)
    left = np.outer(fa, Bv + 1.0 - np.exp(Bv - 1.0) - gamma_cap)
    right = np.outer(1.0 - (1.0 - gamma_cap) * np.exp(A), Fb)
    slack = left - right
    i, j = np.unravel_index(np.argmin(slack), slack.shape)
    tol = _pass_tolerance(f)
    return ConstraintReport("eq1", {"resolution": grid_resolution, "points": [len(A), len(Bv)],
                                    "region": [a_lo, a_hi, b_lo, b_hi]},
                            float(A[i]), float(Bv[j]), float(slack[i, j]), float(left[i, j]),
                            float(right[i, j]), tol, bool(slack[i, j] >= -tol))


@dataclass
class UniquenessReport:
    M: float
    max_deviation: float
    worst_x: float
    is_canonical: bool

    def to_dict(self) -> dict:
        return asdict(self)


def check_uniqueness(f, tolerance: float = 1e-6, grid_points: int = 20001) -> UniquenessReport:
    """Best scale M = inf f(a) / (1 - e^(a-1)) and the distance from M (1 - e^(x-1))."""
    x = _grid(grid_points - 1, f)
    vals = f(x)
    if np.max(vals) <= 0.0:
        raise DegenerateError("f is identically zero")
    inner = x[(x > 0.0) & (x < 1.0)]
    M = float(np.min(f(inner) / (1.0 - np.exp(inner - 1.0))))
    dev = np.abs(vals - M * (1.0 - np.exp(x - 1.0)))
    k = int(np.argmax(dev))
    return UniquenessReport(M, float(dev[k]), float(x[k]), bool(dev[k] <= tolerance))


# ---------------------------------------------------------------------------
# AdWords constraint family
# ---------------------------------------------------------------------------


def check_eq5(f, gamma_cap: float, alpha: float) -> float:
    """(1-G) f(alpha) - (G - alpha) int_0^alpha f - G int_alpha^1 f."""
    if not (0.0 <= alpha <= 1.0):
        raise DomainError("alpha must lie in [0, 1]")
    left = (1.0 - gamma_cap) * f(alpha)
    right = (gamma_cap - alpha) * f.integrate(0.0, alpha) + gamma_cap * f.integrate(alpha, 1.0)
    return float(left - right)


def capped_shift_integral(f, alpha: float, ratio: float) -> float:
    """int_alpha^1 min{f(x), ratio * f(x - alpha)} dx, split at kinks and crossovers."""
    if alpha >= 1.0:
        return 0.0
    knots = {alpha, 1.0}
    for b in f.breakpoint_xs():
        for x in (b, b + alpha):
            if alpha < x < 1.0:
                knots.add(float(x))
    knots = sorted(knots)

    def diff(x):
        return f.scalar(x) - ratio * f.scalar(x - alpha)

    cuts = []
    for a, b in zip(knots, knots[1:]):
        xs = np.linspace(a, b, 257)[1:-1]
        if len(xs) < 2:
            continue
        d = np.array([diff(x) for x in xs])
        for k in np.flatnonzero(np.sign(d[:-1]) * np.sign(d[1:]) < 0):
            cuts.append(optimize.brentq(diff, xs[k], xs[k + 1], xtol=1e-15))
    pieces = sorted(set(knots) | set(cuts))
    total = 0.0
    for a, b in zip(pieces, pieces[1:]):
        if b <= a:
            continue
        mid = 0.5 * (a + b)
        shifted = diff(mid) > 0.0
        if shifted:
            total += ratio * f.integrate(max(a - alpha, 0.0), b - alpha)
        else:
            total += f.integrate(a, b)
    return float(total)


def check_eq6(f, gamma_cap: float, alpha: float, beta: float) -> float:
    """(1-G) f(alpha) - (G - alpha) int_0^alpha f - (G - beta) int_alpha^1 min{f(x), f(alpha)/f(beta) f(x-alpha)}."""
    if alpha < beta:
        raise ArgumentError(f"need alpha >= beta, got alpha={alpha}, beta={beta}")
    if not (0.0 <= beta and alpha <= 1.0):
        raise DomainError("alpha and beta must lie in [0, 1]")
    fb = f(beta)
    if fb <= 0.0:
        raise DegenerateError("f(beta) must be positive")
    ratio = f(alpha) / fb
    left = (1.0 - gamma_cap) * f(alpha)
    right = (gamma_cap - alpha) * f.integrate(0.0, alpha) + (gamma_cap - beta) * capped_shift_integral(f, alpha, ratio)
    return float(left - right)


def scan_eq5(f, gamma_cap: float, grid_resolution: int = 1000) -> ConstraintReport:
    xs = _grid(grid_resolution, f)
    slack = np.array([check_eq5(f, gamma_cap, a) for a in xs])
    k = int(np.argmin(slack))
    tol = _pass_tolerance(f)
    left = (1.0 - gamma_cap) * f(xs[k])
    return ConstraintReport("eq5", {"resolution": grid_resolution, "points": [len(xs)]}, float(xs[k]), None,
                            float(slack[k]), float(left), float(left - slack[k]), tol, bool(slack[k] >= -tol))


# ---------------------------------------------------------------------------
# Infeasibility certificate
# ---------------------------------------------------------------------------


def g_function(beta, delta: float, gamma: float):
    """(delta + e gamma + delta e gamma)(e^(beta-1) - e^-1) + gamma - beta delta."""
    c = delta + math.e * gamma + delta * math.e * gamma
    return c * (np.exp(np.asarray(beta, dtype=float) - 1.0) - math.exp(-1.0)) + gamma - np.asarray(beta) * delta


def _bisect(fn, lo, hi, tol=ROOT_TOL):
    flo = fn(lo)
    for _ in range(200):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if (fm > 0) == (flo > 0) and fm != 0.0:
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def beta_star(delta: float, gamma: float, strict: bool = True) -> float | None:
    """Root of g on [0, 1] by bisection.

    With ``strict`` the sign pattern g(0) > 0 > g(1) is required; otherwise a
    root is still returned when g(0) >= 0 >= g(1), and None when there is none.
    """
    g0 = float(g_function(0.0, delta, gamma))
    g1 = float(g_function(1.0, delta, gamma))
    if not (g0 > 0.0 > g1):
        if strict:
            raise DomainError(f"g has no sign change on [0, 1]: g(0)={g0:.6g}, g(1)={g1:.6g}")
        if g0 == 0.0:
            return 0.0
        if not (g0 >= 0.0 >= g1):
            return None
    return _bisect(lambda b: float(g_function(b, delta, gamma)), 0.0, 1.0)


def cap_coefficient(alpha, gamma_cap: float, delta: float):
    """(1 - e^alpha (1-G)) / ((1+delta) G)."""
    return (1.0 - np.exp(alpha) * (1.0 - gamma_cap)) / ((1.0 + delta) * gamma_cap)


def _h(alpha, gamma_cap, delta, bstar, r):
    alpha = np.asarray(alpha, dtype=float)
    c = 1.0 - gamma_cap
    t1 = (gamma_cap - alpha) * (alpha - c * (np.exp(alpha) - 1.0))
    k = cap_coefficient(alpha, gamma_cap, delta)
    with np.errstate(divide="ignore", invalid="ignore"):
        xc = np.log((1.0 - k) / (c * (1.0 - k * np.exp(-alpha))))
    xc = np.clip(xc, alpha, r)
    capped = k * ((xc - alpha) - c * (np.exp(xc - alpha) - 1.0))
    plain = (r - xc) - c * (np.exp(r) - np.exp(xc))
    t2 = (gamma_cap - bstar) * (capped + plain)
    return (t1 + t2) / c


def compute_h(alpha: float, gamma_cap: float, delta: float, bstar: float, r: float) -> float:
    """Lower bound on f(alpha) implied by the AdWords constraints, for alpha in (0, r).

    The min-integrand switches from the capped branch to 1 - e^x (1-G) at a
    single crossover, so both pieces integrate in closed form.
    """
    if not (0.0 < alpha < r):
        raise DomainError(f"alpha must lie in (0, r={r}), got {alpha}")
    return float(_h(alpha, gamma_cap, delta, bstar, r))


def h_by_quadrature(alpha: float, gamma_cap: float, delta: float, bstar: float, r: float,
                    resolution: float = 1e-6) -> float:
    """Midpoint-rule evaluation of h, independent of the closed form."""
    c = 1.0 - gamma_cap
    k = float(cap_coefficient(alpha, gamma_cap, delta))

    def mid(a, b, fn):
        n = max(1, int(math.ceil((b - a) / resolution)))
        x = a + (np.arange(n) + 0.5) * (b - a) / n
        return float(np.sum(fn(x)) * (b - a) / n)

    first = mid(0.0, alpha, lambda x: 1.0 - np.exp(x) * c)
    second = mid(alpha, r, lambda x: np.minimum(1.0 - np.exp(x) * c, k * (1.0 - np.exp(x - alpha) * c)))
    return ((gamma_cap - alpha) * first + (gamma_cap - bstar) * second) / c


@dataclass
class BoundReport:
    gamma: float
    delta: float
    Gamma: float
    r: float
    r_residual: float
    r_from_gamma_formula: float
    beta_star: float | None
    g_at_beta_star: float | None
    g0: float
    g1: float
    I: float | None
    quadrature_error: float | None
    comparison_upper: float
    margin: float | None
    resolution: float
    infeasible: bool
    verdict: str

    def to_dict(self) -> dict:
        return asdict(self)


def _simpson(fn, a, b, resolution):
    n = max(2, int(math.ceil((b - a) / resolution)))
    n += n % 2
    x = np.linspace(a, b, n + 1)
    y = fn(x)
    hstep = (b - a) / n
    val = hstep / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum())
    # fourth derivative estimated on a coarse grid, doubled for safety
    m = 64
    xc = np.linspace(a, b, m + 1)
    d = (b - a) / m
    f4 = 2.0 * float(np.max(np.abs(np.diff(fn(xc), 4)))) / d ** 4
    trunc = (b - a) * hstep ** 4 / 180.0 * f4
    rounding = 1e-15 * (n + 1) * float(np.max(np.abs(y))) * (b - a)
    return float(val), trunc + rounding + 1e-16


def verify_gamma_infeasible(gamma: float, delta: float = 0.05, resolution: float = 1e-5) -> BoundReport:
    """Integrate max{h, 1 - e^a (1-G)} over [0, r] and compare with r + 1 - e^(r-1) - G."""
    if gamma < 0.0 or delta <= 0.0:
        raise ArgumentError("need gamma >= 0 and delta > 0")
    if not (0.0 < resolution <= 1e-2):
        raise ArgumentError("resolution must lie in (0, 1e-2]")
    G = GAMMA_CANONICAL - gamma
    c = 1.0 - G
    r = -math.log(c)
    upper = r + 1.0 - math.exp(r - 1.0) - G
    g0 = float(g_function(0.0, delta, gamma))
    g1 = float(g_function(1.0, delta, gamma))
    hypothesis = gamma > 0.0 and g0 > 0.0 > g1
    bstar = beta_star(delta, gamma, strict=False)
    base = dict(gamma=gamma, delta=delta, Gamma=G, r=r, r_residual=abs(1.0 - math.exp(r) * c),
                r_from_gamma_formula=-math.log(1.0 - gamma), g0=g0, g1=g1, comparison_upper=upper,
                resolution=resolution)
    if bstar is None:
        return BoundReport(**base, beta_star=None, g_at_beta_star=None, I=None, quadrature_error=None,
                           margin=None, infeasible=False, verdict="hypothesis-failed")

    def low(a):
        return 1.0 - np.exp(a) * c

    def integrand(a):
        return np.maximum(_h(a, G, delta, bstar, r), low(a))

    # split at the switches of the max so each Simpson piece is smooth
    xs = np.linspace(0.0, r, 4001)
    d = _h(xs, G, delta, bstar, r) - low(xs)
    cuts = [0.0]
    for k in np.flatnonzero(np.sign(d[:-1]) * np.sign(d[1:]) < 0):
        cuts.append(optimize.brentq(lambda a: float(_h(a, G, delta, bstar, r) - low(a)), xs[k], xs[k + 1],
                                    xtol=1e-15))
    cuts.append(r)
    I, err = 0.0, 0.0
    for a, b in zip(cuts, cuts[1:]):
        v, e = _simpson(integrand, a, b, resolution)
        I += v
        err += e
    margin = I - upper
    if not hypothesis:
        verdict, infeasible = "hypothesis-failed", False
    elif margin - err > 0.0:
        verdict, infeasible = "infeasible", True
    elif margin + err < 0.0:
        verdict, infeasible = "not-refuted", False
    else:
        verdict, infeasible = "inconclusive", False
    return BoundReport(**base, beta_star=bstar, g_at_beta_star=float(g_function(bstar, delta, gamma)), I=I,
                       quadrature_error=err, margin=margin, infeasible=infeasible, verdict=verdict)


def adaptive_integral(fn, a: float, b: float) -> float:
    """scipy quad wrapper used for independent cross-checks."""
    return float(integrate.quad(fn, a, b, limit=500, epsabs=1e-11, epsrel=1e-11)[0])
