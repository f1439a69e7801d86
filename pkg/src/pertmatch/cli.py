"""Command-line entry point: ``pertmatch {generate,simulate,verify-bounds,concentration}``.

Every run writes its resolved configuration (``config.json``) next to its
outputs; ``pertmatch --config config.json`` replays it.  JSON outputs carry
the configuration hash and the tool version and contain no timestamps, so a
replay reproduces them byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from pathlib import Path

from . import __version__
from .algorithms import ALGORITHMS
from .core import FORMAT_VERSION, PerturbationFunction, load_function, load_instance, save_instance
from .errors import ArgumentError, InconclusiveError, PertMatchError
from . import bounds, instances, oracle

OUTPUT_ENV = "PERTMATCH_OUTPUT_DIR"
CSV_COLUMNS = ["instance_hash", "algorithm", "f_kind", "f_param", "step", "seed", "trials", "alg_value",
               "opt_value", "ratio", "stderr"]
CONCENTRATION_COLUMNS = ["n", "eps", "trials", "empirical", "bound", "lower_confidence", "vacuous", "passed"]
GENERATORS = ("triangle", "instance1", "instance2", "instance2-general", "duplicate", "random")


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return "" if x is None else str(x)


def _dump(obj, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    import numpy as np

    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"not serialisable: {type(o)}")


def _write_csv(path: Path, columns, rows, header_comment: str | None) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    if header_comment:
        buf.write(f"# {header_comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    path.write_text(buf.getvalue())


def _append_csv(path: Path, columns, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    new = not path.exists() or path.stat().st_size == 0
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new:
            w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def _config(args) -> dict:
    opts = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "config", "command")}
    return {"format_version": FORMAT_VERSION, "subcommand": args.command, "options": opts}


def _config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]


def _out_dir(args) -> Path:
    return Path(args.out_dir or os.environ.get(OUTPUT_ENV) or "pertmatch-out")


def _stamp(cfg: dict) -> dict:
    return {"config_hash": _config_hash(cfg), "tool_version": __version__}


def _function(args) -> PerturbationFunction:
    name = args.f
    if name == "canonical":
        return PerturbationFunction.canonical(args.M)
    if name == "linear":
        return PerturbationFunction.linear()
    if not os.path.exists(name):
        raise ArgumentError(f"--f must be canonical, linear or a function file; {name!r} not found")
    return load_function(name)


def _need(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise ArgumentError("missing required option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))


def _build_instance(args, kind: str) -> instances.GeneratedInstance:
    if kind not in GENERATORS:
        raise ArgumentError(f"unknown generator {kind!r}; choose from {', '.join(GENERATORS)}")
    if kind == "triangle":
        _need(args, "n")
        weights = [float(w) for w in args.weights.split(",")] if args.weights else None
        return instances.gen_upper_triangle(args.n, weights, args.mode)
    if kind == "instance1":
        _need(args, "alpha", "beta", "n", "m")
        return instances.gen_instance1(args.alpha, args.beta, args.n, args.m, _function(args))
    if kind == "instance2":
        _need(args, "alpha", "n")
        return instances.gen_instance2_canonical(args.alpha, args.n)
    if kind == "instance2-general":
        _need(args, "alpha", "beta", "n")
        return instances.gen_instance2_general(args.alpha, args.beta, args.n, _function(args))
    if kind == "duplicate":
        _need(args, "input", "copies")
        return instances.duplicate_instance(load_instance(args.input), args.copies)
    _need(args, "seed", "n_offline", "n_online")
    return instances.gen_random(args.seed, args.n_offline, args.n_online, args.density, args.mode,
                                tuple(args.budget_range), tuple(args.bid_range))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    cfg = _config(args)
    gen = _build_instance(args, args.generator)
    out = Path(args.output) if args.output else _out_dir(args) / f"{args.generator}.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    save_instance(gen.instance, out)
    meta = {**gen.metadata(), **_stamp(cfg), "generator": args.generator}
    _dump(meta, out.with_suffix(".meta.json"))
    _dump(cfg, out.with_suffix(".config.json"))
    print(f"wrote {out} (hash {gen.instance.digest()}, closed-form OPT {gen.opt_closed_form})")
    return 0


def _resolve_opt(args, inst, gen_opt):
    if args.opt == "oracle":
        return oracle.opt_exact(inst), "oracle"
    if args.opt == "closed-form":
        if gen_opt is None:
            raise ArgumentError("no closed-form OPT recorded for this instance")
        return gen_opt, "closed-form"
    if args.opt == "auto":
        return (gen_opt, "closed-form") if gen_opt is not None else (oracle.opt_exact(inst), "oracle")
    try:
        return float(args.opt), "given"
    except ValueError:
        raise ArgumentError(f"--opt must be auto, oracle, closed-form or a number, got {args.opt!r}") from None


def cmd_simulate(args) -> int:
    from .algorithms import RankAssignment

    cfg = _config(args)
    _need(args, "alg")
    if args.alg not in ALGORITHMS:
        raise ArgumentError(f"unknown algorithm {args.alg!r}; choose from {', '.join(ALGORITHMS)}")
    if args.instance:
        inst = load_instance(args.instance)
        meta_path = Path(args.instance).with_suffix(".meta.json")
        gen_opt = json.loads(meta_path.read_text()).get("opt_closed_form") if meta_path.exists() else None
    elif args.generator:
        gen = _build_instance(args, args.generator)
        inst, gen_opt = gen.instance, gen.opt_closed_form
    else:
        raise ArgumentError("give --instance FILE or --generator NAME")
    f = _function(args)
    opt, source = _resolve_opt(args, inst, gen_opt)
    extras = {}
    randomized = args.alg in oracle.RANDOMIZED
    if randomized and args.ranks == "grid":
        if args.y0_grid:
            est = oracle.grid_expected_ratio(inst, f, args.grid_vertex, args.y0_grid, opt, args.alg)
        else:
            rep = ALGORITHMS[args.alg](inst, f, RankAssignment.uniform_grid())
            est = oracle._estimate([rep.value], opt, None, source)
        seed, trials, step = None, est.trials, None
    elif randomized:
        est = oracle.competitive_ratio(args.alg, inst, f, args.trials, args.seed, opt, workers=args.workers)
        seed, trials, step = args.seed, args.trials, None
    else:
        rep = ALGORITHMS[args.alg](inst, f, args.step, trace=bool(args.trace))
        violations = rep.allocation.violations(inst)
        extras.update(rep.extras)
        extras["violations"] = violations
        if args.trace:
            Path(args.trace).parent.mkdir(parents=True, exist_ok=True)
            Path(args.trace).write_text(rep.trace.to_text())
        est = oracle._estimate([rep.value], opt, None, source)
        seed, trials, step = None, 1, args.step
    f_kind, f_param = f.descriptor()
    row = {"instance_hash": inst.digest(), "algorithm": args.alg, "f_kind": f_kind, "f_param": f_param,
           "step": step, "seed": seed, "trials": trials, "alg_value": est.mean * opt, "opt_value": opt,
           "ratio": est.mean, "stderr": est.stderr}
    out = _out_dir(args)
    stamp = _stamp(cfg)
    report = {**row, **stamp, "opt_source": source, "per_trial_ratios": est.values, **extras}
    if randomized and args.ranks == "grid":
        report["ranks"] = "uniform-grid"
    _dump(report, out / "run_report.json")
    _write_csv(out / "results.csv", CSV_COLUMNS, [row],
               f"pertmatch {__version__} config {stamp['config_hash']}")
    _dump(cfg, out / "config.json")
    if args.append_csv:
        _append_csv(Path(args.append_csv), CSV_COLUMNS, [row])
    print(f"{args.alg}: value {row['alg_value']:.6f} / OPT {opt:.6f} = ratio {est.mean:.6f}"
          + (f" (stderr {est.stderr:.2g})" if est.stderr else ""))
    if extras.get("violations"):
        print(f"feasibility violations: {len(extras['violations'])}", file=sys.stderr)
        return 1
    ok = True
    if args.expect_ratio_max is not None and est.mean > args.expect_ratio_max:
        ok = False
    if args.expect_ratio_min is not None and est.mean < args.expect_ratio_min:
        ok = False
    return 0 if ok else 1


def cmd_verify_bounds(args) -> int:
    cfg = _config(args)
    stamp = _stamp(cfg)
    out = _out_dir(args)
    gamma_cap = bounds.GAMMA_CANONICAL - args.gamma
    results = {**stamp}
    ok = True
    inconclusive = False
    specific = args.eq1 or args.uniqueness or args.eq5 is not None
    if args.eq1:
        rep = bounds.check_eq1(_function(args), gamma_cap, args.grid)
        results["eq1"] = rep.to_dict()
        print(f"eq1 at Gamma={gamma_cap:.9f}: worst slack {rep.worst_slack:.3e} at "
              f"(alpha={rep.worst_alpha:.4f}, beta={rep.worst_beta:.4f}) -> {'pass' if rep.passed else 'FAIL'}")
        ok &= rep.passed == (args.eq1_expect == "pass")
    if args.eq5 is not None:
        slack = bounds.check_eq5(_function(args), gamma_cap, args.eq5)
        results["eq5"] = {"alpha": args.eq5, "slack": slack}
        print(f"eq5 at alpha={args.eq5}: slack {slack:.6e}")
    if args.uniqueness:
        rep = bounds.check_uniqueness(_function(args), args.tolerance)
        results["uniqueness"] = rep.to_dict()
        print(f"uniqueness: M={rep.M:.9f}, max deviation {rep.max_deviation:.3e} -> "
              f"{'canonical' if rep.is_canonical else 'not canonical'}")
        if args.uniqueness_expect != "any":
            ok &= rep.is_canonical == (args.uniqueness_expect == "canonical")
    if args.infeasibility or not specific:
        rep = bounds.verify_gamma_infeasible(args.gamma, args.delta, args.resolution)
        results["bound"] = rep.to_dict()
        if rep.I is not None:
            print(f"gamma={args.gamma}: r={rep.r:.7f} beta*={rep.beta_star:.7f} I={rep.I:.7f} "
                  f"upper={rep.comparison_upper:.7f} err<={rep.quadrature_error:.2e} -> {rep.verdict}")
        else:
            print(f"gamma={args.gamma}: {rep.verdict} (g(0)={rep.g0:.3g}, g(1)={rep.g1:.3g})")
        if rep.verdict == "inconclusive":
            inconclusive = True
        elif args.expect != "any":
            ok &= rep.infeasible == (args.expect == "infeasible")
    _dump(results, out / "bounds_report.json")
    _dump(cfg, out / "config.json")
    if inconclusive:
        raise InconclusiveError("quadrature error bound exceeds the decision gap")
    return 0 if ok else 1


def cmd_concentration(args) -> int:
    cfg = _config(args)
    _need(args, "n", "eps")
    rep = oracle.concentration_check(args.n, args.eps, args.trials, args.seed)
    stamp = _stamp(cfg)
    out = _out_dir(args)
    row = {"n": rep.n, "eps": rep.eps, "trials": rep.trials, "empirical": rep.empirical_prob,
           "bound": rep.bound, "lower_confidence": rep.lower_confidence, "vacuous": rep.vacuous,
           "passed": rep.passed}
    _write_csv(out / "concentration.csv", CONCENTRATION_COLUMNS, [row],
               f"pertmatch {__version__} config {stamp['config_hash']}")
    _dump({**rep.to_dict(), **stamp}, out / "concentration.json")
    _dump(cfg, out / "config.json")
    print(f"n={rep.n} eps={rep.eps}: empirical {rep.empirical_prob:.6f} (99% lower {rep.lower_confidence:.6f})"
          f" vs bound {rep.bound:.6f}" + (" [vacuous bound]" if rep.vacuous else ""))
    return 0 if rep.passed else 1


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_function_opts(p):
    p.add_argument("--f", default="canonical", help="canonical, linear, or a perturbation-function JSON file")
    p.add_argument("--M", type=float, default=1.0, help="scale of the canonical function")


def _add_generator_opts(p):
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--copies", type=int)
    p.add_argument("--input", help="source instance for duplicate")
    p.add_argument("--weights", help="comma-separated offline weights for triangle")
    p.add_argument("--mode", default="vertex-weighted",
                   choices=["vertex-weighted", "adwords", "budget-additive-unknown"])
    p.add_argument("--seed", type=int)
    p.add_argument("--n-offline", type=int)
    p.add_argument("--n-online", type=int)
    p.add_argument("--density", type=float, default=1.0)
    p.add_argument("--budget-range", type=float, nargs=2, default=[0.1, 1.0])
    p.add_argument("--bid-range", type=float, nargs=2, default=[0.1, 1.0])


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pertmatch", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"pertmatch {__version__}")
    p.add_argument("--config", help="replay a stored config.json")
    sub = p.add_subparsers(dest="command")

    g = sub.add_parser("generate", help="write an instance file and its metadata sidecar")
    g.add_argument("generator", nargs="?", choices=GENERATORS)
    _add_generator_opts(g)
    _add_function_opts(g)
    g.add_argument("--output", "-o", help="instance path (default: <out-dir>/<generator>.json)")
    g.add_argument("--out-dir")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("simulate", help="run an algorithm and report its ratio against OPT")
    s.add_argument("--instance", help="instance file")
    s.add_argument("--generator", choices=GENERATORS, help="generate the instance in-process instead")
    _add_generator_opts(s)
    _add_function_opts(s)
    s.add_argument("--alg", choices=sorted(ALGORITHMS))
    s.add_argument("--step", type=float, default=1e-3)
    s.add_argument("--trials", type=int, default=1)
    s.add_argument("--ranks", choices=["random", "grid"], default="random")
    s.add_argument("--y0-grid", type=int, default=0, help="average over this many midpoint ranks of one vertex")
    s.add_argument("--grid-vertex", type=int, default=0, help="vertex whose rank the --y0-grid sweeps")
    s.add_argument("--opt", default="auto", help="auto, oracle, closed-form, or a number")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--trace", help="write the allocation trace here (balance-style algorithms)")
    s.add_argument("--append-csv", help="also append the result row to this CSV")
    s.add_argument("--expect-ratio-max", type=float)
    s.add_argument("--expect-ratio-min", type=float)
    s.add_argument("--out-dir")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify-bounds", help="inequality checks and the infeasibility certificate")
    v.add_argument("--gamma", type=float, default=0.0003, help="Gamma = 1 - 1/e - gamma")
    v.add_argument("--delta", type=float, default=0.05)
    v.add_argument("--resolution", type=float, default=1e-5)
    v.add_argument("--infeasibility", action="store_true", help="run the certificate alongside other checks")
    v.add_argument("--expect", choices=["infeasible", "feasible", "any"], default="infeasible")
    v.add_argument("--eq1", action="store_true")
    v.add_argument("--eq1-expect", choices=["pass", "fail"], default="pass")
    v.add_argument("--grid", type=int, default=200)
    v.add_argument("--eq5", type=float, metavar="ALPHA")
    v.add_argument("--uniqueness", action="store_true")
    v.add_argument("--uniqueness-expect", choices=["canonical", "non-canonical", "any"], default="any")
    v.add_argument("--tolerance", type=float, default=1e-6)
    _add_function_opts(v)
    v.add_argument("--out-dir")
    v.set_defaults(func=cmd_verify_bounds)

    c = sub.add_parser("concentration", help="Monte Carlo check of sorted-uniform concentration")
    c.add_argument("--n", type=int)
    c.add_argument("--eps", type=float)
    c.add_argument("--trials", type=int, default=10000)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out-dir")
    c.set_defaults(func=cmd_concentration)
    return p


def _replay(parser, path: str):
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ArgumentError(f"cannot read config {path}: {exc}") from None
    if cfg.get("format_version") != FORMAT_VERSION:
        raise ArgumentError(f"unsupported config format_version {cfg.get('format_version')!r}")
    sub = cfg.get("subcommand")
    if sub not in ("generate", "simulate", "verify-bounds", "concentration"):
        raise ArgumentError(f"config has unknown subcommand {sub!r}")
    args = parser.parse_args([sub])
    known = vars(args)
    for k, v in cfg.get("options", {}).items():
        if k not in known:
            raise ArgumentError(f"config option {k!r} is not valid for {sub}")
        setattr(args, k, v)
    return args


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.config:
            args = _replay(parser, args.config)
        if not args.command:
            parser.print_help()
            return 2
        return args.func(args)
    except PertMatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ArgumentError.exit_code


if __name__ == "__main__":
    sys.exit(main())
