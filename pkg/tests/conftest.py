"""Every algorithm run made anywhere in the suite is audited for feasibility.

The wrappers are installed before test modules import the algorithms, so
``from pertmatch.algorithms import run_...`` picks up the audited versions.
"""

import functools

import pertmatch.algorithms as algorithms
import pertmatch.algorithms.balance as balance
import pertmatch.algorithms.budget_additive as budget_additive
import pertmatch.algorithms.ranking as ranking

AUDIT = {"runs": 0, "violations": []}
ACCEPTANCE: dict = {}

_BALANCE_STYLE = {"run_perturbed_balance_vw", "run_msvv", "run_budget_additive"}


def _audited(fn):
    @functools.wraps(fn)
    def wrapper(instance, f, *args, **kwargs):
        report = fn(instance, f, *args, **kwargs)
        step = report.step if fn.__name__ in _BALANCE_STYLE and report.step else 0.0
        bad = report.allocation.violations(instance, tol=max(1e-9, step))
        AUDIT["runs"] += 1
        if bad:
            AUDIT["violations"].append((fn.__name__, instance.digest(), bad[:3]))
        assert not bad, f"{fn.__name__} produced an infeasible allocation: {bad[:3]}"
        return report

    wrapper.audited = True
    return wrapper


def _install():
    for mod in (balance, ranking, budget_additive):
        for name in ("run_perturbed_balance_vw", "run_msvv", "run_perturbed_ranking_integral",
                     "run_perturbed_ranking_adwords", "run_budget_additive"):
            fn = getattr(mod, name, None)
            if fn is not None and not getattr(fn, "audited", False) and fn.__module__ == mod.__name__:
                setattr(mod, name, _audited(fn))
    for key, fn in list(algorithms.ALGORITHMS.items()):
        mod = {"pb": balance, "msvv": balance, "pr": ranking, "pr-adwords": ranking,
               "budget-additive": budget_additive}[key]
        algorithms.ALGORITHMS[key] = getattr(mod, fn.__name__)
        setattr(algorithms, fn.__name__, getattr(mod, fn.__name__))


_install()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
    terminalreporter.write_line(
        f"feasibility audit: {AUDIT['runs']} algorithm runs, {len(AUDIT['violations'])} with violations")
