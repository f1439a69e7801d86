import json
import math
from pathlib import Path

import numpy as np
import pytest

from pertmatch import instances, oracle
from pertmatch.core import ADWORDS, BUDGET_ADDITIVE, VERTEX_WEIGHTED, EdgeBlock, Instance, OfflineBlock, \
    OnlineBlock, PerturbationFunction
from pertmatch.errors import ArgumentError, CapacityError

CAN = PerturbationFunction.canonical()
FROZEN = json.loads((Path(__file__).parent / "data" / "brute_force_optima.json").read_text())


def frozen_instance(section, case):
    p = FROZEN[section]["params"]
    mode = ADWORDS if section.startswith("adwords") else VERTEX_WEIGHTED
    g = instances.gen_random(case["seed"], p["n_offline"], p["n_online"], p["density"], mode,
                             tuple(p["budget_range"]), tuple(p["bid_range"])).instance
    assert g.digest() == case["instance_hash"]
    return g


class TestOptExact:
    def test_single_edge(self):
        assert oracle.opt_exact(instances.gen_upper_triangle(1).instance) == 1.0

    def test_triangle(self):
        assert oracle.opt_exact(instances.gen_upper_triangle(2).instance) == 2.0

    def test_capacity_guard(self):
        with pytest.raises(CapacityError):
            oracle.opt_exact(instances.gen_upper_triangle(300).instance)
        with pytest.raises(CapacityError):
            oracle.opt_exact(instances.gen_upper_triangle(101, mode=ADWORDS).instance)

    def test_budget_cap_binds(self):
        g = Instance(ADWORDS, [OfflineBlock(1, 0.5)], [OnlineBlock(2)], [EdgeBlock(0, 0, bid=1.0)])
        assert oracle.opt_exact(g) == pytest.approx(0.5)

    def test_unlimited(self):
        g = Instance(ADWORDS, [OfflineBlock(1, 1.0, unlimited=True)], [OnlineBlock(3)], [EdgeBlock(0, 0, bid=2.0)])
        assert oracle.opt_exact(g) == pytest.approx(6.0)

    @pytest.mark.parametrize("case", FROZEN["adwords_3x3"]["cases"][:5], ids=lambda c: str(c["seed"]))
    def test_lp_matches_frozen_enumeration(self, case):
        assert oracle.opt_exact(frozen_instance("adwords_3x3", case)) == pytest.approx(case["opt"], abs=1e-7)

    @pytest.mark.parametrize("case", FROZEN["matching_5x5"]["cases"][:5], ids=lambda c: str(c["seed"]))
    def test_matching_matches_frozen_enumeration(self, case):
        assert oracle.opt_exact(frozen_instance("matching_5x5", case)) == pytest.approx(case["opt"], abs=1e-12)

    def test_seed7_golden(self):
        g = instances.gen_random(7, 3, 3, 1.0, ADWORDS, (0.2, 1.5), (0.1, 1.0)).instance
        assert oracle.opt_exact(g) == pytest.approx(oracle.brute_force_budgeted(g), abs=1e-2)


class TestBruteForce:
    def test_budgeted_hand_case(self):
        # two bidders for one item: the larger capped bid wins
        g = Instance(ADWORDS, [OfflineBlock(2, (0.3, 0.8))], [OnlineBlock(1)], [EdgeBlock(0, 0, bid=1.0)])
        assert oracle.brute_force_budgeted(g) == pytest.approx(1.0)

    def test_budgeted_size_guard(self):
        with pytest.raises(CapacityError):
            oracle.brute_force_budgeted(instances.gen_upper_triangle(4, mode=ADWORDS).instance)

    def test_matching_hand_case(self):
        g = instances.gen_upper_triangle(3, [3.0, 2.0, 1.0]).instance
        assert oracle.brute_force_matching(g) == 6.0


class TestDecompositionEquality:
    def test_random_instances(self):
        for s in range(5):
            g = instances.gen_random(s, 4, 6, 0.7, BUDGET_ADDITIVE, (0.5, 2.0)).instance
            assert oracle.opt_equality_check(g).equal


class TestRatio:
    def test_seeds_are_stable(self):
        assert oracle.trial_seeds(5, 3) == oracle.trial_seeds(5, 3)
        assert oracle.trial_seeds(5, 3)[:2] == oracle.trial_seeds(5, 2)

    def test_estimate_fields(self):
        g = instances.gen_upper_triangle(8).instance
        est = oracle.competitive_ratio("pr", g, CAN, trials=20, seed=1)
        assert est.trials == 20 and len(est.values) == 20
        assert est.mean == pytest.approx(np.mean(est.values))
        assert est.stderr == pytest.approx(np.std(est.values, ddof=1) / math.sqrt(20))
        assert est.opt_source == "oracle"

    def test_reproducible(self):
        g = instances.gen_upper_triangle(8).instance
        a = oracle.competitive_ratio("pr", g, CAN, trials=10, seed=3)
        b = oracle.competitive_ratio("pr", g, CAN, trials=10, seed=3)
        assert a.values == b.values

    def test_deterministic_needs_one_trial(self):
        g = instances.gen_upper_triangle(4).instance
        with pytest.raises(ArgumentError):
            oracle.competitive_ratio("pb", g, CAN, trials=3)
        assert oracle.competitive_ratio("pb", g, CAN, opt=4.0).opt_source == "closed-form"

    def test_unknown_algorithm(self):
        with pytest.raises(ArgumentError):
            oracle.competitive_ratio("nope", instances.gen_upper_triangle(2).instance, CAN)

    def test_grid_ratio(self):
        g = instances.gen_instance2_canonical(0.1, 50)
        est = oracle.grid_expected_ratio(g.instance, CAN, 0, 50, g.opt_closed_form)
        assert est.trials == 50 and est.stderr == 0.0
        assert 0.55 < est.mean < 0.7


class TestConcentration:
    def test_bound_formula(self):
        assert oracle.concentration_bound(10000) == pytest.approx(1 - 2e4 * math.exp(-100 / 6))
        assert oracle.concentration_bound(10000) == pytest.approx(0.99884, abs=1e-5)

    def test_vacuous_bound_passes(self):
        rep = oracle.concentration_check(1000, 0.8, 1000, seed=0)
        assert rep.vacuous and rep.passed

    def test_hypothesis_enforced(self):
        with pytest.raises(ArgumentError, match="hypothesis"):
            oracle.concentration_check(100, 0.45, 10)

    def test_reproducible(self):
        a = oracle.concentration_check(400, 0.95, 300, seed=9)
        b = oracle.concentration_check(400, 0.95, 300, seed=9)
        assert a.successes == b.successes
