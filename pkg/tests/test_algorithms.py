import math

import numpy as np
import pytest
from scipy.optimize import brentq

from pertmatch.algorithms import (RankAssignment, StageBuilder, check_apb_trace, decompose_instance,
                                  matching_trace, project_trace, rank_event_holds, run_budget_additive,
                                  run_msvv, run_perturbed_balance_vw, run_perturbed_ranking_adwords,
                                  run_perturbed_ranking_integral)
from pertmatch.algorithms.waterfill import WaterFiller
from pertmatch.core import (ADWORDS, BUDGET_ADDITIVE, VERTEX_WEIGHTED, EdgeBlock, Instance, OfflineBlock,
                            OnlineBlock, PerturbationFunction, Trace)
from pertmatch.errors import ArgumentError, ModeError
from pertmatch import instances, oracle

F = PerturbationFunction.canonical()
E1 = 1 - 1 / math.e


def star(weights, mode=VERTEX_WEIGHTED, bids=None, budgets=None):
    """One online vertex adjacent to every offline vertex."""
    vals = tuple(budgets if budgets is not None else weights)
    blocks = [OfflineBlock(len(vals), vals, budget_known=mode != BUDGET_ADDITIVE)]
    if bids is None:
        edges = [EdgeBlock(0, 0)]
    else:
        edges = [EdgeBlock(0, 0, "table", tuple((b,) for b in bids))]
    return Instance(mode, blocks, [OnlineBlock(1)], edges)


class TestWaterFiller:
    def test_step_limits(self):
        with pytest.raises(ArgumentError):
            WaterFiller(F, 0.0, [1.0])
        with pytest.raises(ArgumentError):
            WaterFiller(F, 0.05, [1.0])

    def test_mode_guard(self):
        with pytest.raises(ModeError):
            run_perturbed_balance_vw(star([1.0], ADWORDS, bids=[1.0], budgets=[1.0]), F)

    def test_inadmissible_function_rejected(self):
        with pytest.raises(ArgumentError):
            run_perturbed_balance_vw(star([1.0, 1.0]), PerturbationFunction.canonical(2.0))


class TestPerturbedBalance:
    def test_symmetric_split(self):
        r = run_perturbed_balance_vw(star([1.0, 1.0]), F, 1e-3)
        assert np.allclose(r.allocation.offline_mass(), [0.5, 0.5], atol=1e-3)

    def test_two_by_two_triangle(self):
        g = instances.gen_upper_triangle(2).instance
        assert run_perturbed_balance_vw(g, F, 1e-3).value == pytest.approx(1.5, abs=2e-3)

    def test_weighted_levels_equalise(self):
        # final levels satisfy f(x1) = 0.5 f(x2) with x1 + x2 = 1
        x1 = brentq(lambda x: F(x) - 0.5 * F(1 - x), 0.0, 1.0)
        r = run_perturbed_balance_vw(star([1.0, 0.5]), F, 1e-3)
        assert r.allocation.offline_mass()[0] == pytest.approx(x1, abs=2e-3)

    def test_unit_triangle_ratio(self):
        g = instances.gen_upper_triangle(500).instance
        r = run_perturbed_balance_vw(g, F, 1e-3)
        assert r.value / 500 == pytest.approx(E1, abs=0.01)

    def test_deterministic(self):
        g = instances.gen_upper_triangle(50, np.linspace(1, 0.2, 50)).instance
        a = run_perturbed_balance_vw(g, F, 1e-3)
        b = run_perturbed_balance_vw(g, F, 1e-3)
        assert a.value == b.value
        assert np.array_equal(a.allocation.offline_mass(), b.allocation.offline_mass())

    def test_step_halving(self):
        g = instances.gen_upper_triangle(40, np.linspace(1, 0.3, 40)).instance
        h = 4e-3
        v1 = run_perturbed_balance_vw(g, F, h).value
        v2 = run_perturbed_balance_vw(g, F, h / 2).value
        # constant pinned for weighted triangles: |diff| <= C h with C = n
        assert abs(v1 - v2) <= 40 * h

    def test_trace_replays_to_allocation(self):
        g = instances.gen_upper_triangle(4, [1.0, 0.9, 0.8, 0.7]).instance
        r = run_perturbed_balance_vw(g, F, 1e-3, trace=True)
        assert np.allclose(r.trace.replay_mass(g.n_offline), r.allocation.offline_mass())
        assert r.trace.header["step"] == 1e-3


class TestMSVV:
    def test_budget_ratio_split(self):
        g = star(None, ADWORDS, bids=[1.0, 1.0], budgets=[1.0, 2.0])
        r = run_msvv(g, F, 1e-3)
        assert np.allclose(r.allocation.spent(), [1 / 3, 2 / 3], atol=2e-3)

    def test_equal_split(self):
        g = star(None, ADWORDS, bids=[1.0, 1.0], budgets=[1.0, 1.0])
        assert np.allclose(run_msvv(g, F, 1e-3).allocation.spent(), [0.5, 0.5], atol=1e-3)

    def test_budget_exhaustion(self):
        g = Instance(ADWORDS, [OfflineBlock(1, 0.5)], [OnlineBlock(3)], [EdgeBlock(0, 0, bid=1.0)])
        r = run_msvv(g, F, 1e-3)
        assert r.allocation.spent()[0] == pytest.approx(0.5, abs=1e-9)
        assert r.value == pytest.approx(0.5)

    def test_unit_triangle(self):
        g = instances.gen_upper_triangle(500, mode=ADWORDS).instance
        assert run_msvv(g, F, 1e-3).value / 500 == pytest.approx(E1, abs=0.01)

    def test_unlimited_budget_never_binds(self):
        g = Instance(ADWORDS, [OfflineBlock(1, 1.0, unlimited=True)], [OnlineBlock(5)],
                     [EdgeBlock(0, 0, bid=1.0)])
        assert run_msvv(g, F, 1e-3).value == pytest.approx(5.0)


class TestRanking:
    def test_rank_modes(self):
        g = instances.gen_upper_triangle(4).instance
        assert np.allclose(RankAssignment.uniform_grid().ranks(g), [0.25, 0.5, 0.75, 1.0])
        assert RankAssignment.uniform_grid({0: 0.1}).ranks(g)[0] == 0.1
        with pytest.raises(ArgumentError):
            RankAssignment.deterministic([0.1]).ranks(g)
        with pytest.raises(ArgumentError):
            RankAssignment("random")

    def test_lower_rank_wins(self):
        g = star([1.0, 1.0])
        r = run_perturbed_ranking_integral(g, F, RankAssignment.deterministic([0.7, 0.2]))
        assert np.allclose(r.allocation.offline_mass(), [0.0, 1.0])

    def test_tie_to_lowest_id(self):
        r = run_perturbed_ranking_integral(star([1.0, 1.0]), F, RankAssignment.deterministic([0.5, 0.5]))
        assert np.allclose(r.allocation.offline_mass(), [1.0, 0.0])

    def test_weight_beats_rank(self):
        r = run_perturbed_ranking_integral(star([1.0, 0.1]), F, RankAssignment.deterministic([0.9, 0.0]))
        # f(0.9) = 0.095 beats 0.1 * f(0) = 0.063
        assert r.allocation.offline_mass()[0] == 1.0

    def test_triangle_value_fixed_seed(self):
        g = instances.gen_upper_triangle(6).instance
        v = run_perturbed_ranking_integral(g, F, RankAssignment.random(0)).value
        assert v == run_perturbed_ranking_integral(g, F, RankAssignment.random(0)).value
        assert 1 <= v <= 6

    def test_adwords_pours_in_priority_order(self):
        g = star(None, ADWORDS, bids=[1.0, 1.0], budgets=[0.3, 5.0])
        r = run_perturbed_ranking_adwords(g, F, RankAssignment.deterministic([0.0, 0.5]))
        assert np.allclose(r.allocation.spent(), [0.3, 0.7])
        assert r.value == pytest.approx(1.0)

    def test_adwords_bid_scales_priority(self):
        g = star(None, ADWORDS, bids=[0.2, 1.0], budgets=[5.0, 5.0])
        r = run_perturbed_ranking_adwords(g, F, RankAssignment.deterministic([0.0, 0.5]))
        assert np.allclose(r.allocation.spent(), [0.0, 1.0])

    def test_mode_guards(self):
        with pytest.raises(ModeError):
            run_perturbed_ranking_adwords(star([1.0]), F, RankAssignment.random(0))
        with pytest.raises(ModeError):
            run_perturbed_ranking_integral(star(None, ADWORDS, [1.0], [1.0]), F, RankAssignment.random(0))


def staged(budgets, bid_rows):
    """Budget-additive instance with bid table rows per offline vertex."""
    return Instance(BUDGET_ADDITIVE, [OfflineBlock(len(budgets), tuple(budgets), budget_known=False)],
                    [OnlineBlock(len(bid_rows[0]))], [EdgeBlock(0, 0, "table", tuple(map(tuple, bid_rows)))])


class TestBudgetAdditive:
    def test_stage_budgets(self):
        d = decompose_instance(staged([5.0], [[2.0, 2.0, 2.0]]))
        assert d.instance.values.tolist() == [2.0, 2.0, 1.0]
        assert d.revealed_at.tolist() == [2]
        assert d.created_at.tolist() == [0, 1, 2]

    def test_lower_triangle_zero_pattern(self):
        tab = np.asarray(decompose_instance(staged([5.0], [[2.0, 2.0, 2.0]])).instance.edges[0].bid)
        assert tab[1, 0] == 0.0 and tab[1, 1] == 2.0 and tab[0, 2] == 2.0

    def test_budget_never_revealed(self):
        d = decompose_instance(staged([10.0], [[1.0, 1.0]]))
        assert d.instance.values.tolist() == [1.0, 1.0]
        assert d.revealed_at.tolist() == [-1]

    def test_exact_budget_skips_empty_stage(self):
        sb = StageBuilder([2.0])
        assert sb.arrive(0, [(0, 2.0)]) == [0]
        assert sb.arrive(1, [(0, 1.0)]) == []
        assert sb.revealed_at[0] == 1

    def test_nonpositive_budget(self):
        with pytest.raises(ArgumentError):
            StageBuilder([0.0])

    def test_single_stage(self):
        r = run_budget_additive(staged([1.0], [[1.0]]), F, 1e-3)
        assert r.value == pytest.approx(1.0)

    def test_actual_dominates_virtual(self):
        g = staged([5.0, 3.0], [[2.0, 2.0, 2.0], [1.0, 1.0, 1.0]])
        r = run_budget_additive(g, F, 1e-3)
        assert r.extras["actual_value"] >= r.extras["virtual_value"] - 1e-9

    def test_virtual_matches_msvv_on_decomposition(self):
        g = staged([5.0, 3.0], [[2.0, 2.0, 2.0], [1.0, 1.0, 1.0]])
        r = run_budget_additive(g, F, 1e-3)
        m = run_msvv(decompose_instance(g).instance, F, 1e-3)
        assert r.extras["virtual_value"] == pytest.approx(m.value, abs=1e-9)

    def test_mode_guard(self):
        with pytest.raises(ModeError):
            decompose_instance(star([1.0]))


class TestApproximateBalance:
    def test_pb_trace_passes(self):
        g = instances.gen_upper_triangle(5, [1.0, 0.9, 0.7, 0.6, 0.5]).instance
        h = 1e-3
        r = run_perturbed_balance_vw(g, F, h, trace=True)
        assert check_apb_trace(r.trace, g, F, 2 * h).ok

    def test_bad_pour_detected(self):
        g = star([1.0, 1.0])
        t = Trace.from_events([(0, 0, 0.6), (0, 0, 0.1)])
        res = check_apb_trace(t, g, F, 1e-6)
        assert not res.ok and res.first_violation == (0, 0, 0.1)

    def test_mismatch_rejected(self):
        with pytest.raises(ArgumentError):
            check_apb_trace(Trace.from_events([(0, 5, 0.1)]), star([1.0]), F, 1e-3)

    def test_projected_ranking_trace(self):
        base = instances.gen_upper_triangle(3, [1.0, 0.8, 0.6]).instance
        n = 400
        dup = instances.duplicate_instance(base, n, opt=oracle.opt_exact(base))
        eps = 4 / math.sqrt(n)
        seed = next(s for s in range(50) if rank_event_holds(RankAssignment.random(s).ranks(dup.instance),
                                                            dup.maps["offline_origin"], n, eps))
        r = run_perturbed_ranking_integral(dup.instance, F, RankAssignment.random(seed))
        t = project_trace(matching_trace(r), dup.maps["online_origin"], dup.maps["offline_origin"], n)
        assert check_apb_trace(t, base, F, eps).ok
