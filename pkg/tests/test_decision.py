import itertools

import numpy as np
import pytest

from dosemmr.decision import (
    Allocation,
    DecisionError,
    GridBudgetExceeded,
    allocation_mmr,
    allocation_mmr_grid,
    allocation_mmr_t2,
    allocation_worst_case_regret,
    clinical_mmr,
    pairwise_worst_case,
    t2_applicable,
)
from dosemmr.identification import Interval, Restrictions, bound_net_welfare, build_constraints
from dosemmr.model import CostSpec, DoseGrid, ThresholdDistribution, TrialEvidence, WelfareSpec, push_forward
from oracles import random_threshold_mass

SCENARIOS = {
    # cost vector: clinical dose, clinical MMR, exact allocation, allocation MMR
    "g=0": ((0, 0, 0), 2, 1 / 6, (0, 4 / 13, 9 / 13), 0.115385),
    "g=0.05t": ((0, 0.05, 0.1), 2, 0.216667, (0, 0.4, 0.6), 0.13),
    "g=0.1t": ((0, 0.1, 0.2), 2, 0.266667, (0, 0.492308, 0.507692), 0.135385),
    "g=0.15t": ((0, 0.15, 0.3), 0, 0.225, (0.584615, 0.415385, 0), 0.131538),
    "g=(0,0,0.3)": ((0, 0, 0.3), 1, 1 / 6, (4 / 13, 9 / 13, 0), 0.115385),
}


def random_system(rng, T, K):
    q = ThresholdDistribution(random_threshold_mass(rng, T))
    doses = sorted(rng.choice(T + 1, size=K, replace=False).tolist())
    ev = TrialEvidence([(t, push_forward(q, t)) for t in doses])
    return build_constraints(ev, Restrictions(), DoseGrid(T))


def brute_grid(cs, w, g, M):
    best = np.inf
    for head in itertools.product(range(M + 1), repeat=cs.T):
        if sum(head) > M:
            continue
        delta = np.array(list(head) + [M - sum(head)]) / M
        r = allocation_worst_case_regret(cs, delta, w, g)
        if r < best - 1e-12:
            best = r
    return best


# -- pairwise / clinical ------------------------------------------------------------


def test_pairwise_examples(illus_cs, illus_w, zero_cost):
    assert pairwise_worst_case(illus_cs, 2, 1, illus_w, zero_cost) == pytest.approx(1 / 6, abs=1e-6)
    assert pairwise_worst_case(illus_cs, 1, 2, illus_w, zero_cost) == pytest.approx(0.375, abs=1e-6)
    assert pairwise_worst_case(illus_cs, 1, 1, illus_w, zero_cost) == 0.0
    assert pairwise_worst_case(illus_cs, 2, 0, illus_w, zero_cost) == pytest.approx(0.4375 - 0.6458, abs=1e-4)


@pytest.mark.parametrize("name", SCENARIOS)
def test_clinical_scenarios(illus_cs, illus_w, name):
    cost, dose, value, _, _ = SCENARIOS[name]
    dec = clinical_mmr(illus_cs, illus_w, CostSpec(cost))
    assert dec.chosen_dose == dose
    assert dec.mmr_value == pytest.approx(value, abs=1e-5)
    assert dec.lp_solves == 6
    assert dec.per_dose_max_regret.min() == pytest.approx(dec.mmr_value)


def test_clinical_tie_goes_to_lowest_dose():
    # identical arms at every dose: every choice has zero regret
    ev = TrialEvidence([(t, [0.25, 0.25, 0.25, 0.25]) for t in range(3)])
    cs = build_constraints(ev, Restrictions(), DoseGrid(2))
    dec = clinical_mmr(cs, WelfareSpec([1, 0.25, 0.75, 0]), CostSpec.zero(2))
    assert dec.chosen_dose == 0 and dec.mmr_value == 0.0


# -- allocation regret ---------------------------------------------------------------


def test_allocation_regret_examples(illus_cs, illus_w, zero_cost):
    r = allocation_worst_case_regret(illus_cs, [0, 4 / 13, 9 / 13], illus_w, zero_cost)
    assert r == pytest.approx(0.1154, abs=1e-4)
    r = allocation_worst_case_regret(illus_cs, [0, 0.4, 0.6], illus_w, CostSpec.linear(2, 0.05))
    assert r == pytest.approx(0.13, abs=1e-6)


def test_pure_allocation_matches_clinical(illus_cs, illus_w):
    for name, (cost, *_rest) in SCENARIOS.items():
        g = CostSpec(cost)
        clin = clinical_mmr(illus_cs, illus_w, g)
        for t in range(3):
            r = allocation_worst_case_regret(illus_cs, Allocation.pure(2, t), illus_w, g)
            assert r == pytest.approx(clin.per_dose_max_regret[t], abs=1e-9)


def test_allocation_validation(illus_cs, illus_w, zero_cost):
    with pytest.raises(ValueError):
        allocation_worst_case_regret(illus_cs, [0.5, 0.6, 0.0], illus_w, zero_cost)
    with pytest.raises(ValueError):
        allocation_worst_case_regret(illus_cs, [0.5, 0.5], illus_w, zero_cost)


# -- grid ---------------------------------------------------------------------------


@pytest.mark.parametrize("name", SCENARIOS)
def test_grid_fine_matches_analytic(illus_cs, illus_w, name):
    cost, _, _, alloc, value = SCENARIOS[name]
    dec = allocation_mmr_grid(illus_cs, illus_w, CostSpec(cost), resolution=1000)
    assert dec.method == "grid" and dec.grid_step == 0.001
    assert dec.allocation.delta == pytest.approx(alloc, abs=1e-3)
    assert dec.mmr_value == pytest.approx(value, abs=1e-3)


def test_grid_coarsest_is_best_pure(illus_cs, illus_w, zero_cost):
    dec = allocation_mmr_grid(illus_cs, illus_w, zero_cost, resolution=1)
    clin = clinical_mmr(illus_cs, illus_w, zero_cost)
    assert dec.mmr_value == pytest.approx(clin.mmr_value, abs=1e-9)
    assert dec.allocation.delta[clin.chosen_dose] == 1.0


def test_grid_matches_brute_force(rng):
    w = WelfareSpec([1, 0.25, 0.75, 0])
    for T, K, M in ((2, 1, 12), (3, 2, 6), (3, 1, 5)):
        cs = random_system(rng, T, K)
        g = CostSpec.linear(T, 0.03)
        dec = allocation_mmr_grid(cs, w, g, resolution=M)
        assert dec.mmr_value == pytest.approx(brute_grid(cs, w, g, M), abs=1e-9)
        assert allocation_worst_case_regret(cs, dec.allocation, w, g) == pytest.approx(dec.mmr_value, abs=1e-9)


def test_refine_is_at_least_as_good_as_coarse(rng):
    w = WelfareSpec([1, 0.25, 0.75, 0])
    cs = random_system(rng, 3, 2)
    g = CostSpec.zero(3)
    coarse = allocation_mmr_grid(cs, w, g, resolution=20)
    fine = allocation_mmr_grid(cs, w, g, refine=True)
    assert fine.grid_step == 0.005
    assert fine.mmr_value <= coarse.mmr_value + 1e-12


def test_grid_budget(illus_cs, illus_w, zero_cost):
    with pytest.raises(GridBudgetExceeded) as err:
        allocation_mmr_grid(illus_cs, illus_w, zero_cost, resolution=100, budget=1000)
    assert err.value.count == 5151
    with pytest.raises(DecisionError):
        allocation_mmr_grid(illus_cs, illus_w, zero_cost, resolution=0)


# -- T = 2 rule -------------------------------------------------------------------------


def test_t2_closed_form_examples():
    dec = allocation_mmr_t2(0.4375, 0.1458, Interval(0.2708, 0.8125))
    assert dec.allocation.delta == pytest.approx((0.3077, 0.6923, 0.0), abs=1e-4)
    assert dec.mmr_value == pytest.approx(0.1154, abs=1e-4)
    assert dec.method == "analytical_t2" and dec.lp_solves == 0


def test_t2_dominance_cases():
    dec = allocation_mmr_t2(0.3, 0.2, Interval(0.35, 0.9))
    assert tuple(dec.allocation.delta) == (0.0, 1.0, 0.0) and dec.mmr_value == 0.0
    dec = allocation_mmr_t2(0.3, 0.6, Interval(0.1, 0.6))
    assert tuple(dec.allocation.delta) == (0.0, 0.0, 1.0) and dec.mmr_value == 0.0


def test_t2_lp_agrees_with_endpoints(illus_cs, illus_w):
    for cost, *_ in SCENARIOS.values():
        g = CostSpec(cost)
        om = [bound_net_welfare(illus_cs, t, illus_w, g) for t in range(3)]
        a = allocation_mmr_t2(om[0].lo, om[2].lo, om[1])
        b = allocation_mmr_t2(om[0].lo, om[2].lo, om[1], illus_cs, illus_w, g)
        assert a.allocation.delta == pytest.approx(b.allocation.delta)
        assert a.mmr_value == pytest.approx(b.mmr_value, abs=1e-9)


@pytest.mark.parametrize("name", SCENARIOS)
def test_dispatch_uses_t2_rule(illus_cs, illus_w, name):
    cost, _, _, alloc, value = SCENARIOS[name]
    assert t2_applicable(illus_cs)
    dec = allocation_mmr(illus_cs, illus_w, CostSpec(cost))
    assert dec.method == "analytical_t2"
    assert dec.allocation.delta == pytest.approx(alloc, abs=1e-5)
    assert dec.mmr_value == pytest.approx(value, abs=1e-5)


def test_dispatch_falls_back_to_grid(rng):
    cs = random_system(rng, 3, 2)
    assert not t2_applicable(cs)
    dec = allocation_mmr(cs, WelfareSpec([1, 0.25, 0.75, 0]), CostSpec.zero(3), resolution=10)
    assert dec.method == "grid"


# -- properties ---------------------------------------------------------------------


def test_planner_never_worse_than_clinician(rng):
    for _ in range(15):
        T = int(rng.integers(1, 4))
        cs = random_system(rng, T, int(rng.integers(1, T + 2)))
        w = WelfareSpec(rng.uniform(0, 1, 4))
        g = CostSpec(np.sort(rng.uniform(0, 0.2, T + 1)))
        clin = clinical_mmr(cs, w, g)
        alloc = allocation_mmr(cs, w, g, resolution=10)
        assert 0.0 <= alloc.mmr_value <= clin.mmr_value + 1e-9
        assert np.all(clin.per_dose_max_regret >= 0)


def test_scale_invariance(illus_cs, illus_w):
    g = CostSpec.linear(2, 0.1)
    base = clinical_mmr(illus_cs, illus_w, g)
    base_alloc = allocation_mmr_grid(illus_cs, illus_w, g, resolution=40)
    for lam in (0.5, 2.0, 8.0):
        dec = clinical_mmr(illus_cs, WelfareSpec(lam * illus_w.w), g.scaled(lam))
        assert dec.chosen_dose == base.chosen_dose
        assert dec.mmr_value == pytest.approx(lam * base.mmr_value, rel=1e-9)
        alloc = allocation_mmr_grid(illus_cs, WelfareSpec(lam * illus_w.w), g.scaled(lam), resolution=40)
        assert alloc.allocation.delta == pytest.approx(base_alloc.allocation.delta)
        assert alloc.mmr_value == pytest.approx(lam * base_alloc.mmr_value, rel=1e-9)


def test_maximin_differs_from_mmr(illus_cs, illus_w):
    # maximin picks the dose with the best lower welfare bound
    g = CostSpec.zero(2)
    lower = [bound_net_welfare(illus_cs, t, illus_w, g).lo for t in range(3)]
    maximin = int(np.argmax(lower))
    assert maximin == 2
    dec = clinical_mmr(illus_cs, illus_w, CostSpec((0, 0, 0.3)))
    lower = [bound_net_welfare(illus_cs, t, illus_w, CostSpec((0, 0, 0.3))).lo for t in range(3)]
    assert int(np.argmax(lower)) == 0 and dec.chosen_dose == 1


def test_point_identified_means_zero_regret(rng):
    w = WelfareSpec([1, 0.25, 0.75, 0])
    for _ in range(5):
        T = int(rng.integers(1, 4))
        cs = random_system(rng, T, T + 1)
        g = CostSpec.zero(T)
        omega = [bound_net_welfare(cs, t, w, g) for t in range(T + 1)]
        assert all(iv.width < 1e-9 for iv in omega)
        dec = clinical_mmr(cs, w, g)
        assert dec.mmr_value == pytest.approx(0.0, abs=1e-9)
        best = np.flatnonzero(np.array([iv.lo for iv in omega]) >= max(iv.lo for iv in omega) - 1e-9)
        assert dec.chosen_dose in best
