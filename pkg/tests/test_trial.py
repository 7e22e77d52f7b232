import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dosemmr.identification import Consistent, Restrictions, check_consistency
from dosemmr.model import CostSpec, DoseGrid, TrialEvidence, net_welfare_vector
from dosemmr.trial import (
    IngestionError,
    SubjectRecord,
    TrialDesign,
    as_if_decide,
    ingest,
    read_records,
    records_from_counts,
    repair_evidence,
    simulate_regret,
    write_records,
)


def illustration_counts():
    # integer counts reproducing the published arms with 12 subjects each
    return {0: [3, 9, 0, 0], 2: [3, 1, 6, 2]}


# -- ingestion ---------------------------------------------------------------------


def test_ingest_frequencies():
    recs = [SubjectRecord(0, 1, 0), SubjectRecord(0, 1, 0), SubjectRecord(0, 0, 0), SubjectRecord(2, 1, 1)]
    ev = ingest(recs, DoseGrid(2))
    assert ev.doses == (0, 2)
    assert ev.arm_at(0).outcomes.p == pytest.approx([1 / 3, 2 / 3, 0, 0])
    assert ev.arm_at(0).n == 3
    assert ev.arm_at(2).outcomes.p == pytest.approx([0, 0, 0, 1])


def test_ingest_orders_arms_by_dose():
    ev = ingest([SubjectRecord(2, 0, 0), SubjectRecord(1, 0, 0)], DoseGrid(2))
    assert ev.doses == (1, 2)


@pytest.mark.parametrize(
    "rec",
    [SubjectRecord(3, 0, 0), SubjectRecord(-1, 0, 0), SubjectRecord(0, 2, 0), SubjectRecord(0, 0, "x")],
)
def test_ingest_rejects_bad_records(rec):
    with pytest.raises(IngestionError):
        ingest([SubjectRecord(0, 0, 0), rec], DoseGrid(2))


def test_ingest_rejects_empty():
    with pytest.raises(IngestionError):
        ingest([], DoseGrid(2))


def test_csv_round_trip(tmp_path):
    recs = records_from_counts(illustration_counts())
    text = write_records(recs, tmp_path / "r.csv")
    assert text.splitlines()[0] == "dose,d,e"
    back = read_records(tmp_path / "r.csv")
    assert back == recs
    assert read_records(text) == recs
    ev = ingest(back, DoseGrid(2))
    assert ev.arm_at(2).outcomes.p == pytest.approx([0.25, 1 / 12, 0.5, 1 / 6])


def test_csv_with_ids_and_semicolons():
    text = "dose;d;e;id\n0;1;0;a\n2;0;1;b\n"
    recs = read_records(io.StringIO(text))
    assert recs == [SubjectRecord(0, 1, 0, "a"), SubjectRecord(2, 0, 1, "b")]
    assert read_records(write_records(recs)) == recs


@pytest.mark.parametrize(
    "text",
    ["dose,d\n0,1\n", "dose,d,e\n0,1\n", "dose,d,e\nx,1,0\n", "dose,d,e\n0,1,7\n", ""],
)
def test_csv_malformed(text, tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(IngestionError):
        read_records(p)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=40))
def test_round_trip_property(rows):
    recs = [SubjectRecord(*r) for r in rows]
    assert read_records(write_records(recs)) == recs
    ev = ingest(recs, DoseGrid(3))
    assert sum(a.n for a in ev.arms) == len(recs)


# -- as-if decisions ------------------------------------------------------------------


def test_as_if_matches_population_decision(illus_w):
    recs = records_from_counts(illustration_counts())
    clin = as_if_decide(recs, DoseGrid(2), illus_w, CostSpec.zero(2))
    assert clin.chosen_dose == 2
    assert clin.mmr_value == pytest.approx(1 / 6, abs=1e-6)
    alloc = as_if_decide(recs, DoseGrid(2), illus_w, CostSpec.zero(2), mode="allocation")
    assert alloc.allocation.delta == pytest.approx((0, 4 / 13, 9 / 13), abs=1e-6)


def test_as_if_inconsistent_and_repair(illus_w):
    # adverse-event rate falls with dose, which no threshold model allows
    counts = {0: [5, 0, 5, 0], 2: [10, 0, 0, 0]}
    recs = records_from_counts(counts)
    from dosemmr.identification import InconsistentEvidence

    with pytest.raises(InconsistentEvidence):
        as_if_decide(recs, DoseGrid(2), illus_w, CostSpec.zero(2))
    dec = as_if_decide(recs, DoseGrid(2), illus_w, CostSpec.zero(2), repair=True)
    assert dec.chosen_dose in (0, 1, 2)


def test_repair_is_identity_on_consistent(illus_cs):
    ev = illus_cs.evidence
    fixed = repair_evidence(ev, DoseGrid(2))
    for a, b in zip(ev.arms, fixed.arms):
        assert a.outcomes.p == pytest.approx(b.outcomes.p, abs=1e-9)


def test_repair_sup_distance():
    ev = TrialEvidence([(0, [0.5, 0, 0.5, 0]), (2, [1, 0, 0, 0])])
    fixed = repair_evidence(ev, DoseGrid(2))
    assert isinstance(check_consistency(fixed, Restrictions(), DoseGrid(2)), Consistent)
    dist = max(np.abs(a.outcomes.p - b.outcomes.p).max() for a, b in zip(ev.arms, fixed.arms))
    # P[e=1] must rise from 0.5 to at most 0: meeting halfway costs 0.25
    assert dist == pytest.approx(0.25, abs=1e-8)


# -- simulation -------------------------------------------------------------------------


def test_design_validation():
    with pytest.raises(ValueError):
        TrialDesign((2, 0), (10, 10))
    with pytest.raises(ValueError):
        TrialDesign((0, 2), (10,))
    with pytest.raises(ValueError):
        TrialDesign((0, 2), (10, 0))


def test_simulation_deterministic(illus_q, illus_w):
    design = TrialDesign((0, 2), (50, 50))
    a = simulate_regret(illus_q, design, illus_w, CostSpec.zero(2), replications=30, seed=7)
    b = simulate_regret(illus_q, design, illus_w, CostSpec.zero(2), replications=30, seed=7)
    assert np.array_equal(a.regrets, b.regrets)
    assert a.to_dict() == b.to_dict()
    c = simulate_regret(illus_q, design, illus_w, CostSpec.zero(2), replications=30, seed=8)
    assert a.to_dict() != c.to_dict()


def test_simulation_prefix_independent_of_replication_count(illus_q, illus_w):
    design = TrialDesign((0, 2), (20, 20))
    short = simulate_regret(illus_q, design, illus_w, CostSpec.zero(2), replications=10, seed=3, repair=True)
    long = simulate_regret(illus_q, design, illus_w, CostSpec.zero(2), replications=25, seed=3, repair=True)
    assert np.array_equal(short.regrets, long.regrets[:10])


def test_simulation_large_sample_limit(illus_q, illus_w):
    design = TrialDesign((0, 2), (1_000_000, 1_000_000))
    omega = net_welfare_vector(illus_q, illus_w, CostSpec.zero(2))
    clin = simulate_regret(illus_q, design, illus_w, CostSpec.zero(2), replications=20, seed=1)
    assert clin.inconsistent == 0
    assert clin.frequencies == {"2": 1.0}
    assert clin.summary["max"] == pytest.approx(0.0, abs=1e-12)
    alloc = simulate_regret(illus_q, design, illus_w, CostSpec.zero(2), mode="allocation", replications=20, seed=1)
    limit = omega.max() - np.array([0, 4 / 13, 9 / 13]) @ omega
    assert alloc.summary["mean"] == pytest.approx(limit, abs=2e-3)


def test_simulation_single_subject_regret_range(illus_q, illus_w):
    g = CostSpec.zero(2)
    omega = net_welfare_vector(illus_q, illus_w, g)
    rep = simulate_regret(illus_q, TrialDesign((0, 2), (1, 1)), illus_w, g, replications=40, seed=11)
    assert rep.inconsistent + rep.regrets.size == 40
    assert np.all(rep.regrets >= 0)
    assert np.all(rep.regrets <= omega.max() - omega.min() + 1e-12)
