"""Subject-level trial data, plug-in ("as-if") decisions, and their Monte Carlo regret."""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import linprog
from .decision import (
    AllocationDecision,
    ClinicalDecision,
    allocation_mmr,
    clinical_mmr,
)
from .identification import (
    InconsistentEvidence,
    Restrictions,
    UnsupportedRestriction,
    build_constraints,
    restriction_rows,
)
from .model import (
    CELLS,
    Arm,
    CostSpec,
    DoseGrid,
    OutcomeDistribution,
    ThresholdDistribution,
    TrialEvidence,
    WelfareSpec,
    net_welfare_vector,
    push_forward,
    quadrant_masks,
)

RECORD_FIELDS = ("dose", "d", "e")


class IngestionError(ValueError):
    pass


@dataclass(frozen=True)
class SubjectRecord:
    arm_dose: int
    d: int
    e: int
    subject_id: str | None = None


@dataclass(frozen=True)
class TrialDesign:
    doses: tuple[int, ...]
    sizes: tuple[int, ...]

    def __post_init__(self):
        doses = tuple(int(t) for t in self.doses)
        sizes = tuple(int(n) for n in self.sizes)
        if not doses or len(doses) != len(sizes):
            raise ValueError("design needs one size per arm dose")
        if any(b <= a for a, b in zip(doses, doses[1:])):
            raise ValueError(f"design doses must be strictly increasing, got {doses}")
        if min(sizes) < 1:
            raise ValueError("arm sizes must be positive")
        object.__setattr__(self, "doses", doses)
        object.__setattr__(self, "sizes", sizes)


@dataclass(frozen=True)
class RegretReport:
    replications: int
    seed: int
    mode: str
    regrets: np.ndarray
    frequencies: dict[str, float]
    inconsistent: int = 0
    summary: dict[str, float] = field(default_factory=dict)

    @classmethod
    def from_regrets(cls, regrets, decisions, seed, mode, replications, inconsistent):
        regrets = np.asarray(regrets, dtype=float)
        counts = Counter(decisions)
        total = sum(counts.values())
        freqs = {k: counts[k] / total for k in sorted(counts)} if total else {}
        summary = {}
        if regrets.size:
            summary = {
                "mean": float(regrets.mean()),
                "max": float(regrets.max()),
                "q50": float(np.quantile(regrets, 0.5)),
                "q90": float(np.quantile(regrets, 0.9)),
                "q99": float(np.quantile(regrets, 0.99)),
            }
        return cls(replications, seed, mode, regrets, freqs, inconsistent, summary)

    def to_dict(self) -> dict:
        return {
            "replications": self.replications,
            "seed": self.seed,
            "mode": self.mode,
            "inconsistent": self.inconsistent,
            "summary": self.summary,
            "frequencies": self.frequencies,
            "regrets": [float(r) for r in self.regrets],
        }


# --------------------------------------------------------------------------
# Ingestion
# --------------------------------------------------------------------------


def _binary(value, name, where):
    if value in (0, 1) and not isinstance(value, bool) or value in ("0", "1"):
        return int(value)
    raise IngestionError(f"{where}: field {name!r} must be 0 or 1, got {value!r}")


def ingest(records: Iterable[SubjectRecord], grid: DoseGrid) -> TrialEvidence:
    """Empirical outcome frequencies per distinct arm dose."""
    counts: dict[int, np.ndarray] = {}
    n_seen = 0
    for k, rec in enumerate(records):
        where = f"record {k}" + (f" (id {rec.subject_id})" if rec.subject_id else "")
        dose = rec.arm_dose
        if isinstance(dose, bool) or int(dose) != dose or not 0 <= dose <= grid.T:
            raise IngestionError(f"{where}: dose {dose!r} outside 0..{grid.T}")
        d = _binary(rec.d, "d", where)
        e = _binary(rec.e, "e", where)
        counts.setdefault(int(dose), np.zeros(4, dtype=np.int64))[CELLS.index((d, e))] += 1
        n_seen += 1
    if not n_seen:
        raise IngestionError("no subject records")
    return evidence_from_counts({t: c for t, c in sorted(counts.items())})


def evidence_from_counts(counts: dict[int, Sequence[int]]) -> TrialEvidence:
    arms = []
    for dose in sorted(counts):
        c = np.asarray(counts[dose], dtype=np.int64)
        n = int(c.sum())
        arms.append(Arm(int(dose), OutcomeDistribution(c / n), n))
    return TrialEvidence(arms)


def read_records(source) -> list[SubjectRecord]:
    """Parse ``dose,d,e[,id]`` delimited text; any malformed row is an error."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        text = Path(source).read_text()
    elif hasattr(source, "read"):
        text = source.read()
    else:
        text = str(source)
    sample = text[:2048]
    try:
        dialect = csv.Sniffer().sniff(sample, delimiters=",;\t")
    except csv.Error:
        dialect = csv.excel
    reader = csv.reader(io.StringIO(text), dialect)
    try:
        header = [h.strip().lower() for h in next(reader)]
    except StopIteration:
        raise IngestionError("record file is empty") from None
    if header[:3] != list(RECORD_FIELDS) or len(header) > 4 or (
        len(header) == 4 and header[3] != "id"
    ):
        raise IngestionError(f"header must be dose,d,e[,id], got {','.join(header)}")
    out = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise IngestionError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        dose_s, d_s, e_s = (c.strip() for c in row[:3])
        try:
            dose = int(dose_s)
        except ValueError:
            raise IngestionError(f"line {lineno}: dose {dose_s!r} is not an integer") from None
        where = f"line {lineno}"
        out.append(
            SubjectRecord(
                dose,
                _binary(d_s, "d", where),
                _binary(e_s, "e", where),
                row[3].strip() if len(row) == 4 else None,
            )
        )
    return out


def write_records(records: Iterable[SubjectRecord], path=None) -> str:
    buf = io.StringIO()
    recs = list(records)
    with_id = any(r.subject_id is not None for r in recs)
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RECORD_FIELDS + (("id",) if with_id else ()))
    for r in recs:
        row = [r.arm_dose, r.d, r.e]
        if with_id:
            row.append(r.subject_id or "")
        writer.writerow(row)
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def records_from_counts(counts: dict[int, Sequence[int]]) -> list[SubjectRecord]:
    out = []
    for dose in sorted(counts):
        for cell, n in zip(CELLS, counts[dose]):
            out.extend(SubjectRecord(dose, cell[0], cell[1]) for _ in range(int(n)))
    return out


# --------------------------------------------------------------------------
# Repair of sampling-noise inconsistencies
# --------------------------------------------------------------------------


def repair_evidence(
    evidence: TrialEvidence, grid: DoseGrid, restrictions: Restrictions | None = None
) -> TrialEvidence:
    """Closest consistent evidence in the sup norm over all arm cells.

    Solves ``min tau`` over threshold distributions ``q`` subject to
    ``|quadrant sums of q - observed| <= tau`` for every arm and cell, plus
    restriction rows, and returns the arms implied by the optimal ``q``.
    """
    restrictions = restrictions or Restrictions()
    evidence.validate(grid)
    T = grid.T
    n = (T + 2) ** 2
    if restrictions.independence:
        raise UnsupportedRestriction("repair supports only the linear restrictions")
    r_rows, _ = restriction_rows(T, restrictions)
    fixed_A = np.vstack([np.ones(n)] + r_rows)
    fixed_b = np.zeros(fixed_A.shape[0])
    fixed_b[0] = 1.0
    arm_rows, arm_rhs = [], []
    for arm in evidence.arms:
        masks = quadrant_masks(T, arm.dose).reshape(4, n).astype(float)
        arm_rows.append(masks)
        arm_rhs.append(arm.outcomes.p)
    arm_A = np.vstack(arm_rows)
    arm_b = np.concatenate(arm_rhs)
    r = arm_A.shape[0]
    # variables: q (n), tau (1), s_up (r), s_dn (r)
    nv = n + 1 + 2 * r
    A = np.zeros((fixed_A.shape[0] + 2 * r, nv))
    A[: fixed_A.shape[0], :n] = fixed_A
    top = fixed_A.shape[0]
    # A q - tau + s_up = p   and   A q + tau - s_dn = p
    A[top : top + r, :n] = arm_A
    A[top : top + r, n] = -1.0
    A[top : top + r, n + 1 : n + 1 + r] = np.eye(r)
    A[top + r :, :n] = arm_A
    A[top + r :, n] = 1.0
    A[top + r :, n + 1 + r :] = -np.eye(r)
    b = np.concatenate([fixed_b, arm_b, arm_b])
    c = np.zeros(nv)
    c[n] = 1.0
    out = linprog.minimize(c, A, b)
    if not out.optimal:
        raise InconsistentEvidence("restrictions alone admit no threshold distribution")
    mass = np.clip(out.point[:n], 0.0, None).reshape(T + 2, T + 2)
    q = ThresholdDistribution(mass / mass.sum())
    return TrialEvidence(
        [Arm(arm.dose, push_forward(q, arm.dose), arm.n) for arm in evidence.arms]
    )


# --------------------------------------------------------------------------
# As-if decisions
# --------------------------------------------------------------------------


def decide_from_evidence(
    evidence: TrialEvidence,
    grid: DoseGrid,
    w: WelfareSpec,
    g: CostSpec,
    restrictions: Restrictions | None = None,
    mode: str = "clinical",
    resolution: int = 100,
    refine: bool = False,
    repair: bool = False,
) -> ClinicalDecision | AllocationDecision:
    cs = build_constraints(evidence, restrictions, grid)
    if not cs.feasible and repair:
        cs = build_constraints(repair_evidence(evidence, grid, restrictions), restrictions, grid)
    if mode == "clinical":
        return clinical_mmr(cs, w, g)
    if mode in ("allocation", "allocate"):
        return allocation_mmr(cs, w, g, resolution=resolution, refine=refine)
    raise ValueError(f"unknown decision mode {mode!r}")


def as_if_decide(
    records: Iterable[SubjectRecord],
    grid: DoseGrid,
    w: WelfareSpec,
    g: CostSpec,
    restrictions: Restrictions | None = None,
    mode: str = "clinical",
    resolution: int = 100,
    refine: bool = False,
    repair: bool = False,
):
    """Treat empirical frequencies as the true arm distributions and decide."""
    return decide_from_evidence(
        ingest(records, grid), grid, w, g, restrictions, mode, resolution, refine, repair
    )


def _decision_key(decision) -> str:
    if isinstance(decision, ClinicalDecision):
        return str(decision.chosen_dose)
    return "(" + ", ".join(f"{v:.2f}" for v in decision.allocation.delta) + ")"


def simulate_regret(
    true_q: ThresholdDistribution,
    design: TrialDesign,
    w: WelfareSpec,
    g: CostSpec,
    restrictions: Restrictions | None = None,
    mode: str = "clinical",
    replications: int = 100,
    seed: int = 0,
    resolution: int = 100,
    refine: bool = False,
    repair: bool = False,
) -> RegretReport:
    """Monte Carlo distribution of the true regret of the as-if rule.

    Replication ``r`` draws from ``numpy.random.default_rng([seed, r])``, an
    independent PCG64 substream, so results do not depend on execution order.
    Each arm's cell counts are one multinomial draw of size ``N(k)``, which has
    the same law as tallying ``N(k)`` independent subjects.
    """
    if replications < 1:
        raise ValueError("need at least one replication")
    grid = true_q.grid
    for t in design.doses:
        grid.check_dose(t)
    omega = net_welfare_vector(true_q, w, g)
    best = omega.max()
    arm_probs = {t: push_forward(true_q, t).p for t in design.doses}
    regrets, keys = [], []
    inconsistent = 0
    for r in range(replications):
        rng = np.random.default_rng([seed, r])
        counts = {
            t: rng.multinomial(n, arm_probs[t] / arm_probs[t].sum())
            for t, n in zip(design.doses, design.sizes)
        }
        evidence = evidence_from_counts(counts)
        try:
            decision = decide_from_evidence(
                evidence, grid, w, g, restrictions, mode, resolution, refine, repair
            )
        except InconsistentEvidence:
            inconsistent += 1
            continue
        if isinstance(decision, ClinicalDecision):
            achieved = omega[decision.chosen_dose]
        else:
            achieved = float(decision.allocation.delta @ omega)
        regrets.append(max(best - achieved, 0.0))
        keys.append(_decision_key(decision))
    return RegretReport.from_regrets(regrets, keys, seed, mode, replications, inconsistent)
