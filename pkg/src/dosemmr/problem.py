"""JSON problem files and result documents.

Problem file (``dosemmr-problem/1``)::

    {
      "T": 2,
      "arms": [{"dose": 0, "probabilities": [0.25, 0.75, 0, 0]},
               {"dose": 2, "counts": [30, 10, 60, 20]}],
      "welfare": [1, 0.25, 0.75, 0],
      "cost": "zero" | {"linear": 0.05} | [0, 0, 0.3],
      "restrictions": ["no_ae_at_zero"],
      "options": {"grid": 100, "refine": false, "seed": 0, "repair": false},
      "true_q": [[...], ...],
      "design": {"doses": [0, 2], "sizes": [1000, 1000]},
      "replications": 20
    }

Cell vectors are always in the order (0,0), (1,0), (0,1), (1,1) of
(disease, adverse effect).  ``records`` (a path to a ``dose,d,e[,id]`` file,
relative to the problem file) may replace ``arms``.  ``true_q``, ``design``
and ``replications`` are only read by ``simulate``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .identification import Restrictions
from .model import (
    Arm,
    CostSpec,
    DoseGrid,
    ModelError,
    OutcomeDistribution,
    ThresholdDistribution,
    TrialEvidence,
    WelfareSpec,
)
from .trial import TrialDesign, ingest, read_records

PROBLEM_SCHEMA = "dosemmr-problem/1"
RESULT_SCHEMA = "dosemmr-result/1"

DEFAULT_OPTIONS = {
    "grid": 100,
    "refine": False,
    "seed": 0,
    "repair": False,
    "renormalize": False,
    "strict": False,
    "budget": 2_000_000,
}


class ProblemError(ValueError):
    """Malformed problem file."""


@dataclass
class Problem:
    grid: DoseGrid
    evidence: TrialEvidence | None
    welfare: WelfareSpec
    cost: CostSpec
    restrictions: Restrictions
    options: dict[str, Any]
    echo: dict[str, Any]
    true_q: ThresholdDistribution | None = None
    design: TrialDesign | None = None
    replications: int | None = None
    raw_counts: dict[int, list[int]] = field(default_factory=dict)


def _require(doc, key, kind=None):
    if key not in doc:
        raise ProblemError(f"missing field {key!r}")
    value = doc[key]
    if kind is not None and not isinstance(value, kind):
        raise ProblemError(f"field {key!r} has the wrong type")
    return value


def _parse_cost(spec, T):
    if spec is None or spec == "zero" or spec == {"form": "zero"}:
        return CostSpec.zero(T), {"form": "zero"}
    if isinstance(spec, dict):
        if "linear" in spec:
            slope = float(spec["linear"])
            return CostSpec.linear(T, slope), {"form": "linear", "slope": slope}
        if spec.get("form") == "linear":
            slope = float(spec["slope"])
            return CostSpec.linear(T, slope), {"form": "linear", "slope": slope}
        if "vector" in spec:
            spec = spec["vector"]
        elif spec.get("form") == "vector":
            spec = spec["values"]
        else:
            raise ProblemError(f"unrecognised cost specification {spec!r}")
    if isinstance(spec, list):
        if len(spec) != T + 1:
            raise ProblemError(f"cost vector needs {T + 1} entries, got {len(spec)}")
        vec = [float(v) for v in spec]
        return CostSpec(vec), {"form": "vector", "values": vec}
    raise ProblemError(f"unrecognised cost specification {spec!r}")


def parse_problem(doc: dict, base_dir: Path | None = None) -> Problem:
    if not isinstance(doc, dict):
        raise ProblemError("problem must be a JSON object")
    schema = doc.get("schema", PROBLEM_SCHEMA)
    if schema != PROBLEM_SCHEMA:
        raise ProblemError(f"unsupported problem schema {schema!r}")
    try:
        T = _require(doc, "T")
        if isinstance(T, bool) or not isinstance(T, int):
            raise ProblemError("T must be an integer")
        grid = DoseGrid(T)
        options = dict(DEFAULT_OPTIONS)
        extra = doc.get("options", {})
        if not isinstance(extra, dict):
            raise ProblemError("options must be an object")
        unknown = set(extra) - set(DEFAULT_OPTIONS)
        if unknown:
            raise ProblemError(f"unknown option(s) {sorted(unknown)}")
        options.update(extra)
        strict = bool(options["strict"])
        welfare = WelfareSpec(_require(doc, "welfare", list), strict=strict)
        cost, cost_echo = _parse_cost(doc.get("cost"), T)
        if strict:
            CostSpec(cost.g, strict=True)
        restrictions = Restrictions.from_names(doc.get("restrictions", []))

        evidence, raw_counts, arms_echo = None, {}, []
        if "arms" in doc and "records" in doc:
            raise ProblemError("give either arms or records, not both")
        if "arms" in doc:
            arms = []
            for k, entry in enumerate(_require(doc, "arms", list)):
                if not isinstance(entry, dict) or "dose" not in entry:
                    raise ProblemError(f"arm {k} needs a dose")
                has_p, has_c = "probabilities" in entry, "counts" in entry
                if has_p == has_c:
                    raise ProblemError(f"arm {k} needs exactly one of probabilities or counts")
                dose = entry["dose"]
                if has_c:
                    counts = [int(c) for c in entry["counts"]]
                    if len(counts) != 4 or min(counts) < 0 or sum(counts) == 0:
                        raise ProblemError(f"arm {k} counts must be 4 non-negative integers")
                    raw_counts[dose] = counts
                    arms.append(Arm(dose, OutcomeDistribution(np.array(counts) / sum(counts)), sum(counts)))
                    arms_echo.append({"dose": dose, "counts": counts})
                else:
                    p = OutcomeDistribution(
                        entry["probabilities"], renormalize=bool(options["renormalize"])
                    )
                    arms.append(Arm(dose, p, entry.get("n")))
                    arms_echo.append({"dose": dose, "probabilities": [float(v) for v in p.p]})
            arms.sort(key=lambda a: a.dose)
            evidence = TrialEvidence(arms)
            evidence.validate(grid)
        elif "records" in doc:
            path = Path(doc["records"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            evidence = ingest(read_records(path), grid)
            raw_counts = {
                a.dose: [int(round(v * a.n)) for v in a.outcomes.p] for a in evidence.arms
            }
            arms_echo = [{"dose": d, "counts": c} for d, c in raw_counts.items()]

        true_q = design = replications = None
        if "true_q" in doc:
            true_q = ThresholdDistribution(doc["true_q"])
            if true_q.T != T:
                raise ProblemError(f"true_q must be {T + 2}x{T + 2}")
        if "design" in doc:
            d = _require(doc, "design", dict)
            design = TrialDesign(tuple(d["doses"]), tuple(d["sizes"]))
        if "replications" in doc:
            replications = int(doc["replications"])
    except ProblemError:
        raise
    except (ModelError, ValueError, TypeError, KeyError, OSError) as exc:
        raise ProblemError(str(exc)) from exc

    echo = {
        "schema": PROBLEM_SCHEMA,
        "T": T,
        "arms": arms_echo,
        "welfare": [float(v) for v in welfare.w],
        "cost": cost_echo,
        "cost_vector": [float(v) for v in cost.g],
        "restrictions": restrictions.names,
        "options": options,
    }
    if true_q is not None:
        echo["true_q"] = true_q.mass.tolist()
    if design is not None:
        echo["design"] = {"doses": list(design.doses), "sizes": list(design.sizes)}
    if replications is not None:
        echo["replications"] = replications
    return Problem(
        grid, evidence, welfare, cost, restrictions, options, echo,
        true_q, design, replications, raw_counts,
    )


def load_problem(path) -> Problem:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ProblemError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ProblemError(f"{path}: invalid JSON ({exc})") from exc
    return parse_problem(doc, path.parent)


def dumps_result(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def parse_result(text: str) -> dict:
    doc = json.loads(text)
    if not isinstance(doc, dict) or doc.get("schema") != RESULT_SCHEMA:
        raise ValueError("not a dosemmr result document")
    for key in ("command", "input"):
        if key not in doc:
            raise ValueError(f"result document lacks {key!r}")
    return doc
