"""Collects acceptance sub-checks and folds them into one line per criterion."""

from collections import defaultdict

_CHECKS = defaultdict(list)


def record(criterion: int, name: str, ok: bool, detail: str = "") -> bool:
    _CHECKS[criterion].append((name, bool(ok), detail))
    return bool(ok)


def summary_lines():
    out = []
    for crit in sorted(_CHECKS):
        checks = _CHECKS[crit]
        failed = [(n, d) for n, ok, d in checks if not ok]
        status = "FAIL" if failed else "PASS"
        line = f"criterion {crit:2d}: {status}  ({len(checks) - len(failed)}/{len(checks)} checks)"
        if failed:
            line += "  failing: " + "; ".join(f"{n} [{d}]" if d else n for n, d in failed)
        out.append(line)
    return out
