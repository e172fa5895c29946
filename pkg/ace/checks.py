"""Acceptance checks over a finished run.

Hard checks fail the bench; soft trend checks only warn.
"""

import re
from dataclasses import dataclass

from django.conf import settings

PASS, WARN, FAIL = "pass", "warn", "fail"

AURC_TABLE = "softmax_whitebox"


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str
    detail: str
    hard: bool = False


def degradation(rows):
    """AURC x1000 at the largest epsilon minus the clean AURC x1000."""
    rows = sorted(rows, key=lambda r: r.epsilon)
    return rows[-1].aurc_x1000 - rows[0].aurc_x1000


def check_accuracy_invariance(manifest):
    broken = [
        f"{name} ({', '.join(f'{r.accuracy_percent:.4f}' for r in rows)})"
        for name, rows in manifest.tables.items()
        if len({r.accuracy_percent for r in rows}) > 1
    ]
    if broken:
        return CheckResult("accuracy_invariance", FAIL, "accuracy changed in " + "; ".join(broken), hard=True)
    return CheckResult("accuracy_invariance", PASS, f"constant across all epsilon rows of {len(manifest.tables)} tables",
                       hard=True)


def check_aurc_degradation(manifest, factor):
    rows = manifest.tables.get(AURC_TABLE)
    if not rows or len(rows) < 2:
        return CheckResult("aurc_degradation", WARN, f"{AURC_TABLE} has no attacked rows", hard=True)
    rows = sorted(rows, key=lambda r: r.epsilon)
    values = [r.aurc_x1000 for r in rows]
    increasing = all(b > a for a, b in zip(values, values[1:]))
    ratio = values[-1] / values[0] if values[0] > 0 else float("inf")
    detail = f"AURC x1000 {', '.join(f'{v:.2f}' for v in values)}; ratio {ratio:.2f} (gate {factor:g})"
    if not increasing or ratio < factor:
        return CheckResult("aurc_degradation", FAIL, detail, hard=True)
    return CheckResult("aurc_degradation", PASS, detail, hard=True)


def check_ensemble_resilience(manifest, slack):
    sizes = sorted(
        (int(m.group(1)), name)
        for name in manifest.tables
        if (m := re.fullmatch(r"ensemble(\d+)_whitebox", name))
    )
    if len(sizes) < 2:
        return CheckResult("ensemble_resilience", WARN, "fewer than two ensemble sizes were run")
    damage = [(size, degradation(manifest.tables[name])) for size, name in sizes]
    detail = ", ".join(f"m={size}: {d:.2f}" for size, d in damage)
    ordered = all(b <= a * (1.0 + slack) + 1e-12 for (_, a), (_, b) in zip(damage, damage[1:]))
    return CheckResult("ensemble_resilience", PASS if ordered else WARN, "AURC degradation " + detail)


def check_mc_indirect(manifest, slack):
    pairs = []
    for name in manifest.tables:
        m = re.fullmatch(r"(mc_entropy\d+)_direct", name)
        if m and f"{m.group(1)}_indirect" in manifest.tables:
            pairs.append(m.group(1))
    if not pairs:
        return CheckResult("mc_indirect_vs_direct", WARN, "no MC entropy direct/indirect pair was run")
    details, ok = [], True
    for prefix in sorted(pairs):
        direct = degradation(manifest.tables[f"{prefix}_direct"])
        indirect = degradation(manifest.tables[f"{prefix}_indirect"])
        ok = ok and indirect >= direct * (1.0 - slack) - 1e-12
        details.append(f"{prefix}: indirect {indirect:.2f} vs direct {direct:.2f}")
    return CheckResult("mc_indirect_vs_direct", PASS if ok else WARN, "; ".join(details))


def run_checks(manifest, factor=None, slack=None):
    factor = settings.ACE_AURC_FACTOR if factor is None else factor
    slack = settings.ACE_TREND_SLACK if slack is None else slack
    return [
        check_accuracy_invariance(manifest),
        check_aurc_degradation(manifest, factor),
        check_ensemble_resilience(manifest, slack),
        check_mc_indirect(manifest, slack),
    ]


def hard_failures(results):
    return [r for r in results if r.hard and r.status == FAIL]
