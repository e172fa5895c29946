"""Selective-classification metrics over scored items.

A sample is covered at threshold theta when its kappa is strictly greater than
theta. RC curves are built by sorting once and sweeping; tied kappa values
enter or leave coverage together.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .engine import cross_entropy
from .exceptions import ConfigurationError, DomainError, UndefinedRiskError


def _columns(items):
    items = list(items)
    if not items:
        raise DomainError("no scored items")
    kappa = np.array([i.kappa for i in items], dtype=np.float64)
    loss = np.array([i.loss01 for i in items], dtype=np.float64)
    return items, kappa, loss


def empirical_coverage(items, theta):
    _, kappa, _ = _columns(items)
    return float(np.mean(kappa > theta))


def empirical_selective_risk(items, theta):
    _, kappa, loss = _columns(items)
    covered = kappa > theta
    if not covered.any():
        raise UndefinedRiskError(f"nothing is covered at threshold {theta!r}")
    return float(loss[covered].sum() / covered.sum())


def selective_risk_at_coverage(items, coverage):
    """Risk of the floor(coverage * n) highest-kappa samples; ties at the cut go to the lower index."""
    items, kappa, loss = _columns(items)
    k = int(np.floor(coverage * len(items) + 1e-9))
    if k <= 0:
        raise UndefinedRiskError(f"coverage {coverage!r} keeps no sample out of {len(items)}")
    order = np.lexsort(([i.index for i in items], -kappa))
    return float(loss[order[:k]].sum() / k)


@dataclass(frozen=True, eq=False)
class RCCurve:
    """(coverage, risk) points by ascending coverage.

    `counts` is how many samples entered coverage at each point, so the area
    weighs a tie group by its size.
    """
    coverage: np.ndarray
    risk: np.ndarray
    threshold: np.ndarray
    counts: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.coverage)

    @property
    def sample_count(self):
        return int(self.counts.sum())

    def area(self):
        return float((self.counts * self.risk).sum() / self.counts.sum())

    def points(self):
        return list(zip(self.coverage.tolist(), self.risk.tolist(), self.threshold.tolist()))


def rc_curve(items):
    _, kappa, loss = _columns(items)
    n = len(kappa)
    order = np.argsort(-kappa, kind="stable")
    sorted_kappa = kappa[order]
    errors = np.cumsum(loss[order])
    # last position of each tie group in descending order
    ends = np.flatnonzero(np.append(sorted_kappa[1:] != sorted_kappa[:-1], True))
    covered = ends + 1
    risk = errors[ends] / covered
    threshold = np.empty(len(ends))
    threshold[:-1] = sorted_kappa[ends[:-1] + 1]
    threshold[-1] = np.nextafter(sorted_kappa[-1], -np.inf)
    return RCCurve(
        coverage=covered / n,
        risk=risk,
        threshold=threshold,
        counts=np.diff(np.concatenate([[0], covered])),
    )


def aurc(items):
    """Mean over the n samples of the selective risk when covering kappa >= kappa_i."""
    return rc_curve(items).area()


def worst_case_rc(n_correct, n_incorrect):
    """Every incorrect prediction ranked above every correct one."""
    n = n_correct + n_incorrect
    if n_correct < 0 or n_incorrect < 0 or n < 1:
        raise DomainError("worst-case curve needs at least one sample")
    k = np.arange(1, n + 1)
    return RCCurve(
        coverage=k / n,
        risk=np.minimum(k, n_incorrect) / k,
        threshold=np.full(n, np.nan),
        counts=np.ones(n, dtype=np.int64),
    )


def worst_case_for(items):
    _, _, loss = _columns(items)
    n_incorrect = int(loss.sum())
    return worst_case_rc(len(loss) - n_incorrect, n_incorrect)


def nll(items):
    items, _, _ = _columns(items)
    return float(np.mean(cross_entropy(np.stack([i.probs for i in items]), [i.label for i in items])))


def brier(items):
    items, _, _ = _columns(items)
    total = 0.0
    for item in items:
        target = np.zeros(len(item.probs))
        target[item.label] = 1.0
        total += float(((np.asarray(item.probs) - target) ** 2).sum())
    return total / len(items)


def accuracy(items):
    _, _, loss = _columns(items)
    return float(1.0 - loss.mean())


@dataclass(frozen=True, eq=False)
class Histograms:
    edges: np.ndarray
    correct: np.ndarray
    incorrect: np.ndarray


def confidence_histograms(items, bins):
    """Equal-width histograms of kappa for correct and incorrect predictions over the combined range."""
    if bins < 1:
        raise DomainError(f"bins must be at least 1, got {bins}")
    _, kappa, loss = _columns(items)
    edges = np.histogram_bin_edges(kappa, bins=bins)
    correct, _ = np.histogram(kappa[loss == 0], bins=edges)
    incorrect, _ = np.histogram(kappa[loss == 1], bins=edges)
    return Histograms(edges=edges, correct=correct, incorrect=incorrect)


@dataclass(frozen=True)
class EvalReport:
    epsilon: float
    effective_epsilon: float
    aurc_x1000: float
    nll: float
    brier: float
    accuracy_percent: float
    selective_risk: float | None = None
    coverage: float | None = None
    mean_queries: float | None = None

    @property
    def unspent_ratio(self):
        """effective eps / eps; None for the clean row."""
        return self.effective_epsilon / self.epsilon if self.epsilon > 0 else None


def evaluate(items, epsilon=0.0, effective_epsilon=0.0, theta=None, mean_queries=None, fixed_coverage=None):
    """One report row.

    With `theta`, also the selective risk and coverage at that threshold. With
    `fixed_coverage`, the selective risk of that share of the most confident
    samples, whatever their kappa values.
    """
    items = list(items)
    selective_risk = coverage = None
    if theta is not None and fixed_coverage is not None:
        raise ConfigurationError("pass theta or fixed_coverage, not both")
    if theta is not None:
        coverage = empirical_coverage(items, theta)
        if coverage > 0:
            selective_risk = empirical_selective_risk(items, theta)
    elif fixed_coverage is not None:
        coverage = float(fixed_coverage)
        if np.floor(coverage * len(items) + 1e-9) > 0:
            selective_risk = selective_risk_at_coverage(items, coverage)
    return EvalReport(
        epsilon=float(epsilon),
        effective_epsilon=float(effective_epsilon),
        aurc_x1000=aurc(items) * 1000.0,
        nll=nll(items),
        brier=brier(items),
        accuracy_percent=accuracy(items) * 100.0,
        selective_risk=selective_risk,
        coverage=coverage,
        mean_queries=mean_queries,
    )


def fmt(value):
    """17 significant digits; blank for missing values."""
    if value is None:
        return ""
    return "%.17g" % value


def write_rc_csv(curve, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["coverage", "risk", "threshold"])
        for coverage, risk, threshold in curve.points():
            writer.writerow([fmt(coverage), fmt(risk), fmt(threshold)])


def write_histogram_csv(histograms, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["bin_low", "bin_high", "correct", "incorrect"])
        edges = histograms.edges
        for i in range(len(histograms.correct)):
            writer.writerow([fmt(edges[i]), fmt(edges[i + 1]),
                             int(histograms.correct[i]), int(histograms.incorrect[i])])
