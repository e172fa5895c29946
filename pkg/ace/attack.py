"""Single-step attack on confidence estimation.

One signed-gradient step per sample. Correct predictions are pushed toward
lower confidence and incorrect ones toward higher confidence. A candidate is
accepted only if the victim's predicted label stays the same; otherwise the
step shrinks geometrically and is retried. The gradient sign is computed once,
before the retry loop.
"""

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .confidence import kappa_signed_gradient
from .engine import as_input
from .exceptions import ConfigurationError, DomainError, LabError, NumericError, StageError

logger = logging.getLogger(__name__)

WHITE_BOX = "white_box"
BLACK_BOX = "black_box"
MODES = (WHITE_BOX, BLACK_BOX)

DIRECT = "direct"
INDIRECT_SOFTMAX = "indirect_softmax"
TARGETS = (DIRECT, INDIRECT_SOFTMAX)


@dataclass(frozen=True)
class AttackConfig:
    epsilon: float
    epsilon_decay: float = 0.5
    max_iterations: int = 15
    mode: str = WHITE_BOX
    target: str = DIRECT
    clamp_domain: tuple | None = None

    def __post_init__(self):
        if not np.isfinite(self.epsilon) or self.epsilon < 0:
            raise ConfigurationError(f"epsilon must be finite and non-negative, got {self.epsilon}")
        if not 0.0 < self.epsilon_decay < 1.0:
            raise ConfigurationError(f"epsilon_decay must be in (0, 1), got {self.epsilon_decay}")
        if self.max_iterations < 1:
            raise ConfigurationError("max_iterations must be at least 1")
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown attack mode {self.mode!r}")
        if self.target not in TARGETS:
            raise ConfigurationError(f"unknown attack target {self.target!r}")
        if self.clamp_domain is not None:
            lo, hi = self.clamp_domain
            if np.any(np.asarray(lo) > np.asarray(hi)):
                raise ConfigurationError("clamp_domain lower bound exceeds upper bound")

    def step_sizes(self):
        return [self.epsilon * self.epsilon_decay ** k for k in range(self.max_iterations)]


@dataclass(frozen=True, eq=False)
class AttackOutcome:
    x_tilde: np.ndarray = field(repr=False)
    effective_epsilon: float
    iterations_used: int
    perturbed: bool


@dataclass(frozen=True)
class AttackSummary:
    mean_effective_epsilon: float
    query_count: int
    fraction_perturbed: float
    sample_count: int

    @property
    def mean_queries(self):
        return self.query_count / self.sample_count if self.sample_count else 0.0


class LabelOracle:
    """Label-only access to a victim; every predicted row counts as one query."""

    def __init__(self, victim):
        self._victim = victim
        self._lock = threading.Lock()
        self._queries = 0

    def predict(self, x):
        labels = self._victim.predict(x)
        with self._lock:
            self._queries += int(np.asarray(labels).size)
        return labels

    @property
    def query_count(self):
        with self._lock:
            return self._queries


def _as_oracle(f):
    return f if isinstance(f, LabelOracle) else LabelOracle(f)


def _check_source(scorer, f_hat, cfg):
    if cfg.mode == BLACK_BOX:
        if f_hat is None:
            raise ConfigurationError("a black-box attack needs a proxy to differentiate")
        sources = (f_hat,) if not isinstance(f_hat, (list, tuple)) else f_hat
        if any(s is m for s in sources for m in scorer.models):
            raise ConfigurationError("a black-box proxy cannot be the victim itself")
    elif cfg.target == INDIRECT_SOFTMAX and f_hat is None:
        raise ConfigurationError("indirect targeting needs a softmax gradient source")


def _clamp(candidate, cfg):
    if cfg.clamp_domain is None:
        return candidate
    lo, hi = cfg.clamp_domain
    return np.clip(candidate, lo, hi)


def ace(f, f_hat, scorer, x, y, cfg, rng=None):
    """Attack one sample.

    `f` answers label queries only. `f_hat` is the gradient source handed to
    kappa_signed_gradient (None differentiates the scorer's own kappa).
    """
    _check_source(scorer, f_hat, cfg)
    oracle = _as_oracle(f)
    x = as_input(x, scorer.in_dim)
    if x.ndim != 1:
        raise DomainError(f"ace attacks one sample, got shape {x.shape}")
    label = int(oracle.predict(x))
    eta = kappa_signed_gradient(scorer, f_hat, x, label, rng=rng)
    sign = -1.0 if label == int(y) else 1.0
    for iteration, epsilon in enumerate(cfg.step_sizes(), start=1):
        candidate = _clamp(x + sign * epsilon * eta, cfg)
        if not np.all(np.isfinite(candidate)):
            raise NumericError("non-finite attack candidate")
        if int(oracle.predict(candidate)) == label:
            perturbed = not np.array_equal(candidate, x)
            return AttackOutcome(
                x_tilde=candidate if perturbed else x.copy(),
                effective_epsilon=float(epsilon) if perturbed else 0.0,
                iterations_used=iteration,
                perturbed=perturbed,
            )
    return AttackOutcome(x_tilde=x.copy(), effective_epsilon=0.0, iterations_used=cfg.max_iterations, perturbed=False)


def _first_bad_row(array):
    bad = ~np.all(np.isfinite(array), axis=-1)
    return int(np.argmax(bad)) if bad.any() else None


def _attack_block(oracle, f_hat, scorer, x, y, indices, cfg, rng):
    """Vectorised ace over a block of rows; row results equal the single-sample path."""
    labels = np.asarray(oracle.predict(x))
    eta = kappa_signed_gradient(scorer, f_hat, x, labels, rng=rng, indices=indices)
    sign = np.where(labels == y, -1.0, 1.0)[:, None]

    x_tilde = x.copy()
    effective = np.zeros(len(x))
    iterations = np.full(len(x), cfg.max_iterations, dtype=np.int64)
    perturbed = np.zeros(len(x), dtype=bool)
    active = np.arange(len(x))
    for iteration, epsilon in enumerate(cfg.step_sizes(), start=1):
        if active.size == 0:
            break
        candidate = _clamp(x[active] + sign[active] * epsilon * eta[active], cfg)
        bad = _first_bad_row(candidate)
        if bad is not None:
            raise StageError("attack", NumericError("non-finite attack candidate"), int(indices[active[bad]]))
        keep = np.asarray(oracle.predict(candidate)) == labels[active]
        done = active[keep]
        changed = np.any(candidate[keep] != x[done], axis=-1)
        x_tilde[done] = np.where(changed[:, None], candidate[keep], x[done])
        effective[done] = np.where(changed, epsilon, 0.0)
        perturbed[done] = changed
        iterations[done] = iteration
        active = active[~keep]
    return [
        AttackOutcome(x_tilde=x_tilde[i], effective_epsilon=float(effective[i]),
                      iterations_used=int(iterations[i]), perturbed=bool(perturbed[i]))
        for i in range(len(x))
    ]


def attack_dataset(f, f_hat, scorer, data, cfg, rng=None, workers=1, block=256, truth=None):
    """Attack every sample of `data`.

    `truth` overrides the labels that decide the step direction (proxy-truth
    mode). Row i of an MC direct attack draws its masks from rng.derive(i).
    Returns (outcomes, summary); mean effective epsilon counts unperturbed
    samples as zero.
    """
    _check_source(scorer, f_hat, cfg)
    oracle = _as_oracle(f)
    x = as_input(data.features, scorer.in_dim)
    y = np.asarray(data.labels if truth is None else truth, dtype=np.int64)
    if len(y) == 0:
        raise DomainError("cannot attack an empty dataset")
    if x.ndim != 2 or len(x) != len(y):
        raise DomainError("features and labels disagree")
    before = oracle.query_count
    indices = np.arange(len(y))
    blocks = [slice(s, s + block) for s in range(0, len(y), block)]

    def run(rows):
        try:
            return _attack_block(oracle, f_hat, scorer, x[rows], y[rows], indices[rows], cfg, rng)
        except StageError:
            raise
        except LabError as exc:
            raise StageError("attack", exc, _locate_failure(oracle, scorer, f_hat, x, indices[rows], rng)) from exc

    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, blocks))
    else:
        results = [run(rows) for rows in blocks]
    outcomes = [o for chunk in results for o in chunk]

    summary = AttackSummary(
        mean_effective_epsilon=float(np.mean([o.effective_epsilon for o in outcomes])),
        query_count=oracle.query_count - before,
        fraction_perturbed=float(np.mean([o.perturbed for o in outcomes])),
        sample_count=len(outcomes),
    )
    logger.info("attack eps=%g mode=%s target=%s: mean effective eps %.6g, perturbed %.4f, queries %d",
                cfg.epsilon, cfg.mode, cfg.target, summary.mean_effective_epsilon,
                summary.fraction_perturbed, summary.query_count)
    return outcomes, summary


def _locate_failure(oracle, scorer, f_hat, x, rows, rng):
    """Index of the first row whose gradient is not finite, if any. Labels come from the oracle."""
    for i in rows:
        label = oracle.predict(x[i])
        try:
            kappa_signed_gradient(scorer, f_hat, x[i], label, rng=None if rng is None else rng.derive(int(i)))
        except LabError:
            return int(i)
    return None
