"""Corpus-level fidelity metrics: KL and JS divergence over transition
distributions, and question diversity via per-category cluster entropy.

All logarithms are natural; reported units are nats.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .corpus import Corpus, IntentLabel, extract_questions
from .errors import NoQuestions, SupportMismatch, ZeroVector
from .transitions import JointDistribution

DEFAULT_TAU = 0.8


@dataclass(frozen=True)
class ClusterSet:
    """Leader-clustering result for one intent category's questions."""

    category: IntentLabel
    clusters: tuple[tuple[int, ...], ...]

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(c) for c in self.clusters)


@dataclass(frozen=True)
class GlobalReport:
    kl_div: float
    js_div: float
    q_diversity: float | None  # None when the corpus contains no questions
    per_category_entropy: dict[IntentLabel, float] = field(default_factory=dict)
    alpha: float = 0.5
    tau: float = DEFAULT_TAU

    def __post_init__(self):
        if self.kl_div < 0:
            raise ValueError("kl_div must be non-negative")
        if not -1e-12 <= self.js_div <= np.log(2) + 1e-12:
            raise ValueError("js_div must lie in [0, ln 2]")
        if self.q_diversity is not None and self.q_diversity < 0:
            raise ValueError("q_diversity must be non-negative")

    def to_dict(self) -> dict:
        return {
            "kl_div": self.kl_div,
            "js_div": self.js_div,
            "q_diversity": self.q_diversity,
            "per_category_entropy": {
                lab.value: h for lab, h in self.per_category_entropy.items()
            },
            "alpha": self.alpha,
            "tau": self.tau,
        }


def kl_divergence(p: JointDistribution, q: JointDistribution) -> float:
    """KL(p || q) in nats; q must cover p's support (smoothing guarantees it)."""
    if p.probs.shape != q.probs.shape:
        raise ValueError("distributions must have equal length")
    if ((p.probs > 0) & (q.probs == 0)).any():
        raise SupportMismatch("q is zero on cells where p has mass")
    return float(_kernels.kl_div(p.probs, q.probs))


def js_divergence(p: JointDistribution, q: JointDistribution) -> float:
    """Jensen-Shannon divergence in nats; symmetric and bounded by ln 2."""
    if p.probs.shape != q.probs.shape:
        raise ValueError("distributions must have equal length")
    return float(_kernels.js_div(p.probs, q.probs))


def cluster_questions(
    questions: list[str], embedder, tau: float = DEFAULT_TAU
) -> tuple[tuple[int, ...], ...]:
    """Single-pass leader clustering in input order.

    Each question joins the first cluster whose leader has cosine >= tau,
    else opens a new cluster with itself as leader.  Degenerate inputs the
    embedder rejects become permanent singletons.  Deterministic: no
    iteration count, no RNG, order-stable.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1)")
    clusters: list[list[int]] = []
    leaders: list[np.ndarray | None] = []
    for i, text in enumerate(questions):
        try:
            vec = embedder.embed(text)
        except ZeroVector:
            vec = None
        placed = False
        if vec is not None:
            for c, leader in enumerate(leaders):
                if leader is not None and float(np.dot(vec, leader)) >= tau:
                    clusters[c].append(i)
                    placed = True
                    break
        if not placed:
            clusters.append([i])
            leaders.append(vec)
    return tuple(tuple(c) for c in clusters)


def cluster_entropy(sizes: tuple[int, ...]) -> float:
    """Shannon entropy of the cluster-size distribution, in nats."""
    total = sum(sizes)
    probs = np.asarray(sizes, dtype=np.float64) / total
    return float(-np.sum(probs * np.log(probs))) + 0.0  # avoid -0.0


def q_diversity(
    c: Corpus, embedder, tau: float = DEFAULT_TAU
) -> tuple[float, dict[IntentLabel, float]]:
    """Mean per-category cluster entropy over categories with >= 1 question.

    Categories with no questions are excluded from the mean rather than
    averaged in as zeros; penalizing absent rare intents would conflate
    coverage with diversity.
    """
    questions = extract_questions(c)
    entropies: dict[IntentLabel, float] = {}
    for category, items in questions.items():
        if not items:
            continue
        clusters = cluster_questions([text for _, text in items], embedder, tau)
        entropies[category] = cluster_entropy(tuple(len(cl) for cl in clusters))
    if not entropies:
        raise NoQuestions("no category contains any question")
    score = float(np.mean(list(entropies.values())))
    return score, entropies
