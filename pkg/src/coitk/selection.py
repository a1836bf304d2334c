"""Subset curation: pick k of n synthetic dialogues so the kept subset's
transition distribution stays close to the real reference.

Strategies: instance-score ranking, seeded Monte Carlo search over random
subsets, greedy backward elimination with incremental count updates, and an
exhaustive enumerator that serves as the optimality oracle for small pools.
The two-stage ``curate`` pipeline runs ranking first, then a distribution
strategy on the survivors.

Determinism contract: identical (pool order, reference, config, seed) give
identical results including id order.  Monte Carlo iteration t draws from an
RNG stream derived from (seed, t), so results do not depend on how
iterations are scheduled and prefixes of a run are themselves valid runs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace as dc_replace
from math import comb

import numpy as np

from ._kernels import METRIC_JS, METRIC_KL, js_div, kl_div, leave_one_out_gaps, subset_gaps
from .corpus import Corpus, Dialogue
from .errors import CombinatorialBlowup, KTooLarge
from .metrics_instance import InstanceScores
from .rewards import RewardBreakdown
from .transitions import corpus_joint, corpus_pair_counts, joint_from_flat_counts

_METRICS = {"kl": METRIC_KL, "js": METRIC_JS}

_SEED_MASK = (1 << 64) - 1  # SeedSequence wants non-negative entropy words


def _iteration_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed & _SEED_MASK, index])


@dataclass(frozen=True)
class CompositeWeights:
    w_style: float = 1.0
    w_result: float = 1.0
    w_route: float = 1.0
    w_reward: float = 1.0

    def __post_init__(self):
        weights = (self.w_style, self.w_result, self.w_route, self.w_reward)
        if any(w < 0 for w in weights):
            raise ValueError("weights must be non-negative")
        if not any(w > 0 for w in weights):
            raise ValueError("at least one weight must be positive")


@dataclass(frozen=True)
class SelectionConfig:
    k: int
    seed: int
    strategy: str = "greedy"  # rank | monte_carlo | greedy | exhaustive
    gap_metric: str = "js"  # kl | js
    mc_iterations: int = 1000
    greedy_batch: int = 1
    alpha: float = 0.5
    stage1_k: int | None = None

    def __post_init__(self):
        if self.strategy not in ("rank", "monte_carlo", "greedy", "exhaustive"):
            raise ValueError(f"unknown strategy '{self.strategy}'")
        if self.gap_metric not in _METRICS:
            raise ValueError(f"unknown gap metric '{self.gap_metric}'")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.mc_iterations < 1:
            raise ValueError("mc_iterations must be >= 1")
        if self.greedy_batch < 1:
            raise ValueError("greedy_batch must be >= 1")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")


@dataclass(frozen=True)
class SelectionResult:
    selected_ids: tuple[str, ...]
    achieved_gap: float
    strategy: str
    iterations_used: int
    seed: int
    stage1_k: int | None = None

    def to_dict(self) -> dict:
        return {
            "selected_ids": list(self.selected_ids),
            "achieved_gap": self.achieved_gap,
            "strategy": self.strategy,
            "iterations_used": self.iterations_used,
            "seed": self.seed,
            "stage1_k": self.stage1_k,
        }


def normalize_reward(r_total: float) -> float:
    """Affine map of [-1, 0] onto [0, 1], clamped for totals below -1."""
    return min(max(r_total + 1.0, 0.0), 1.0)


def composite_score(
    s: InstanceScores, rb: RewardBreakdown, w: CompositeWeights = CompositeWeights()
) -> float:
    """Weighted sum of the per-instance quality signals.

    Booleans map to {0, 1} with absent result pairing counting as 0; the
    behavior reward is normalized into [0, 1] so all terms share a scale.
    """
    return (
        w.w_style * s.style_sim
        + w.w_result * (1.0 if s.result_match else 0.0)
        + w.w_route * (1.0 if s.route_consistent else 0.0)
        + w.w_reward * normalize_reward(rb.r_total)
    )


def select_topk(scores: list[tuple[str, float]], k: int) -> list[str]:
    """Ids of the k highest scores; equal scores break toward smaller ids."""
    if k > len(scores):
        raise KTooLarge(f"k={k} exceeds pool of {len(scores)}")
    ranked = sorted(scores, key=lambda pair: (-pair[1], pair[0]))
    return [pid for pid, _ in ranked[:k]]


def divergence_gap(subset: Corpus, reference: Corpus, cfg: SelectionConfig) -> float:
    """Distribution distance of a subset from the reference.

    KL runs as KL(reference || subset): subsets that fail to cover observed
    real transitions pay for it.  JS is symmetric.
    """
    sub = corpus_joint(subset, alpha=cfg.alpha)
    ref = corpus_joint(reference, alpha=cfg.alpha)
    if cfg.gap_metric == "kl":
        return float(kl_div(ref.probs, sub.probs))
    return float(js_div(sub.probs, ref.probs))


def _prepared(pool: Corpus, reference: Corpus, cfg: SelectionConfig):
    """Shared setup: per-dialogue pair counts, smoothed reference, metric id."""
    if cfg.k > len(pool):
        raise KTooLarge(f"k={cfg.k} exceeds pool of {len(pool)}")
    pool_counts = corpus_pair_counts(pool)
    ref_probs = corpus_joint(reference, alpha=cfg.alpha).probs
    ids = [d.id for d in pool.dialogues]
    return pool_counts, ref_probs, ids, _METRICS[cfg.gap_metric]


def _gap_of_indices(pool_counts, indices, ref_probs, alpha, metric) -> float:
    counts = pool_counts[np.asarray(indices, dtype=np.int64)].sum(axis=0)
    sub = joint_from_flat_counts(counts, alpha)
    if metric == METRIC_KL:
        return float(kl_div(ref_probs, sub.probs))
    return float(js_div(sub.probs, ref_probs))


def monte_carlo_select(pool: Corpus, reference: Corpus, cfg: SelectionConfig) -> SelectionResult:
    """Best of T uniformly sampled size-k subsets."""
    pool_counts, ref_probs, ids, metric = _prepared(pool, reference, cfg)
    n = len(ids)
    if cfg.k == n:
        indices = list(range(n))
        gap = _gap_of_indices(pool_counts, indices, ref_probs, cfg.alpha, metric)
        return SelectionResult(
            selected_ids=tuple(sorted(ids)),
            achieved_gap=gap,
            strategy="monte_carlo",
            iterations_used=1,
            seed=cfg.seed,
        )
    best_gap = np.inf
    best_subset: np.ndarray | None = None
    chunk = 1024
    for start in range(0, cfg.mc_iterations, chunk):
        block = min(chunk, cfg.mc_iterations - start)
        subsets = np.empty((block, cfg.k), dtype=np.int64)
        for t in range(block):
            rng = _iteration_rng(cfg.seed, start + t)
            subsets[t] = rng.permutation(n)[: cfg.k]
        gaps = subset_gaps(pool_counts, subsets, ref_probs, cfg.alpha, metric)
        i = int(np.argmin(gaps))
        if gaps[i] < best_gap:
            best_gap = float(gaps[i])
            best_subset = subsets[i].copy()
    selected = sorted(ids[i] for i in best_subset)
    return SelectionResult(
        selected_ids=tuple(selected),
        achieved_gap=best_gap,
        strategy="monte_carlo",
        iterations_used=cfg.mc_iterations,
        seed=cfg.seed,
    )


def greedy_backward_eliminate(
    pool: Corpus, reference: Corpus, cfg: SelectionConfig
) -> SelectionResult:
    """Repeatedly drop the dialogues whose removal best shrinks the gap.

    Each epoch evaluates the leave-one-out gap for every remaining dialogue
    through incremental count subtraction (the summed counts minus one row)
    rather than recounting the subset, then removes the ``greedy_batch`` best
    candidates; ties break toward smaller ids.
    """
    pool_counts, ref_probs, ids, metric = _prepared(pool, reference, cfg)
    active = list(range(len(ids)))
    base = pool_counts.sum(axis=0)
    epochs = 0
    while len(active) > cfg.k:
        cand = pool_counts[np.asarray(active, dtype=np.int64)]
        gaps = leave_one_out_gaps(cand, base, ref_probs, cfg.alpha, metric)
        batch = min(cfg.greedy_batch, len(active) - cfg.k)
        order = sorted(range(len(active)), key=lambda p: (gaps[p], ids[active[p]]))
        removed = {order[i] for i in range(batch)}
        for p in removed:
            base = base - pool_counts[active[p]]
        active = [idx for p, idx in enumerate(active) if p not in removed]
        epochs += 1
    gap = _gap_of_indices(pool_counts, active, ref_probs, cfg.alpha, metric)
    return SelectionResult(
        selected_ids=tuple(sorted(ids[i] for i in active)),
        achieved_gap=gap,
        strategy="greedy",
        iterations_used=epochs,
        seed=cfg.seed,
    )


def exhaustive_select(pool: Corpus, reference: Corpus, cfg: SelectionConfig) -> SelectionResult:
    """Global optimum by enumerating every size-k subset (small pools only).

    Enumeration runs in lexicographic order of ascending-id index tuples, so
    keeping the first minimum makes the tie-break the lexicographically
    smallest id list.
    """
    pool_counts, ref_probs, ids, metric = _prepared(pool, reference, cfg)
    n = len(ids)
    n_subsets = comb(n, cfg.k)
    if n_subsets > 1_000_000:
        raise CombinatorialBlowup(f"C({n}, {cfg.k}) = {n_subsets} exceeds 1e6")
    id_order = sorted(range(n), key=lambda i: ids[i])
    best_gap = np.inf
    best: tuple[int, ...] | None = None
    chunk = 2048
    combos = itertools.combinations(id_order, cfg.k)
    evaluated = 0
    while True:
        block = list(itertools.islice(combos, chunk))
        if not block:
            break
        subsets = np.asarray(block, dtype=np.int64)
        gaps = subset_gaps(pool_counts, subsets, ref_probs, cfg.alpha, metric)
        i = int(np.argmin(gaps))
        if gaps[i] < best_gap:
            best_gap = float(gaps[i])
            best = block[i]
        evaluated += len(block)
    return SelectionResult(
        selected_ids=tuple(sorted(ids[i] for i in best)),
        achieved_gap=best_gap,
        strategy="exhaustive",
        iterations_used=evaluated,
        seed=cfg.seed,
    )


_STRATEGIES = {
    "monte_carlo": monte_carlo_select,
    "greedy": greedy_backward_eliminate,
    "exhaustive": exhaustive_select,
}


def curate(
    pool: Corpus,
    reference: Corpus,
    cfg: SelectionConfig,
    weights: CompositeWeights = CompositeWeights(),
    instance_scores: dict[str, InstanceScores] | None = None,
    breakdowns: dict[str, RewardBreakdown] | None = None,
) -> SelectionResult:
    """Two-stage curation: composite ranking, then distribution matching.

    Stage 1 keeps the ``stage1_k`` (default min(pool, 3k)) highest composite
    scores computed from the provided per-instance scores and reward
    breakdowns; stage 2 applies the configured strategy to reach k.  With
    strategy 'rank' the ranking alone selects the final k.
    """
    if cfg.k > len(pool):
        raise KTooLarge(f"k={cfg.k} exceeds pool of {len(pool)}")
    if instance_scores is None or breakdowns is None:
        raise ValueError("curate requires per-dialogue instance scores and breakdowns")
    scored = [
        (d.id, composite_score(instance_scores[d.id], breakdowns[d.id], weights))
        for d in pool.dialogues
    ]
    if cfg.strategy == "rank":
        selected = select_topk(scored, cfg.k)
        subset = _subset_corpus(pool, selected)
        gap = divergence_gap(subset, reference, cfg)
        return SelectionResult(
            selected_ids=tuple(selected),
            achieved_gap=gap,
            strategy="rank",
            iterations_used=0,
            seed=cfg.seed,
            stage1_k=cfg.k,
        )
    stage1_k = cfg.stage1_k if cfg.stage1_k is not None else min(len(pool), 3 * cfg.k)
    stage1_k = max(cfg.k, min(stage1_k, len(pool)))
    survivors = set(select_topk(scored, stage1_k))
    subpool = _subset_corpus(pool, survivors)
    result = _STRATEGIES[cfg.strategy](subpool, reference, cfg)
    return dc_replace(result, stage1_k=stage1_k)


def _subset_corpus(pool: Corpus, ids) -> Corpus:
    keep = set(ids)
    dialogues: tuple[Dialogue, ...] = tuple(d for d in pool.dialogues if d.id in keep)
    return Corpus(dialogues=dialogues, source=pool.source)
