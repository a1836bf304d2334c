"""Shared fixture builders and independent oracles used across the suite.

The oracles here (plain-Python divergences, full-recount greedy, brute-force
confusion counting) deliberately avoid the library's kernels and incremental
bookkeeping so tests compare two independent routes to the same numbers.
"""

from __future__ import annotations

import math
from collections import Counter

from coitk.corpus import (
    CANDIDATE,
    RECRUITER,
    Corpus,
    Dialogue,
    IntentLabel,
    Profile,
    Turn,
    write_corpus,
)

IL = IntentLabel


def build_dialogue(
    did: str,
    labels,
    candidate_texts=None,
    recruiter_texts=None,
    tags=None,
    source: str = "real",
    scenario_id: str | None = None,
    profile: Profile | None = None,
    extra: dict | None = None,
) -> Dialogue:
    """Alternating recruiter/candidate dialogue with one candidate turn per label."""
    labels = list(labels)
    candidate_texts = candidate_texts or [f"candidate reply {i}" for i in range(len(labels))]
    recruiter_texts = recruiter_texts or [f"recruiter line {i}" for i in range(len(labels))]
    tags = tags or {}
    turns = []
    for i, lab in enumerate(labels):
        turns.append(Turn(index=2 * i, speaker=RECRUITER, text=recruiter_texts[i]))
        turns.append(
            Turn(
                index=2 * i + 1,
                speaker=CANDIDATE,
                text=candidate_texts[i],
                behavior_tags=tuple(tags.get(i, ())),
                intent=lab,
            )
        )
    if source == "synthetic" and scenario_id is None:
        scenario_id = f"scn-{did}"
    return Dialogue(
        id=did,
        source=source,
        turns=tuple(turns),
        scenario_id=scenario_id,
        profile=profile or Profile(),
        extra=extra or {},
    )


def build_corpus(dialogues, source: str | None = None) -> Corpus:
    dialogues = tuple(dialogues)
    if source is None:
        kinds = {d.source for d in dialogues}
        source = kinds.pop() if len(kinds) == 1 else "mixed"
    return Corpus(dialogues=dialogues, source=source)


def corpus_file(tmp_path, dialogues, name="corpus.jsonl"):
    path = tmp_path / name
    write_corpus(build_corpus(list(dialogues)), path)
    return path


# ---------------------------------------------------------------------------
# Independent oracles
# ---------------------------------------------------------------------------

def oracle_kl(p, q) -> float:
    """KL via math.fsum; independent of the kernel implementations."""
    terms = []
    for pi, qi in zip(p, q):
        if pi > 0.0:
            if qi <= 0.0:
                return math.inf
            terms.append(pi * math.log(pi / qi))
    return math.fsum(terms)


def oracle_js(p, q) -> float:
    u = [(pi + qi) / 2.0 for pi, qi in zip(p, q)]
    return 0.5 * oracle_kl(p, u) + 0.5 * oracle_kl(q, u)


def chain_labels(d: Dialogue):
    return tuple(t.intent for t in d.turns if t.speaker == CANDIDATE)


def oracle_pair_counts(dialogues) -> Counter:
    counts: Counter = Counter()
    for d in dialogues:
        labs = chain_labels(d)
        for a, b in zip(labs, labs[1:]):
            counts[(a, b)] += 1
    return counts


def oracle_joint(dialogues, alpha: float) -> list[float]:
    """Smoothed joint pair distribution over the fixed 9x9 cell grid."""
    labels = list(IntentLabel)
    counts = oracle_pair_counts(dialogues)
    total = sum(counts.values())
    k2 = len(labels) ** 2
    denom = total + alpha * k2
    return [
        (counts.get((a, b), 0) + alpha) / denom
        for a in labels
        for b in labels
    ]


def oracle_gap(subset_dialogues, reference_dialogues, alpha: float, metric: str) -> float:
    sub = oracle_joint(subset_dialogues, alpha)
    ref = oracle_joint(reference_dialogues, alpha)
    if metric == "kl":
        return oracle_kl(ref, sub)
    return oracle_js(sub, ref)


def naive_greedy(pool: Corpus, reference: Corpus, k: int, batch: int, alpha: float, metric: str):
    """Full-recount greedy backward elimination; returns (eliminated, kept, gap).

    Every epoch re-derives each tentative subset's distribution from the raw
    dialogues instead of updating counts incrementally.
    """
    remaining = list(pool.dialogues)
    ref = list(reference.dialogues)
    eliminated: list[str] = []
    while len(remaining) > k:
        gaps = []
        for i, d in enumerate(remaining):
            tentative = remaining[:i] + remaining[i + 1 :]
            gaps.append((oracle_gap(tentative, ref, alpha, metric), d.id, i))
        gaps.sort(key=lambda g: (g[0], g[1]))
        n_remove = min(batch, len(remaining) - k)
        drop = {g[2] for g in gaps[:n_remove]}
        eliminated.extend(sorted(g[1] for g in gaps[:n_remove]))
        remaining = [d for i, d in enumerate(remaining) if i not in drop]
    gap = oracle_gap(remaining, ref, alpha, metric)
    return eliminated, sorted(d.id for d in remaining), gap
