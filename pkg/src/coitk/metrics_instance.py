"""Per-dialogue quality metrics: style similarity against a retrieved
reference, outcome-consistency F1 over scenario-paired dialogues, and route
consistency against the observed transition graph.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import (
    CONVERSION,
    Corpus,
    Dialogue,
    derive_outcome,
)
from .errors import EmptyReferenceCorpus, UnpairedScenario
from .transitions import IntentChain, IntentGraph, extract_chain


@dataclass(frozen=True)
class InstanceScores:
    dialogue_id: str
    style_sim: float
    route_consistent: bool
    result_match: bool | None = None
    reference_id: str | None = None

    def to_dict(self) -> dict:
        return {
            "dialogue_id": self.dialogue_id,
            "style_sim": self.style_sim,
            "route_consistent": self.route_consistent,
            "result_match": self.result_match,
            "reference_id": self.reference_id,
        }


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class F1Result:
    f1: float
    counts: ConfusionCounts
    degenerate: bool = False  # no positives anywhere: f1 reported as 1.0


def chain_edit_distance(a: tuple, b: tuple) -> int:
    """Levenshtein distance between two label sequences."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, la in enumerate(a, start=1):
        current = [i]
        for j, lb in enumerate(b, start=1):
            cost = 0 if la == lb else 1
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + cost))
        previous = current
    return previous[-1]


def retrieve_reference(real: Corpus, chain: IntentChain) -> Dialogue:
    """Real dialogue with the same intent flow, or the edit-distance nearest.

    Exact chain matches always win; among equal distances the smallest
    dialogue id wins, so retrieval is deterministic.
    """
    if len(real) == 0:
        raise EmptyReferenceCorpus("reference corpus is empty")
    best: Dialogue | None = None
    best_key: tuple[int, str] | None = None
    for d in real.dialogues:
        dist = chain_edit_distance(chain.labels, extract_chain(d).labels)
        key = (dist, d.id)
        if best_key is None or key < best_key:
            best, best_key = d, key
    return best


def render_candidate_text(d: Dialogue) -> str:
    """Candidate turns joined by newlines; the judge's view of a dialogue."""
    return "\n".join(t.text for t in d.candidate_turns())


def style_similarity(d: Dialogue, real: Corpus, judge) -> tuple[float, str]:
    """Judge the dialogue against its retrieved same-flow reference."""
    reference = retrieve_reference(real, extract_chain(d))
    score = judge.style_score(render_candidate_text(d), render_candidate_text(reference))
    return score, reference.id


def pair_by_scenario(syn: Corpus, real: Corpus) -> list[tuple[Dialogue, Dialogue]]:
    """Match each synthetic dialogue to exactly one real dialogue by scenario.

    Raises UnpairedScenario listing synthetic ids whose scenario_id is
    missing, absent from the real corpus, or ambiguous (shared by several
    real dialogues).
    """
    real_by_scenario: dict[str, list[Dialogue]] = {}
    for d in real.dialogues:
        if d.scenario_id:
            real_by_scenario.setdefault(d.scenario_id, []).append(d)
    pairs: list[tuple[Dialogue, Dialogue]] = []
    offenders: list[str] = []
    for d in syn.dialogues:
        matches = real_by_scenario.get(d.scenario_id or "", [])
        if len(matches) != 1:
            offenders.append(d.id)
        else:
            pairs.append((d, matches[0]))
    if offenders:
        raise UnpairedScenario(offenders)
    return pairs


def result_f1(syn: Corpus, real: Corpus) -> F1Result:
    """F1 of synthetic conversion outcomes against paired real outcomes.

    Truth is the real outcome, prediction the synthetic one.  With no true
    positives and any disagreement the score is 0; the all-negative case is
    reported as 1.0 with the degeneracy flag set.
    """
    tp = fp = fn = tn = 0
    for syn_d, real_d in pair_by_scenario(syn, real):
        syn_conv = derive_outcome(syn_d) == CONVERSION
        real_conv = derive_outcome(real_d) == CONVERSION
        if syn_conv and real_conv:
            tp += 1
        elif syn_conv and not real_conv:
            fp += 1
        elif not syn_conv and real_conv:
            fn += 1
        else:
            tn += 1
    counts = ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn)
    if tp == 0 and fp == 0 and fn == 0:
        return F1Result(f1=1.0, counts=counts, degenerate=True)
    if tp == 0:
        return F1Result(f1=0.0, counts=counts)
    return F1Result(f1=2.0 * tp / (2.0 * tp + fp + fn), counts=counts)


def route_consistency(chain: IntentChain, g: IntentGraph) -> bool:
    """True iff every consecutive transition is a graph edge.

    A chain is a walk, so edge-wise containment decides validity; chains of
    length 1 are vacuously consistent.
    """
    return all(g.has_edge(a, b) for a, b in zip(chain.labels, chain.labels[1:]))


def route_consistency_rate(syn: Corpus, g: IntentGraph) -> float:
    """Fraction of dialogues whose chain is route-consistent."""
    chains = [extract_chain(d) for d in syn.dialogues]
    if not chains:
        return 0.0
    return sum(route_consistency(ch, g) for ch in chains) / len(chains)
