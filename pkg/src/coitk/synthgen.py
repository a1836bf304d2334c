"""Markov-chain dialogue generator.

Samples intent chains forward from a known row-stochastic transition model
and renders them into template dialogues.  Serves two purposes: a demo data
source for the CLI, and the ground truth behind estimator-consistency tests
(``expected_joint`` computes the exact pair distribution the estimation
pipeline should recover from samples).

Generation is reproducible: dialogue i uses an RNG stream derived from
(master seed, i), so parallel and serial runs produce the same corpus bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np

from .corpus import (
    CANDIDATE,
    CONVERSION_MARKER,
    LABELS,
    LABEL_INDEX,
    NUM_LABELS,
    RECRUITER,
    Corpus,
    Dialogue,
    IntentLabel,
    Profile,
    Turn,
)
from .errors import DegenerateDistribution, IOFailure, MissingTemplate, SchemaViolation
from .transitions import IntentChain

K = NUM_LABELS

ROW_SUM_TOL = 1e-9

DEFAULT_SCENARIOS: tuple[dict[str, str], ...] = (
    {"job": "audio streamer", "salary": "133-200 per day"},
    {"job": "video streamer", "salary": "200 per day"},
    {"job": "delivery rider", "salary": "6000-9000 monthly"},
)

DEFAULT_RECRUITER_TEMPLATES: tuple[str, ...] = (
    "Hello! We are recruiting for a {job} position, salary {salary}. Interested?",
    "The {job} role pays {salary} with daily settlement. Any questions?",
    "You can work from home, no experience needed. Shall I send details?",
    "Could you click the contact card above so we can continue there?",
    "We provide free training for every new {job}. What do you think?",
)

DEFAULT_TEMPLATES: dict[IntentLabel, tuple[str, ...]] = {
    IntentLabel.INFORMATION_INQUIRY: (
        "What does the {job} job involve exactly?",
        "Where is the workplace?",
        "How much is the daily wage?",
        "Is the payment settled daily?",
        "What are the working hours?",
    ),
    IntentLabel.POSITIVE_INTENT: (
        "Sounds good, let's talk.",
        "I am interested in the role.",
        "Okay, tell me more, I want to try.",
    ),
    IntentLabel.JOB_CONCERNS: (
        "This isn't a scam, is it?",
        "Why is the salary so high? Seems suspicious.",
        "Is this posting legit?",
    ),
    IntentLabel.SELF_CONCERNS: (
        "I haven't done this before, is that okay?",
        "My voice sounds bad, I am not sure I fit.",
        "I'm too old for this, probably.",
    ),
    IntentLabel.REJECTION: (
        "Not interested, thanks.",
        "I'm not suitable, thanks.",
        "No thanks, stop messaging me.",
    ),
    IntentLabel.IRRELEVANT: (
        "ok",
        "I am male.",
        "hmm let me see",
    ),
    IntentLabel.CONVERSION: (
        CONVERSION_MARKER,
    ),
    IntentLabel.SENT_RESUME_OR_CONTACT: (
        "[Behavior] sent attached resume",
        "[Behavior] shared phone number",
    ),
    IntentLabel.TECHNICAL_FAILURE: (
        "I want to add but the card is not there.",
        "I can't click the contact card, it doesn't work.",
    ),
}

# Qualitative shape only: inquiry-heavy openings, concerns feeding rejection,
# positive signals feeding conversion.  Rows sum to 1 exactly.
_DEFAULT_INITIAL = {
    IntentLabel.INFORMATION_INQUIRY: 0.45,
    IntentLabel.POSITIVE_INTENT: 0.10,
    IntentLabel.JOB_CONCERNS: 0.15,
    IntentLabel.SELF_CONCERNS: 0.12,
    IntentLabel.REJECTION: 0.08,
    IntentLabel.IRRELEVANT: 0.06,
    IntentLabel.SENT_RESUME_OR_CONTACT: 0.02,
    IntentLabel.TECHNICAL_FAILURE: 0.02,
}

_DEFAULT_ROWS: dict[IntentLabel, dict[IntentLabel, float]] = {
    IntentLabel.INFORMATION_INQUIRY: {
        IntentLabel.INFORMATION_INQUIRY: 0.30,
        IntentLabel.POSITIVE_INTENT: 0.20,
        IntentLabel.JOB_CONCERNS: 0.12,
        IntentLabel.SELF_CONCERNS: 0.10,
        IntentLabel.REJECTION: 0.08,
        IntentLabel.IRRELEVANT: 0.05,
        IntentLabel.CONVERSION: 0.10,
        IntentLabel.SENT_RESUME_OR_CONTACT: 0.03,
        IntentLabel.TECHNICAL_FAILURE: 0.02,
    },
    IntentLabel.POSITIVE_INTENT: {
        IntentLabel.INFORMATION_INQUIRY: 0.15,
        IntentLabel.POSITIVE_INTENT: 0.15,
        IntentLabel.JOB_CONCERNS: 0.05,
        IntentLabel.SELF_CONCERNS: 0.05,
        IntentLabel.REJECTION: 0.05,
        IntentLabel.IRRELEVANT: 0.03,
        IntentLabel.CONVERSION: 0.35,
        IntentLabel.SENT_RESUME_OR_CONTACT: 0.12,
        IntentLabel.TECHNICAL_FAILURE: 0.05,
    },
    IntentLabel.JOB_CONCERNS: {
        IntentLabel.INFORMATION_INQUIRY: 0.20,
        IntentLabel.POSITIVE_INTENT: 0.15,
        IntentLabel.JOB_CONCERNS: 0.20,
        IntentLabel.SELF_CONCERNS: 0.08,
        IntentLabel.REJECTION: 0.17,
        IntentLabel.IRRELEVANT: 0.05,
        IntentLabel.CONVERSION: 0.08,
        IntentLabel.SENT_RESUME_OR_CONTACT: 0.02,
        IntentLabel.TECHNICAL_FAILURE: 0.05,
    },
    IntentLabel.SELF_CONCERNS: {
        IntentLabel.INFORMATION_INQUIRY: 0.15,
        IntentLabel.POSITIVE_INTENT: 0.20,
        IntentLabel.JOB_CONCERNS: 0.10,
        IntentLabel.SELF_CONCERNS: 0.18,
        IntentLabel.REJECTION: 0.15,
        IntentLabel.IRRELEVANT: 0.05,
        IntentLabel.CONVERSION: 0.10,
        IntentLabel.SENT_RESUME_OR_CONTACT: 0.02,
        IntentLabel.TECHNICAL_FAILURE: 0.05,
    },
    IntentLabel.REJECTION: {IntentLabel.REJECTION: 1.0},
    IntentLabel.IRRELEVANT: {
        IntentLabel.INFORMATION_INQUIRY: 0.25,
        IntentLabel.POSITIVE_INTENT: 0.10,
        IntentLabel.JOB_CONCERNS: 0.10,
        IntentLabel.SELF_CONCERNS: 0.08,
        IntentLabel.REJECTION: 0.15,
        IntentLabel.IRRELEVANT: 0.20,
        IntentLabel.CONVERSION: 0.05,
        IntentLabel.SENT_RESUME_OR_CONTACT: 0.02,
        IntentLabel.TECHNICAL_FAILURE: 0.05,
    },
    IntentLabel.CONVERSION: {IntentLabel.CONVERSION: 1.0},
    IntentLabel.SENT_RESUME_OR_CONTACT: {
        IntentLabel.INFORMATION_INQUIRY: 0.15,
        IntentLabel.POSITIVE_INTENT: 0.25,
        IntentLabel.JOB_CONCERNS: 0.05,
        IntentLabel.SELF_CONCERNS: 0.05,
        IntentLabel.REJECTION: 0.05,
        IntentLabel.IRRELEVANT: 0.05,
        IntentLabel.CONVERSION: 0.30,
        IntentLabel.SENT_RESUME_OR_CONTACT: 0.05,
        IntentLabel.TECHNICAL_FAILURE: 0.05,
    },
    IntentLabel.TECHNICAL_FAILURE: {
        IntentLabel.INFORMATION_INQUIRY: 0.10,
        IntentLabel.POSITIVE_INTENT: 0.20,
        IntentLabel.JOB_CONCERNS: 0.05,
        IntentLabel.SELF_CONCERNS: 0.05,
        IntentLabel.REJECTION: 0.15,
        IntentLabel.IRRELEVANT: 0.05,
        IntentLabel.CONVERSION: 0.25,
        IntentLabel.SENT_RESUME_OR_CONTACT: 0.05,
        IntentLabel.TECHNICAL_FAILURE: 0.10,
    },
}


@dataclass(frozen=True)
class GeneratorSpec:
    initial_dist: np.ndarray  # (K,)
    forward_matrix: np.ndarray  # (K, K), row-stochastic
    absorbing: frozenset[IntentLabel]
    max_turns: int
    templates: dict[IntentLabel, tuple[str, ...]]
    conversion_marker_on: frozenset[IntentLabel]
    seed: int
    recruiter_templates: tuple[str, ...] = DEFAULT_RECRUITER_TEMPLATES
    scenarios: tuple[dict[str, str], ...] = DEFAULT_SCENARIOS

    def __post_init__(self):
        validate_spec(self)

    @cached_property
    def _initial_cum(self) -> np.ndarray:
        return np.cumsum(self.initial_dist)

    @cached_property
    def _forward_cum(self) -> np.ndarray:
        return np.cumsum(self.forward_matrix, axis=1)

    @cached_property
    def _absorbing_idx(self) -> frozenset[int]:
        return frozenset(LABEL_INDEX[lab] for lab in self.absorbing)


def validate_spec(spec: GeneratorSpec) -> None:
    if spec.max_turns < 1:
        raise SchemaViolation([(0, "max_turns must be >= 1")])
    if spec.initial_dist.shape != (K,) or spec.forward_matrix.shape != (K, K):
        raise SchemaViolation([(0, "distributions must cover all nine labels")])
    if (spec.initial_dist < 0).any() or (spec.forward_matrix < 0).any():
        raise SchemaViolation([(0, "probabilities must be non-negative")])
    if abs(float(spec.initial_dist.sum()) - 1.0) > ROW_SUM_TOL:
        raise SchemaViolation([(0, f"initial_dist sums to {spec.initial_dist.sum()!r}")])
    row_sums = spec.forward_matrix.sum(axis=1)
    for i, s in enumerate(row_sums):
        if abs(float(s) - 1.0) > ROW_SUM_TOL:
            raise SchemaViolation([(0, f"forward row '{LABELS[i].value}' sums to {float(s)!r}")])
    for lab in reachable_labels(spec):
        if not spec.templates.get(lab):
            raise MissingTemplate(f"no template for reachable label '{lab.value}'")


def reachable_labels(spec: GeneratorSpec) -> set[IntentLabel]:
    reached = {i for i in range(K) if spec.initial_dist[i] > 0}
    frontier = list(reached)
    absorbing = {LABEL_INDEX[lab] for lab in spec.absorbing}
    while frontier:
        i = frontier.pop()
        if i in absorbing:
            continue
        for j in range(K):
            if spec.forward_matrix[i, j] > 0 and j not in reached:
                reached.add(j)
                frontier.append(j)
    return {LABELS[i] for i in reached}


def default_spec(seed: int = 20240901) -> GeneratorSpec:
    initial = np.zeros(K)
    for lab, p in _DEFAULT_INITIAL.items():
        initial[LABEL_INDEX[lab]] = p
    forward = np.zeros((K, K))
    for src, row in _DEFAULT_ROWS.items():
        for dst, p in row.items():
            forward[LABEL_INDEX[src], LABEL_INDEX[dst]] = p
    return GeneratorSpec(
        initial_dist=initial,
        forward_matrix=forward,
        absorbing=frozenset({IntentLabel.CONVERSION, IntentLabel.REJECTION}),
        max_turns=12,
        templates=dict(DEFAULT_TEMPLATES),
        conversion_marker_on=frozenset({IntentLabel.CONVERSION}),
        seed=seed,
    )


def sample_chain(spec: GeneratorSpec, rng: np.random.Generator) -> IntentChain:
    """Draw one intent chain: initial label, then forward steps until an
    absorbing label or the turn cap."""
    current = int(np.searchsorted(spec._initial_cum, rng.random(), side="right"))
    current = min(current, K - 1)
    idx = [current]
    while len(idx) < spec.max_turns and current not in spec._absorbing_idx:
        current = int(np.searchsorted(spec._forward_cum[current], rng.random(), side="right"))
        current = min(current, K - 1)
        idx.append(current)
    return IntentChain(dialogue_id="", labels=tuple(LABELS[i] for i in idx))


def _fill(template: str, scenario: dict[str, str]) -> str:
    for key, value in scenario.items():
        template = template.replace("{" + key + "}", value)
    return template


def render_dialogue(
    chain: IntentChain,
    spec: GeneratorSpec,
    rng: np.random.Generator,
    dialogue_id: str = "syn-000001",
    scenario_id: str = "scn-000001",
    source: str = "synthetic",
) -> Dialogue:
    """Alternate recruiter/candidate turns along the chain.

    Candidate texts are drawn uniformly from the label's templates with the
    intent pre-filled; labels in ``conversion_marker_on`` additionally carry
    the exact conversion behavior tag.
    """
    scenario = spec.scenarios[int(rng.integers(len(spec.scenarios)))]
    turns: list[Turn] = []
    for lab in chain.labels:
        pool = spec.templates.get(lab)
        if not pool:
            raise MissingTemplate(f"no template for label '{lab.value}'")
        recruiter_text = _fill(
            spec.recruiter_templates[int(rng.integers(len(spec.recruiter_templates)))],
            scenario,
        )
        turns.append(
            Turn(index=len(turns), speaker=RECRUITER, text=recruiter_text)
        )
        candidate_text = _fill(pool[int(rng.integers(len(pool)))], scenario)
        tags = (CONVERSION_MARKER,) if lab in spec.conversion_marker_on else ()
        turns.append(
            Turn(
                index=len(turns),
                speaker=CANDIDATE,
                text=candidate_text,
                behavior_tags=tags,
                intent=lab,
            )
        )
    profile = Profile(
        gender=("male", "female")[int(rng.integers(2))],
        age=int(rng.integers(18, 46)),
        job_preferences=(scenario.get("job", ""),),
    )
    return Dialogue(
        id=dialogue_id,
        source=source,
        turns=tuple(turns),
        scenario_id=scenario_id,
        profile=profile,
    )


def generate_corpus(
    spec: GeneratorSpec,
    n: int,
    source: str = "synthetic",
    id_prefix: str = "syn",
) -> Corpus:
    """n rendered dialogues with ids '{prefix}-000001'..., fully labeled."""
    if n < 1:
        raise ValueError("n must be >= 1")
    seed = spec.seed & ((1 << 64) - 1)  # SeedSequence wants non-negative words
    dialogues = []
    for i in range(n):
        rng = np.random.default_rng([seed, i])
        chain = sample_chain(spec, rng)
        dialogues.append(
            render_dialogue(
                chain,
                spec,
                rng,
                dialogue_id=f"{id_prefix}-{i + 1:06d}",
                scenario_id=f"scn-{i + 1:06d}",
                source=source,
            )
        )
    return Corpus(dialogues=tuple(dialogues), source=source)


def expected_joint(spec: GeneratorSpec) -> np.ndarray:
    """Exact joint (previous, current) pair distribution of the chain law.

    Propagates the still-alive state distribution step by step: transitions
    leave state i at step t only when i is non-absorbing and t is below the
    turn cap.  Expected pair counts normalized to a distribution give the
    population value the sample estimator converges to.
    """
    alive = spec.initial_dist.astype(np.float64).copy()
    absorbing = np.zeros(K, dtype=bool)
    for lab in spec.absorbing:
        absorbing[LABEL_INDEX[lab]] = True
    expected = np.zeros((K, K), dtype=np.float64)
    for _ in range(spec.max_turns - 1):
        emitting = np.where(absorbing, 0.0, alive)
        expected += emitting[:, None] * spec.forward_matrix
        alive = emitting @ spec.forward_matrix
    total = expected.sum()
    if total <= 0:
        raise DegenerateDistribution("spec produces no transitions")
    return (expected / total).reshape(-1)


def perturb_forward_rows(matrix: np.ndarray, mass: float) -> np.ndarray:
    """Shift the given fraction of each row's mass one column to the right
    (cyclically); used to build deliberately misaligned generator specs."""
    if not 0.0 <= mass <= 1.0:
        raise ValueError("mass must lie in [0, 1]")
    return (1.0 - mass) * matrix + mass * np.roll(matrix, 1, axis=1)


# ---------------------------------------------------------------------------
# Spec file format
# ---------------------------------------------------------------------------

def spec_to_dict(spec: GeneratorSpec) -> dict[str, Any]:
    return {
        "seed": spec.seed,
        "max_turns": spec.max_turns,
        "absorbing": [lab.value for lab in sorted(spec.absorbing, key=LABELS.index)],
        "initial_dist": {
            lab.value: float(spec.initial_dist[i])
            for i, lab in enumerate(LABELS)
            if spec.initial_dist[i] > 0
        },
        "forward_matrix": {
            src.value: {
                dst.value: float(spec.forward_matrix[i, j])
                for j, dst in enumerate(LABELS)
                if spec.forward_matrix[i, j] > 0
            }
            for i, src in enumerate(LABELS)
        },
        "templates": {lab.value: list(t) for lab, t in spec.templates.items()},
        "conversion_marker_on": [
            lab.value for lab in sorted(spec.conversion_marker_on, key=LABELS.index)
        ],
        "recruiter_templates": list(spec.recruiter_templates),
        "scenarios": [dict(s) for s in spec.scenarios],
    }


def _label(name: str) -> IntentLabel:
    for lab in LABELS:
        if lab.value == name:
            return lab
    raise SchemaViolation([(0, f"unknown label '{name}'")])


def spec_from_dict(obj: dict[str, Any]) -> GeneratorSpec:
    try:
        initial = np.zeros(K)
        for name, p in obj.get("initial_dist", {}).items():
            initial[LABEL_INDEX[_label(name)]] = float(p)
        forward = np.zeros((K, K))
        for src, row in obj.get("forward_matrix", {}).items():
            for dst, p in row.items():
                forward[LABEL_INDEX[_label(src)], LABEL_INDEX[_label(dst)]] = float(p)
        templates = {
            _label(name): tuple(str(t) for t in items)
            for name, items in obj.get("templates", {}).items()
        }
        return GeneratorSpec(
            initial_dist=initial,
            forward_matrix=forward,
            absorbing=frozenset(_label(n) for n in obj.get("absorbing", [])),
            max_turns=int(obj.get("max_turns", 12)),
            templates=templates,
            conversion_marker_on=frozenset(
                _label(n) for n in obj.get("conversion_marker_on", [])
            ),
            seed=int(obj["seed"]),
            recruiter_templates=tuple(
                obj.get("recruiter_templates", DEFAULT_RECRUITER_TEMPLATES)
            ),
            scenarios=tuple(obj.get("scenarios", DEFAULT_SCENARIOS)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaViolation([(0, f"invalid generator spec: {exc}")]) from exc


def load_spec(path: str | Path) -> GeneratorSpec:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IOFailure(f"cannot read spec {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaViolation([(0, f"spec is not valid JSON: {exc.msg}")]) from exc
    return spec_from_dict(obj)
