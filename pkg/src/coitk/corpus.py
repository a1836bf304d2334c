"""Dialogue data model: labels, turns, dialogues, corpora and JSON Lines I/O.

A corpus file is UTF-8 JSON Lines, one dialogue object per line with keys
``id, scenario_id, source, profile, turns``.  Unknown keys (top-level and
per-turn) are preserved byte-for-byte on round-trip.  Corpus objects are
immutable after ingest and safe to share between threads.
"""

from __future__ import annotations

import enum
import json
import os
import tempfile
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Any, Iterable, Iterator

from .errors import DuplicateId, IOFailure, SchemaViolation, UnlabeledCorpus


class IntentLabel(str, enum.Enum):
    """The closed nine-way intent taxonomy for candidate utterances.

    Declaration order is load-bearing: it fixes matrix axes and the
    row-major flattening order used by all distribution metrics.
    """

    INFORMATION_INQUIRY = "Information Inquiry"
    POSITIVE_INTENT = "Positive Intent"
    JOB_CONCERNS = "Concerns About the Job"
    SELF_CONCERNS = "Concerns About Self"
    REJECTION = "Rejection"
    IRRELEVANT = "Irrelevant Utterance"
    CONVERSION = "Successful Conversion"
    SENT_RESUME_OR_CONTACT = "Sent Resume or Contact Info"
    TECHNICAL_FAILURE = "Positive Intent but Technical Failure"

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


LABELS: tuple[IntentLabel, ...] = tuple(IntentLabel)
NUM_LABELS = len(LABELS)
LABEL_INDEX: dict[IntentLabel, int] = {lab: i for i, lab in enumerate(LABELS)}
_LABEL_BY_NAME: dict[str, IntentLabel] = {lab.value: lab for lab in LABELS}

RECRUITER = "recruiter"
CANDIDATE = "candidate"

# Outcome detection is an exact string match; the marker is never normalized.
CONVERSION_MARKER = "[Behavior]C clicked contact information card"

# Behavior tags a candidate may legitimately emit, each at most once per
# dialogue (enforced by rewards.action_penalty).
CANDIDATE_ACTIONS = frozenset(
    {
        CONVERSION_MARKER,
        "[Behavior] C add contact information card",
        "[Behavior] requested to exchange contact information",
        "[Behavior] sent resume",
        "[Behavior] sent attached resume",
        "[Behavior] shared phone number",
        "[Behavior] ended conversation",
    }
)

CONVERSION = "Conversion"
NON_CONVERSION = "NonConversion"

# A candidate turn counts as a question when labeled Information Inquiry or
# when its text carries an ASCII or full-width question mark.
_QUESTION_MARKS = ("?", "？")


@dataclass(frozen=True)
class Profile:
    """Candidate profile; every field may be empty."""

    gender: str = ""
    age: int | None = None
    work_experience: tuple[str, ...] = ()
    job_preferences: tuple[str, ...] = ()


@dataclass(frozen=True)
class Turn:
    index: int
    speaker: str
    text: str
    behavior_tags: tuple[str, ...] = ()
    intent: IntentLabel | None = None
    extra: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class Dialogue:
    id: str
    source: str
    turns: tuple[Turn, ...]
    scenario_id: str | None = None
    profile: Profile = field(default_factory=Profile)
    extra: dict[str, Any] = field(default_factory=dict)

    def candidate_turns(self) -> tuple[Turn, ...]:
        return tuple(t for t in self.turns if t.speaker == CANDIDATE)

    @property
    def labeled(self) -> bool:
        return all(t.intent is not None for t in self.candidate_turns())


@dataclass(frozen=True)
class Corpus:
    dialogues: tuple[Dialogue, ...]
    source: str = "mixed"

    @property
    def label_complete(self) -> bool:
        return all(d.labeled for d in self.dialogues)

    @cached_property
    def by_id(self) -> dict[str, Dialogue]:
        return {d.id: d for d in self.dialogues}

    def __len__(self) -> int:
        return len(self.dialogues)

    def __iter__(self) -> Iterator[Dialogue]:
        return iter(self.dialogues)


def derive_outcome(d: Dialogue) -> str:
    """Classify the dialogue outcome by exact conversion-marker match.

    The marker must appear verbatim as a behavior tag or as a substring of
    some turn's text; anything else is a non-conversion.
    """
    for turn in d.turns:
        if CONVERSION_MARKER in turn.behavior_tags or CONVERSION_MARKER in turn.text:
            return CONVERSION
    return NON_CONVERSION


def is_question(turn: Turn) -> bool:
    if turn.intent is IntentLabel.INFORMATION_INQUIRY:
        return True
    return any(mark in turn.text for mark in _QUESTION_MARKS)


def extract_questions(c: Corpus) -> dict[IntentLabel, list[tuple[str, str]]]:
    """Collect question-like candidate turns per intent category.

    Returns ``{label: [(dialogue_id, text), ...]}`` in corpus order, with an
    entry for every label (possibly empty).  Requires a fully labeled corpus.
    """
    if not c.label_complete:
        raise UnlabeledCorpus("extract_questions requires a fully labeled corpus")
    out: dict[IntentLabel, list[tuple[str, str]]] = {lab: [] for lab in LABELS}
    for d in c.dialogues:
        for turn in d.candidate_turns():
            if is_question(turn):
                out[turn.intent].append((d.id, turn.text))
    return out


# ---------------------------------------------------------------------------
# JSON Lines ingestion and serialization
# ---------------------------------------------------------------------------

_TURN_KEYS = {"index", "speaker", "text", "behavior_tags", "intent"}
_DIALOGUE_KEYS = {"id", "scenario_id", "source", "profile", "turns"}
_PROFILE_KEYS = {"gender", "age", "work_experience", "job_preferences"}


def _parse_profile(raw: Any, problems: list[str]) -> Profile:
    if raw is None:
        return Profile()
    if not isinstance(raw, dict):
        problems.append("profile must be an object")
        return Profile()
    age = raw.get("age")
    if age is not None:
        if not isinstance(age, int) or isinstance(age, bool):
            problems.append("profile.age must be an integer")
            age = None
        elif not 14 <= age <= 100:
            problems.append(f"profile.age {age} outside [14, 100]")
            age = None
    return Profile(
        gender=str(raw.get("gender") or ""),
        age=age,
        work_experience=tuple(str(x) for x in raw.get("work_experience") or ()),
        job_preferences=tuple(str(x) for x in raw.get("job_preferences") or ()),
    )


def _parse_turn(raw: Any, position: int, problems: list[str]) -> Turn | None:
    if not isinstance(raw, dict):
        problems.append(f"turn {position} must be an object")
        return None
    for key in ("index", "speaker", "text"):
        if key not in raw:
            problems.append(f"turn {position} missing '{key}'")
            return None
    index = raw["index"]
    if not isinstance(index, int) or isinstance(index, bool):
        problems.append(f"turn {position} index must be an integer")
        return None
    speaker = raw["speaker"]
    if speaker not in (RECRUITER, CANDIDATE):
        problems.append(f"turn {position} speaker '{speaker}' not recruiter|candidate")
        return None
    if not isinstance(raw["text"], str):
        problems.append(f"turn {position} text must be a string")
        return None
    tags_raw = raw.get("behavior_tags", [])
    if not isinstance(tags_raw, list) or not all(isinstance(t, str) for t in tags_raw):
        problems.append(f"turn {position} behavior_tags must be a list of strings")
        return None
    intent = None
    intent_raw = raw.get("intent")
    if intent_raw is not None:
        if intent_raw not in _LABEL_BY_NAME:
            problems.append(f"turn {position} intent '{intent_raw}' is not a valid label")
            return None
        intent = _LABEL_BY_NAME[intent_raw]
        if speaker != CANDIDATE:
            problems.append(f"turn {position}: only candidate turns carry intents")
            return None
    extra = {k: v for k, v in raw.items() if k not in _TURN_KEYS}
    return Turn(
        index=index,
        speaker=speaker,
        text=raw["text"],
        behavior_tags=tuple(tags_raw),
        intent=intent,
        extra=extra,
    )


def parse_dialogue(raw: Any) -> Dialogue:
    """Validate one decoded JSON object; raises SchemaViolation scoped to it."""
    problems: list[str] = []
    if not isinstance(raw, dict):
        raise SchemaViolation([(0, "dialogue must be a JSON object")])
    did = raw.get("id")
    if not isinstance(did, str) or not did:
        problems.append("missing or empty 'id'")
        did = ""
    source = raw.get("source")
    if source not in ("real", "synthetic"):
        problems.append(f"source '{source}' not real|synthetic")
        source = "real"
    scenario_id = raw.get("scenario_id")
    if scenario_id is not None and not isinstance(scenario_id, str):
        problems.append("scenario_id must be a string")
        scenario_id = None
    if source == "synthetic" and not scenario_id:
        problems.append("synthetic dialogues require a scenario_id")
    profile = _parse_profile(raw.get("profile"), problems)
    turns_raw = raw.get("turns")
    turns: list[Turn] = []
    if not isinstance(turns_raw, list) or not turns_raw:
        problems.append("missing or empty 'turns'")
    else:
        for pos, traw in enumerate(turns_raw):
            turn = _parse_turn(traw, pos, problems)
            if turn is not None:
                turns.append(turn)
        if len(turns) == len(turns_raw):
            if [t.index for t in turns] != list(range(len(turns))):
                problems.append("turn indices must be contiguous from 0")
            if not any(t.speaker == CANDIDATE for t in turns):
                problems.append("dialogue has no candidate turn")
    if problems:
        raise SchemaViolation([(0, p) for p in problems])
    extra = {k: v for k, v in raw.items() if k not in _DIALOGUE_KEYS}
    return Dialogue(
        id=did,
        source=source,
        turns=tuple(turns),
        scenario_id=scenario_id,
        profile=profile,
        extra=extra,
    )


def _corpus_source(dialogues: Iterable[Dialogue]) -> str:
    sources = {d.source for d in dialogues}
    if sources == {"real"}:
        return "real"
    if sources == {"synthetic"}:
        return "synthetic"
    return "mixed"


def ingest(path: str | Path) -> Corpus:
    """Read and validate a JSON Lines corpus file.

    All malformed lines are collected before raising, so callers can report
    every problem with its 1-based line number in one pass.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc}") from exc

    dialogues: list[Dialogue] = []
    problems: list[tuple[int, str]] = []
    seen: dict[str, int] = {}
    duplicates_only = True
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            problems.append((lineno, f"invalid JSON: {exc.msg}"))
            duplicates_only = False
            continue
        try:
            dialogue = parse_dialogue(raw)
        except SchemaViolation as exc:
            problems.extend((lineno, msg) for _, msg in exc.problems)
            duplicates_only = False
            continue
        if dialogue.id in seen:
            problems.append(
                (lineno, f"duplicate id '{dialogue.id}' (first seen line {seen[dialogue.id]})")
            )
            continue
        seen[dialogue.id] = lineno
        dialogues.append(dialogue)

    if problems:
        if duplicates_only:
            raise DuplicateId(problems)
        raise SchemaViolation(problems)
    if not dialogues:
        raise SchemaViolation([(0, "corpus file contains no dialogues")])
    return Corpus(dialogues=tuple(dialogues), source=_corpus_source(dialogues))


def dialogue_to_dict(d: Dialogue) -> dict[str, Any]:
    """Serialize in canonical key order; unknown keys follow the known ones."""
    turns = []
    for t in d.turns:
        turn_obj: dict[str, Any] = {
            "index": t.index,
            "speaker": t.speaker,
            "text": t.text,
            "behavior_tags": list(t.behavior_tags),
            "intent": t.intent.value if t.intent is not None else None,
        }
        turn_obj.update(t.extra)
        turns.append(turn_obj)
    obj: dict[str, Any] = {
        "id": d.id,
        "scenario_id": d.scenario_id,
        "source": d.source,
        "profile": {
            "gender": d.profile.gender,
            "age": d.profile.age,
            "work_experience": list(d.profile.work_experience),
            "job_preferences": list(d.profile.job_preferences),
        },
        "turns": turns,
    }
    obj.update(d.extra)
    return obj


def write_corpus(c: Corpus, path: str | Path) -> None:
    """Write a corpus atomically (temp file + rename in the target directory)."""
    path = Path(path)
    lines = [json.dumps(dialogue_to_dict(d), ensure_ascii=False) for d in c.dialogues]
    payload = "\n".join(lines) + "\n"
    atomic_write_text(path, payload)


def atomic_write_text(path: str | Path, payload: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except OSError as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise IOFailure(f"cannot write {path}: {exc}") from exc


def with_labels(d: Dialogue, labels: dict[int, IntentLabel]) -> Dialogue:
    """Return a copy with intents filled in for the given turn indices."""
    turns = tuple(
        replace(t, intent=labels[t.index]) if t.index in labels else t for t in d.turns
    )
    return replace(d, turns=turns)
