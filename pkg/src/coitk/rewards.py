"""Rule-based dialogue scoring used as offline curation signals.

Three per-turn penalty terms (repetition, length, illegal actions) combine
into a weighted behavior score, and a separate safety rule check combines
with an optional external model score.  Every penalty lies in [-1, 0] so the
terms stay commensurate before weighting; the weighted sums are exact
arithmetic identities over their components.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .clients import trigram_jaccard
from .corpus import CANDIDATE, CANDIDATE_ACTIONS, RECRUITER, Dialogue
from .errors import IOFailure, ModelScoreOutOfRange


@dataclass(frozen=True)
class RewardWeights:
    lambda1: float = 1.0  # repetition
    lambda2: float = 1.0  # length
    lambda3: float = 1.0  # actions
    alpha: float = 0.5  # rule share of the combined score
    beta: float = 0.5  # model share of the combined score
    length_band: tuple[int, int] = (2, 120)
    repeat_threshold: float = 0.8

    def __post_init__(self):
        lo, hi = self.length_band
        if lo < 1 or lo > hi:
            raise ValueError("length_band must satisfy 1 <= min <= max")
        if not 0.0 < self.repeat_threshold <= 1.0:
            raise ValueError("repeat_threshold must lie in (0, 1]")


@dataclass(frozen=True)
class RewardBreakdown:
    r_repeat: float
    r_length: float
    r_action: float
    r_total: float
    r_rule: float
    r_model: float | None = None
    r_combined: float | None = None

    def to_dict(self) -> dict:
        return {
            "r_repeat": self.r_repeat,
            "r_length": self.r_length,
            "r_action": self.r_action,
            "r_total": self.r_total,
            "r_rule": self.r_rule,
            "r_model": self.r_model,
            "r_combined": self.r_combined,
        }


# Patterns applied when no pattern file is configured.  Lines starting with
# '^' or ending with '$' are treated as regexes; everything else is a
# case-insensitive substring.
DEFAULT_BANNED_PATTERNS = (
    "idiot",
    "stupid",
    "shut up",
    "id card number",
    "bank account",
    "bank card",
    "password",
    "home address",
)


def load_patterns(path: str | Path) -> tuple[str, ...]:
    """One pattern per line; blank lines and '#' comments are skipped."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IOFailure(f"cannot read pattern file {path}: {exc}") from exc
    out = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            out.append(line)
    return tuple(out)


def _matches(pattern: str, text: str) -> bool:
    if pattern.startswith("^") or pattern.endswith("$"):
        return re.search(pattern, text, flags=re.IGNORECASE) is not None
    return pattern.casefold() in text.casefold()


def repeat_penalty(d: Dialogue, threshold: float = 0.8) -> float:
    """Fraction of candidate turns that near-repeat an earlier candidate turn.

    A turn repeats when its character-trigram Jaccard with any earlier
    candidate turn exceeds the threshold.  Range [-1, 0].
    """
    turns = [t.text for t in d.turns if t.speaker == CANDIDATE]
    if not turns:
        return 0.0
    repeats = 0
    for i, text in enumerate(turns):
        if any(trigram_jaccard(text, earlier) > threshold for earlier in turns[:i]):
            repeats += 1
    return -repeats / len(turns)


def length_penalty(d: Dialogue, band: tuple[int, int] = (2, 120)) -> float:
    """Fraction of candidate turns whose token count falls outside the band."""
    lo, hi = band
    turns = [t for t in d.turns if t.speaker == CANDIDATE]
    if not turns:
        return 0.0
    outside = sum(1 for t in turns if not lo <= len(t.text.split()) <= hi)
    return -outside / len(turns)


def action_penalty(d: Dialogue) -> float:
    """-1 when a candidate behavior tag recurs or is not a known action.

    The at-most-once constraint binds the candidate side; recruiter tags are
    tool calls policed by rule_reward instead.
    """
    seen: set[str] = set()
    for turn in d.turns:
        if turn.speaker != CANDIDATE:
            continue
        for tag in turn.behavior_tags:
            if tag not in CANDIDATE_ACTIONS or tag in seen:
                return -1.0
            seen.add(tag)
    return 0.0


def rule_reward(d: Dialogue, banned_patterns: tuple[str, ...] = DEFAULT_BANNED_PATTERNS) -> float:
    """-1 when any recruiter turn trips a safety rule, else 0.

    Rules: matching a banned/privacy pattern, or repeating an earlier
    recruiter question verbatim.
    """
    seen_questions: set[str] = set()
    for turn in d.turns:
        if turn.speaker != RECRUITER:
            continue
        if any(_matches(p, turn.text) for p in banned_patterns):
            return -1.0
        if turn.text.endswith(("?", "？")):
            if turn.text in seen_questions:
                return -1.0
            seen_questions.add(turn.text)
    return 0.0


def combined_reward(
    d: Dialogue,
    model_score: float | None = None,
    w: RewardWeights = RewardWeights(),
    banned_patterns: tuple[str, ...] = DEFAULT_BANNED_PATTERNS,
) -> RewardBreakdown:
    """Full scoring breakdown for one dialogue.

    ``r_total`` is the exact weighted sum of the three behavior penalties;
    when an external model score in [-1, 1] is supplied, ``r_combined``
    additionally mixes the rule check with it.
    """
    if model_score is not None and not -1.0 <= model_score <= 1.0:
        raise ModelScoreOutOfRange(f"model score {model_score} outside [-1, 1]")
    r_repeat = repeat_penalty(d, w.repeat_threshold)
    r_length = length_penalty(d, w.length_band)
    r_action = action_penalty(d)
    r_total = w.lambda1 * r_repeat + w.lambda2 * r_length + w.lambda3 * r_action
    r_rule = rule_reward(d, banned_patterns)
    if model_score is None:
        return RewardBreakdown(
            r_repeat=r_repeat,
            r_length=r_length,
            r_action=r_action,
            r_total=r_total,
            r_rule=r_rule,
        )
    return RewardBreakdown(
        r_repeat=r_repeat,
        r_length=r_length,
        r_action=r_action,
        r_total=r_total,
        r_rule=r_rule,
        r_model=model_score,
        r_combined=w.alpha * r_rule + w.beta * model_score,
    )
