"""Pluggable scoring services: intent classifier, style judge, text embedder.

Each service exists in two flavors.  Remote clients speak a minimal HTTP
protocol (POST ``{"prompt": ...}``, response ``{"text": ...}``) with
exponential-backoff retries.  Stub clients are pure functions of their
inputs - byte-identical inputs give byte-identical outputs on every platform -
so the whole pipeline runs offline and reproducibly.
"""

from __future__ import annotations

import hashlib
import json
import math
import threading
import time
from dataclasses import dataclass

import numpy as np
import requests

from .corpus import CANDIDATE_ACTIONS, CONVERSION_MARKER, LABELS, IntentLabel
from .errors import OutOfRangeScore, RemoteUnavailable, UnparseableLabel, ZeroVector

STYLE_STEPS = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
EMBED_DIM = 256

ENV_CLASSIFIER_URL = "COI_CLASSIFIER_URL"
ENV_JUDGE_URL = "COI_JUDGE_URL"
ENV_EMBEDDER_URL = "COI_EMBEDDER_URL"


@dataclass(frozen=True)
class ClientConfig:
    mode: str = "stub"  # "stub" | "remote"
    endpoint: str = ""
    timeout_ms: int = 10_000
    max_retries: int = 2
    max_inflight: int = 8

    def __post_init__(self):
        if self.mode not in ("stub", "remote"):
            raise ValueError(f"unknown client mode '{self.mode}'")
        if self.timeout_ms <= 0:
            raise ValueError("timeout must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.mode == "stub" and self.endpoint:
            raise ValueError("stub mode takes no endpoint")
        if self.mode == "remote" and not self.endpoint:
            raise ValueError("remote mode requires an endpoint")


# ---------------------------------------------------------------------------
# Text similarity primitives (shared with the reward rules)
# ---------------------------------------------------------------------------

def char_trigrams(text: str) -> frozenset[str]:
    """Character trigram set; strings shorter than 3 chars are their own gram.

    Character level (not word level) keeps the measure meaningful for CJK
    text, which has no whitespace token boundaries.
    """
    if len(text) < 3:
        return frozenset((text,))
    return frozenset(text[i : i + 3] for i in range(len(text) - 2))


def trigram_jaccard(a: str, b: str) -> float:
    ta, tb = char_trigrams(a), char_trigrams(b)
    union = len(ta | tb)
    if union == 0:
        return 0.0
    return len(ta & tb) / union


def discretize_style(value: float) -> float:
    """Round to the nearest 0.2 step, ties rounding up."""
    return min(math.floor(value * 5.0 + 0.5), 5) / 5.0


# ---------------------------------------------------------------------------
# Stub implementations
# ---------------------------------------------------------------------------

_TECH_FAILURE_PHRASES = (
    "can't add", "cannot add", "can not add", "unable to add", "can't click",
    "cannot click", "not there", "can't see", "cannot see", "not working",
    "doesn't work", "won't load", "system display issue",
)
_REJECTION_PHRASES = (
    "not suitable", "not interested", "no thanks", "no thank you",
    "not considering", "won't do it", "don't want", "stop messaging",
    "leave me alone", "not for me", "i decline",
)
_FILLER_UTTERANCES = frozenset({"?", "？", ".", "。", "uh", "um", "hmm", "..."})
_SELF_CONCERN_PHRASES = (
    "my voice", "no experience", "haven't done this", "haven't done it",
    "i'm too", "i am too", "too old", "not confident", "my equipment",
    "don't have a", "no time for", "sounds bad", "i'm shy", "my accent",
)
_JOB_CONCERN_PHRASES = (
    "scam", "legit", "fake", "pyramid", "too good to be true", "is this real",
    "fees", "suspicious", "don't believe", "doubt", "fraud",
)
_QUESTION_STARTS = (
    "what", "where", "when", "who", "why", "how", "which",
    "is ", "are ", "do ", "does ", "can ", "could ", "will ", "just ",
)
_AFFIRMATION_PHRASES = (
    "let's talk", "lets talk", "interested", "sounds good", "tell me more",
    "sign me up", "i want to", "sure", "yes", "okay let", "sounds great",
)


class StubIntentClassifier:
    """Deterministic keyword-rule classifier.

    Rules fire in a fixed order: behavior markers, technical-failure phrases,
    rejection phrases, filler utterances, self concerns, job concerns,
    interrogatives, affirmations, then the irrelevant fallback.  Accuracy
    relative to an LLM classifier is not a goal; stability is.
    """

    def classify(self, text: str, context: tuple[str, ...] = ()) -> IntentLabel:
        if not text:
            raise ValueError("utterance must be non-empty")
        if CONVERSION_MARKER in text:
            return IntentLabel.CONVERSION
        if "[Behavior] ended conversation" in text:
            return IntentLabel.REJECTION
        if "[Behavior]" in text:
            return IntentLabel.SENT_RESUME_OR_CONTACT
        low = text.casefold()
        if any(p in low for p in _TECH_FAILURE_PHRASES):
            return IntentLabel.TECHNICAL_FAILURE
        if any(p in low for p in _REJECTION_PHRASES):
            return IntentLabel.REJECTION
        if low.strip() in _FILLER_UTTERANCES:
            return IntentLabel.JOB_CONCERNS
        if any(p in low for p in _SELF_CONCERN_PHRASES):
            return IntentLabel.SELF_CONCERNS
        if any(p in low for p in _JOB_CONCERN_PHRASES):
            return IntentLabel.JOB_CONCERNS
        if "?" in text or "？" in text or low.startswith(_QUESTION_STARTS):
            return IntentLabel.INFORMATION_INQUIRY
        if any(p in low for p in _AFFIRMATION_PHRASES):
            return IntentLabel.POSITIVE_INTENT
        return IntentLabel.IRRELEVANT


class StubStyleJudge:
    """Scores style resemblance as discretized character-trigram Jaccard."""

    def style_score(self, generated: str, reference: str) -> float:
        if not generated or not reference:
            raise ValueError("both texts must be non-empty")
        return discretize_style(trigram_jaccard(generated, reference))


class StubEmbedder:
    """Hash whitespace tokens into 256 count-weighted buckets, L2-normalized.

    Tokens are casefolded and hashed with blake2b, so vectors are identical
    across processes and platforms (unlike the builtin randomized hash).
    """

    dim = EMBED_DIM

    def embed(self, text: str) -> np.ndarray:
        if not text:
            raise ValueError("text must be non-empty")
        tokens = text.casefold().split()
        if not tokens:
            raise ZeroVector("input has no tokens")
        vec = np.zeros(self.dim, dtype=np.float64)
        for tok in tokens:
            digest = hashlib.blake2b(tok.encode("utf-8"), digest_size=8).digest()
            vec[int.from_bytes(digest, "big") % self.dim] += 1.0
        norm = float(np.linalg.norm(vec))
        return vec / norm


# ---------------------------------------------------------------------------
# Remote implementations
# ---------------------------------------------------------------------------

_LABEL_LINES = "\n".join(f"- {lab.value}" for lab in LABELS)
_ACTION_LINES = "\n".join(f"- {a}" for a in sorted(CANDIDATE_ACTIONS))

CLASSIFIER_PROMPT = (
    "Classify the job candidate's chat utterance into exactly one intent "
    "category.\n\n"
    "Categories:\n"
    f"{_LABEL_LINES}\n\n"
    "Guidance: utterances containing the literal tag "
    f'"{CONVERSION_MARKER}" are always Successful Conversion. Other '
    '"[Behavior]" tags that send a resume or share contact details are '
    "Sent Resume or Contact Info. Questions about the job or company are "
    "Information Inquiry. Doubts about the posting itself are Concerns About "
    "the Job; doubts about the candidate's own fit are Concerns About Self. "
    "Wanting to proceed but being blocked by a technical problem is Positive "
    "Intent but Technical Failure.\n\n"
    "Candidate utterance: {user_dialogue}\n\n"
    "Reply with the category name only, spelled exactly as listed above."
)

JUDGE_PROMPT = (
    "Rate how closely the tone and manner of speaking of the generated "
    "dialogue matches the original dialogue. Judge the overall voice "
    "(politeness, formality, emotional register, sentence mood), not the "
    "topic overlap.\n\n"
    "Score scale:\n"
    "- 1.0 indistinguishable voices\n"
    "- 0.8 very close, minor differences\n"
    "- 0.6 similar but clearly different speakers\n"
    "- 0.4 noticeably different\n"
    "- 0.2 completely different\n"
    "- 0.0 opposite registers\n\n"
    "Generated dialogue: {text1}\n"
    "Original dialogue: {text2}\n\n"
    "Reply with the score as a single number."
)

EMBEDDER_PROMPT = (
    "Return the embedding of the following text as a JSON array of "
    "numbers.\n\nText: {text}"
)


class _RemoteMixin:
    """Shared POST/retry machinery for the three remote clients."""

    def __init__(self, config: ClientConfig, session: requests.Session | None = None):
        if config.mode != "remote":
            raise ValueError("remote client requires mode='remote'")
        self.config = config
        self._session = session or requests.Session()
        self._gate = threading.BoundedSemaphore(config.max_inflight)
        self._memo: dict[str, str] = {}

    def _call(self, prompt: str) -> str:
        if prompt in self._memo:
            return self._memo[prompt]
        timeout_s = self.config.timeout_ms / 1000.0
        delay = 0.2
        last_error: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                time.sleep(min(delay, timeout_s))
                delay *= 2
            try:
                with self._gate:
                    resp = self._session.post(
                        self.config.endpoint, json={"prompt": prompt}, timeout=timeout_s
                    )
                resp.raise_for_status()
                text = resp.json()["text"]
                if not isinstance(text, str):
                    raise ValueError("response 'text' is not a string")
                self._memo[prompt] = text
                return text
            except (requests.RequestException, ValueError, KeyError) as exc:
                last_error = exc
        raise RemoteUnavailable(
            f"{self.config.endpoint} failed after {self.config.max_retries + 1} attempts"
        ) from last_error


class RemoteIntentClassifier(_RemoteMixin):
    def classify(self, text: str, context: tuple[str, ...] = ()) -> IntentLabel:
        if not text:
            raise ValueError("utterance must be non-empty")
        reply = self._call(CLASSIFIER_PROMPT.format(user_dialogue=text)).strip()
        for lab in LABELS:
            if reply == lab.value:
                return lab
        raise UnparseableLabel(f"classifier returned {reply!r}")


class RemoteStyleJudge(_RemoteMixin):
    def style_score(self, generated: str, reference: str) -> float:
        if not generated or not reference:
            raise ValueError("both texts must be non-empty")
        reply = self._call(JUDGE_PROMPT.format(text1=generated, text2=reference)).strip()
        try:
            value = float(reply)
        except ValueError as exc:
            raise OutOfRangeScore(f"judge returned non-numeric {reply!r}") from exc
        nearest = min(STYLE_STEPS, key=lambda s: abs(s - value))
        if abs(nearest - value) > 1e-6:
            raise OutOfRangeScore(f"judge returned {value} outside the discrete set")
        return nearest


class RemoteEmbedder(_RemoteMixin):
    dim = EMBED_DIM

    def embed(self, text: str) -> np.ndarray:
        if not text:
            raise ValueError("text must be non-empty")
        reply = self._call(EMBEDDER_PROMPT.format(text=text))
        try:
            values = json.loads(reply)
            vec = np.asarray(values, dtype=np.float64)
        except (json.JSONDecodeError, TypeError, ValueError) as exc:
            raise RemoteUnavailable(f"embedder returned non-vector {reply[:80]!r}") from exc
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise ZeroVector("remote embedding is all zeros")
        return vec / norm


def make_clients(
    classifier_cfg: ClientConfig | None = None,
    judge_cfg: ClientConfig | None = None,
    embedder_cfg: ClientConfig | None = None,
):
    """Build the (classifier, judge, embedder) triple from per-service configs."""
    classifier_cfg = classifier_cfg or ClientConfig()
    judge_cfg = judge_cfg or ClientConfig()
    embedder_cfg = embedder_cfg or ClientConfig()
    classifier = (
        StubIntentClassifier()
        if classifier_cfg.mode == "stub"
        else RemoteIntentClassifier(classifier_cfg)
    )
    judge = StubStyleJudge() if judge_cfg.mode == "stub" else RemoteStyleJudge(judge_cfg)
    embedder = StubEmbedder() if embedder_cfg.mode == "stub" else RemoteEmbedder(embedder_cfg)
    return classifier, judge, embedder
