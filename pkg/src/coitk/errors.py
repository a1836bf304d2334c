"""Exception hierarchy shared across the toolkit."""

from __future__ import annotations


class CoitkError(Exception):
    """Base class for all toolkit errors."""


# --- corpus / ingestion ---

class IOFailure(CoitkError):
    """File could not be read or written."""


class SchemaViolation(CoitkError):
    """One or more corpus lines violate the dialogue schema.

    ``problems`` is a list of (line_number, message) pairs, 1-based.
    """

    def __init__(self, problems: list[tuple[int, str]]):
        self.problems = list(problems)
        lines = "; ".join(f"line {n}: {msg}" for n, msg in self.problems)
        super().__init__(lines or "schema violation")


class DuplicateId(SchemaViolation):
    """A dialogue id occurs more than once within a corpus file."""


class UnlabeledCorpus(CoitkError):
    """Operation requires every candidate turn to carry an intent label."""


# --- clients ---

class RemoteUnavailable(CoitkError):
    """Remote service did not answer within the retry budget."""


class UnparseableLabel(CoitkError):
    """Classifier response is not one of the nine intent labels."""


class OutOfRangeScore(CoitkError):
    """Judge returned a value outside the discrete score set."""


class ZeroVector(CoitkError):
    """Embedding input produced no tokens; caller treats it as a singleton."""


# --- transition statistics ---

class MissingLabel(CoitkError):
    """A candidate turn lacks an intent label; carries the turn index."""

    def __init__(self, turn_index: int):
        self.turn_index = turn_index
        super().__init__(f"candidate turn {turn_index} has no intent label")


class EmptyInput(CoitkError):
    """Operation requires a non-empty collection."""


class DegenerateDistribution(CoitkError):
    """No transitions observed and no smoothing requested."""


# --- metrics ---

class SupportMismatch(CoitkError):
    """p has mass on a cell where unsmoothed q is zero."""


class NoQuestions(CoitkError):
    """Every intent category is empty of questions."""


class EmptyReferenceCorpus(CoitkError):
    """Reference retrieval requires a non-empty real corpus."""


class UnpairedScenario(CoitkError):
    """Synthetic scenario_ids that do not match exactly one real dialogue.

    ``ids`` lists the offending dialogue ids.
    """

    def __init__(self, ids: list[str]):
        self.ids = list(ids)
        super().__init__(f"unpaired scenario ids: {', '.join(self.ids)}")


# --- rewards ---

class ModelScoreOutOfRange(CoitkError):
    """External model score must lie in [-1, 1]."""


# --- selection ---

class KTooLarge(CoitkError):
    """Requested subset size exceeds the pool size."""


class CombinatorialBlowup(CoitkError):
    """Exhaustive enumeration would exceed the subset budget."""


# --- generation ---

class MissingTemplate(CoitkError):
    """Generator spec lacks an utterance template for a reachable label."""
