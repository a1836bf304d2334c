"""Intent-chain extraction and transition statistics.

Chains are the per-dialogue sequences of candidate intents.  Aggregated
counts feed three views: the incoming-normalized matrix (each column gives
the distribution of the *previous* intent conditioned on the current one,
so every observed column sums to 1), the flattened joint distribution over
ordered (previous, current) pairs used by the divergence metrics, and the
thresholded transition graph used for route checks.

First turns contribute no transition; their distribution is tracked
separately in ``initial_counts`` and excluded from divergence inputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import CANDIDATE, LABELS, NUM_LABELS, Corpus, Dialogue, IntentLabel, LABEL_INDEX
from .errors import DegenerateDistribution, EmptyInput, MissingLabel

K = NUM_LABELS
K2 = K * K

COLUMN_SUM_TOL = 1e-9


@dataclass(frozen=True)
class IntentChain:
    dialogue_id: str
    labels: tuple[IntentLabel, ...]

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class TransitionCounts:
    """Raw integer transition statistics; counts[i, j] counts i -> j pairs."""

    counts: np.ndarray  # (K, K) int64
    initial_counts: np.ndarray  # (K,) int64
    total_transitions: int
    num_chains: int

    def flat(self) -> np.ndarray:
        """Row-major flattened pair counts, length K^2."""
        return self.counts.reshape(-1)


@dataclass(frozen=True)
class IncomingMatrix:
    """Column-stochastic incoming-transition matrix.

    ``values[i, j]`` is the probability that the previous intent was i given
    the current intent is j.  Columns that received no transitions stay
    all-zero and are listed in ``zero_columns``.
    """

    values: np.ndarray  # (K, K) float64
    column_mass: np.ndarray  # (K,) int64
    zero_columns: tuple[int, ...]


@dataclass(frozen=True)
class JointDistribution:
    """Additively smoothed distribution over ordered intent pairs."""

    probs: np.ndarray  # (K2,) float64
    smoothing_alpha: float

    def __post_init__(self):
        total = float(self.probs.sum())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"joint distribution sums to {total!r}, not 1")
        if (self.probs < 0).any():
            raise ValueError("joint distribution has negative entries")
        if self.smoothing_alpha > 0 and not (self.probs > 0).all():
            raise ValueError("smoothed distribution must be strictly positive")


@dataclass(frozen=True)
class IntentGraph:
    """Directed transitions observed at least ``theta`` times."""

    edges: frozenset[tuple[IntentLabel, IntentLabel]]
    theta: int

    def has_edge(self, src: IntentLabel, dst: IntentLabel) -> bool:
        return (src, dst) in self.edges


def extract_chain(d: Dialogue) -> IntentChain:
    """Candidate-turn intents in dialogue order; fails on the first gap."""
    labels = []
    for turn in d.turns:
        if turn.speaker != CANDIDATE:
            continue
        if turn.intent is None:
            raise MissingLabel(turn.index)
        labels.append(turn.intent)
    if not labels:
        raise MissingLabel(-1)
    return IntentChain(dialogue_id=d.id, labels=tuple(labels))


def extract_chains(c: Corpus) -> list[IntentChain]:
    return [extract_chain(d) for d in c.dialogues]


def accumulate(chains: list[IntentChain]) -> TransitionCounts:
    """Count adjacent intent pairs and chain-initial intents."""
    if not chains:
        raise EmptyInput("no chains to accumulate")
    counts = np.zeros((K, K), dtype=np.int64)
    initial = np.zeros(K, dtype=np.int64)
    for chain in chains:
        idx = [LABEL_INDEX[lab] for lab in chain.labels]
        initial[idx[0]] += 1
        for a, b in zip(idx, idx[1:]):
            counts[a, b] += 1
    return TransitionCounts(
        counts=counts,
        initial_counts=initial,
        total_transitions=int(counts.sum()),
        num_chains=len(chains),
    )


def pair_count_vector(chain: IntentChain) -> np.ndarray:
    """Flattened (K^2,) int64 pair counts of a single chain.

    Selection strategies precompute one vector per dialogue so that subset
    statistics reduce to integer vector sums.
    """
    vec = np.zeros(K2, dtype=np.int64)
    idx = [LABEL_INDEX[lab] for lab in chain.labels]
    for a, b in zip(idx, idx[1:]):
        vec[a * K + b] += 1
    return vec


def corpus_pair_counts(c: Corpus) -> np.ndarray:
    """(n, K^2) int64 matrix of per-dialogue pair counts, in corpus order."""
    return np.stack([pair_count_vector(extract_chain(d)) for d in c.dialogues])


def incoming_matrix(tc: TransitionCounts) -> IncomingMatrix:
    """Normalize each column by its incoming mass; zero columns are flagged."""
    mass = tc.counts.sum(axis=0)
    values = np.zeros((K, K), dtype=np.float64)
    nonzero = mass > 0
    values[:, nonzero] = tc.counts[:, nonzero] / mass[nonzero]
    zero_columns = tuple(int(j) for j in np.flatnonzero(~nonzero))
    return IncomingMatrix(values=values, column_mass=mass, zero_columns=zero_columns)


def validate_column_stochastic(values: np.ndarray, zero_columns: tuple[int, ...] = ()) -> None:
    """Assert that every non-flagged column sums to 1 within tolerance."""
    sums = values.sum(axis=0)
    for j, s in enumerate(sums):
        if j in zero_columns:
            if s != 0.0:
                raise ValueError(f"flagged column {j} is not all-zero")
        elif abs(s - 1.0) > COLUMN_SUM_TOL:
            raise ValueError(f"column {j} sums to {s!r}")
    if ((values < 0) | (values > 1)).any():
        raise ValueError("entries must lie in [0, 1]")


def joint_distribution(tc: TransitionCounts, alpha: float = 0.5) -> JointDistribution:
    """(counts + alpha) / (total + alpha * K^2), flattened row-major."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if tc.total_transitions == 0 and alpha == 0:
        raise DegenerateDistribution("no transitions and no smoothing")
    return joint_from_flat_counts(tc.flat(), alpha)


def joint_from_flat_counts(flat_counts: np.ndarray, alpha: float) -> JointDistribution:
    total = int(flat_counts.sum())
    if total == 0 and alpha == 0:
        raise DegenerateDistribution("no transitions and no smoothing")
    probs = (flat_counts + alpha) / (total + alpha * flat_counts.shape[0])
    return JointDistribution(probs=probs, smoothing_alpha=alpha)


def corpus_joint(c: Corpus, alpha: float = 0.5) -> JointDistribution:
    return joint_distribution(accumulate(extract_chains(c)), alpha=alpha)


def incoming_flat_distribution(tc: TransitionCounts, alpha: float = 0.5) -> JointDistribution:
    """Alternative flattening: smoothed column-conditional matrix, renormalized.

    Each column of the smoothed incoming matrix sums to 1; dividing the
    flattened matrix by K yields a proper distribution.  Offered behind the
    ``flatten`` flag for comparison with the joint form; orderings agree on
    fixtures, absolute values do not.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    mass = tc.counts.sum(axis=0).astype(np.float64)
    denom = mass + alpha * K
    if (denom == 0).any():
        raise DegenerateDistribution("zero-mass column with no smoothing")
    cond = (tc.counts + alpha) / denom
    return JointDistribution(probs=cond.reshape(-1) / K, smoothing_alpha=alpha)


def build_graph(tc: TransitionCounts, theta: int = 1) -> IntentGraph:
    """Keep the transitions observed at least theta times."""
    if theta < 1:
        raise ValueError("theta must be >= 1")
    edges = {
        (LABELS[i], LABELS[j])
        for i, j in zip(*np.nonzero(tc.counts >= theta))
    }
    return IntentGraph(edges=frozenset(edges), theta=theta)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def counts_to_json(tc: TransitionCounts) -> str:
    names = [lab.value for lab in LABELS]
    obj = {
        "labels": names,
        "counts": tc.counts.tolist(),
        "initial_counts": tc.initial_counts.tolist(),
        "total_transitions": tc.total_transitions,
        "num_chains": tc.num_chains,
    }
    return json.dumps(obj, ensure_ascii=False, indent=2)


def matrix_to_json(m: IncomingMatrix) -> str:
    obj = {
        "labels": [lab.value for lab in LABELS],
        "values": m.values.tolist(),
        "column_mass": m.column_mass.tolist(),
        "zero_columns": list(m.zero_columns),
    }
    return json.dumps(obj, ensure_ascii=False, indent=2)


def matrix_to_csv(m: IncomingMatrix) -> str:
    """Heatmap layout: rows are from-labels, columns are to-labels."""
    header = "from\\to," + ",".join(lab.value for lab in LABELS)
    lines = [header]
    for i, lab in enumerate(LABELS):
        cells = ",".join(f"{m.values[i, j]:.6f}" for j in range(K))
        lines.append(f"{lab.value},{cells}")
    return "\n".join(lines) + "\n"


def export_matrix(m: IncomingMatrix, json_path: str | Path, csv_path: str | Path) -> None:
    from .corpus import atomic_write_text

    atomic_write_text(json_path, matrix_to_json(m) + "\n")
    atomic_write_text(csv_path, matrix_to_csv(m))
