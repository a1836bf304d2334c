"""NumPy implementations of the divergence and selection-gap kernels.

Import-time fallback for environments without the compiled extension; the
function surface is identical to ``_fast``.  Counts stay integer until the
smoothing step, so both backends see bit-identical inputs to the float math.
"""

from __future__ import annotations

import numpy as np

METRIC_KL = 0
METRIC_JS = 1


def kl_div(p: np.ndarray, q: np.ndarray) -> float:
    """Sum of p*ln(p/q) over cells with p > 0; +inf on support mismatch."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    mask = p > 0.0
    pm = p[mask]
    qm = q[mask]
    if (qm <= 0.0).any():
        return float("inf")
    return float(np.sum(pm * np.log(pm / qm)))


def js_div(p: np.ndarray, q: np.ndarray) -> float:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    u = 0.5 * (p + q)
    return 0.5 * kl_div(p, u) + 0.5 * kl_div(q, u)


def _smooth_rows(rows: np.ndarray, alpha: float) -> np.ndarray:
    rows = rows.astype(np.float64)
    totals = rows.sum(axis=1, keepdims=True)
    denom = totals + alpha * rows.shape[1]
    with np.errstate(divide="ignore", invalid="ignore"):
        probs = (rows + alpha) / denom
    probs[np.squeeze(denom, axis=1) == 0.0] = np.nan
    return probs


def _kl_rows(p_rows: np.ndarray, q_rows: np.ndarray) -> np.ndarray:
    """Row-wise KL; zero p-cells contribute nothing, zero q under p gives inf."""
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.log(p_rows / q_rows)
        terms = np.where(p_rows > 0.0, p_rows * ratio, 0.0)
    return terms.sum(axis=1)


def _gap_rows(prob_rows: np.ndarray, ref: np.ndarray, metric: int) -> np.ndarray:
    if metric == METRIC_KL:
        gaps = _kl_rows(np.broadcast_to(ref, prob_rows.shape), prob_rows)
    elif metric == METRIC_JS:
        u = 0.5 * (prob_rows + ref)
        gaps = 0.5 * _kl_rows(prob_rows, u) + 0.5 * _kl_rows(
            np.broadcast_to(ref, prob_rows.shape), u
        )
    else:
        raise ValueError(f"unknown metric {metric}")
    return np.where(np.isnan(gaps), np.inf, gaps)


def leave_one_out_gaps(
    cand_counts: np.ndarray,
    base_counts: np.ndarray,
    ref_probs: np.ndarray,
    alpha: float,
    metric: int,
) -> np.ndarray:
    """Gap of (base - cand[i]) against the reference, for every candidate i.

    ``cand_counts`` is (m, K^2) int64, ``base_counts`` the current subset's
    summed counts.  This is the inner loop of greedy backward elimination.
    """
    rows = np.asarray(base_counts, dtype=np.int64)[None, :] - np.asarray(
        cand_counts, dtype=np.int64
    )
    return _gap_rows(_smooth_rows(rows, alpha), np.asarray(ref_probs), metric)


def subset_gaps(
    pool_counts: np.ndarray,
    subsets: np.ndarray,
    ref_probs: np.ndarray,
    alpha: float,
    metric: int,
    chunk: int = 512,
) -> np.ndarray:
    """Gap of each candidate subset (rows of index matrix) vs the reference.

    ``subsets`` is (T, k) int64 row indices into ``pool_counts``; the Monte
    Carlo search evaluates each sampled subset with one call.
    """
    pool_counts = np.asarray(pool_counts, dtype=np.int64)
    subsets = np.asarray(subsets, dtype=np.int64)
    ref = np.asarray(ref_probs, dtype=np.float64)
    out = np.empty(subsets.shape[0], dtype=np.float64)
    for start in range(0, subsets.shape[0], chunk):
        block = subsets[start : start + chunk]
        counts = pool_counts[block].sum(axis=1)
        out[start : start + block.shape[0]] = _gap_rows(
            _smooth_rows(counts, alpha), ref, metric
        )
    return out
