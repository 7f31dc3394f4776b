"""Retrieval scoring, ranking, and the standard 3DOR metric suite.

The score matrix is the plain inner product of refined queries against
targets. Rankings sort each row descending with ties broken by ascending
target index so every downstream number is deterministic.

Metric conventions (the benchmarks this mirrors do not restate them, so
they are pinned here):

* AP accumulates precision at each relevant item's rank, divided by the
  number of relevant items.
* NDCG uses binary relevance with gain 1/log2(rank+1) over the full
  ranking, normalized by the ideal ordering.
* NMRR follows the MPEG-7 formulation with per-query window
  K = min(4*NG, 2*GTM), where GTM is the largest relevant-set size over
  the evaluated queries; relevant items ranked beyond K are charged
  1.25*K. Lower is better; 0 is perfect.
* The PR curve is interpolated precision at 100 uniform recall levels
  (0.01 .. 1.00), macro-averaged over queries.

Queries with no relevant target are skipped (and reported), never scored
as zero.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import EvaluationError, ValidationError

PR_LEVELS = 100


@dataclass(frozen=True)
class QueryMetrics:
    query_index: int
    ap: float
    ndcg: float
    nmrr: float


@dataclass(frozen=True)
class MetricsReport:
    """Aggregate and per-query retrieval quality; aggregates are plain
    fractions in [0, 1] (the JSON serialization converts to percentages)."""

    map: float
    ndcg: float
    anmrr: float
    per_query: list[QueryMetrics]
    skipped: list[int]


@dataclass(frozen=True)
class PRCurve:
    recalls: np.ndarray    # the 100 levels, strictly increasing
    precisions: np.ndarray


def score_matrix(q_bar: np.ndarray, X: np.ndarray) -> np.ndarray:
    """S x N similarity scores: queries against targets, float64."""
    q = np.asarray(q_bar, dtype=np.float64)
    x = np.asarray(X, dtype=np.float64)
    if q.ndim != 2 or x.ndim != 2 or q.shape[1] != x.shape[1]:
        raise ValidationError(f"dim mismatch: queries {q.shape}, targets {x.shape}")
    return q @ x.T


def rank(scores: np.ndarray) -> np.ndarray:
    """Per-row permutation of target indices, best first, ties by index."""
    scores = np.asarray(scores)
    if scores.ndim != 2:
        raise ValidationError(f"score matrix must be 2-D, got {scores.shape}")
    return np.argsort(-scores, axis=1, kind="stable")


def average_precision(ranking: Sequence[int], relevant: set) -> float:
    if not relevant:
        raise ValidationError("average_precision needs a non-empty relevant set")
    hits = 0
    total = 0.0
    for k, idx in enumerate(ranking, start=1):
        if idx in relevant:
            hits += 1
            total += hits / k
    return total / len(relevant)


def ndcg(ranking: Sequence[int], relevant: set) -> float:
    if not relevant:
        raise ValidationError("ndcg needs a non-empty relevant set")
    dcg = 0.0
    for k, idx in enumerate(ranking, start=1):
        if idx in relevant:
            dcg += 1.0 / math.log2(k + 1)
    ideal = sum(1.0 / math.log2(k + 1) for k in range(1, len(relevant) + 1))
    return dcg / ideal


def _nmrr_per_query(
    rankings: Sequence[Sequence[int]], relevant_sets: Sequence[set]
) -> list[Optional[float]]:
    """MPEG-7 NMRR per query; None where the relevant set is empty."""
    sizes = [len(r) for r in relevant_sets]
    gtm = max(sizes, default=0)
    if gtm == 0:
        raise EvaluationError("every query has an empty relevant set")
    out: list[Optional[float]] = []
    for ranking, relevant in zip(rankings, relevant_sets):
        ng = len(relevant)
        if ng == 0:
            out.append(None)
            continue
        window = min(4 * ng, 2 * gtm)
        total = 0.0
        for position, idx in enumerate(ranking, start=1):
            if idx in relevant:
                total += position if position <= window else 1.25 * window
        avr = total / ng
        mrr = avr - 0.5 - ng / 2.0
        out.append(mrr / (1.25 * window - 0.5 - 0.5 * ng))
    return out


def anmrr(rankings: Sequence[Sequence[int]], relevant_sets: Sequence[set]) -> float:
    """Mean NMRR over queries with at least one relevant target."""
    values = [v for v in _nmrr_per_query(rankings, relevant_sets) if v is not None]
    return sum(values) / len(values)


def pr_curve(rankings: Sequence[Sequence[int]], relevant_sets: Sequence[set]) -> PRCurve:
    """Interpolated precision at 100 recall levels, macro-averaged."""
    levels = np.arange(1, PR_LEVELS + 1) / PR_LEVELS
    sums = np.zeros(PR_LEVELS)
    evaluated = 0
    for ranking, relevant in zip(rankings, relevant_sets):
        ng = len(relevant)
        if ng == 0:
            continue
        evaluated += 1
        # precision and recall at each relevant hit, then suffix-max for
        # the usual "max precision at recall >= level" interpolation
        precisions = []
        hits = 0
        for position, idx in enumerate(ranking, start=1):
            if idx in relevant:
                hits += 1
                precisions.append(hits / position)
        interp = np.maximum.accumulate(np.asarray(precisions)[::-1])[::-1]
        recalls = np.arange(1, ng + 1) / ng
        # smallest hit index whose recall covers each level
        first_hit = np.searchsorted(recalls, levels, side="left")
        sums += interp[first_hit]
    if evaluated == 0:
        raise EvaluationError("every query has an empty relevant set")
    return PRCurve(recalls=levels, precisions=sums / evaluated)


def relevant_sets_from_labels(
    query_labels: Sequence[str], target_labels: Sequence[str]
) -> list[set]:
    by_label: dict[str, set] = {}
    for j, label in enumerate(target_labels):
        by_label.setdefault(label, set()).add(j)
    return [by_label.get(label, set()) for label in query_labels]


def evaluate(
    q_bar: np.ndarray,
    X: np.ndarray,
    query_labels: Sequence[str],
    target_labels: Sequence[str],
) -> MetricsReport:
    """Score, rank, and compute all metrics with label-derived relevance."""
    q = np.asarray(q_bar)
    x = np.asarray(X)
    if len(query_labels) != q.shape[0]:
        raise ValidationError(
            f"{len(query_labels)} query labels for {q.shape[0]} query rows"
        )
    if len(target_labels) != x.shape[0]:
        raise ValidationError(
            f"{len(target_labels)} target labels for {x.shape[0]} target rows"
        )
    rankings = rank(score_matrix(q, x))
    relevant = relevant_sets_from_labels(query_labels, target_labels)
    skipped = [i for i, r in enumerate(relevant) if not r]
    nmrrs = _nmrr_per_query(rankings, relevant)

    per_query: list[QueryMetrics] = []
    for i, (ranking, rel) in enumerate(zip(rankings, relevant)):
        if not rel:
            continue
        per_query.append(
            QueryMetrics(
                query_index=i,
                ap=average_precision(ranking, rel),
                ndcg=ndcg(ranking, rel),
                nmrr=nmrrs[i],
            )
        )
    n = len(per_query)
    return MetricsReport(
        map=sum(m.ap for m in per_query) / n,
        ndcg=sum(m.ndcg for m in per_query) / n,
        anmrr=sum(m.nmrr for m in per_query) / n,
        per_query=per_query,
        skipped=skipped,
    )


def report_to_json(report: MetricsReport) -> str:
    """Serialize a report; aggregates become percentages with 4 decimals."""
    doc = {
        "map": round(report.map * 100.0, 4),
        "ndcg": round(report.ndcg * 100.0, 4),
        "anmrr": round(report.anmrr * 100.0, 4),
        "per_query": [
            {
                "query_index": m.query_index,
                "ap": m.ap,
                "ndcg": m.ndcg,
                "nmrr": m.nmrr,
            }
            for m in report.per_query
        ],
        "skipped": report.skipped,
    }
    return json.dumps(doc, indent=2) + "\n"


def pr_curve_to_csv(curve: PRCurve) -> str:
    lines = ["recall,precision"]
    for r, p in zip(curve.recalls, curve.precisions):
        lines.append(f"{float(r):.2f},{float(p)!r}")
    return "\n".join(lines) + "\n"
