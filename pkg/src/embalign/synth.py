"""Seeded synthetic query/target sets with a controllable distribution gap.

Every optimizer and metric claim in this package is verified on instances
from this generator, so generation must be reproducible bit-for-bit from
the seed across implementations. It therefore uses the documented stream
from :mod:`embalign.rng` (identifier ``splitmix64-boxmuller-v1``) and a
fixed draw order:

1. one class center per class: a dim-vector of normal deviates, L2
   normalized (classes in index order);
2. the query-side shift direction(s): one unit vector for ``global``
   mode, or one per class (class order) for ``per_class`` - drawn even
   when the shift magnitude is zero, so the stream layout does not depend
   on it;
3. target rows, class by class, row by row:
   ``normalize(center + spread * normals(dim))``;
4. query rows, class by class, row by row:
   ``normalize(center + spread * normals(dim) + shift * direction)``.

Any vector whose pre-normalization norm falls below 1e-12 is redrawn from
the stream (normals only; the center/direction stays). All rows live on
the unit sphere, mimicking a feature-space domain gap rather than a norm
artifact.

The module also carries ``oracle_metrics``: a deliberately naive,
loop-by-loop reimplementation of the scoring/ranking/metric chain that
shares no computation with :mod:`embalign.metrics`. It exists purely as
an independent verification path for tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import ValidationError
from .io import LabeledSet
from .metrics import MetricsReport, QueryMetrics
from .rng import ALGORITHM_ID, SplitMix64

SHIFT_MODES = ("global", "per_class")

_REDRAW_FLOOR = 1e-12


@dataclass(frozen=True)
class GapSpec:
    """Parameters of one synthetic instance; defaults are the frozen
    reference instance used throughout the test suite."""

    seed: int = 7
    num_classes: int = 10
    dim: int = 32
    queries_per_class: int = 5
    targets_per_class: int = 40
    cluster_spread: float = 0.25
    shift_magnitude: float = 0.6
    shift_mode: str = "global"

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValidationError(f"seed must fit in 64 unsigned bits, got {self.seed}")
        if self.num_classes < 2:
            raise ValidationError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.dim < 2:
            raise ValidationError(f"dim must be >= 2, got {self.dim}")
        if self.queries_per_class < 1 or self.targets_per_class < 1:
            raise ValidationError("per-class counts must be >= 1")
        if self.cluster_spread <= 0:
            raise ValidationError(
                f"cluster_spread must be positive, got {self.cluster_spread}"
            )
        if self.shift_magnitude < 0:
            raise ValidationError(
                f"shift_magnitude must be non-negative, got {self.shift_magnitude}"
            )
        if self.shift_mode not in SHIFT_MODES:
            raise ValidationError(
                f"shift_mode must be one of {SHIFT_MODES}, got {self.shift_mode!r}"
            )

    def manifest_entries(self) -> dict[str, str]:
        entries = {"generator": ALGORITHM_ID}
        for f in fields(self):
            entries[f.name] = str(getattr(self, f.name))
        return entries


def _normalized(values: list[float]) -> list[float] | None:
    norm = math.sqrt(sum(v * v for v in values))
    if norm < _REDRAW_FLOOR:
        return None
    return [v / norm for v in values]


def _unit_draw(rng: SplitMix64, dim: int) -> list[float]:
    while True:
        unit = _normalized(rng.normal_vector(dim))
        if unit is not None:
            return unit


def _cluster_row(
    rng: SplitMix64, center: list[float], spread: float, offset: list[float]
) -> list[float]:
    while True:
        noise = rng.normal_vector(len(center))
        row = [c + spread * n + o for c, n, o in zip(center, noise, offset)]
        unit = _normalized(row)
        if unit is not None:
            return unit


def generate(spec: GapSpec) -> tuple[LabeledSet, LabeledSet]:
    """Produce (query set, target set) for the spec; see module docstring
    for the exact draw order."""
    rng = SplitMix64(spec.seed)
    labels = [f"class{c:03d}" for c in range(spec.num_classes)]

    centers = [_unit_draw(rng, spec.dim) for _ in range(spec.num_classes)]
    if spec.shift_mode == "global":
        shared = _unit_draw(rng, spec.dim)
        directions = [shared] * spec.num_classes
    else:
        directions = [_unit_draw(rng, spec.dim) for _ in range(spec.num_classes)]

    zero = [0.0] * spec.dim
    target_rows, target_labels = [], []
    for c in range(spec.num_classes):
        for _ in range(spec.targets_per_class):
            target_rows.append(
                _cluster_row(rng, centers[c], spec.cluster_spread, zero)
            )
            target_labels.append(labels[c])

    query_rows, query_labels = [], []
    for c in range(spec.num_classes):
        offset = [spec.shift_magnitude * u for u in directions[c]]
        for _ in range(spec.queries_per_class):
            query_rows.append(
                _cluster_row(rng, centers[c], spec.cluster_spread, offset)
            )
            query_labels.append(labels[c])

    queries = LabeledSet(np.asarray(query_rows, dtype=np.float32), query_labels)
    targets = LabeledSet(np.asarray(target_rows, dtype=np.float32), target_labels)
    return queries, targets


# ---------------------------------------------------------------------------
# Independent verification path (tests only): no numpy reductions, no code
# shared with embalign.metrics beyond the report container.
# ---------------------------------------------------------------------------


def _naive_rank(scores: list[float]) -> list[int]:
    return sorted(range(len(scores)), key=lambda j: (-scores[j], j))


def oracle_metrics(query: LabeledSet, target: LabeledSet) -> MetricsReport:
    """Definition-following reimplementation of evaluate(), loops only."""
    q_rows = [[float(v) for v in row] for row in query.embeddings]
    t_rows = [[float(v) for v in row] for row in target.embeddings]

    rankings = []
    for q in q_rows:
        scores = [sum(a * b for a, b in zip(q, t)) for t in t_rows]
        rankings.append(_naive_rank(scores))

    relevant = [
        {j for j, tl in enumerate(target.labels) if tl == ql} for ql in query.labels
    ]
    skipped = [i for i, rel in enumerate(relevant) if not rel]
    sizes = [len(rel) for rel in relevant]
    gtm = max(sizes)
    if gtm == 0:
        raise ValidationError("every query has an empty relevant set")

    per_query = []
    for i, (ranking, rel) in enumerate(zip(rankings, relevant)):
        ng = len(rel)
        if ng == 0:
            continue
        hits = 0
        ap = 0.0
        dcg = 0.0
        rank_sum = 0.0
        window = min(4 * ng, 2 * gtm)
        for position, idx in enumerate(ranking, start=1):
            if idx in rel:
                hits += 1
                ap += hits / position
                dcg += 1.0 / math.log2(position + 1)
                rank_sum += position if position <= window else 1.25 * window
        ap /= ng
        ideal = sum(1.0 / math.log2(k + 1) for k in range(1, ng + 1))
        avr = rank_sum / ng
        mrr = avr - 0.5 - ng / 2.0
        nmrr = mrr / (1.25 * window - 0.5 - 0.5 * ng)
        per_query.append(
            QueryMetrics(query_index=i, ap=ap, ndcg=dcg / ideal, nmrr=nmrr)
        )

    n = len(per_query)
    return MetricsReport(
        map=sum(m.ap for m in per_query) / n,
        ndcg=sum(m.ndcg for m in per_query) / n,
        anmrr=sum(m.nmrr for m in per_query) / n,
        per_query=per_query,
        skipped=skipped,
    )
