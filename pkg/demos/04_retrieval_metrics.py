#!/usr/bin/env python3
"""The metric suite on hand-checkable examples.

Small rankings where every number can be verified on paper, then the
full evaluate() report and its serialized forms.
"""
import numpy as np

from embalign import (
    anmrr,
    average_precision,
    evaluate,
    ndcg,
    pr_curve,
    pr_curve_to_csv,
    rank,
    report_to_json,
)

print("=" * 70)
print("1. Average precision, by hand")
print("=" * 70)

ranking = [0, 1, 2]
print(f"ranking {ranking}, relevant {{0, 2}}")
print("hits at ranks 1 and 3 -> AP = (1/1 + 2/3) / 2 = 5/6 =",
      average_precision(ranking, {0, 2}))

print()
print("=" * 70)
print("2. NDCG discounts late hits logarithmically")
print("=" * 70)

for position in range(1, 5):
    ranking = list(range(1, position)) + [0] + list(range(position, 5))
    print(f"single relevant item at rank {position}: NDCG = "
          f"{ndcg(ranking, {0}):.5f}")

print()
print("=" * 70)
print("3. ANMRR charges misses beyond the rank window")
print("=" * 70)

print("NG=2, window K=4, relevant at ranks 1 and 3 -> NMRR =",
      anmrr([[0, 1, 2, 3, 4]], [{0, 2}]), "= 1/7")
print("relevant item buried below the window           -> NMRR =",
      anmrr([[1, 2, 3, 4, 0]], [{0}]))

print()
print("=" * 70)
print("4. A full evaluation report")
print("=" * 70)

rng = np.random.default_rng(4)
centers = rng.normal(size=(3, 10))
centers /= np.linalg.norm(centers, axis=1, keepdims=True)
targets = np.vstack([c + 0.25 * rng.normal(size=(6, 10)) for c in centers])
targets /= np.linalg.norm(targets, axis=1, keepdims=True)
queries = np.vstack([c + 0.25 * rng.normal(size=(2, 10)) for c in centers])
queries /= np.linalg.norm(queries, axis=1, keepdims=True)
q_labels = [f"c{i}" for i in range(3) for _ in range(2)]
t_labels = [f"c{i}" for i in range(3) for _ in range(6)]

report = evaluate(queries, targets, q_labels, t_labels)
print(report_to_json(report))

print("=" * 70)
print("5. Precision-recall curve, first and last rows of the CSV")
print("=" * 70)

rankings = rank(queries @ targets.T)
relevant = [set(j for j, t in enumerate(t_labels) if t == q) for q in q_labels]
csv = pr_curve_to_csv(pr_curve(rankings, relevant))
lines = csv.strip().split("\n")
print("\n".join(lines[:4]))
print("...")
print("\n".join(lines[-3:]))
