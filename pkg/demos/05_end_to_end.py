#!/usr/bin/env python3
"""End-to-end study: how the recovery depends on the distribution gap.

Sweeps the query-side offset magnitude, running the full
generate -> evaluate -> align -> evaluate pipeline at each point.
"""
import numpy as np

from embalign import AlignmentConfig, GapSpec, align, evaluate, generate

SEEDS = (7, 8, 9)
SHIFTS = (0.0, 0.2, 0.4, 0.6, 0.8)

print(f"{'shift':>6} {'mAP before':>11} {'mAP after':>10} {'delta':>8}   (mean over {len(SEEDS)} seeds)")
print("-" * 48)

cfg = AlignmentConfig(iterations=800)
for shift in SHIFTS:
    befores, afters = [], []
    for seed in SEEDS:
        spec = GapSpec(seed=seed, num_classes=8, dim=24, queries_per_class=4,
                       targets_per_class=25, shift_magnitude=shift)
        queries, targets = generate(spec)
        befores.append(
            evaluate(queries.embeddings, targets.embeddings,
                     queries.labels, targets.labels).map
        )
        refined = align(queries.embeddings, targets.embeddings, cfg)
        afters.append(
            evaluate(refined, targets.embeddings,
                     queries.labels, targets.labels).map
        )
    b, a = np.mean(befores), np.mean(afters)
    print(f"{shift:>6.1f} {b * 100:>11.2f} {a * 100:>10.2f} {(a - b) * 100:>+8.2f}")

print()
print("The query-side offset degrades retrieval; the alignment loop recovers")
print("most of it, and never needs a label: pseudo-labels come from the")
print("target set's own similarity structure.")
