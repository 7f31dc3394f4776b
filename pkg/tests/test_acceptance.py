"""Acceptance suite: one test per criterion, each at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one pass line per
criterion. Every tolerance is pinned here; nothing is deferred.
"""

import math
import time

import numpy as np

from embalign import (
    AlignmentConfig,
    FormatError,
    GapSpec,
    TruncationError,
    ValidationError,
    align,
    anmrr,
    average_precision,
    compute_update,
    evaluate,
    generate,
    harden_pseudo_labels,
    kl_objective,
    ndcg,
    oracle_metrics,
    read_matrix,
    similarity_distribution,
    write_matrix,
)
from embalign.cli import main as cli_main
from tests.conftest import random_labeled_instance, unit_rows

REFERENCE_SEEDS = list(range(7, 17))  # seed 7 plus nine further seeds


def _passed(criterion: int, detail: str) -> None:
    print(f"[criterion {criterion:2d}] PASS - {detail}")


def _instance(seed: int, n: int, s: int, d: int):
    gen = np.random.default_rng(seed)
    X = gen.normal(size=(n, d))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    Q = gen.normal(size=(s, d))
    Q /= np.linalg.norm(Q, axis=1, keepdims=True)
    reference = gen.normal(size=(s, d))
    reference /= np.linalg.norm(reference, axis=1, keepdims=True)
    p_prime = harden_pseudo_labels(
        similarity_distribution(X, reference, 0.3), 0.6
    ).values
    return X, Q, p_prime


def test_criterion_1_exact_kl_gradient_matches_finite_differences():
    started = time.perf_counter()
    eps = 1e-4
    worst = 0.0
    for seed in range(20):
        X, Q, p_prime = _instance(seed, n=50, s=10, d=8)
        cfg = AlignmentConfig(tau_i=0.7, update_rule="exact_kl")
        analytic = compute_update(X, Q, p_prime, cfg) / cfg.tau_i
        for k in range(8):
            for j in range(10):
                plus, minus = Q.copy(), Q.copy()
                plus[j, k] += eps
                minus[j, k] -= eps
                fd = (
                    kl_objective(p_prime, similarity_distribution(X, plus, cfg.tau_i))
                    - kl_objective(
                        p_prime, similarity_distribution(X, minus, cfg.tau_i)
                    )
                ) / (2 * eps)
                rel = abs(analytic[k, j] - fd) / max(abs(fd), 1e-8)
                worst = max(worst, rel)
                assert rel <= 1e-4
    elapsed = time.perf_counter() - started
    assert elapsed < 5.0
    _passed(1, f"finite-difference check on 20 instances, worst rel err "
               f"{worst:.2e}, {elapsed:.2f}s")


def test_criterion_2_linearized_rule_matches_triple_loop():
    worst = 0.0
    for seed in range(20):
        X, Q, p_prime = _instance(seed, n=50, s=10, d=8)
        cfg = AlignmentConfig(tau_i=0.3, update_rule="linearized")
        got = compute_update(X, Q, p_prime, cfg)
        for k in range(8):
            for j in range(10):
                total = 0.0
                for i in range(50):
                    inner = sum(X[i, m] * Q[j, m] for m in range(8)) / cfg.tau_i
                    total += X[i, k] * (inner - p_prime[i, j])
                rel = abs(got[k, j] - total) / max(abs(total), 1e-12)
                worst = max(worst, rel)
                assert rel <= 1e-9
    _passed(2, f"raw-logit residual rule vs naive triple loop on 20 instances, "
               f"worst rel err {worst:.2e}")


def test_criterion_3_soft_label_fixed_point():
    gen = np.random.default_rng(3)
    Q = gen.normal(size=(10, 16))
    Q /= np.linalg.norm(Q, axis=1, keepdims=True)
    X = gen.normal(size=(60, 16))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    worst = 0.0
    for projection in ("none", "unit_sphere"):
        cfg = AlignmentConfig(
            alpha=1.0, tau_t=0.4, tau_i=0.4, update_rule="exact_kl",
            projection=projection, iterations=100,
        )
        deviation = float(np.max(np.abs(align(Q, X, cfg) - Q)))
        worst = max(worst, deviation)
        assert deviation <= 1e-9
    _passed(3, f"alpha=1, matched temperatures: max |q_bar - Q| = {worst:.2e} "
               f"after 100 iterations (both projections)")


def test_criterion_4_learning_rate_schedule_replay():
    mismatches = 0
    total_halvings = 0
    for seed in range(10):
        spec = GapSpec(seed=seed, num_classes=5, dim=12, queries_per_class=3,
                       targets_per_class=12)
        queries, targets = generate(spec)
        log = []
        align(
            queries.embeddings, targets.embeddings,
            AlignmentConfig(iterations=200),
            progress=lambda it, eta, g, obj: log.append((it, eta, g)),
        )
        halvings = 0
        prev = None
        for _, eta, grad_norm in log:
            if prev is not None and grad_norm > prev:
                halvings += 1
            if eta != 10.0 * 2.0 ** (-halvings):
                mismatches += 1
            prev = grad_norm
        total_halvings += halvings
    assert mismatches == 0
    _passed(4, f"eta == eta0 * 2^-k replayed over 10 runs x 200 iterations, "
               f"0 mismatches ({total_halvings} halvings seen)")


def test_criterion_5_pseudo_label_rule_on_random_rows():
    gen = np.random.default_rng(5)
    logits = gen.normal(size=(1000, 7)) * 2.5
    rows = np.exp(logits - logits.max(axis=1, keepdims=True))
    rows /= rows.sum(axis=1, keepdims=True)
    alpha = 0.6

    out = harden_pseudo_labels(rows, alpha)
    should_harden = rows.max(axis=1) > alpha
    assert np.array_equal(out.hardened, should_harden)
    for i in range(1000):
        if should_harden[i]:
            expected = np.zeros(7)
            expected[rows[i].argmax()] = 1.0
            assert np.array_equal(out.values[i], expected)
        else:
            assert np.array_equal(out.values[i], rows[i])

    all_hard = harden_pseudo_labels(rows, 0.0)
    assert all_hard.hardened.all()
    none_hard = harden_pseudo_labels(rows, 1.0)
    assert not none_hard.hardened.any()
    assert np.array_equal(none_hard.values, rows)
    _passed(5, f"1000 rows at alpha=0.6 ({int(should_harden.sum())} hardened, "
               f"rest bit-identical); alpha=0 hardens all, alpha=1 none")


def test_criterion_6_metric_oracles_and_worked_examples():
    gen = np.random.default_rng(6)
    for case in range(200):
        queries, targets = random_labeled_instance(
            gen,
            int(gen.integers(2, 11)),     # S <= 10
            int(gen.integers(4, 31)),     # N <= 30
            int(gen.integers(3, 17)),
            int(gen.integers(2, 6)),
        )
        lib = evaluate(queries.embeddings, targets.embeddings,
                       queries.labels, targets.labels)
        orc = oracle_metrics(queries, targets)
        assert abs(lib.map - orc.map) <= 1e-9
        assert abs(lib.ndcg - orc.ndcg) <= 1e-9
        assert abs(lib.anmrr - orc.anmrr) <= 1e-9

    # perfect retrieval is exact
    perfect_ranking = [list(range(6))]
    relevant = [{0, 1, 2}]
    assert average_precision(perfect_ranking[0], relevant[0]) == 1.0
    assert ndcg(perfect_ranking[0], relevant[0]) == 1.0
    assert anmrr(perfect_ranking, relevant) == 0.0

    # hand-evaluated worked examples
    ap = average_precision([0, 1, 2], {0, 2})
    assert ap == (1.0 + 2.0 / 3.0) / 2.0 and abs(ap - 5.0 / 6.0) < 1e-15
    assert anmrr([[0, 1, 2, 3, 4]], [{0, 2}]) == 1.0 / 7.0
    _passed(6, "mAP/NDCG/ANMRR match the naive oracle on 200 instances; "
               "perfect retrieval exact; AP=5/6 and NMRR=1/7 hold")


def test_criterion_7_distribution_gap_improvement():
    started = time.perf_counter()
    wins = 0
    deltas = []
    for seed in REFERENCE_SEEDS:
        queries, targets = generate(GapSpec(seed=seed))
        before = evaluate(queries.embeddings, targets.embeddings,
                          queries.labels, targets.labels).map
        refined = align(queries.embeddings, targets.embeddings, AlignmentConfig())
        after = evaluate(refined, targets.embeddings,
                         queries.labels, targets.labels).map
        deltas.append(after - before)
        wins += after > before
    elapsed = time.perf_counter() - started
    assert wins >= 9
    assert float(np.mean(deltas)) > 0.0
    assert elapsed < 60.0
    _passed(7, f"post-alignment mAP up on {wins}/10 seeds, mean delta "
               f"{np.mean(deltas):+.4f}, {elapsed:.1f}s")


def test_criterion_8_pipeline_determinism(tmp_path):
    config = tmp_path / "reference.cfg"
    config.write_text(
        "seed=7\nnum_classes=10\ndim=32\nqueries_per_class=5\n"
        "targets_per_class=40\ncluster_spread=0.25\nshift_magnitude=0.6\n"
        "shift_mode=global\n"
    )
    for name in ("run1", "run2"):
        code = cli_main(["pipeline", "--config", str(config),
                         "--output-dir", str(tmp_path / name)])
        assert code == 0
    compared = []
    for artifact in ("query.emb", "target.emb", "aligned.emb",
                     "metrics_before.json", "metrics_after.json"):
        a = (tmp_path / "run1" / artifact).read_bytes()
        b = (tmp_path / "run2" / artifact).read_bytes()
        assert a == b, f"{artifact} differs between runs"
        compared.append(artifact)
    # the default run also pins the log contract: 2000 data lines, eta
    # non-increasing
    log_lines = (tmp_path / "run1" / "align_log.csv").read_text().strip().split("\n")
    assert log_lines[0] == "iter,eta,grad_norm,objective"
    assert len(log_lines) == 2001
    etas = [float(line.split(",")[1]) for line in log_lines[1:]]
    assert all(late <= early for early, late in zip(etas, etas[1:]))
    _passed(8, f"two pipeline runs byte-identical on {', '.join(compared)}; "
               f"run log holds 2000 lines with non-increasing eta")


def test_criterion_9_format_roundtrip_and_error_classes(tmp_path):
    gen = np.random.default_rng(9)
    for case in range(100):
        rows = int(gen.integers(1, 20))
        dim = int(gen.integers(1, 20))
        matrix = (
            gen.normal(size=(rows, dim)) * 10.0 ** float(gen.integers(-6, 7))
        ).astype(np.float32)
        path = tmp_path / "m.emb"
        write_matrix(matrix, path)
        back = read_matrix(path)
        assert back.dtype == np.float32
        assert np.array_equal(back, matrix)

    import io as stdio
    import struct

    from embalign.io import MAGIC

    try:
        read_matrix(stdio.BytesIO(b"XXXXXXX\x01" + b"\x00" * 12))
        raise AssertionError("bad magic accepted")
    except FormatError:
        pass
    try:
        read_matrix(stdio.BytesIO(struct.pack("<8sII", MAGIC, 2, 2) + b"\x00" * 12))
        raise AssertionError("truncated payload accepted")
    except TruncationError as err:
        assert err.expected_bytes == 16 and err.actual_bytes == 12
    try:
        read_matrix(
            stdio.BytesIO(
                struct.pack("<8sII", MAGIC, 1, 1) + struct.pack("<f", float("nan"))
            )
        )
        raise AssertionError("NaN payload accepted")
    except ValidationError:
        pass
    _passed(9, "100 random matrices round-trip bit-exactly; malformed streams "
               "raise FormatError / TruncationError / ValidationError")
