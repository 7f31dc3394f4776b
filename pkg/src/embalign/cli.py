"""Command-line pipeline driver.

Subcommands: fuse, align, eval, synth, pipeline, inspect. Every
hyperparameter surfaces as a flag; flags override values from an optional
flat key=value config file, which in turn override the built-in defaults
(the published operating point).

Exit codes: 0 success, 2 validation, 3 I/O, 4 numeric degeneracy. On
failure stderr carries a single line of the form
``<code>-error: <human text>``.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import fusion as _fusion
from . import io as _io
from . import metrics as _metrics
from . import synth as _synth
from .align import (
    PROJECTIONS,
    UPDATE_RULES,
    AlignmentConfig,
    align,
)
from .errors import (
    DegenerateDescriptorError,
    DegenerateRowError,
    EvaluationError,
    ValidationError,
)

_BOOL_STRINGS = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def _parse_bool(text: str) -> bool:
    try:
        return _BOOL_STRINGS[text.strip().lower()]
    except KeyError:
        raise ValidationError(f"expected a boolean, got {text!r}") from None


def _load_config(path) -> dict[str, str]:
    if path is None:
        return {}
    return _io.read_manifest(path)


def _resolve(args, config, key, default, convert):
    """Flag > config file > built-in default."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return convert(config[key])
    return default


def _alignment_config(args, config) -> AlignmentConfig:
    base = AlignmentConfig()
    return AlignmentConfig(
        alpha=_resolve(args, config, "alpha", base.alpha, float),
        tau_t=_resolve(args, config, "tau_t", base.tau_t, float),
        tau_i=_resolve(args, config, "tau_i", base.tau_i, float),
        eta0=_resolve(args, config, "eta0", base.eta0, float),
        iterations=_resolve(args, config, "iterations", base.iterations, int),
        update_rule=_resolve(args, config, "update_rule", base.update_rule, str),
        projection=_resolve(args, config, "projection", base.projection, str),
        refresh_pseudo_labels=_resolve(
            args, config, "refresh_pseudo_labels", base.refresh_pseudo_labels, _parse_bool
        ),
    )


def _fusion_config(args, config) -> _fusion.FusionConfig:
    base = _fusion.FusionConfig()
    # the flag is --lambda (stored as args.lam); the config-file key is the
    # spelled-out symbol
    lam = getattr(args, "lam", None)
    if lam is None:
        lam = float(config["lambda"]) if "lambda" in config else base.lam
    return _fusion.FusionConfig(
        lam=lam,
        scheme=_resolve(args, config, "fusion_scheme", base.scheme, str),
        activation=_resolve(args, config, "activation", base.activation, str),
        pre_normalize=_resolve(args, config, "pre_normalize", base.pre_normalize, _parse_bool),
        post_normalize=_resolve(args, config, "post_normalize", base.post_normalize, _parse_bool),
    )


def _gap_spec(args, config) -> _synth.GapSpec:
    base = _synth.GapSpec()
    return _synth.GapSpec(
        seed=_resolve(args, config, "seed", base.seed, int),
        num_classes=_resolve(args, config, "num_classes", base.num_classes, int),
        dim=_resolve(args, config, "dim", base.dim, int),
        queries_per_class=_resolve(
            args, config, "queries_per_class", base.queries_per_class, int
        ),
        targets_per_class=_resolve(
            args, config, "targets_per_class", base.targets_per_class, int
        ),
        cluster_spread=_resolve(args, config, "cluster_spread", base.cluster_spread, float),
        shift_magnitude=_resolve(
            args, config, "shift_magnitude", base.shift_magnitude, float
        ),
        shift_mode=_resolve(args, config, "shift_mode", base.shift_mode, str),
    )


# ---------------------------------------------------------------------------
# subcommand implementations
# ---------------------------------------------------------------------------


def _cmd_inspect(args) -> None:
    matrix = _io.read_matrix(args.path)
    rows, dim = matrix.shape
    print(f"{args.path}: rows={rows} dim={dim} bytes={_io.HEADER_SIZE + 4 * rows * dim}")


def _cmd_synth(args) -> None:
    config = _load_config(args.config)
    spec = _gap_spec(args, config)
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    queries, targets = _synth.generate(spec)
    queries.save(outdir / "query.emb", outdir / "query.labels")
    targets.save(outdir / "target.emb", outdir / "target.labels")
    _io.write_manifest(spec.manifest_entries(), outdir / "manifest.txt")
    print(
        f"wrote {queries.rows} queries and {targets.rows} targets "
        f"(dim={spec.dim}) to {outdir}"
    )


def _load_view_blocks(args) -> list[_fusion.ViewFeatureBlock]:
    paths = args.views
    if len(paths) == 1 and args.views_per_object is not None:
        stacked = _io.read_matrix(paths[0])
        per = args.views_per_object
        if per < 1 or stacked.shape[0] % per != 0:
            raise ValidationError(
                f"{stacked.shape[0]} stacked view rows are not divisible by "
                f"views-per-object {per}"
            )
        count = stacked.shape[0] // per
        return [
            _fusion.ViewFeatureBlock(f"object{i:06d}", stacked[i * per : (i + 1) * per])
            for i in range(count)
        ]
    blocks = []
    for path in paths:
        blocks.append(_fusion.ViewFeatureBlock(Path(path).stem, _io.read_matrix(path)))
    return blocks


def _cmd_fuse(args) -> None:
    config = _load_config(args.config)
    cfg = _fusion_config(args, config)
    blocks = _load_view_blocks(args)
    text = _io.read_matrix(args.text) if args.text is not None else None
    descriptors = _fusion.build_descriptor_set(blocks, text, cfg)
    _io.write_matrix(descriptors, args.output)
    manifest = {
        "text": "absent" if text is None else "present",
        "lambda": str(cfg.lam),
        "fusion_scheme": cfg.scheme,
        "activation": cfg.activation,
        "pre_normalize": str(cfg.pre_normalize).lower(),
        "post_normalize": str(cfg.post_normalize).lower(),
        "object_order": ",".join(b.object_id for b in blocks),
        "created": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    if len({b.view_count for b in blocks}) == 1:
        manifest["views_per_object"] = str(blocks[0].view_count)
    _io.write_manifest(manifest, str(args.output) + ".manifest")
    print(f"wrote {descriptors.shape[0]} x {descriptors.shape[1]} descriptors to {args.output}")


def _run_alignment(Q, X, cfg, log_path) -> np.ndarray:
    lines = ["iter,eta,grad_norm,objective"]

    def observer(iteration, eta, grad_norm, objective):
        lines.append(f"{iteration},{eta!r},{grad_norm!r},{objective!r}")

    q_bar = align(Q, X, cfg, progress=observer)
    Path(log_path).write_text("\n".join(lines) + "\n")
    return q_bar


def _cmd_align(args) -> None:
    config = _load_config(args.config)
    cfg = _alignment_config(args, config)
    Q = _io.read_matrix(args.query)
    X = _io.read_matrix(args.target)
    log_path = args.log if args.log is not None else str(args.output) + ".log.csv"
    q_bar = _run_alignment(Q, X, cfg, log_path)
    _io.write_matrix(q_bar.astype(np.float32), args.output)
    print(
        f"aligned {Q.shape[0]} queries against {X.shape[0]} targets "
        f"over {cfg.iterations} iterations -> {args.output}"
    )


def _print_aggregates(report: _metrics.MetricsReport) -> None:
    print(
        f"mAP {report.map * 100:.2f} NDCG {report.ndcg * 100:.2f} "
        f"ANMRR {report.anmrr * 100:.2f}"
    )


def _cmd_eval(args) -> None:
    Q = _io.read_matrix(args.query)
    X = _io.read_matrix(args.target)
    query_labels = _io.read_labels(args.query_labels, Q.shape[0])
    target_labels = _io.read_labels(args.target_labels, X.shape[0])
    report = _metrics.evaluate(Q, X, query_labels, target_labels)
    curve = _metrics.pr_curve(
        _metrics.rank(_metrics.score_matrix(Q, X)),
        _metrics.relevant_sets_from_labels(query_labels, target_labels),
    )
    Path(args.metrics_json).write_text(_metrics.report_to_json(report))
    Path(args.pr_csv).write_text(_metrics.pr_curve_to_csv(curve))
    _print_aggregates(report)


def _cmd_pipeline(args) -> None:
    config = _load_config(args.config)
    outdir = Path(
        args.output_dir if args.output_dir is not None else config.get("output_dir", "pipeline-out")
    )
    outdir.mkdir(parents=True, exist_ok=True)

    if "query" in config:
        for key in ("query_labels", "target", "target_labels"):
            if key not in config:
                raise ValidationError(f"config provides 'query' but not {key!r}")
        queries = _io.LabeledSet.load(config["query"], config["query_labels"])
        targets = _io.LabeledSet.load(config["target"], config["target_labels"])
    else:
        spec = _gap_spec(args, config)
        queries, targets = _synth.generate(spec)
        _io.write_manifest(spec.manifest_entries(), outdir / "manifest.txt")
    queries.save(outdir / "query.emb", outdir / "query.labels")
    targets.save(outdir / "target.emb", outdir / "target.labels")

    before = _metrics.evaluate(
        queries.embeddings, targets.embeddings, queries.labels, targets.labels
    )

    cfg = _alignment_config(args, config)
    if args.no_align:
        q_bar = queries.embeddings.astype(np.float64)
        (outdir / "align_log.csv").write_text("iter,eta,grad_norm,objective\n")
    else:
        q_bar = _run_alignment(
            queries.embeddings, targets.embeddings, cfg, outdir / "align_log.csv"
        )
    _io.write_matrix(q_bar.astype(np.float32), outdir / "aligned.emb")

    after = _metrics.evaluate(q_bar, targets.embeddings, queries.labels, targets.labels)

    relevant = _metrics.relevant_sets_from_labels(queries.labels, targets.labels)
    for name, matrix, report in (
        ("before", queries.embeddings, before),
        ("after", q_bar, after),
    ):
        rankings = _metrics.rank(_metrics.score_matrix(matrix, targets.embeddings))
        curve = _metrics.pr_curve(rankings, relevant)
        (outdir / f"metrics_{name}.json").write_text(_metrics.report_to_json(report))
        (outdir / f"pr_{name}.csv").write_text(_metrics.pr_curve_to_csv(curve))

    print(f"{'stage':<8} {'mAP':>8} {'NDCG':>8} {'ANMRR':>8}")
    for name, report in (("before", before), ("after", after)):
        print(
            f"{name:<8} {report.map * 100:>8.2f} {report.ndcg * 100:>8.2f} "
            f"{report.anmrr * 100:>8.2f}"
        )
    print(f"mAP delta: {(after.map - before.map) * 100:+.2f}")


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_config_flag(parser) -> None:
    parser.add_argument(
        "--config", default=None, metavar="FILE",
        help="flat key=value config file; flags override its values",
    )


def _add_alignment_flags(parser) -> None:
    parser.add_argument("--alpha", type=float, default=None,
                        help="pseudo-label confidence threshold (default: 0.6)")
    parser.add_argument("--tau-t", dest="tau_t", type=float, default=None,
                        help="temperature of the fixed distribution (default: 0.03)")
    parser.add_argument("--tau-i", dest="tau_i", type=float, default=None,
                        help="temperature of the learnable distribution (default: 30)")
    parser.add_argument("--eta0", type=float, default=None,
                        help="initial learning rate (default: 10)")
    parser.add_argument("--iterations", type=int, default=None,
                        help="number of update steps (default: 2000)")
    parser.add_argument("--update-rule", dest="update_rule",
                        choices=UPDATE_RULES, default=None,
                        help="update direction (default: linearized)")
    parser.add_argument("--projection", choices=PROJECTIONS, default=None,
                        help="feasible set after each step (default: unit_sphere)")
    parser.add_argument("--refresh-pseudo-labels", dest="refresh_pseudo_labels",
                        action=argparse.BooleanOptionalAction, default=None,
                        help="recompute pseudo-labels every iteration (default: false)")


def _add_fusion_flags(parser) -> None:
    parser.add_argument("--lambda", dest="lam", type=float, default=None,
                        help="text weight in [0, 1] (default: 0.2)")
    parser.add_argument("--fusion-scheme", dest="fusion_scheme",
                        choices=_fusion.SCHEMES, default=None,
                        help="how text joins the visual vector (default: add)")
    parser.add_argument("--activation", choices=_fusion.ACTIVATIONS, default=None,
                        help="post-fusion squashing (default: tanh)")
    parser.add_argument("--pre-normalize", dest="pre_normalize",
                        action=argparse.BooleanOptionalAction, default=None,
                        help="L2-normalize inputs before fusing (default: true)")
    parser.add_argument("--post-normalize", dest="post_normalize",
                        action=argparse.BooleanOptionalAction, default=None,
                        help="L2-normalize the fused descriptor (default: true)")


def _add_gap_flags(parser) -> None:
    parser.add_argument("--seed", type=int, default=None,
                        help="generator seed (default: 7)")
    parser.add_argument("--num-classes", dest="num_classes", type=int, default=None,
                        help="number of categories (default: 10)")
    parser.add_argument("--dim", type=int, default=None,
                        help="embedding dimension (default: 32)")
    parser.add_argument("--queries-per-class", dest="queries_per_class", type=int,
                        default=None, help="query rows per category (default: 5)")
    parser.add_argument("--targets-per-class", dest="targets_per_class", type=int,
                        default=None, help="target rows per category (default: 40)")
    parser.add_argument("--cluster-spread", dest="cluster_spread", type=float,
                        default=None, help="within-class std dev (default: 0.25)")
    parser.add_argument("--shift-magnitude", dest="shift_magnitude", type=float,
                        default=None, help="query-side offset norm (default: 0.6)")
    parser.add_argument("--shift-mode", dest="shift_mode", choices=_synth.SHIFT_MODES,
                        default=None, help="offset direction sharing (default: global)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embalign",
        description="Distribution alignment pipeline for embedding retrieval.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inspect", help="print the header of an embedding file")
    p.add_argument("path")
    p.set_defaults(handler=_cmd_inspect)

    p = sub.add_parser("synth", help="generate a synthetic query/target instance")
    _add_config_flag(p)
    _add_gap_flags(p)
    p.add_argument("--output-dir", dest="output_dir", required=True)
    p.set_defaults(handler=_cmd_synth)

    p = sub.add_parser("fuse", help="build per-object descriptors from view features")
    _add_config_flag(p)
    _add_fusion_flags(p)
    p.add_argument("--views", nargs="+", required=True, metavar="EMB",
                   help="one stacked file (with --views-per-object) or one file per object")
    p.add_argument("--views-per-object", dest="views_per_object", type=int, default=None,
                   help="view rows per object when --views is a single stacked file")
    p.add_argument("--text", default=None, metavar="EMB",
                   help="optional text features, one row per object")
    p.add_argument("--output", required=True, metavar="EMB")
    p.set_defaults(handler=_cmd_fuse)

    p = sub.add_parser("align", help="refine query embeddings toward the target set")
    _add_config_flag(p)
    _add_alignment_flags(p)
    p.add_argument("--query", required=True, metavar="EMB")
    p.add_argument("--target", required=True, metavar="EMB")
    p.add_argument("--output", required=True, metavar="EMB")
    p.add_argument("--log", default=None, metavar="CSV",
                   help="per-iteration log (default: <output>.log.csv)")
    p.set_defaults(handler=_cmd_align)

    p = sub.add_parser("eval", help="score retrieval quality against labels")
    p.add_argument("--query", required=True, metavar="EMB")
    p.add_argument("--target", required=True, metavar="EMB")
    p.add_argument("--query-labels", dest="query_labels", required=True)
    p.add_argument("--target-labels", dest="target_labels", required=True)
    p.add_argument("--metrics-json", dest="metrics_json", required=True)
    p.add_argument("--pr-csv", dest="pr_csv", required=True)
    p.set_defaults(handler=_cmd_eval)

    p = sub.add_parser(
        "pipeline",
        help="synth-or-load, align, and evaluate before/after in one run",
    )
    _add_config_flag(p)
    _add_alignment_flags(p)
    _add_gap_flags(p)
    p.add_argument("--output-dir", dest="output_dir", default=None,
                   help="artifact directory (default: pipeline-out)")
    p.add_argument("--no-align", dest="no_align", action="store_true",
                   help="skip refinement; after == before")
    p.set_defaults(handler=_cmd_pipeline)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.handler(args)
        return 0
    except (DegenerateDescriptorError, DegenerateRowError) as exc:
        _report_error("degeneracy", exc)
        return 4
    except (ValidationError, EvaluationError) as exc:
        _report_error("validation", exc)
        return 2
    except OSError as exc:
        _report_error("io", exc)
        return 3


def _report_error(code: str, exc: Exception) -> None:
    text = str(exc).replace("\n", "; ")
    print(f"{code}-error: {text}", file=sys.stderr)


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
