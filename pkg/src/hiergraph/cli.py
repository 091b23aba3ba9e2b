"""Command-line entry point.

One executable with subcommands covering the full workflow: validate,
stats, tokenize, train, predict, eval, kappa, prune, export-dot, and
loss-check.  Exit codes: 0 success, 1 usage or IO error, 2 validation
failure, 3 check failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .corpus import (
    Dataset,
    dataset_kappa,
    label_statistics,
    load_dataset,
    save_dataset,
    tokenize,
)
from .errors import FileUnreadable, HierGraphError, MalformedRecord
from .evaluation import EVAL_MODES, evaluate_intersection
from .losses import (
    check_loss_gradients,
    conditional_hier_loss,
    unconditional_loss,
)
from .model_io import load_model, save_model
from .relations import predict_relations, train_relation_scorer
from .schema import (
    ReportGraph,
    parse_report,
    prune_to_radgraph1,
    to_dot,
    validate_graph,
)
from .tagger import TrainConfig, decode_entities, predict_tags, train_two_phase
from .taxonomy import (
    conditional_probability,
    leaf_distribution,
    load_taxonomy,
    propagate,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INVALID = 2
EXIT_CHECK = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Argument parser that reports usage problems via exit code 1."""

    def error(self, message):
        raise UsageError(message)


def _meta(taxonomy_hash: str | None = None) -> dict:
    meta = {"version": __version__}
    if taxonomy_hash is not None:
        meta["taxonomy_hash"] = taxonomy_hash
    return meta


def _write_json(doc: dict, path: str | None) -> None:
    text = json.dumps(doc, indent=1)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _split_subset(ds: Dataset, splits: str | None) -> Dataset:
    if not splits:
        return ds
    wanted = [s.strip() for s in splits.split(",") if s.strip()]
    return ds.subset(wanted)


# --- subcommands ------------------------------------------------------------


def _cmd_validate(args) -> int:
    try:
        with open(args.data, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise FileUnreadable(f"{args.data}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedRecord("<root>", f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedRecord("<root>", "annotation document is not an object")

    failed = False
    for doc_id, record in doc.items():
        if doc_id == "_meta":
            continue
        try:
            graph = parse_report(doc_id, record)
        except MalformedRecord as exc:
            print(f"{doc_id}\t[error] malformed_record: {exc.reason}")
            failed = True
            continue
        for v in validate_graph(graph):
            print(f"{doc_id}\t[{v.severity}] {v.rule} {v.subject}: {v.message}")
            if v.severity == "error" or args.strict:
                failed = True
    if failed:
        print("invalid: validation failed", file=sys.stderr)
        return EXIT_INVALID
    print("ok")
    return EXIT_OK


def _cmd_stats(args) -> int:
    ds = load_dataset(args.data)
    stats = label_statistics(ds)
    if args.json or args.output:
        doc = {"_meta": _meta()}
        doc.update(stats.to_json())
        _write_json(doc, args.output)
    else:
        sys.stdout.write(stats.to_text())
    return EXIT_OK


def _cmd_tokenize(args) -> int:
    try:
        with open(args.textfile, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise FileUnreadable(f"{args.textfile}: {exc}") from exc
    for token in tokenize(text):
        print(token)
    return EXIT_OK


def _cmd_train(args) -> int:
    tree = load_taxonomy(args.taxonomy)
    ds = load_dataset(args.data)
    subset = _split_subset(ds, args.splits or "train,validation")
    if not subset.reports:
        subset = ds

    cfg = TrainConfig(
        phase1_epochs=0 if args.flat else args.phase1_epochs,
        phase2_epochs=args.phase2_epochs,
        lr_phase1=args.lr_phase1,
        lr_phase2=args.lr_phase2,
        seed=args.seed,
        batch_size=args.batch_size,
        l2=args.l2,
    )

    metrics_path = f"{args.output}.metrics.jsonl"
    with open(metrics_path, "w", encoding="utf-8") as metrics:
        metrics.write(json.dumps({"_meta": _meta(tree.config_hash)}) + "\n")

        def on_epoch(record):
            metrics.write(json.dumps(record) + "\n")

        tagger = train_two_phase(subset, tree, cfg, on_epoch=on_epoch)
        try:
            scorer = train_relation_scorer(subset, cfg, cap=args.distance_cap)
        except HierGraphError:
            scorer = None

    save_model(args.output, tree, tagger, relations=scorer, train_config=cfg)
    print(f"model written to {args.output}")
    print(f"metrics written to {metrics_path}")
    return EXIT_OK


def _cmd_predict(args) -> int:
    model = load_model(args.model)
    ds = _split_subset(load_dataset(args.data), args.splits)
    predicted = []
    for report in ds.reports:
        tokens = list(report.tokens)
        tags = predict_tags(model.tagger, model.tree, tokens)
        entities = decode_entities(tags, tokens, single_token=args.single_token)
        relations = (
            predict_relations(model.relations, entities) if model.relations else []
        )
        predicted.append(
            ReportGraph(
                doc_id=report.doc_id,
                text=report.text,
                tokens=report.tokens,
                split=report.split,
                source=report.source,
                entities={e.id: e for e in entities},
                relations=tuple(relations),
            )
        )
    save_dataset(
        Dataset(predicted), args.output, meta=_meta(model.tree.config_hash)
    )
    print(f"predictions written to {args.output}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    gold = _split_subset(load_dataset(args.gold), args.splits)
    pred = _split_subset(load_dataset(args.pred), args.splits)
    common = set(gold.by_id()) & set(pred.by_id())
    if not common:
        print("invalid: no common doc ids to evaluate", file=sys.stderr)
        return EXIT_INVALID
    gold = Dataset([r for r in gold.reports if r.doc_id in common])
    pred = Dataset([r for r in pred.reports if r.doc_id in common])
    scores = evaluate_intersection(gold, pred, mode=args.mode, grouped=args.grouped)
    if args.json or args.output:
        doc = {"_meta": _meta()}
        doc.update(scores.to_json())
        _write_json(doc, args.output)
    else:
        sys.stdout.write(scores.to_text())
    return EXIT_OK


def _cmd_kappa(args) -> int:
    ds_a = load_dataset(args.ann_a)
    ds_b = load_dataset(args.ann_b)
    print(f"{dataset_kappa(ds_a, ds_b):.4f}")
    return EXIT_OK


def _cmd_prune(args) -> int:
    ds = load_dataset(args.data)
    pruned = Dataset([prune_to_radgraph1(r) for r in ds.reports])
    save_dataset(pruned, args.output, meta=_meta())
    print(f"pruned data written to {args.output}")
    return EXIT_OK


def _cmd_export_dot(args) -> int:
    ds = load_dataset(args.data)
    by_id = ds.by_id()
    if args.doc not in by_id:
        print(f"invalid: no report with doc id {args.doc!r}", file=sys.stderr)
        return EXIT_INVALID
    dot = to_dot(by_id[args.doc])
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(dot)
        print(f"dot graph written to {args.output}")
    else:
        sys.stdout.write(dot)
    return EXIT_OK


def _invariant_suite(tree, trials: int, seed: int) -> list[str]:
    """Probability and loss invariants on random logits; returns failures."""
    rng = np.random.default_rng(seed)
    failures = []
    for _ in range(trials):
        logits = rng.normal(0.0, 3.0, size=len(tree.leaves))
        dist = leaf_distribution(tree, logits)
        masses = propagate(tree, dist)
        if abs(masses["ROOT"] - 1.0) > 1e-9:
            failures.append("root mass != 1")
        for name, node in tree.nodes.items():
            if node.children:
                if masses[name] != sum(masses[c] for c in node.children):
                    failures.append(f"mass of {name} != sum of children")
                for c in node.children:
                    if masses[c] > masses[name] + 1e-15:
                        failures.append(f"child {c} above parent {name}")
        for i, leaf in enumerate(tree.leaves):
            chained = 1.0
            for name in tree.root_path(leaf)[1:]:
                chained *= conditional_probability(tree, masses, name)
            if abs(chained - dist[i]) > 1e-9:
                failures.append(f"chain rule off at {leaf}")
        gold = tree.leaves[int(rng.integers(len(tree.leaves)))]
        cond = conditional_hier_loss(tree, logits, gold)
        flat = unconditional_loss(tree, logits, gold)
        if cond.loss < flat.loss - 1e-9:
            failures.append("conditional loss below flat loss")
        if abs(sum(cond.per_depth.values()) - cond.loss) > 1e-9:
            failures.append("per-depth components do not sum to the loss")
        if cond.clamped or flat.clamped:
            failures.append("unexpected loss clamp")
        if failures:
            break
    return failures


def _cmd_loss_check(args) -> int:
    tree = load_taxonomy(args.taxonomy)
    errors = check_loss_gradients(tree, trials=args.trials, seed=args.seed)
    print(f"max gradient rel error (conditional): {errors['conditional']:.3e}")
    print(f"max gradient rel error (unconditional): {errors['unconditional']:.3e}")
    failures = _invariant_suite(tree, args.trials, args.seed)
    if max(errors.values()) >= 1e-4:
        failures.append("gradient error above 1e-4")
    if failures:
        for f in failures:
            print(f"check failed: {f}", file=sys.stderr)
        return EXIT_CHECK
    print(f"all checks passed ({args.trials} trials)")
    return EXIT_OK


# --- parser -----------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="hiergraph", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check an annotation file against the schema")
    p.add_argument("data")
    p.add_argument("--strict", action="store_true", help="fail on warnings too")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("stats", help="label statistics per split and source")
    p.add_argument("data")
    p.add_argument("--json", action="store_true")
    p.add_argument("-o", "--output")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("tokenize", help="print one token per line")
    p.add_argument("textfile")
    p.set_defaults(func=_cmd_tokenize)

    p = sub.add_parser("train", help="train the tagger and relation scorer")
    p.add_argument("data")
    p.add_argument("--taxonomy", default="radgraph2_depth3")
    p.add_argument("--flat", action="store_true", help="skip the tree-loss phase")
    p.add_argument("--phase1-epochs", type=int, default=20)
    p.add_argument("--phase2-epochs", type=int, default=10)
    p.add_argument("--lr-phase1", type=float, default=0.1)
    p.add_argument("--lr-phase2", type=float, default=0.02)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--l2", type=float, default=0.0)
    p.add_argument("--distance-cap", type=int, default=20)
    p.add_argument("--splits", help="comma-separated splits (default train,validation)")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="run a trained model over reports")
    p.add_argument("model")
    p.add_argument("data")
    p.add_argument("--splits")
    p.add_argument("--single-token", action="store_true")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("eval", help="strict scores of predictions against gold")
    p.add_argument("gold")
    p.add_argument("pred")
    p.add_argument("--mode", choices=EVAL_MODES, default="radgraph2")
    p.add_argument("--grouped", action="store_true")
    p.add_argument("--splits")
    p.add_argument("--json", action="store_true")
    p.add_argument("-o", "--output")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("kappa", help="token-level agreement between two annotations")
    p.add_argument("ann_a")
    p.add_argument("ann_b")
    p.set_defaults(func=_cmd_kappa)

    p = sub.add_parser("prune", help="project annotations onto the 4-label schema")
    p.add_argument("data")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_prune)

    p = sub.add_parser("export-dot", help="write one report graph as DOT")
    p.add_argument("data")
    p.add_argument("--doc", required=True)
    p.add_argument("-o", "--output")
    p.set_defaults(func=_cmd_export_dot)

    p = sub.add_parser("loss-check", help="gradient and invariant self-test")
    p.add_argument("--taxonomy", default="radgraph2_depth3")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_loss_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (FileUnreadable, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except HierGraphError as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_INVALID


def entry_point() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry_point()
