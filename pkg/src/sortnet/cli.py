"""Command line interface: ``sortnet {train,rank,eval,kfold,selftest}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import comparator as cmpmod
from .comparator import NumericFault
from .data import DataError, assemble_folds, normalize_groups, parse_letor, write_letor
from .incremental import (
    LabelOracle,
    NetConfig,
    ranked_ratings,
    run_sortnet,
    shuffle_stability,
    sort_groups,
    write_iteration_csv,
)
from .metrics import (
    REPORT_COLUMNS,
    RankQuality,
    format_report,
    metric_report,
    write_report_csv,
)
from .selftest import run_all
from .training import TrainConfig, write_history_csv

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC, EXIT_SELFTEST = 0, 1, 2, 3, 4

logger = logging.getLogger("sortnet")


class UsageError(Exception):
    pass


def _add_common(p, *, training=False, model=False, data=()):
    for flag in data:
        p.add_argument(f"--{flag}", metavar="FILE", help=f"LETOR {flag} file")
    if model:
        p.add_argument("--model", metavar="FILE", help="model file")
        p.add_argument("--oracle", action="store_true",
                       help="rank with the ground-truth label oracle instead of a model (debug)")
    p.add_argument("--out", metavar="DIR", default="sortnet-out", help="output directory")
    p.add_argument("--no-normalize", dest="normalize", action="store_false",
                   help="skip per-query feature normalisation")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-v", "--verbose", action="store_true")
    if training:
        p.add_argument("--hidden", type=int, default=10, help="hidden unit pairs H")
        p.add_argument("--activation", choices=cmpmod.ACTIVATIONS, default="logistic")
        p.add_argument("--max-iter", type=int, default=20)
        p.add_argument("--rank-quality", default="map", help="map | p@K | ndcg@K")
        p.add_argument("--epochs", type=int, default=50)
        p.add_argument("--lr", type=float, default=0.1)
        p.add_argument("--batch-size", type=int, default=1)
        p.add_argument("--cold-start", action="store_true",
                       help="retrain each round from a fresh random network")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sortnet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run incremental SortNet training")
    _add_common(p, training=True, data=("train", "valid"))
    p.add_argument("--model", metavar="FILE", help="model output path (default OUT/model.txt)")
    p.add_argument("--dump-normalized", action="store_true",
                   help="also write the normalised train/valid data to OUT")

    p = sub.add_parser("rank", help="rank documents with a trained model")
    _add_common(p, model=True, data=("test",))
    p.add_argument("--shuffles", type=int, default=0,
                   help="re-rank under N input shuffles and report positional differences")

    p = sub.add_parser("eval", help="rank a labelled set and report P@n, NDCG@n, MAP")
    _add_common(p, model=True, data=("test",))

    p = sub.add_parser("kfold", help="5-fold cross-validation over one LETOR file")
    _add_common(p, training=True, data=("data",))
    p.add_argument("--train", dest="data_alias", metavar="FILE", help=argparse.SUPPRESS)
    p.add_argument("--fold", type=int, default=None, help="run only this fold (0-4)")
    p.add_argument("--fold-seed", type=int, default=None,
                   help="shuffle queries before round-robin fold assignment (default: file order)")

    p = sub.add_parser("selftest", help="run the built-in correctness suites")
    p.add_argument("--out", metavar="DIR", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--corrupt-gradient", action="store_true", help=argparse.SUPPRESS)
    return parser


def _echo_config(args, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    cfg = {k: v for k, v in sorted(vars(args).items()) if k != "verbose"}
    (out / "config.json").write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")


def _load(path, what, normalize=True):
    if not path:
        raise UsageError(f"--{what} is required")
    groups = parse_letor(path)
    return normalize_groups(groups) if normalize else groups


def _train(args, T, V, out: Path, model_path: Path):
    quality = RankQuality(args.rank_quality)
    result = run_sortnet(
        T, V,
        rank_quality=quality,
        max_iter=args.max_iter,
        net_cfg=NetConfig(args.hidden, args.activation, args.seed),
        train_cfg=TrainConfig(epochs=args.epochs, learning_rate=args.lr, seed=args.seed,
                              batch_size=args.batch_size),
        warm_start=not args.cold_start,
    )
    model_path.parent.mkdir(parents=True, exist_ok=True)
    cmpmod.save(result.best, model_path)
    write_iteration_csv(result.log, out / "iterations.csv")
    for k, history in enumerate(result.histories, start=1):
        write_history_csv(history, out / f"history_iter{k:02d}.csv")
    logger.info("best validation %s = %.4f after %d iteration(s)%s", quality, result.best_score,
                len(result.log), " (converged)" if result.converged else "")
    return result


def cmd_train(args) -> int:
    out = Path(args.out)
    _echo_config(args, out)
    T = _load(args.train, "train", args.normalize)
    V = _load(args.valid, "valid", args.normalize)
    if args.dump_normalized:
        for name, groups in (("train", T), ("valid", V)):
            with open(out / f"{name}.normalized.txt", "w") as fh:
                write_letor(groups, fh)
    model_path = Path(args.model) if args.model else out / "model.txt"
    _train(args, T, V, out, model_path)
    print(f"model written to {model_path}")
    return EXIT_OK


def _comparator(args, d):
    if args.oracle:
        return LabelOracle()
    if not args.model:
        raise UsageError("--model (or --oracle) is required")
    net = cmpmod.load(args.model)
    if net.d != d:
        raise DataError(f"model expects {net.d} features, data has {d}")
    return net


def _check_width(groups):
    widths = {len(doc.features) for g in groups for doc in g.documents}
    if len(widths) != 1:
        raise DataError(f"inconsistent feature counts: {sorted(widths)}")
    return widths.pop()


def cmd_rank(args) -> int:
    out = Path(args.out)
    _echo_config(args, out)
    groups = _load(args.test, "test", args.normalize)
    comp = _comparator(args, _check_width(groups))
    results, _ = sort_groups(comp, groups)
    with open(out / "ranking.txt", "w") as fh:
        fh.write("qid\tposition\tdoc_id\n")
        for res in results:
            for pos, doc_id in enumerate(res.order, start=1):
                fh.write(f"{res.query_id}\t{pos}\t{doc_id}\n")
    if args.shuffles > 0:
        reports = [shuffle_stability(comp, g, args.shuffles, args.seed) for g in groups]
        (out / "stability.json").write_text(json.dumps(reports, indent=2) + "\n")
        worst = max(r["max_positional_difference"] for r in reports)
        print(f"shuffle stability: max positional difference {worst} over {args.shuffles} shuffles")
    print(f"ranking written to {out / 'ranking.txt'}")
    return EXIT_OK


def _evaluate(comp, groups):
    results, _ = sort_groups(comp, groups)
    rankings = {g.query_id: ranked_ratings(g, r) for g, r in zip(groups, results)}
    return metric_report(rankings)


def cmd_eval(args) -> int:
    out = Path(args.out)
    _echo_config(args, out)
    groups = _load(args.test, "test", args.normalize)
    comp = _comparator(args, _check_width(groups))
    rows, aggregate = _evaluate(comp, groups)
    write_report_csv(rows, aggregate, out / "metrics.csv")
    text = format_report(aggregate, "test")
    (out / "metrics.txt").write_text(text)
    print(text, end="")
    return EXIT_OK


def cmd_kfold(args) -> int:
    out = Path(args.out)
    _echo_config(args, out)
    groups = _load(args.data or args.data_alias, "data", args.normalize)
    folds = range(5) if args.fold is None else [args.fold]
    fold_aggregates = {}
    for f in folds:
        train, valid, test = assemble_folds(groups, f, seed=args.fold_seed)
        fold_dir = out / f"fold{f}"
        fold_dir.mkdir(parents=True, exist_ok=True)
        logger.info("fold %d: %d train, %d valid, %d test queries", f, len(train), len(valid), len(test))
        result = _train(args, train, valid, fold_dir, fold_dir / "model.txt")
        rows, aggregate = _evaluate(result.best, test)
        write_report_csv(rows, aggregate, fold_dir / "metrics.csv")
        (fold_dir / "metrics.txt").write_text(format_report(aggregate, f"fold{f}"))
        fold_aggregates[f"fold{f}"] = aggregate
    pooled = {
        c: float(np.nanmean([agg[c] for agg in fold_aggregates.values()])) for c in REPORT_COLUMNS
    }
    write_report_csv(fold_aggregates, pooled, out / "pooled.csv")
    text = format_report(pooled, "pooled")
    (out / "pooled.txt").write_text(text)
    print(text, end="")
    return EXIT_OK


def cmd_selftest(args) -> int:
    results = run_all(corrupt_gradient=args.corrupt_gradient)
    lines = [f"{'PASS' if r.passed else 'FAIL'}  {r.name:<14} {r.detail}" for r in results]
    n_pass = sum(r.passed for r in results)
    lines.append(f"{n_pass}/{len(results)} suites passed")
    text = "\n".join(lines) + "\n"
    print(text, end="")
    if args.out:
        out = Path(args.out)
        _echo_config(args, out)
        (out / "selftest.txt").write_text(text)
    return EXIT_OK if n_pass == len(results) else EXIT_SELFTEST


COMMANDS = {
    "train": cmd_train,
    "rank": cmd_rank,
    "eval": cmd_eval,
    "kfold": cmd_kfold,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"sortnet {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"sortnet {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericFault as exc:
        print(f"sortnet {args.command}: numeric fault: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"sortnet {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
