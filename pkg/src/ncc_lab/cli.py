"""Command-line pipeline: generate, train, grid-search, evaluate, score.

One root ``--seed`` reproduces any run; every random stream is derived
from it by hashing a component name (see :mod:`ncc_lab.seeding`). Flags
can also come from a ``--config`` file of ``key = value`` lines with
``#`` comments; explicit flags override file values, and unknown keys
are rejected. All outputs land under ``--out`` as CSV (``.`` decimal
separator, LF line endings) or checkpoint text files.

Exit codes: 0 success, 2 usage error, 3 I/O error, 4 validation failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from ncc_lab import bench, scores, synthgen
from ncc_lab import ncc as ncc_mod
from ncc_lab.seeding import derive_rng
from ncc_lab.synthgen import DegenerateSignal, GenerationFailed, GeneratorConfig

log = logging.getLogger("ncc_lab")

EXIT_USAGE = 2
EXIT_IO = 3
EXIT_VALIDATION = 4


class CliValidationError(ValueError):
    """Bad inputs detected after argument parsing."""


def _parse_points(text: str):
    """'1000' -> 1000, '100:500' -> (100, 500)."""
    if ":" in text:
        lo, hi = text.split(":", 1)
        return (int(lo), int(hi))
    return int(text)


def _read_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise CliValidationError(
                        f"{path}:{lineno}: expected 'key = value', got {raw.rstrip()!r}")
                key, value = line.split("=", 1)
                values[key.strip().replace("-", "_")] = value.strip()
    except OSError as exc:
        raise FileNotFoundError(f"cannot read config file {path}: {exc}") from exc
    return values


_CONFIG_PARSERS = {
    "seed": int, "workers": int, "count": int, "iterations": int, "n": int,
    "hidden": int, "layers": int, "validation_size": int, "max_points": int,
    "classes": int, "features": int, "images": int, "anticausal": int,
    "causal": int, "dropout": float, "lr": float,
    "points": _parse_points, "out": str, "pairs": str, "model": str,
    "bundles": str, "logodds": str, "q": str,
    "independent": lambda v: v.lower() in ("1", "true", "yes"),
    "skip_validation": lambda v: v.lower() in ("1", "true", "yes"),
}


def _apply_config(args: argparse.Namespace, defaults: dict) -> None:
    """defaults < config file < explicit flags."""
    file_values: dict[str, str] = {}
    if args.config:
        file_values = _read_config_file(args.config)
    unknown = set(file_values) - set(defaults)
    if unknown:
        raise CliValidationError(
            f"unknown config keys: {', '.join(sorted(unknown))}")
    for key, default in defaults.items():
        if getattr(args, key, None) is not None:
            continue  # explicit flag wins
        if key in file_values:
            setattr(args, key, _CONFIG_PARSERS[key](file_values[key]))
        else:
            setattr(args, key, default)


def _generator_config(args) -> GeneratorConfig:
    return GeneratorConfig(points=args.points)


def _train_config(args) -> ncc_mod.TrainConfig:
    return ncc_mod.TrainConfig(
        iterations=args.iterations, minibatch_n=args.n, hidden=args.hidden,
        layers=args.layers, dropout_rate=args.dropout, learning_rate=args.lr,
        with_independent=bool(args.independent),
        validation_size=args.validation_size, seed=args.seed,
        generator=_generator_config(args))


def _out_dir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _write_history(path: str, history: np.ndarray) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("iteration,loss\n")
        for i, loss in enumerate(history):
            fh.write(f"{i},{loss:.17g}\n")


# -- subcommands ------------------------------------------------------------------


def _cmd_gen(args) -> int:
    out = _out_dir(args)
    rng = derive_rng(args.seed, "gen")
    batch = synthgen.make_training_minibatch(
        _generator_config(args), args.count, bool(args.independent), rng)
    synthgen.write_minibatch(out, batch)
    log.info("wrote %d samples to %s", len(batch), out)
    print(f"wrote {len(batch)} samples and manifest.csv under {out}")
    return 0


def _cmd_train(args) -> int:
    out = _out_dir(args)
    cfg = _train_config(args)
    log.info("training: %s", cfg)

    def progress(it, loss):
        if (it + 1) % 500 == 0:
            log.info("iteration %d loss %.4f", it + 1, loss)

    model, history = ncc_mod.train(cfg, progress=progress)
    ckpt = os.path.join(out, "checkpoint.ckpt")
    ncc_mod.save_model(ckpt, model, extra_header={
        "seed": str(cfg.seed), "with_independent": str(cfg.with_independent)})
    _write_history(os.path.join(out, "history.csv"), history)
    print(f"checkpoint: {ckpt}")
    if not args.skip_validation:
        val = ncc_mod.make_validation_set(cfg.generator, cfg.validation_size,
                                          derive_rng(cfg.seed, "validation"))
        acc = ncc_mod.validate(model, val)
        print(f"validation accuracy on {len(val)} fresh samples: {acc:.4f}")
    return 0


def _cmd_grid(args) -> int:
    out = _out_dir(args)
    cfg = _train_config(args)
    grid_dir = os.path.join(out, "grid")

    def progress(result):
        log.info("grid point done: %s", result)

    best_model, report = ncc_mod.grid_search(cfg, workers=args.workers,
                                             work_dir=grid_dir, progress=progress)
    report_path = os.path.join(out, "grid_report.csv")
    with open(report_path, "w", newline="\n") as fh:
        fh.write("dropout,layers,units,val_accuracy\n")
        for row in report:
            fh.write(f"{row['dropout']:g},{row['layers']},{row['units']},"
                     f"{row['val_accuracy']:.17g}\n")
    best_path = os.path.join(out, "best_model.ckpt")
    ncc_mod.save_model(best_path, best_model, extra_header={"seed": str(cfg.seed)})
    best = max(report, key=lambda r: r["val_accuracy"])
    print(f"grid report: {report_path}")
    print(f"best model ({best['val_accuracy']:.4f} val accuracy): {best_path}")
    return 0


def _cmd_eval_tuebingen(args) -> int:
    out = _out_dir(args)
    model = ncc_mod.load_model(args.model)
    pairs = bench.load_tuebingen(args.pairs)
    report = bench.evaluate_tuebingen(model, pairs, max_points=args.max_points,
                                      seed=args.seed)
    path = os.path.join(out, "tuebingen_report.csv")
    bench.write_tuebingen_report(path, report)
    print(f"pairs evaluated: {len(report.results)} "
          f"(excluded: {report.excluded_nonscalar} non-scalar, "
          f"{report.excluded_degenerate} degenerate)")
    print(f"weighted accuracy:   {report.weighted_accuracy:.4f}")
    print(f"unweighted accuracy: {report.unweighted_accuracy:.4f}")
    print(f"report: {path}")
    return 0


def _load_bundles(args):
    bundles = scores.load_bundle_set(args.bundles)
    if not bundles:
        raise CliValidationError(f"no class_<k> directories under {args.bundles}")
    return bundles


def _cmd_score(args) -> int:
    out = _out_dir(args)
    model = ncc_mod.load_model(args.model)
    for bundle in _load_bundles(args):
        table = scores.compute_scores(model, bundle)
        path = os.path.join(out, f"scores_class_{bundle.class_id}.csv")
        scores.write_scores_csv(path, table)
        dead = int(table.dead.sum())
        print(f"class {bundle.class_id}: {bundle.n_features} features "
              f"({dead} dead) -> {path}")
    return 0


def _cmd_report(args) -> int:
    out = _out_dir(args)
    model = ncc_mod.load_model(args.model)
    bundles = _load_bundles(args)
    qs = tuple(float(q) for q in args.q.split(","))
    tables = [scores.compute_scores(model, b) for b in bundles]
    hypo = scores.hypothesis_report(tables, qs=qs)
    hypo_path = os.path.join(out, "hypothesis_report.csv")
    scores.write_hypothesis_csv(hypo_path, hypo)
    for q, (supporting, total) in hypo.support_counts.items():
        print(f"q={q:g}: {supporting}/{total} classes support "
              "object/anticausal alignment")
    logodds_path = args.logodds or os.path.join(
        args.bundles, f"class_{bundles[0].class_id}", "logodds.csv")
    matrix = scores.read_matrix_csv(logodds_path)
    relations = scores.pairwise_object_relations(model, matrix)
    rel_path = os.path.join(out, "pairwise_relations.csv")
    scores.write_pairwise_csv(rel_path, relations)
    print(f"hypothesis report: {hypo_path}")
    print(f"pairwise relations: {rel_path}")
    return 0


def _cmd_oracle(args) -> int:
    out = _out_dir(args)
    cfg = scores.OracleConfig(n_classes=args.classes, n_features=args.features,
                              n_images=args.images, n_anticausal=args.anticausal,
                              n_causal=args.causal)
    bundles, truth = scores.synth_feature_oracle(cfg, derive_rng(args.seed, "oracle"))
    scores.write_bundle_set(out, bundles, ground_truth=truth)
    print(f"wrote {len(bundles)} oracle bundles and ground_truth.csv under {out}")
    return 0


# -- argument parsing ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ncc-lab",
        description="Cause-effect direction classification and feature scoring.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, help="root seed (default 0)")
        p.add_argument("--out", help="output directory (default .)")
        p.add_argument("--config", help="key = value config file; flags override")
        p.add_argument("--workers", type=int, help="parallel workers (default 1)")

    p = sub.add_parser("gen", help="dump a labeled synthetic minibatch as CSV")
    common(p)
    p.add_argument("--count", type=int, help="scatterplots to generate (default 16)")
    p.add_argument("--points", type=_parse_points,
                   help="points per scatterplot, N or LO:HI (default 1000)")
    p.add_argument("--independent", action="store_true", default=None,
                   help="also emit permutation-decoupled samples labeled 1/2")
    p.set_defaults(func=_cmd_gen, defaults={
        "seed": 0, "out": ".", "workers": 1, "count": 16, "points": 1000,
        "independent": False})

    p = sub.add_parser("train", help="train one model, emit checkpoint + history")
    common(p)
    p.add_argument("--iterations", type=int, help="training iterations (default 10000)")
    p.add_argument("--n", type=int, help="scatterplots per minibatch (default 16)")
    p.add_argument("--points", type=_parse_points, help="points per scatterplot")
    p.add_argument("--hidden", type=int, help="hidden width (default 100)")
    p.add_argument("--layers", type=int, help="embedding/classifier depth (default 2)")
    p.add_argument("--dropout", type=float, help="dropout rate (default 0.25)")
    p.add_argument("--lr", type=float, help="RMSProp learning rate (default 1e-3)")
    p.add_argument("--independent", action="store_true", default=None,
                   help="augment minibatches with label-1/2 permuted samples")
    p.add_argument("--validation-size", type=int, dest="validation_size",
                   help="held-out synthetic samples (default 10000)")
    p.add_argument("--skip-validation", action="store_true", dest="skip_validation",
                   default=None, help="skip the post-training validation pass")
    p.set_defaults(func=_cmd_train, defaults={
        "seed": 0, "out": ".", "workers": 1, "iterations": 10000, "n": 16,
        "points": 1000, "hidden": 100, "layers": 2, "dropout": 0.25, "lr": 1e-3,
        "independent": False, "validation_size": 10000, "skip_validation": False})

    p = sub.add_parser("grid", help="18-point hyperparameter grid search")
    common(p)
    p.add_argument("--iterations", type=int, help="iterations per grid point")
    p.add_argument("--n", type=int, help="scatterplots per minibatch")
    p.add_argument("--points", type=_parse_points, help="points per scatterplot")
    p.add_argument("--independent", action="store_true", default=None)
    p.add_argument("--validation-size", type=int, dest="validation_size")
    p.set_defaults(func=_cmd_grid, defaults={
        "seed": 0, "out": ".", "workers": 1, "iterations": 10000, "n": 16,
        "points": 1000, "hidden": 100, "layers": 2, "dropout": 0.25, "lr": 1e-3,
        "independent": False, "validation_size": 10000})

    p = sub.add_parser("eval-tuebingen", help="score the Tuebingen pair collection")
    common(p)
    p.add_argument("--pairs", help="directory with pairNNNN.txt and pairmeta.txt")
    p.add_argument("--model", help="trained model checkpoint")
    p.add_argument("--max-points", type=int, dest="max_points",
                   help="subsample cap per pair (default 5000)")
    p.set_defaults(func=_cmd_eval_tuebingen, defaults={
        "seed": 0, "out": ".", "workers": 1, "pairs": None, "model": None,
        "max_points": 5000})

    p = sub.add_parser("score", help="per-feature scores for bundle directories")
    common(p)
    p.add_argument("--bundles", help="bundle-set directory (class_<k> subdirs)")
    p.add_argument("--model", help="trained model checkpoint")
    p.set_defaults(func=_cmd_score, defaults={
        "seed": 0, "out": ".", "workers": 1, "bundles": None, "model": None})

    p = sub.add_parser("report", help="hypothesis report and pairwise relations")
    common(p)
    p.add_argument("--bundles", help="bundle-set directory")
    p.add_argument("--model", help="trained model checkpoint")
    p.add_argument("--q", help="comma-separated top fractions (default 0.01,0.20)")
    p.add_argument("--logodds", help="log-odds CSV for pairwise relations")
    p.set_defaults(func=_cmd_report, defaults={
        "seed": 0, "out": ".", "workers": 1, "bundles": None, "model": None,
        "q": "0.01,0.20", "logodds": None})

    p = sub.add_parser("oracle", help="emit planted-ground-truth oracle bundles")
    common(p)
    p.add_argument("--classes", type=int, help="number of classes (default 5)")
    p.add_argument("--features", type=int, help="features per class (default 512)")
    p.add_argument("--images", type=int, help="images per class (default 1000)")
    p.add_argument("--anticausal", type=int, help="planted anticausal features")
    p.add_argument("--causal", type=int, help="planted causal features")
    p.set_defaults(func=_cmd_oracle, defaults={
        "seed": 0, "out": ".", "workers": 1, "classes": 5, "features": 512,
        "images": 1000, "anticausal": 20, "causal": 8})

    return parser


def _require(args, *names) -> None:
    for name in names:
        if getattr(args, name) is None:
            raise CliValidationError(f"--{name.replace('_', '-')} is required")


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("NCC_LAB_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(args, args.defaults)
        if args.func is _cmd_eval_tuebingen:
            _require(args, "pairs", "model")
        elif args.func in (_cmd_score, _cmd_report):
            _require(args, "bundles", "model")
        return args.func(args)
    except (FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (CliValidationError, DegenerateSignal, GenerationFailed,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
