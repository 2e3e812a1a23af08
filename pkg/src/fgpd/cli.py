"""``fgpd`` command line: synth, extract, train, predict, evaluate, ablation, inspect."""
from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

from . import evaluation, pipeline, synth
from .config import load_config, write_default_config

log = logging.getLogger("fgpd")

EXIT_OK, EXIT_FAILURES, EXIT_ERROR = 0, 1, 2


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON config file; flags override its values")
    p.add_argument("--seed", type=int, help="RNG seed (GMM init, CV folds, synthetic data)")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for feature extraction")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fgpd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic real/fake corpus with manifests")
    _common(p)
    p.add_argument("--n-train", type=int, default=400)
    p.add_argument("--n-test", type=int, default=200)

    p = sub.add_parser("extract", help="per-image feature table")
    _common(p)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--bundle", type=Path, help="emit assembled features using this model's GMM")

    p = sub.add_parser("train", help="fit GMM + SVM and write model.json")
    _common(p)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--test-manifest", type=Path, help="only checked for path overlap with training")

    p = sub.add_parser("predict", help="score images with a trained bundle")
    _common(p)
    p.add_argument("--bundle", type=Path, required=True)
    p.add_argument("--manifest", type=Path, help="take image paths from a manifest")
    p.add_argument("paths", nargs="*", help="image files")

    p = sub.add_parser("evaluate", help="metrics and ROC on a labeled manifest")
    _common(p)
    p.add_argument("--bundle", type=Path, required=True)
    p.add_argument("--manifest", type=Path, required=True)

    p = sub.add_parser("ablation", help="train/test every feature subset")
    _common(p)
    p.add_argument("--train", type=Path, required=True)
    p.add_argument("--test", type=Path, required=True)

    p = sub.add_parser("inspect", help="averaged spectra, diagonal profiles and blob lists")
    _common(p)
    p.add_argument("--manifest", type=Path, required=True)

    p = sub.add_parser("config", help="write the default config file")
    p.add_argument("--out", type=Path, default=Path("fgpd-config.json"))
    return parser


def _config(args):
    return load_config(args.config, seed=args.seed)


def _failures_note(out: Path, failures) -> int:
    if not failures:
        return EXIT_OK
    with open(out / "failures.csv", "w", encoding="utf-8") as fh:
        fh.write("path,reason\n")
        for f in failures:
            fh.write(f"{f.path},{f.reason.replace(',', ';')}\n")
    print(f"{len(failures)} image(s) failed; see {out / 'failures.csv'}", file=sys.stderr)
    return EXIT_FAILURES


def cmd_synth(args) -> int:
    seed = args.seed if args.seed is not None else _config(args).seed
    manifests = synth.generate_corpus(args.out, args.n_train, args.n_test, seed)
    for split, path in manifests.items():
        print(f"{split}={path}")
    return EXIT_OK


def cmd_extract(args) -> int:
    manifest = pipeline.read_manifest(args.manifest)
    bundle = pipeline.load_bundle(args.bundle) if args.bundle else None
    config = bundle.config if bundle else _config(args)
    feats, failures = pipeline.extract_raw(manifest.paths, config, args.jobs)
    labels = {s.path: s.label for s in manifest.samples}
    pipeline.write_feature_table(args.out / "features.csv", feats, [labels[f.path] for f in feats], bundle)
    print(f"rows={len(feats)}")
    return _failures_note(args.out, failures)


def cmd_train(args) -> int:
    config = _config(args)
    manifest = pipeline.read_manifest(args.manifest)
    if args.test_manifest:
        msg = pipeline.overlap_warning(pipeline.read_manifest(args.test_manifest).paths, manifest.paths)
        if msg:
            warnings.warn(msg, UserWarning)
    bundle, failures = pipeline.train_pipeline(manifest, config, args.jobs)
    pipeline.save_bundle(bundle, args.out / "model.json")
    s = bundle.summary
    print(evaluation.format_report({k: s[k] for k in ("n_real", "n_fake", "n_failed", "feature_dim",
                                                      "cv_accuracy", "C", "gamma", "n_support_vectors")}),
          end="")
    print(f"bundle={args.out / 'model.json'}")
    return _failures_note(args.out, failures)


def cmd_predict(args) -> int:
    bundle = pipeline.load_bundle(args.bundle)
    paths = list(args.paths)
    if args.manifest:
        paths += pipeline.read_manifest(args.manifest).paths
    if not paths:
        raise ValueError("no image paths given")
    preds = pipeline.predict_paths(bundle, paths, args.jobs)
    pipeline.write_predictions_csv(args.out / "predictions.csv", preds)
    for p in preds:
        if p.error is None:
            print(f"{p.path},{pipeline.LABEL_NAMES[p.label]},{p.score!r}")
        else:
            print(f"{p.path},error,{p.error}", file=sys.stderr)
    return EXIT_FAILURES if any(p.error for p in preds) else EXIT_OK


def cmd_evaluate(args) -> int:
    bundle = pipeline.load_bundle(args.bundle)
    result = pipeline.evaluate_dataset(bundle, pipeline.read_manifest(args.manifest), args.jobs)
    text = "".join(f"warning={w}\n" for w in result.warnings) + evaluation.format_report(result.report)
    (args.out / "metrics.txt").write_text(text, encoding="utf-8")
    evaluation.write_roc_csv(args.out / "roc.csv", result.roc)
    print(text, end="")
    return _failures_note(args.out, result.failures)


def cmd_ablation(args) -> int:
    config = _config(args)
    rows, notes = pipeline.ablation(pipeline.read_manifest(args.train), pipeline.read_manifest(args.test),
                                    config, args.jobs)
    pipeline.write_ablation_csv(args.out / "ablation.csv", rows)
    table = pipeline.format_ablation(rows)
    (args.out / "ablation.txt").write_text("".join(f"warning: {n}\n" for n in notes) + table,
                                           encoding="utf-8")
    print(table, end="")
    return EXIT_OK


def cmd_inspect(args) -> int:
    averaged = pipeline.inspect(pipeline.read_manifest(args.manifest), _config(args), args.out)
    for name in averaged:
        print(f"{name}={args.out / f'avg_spectrum_{name}.csv'}")
    return EXIT_OK


def cmd_config(args) -> int:
    write_default_config(args.out)
    print(args.out)
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "extract": cmd_extract,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "ablation": cmd_ablation,
    "inspect": cmd_inspect,
    "config": cmd_config,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    if hasattr(args, "out") and args.command != "config":
        args.out.mkdir(parents=True, exist_ok=True)
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"fgpd {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
