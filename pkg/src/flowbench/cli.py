"""``flowbench`` command-line entry point."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from .detect import FAMILIES, make_detector
from .detect.serialize import load_model, save_model
from .eval import auc_from_labels
from .exceptions import FlowbenchError
from .pipeline import Manifest, cmd_evaluate, cmd_extract, cmd_features, cmd_synth, parse_tuning, report_failures
from .represent import Standardizer, read_feature_csv
from .capture import Label
from .synth import SCENARIOS


def _load_manifest(args) -> Manifest:
    manifest = Manifest.load(args.manifest)
    if args.seed is not None:
        manifest.seed = args.seed
    if args.tuning is not None:
        manifest.tuning = parse_tuning(args.tuning)
    return manifest


def _extract(args) -> int:
    for ds in cmd_extract(_load_manifest(args)):
        f = ds.flows
        print(f"{f.name}: {len(f.train)} train, {len(f.test)} test flows, d0={f.d0}, cap={f.max_duration:.6g}s")
    return 0


def _features(args) -> int:
    paths = cmd_features(_load_manifest(args))
    print(f"wrote {len(paths)} feature files")
    return 0


def _evaluate(args) -> int:
    manifest = _load_manifest(args)
    report = cmd_evaluate(manifest, jobs=args.jobs, figures=not args.no_figures)
    ok = len(report.cells) - len(report.failed)
    print(f"{ok}/{len(report.cells)} cells evaluated; results in {manifest.output_dir}")
    return report_failures(report)


def _synth(args) -> int:
    path = cmd_synth(args.scenario, args.seed, args.out, args.n_train, args.n_test)
    print(path)
    return 0


def _fit(args) -> int:
    X, _, _ = read_feature_csv(args.features)
    scaler = Standardizer().fit(X)
    model = make_detector(args.detector, args.hyper, args.seed).fit(scaler.transform(X))
    save_model(model, args.out, scaler)
    print(f"{args.detector} hyper={model.hyper_} -> {args.out}")
    return 0


def _score(args) -> int:
    model, std = load_model(args.model)
    X, _, labels = read_feature_csv(args.features)
    if std is not None:
        X = (X - std[0]) / std[1]
    scores = model.score_samples(X)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(("score", "label"))
        for s, lab in zip(scores, labels):
            w.writerow((repr(float(s)), lab.value))
    finally:
        if args.out:
            out.close()
    novel = np.array([lab is Label.NOVEL for lab in labels])
    if novel.any() and not novel.all():
        print(f"auc={auc_from_labels(scores, novel):.6f}", file=sys.stderr)
    return 0


def _hyper(text: str):
    value = float(text)
    return int(value) if value.is_integer() and "." not in text else value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flowbench", description="Flow-level novelty detection benchmark.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def manifest_cmd(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--manifest", required=True, type=Path)
        p.add_argument("--seed", type=int, help="overrides the manifest seed")
        p.add_argument("--tuning", choices=("opt", "default", "both"))
        p.add_argument("--jobs", type=int, default=1, help="parallel workers; results do not depend on it")
        p.set_defaults(func=func)
        return p

    manifest_cmd("extract", _extract, "assemble and truncate flows into the flow store")
    manifest_cmd("features", _features, "write raw feature CSVs per representation")
    manifest_cmd("evaluate", _evaluate, "run every cell and write reports").add_argument(
        "--no-figures", action="store_true")

    p = sub.add_parser("synth", help="write a synthetic scenario and a manifest for it")
    p.add_argument("scenario", choices=SCENARIOS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--n-train", type=int, default=800)
    p.add_argument("--n-test", type=int, default=200)
    p.set_defaults(func=_synth)

    p = sub.add_parser("fit", help="fit one detector on a feature CSV")
    p.add_argument("--features", type=Path, required=True)
    p.add_argument("--detector", choices=FAMILIES, required=True)
    p.add_argument("--hyper", type=_hyper, help="tuned hyperparameter (rule of thumb if omitted)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=_fit)

    p = sub.add_parser("score", help="score a feature CSV with a saved model")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--features", type=Path, required=True)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=_score)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except FlowbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
