"""``autoeval`` command-line entry point.

Every subcommand reads the embedded defaults, then ``--config``, then
flag overrides, and writes its artifacts under ``--out-dir``. Later
subcommands reuse artifacts from earlier ones when they exist (classifier
checkpoint, meta-set manifest, predictor checkpoints), so
``synth``, ``fit``, ``eval`` can be run as separate steps or ``eval`` alone.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness as H
from .classifier import bundle_accuracy
from .config import ExperimentConfig, dump_config, load_config
from .errors import AutoEvalError, ConfigError, FormatError, NumericalError, ParameterError, ShapeError
from .formats import read_bundle, read_classifier, read_stats, sha256_file, write_classifier, write_stats
from .metaset import read_manifest, write_manifest
from .predictors import (
    assemble_representation,
    load_linear,
    load_neural,
    predict_linear,
    predict_neural,
    save_linear,
    save_neural,
)
from .stats import compute_stats

log = logging.getLogger("autoeval")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_THRESHOLD = 4

CLASSIFIER_FILE = "classifier.aecl"
ORI_STATS_FILE = "ori_stats.aest"
LINEAR_FILE = "linear.aelp"
NEURAL_FILE = "neural.aenp"
META_DIR = "meta"


class Run:
    """Config plus lazily built workbench for one invocation."""

    def __init__(self, args):
        overrides = {"rng_seed": args.seed, "jobs": args.jobs, "out_dir": args.out_dir}
        self.cfg: ExperimentConfig = load_config(args.config, **overrides)
        self.out = Path(self.cfg.out_dir)
        self.porcelain = args.porcelain
        self._bench = None

    @property
    def bench(self) -> H.Workbench:
        if self._bench is None:
            ckpt = self.out / CLASSIFIER_FILE
            clf = read_classifier(ckpt) if ckpt.exists() else None
            self._bench = H.Workbench(self.cfg, clf=clf)
            self.out.mkdir(parents=True, exist_ok=True)
            if clf is None:
                write_classifier(ckpt, self._bench.clf)
            write_stats(self.out / ORI_STATS_FILE, self._bench.ori_stats)
        return self._bench

    def meta(self):
        manifest = self.out / META_DIR / "manifest.jsonl"
        if manifest.exists():
            meta = read_manifest(manifest)
            if meta.provenance.get("classifier_sha256") == self.bench.clf_hash and len(meta) == self.cfg.meta_size \
                    and meta.provenance.get("rng_seed") == self.cfg.rng_seed:
                return meta
            log.info("existing manifest does not match the configuration; regenerating")
        meta = self.bench.meta_dataset()
        write_manifest(meta, self.out / META_DIR)
        return meta

    def predictors(self) -> H.Predictors:
        lin, nn = self.out / LINEAR_FILE, self.out / NEURAL_FILE
        if lin.exists() and nn.exists():
            return H.Predictors(load_linear(lin), load_neural(nn), self.bench.ori_stats)
        pred = H.fit_predictors(self.cfg, self.meta(), self.bench.ori_stats)
        save_linear(lin, pred.linear)
        save_neural(nn, pred.neural)
        return pred

    def emit(self, human: str, fields: list):
        if self.porcelain:
            print("\t".join(str(f) for f in fields))
        else:
            print(human)


def cmd_print_defaults(args) -> int:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    sys.stdout.write(dump_config(cfg))
    return EXIT_OK


def cmd_train_classifier(args) -> int:
    run = Run(args)
    ckpt = run.out / CLASSIFIER_FILE
    if ckpt.exists():
        ckpt.unlink()
    bench = run.bench
    run.emit(f"classifier written to {ckpt} (seed-set accuracy {bench.seed_accuracy:.4f})",
             ["classifier", ckpt, sha256_file(ckpt), f"{bench.seed_accuracy:.6f}"])
    return EXIT_OK


def cmd_synth(args) -> int:
    run = Run(args)
    meta = run.bench.meta_dataset()
    path = write_manifest(meta, run.out / META_DIR)
    run.emit(f"{len(meta)} sample sets written to {path} (hash {meta.manifest_hash()[:16]})",
             ["manifest", path, len(meta), meta.manifest_hash()])
    return EXIT_OK


def cmd_fit(args) -> int:
    run = Run(args)
    for name in (LINEAR_FILE, NEURAL_FILE):
        (run.out / name).unlink(missing_ok=True)
    pred = run.predictors()
    run.emit(f"linear: acc = {pred.linear.w0:.6f} + {pred.linear.w1:.6g} * fd\n"
             f"neural: best validation RMSE {pred.neural.best_val_rmse:.4f} after {pred.neural.epochs_run} epochs",
             ["fit", run.out / LINEAR_FILE, run.out / NEURAL_FILE, f"{pred.neural.best_val_rmse:.6f}"])
    return EXIT_OK


def cmd_predict(args) -> int:
    cfg = load_config(args.config, out_dir=args.out_dir)
    ckpt = Path(args.checkpoint) if args.checkpoint else Path(cfg.out_dir)
    ori = read_stats(ckpt / ORI_STATS_FILE)
    if args.method == "linear":
        model = load_linear(ckpt / LINEAR_FILE)
    else:
        model = load_neural(ckpt / NEURAL_FILE)
    for path in args.bundles:
        bundle = read_bundle(path)
        rep = assemble_representation(compute_stats(bundle.features), ori)
        est = predict_linear(model, rep.fd) if args.method == "linear" else predict_neural(model, rep)
        fields = [bundle.source, f"{est:.6f}"]
        human = f"{bundle.source}: estimated accuracy {est:.4f}"
        if args.with_truth and bundle.has_labels:
            truth = bundle_accuracy(bundle)
            fields += [f"{truth:.6f}", f"{abs(est - truth):.6f}"]
            human += f", true accuracy {truth:.4f}, absolute error {abs(est - truth):.4f}"
        if args.porcelain:
            print("\t".join(fields))
        else:
            print(human)
    return EXIT_OK


def _write_runtime(out: Path, stem: str, runtime: dict):
    (out / f"{stem}.runtime.json").write_text(json.dumps(runtime, indent=2, sort_keys=True) + "\n")


def cmd_eval(args) -> int:
    run = Run(args)
    cfg, out = run.cfg, run.out
    rho, points = H.run_correlation_study(cfg, run.bench)
    H.write_scatter(out / "scatter.txt", points)
    pred = run.predictors()
    tests = [read_bundle(p) for p in cfg.bundles] or None
    comparison = H.run_method_comparison(cfg, tests, run.bench, pred)
    comparison.meta["spearman_rho"] = rho
    comparison.write(out, "comparison")
    _write_runtime(out, "comparison", comparison.runtime)
    robust = H.run_robustness_suite(cfg, run.bench, pred)
    robust.write(out, "robustness")
    _write_runtime(out, "robustness", robust.runtime)

    if run.porcelain:
        print(f"rho\t{rho:.6f}")
        for name, report in (("comparison", comparison), ("robustness", robust)):
            for m, agg in report.aggregates().items():
                print(f"{name}\t{m}\t{agg['rmse']:.6f}\t{agg['mae']:.6f}")
    else:
        print(f"Spearman rho(fd, accuracy) = {rho:.4f} over {len(points)} sample sets")
        print(comparison.to_table())
        print(robust.to_table())
    bad = H.check_thresholds(cfg, rho=rho, comparison=comparison, robustness=robust,
                             seed_accuracy=run.bench.seed_accuracy)
    return _threshold_exit(bad)


def cmd_ablate(args) -> int:
    run = Run(args)
    table = H.run_size_ablation(run.cfg, run.bench)
    run.out.mkdir(parents=True, exist_ok=True)
    (run.out / "ablation.txt").write_text(table.to_text())
    (run.out / "ablation.jsonl").write_text(table.to_jsonl())
    if run.porcelain:
        for r in table.rows:
            print(f"{r['axis']}\t{r['value']}\t{r['linear_mae']:.6f}\t{r['neural_mae']:.6f}")
    else:
        print(table.to_text())
    return _threshold_exit(H.check_thresholds(run.cfg, ablation=table))


def _threshold_exit(bad: list) -> int:
    for msg in bad:
        log.error("threshold violated: %s", msg)
    return EXIT_THRESHOLD if bad else EXIT_OK


COMMANDS = {
    "synth": (cmd_synth, "generate the meta-dataset manifest and stats files"),
    "train-classifier": (cmd_train_classifier, "train and save the glyph classifier"),
    "fit": (cmd_fit, "fit the linear and neural accuracy regressors"),
    "predict": (cmd_predict, "estimate accuracy for feature bundles"),
    "eval": (cmd_eval, "correlation study, method comparison and robustness reports"),
    "ablate": (cmd_ablate, "meta-set size and sample-set size ablations"),
    "print-defaults": (cmd_print_defaults, "print the effective configuration as INI"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file layered over the defaults")
    common.add_argument("--seed", type=int, help="meta-dataset RNG seed override")
    common.add_argument("--jobs", type=int, help="worker processes; 0 = all cores, 1 = serial")
    common.add_argument("--porcelain", action="store_true", help="tab-separated machine output")
    common.add_argument("--out-dir", help="artifact directory")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="autoeval", description="Estimate classifier accuracy on unlabeled data.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, (fn, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.set_defaults(func=fn)
        if name == "predict":
            p.add_argument("bundles", nargs="+", help="feature bundle files")
            p.add_argument("--checkpoint", help="directory holding fitted predictors (default: out dir)")
            p.add_argument("--method", choices=("neural", "linear"), default="neural")
            p.add_argument("--with-truth", action="store_true", help="also print true accuracy and error")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FormatError, ParameterError, ShapeError, FileNotFoundError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except NumericalError as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    except AutoEvalError as exc:
        log.error("%s", exc)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
