"""Experiment orchestration: correlation study, method comparison,
robustness to unseen transforms, and meta-set / sample-set size ablations.

All experiments share a :class:`Workbench`, which owns the classifier, seed
set, background corpus and a cache of generated sample-set records keyed by
``(stream, set_size, index)``. Because every record has its own RNG
stream, a meta set of size ``n`` is always the first ``n`` records of any
larger one, and results do not depend on the worker count.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import metaset as M
from .backgrounds import build_corpus, corpus_hash
from .classifier import TinyClassifier, accuracy, bundle_accuracy, extract_features, train_classifier
from .config import ExperimentConfig
from .errors import FormatError
from .formats import checkpoint_bytes, sha256_bytes
from .glyphs import render_seed
from .predictors import (
    LinearPredictor,
    NeuralPredictor,
    assemble_representation,
    fit_linear,
    fit_neural,
    predict_confidence,
    predict_linear,
    predict_neural_batch,
)
from .stats import DatasetStats, compute_stats, mae, rmse, spearman_rho

__all__ = [
    "Workbench",
    "Predictors",
    "PredictionReport",
    "AblationTable",
    "fit_predictors",
    "predict_bundles",
    "run_correlation_study",
    "run_method_comparison",
    "run_robustness_suite",
    "run_size_ablation",
    "check_thresholds",
    "write_scatter",
]

HELDOUT_STREAM_BASE = 10


class Workbench:
    """Shared, lazily built experiment state for one configuration."""

    def __init__(self, cfg: ExperimentConfig, clf: TinyClassifier | None = None, jobs: int | None = None):
        self.cfg = cfg
        self.jobs = cfg.jobs if jobs is None else jobs
        self.train_set, _ = render_seed(cfg.train_glyphs())
        self.seed, self.masks = render_seed(cfg.seed_glyphs())
        self.clf = clf if clf is not None else train_classifier(self.train_set, cfg.train_config(), cfg.clf_seed)
        self.ori_stats = compute_stats(extract_features(self.clf, self.train_set.images).features)
        self.backgrounds = build_corpus(cfg.background_dir, cfg.procedural, cfg.texture_count,
                                        cfg.texture_size, cfg.texture_seed)
        self.corpus_hash = corpus_hash(self.backgrounds)
        self.clf_hash = sha256_bytes(checkpoint_bytes(b"AECL", self.clf.params))
        self.seed_accuracy = accuracy(self.clf, self.seed)
        self._cache: dict = {}

    def provenance(self) -> dict:
        cfg = self.cfg
        return {
            "seed_config": {"n_classes": cfg.n_classes, "set_size": cfg.set_size, "raster": cfg.raster,
                            "max_shift": cfg.max_shift, "seed_rng": cfg.seed_rng},
            "rng_seed": cfg.rng_seed,
            "classifier_sha256": self.clf_hash,
            "corpus_sha256": self.corpus_hash,
            "recipe_mode": cfg.recipe_mode,
        }

    def context(self, stream: int, set_size: int | None = None, variant: str | None = None) -> M.SynthContext:
        n = self.cfg.set_size if set_size is None else set_size
        seed = self.seed if n == len(self.seed) else self.seed.subset(np.arange(n))
        masks = self.masks[:n]
        if variant is not None:
            fn, kwargs = M.sample_heldout_recipe, {"variant": variant}
        elif self.cfg.recipe_mode == "identity":
            fn, kwargs = M.identity_recipe, {}
        else:
            fn, kwargs = M.sample_recipe, {}
        return M.SynthContext(seed, masks, self.clf, self.ori_stats, self.backgrounds,
                              self.cfg.rng_seed, stream, fn, kwargs)

    def records(self, stream: int, indices, set_size: int | None = None, variant: str | None = None) -> list:
        """(record, bundle) pairs, generated once and cached."""
        size = self.cfg.set_size if set_size is None else set_size
        keys = [(stream, size, variant, int(i)) for i in indices]
        missing = [k[3] for k in keys if k not in self._cache]
        if missing:
            ctx = self.context(stream, size, variant)
            for i, pair in zip(missing, M.build_records(ctx, missing, self.jobs, keep_bundle=True)):
                self._cache[(stream, size, variant, i)] = pair
        return [self._cache[k] for k in keys]

    def meta_dataset(self, n: int | None = None, set_size: int | None = None,
                     train: int | None = None) -> M.MetaDataset:
        """First ``n`` training-stream records; split by ratio or at ``train``."""
        n = self.cfg.meta_size if n is None else n
        recs = [r for r, _ in self.records(M.TRAIN_STREAM, range(n), set_size)]
        if train is None:
            tr, va = M.split_indices(n, self.cfg.split_ratio)
        else:
            tr, va = list(range(train)), list(range(train, n))
        prov = self.provenance()
        prov.update({"n": n, "split_ratio": list(self.cfg.split_ratio),
                     "set_size": self.cfg.set_size if set_size is None else set_size})
        return M.MetaDataset(recs, tr, va, prov)

    def test_bundles(self) -> list:
        return [b for _, b in self.records(M.TEST_STREAM, range(self.cfg.n_test))]

    def heldout_sets(self) -> list:
        out = []
        for k, variant in enumerate(self.cfg.heldout_variants):
            pairs = self.records(HELDOUT_STREAM_BASE + k, range(self.cfg.heldout_per_variant), variant=variant)
            for j, (rec, bundle) in enumerate(pairs):
                bundle.source = f"heldout-{variant}-{j:02d}"
                out.append((rec, bundle))
        return out


@dataclass
class Predictors:
    linear: LinearPredictor
    neural: NeuralPredictor
    ori_stats: DatasetStats


def fit_predictors(cfg: ExperimentConfig, meta: M.MetaDataset, ori_stats: DatasetStats) -> Predictors:
    lin = fit_linear([(r.fd, r.accuracy) for r in meta.train])
    tr = [(assemble_representation(r.stats, ori_stats), r.accuracy) for r in meta.train]
    va = [(assemble_representation(r.stats, ori_stats), r.accuracy) for r in meta.val]
    nn = fit_neural(tr, va, cfg.neural_config(), cfg.nn_seed)
    return Predictors(lin, nn, ori_stats)


def _pct(x: float) -> float:
    return float(x) * 100.0


@dataclass
class PredictionReport:
    """Per-set predictions in percent plus per-method RMSE / MAE.

    ``methods`` fixes column order. Aggregates are computed from the
    stored row values, so they can always be re-derived from the rows.
    """

    title: str
    methods: list
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    runtime: dict = field(default_factory=dict)

    @property
    def has_truth(self) -> bool:
        return bool(self.rows) and all(r["truth"] is not None for r in self.rows)

    def aggregates(self) -> dict:
        if not self.has_truth:
            return {}
        truths = [r["truth"] for r in self.rows]
        out = {}
        for m in self.methods:
            preds = [r["pred"][m] for r in self.rows]
            out[m] = {"rmse": rmse(preds, truths), "mae": mae(preds, truths)}
        return out

    def errors(self, method: str) -> np.ndarray:
        """Absolute errors in accuracy units (not percent)."""
        return np.array([abs(r["pred"][method] - r["truth"]) for r in self.rows]) / 100.0

    def rmse(self, method: str) -> float:
        return self.aggregates()[method]["rmse"] / 100.0

    def mae(self, method: str) -> float:
        return self.aggregates()[method]["mae"] / 100.0

    def to_jsonl(self) -> str:
        lines = [json.dumps({"type": "header", "title": self.title, "methods": self.methods, "meta": self.meta})]
        lines += [json.dumps({"type": "row", **r}) for r in self.rows]
        agg = self.aggregates()
        lines.append(json.dumps({"type": "aggregate", "rmse_omitted": not self.has_truth, "metrics": agg}))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "PredictionReport":
        report = None
        for line in text.splitlines():
            if not line.strip():
                continue
            d = json.loads(line)
            kind = d.pop("type")
            if kind == "header":
                report = cls(d["title"], list(d["methods"]), meta=d["meta"])
            elif kind == "row":
                if report is None:
                    raise FormatError("report row before header")
                report.rows.append(d)
        if report is None:
            raise FormatError("report has no header line")
        return report

    def to_table(self) -> str:
        names = ["set", "fd", "truth"] + self.methods
        body = []
        for r in self.rows:
            truth = "-" if r["truth"] is None else f"{r['truth']:.2f}"
            body.append([r["name"], f"{r['fd']:.2f}", truth] + [f"{r['pred'][m]:.2f}" for m in self.methods])
        agg = self.aggregates()
        if agg:
            body.append(["RMSE", "", ""] + [f"{agg[m]['rmse']:.2f}" for m in self.methods])
            body.append(["MAE", "", ""] + [f"{agg[m]['mae']:.2f}" for m in self.methods])
        else:
            body.append(["RMSE", "", ""] + ["n/a"] * len(self.methods))
        widths = [max(len(str(x)) for x in col) for col in zip(names, *body)]
        fmt = lambda row: "  ".join(str(x).rjust(w) for x, w in zip(row, widths))
        out = [self.title, fmt(names), fmt(["-" * w for w in widths])]
        out += [fmt(row) for row in body]
        return "\n".join(out) + "\n"

    def write(self, out_dir, stem: str) -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        jl = out_dir / f"{stem}.jsonl"
        tb = out_dir / f"{stem}.txt"
        jl.write_text(self.to_jsonl())
        tb.write_text(self.to_table())
        return jl, tb


def method_names(taus) -> list:
    return [f"confidence@{t:g}" for t in taus] + ["linear", "neural"]


def predict_bundles(predictors: Predictors, bundles, taus) -> list:
    """One report row per bundle (percent units)."""
    reps = [assemble_representation(compute_stats(b.features), predictors.ori_stats) for b in bundles]
    neural = predict_neural_batch(predictors.neural, reps)
    rows = []
    for b, rep, nn in zip(bundles, reps, neural):
        pred = {f"confidence@{t:g}": _pct(predict_confidence(b, t)) for t in taus}
        pred["linear"] = _pct(predict_linear(predictors.linear, rep.fd))
        pred["neural"] = _pct(nn)
        truth = _pct(bundle_accuracy(b)) if b.has_labels else None
        rows.append({"name": b.source, "fd": rep.fd, "truth": truth, "pred": pred})
    return rows


def run_correlation_study(cfg: ExperimentConfig, bench: Workbench | None = None) -> tuple[float, list]:
    """Spearman rho between fd and accuracy over all meta-set records."""
    bench = bench or Workbench(cfg)
    meta = bench.meta_dataset()
    points = [(r.fd, r.accuracy) for r in meta.records]
    rho = spearman_rho([p[0] for p in points], [p[1] for p in points])
    return rho, points


def write_scatter(path, points) -> Path:
    path = Path(path)
    path.write_text("".join(f"{fd!r} {acc!r}\n" for fd, acc in points))
    return path


def run_method_comparison(cfg: ExperimentConfig, test_bundles=None, bench: Workbench | None = None,
                          predictors: Predictors | None = None) -> PredictionReport:
    """All methods on ``test_bundles`` (default: ``cfg.n_test`` fresh synthetic sets)."""
    started = time.perf_counter()
    bench = bench or Workbench(cfg)
    if predictors is None:
        predictors = fit_predictors(cfg, bench.meta_dataset(), bench.ori_stats)
    if test_bundles is None:
        test_bundles = bench.test_bundles()
    report = PredictionReport("method comparison (accuracy %)", method_names(cfg.taus),
                              predict_bundles(predictors, test_bundles, cfg.taus))
    report.meta = {"n_sets": len(report.rows), "neural_val_rmse": predictors.neural.best_val_rmse,
                   "linear": [predictors.linear.w0, predictors.linear.w1]}
    report.runtime = {"seconds": time.perf_counter() - started}
    return report


def run_robustness_suite(cfg: ExperimentConfig, bench: Workbench | None = None,
                         predictors: Predictors | None = None) -> PredictionReport:
    """Predictions on sets built only from held-out transform families."""
    started = time.perf_counter()
    bench = bench or Workbench(cfg)
    if predictors is None:
        predictors = fit_predictors(cfg, bench.meta_dataset(), bench.ori_stats)
    sets = bench.heldout_sets()
    report = PredictionReport("robustness to held-out transforms (accuracy %)", method_names(cfg.taus),
                              predict_bundles(predictors, [b for _, b in sets], cfg.taus))
    for row, (rec, _) in zip(report.rows, sets):
        row["transforms"] = list(rec.recipe.ids)
    report.meta = {"seed_accuracy": _pct(bench.seed_accuracy), "n_sets": len(sets)}
    report.runtime = {"seconds": time.perf_counter() - started}
    return report


@dataclass
class AblationTable:
    rows: list

    def to_text(self) -> str:
        head = f"{'axis':>10} {'value':>6} {'linear_mae':>11} {'neural_mae':>11} {'linear_rmse':>12} {'neural_rmse':>12}"
        lines = [head]
        for r in self.rows:
            lines.append(f"{r['axis']:>10} {r['value']:>6d} {r['linear_mae']:>11.4f} {r['neural_mae']:>11.4f}"
                         f" {r['linear_rmse']:>12.4f} {r['neural_rmse']:>12.4f}")
        return "\n".join(lines) + "\n"

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r) + "\n" for r in self.rows)

    def column(self, axis: str, key: str) -> dict:
        return {r["value"]: r[key] for r in self.rows if r["axis"] == axis}


def _errors_on_tests(predictors: Predictors, bundles) -> dict:
    rows = predict_bundles(predictors, bundles, ())
    truth = [r["truth"] / 100 for r in rows]
    out = {}
    for m in ("linear", "neural"):
        preds = [r["pred"][m] / 100 for r in rows]
        out[f"{m}_mae"] = mae(preds, truth)
        out[f"{m}_rmse"] = rmse(preds, truth)
    return out


def run_size_ablation(cfg: ExperimentConfig, bench: Workbench | None = None,
                      axes=("meta_size", "set_size")) -> AblationTable:
    """Test-set errors of both regressors across meta-set and sample-set sizes.

    Meta-size points train on the first ``n`` training-stream records and
    validate on the ``ablation_val_size`` records after the largest grid
    value. Set-size points rebuild a ``meta_size`` meta set from a seed
    prefix of that many images.
    """
    bench = bench or Workbench(cfg)
    tests = bench.test_bundles()
    rows = []
    if "meta_size" in axes and cfg.meta_sizes:
        largest = max(cfg.meta_sizes)
        pool = bench.meta_dataset(largest + cfg.ablation_val_size, train=largest)
        val = pool.val
        for n in cfg.meta_sizes:
            sub = M.MetaDataset(pool.records[:n] + val, list(range(n)), list(range(n, n + len(val))))
            pred = fit_predictors(cfg, sub, bench.ori_stats)
            rows.append({"axis": "meta_size", "value": int(n), **_errors_on_tests(pred, tests)})
    if "set_size" in axes and cfg.set_sizes:
        for size in cfg.set_sizes:
            meta = bench.meta_dataset(cfg.meta_size, set_size=size)
            pred = fit_predictors(cfg, meta, bench.ori_stats)
            rows.append({"axis": "set_size", "value": int(size), **_errors_on_tests(pred, tests)})
    return AblationTable(rows)


def check_thresholds(cfg: ExperimentConfig, rho: float | None = None,
                     comparison: PredictionReport | None = None,
                     robustness: PredictionReport | None = None,
                     ablation: AblationTable | None = None,
                     seed_accuracy: float | None = None) -> list:
    """Human-readable descriptions of every configured threshold that fails."""
    bad = []
    if rho is not None and cfg.max_rho is not None and not rho <= cfg.max_rho:
        bad.append(f"spearman rho {rho:.4f} > {cfg.max_rho}")
    if comparison is not None and comparison.has_truth:
        nn, lin = comparison.rmse("neural"), comparison.rmse("linear")
        if cfg.max_neural_rmse is not None and not nn <= cfg.max_neural_rmse:
            bad.append(f"neural RMSE {nn:.4f} > {cfg.max_neural_rmse}")
        if cfg.neural_beats_linear and not nn <= lin:
            bad.append(f"neural RMSE {nn:.4f} > linear RMSE {lin:.4f}")
    if robustness is not None and robustness.has_truth:
        if cfg.robust_abs_error is not None and cfg.robust_fraction is not None:
            frac = float(np.mean(robustness.errors("neural") <= cfg.robust_abs_error))
            if not frac >= cfg.robust_fraction:
                bad.append(f"neural within {cfg.robust_abs_error} on {frac:.2%} of held-out sets")
        if seed_accuracy is not None:
            worse = [r["name"] for r in robustness.rows if not r["truth"] < _pct(seed_accuracy)]
            if worse:
                bad.append(f"held-out sets not below clean accuracy: {worse}")
    if ablation is not None and cfg.max_linear_spread is not None:
        lin = list(ablation.column("meta_size", "linear_mae").values())
        if lin and max(lin) - min(lin) > cfg.max_linear_spread:
            bad.append(f"linear error spread {max(lin) - min(lin):.4f} > {cfg.max_linear_spread}")
        nn = ablation.column("meta_size", "neural_mae")
        if nn and not nn[max(nn)] <= nn[min(nn)]:
            bad.append("neural error at largest meta size exceeds error at smallest")
    return bad
