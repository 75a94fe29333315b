"""Meta-dataset synthesis.

A sample set is the seed set with its background replaced by random crops
of one corpus image, followed by three randomly chosen catalog transforms
whose magnitudes are redrawn for every image. Each set is labelled with
the classifier's true accuracy on it.

Every record ``i`` draws from its own generator seeded by
``SeedSequence([root_seed, stream, i])``, so records can be produced in any
order or in parallel and still be bit-identical.
"""
from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import transforms as T
from .classifier import LabeledImageSet, TinyClassifier, bundle_accuracy, extract_features
from .errors import ConfigError, FormatError, ParameterError, ShapeError
from .formats import read_stats, sha256_bytes, stats_bytes, write_stats
from .stats import DatasetStats, compute_stats, frechet_distance

__all__ = [
    "BackgroundSpec",
    "TransformRecipe",
    "HeldOutRecipe",
    "SampleSetRecord",
    "MetaDataset",
    "SynthContext",
    "sample_recipe",
    "identity_recipe",
    "sample_heldout_recipe",
    "apply_recipe",
    "record_rng",
    "generate_sample_set",
    "build_records",
    "build_meta_dataset",
    "split_indices",
    "write_manifest",
    "read_manifest",
]

CROP_SCALE_BOUNDS = (0.2, 1.0)

TRAIN_STREAM = 0
TEST_STREAM = 1
HELDOUT_STREAM = 2


@dataclass(frozen=True)
class BackgroundSpec:
    """Corpus image index and the (lo, hi) range of crop side fractions."""

    source: int
    scale: tuple = CROP_SCALE_BOUNDS

    def __post_init__(self):
        lo, hi = self.scale
        if not CROP_SCALE_BOUNDS[0] <= lo <= hi <= CROP_SCALE_BOUNDS[1]:
            raise ParameterError(f"crop scale range {self.scale} outside {CROP_SCALE_BOUNDS}")
        object.__setattr__(self, "scale", (float(lo), float(hi)))


def _check_ops(ops, catalog: dict, count_ok: Callable[[int], bool], kind: str):
    names = [name for name, _ in ops]
    if not count_ok(len(names)):
        raise ParameterError(f"{kind}: invalid number of transforms ({len(names)})")
    if len(set(names)) != len(names):
        raise ParameterError(f"{kind}: transform ids must be distinct")
    out = []
    for name, rng_ in ops:
        if name not in catalog:
            raise ParameterError(f"{kind}: unknown transform {name!r}")
        bounds = catalog[name]
        if bounds is None:
            if rng_ is not None:
                raise ParameterError(f"{name} takes no magnitude")
            out.append((name, None))
            continue
        lo, hi = (float(v) for v in rng_)
        if not bounds[0] <= lo <= hi <= bounds[1]:
            raise ParameterError(f"{name} range ({lo}, {hi}) outside catalog bounds {bounds}")
        out.append((name, (lo, hi)))
    return tuple(out)


@dataclass(frozen=True)
class _Recipe:
    background: Optional[BackgroundSpec]
    transforms: tuple

    @property
    def ids(self) -> tuple:
        return tuple(name for name, _ in self.transforms)

    def to_dict(self) -> dict:
        bg = None if self.background is None else {"source": self.background.source, "scale": list(self.background.scale)}
        return {
            "kind": type(self).__name__,
            "background": bg,
            "transforms": [[name, None if r is None else list(r)] for name, r in self.transforms],
        }

    @staticmethod
    def from_dict(d: dict) -> "_Recipe":
        cls = {"TransformRecipe": TransformRecipe, "HeldOutRecipe": HeldOutRecipe}[d.get("kind", "TransformRecipe")]
        bg = d.get("background")
        spec = None if bg is None else BackgroundSpec(int(bg["source"]), tuple(bg["scale"]))
        ops = tuple((name, None if r is None else tuple(r)) for name, r in d["transforms"])
        return cls(spec, ops)


@dataclass(frozen=True)
class TransformRecipe(_Recipe):
    """Background spec plus exactly three distinct catalog transforms, in order.

    ``background=None`` keeps the seed's own (black) background.
    """

    def __post_init__(self):
        object.__setattr__(self, "transforms", _check_ops(self.transforms, T.CATALOG, lambda n: n == 3, "TransformRecipe"))


@dataclass(frozen=True)
class HeldOutRecipe(_Recipe):
    """One to four transforms from the held-out catalog; never used for training sets."""

    def __post_init__(self):
        object.__setattr__(
            self,
            "transforms",
            _check_ops(self.transforms, T.HELD_OUT_CATALOG, lambda n: 1 <= n <= len(T.HELD_OUT_CATALOG), "HeldOutRecipe"),
        )


def _sample_range(rng: np.random.Generator, bounds) -> tuple:
    a, b = np.sort(rng.uniform(bounds[0], bounds[1], size=2))
    return (float(a), float(b))


def _sample_background(rng: np.random.Generator, n_backgrounds: int) -> BackgroundSpec:
    if n_backgrounds < 1:
        raise ConfigError("background corpus is empty")
    source = int(rng.integers(n_backgrounds))
    return BackgroundSpec(source, _sample_range(rng, CROP_SCALE_BOUNDS))


def sample_recipe(rng: np.random.Generator, n_backgrounds: int) -> TransformRecipe:
    """Random background plus an ordered draw of 3 of the 6 catalog transforms.

    Each parametrised transform gets a random sub-range of its catalog
    bounds; per-image magnitudes are later drawn uniformly from it.
    """
    background = _sample_background(rng, n_backgrounds)
    names = list(T.CATALOG)
    chosen = [names[i] for i in rng.permutation(len(names))[:3]]
    ops = tuple((n, None if T.CATALOG[n] is None else _sample_range(rng, T.CATALOG[n])) for n in chosen)
    return TransformRecipe(background, ops)


def identity_recipe(rng: np.random.Generator | None = None, n_backgrounds: int = 0) -> TransformRecipe:
    """Original background, rotation 0, brightness 1, translation 0."""
    return TransformRecipe(None, (("rotation", (0.0, 0.0)), ("brightness", (1.0, 1.0)), ("translation", (0.0, 0.0))))


HELDOUT_VARIANTS = {
    "A": ("cutout", "shear"),
    "B": ("equalize", "colorTemperature"),
    "C": ("shear", "colorTemperature", "cutout"),
    "D": ("cutout", "shear", "equalize", "colorTemperature"),
}


def sample_heldout_recipe(rng: np.random.Generator, n_backgrounds: int, variant: str = "A") -> HeldOutRecipe:
    background = _sample_background(rng, n_backgrounds)
    ops = tuple(
        (n, None if T.HELD_OUT_CATALOG[n] is None else _sample_range(rng, T.HELD_OUT_CATALOG[n]))
        for n in HELDOUT_VARIANTS[variant]
    )
    return HeldOutRecipe(background, ops)


def _apply_op(images, name, bounds, rng):
    n = images.shape[0]
    if name == "autoContrast":
        return T.auto_contrast(images)
    if name == "equalize":
        return T.equalize(images)
    if name == "translation":
        return T.translate(images, rng.uniform(bounds[0], bounds[1], size=(n, 2)))
    mags = rng.uniform(bounds[0], bounds[1], size=n)
    if name == "cutout":
        return T.cutout(images, mags, rng)
    fn = {
        "rotation": T.rotate,
        "color": T.color,
        "brightness": T.brightness,
        "sharpness": T.sharpness,
        "shear": T.shear,
        "colorTemperature": T.color_temperature,
    }[name]
    return fn(images, mags)


def apply_recipe(seed: LabeledImageSet, masks, recipe: _Recipe, backgrounds, rng: np.random.Generator) -> LabeledImageSet:
    """Replace backgrounds, then apply the recipe's transforms in order.

    Labels and cardinality are inherited from ``seed``; output pixels are
    clamped to [0, 1].
    """
    if not backgrounds:
        raise ConfigError("background corpus is empty")
    masks = np.asarray(masks, dtype=np.float64)
    if masks.shape != seed.images.shape[:3]:
        raise ShapeError("masks do not align with seed images")
    images = seed.images
    n, h, w = images.shape[:3]

    if recipe.background is not None:
        if not 0 <= recipe.background.source < len(backgrounds):
            raise ConfigError(f"background source {recipe.background.source} not in corpus")
        src = np.asarray(backgrounds[recipe.background.source], dtype=np.float64)
        bh, bw = src.shape[:2]
        lo, hi = recipe.background.scale
        side = rng.uniform(lo, hi, size=n) * min(bh, bw)
        left = rng.uniform(0.0, 1.0, size=n) * (bw - side)
        top = rng.uniform(0.0, 1.0, size=n) * (bh - side)
        bg = T.crop_resize(src, np.stack([left, top, side], axis=1), (h, w))
        alpha = masks[..., None]
        images = alpha * images + (1.0 - alpha) * bg

    for name, bounds in recipe.transforms:
        images = _apply_op(images, name, bounds, rng)
    return LabeledImageSet(np.clip(images, 0.0, 1.0), seed.labels.copy(), seed.n_classes)


def record_rng(root_seed: int, index: int, stream: int = TRAIN_STREAM) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(root_seed), int(stream), int(index)]))


@dataclass
class SampleSetRecord:
    id: str
    index: int
    recipe: _Recipe
    stats: DatasetStats
    fd: float
    accuracy: float
    count: int
    stats_path: str = ""

    def __post_init__(self):
        if not 0.0 <= self.accuracy <= 1.0:
            raise ParameterError("accuracy outside [0, 1]")
        if self.fd < 0:
            raise ParameterError("negative fd")


@dataclass
class SynthContext:
    """Everything needed to regenerate any sample set from its index."""

    seed: LabeledImageSet
    masks: np.ndarray
    clf: TinyClassifier
    ori_stats: DatasetStats
    backgrounds: list
    root_seed: int
    stream: int = TRAIN_STREAM
    recipe_fn: Callable = sample_recipe
    recipe_kwargs: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.backgrounds:
            raise ConfigError("background corpus is empty")
        if self.clf.feature_dim != self.ori_stats.dim:
            raise ShapeError("classifier feature dim does not match reference statistics")


def generate_sample_set(ctx: SynthContext, index: int) -> tuple[TransformRecipe, LabeledImageSet]:
    rng = record_rng(ctx.root_seed, index, ctx.stream)
    recipe = ctx.recipe_fn(rng, len(ctx.backgrounds), **ctx.recipe_kwargs)
    return recipe, apply_recipe(ctx.seed, ctx.masks, recipe, ctx.backgrounds, rng)


def make_record(ctx: SynthContext, index: int, keep_bundle: bool = False):
    recipe, data = generate_sample_set(ctx, index)
    prefix = "set" if ctx.stream == TRAIN_STREAM else f"s{ctx.stream}"
    rid = f"{prefix}-{index:05d}"
    bundle = extract_features(ctx.clf, data.images, data.labels, source=rid)
    stats = compute_stats(bundle.features)
    rec = SampleSetRecord(
        id=rid,
        index=index,
        recipe=recipe,
        stats=stats,
        fd=frechet_distance(ctx.ori_stats, stats),
        accuracy=bundle_accuracy(bundle),
        count=len(data),
    )
    return (rec, bundle) if keep_bundle else rec


_WORKER_CTX: SynthContext | None = None


def _init_worker(ctx):
    global _WORKER_CTX
    _WORKER_CTX = ctx


def _worker(args):
    index, keep_bundle = args
    return make_record(_WORKER_CTX, index, keep_bundle)


def resolve_jobs(jobs: int | None) -> int:
    if jobs is None or jobs <= 0:
        return os.cpu_count() or 1
    return jobs


def build_records(ctx: SynthContext, indices, jobs: int | None = 1, keep_bundle: bool = False) -> list:
    """Generate records for ``indices``; output order always follows ``indices``."""
    indices = list(indices)
    jobs = resolve_jobs(jobs)
    if jobs == 1 or len(indices) < 2:
        return [make_record(ctx, i, keep_bundle) for i in indices]
    with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(ctx,)) as pool:
        return list(pool.map(_worker, [(i, keep_bundle) for i in indices], chunksize=max(1, len(indices) // (4 * jobs))))


def split_indices(n: int, ratio=(2, 1)) -> tuple[list, list]:
    a, b = ratio
    if a <= 0 or b < 0:
        raise ParameterError("split ratio must be positive")
    n_train = int(round(n * a / (a + b)))
    n_train = min(max(n_train, 1), n - 1) if b > 0 else n
    return list(range(n_train)), list(range(n_train, n))


@dataclass
class MetaDataset:
    records: list
    train_idx: list
    val_idx: list
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.records)
        if sorted(self.train_idx + self.val_idx) != list(range(n)):
            raise ParameterError("splits must be disjoint and cover every record")

    def __len__(self):
        return len(self.records)

    @property
    def train(self) -> list:
        return [self.records[i] for i in self.train_idx]

    @property
    def val(self) -> list:
        return [self.records[i] for i in self.val_idx]

    def manifest_lines(self) -> list:
        split = {i: "train" for i in self.train_idx}
        split.update({i: "val" for i in self.val_idx})
        lines = []
        for i, r in enumerate(self.records):
            lines.append(json.dumps({
                "id": r.id,
                "index": r.index,
                "split": split[i],
                "recipe": r.recipe.to_dict(),
                "fd": r.fd,
                "accuracy": r.accuracy,
                "count": r.count,
                "stats": r.stats_path or f"stats/{r.id}.aest",
            }, sort_keys=False))
        return lines

    def manifest_hash(self) -> str:
        body = "\n".join(self.manifest_lines()) + "\n"
        h = sha256_bytes(body.encode())
        # stats payloads are part of the identity as well
        return sha256_bytes((h + "".join(sha256_bytes(stats_bytes(r.stats)) for r in self.records)).encode())


def build_meta_dataset(
    seed: LabeledImageSet,
    masks,
    clf: TinyClassifier,
    ori_stats: DatasetStats,
    n: int,
    backgrounds,
    rng_seed: int,
    split_ratio=(2, 1),
    jobs: int | None = 1,
    recipe_fn: Callable = sample_recipe,
    provenance: dict | None = None,
) -> MetaDataset:
    if n < 2:
        raise ParameterError("a meta-dataset needs at least 2 sample sets")
    ctx = SynthContext(seed, masks, clf, ori_stats, list(backgrounds), rng_seed, TRAIN_STREAM, recipe_fn)
    records = build_records(ctx, range(n), jobs)
    train_idx, val_idx = split_indices(n, split_ratio)
    prov = {"rng_seed": int(rng_seed), "n": n, "split_ratio": list(split_ratio)}
    prov.update(provenance or {})
    return MetaDataset(records, train_idx, val_idx, prov)


def write_manifest(meta: MetaDataset, out_dir) -> Path:
    """Write ``manifest.jsonl``, ``provenance.json`` and one stats file per record."""
    out_dir = Path(out_dir)
    (out_dir / "stats").mkdir(parents=True, exist_ok=True)
    for r in meta.records:
        r.stats_path = r.stats_path or f"stats/{r.id}.aest"
        write_stats(out_dir / r.stats_path, r.stats)
    path = out_dir / "manifest.jsonl"
    path.write_text("\n".join(meta.manifest_lines()) + "\n")
    (out_dir / "provenance.json").write_text(json.dumps(meta.provenance, indent=2, sort_keys=True) + "\n")
    return path


def read_manifest(path) -> MetaDataset:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.jsonl"
    root = path.parent
    records, train_idx, val_idx = [], [], []
    for lineno, line in enumerate(path.read_text().splitlines()):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
            rec = SampleSetRecord(
                id=d["id"],
                index=int(d["index"]),
                recipe=TransformRecipe.from_dict(d["recipe"]),
                stats=read_stats(root / d["stats"]),
                fd=float(d["fd"]),
                accuracy=float(d["accuracy"]),
                count=int(d["count"]),
                stats_path=d["stats"],
            )
        except (KeyError, json.JSONDecodeError, TypeError) as exc:
            raise FormatError(f"{path}:{lineno + 1}: malformed manifest line") from exc
        (train_idx if d["split"] == "train" else val_idx).append(len(records))
        records.append(rec)
    prov_path = root / "provenance.json"
    prov = json.loads(prov_path.read_text()) if prov_path.exists() else {}
    return MetaDataset(records, train_idx, val_idx, prov)


def all_triples() -> set:
    return {frozenset(c) for c in combinations(T.CATALOG, 3)}
