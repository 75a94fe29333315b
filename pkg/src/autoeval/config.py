"""Experiment configuration: a flat dataclass persisted as an INI file.

Every field belongs to one INI section; tuples are written comma-separated
and an empty value means ``None``.
"""
from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .classifier import TrainConfig
from .errors import ConfigError
from .glyphs import GlyphSeedConfig
from .predictors import NeuralConfig

__all__ = ["ExperimentConfig", "load_config", "dump_config"]


def _f(default, section: str):
    if isinstance(default, (list, dict)):
        raise TypeError("use tuples for sequence defaults")
    return field(default=default, metadata={"section": section})


@dataclass
class ExperimentConfig:
    # glyph source distribution
    n_classes: int = _f(10, "glyphs")
    set_size: int = _f(500, "glyphs")
    train_size: int = _f(1000, "glyphs")
    raster: int = _f(28, "glyphs")
    max_shift: float = _f(0.12, "glyphs")
    seed_rng: int = _f(2, "glyphs")
    train_rng: int = _f(1, "glyphs")
    # classifier
    clf_hidden: int = _f(64, "classifier")
    clf_epochs: int = _f(20, "classifier")
    clf_batch_size: int = _f(64, "classifier")
    clf_lr: float = _f(0.01, "classifier")
    clf_momentum: float = _f(0.9, "classifier")
    clf_seed: int = _f(0, "classifier")
    # background corpus
    procedural: bool = _f(True, "backgrounds")
    texture_count: int = _f(32, "backgrounds")
    texture_size: int = _f(64, "backgrounds")
    texture_seed: int = _f(0, "backgrounds")
    background_dir: Optional[str] = _f(None, "backgrounds")
    # meta-dataset
    meta_size: int = _f(200, "meta")
    split_ratio: tuple = _f((2, 1), "meta")
    rng_seed: int = _f(0, "meta")
    recipe_mode: str = _f("random", "meta")
    # neural regressor
    nn_hidden: tuple = _f((128, 64), "neural")
    nn_lr: float = _f(1e-3, "neural")
    nn_momentum: float = _f(0.9, "neural")
    nn_batch_size: int = _f(32, "neural")
    nn_max_epochs: int = _f(500, "neural")
    nn_patience: int = _f(50, "neural")
    nn_restarts: int = _f(5, "neural")
    nn_seed: int = _f(0, "neural")
    # evaluation
    taus: tuple = _f((0.7, 0.8, 0.9), "evaluation")
    n_test: int = _f(40, "evaluation")
    heldout_variants: tuple = _f(("A", "B", "C", "D"), "evaluation")
    heldout_per_variant: int = _f(3, "evaluation")
    bundles: tuple = _f((), "evaluation")
    # ablation grids
    meta_sizes: tuple = _f((25, 50, 100, 200), "ablation")
    set_sizes: tuple = _f((100, 250, 500), "ablation")
    ablation_val_size: int = _f(100, "ablation")
    # CI thresholds; None disables a check
    max_rho: Optional[float] = _f(-0.5, "thresholds")
    max_neural_rmse: Optional[float] = _f(0.10, "thresholds")
    neural_beats_linear: bool = _f(True, "thresholds")
    robust_abs_error: Optional[float] = _f(0.15, "thresholds")
    robust_fraction: Optional[float] = _f(0.75, "thresholds")
    max_linear_spread: Optional[float] = _f(0.05, "thresholds")
    # run
    out_dir: str = _f("runs/default", "run")
    jobs: int = _f(0, "run")

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        positive = ["n_classes", "set_size", "train_size", "raster", "meta_size", "n_test",
                    "heldout_per_variant", "ablation_val_size", "nn_restarts", "texture_count", "texture_size"]
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.set_size % self.n_classes or self.train_size % self.n_classes:
            raise ConfigError("set_size and train_size must be multiples of n_classes")
        for t in self.taus:
            if not 0.0 < t < 1.0:
                raise ConfigError(f"tau {t} outside (0, 1)")
        if any(v <= 0 for v in (*self.meta_sizes, *self.set_sizes)):
            raise ConfigError("ablation grid values must be positive")
        if any(v > self.set_size for v in self.set_sizes):
            raise ConfigError("ablation set sizes cannot exceed set_size")
        if len(self.split_ratio) != 2 or self.split_ratio[0] <= 0 or self.split_ratio[1] <= 0:
            raise ConfigError("split_ratio must be two positive numbers")
        if self.recipe_mode not in ("random", "identity"):
            raise ConfigError("recipe_mode must be 'random' or 'identity'")
        if self.meta_size < 2:
            raise ConfigError("meta_size must be at least 2")
        if not self.procedural and not self.background_dir:
            raise ConfigError("no background source: procedural textures disabled and background_dir unset")
        if self.background_dir and not Path(self.background_dir).is_dir():
            raise ConfigError(f"background_dir {self.background_dir} does not exist")

    # derived sub-configs
    def seed_glyphs(self, size: int | None = None) -> GlyphSeedConfig:
        size = self.set_size if size is None else size
        return GlyphSeedConfig(self.n_classes, size // self.n_classes, self.raster, self.raster,
                               max_shift=self.max_shift, seed=self.seed_rng)

    def train_glyphs(self) -> GlyphSeedConfig:
        return GlyphSeedConfig(self.n_classes, self.train_size // self.n_classes, self.raster, self.raster,
                               max_shift=self.max_shift, seed=self.train_rng)

    def train_config(self) -> TrainConfig:
        return TrainConfig(self.clf_hidden, self.clf_epochs, self.clf_batch_size, self.clf_lr, self.clf_momentum)

    def neural_config(self) -> NeuralConfig:
        return NeuralConfig(tuple(self.nn_hidden), self.nn_lr, self.nn_momentum, self.nn_batch_size,
                            self.nn_max_epochs, self.nn_patience, self.nn_restarts)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    return str(value)


def _parse(raw: str, default, name: str):
    raw = raw.strip()
    kind = type(default)
    try:
        if isinstance(default, tuple):
            if not raw:
                return ()
            items = [s.strip() for s in raw.split(",") if s.strip()]
            proto = default[0] if default else ""
            return tuple(_parse(s, proto, name) for s in items)
        if raw == "":
            return None
        if isinstance(default, bool):
            low = raw.lower()
            if low not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(raw)
            return low in ("true", "yes", "1")
        if default is None or kind is str:
            # Optional[float] thresholds carry None defaults only when disabled
            return float(raw) if name in _FLOAT_OPTIONALS else raw
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc


_FLOAT_OPTIONALS = {"max_rho", "max_neural_rmse", "robust_abs_error", "robust_fraction", "max_linear_spread"}


def dump_config(cfg: ExperimentConfig) -> str:
    sections: dict = {}
    for f in dataclasses.fields(cfg):
        sections.setdefault(f.metadata["section"], []).append(f"{f.name} = {_format(getattr(cfg, f.name))}")
    return "\n\n".join(f"[{s}]\n" + "\n".join(lines) for s, lines in sections.items()) + "\n"


def load_config(path=None, **overrides) -> ExperimentConfig:
    """Read an INI file on top of the embedded defaults."""
    values = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file {path} does not exist")
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(path.read_text())
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        fields = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
        for section in parser.sections():
            for key, raw in parser.items(section):
                if key not in fields:
                    raise ConfigError(f"{path}: unknown key [{section}] {key}")
                if fields[key].metadata["section"] != section:
                    raise ConfigError(f"{path}: key {key} belongs in section [{fields[key].metadata['section']}]")
                values[key] = _parse(raw, fields[key].default, key)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**values)
