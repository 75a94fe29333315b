import pytest

from autoeval.config import ExperimentConfig, dump_config, load_config
from autoeval.errors import ConfigError


def test_defaults_round_trip(tmp_path):
    cfg = ExperimentConfig()
    path = tmp_path / "c.ini"
    path.write_text(dump_config(cfg))
    assert load_config(path) == cfg


def test_overrides_and_sections(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text("[meta]\nmeta_size = 30\nsplit_ratio = 3, 1\n\n[thresholds]\nmax_rho =\n\n[evaluation]\ntaus = 0.5, 0.75\n")
    cfg = load_config(path, rng_seed=9)
    assert cfg.meta_size == 30 and cfg.split_ratio == (3, 1)
    assert cfg.max_rho is None and cfg.taus == (0.5, 0.75) and cfg.rng_seed == 9


@pytest.mark.parametrize("text", [
    "[meta]\nbogus = 1\n",
    "[glyphs]\nmeta_size = 30\n",
    "[meta]\nmeta_size = many\n",
    "[evaluation]\ntaus = 0.5, 1.5\n",
    "[ablation]\nmeta_sizes = 10, -5\n",
    "[backgrounds]\nprocedural = false\n",
    "[backgrounds]\nprocedural = false\nbackground_dir = /definitely/not/here\n",
])
def test_invalid(tmp_path, text):
    path = tmp_path / "bad.ini"
    path.write_text(text)
    with pytest.raises(ConfigError):
        load_config(path)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.ini")


def test_derived_configs():
    cfg = ExperimentConfig()
    assert cfg.seed_glyphs().per_class * cfg.n_classes == cfg.set_size
    assert cfg.neural_config().restarts == cfg.nn_restarts
    assert cfg.train_config().epochs == cfg.clf_epochs
