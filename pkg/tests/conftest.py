import numpy as np
import pytest
from hypothesis import settings

from autoeval.config import ExperimentConfig
from autoeval.harness import Workbench

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def small_config(**changes) -> ExperimentConfig:
    """A configuration that runs end to end in a few seconds."""
    base = dict(
        n_classes=4, set_size=40, train_size=200, clf_epochs=8,
        texture_count=6, texture_size=32,
        meta_size=12, n_test=4, heldout_per_variant=1,
        nn_max_epochs=20, nn_patience=10,
        meta_sizes=(6, 12), set_sizes=(20, 40), ablation_val_size=4,
        jobs=1,
    )
    base.update(changes)
    return ExperimentConfig(**base)


@pytest.fixture(scope="session")
def small_cfg():
    return small_config()


@pytest.fixture(scope="session")
def small_bench(small_cfg):
    return Workbench(small_cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list = []


@pytest.fixture(scope="session")
def acceptance_report():
    """Collects one PASS/FAIL line per acceptance criterion."""

    def record(name: str, passed: bool, detail: str):
        line = f"{'PASS' if passed else 'FAIL'}  {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
