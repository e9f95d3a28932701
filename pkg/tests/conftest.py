import numpy as np
import pytest

from editlock.data import default_prompts, partition, synth_generate
from editlock.diffusion import ManipulatorModel, ModelSpec

# one pass/fail line per acceptance criterion, printed after the run so the
# capture setting cannot swallow them
_CRITERIA = []


def record_criterion(line):
    _CRITERIA.append(line)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for line in _CRITERIA:
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def tiny_spec():
    return ModelSpec(t_steps=8, ddim_steps=4, channels=(6, 12, 24),
                     emb_dim=16, n_prompts=2)


@pytest.fixture(scope="session")
def tiny_data():
    rows = synth_generate(16, 16, seed=3)
    return partition(rows, 0.5, 0.25, seed=11, prompts=default_prompts(2))


@pytest.fixture(scope="session")
def tiny_model(tiny_spec):
    return ManipulatorModel.create(tiny_spec, seed=3)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
