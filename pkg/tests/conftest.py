import numpy as np
import pytest

import vds
from _scoreboard import ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def fixture_bundle():
    """The standard regression fixture: seed 42, d=64, v=200, 5 classes,
    1000/200 split, noise 0.1, mixed."""
    return vds.gen_synthetic(vds.SynthSpec())


@pytest.fixture(scope="session")
def fixture_bases(fixture_bundle):
    return vds.head_bases(fixture_bundle.lm_head)


@pytest.fixture(scope="session")
def trained(fixture_bundle, fixture_bases):
    """All five loss modes trained on the fixture with default config;
    maps mode value -> (params, report)."""
    out = {}
    for mode in vds.LogitsMode:
        cfg = vds.TrainConfig(mode=mode)
        out[mode.value] = vds.train(fixture_bundle, fixture_bases, cfg)
    return out


@pytest.fixture
def small_bundle():
    """Tiny bundle for fast unit tests (d=32 keeps the module trainable)."""
    spec = vds.SynthSpec(seed=7, d=32, v=48, n_classes=3,
                         n_train=60, n_test=24)
    return vds.gen_synthetic(spec)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(1234))
