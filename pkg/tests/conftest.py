import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dmvst.data import SynthConfig, default_spec, synth_generate  # noqa: E402
from dmvst.pipeline import prepare  # noqa: E402


@pytest.fixture(scope="session")
def small_dataset():
    """Two synthetic weeks on a 6x6 grid, short sequences and small patches."""
    grid, truth = synth_generate(0, default_spec(6, 6), days=14)
    ds = prepare(grid, 10, seq_len=3, patch_size=5, embed_dim=8, line_samples=20_000)
    return ds, truth


@pytest.fixture(scope="session")
def noiseless_dataset():
    cfg = SynthConfig(noise=0.0, drift=0.0)
    grid, truth = synth_generate(1, default_spec(6, 6), days=14, config=cfg)
    ds = prepare(grid, 10, seq_len=3, patch_size=5, embed_dim=8, line_samples=20_000)
    return ds, truth


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
