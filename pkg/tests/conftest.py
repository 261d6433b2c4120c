import numpy as np
import pytest

from bmanifold import corpus


@pytest.fixture
def sine_signal():
    fs = 16000
    t = np.arange(fs) / fs
    return corpus.AudioSignal(np.sin(2 * np.pi * 220.0 * t), fs)


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """4 sessions x 30 s, 2 classes; shared across tests that just need audio."""
    out = tmp_path_factory.mktemp("synth_small")
    manifest = corpus.synth_corpus(4, 30, 2, seed=7, out_dir=out)
    return manifest, out
