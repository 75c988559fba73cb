import pytest

from bihandover import SynthConfig, build_features, fit_supervised, synth_demo


@pytest.fixture(scope="session")
def synth_family():
    return [synth_demo(SynthConfig(), seed) for seed in range(20)]


@pytest.fixture(scope="session")
def trained_model(synth_family):
    return fit_supervised([build_features(d) for d in synth_family])
