import os

import hypothesis
import numpy as np
import pytest

np.seterr(all="warn")

hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.register_profile("ci", max_examples=100, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "fast"))


@pytest.fixture(scope="session")
def profiles():
    from lamina.experiment import shared_profiles

    return shared_profiles()


@pytest.fixture(autouse=True)
def clean_lamina_env(monkeypatch):
    for name in list(os.environ):
        if name.startswith("LAMINA"):
            monkeypatch.delenv(name)


SMALL = {
    "geometry": {"profile": "cosine", "amplitude": 0.2, "delta": 0.25},
    "params": {"delta0": 0.5},
    "grid": {"n1": 8, "n2": 8, "n3": 16, "height": 4.0, "max_ratio": 1.3, "wall_spacing": 0.005},
    "time": {"t_final": 0.04, "dt": 0.01},
    "check": {
        "sandwich_samples": 20_000,
        "identity_samples": 2_000,
        "eigen_points": 100,
        "theta_nu": {"start": 1e-6, "ratio": 0.1, "count": 4},
    },
}


@pytest.fixture
def small_config(tmp_path):
    """Admissible and cheap: coarse grid, a wide wall oscillation, four steps."""
    from lamina.config import RunConfig, merge

    return RunConfig.from_dict(merge(SMALL, {"output": str(tmp_path / "runs")}))


@pytest.fixture
def small_experiment(small_config):
    from lamina.experiment import build_experiment

    return build_experiment(small_config)


@pytest.fixture(scope="module")
def shared_experiment():
    """small_config without an output directory, for module-scoped runs."""
    from lamina.config import RunConfig
    from lamina.experiment import build_experiment

    return build_experiment(RunConfig.from_dict(SMALL))


@pytest.fixture
def make_record():
    """ConvergenceRecord with every float 1.0 unless overridden."""
    from lamina.audit import ConvergenceRecord

    def make(**overrides):
        values = {}
        for name in ConvergenceRecord.columns():
            kind = ConvergenceRecord.__dataclass_fields__[name].type
            values[name] = {int: 4, bool: True}.get(kind, 1.0)
        values.update(overrides)
        return ConvergenceRecord(**values)

    return make
