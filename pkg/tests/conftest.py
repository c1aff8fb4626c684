import numpy as np
import pytest

from specklemon.config import HarnessConfig, config_from_dict
from specklemon.harness import cmd_synth, cmd_train


def tiny_config_dict() -> dict:
    """Desk-scale config shrunk to a 32 um grid for fast tests."""
    d = HarnessConfig().model_dump()
    d["optics"].update(grid_n=128)
    d["materials"] = d["materials"][:2]
    d["groove"].update(energies_uJ=[20.0, 60.0], speeds_mm_s=[1.0, 2.0],
                       n_frames=14, triplet_cap=3)
    d["drill"].update(energies_uJ=[2.0, 8.0], pulse_counts=[10, 30, 50], triplet_cap=3)
    d["train"].update(epochs=3, batch_size=16)
    return d


@pytest.fixture(scope="session")
def tiny_config() -> HarnessConfig:
    return config_from_dict(tiny_config_dict())


@pytest.fixture(scope="session")
def tiny_artifacts(tiny_config, tmp_path_factory):
    """One tiny synth+train shared by harness/service/CLI tests."""
    out = tmp_path_factory.mktemp("tiny")
    synth = cmd_synth(tiny_config, out_dir=out, mode="both")
    groove = next(d for d in synth["datasets"] if d["mode"] == "groove")
    drill = next(d for d in synth["datasets"] if d["mode"] == "drill")
    train = cmd_train(tiny_config, groove["path"], out_dir=out)
    return {
        "out": out,
        "config": tiny_config,
        "synth": synth,
        "groove": groove,
        "drill": drill,
        "train": train,
    }


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
