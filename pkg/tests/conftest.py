import pytest

from rnnmpc import lstm, plant, sysid
from rnnmpc.config import validate_config

HORIZON = 10


@pytest.fixture(scope="session")
def kin():
    return plant.KineticParameters()


@pytest.fixture(scope="session")
def default_config():
    return validate_config({})


@pytest.fixture(scope="session")
def reference_data(default_config):
    """The reference staircase dataset: trajectories, normalization, windows."""
    from rnnmpc import cli

    train_traj = cli._generate_split(default_config, "train")
    test_traj = cli._generate_split(default_config, "test")
    norm = sysid.fit_normalization([train_traj])
    train_ds = sysid.normalize_dataset(
        sysid.Dataset.from_trajectories([train_traj], HORIZON, split="train"), norm
    )
    test_ds = sysid.Dataset.from_trajectories([test_traj], HORIZON, split="test")
    return {
        "train_traj": train_traj,
        "test_traj": test_traj,
        "normalization": norm,
        "train": train_ds,
        "test": test_ds,
    }


@pytest.fixture(scope="session")
def tiny_trained_net(reference_data):
    """A small net trained briefly; good enough for mechanism tests."""
    norm = reference_data["normalization"]
    net = lstm.initialize_network(seed=5, n_layers=1, hidden_size=12, horizon=HORIZON, normalization=norm)
    lstm.train(net, reference_data["train"], epochs=25, batch_size=64, seed=5)
    return net


def tiny_cli_config(tmp_dir) -> dict:
    """A fast, fully self-consistent configuration for pipeline tests."""
    return {
        "plant": {"substeps": 4},
        "excitation": {
            "train": {
                "seed": 11, "q_levels": [0.8], "t_step": 0.2, "dwell": 6, "jitter": 0.0,
                "refine": None, "walk": None,
            },
            "test": {
                "seed": 12, "q_levels": [0.78], "t_step": 0.25, "dwell": 5, "jitter": 0.0,
                "refine": None, "walk": None,
            },
        },
        "model": {"layers": 1, "nodes": 6, "horizon": 4, "epochs": 8, "batch_size": 16, "seed": 3},
        "mpc": {"prediction_steps": 4, "control_steps": 2},
        "scenarios": [
            {"name": "startup", "u0": {"q": 0.8, "T": 0.8}, "n_steps": 24, "warmup_steps": 4},
        ],
        "benchmark": {"architectures": [{"layers": 1, "nodes": 6}], "offset_window": 10},
        "sweep": {"n": 13},
        "paths": {
            "data_dir": str(tmp_dir / "data"),
            "models_dir": str(tmp_dir / "models"),
            "results_dir": str(tmp_dir / "results"),
        },
    }
