import json

import numpy as np
import pytest

from dialectshot.data import EmbeddedDataset, save_dataset

from cli_runner import run_cli


@pytest.fixture(scope="session")
def synth_pair_dir(tmp_path_factory):
    """Small synthetic base/shifted dialect pair laid out for matrix runs."""
    root = tmp_path_factory.mktemp("synthdata")
    code = run_cli(["synth", "--out", root, "--n", 120, "--seed", 3])
    assert code == 0
    return root


@pytest.fixture(scope="session")
def experiment_config(synth_pair_dir, tmp_path_factory):
    cfg_dir = tmp_path_factory.mktemp("cfg")
    doc = {
        "version": 1,
        "tasks": [
            {
                "name": "synth",
                "metric": "accuracy",
                "dialects": {
                    "base": str(synth_pair_dir / "base"),
                    "shifted": str(synth_pair_dir / "shifted"),
                },
            }
        ],
        "hyperparams": {"epochs": 2, "gru_hidden": 4, "classifier_hidden": 4},
        "seeds": [0],
        "reference_dialect": "base",
    }
    path = cfg_dir / "experiment.json"
    path.write_text(json.dumps(doc, indent=2))
    return path


@pytest.fixture(scope="session")
def memorizable_dataset_dir(tmp_path_factory):
    """A trivially separable labeled set a small head memorizes exactly."""
    rng = np.random.default_rng(0)
    n, s, d, k = 32, 4, 6, 2
    labels = rng.permutation(np.arange(n) % k)
    means = np.zeros((k, d))
    means[0, 0], means[1, 0] = -3.0, 3.0
    x = (0.1 * rng.normal(size=(n, s, d)) + means[labels][:, None, :]).astype(np.float32)
    ds = EmbeddedDataset(
        name="memo",
        dialect="base",
        task="toy",
        metric="accuracy",
        k=k,
        embeddings=x,
        lengths=np.full(n, s),
        labels=labels,
    )
    path = tmp_path_factory.mktemp("memo") / "ds"
    save_dataset(ds, path)
    return path
