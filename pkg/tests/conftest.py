import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

sys.path.insert(0, str(Path(__file__).parent))

from util import smooth_image, tiny_train_config

ACCEPTANCE_RESULTS: list = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for name, status in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(f"[PRIMARY] {name}: {status}")


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture(scope="session")
def tiny_checkpoints(tmp_path_factory):
    """Three trained tiny-stage checkpoints shared by CLI/service tests."""
    from tirfill.training import (
        ArrayDataset,
        train_completion_stage,
        train_edge_stage,
        train_refinement_stage,
    )

    ckpt_dir = tmp_path_factory.mktemp("ckpts")
    config = tiny_train_config(ckpt_dir)
    dataset = ArrayDataset([smooth_image(64, seed=3)], augment=False)
    edge = train_edge_stage(config, dataset)
    completion = train_completion_stage(config, dataset, edge)
    refinement = train_refinement_stage(config, dataset, edge, completion)
    return {"edge": edge, "completion": completion, "refinement": refinement}


@pytest.fixture(scope="session")
def fixture_dataset(tmp_path_factory):
    """Two PNG images plus a manifest file for CLI runs."""
    root = tmp_path_factory.mktemp("data")
    for i in range(2):
        arr = (smooth_image(80, seed=10 + i) * 255).round().astype(np.uint8)
        Image.fromarray(arr, mode="L").save(root / f"img{i}.png")
    manifest = root / "train.txt"
    manifest.write_text("img0.png\nimg1.png\n", encoding="utf-8")
    return {"root": root, "manifest": manifest}
