import os
import sys

import pytest
import torch

sys.path.insert(0, os.path.dirname(__file__))

torch.set_num_threads(1)


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", help="run multi-minute high-resolution tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: multi-minute test, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def _read_log(path):
    with open(path) as f:
        header = f.readline().rstrip("\n").split("\t")
        rows = [dict(zip(header, map(float, line.split("\t")))) for line in f if line.strip()]
    return header, rows


@pytest.fixture(scope="session")
def recon_run(tmp_path_factory):
    """Reconstruction-only overfit: 4 photos + 4 cartoons, 64x64, 500 steps."""
    from synthetic import write_corpus
    from cartoon_renderer.config import TrainingConfig
    from cartoon_renderer.training import train

    root = tmp_path_factory.mktemp("recon")
    cfg = TrainingConfig(
        photo_dir=write_corpus(root / "photos", 4, "photo", seed=1),
        cartoon_dir=write_corpus(root / "cartoons", 4, "cartoon", seed=2),
        crop=64, batch_size=4, w_style=0, w_content=0, w_adversarial=0,
        w_reconstruction=1, max_steps=500, checkpoint_every=250,
        out_dir=str(root / "run"), seed=0)
    final = train(cfg)
    header, rows = _read_log(os.path.join(cfg.out_dir, "train_log.tsv"))
    return {"cfg": cfg, "ckpt": final, "header": header, "rows": rows}


@pytest.fixture(scope="session")
def full_run(tmp_path_factory):
    """All four losses at default weights: 16 + 16 images, 64x64, 200 steps."""
    from synthetic import write_corpus
    from cartoon_renderer.config import TrainingConfig
    from cartoon_renderer.training import train

    root = tmp_path_factory.mktemp("full")
    cfg = TrainingConfig(
        photo_dir=write_corpus(root / "photos", 16, "photo", seed=3),
        cartoon_dir=write_corpus(root / "cartoons", 16, "cartoon", seed=4),
        crop=64, batch_size=4, max_steps=200, checkpoint_every=100,
        out_dir=str(root / "run"), seed=0)
    final = train(cfg)
    header, rows = _read_log(os.path.join(cfg.out_dir, "train_log.tsv"))
    return {"cfg": cfg, "ckpt": final, "header": header, "rows": rows}
