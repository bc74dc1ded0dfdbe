from types import SimpleNamespace

import numpy as np
import pytest
import torch
from PIL import Image

from cartoon_renderer.config import TrainingConfig
from cartoon_renderer.data import ImageStream, load_datasets
from cartoon_renderer.errors import DataError
from synthetic import write_corpus


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    photos = write_corpus(root / "p", 10, "photo", size=(40, 48), seed=0)
    cartoons = write_corpus(root / "c", 7, "cartoon", size=(48, 40), seed=1)
    return photos, cartoons


def _cfg(corpus, seed=7):
    return SimpleNamespace(photo_dir=corpus[0], cartoon_dir=corpus[1], crop=32, seed=seed)


def test_unpaired_batches(corpus):
    photos, cartoons = load_datasets(_cfg(corpus))
    assert (len(photos), len(cartoons)) == (10, 7)
    p, c = photos.next_batch(4), cartoons.next_batch(4)
    assert p.shape == c.shape == (4, 3, 32, 32)
    assert p.min() >= -1 and p.max() <= 1


def test_streams_are_independent(corpus):
    a_photos, a_cartoons = load_datasets(_cfg(corpus))
    b_photos, _ = load_datasets(_cfg(corpus))
    for _ in range(5):
        a_cartoons.next_batch(3)
    assert torch.equal(a_photos.next_batch(4), b_photos.next_batch(4))


def test_deterministic_under_seed(corpus):
    runs = []
    for _ in range(2):
        photos, cartoons = load_datasets(_cfg(corpus, seed=7))
        runs.append([(photos.next_batch(2), cartoons.next_batch(2)) for _ in range(3)])
    for (p1, c1), (p2, c2) in zip(*runs):
        assert torch.equal(p1, p2) and torch.equal(c1, c2)
    other = load_datasets(_cfg(corpus, seed=8))[0].next_batch(2)
    assert not torch.equal(other, runs[0][0][0])


def test_state_round_trip(corpus):
    photos, _ = load_datasets(_cfg(corpus))
    photos.next_batch(2)
    state = photos.get_state()
    expected = photos.next_batch(3)
    photos.set_state(state)
    assert torch.equal(photos.next_batch(3), expected)


def test_default_crop():
    assert TrainingConfig().crop == 256


def test_skips_bad_images(tmp_path):
    write_corpus(tmp_path, 3, "photo", size=(32, 32))
    Image.fromarray(np.zeros((16, 64, 3), np.uint8)).save(tmp_path / "small.png")
    (tmp_path / "broken.png").write_bytes(b"not a png")
    stream = ImageStream(tmp_path, 32, np.random.default_rng(0))
    assert len(stream) == 3 and stream.skipped == 2


def test_empty_directory_is_fatal(tmp_path):
    with pytest.raises(DataError, match="no usable images"):
        ImageStream(tmp_path, 32, np.random.default_rng(0))


def test_missing_directory_is_fatal(tmp_path):
    with pytest.raises(DataError):
        ImageStream(tmp_path / "absent", 32, np.random.default_rng(0))


def test_crop_covers_whole_image_range(tmp_path):
    """Crop offsets reach both ends of the valid range."""
    a = np.arange(40 * 40 * 3, dtype=np.uint32).reshape(40, 40, 3) % 251
    Image.fromarray(a.astype(np.uint8)).save(tmp_path / "img.png")
    stream = ImageStream(tmp_path, 32, np.random.default_rng(1))
    src = np.asarray(Image.open(tmp_path / "img.png"))
    corners = set()
    for _ in range(300):
        _, crop = stream.sample()
        for y in range(9):
            for x in range(9):
                if np.array_equal(crop, src[y:y + 32, x:x + 32]):
                    corners.add((y, x))
    assert (0, 0) in corners and (8, 8) in corners
