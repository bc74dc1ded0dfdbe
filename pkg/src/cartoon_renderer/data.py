"""Unpaired photo / cartoon sampling with random square crops."""

import logging
import os
from functools import lru_cache
from typing import List

import numpy as np
import torch

from .errors import DataError
from .images import EXTENSIONS, read_rgb

log = logging.getLogger(__name__)


def list_images(directory) -> List[str]:
    if not os.path.isdir(directory):
        raise DataError(f"image directory {directory} does not exist")
    return sorted(
        os.path.join(directory, name) for name in os.listdir(directory)
        if name.lower().endswith(EXTENSIONS)
    )


@lru_cache(maxsize=512)
def _decode(path: str) -> np.ndarray:
    return read_rgb(path)


class ImageStream:
    """Endless source of random ``crop`` x ``crop`` patches from one directory.

    Images are drawn uniformly with replacement; the sequence is fully
    determined by the generator state.
    """

    def __init__(self, directory, crop: int, rng: np.random.Generator, name: str = ""):
        self.name = name or os.fspath(directory)
        self.crop = crop
        self.rng = rng
        self.skipped = 0
        self.paths = []
        for path in list_images(directory):
            try:
                h, w = _decode(path).shape[:2]
            except DataError as e:
                log.warning("skipping %s", e)
                self.skipped += 1
                continue
            if min(h, w) < crop:
                log.warning("skipping %s: %dx%d is smaller than crop %d", path, h, w, crop)
                self.skipped += 1
                continue
            self.paths.append(path)
        if not self.paths:
            raise DataError(f"no usable images (>= {crop}px) in {self.name} "
                            f"({self.skipped} skipped)")

    def __len__(self):
        return len(self.paths)

    def sample(self):
        """Return (index, crop array) for one random patch."""
        i = int(self.rng.integers(len(self.paths)))
        a = _decode(self.paths[i])
        h, w = a.shape[:2]
        y = int(self.rng.integers(h - self.crop + 1))
        x = int(self.rng.integers(w - self.crop + 1))
        return i, a[y:y + self.crop, x:x + self.crop]

    def next_batch(self, n: int) -> torch.Tensor:
        crops = np.stack([self.sample()[1] for _ in range(n)])
        t = torch.from_numpy(np.ascontiguousarray(crops.transpose(0, 3, 1, 2))).float()
        return t / 127.5 - 1.0

    def get_state(self) -> dict:
        return self.rng.bit_generator.state

    def set_state(self, state: dict) -> None:
        self.rng.bit_generator.state = state


def load_datasets(cfg):
    """Build independent photo and cartoon streams from a training config."""
    photos = ImageStream(cfg.photo_dir, cfg.crop, np.random.default_rng([cfg.seed, 0]), "photos")
    cartoons = ImageStream(cfg.cartoon_dir, cfg.crop, np.random.default_rng([cfg.seed, 1]), "cartoons")
    return photos, cartoons
