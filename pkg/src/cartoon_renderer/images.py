"""Image file <-> tensor conversion.

Tensors are (batch, 3, h, w) float in [-1, 1].  Files are 8-bit RGB; the
[-1, 1] -> [0, 255] map is affine with round-half-to-even.
"""

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError

from .errors import DataError

EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp", ".webp")


def read_rgb(path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"))
    except (OSError, UnidentifiedImageError) as e:
        raise DataError(f"cannot decode image {path}: {e}") from None


def array_to_tensor(a: np.ndarray) -> torch.Tensor:
    t = torch.from_numpy(np.ascontiguousarray(a.transpose(2, 0, 1))).float()
    return (t / 127.5 - 1.0).unsqueeze(0)


def tensor_to_array(t: torch.Tensor) -> np.ndarray:
    if t.dim() == 4:
        t = t[0]
    a = (t.detach().cpu().double().numpy().transpose(1, 2, 0) + 1.0) * 127.5
    return np.clip(np.rint(a), 0, 255).astype(np.uint8)


def read_image(path) -> torch.Tensor:
    return array_to_tensor(read_rgb(path))


def write_image(path, t: torch.Tensor) -> None:
    Image.fromarray(tensor_to_array(t), mode="RGB").save(path, format="PNG")
