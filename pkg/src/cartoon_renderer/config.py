"""Training configuration.

Config files are flat ``key = value`` INI documents with a single
``[train]`` section::

    [train]
    photo_dir = data/photos
    cartoon_dir = data/cartoons
    crop = 256
    batch_size = 4
    epochs = 200
    lr_g = 0.0002
    lr_d = 0.0002
    beta1 = 0.9
    beta2 = 0.999
    seed = 0
    w_style = 20
    w_content = 1
    w_reconstruction = 0.0001
    w_adversarial = 1
    checkpoint_every = 1000
    out_dir = runs/default
    device = cpu
    vgg_weights =              ; optional converted VGG-19 archive
    steps_per_epoch =          ; optional, default max(#photos, #cartoons) // batch_size
    max_steps =                ; optional hard cap on total steps

Unknown keys are rejected.  The environment variables ``CARTOON_PHOTO_DIR``,
``CARTOON_CARTOON_DIR`` and ``CARTOON_DEVICE`` override the file.
"""

import configparser
import dataclasses
import os
from dataclasses import dataclass
from typing import Optional

from .losses import LossWeights

ENV_OVERRIDES = {
    "CARTOON_PHOTO_DIR": "photo_dir",
    "CARTOON_CARTOON_DIR": "cartoon_dir",
    "CARTOON_DEVICE": "device",
}


@dataclass
class TrainingConfig:
    photo_dir: str = ""
    cartoon_dir: str = ""
    crop: int = 256
    batch_size: int = 4
    epochs: int = 200
    lr_g: float = 2e-4
    lr_d: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.999
    seed: int = 0
    w_style: float = 20.0
    w_content: float = 1.0
    w_reconstruction: float = 0.0001
    w_adversarial: float = 1.0
    checkpoint_every: int = 1000
    out_dir: str = "runs/default"
    device: str = "cpu"
    vgg_weights: Optional[str] = None
    steps_per_epoch: Optional[int] = None
    max_steps: Optional[int] = None

    def __post_init__(self):
        for key in ("photo_dir", "cartoon_dir", "out_dir", "vgg_weights"):
            value = getattr(self, key)
            if value is not None:
                setattr(self, key, os.fspath(value))
        if self.crop % 8 or self.crop < 8:
            raise ValueError(f"crop {self.crop} must be a positive multiple of 8")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.checkpoint_every < 1:
            raise ValueError("checkpoint_every must be >= 1")
        self.weights  # validates non-negativity

    @property
    def weights(self) -> LossWeights:
        return LossWeights(style=self.w_style, content=self.w_content,
                           reconstruction=self.w_reconstruction, adversarial=self.w_adversarial)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**d)

    @classmethod
    def from_file(cls, path, env=None) -> "TrainingConfig":
        parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        if not parser.read(path):
            raise FileNotFoundError(f"config file {path} not found")
        if not parser.has_section("train"):
            raise ValueError(f"config file {path} has no [train] section")
        raw = {k: v for k, v in parser.items("train") if v.strip() != ""}
        env = os.environ if env is None else env
        for var, key in ENV_OVERRIDES.items():
            if env.get(var):
                raw[key] = env[var]
        return cls.from_dict(_coerce(raw))


def _coerce(raw: dict) -> dict:
    types = {f.name: f.type for f in dataclasses.fields(TrainingConfig)}
    out = {}
    for k, v in raw.items():
        if k not in types:
            raise ValueError(f"unknown config key '{k}'")
        t = types[k]
        if t in (int, "int", Optional[int], "Optional[int]"):
            out[k] = int(v)
        elif t in (float, "float"):
            out[k] = float(v)
        else:
            out[k] = v
    return out
