"""Multi-scale feature models built from a frozen VGG-19 prefix.

Tap indices follow the 1-based layer count of the "normalised VGG" layout
common to AdaIN encoders, where the network starts with a 1x1 colour conv and
every 3x3 conv is preceded by an explicit padding layer::

    1 conv1x1  2 pad  3 conv1_1  4 relu1_1 | 5 pad  6 conv1_2  7 relu1_2
    8 pool  9 pad  10 conv2_1  11 relu2_1 | 12 pad ... 18 relu3_1 |
    19 pad ... 31 relu4_1

so taps 4/11/18/31 are relu1_1, relu2_1, relu3_1 and relu4_1: 64/128/256/512
channels at strides 1/2/4/8. Here the same activations are produced by the
torchvision-style VGG-19 (zero padding inside each conv), so pretrained
classifier weights load without change.
"""

from dataclasses import dataclass
from typing import Dict, Iterator, NamedTuple, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ScaleError, SizingError

EPS = 1e-5
SCALES: Tuple[int, ...] = (4, 11, 18, 31)
CHANNELS = {4: 64, 11: 128, 18: 256, 31: 512}
STRIDES = {4: 1, 11: 2, 18: 4, 31: 8}
TAP_ACTIVATIONS = {4: "relu1_1", 11: "relu2_1", 18: "relu3_1", 31: "relu4_1"}

# (name, in_ch, out_ch); "pool" entries are 2x2 max pools
VGG_LAYERS = (
    ("conv1_1", 3, 64),
    ("conv1_2", 64, 64),
    ("pool",),
    ("conv2_1", 64, 128),
    ("conv2_2", 128, 128),
    ("pool",),
    ("conv3_1", 128, 256),
    ("conv3_2", 256, 256),
    ("conv3_3", 256, 256),
    ("conv3_4", 256, 256),
    ("pool",),
    ("conv4_1", 256, 512),
)
# index of each conv inside torchvision's ``vgg19().features``
TORCHVISION_INDEX = {
    "conv1_1": 0, "conv1_2": 2, "conv2_1": 5, "conv2_2": 7, "conv3_1": 10,
    "conv3_2": 12, "conv3_3": 14, "conv3_4": 16, "conv4_1": 19,
}
# which conv's activation closes each tap
_TAP_AFTER = {"conv1_1": 4, "conv2_1": 11, "conv3_1": 18, "conv4_1": 31}

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


class ChannelStats(NamedTuple):
    """Per-item, per-channel mean and eps-floored std, each shaped (batch, ch)."""

    mu: torch.Tensor
    sigma: torch.Tensor


def channel_stats(f: torch.Tensor, eps: float = EPS) -> ChannelStats:
    if f.dim() != 4 or f.shape[2] * f.shape[3] == 0:
        raise SizingError(f"expected a non-empty (batch, ch, h, w) map, got {tuple(f.shape)}")
    var, mu = torch.var_mean(f, dim=(2, 3), unbiased=False)
    return ChannelStats(mu, torch.sqrt(var + eps))


def normalize(f: torch.Tensor, eps: float = EPS) -> torch.Tensor:
    """Remove per-channel mean and divide by the eps-floored std."""
    mu, sigma = channel_stats(f, eps)
    return (f - mu[..., None, None]) / sigma[..., None, None]


@dataclass
class FeatureModel:
    """The four tapped maps of one image batch, keyed by tap index."""

    maps: Dict[int, torch.Tensor]

    def __getitem__(self, scale: int) -> torch.Tensor:
        try:
            return self.maps[scale]
        except KeyError:
            raise ScaleError(f"feature model has no map for scale {scale}") from None

    def __iter__(self) -> Iterator[int]:
        return iter(SCALES)

    def items(self):
        return [(s, self[s]) for s in SCALES]

    def detach(self) -> "FeatureModel":
        return FeatureModel({s: f.detach() for s, f in self.maps.items()})

    def validate(self) -> None:
        """Check completeness, channel counts and the factor-2 spatial ladder."""
        for s in SCALES:
            if s not in self.maps:
                raise ScaleError(f"feature model is missing scale {s}")
            if self.maps[s].shape[1] != CHANNELS[s]:
                raise ScaleError(
                    f"scale {s} has {self.maps[s].shape[1]} channels, expected {CHANNELS[s]}")
        h, w = self.maps[4].shape[2:]
        for s in SCALES[1:]:
            k = STRIDES[s]
            if tuple(self.maps[s].shape[2:]) != (h // k, w // k) or h % k or w % k:
                raise ScaleError(
                    f"scale {s} has spatial size {tuple(self.maps[s].shape[2:])}, "
                    f"inconsistent with {h}x{w} at scale 4")


def check_image_size(img: torch.Tensor, multiple: int = 8) -> None:
    if img.dim() != 4 or img.shape[1] != 3:
        raise SizingError(f"expected a (batch, 3, h, w) image, got {tuple(img.shape)}")
    for name, n in (("height", img.shape[2]), ("width", img.shape[3])):
        if n < 8:
            raise SizingError(f"image {name} {n} is below the minimum of 8")
        if n % multiple:
            raise SizingError(f"image {name} {n} is not divisible by {multiple}")


class ModelingNetwork(nn.Module):
    """VGG-19 convolutional prefix through relu4_1, permanently frozen.

    Accepts images in [-1, 1] and applies the ImageNet normalisation the
    classifier weights were trained with.
    """

    architecture = "vgg19-prefix-relu4_1"

    def __init__(self, seed: int = 0):
        super().__init__()
        self.convs = nn.ModuleDict()
        for layer in VGG_LAYERS:
            if layer[0] != "pool":
                name, cin, cout = layer
                self.convs[name] = nn.Conv2d(cin, cout, 3, padding=1)
        self.register_buffer("mean", torch.tensor(IMAGENET_MEAN).view(1, 3, 1, 1))
        self.register_buffer("std", torch.tensor(IMAGENET_STD).view(1, 3, 1, 1))
        self.source_checksum = "random-init"
        self._random_init(seed)
        self.requires_grad_(False)
        self.eval()

    def _random_init(self, seed: int) -> None:
        # stand-in weights when no converted classifier is available
        gen = torch.Generator().manual_seed(seed)
        for conv in self.convs.values():
            fan_out = conv.out_channels * 9
            with torch.no_grad():
                conv.weight.normal_(0.0, (2.0 / fan_out) ** 0.5, generator=gen)
                conv.bias.zero_()

    def train(self, mode: bool = True):
        # never leaves eval mode
        return super().train(False)

    def forward(self, img: torch.Tensor) -> FeatureModel:
        x = ((img + 1) * 0.5 - self.mean.to(img.dtype)) / self.std.to(img.dtype)
        maps = {}
        for layer in VGG_LAYERS:
            if layer[0] == "pool":
                x = F.max_pool2d(x, 2)
                continue
            x = F.relu(self.convs[layer[0]](x))
            if layer[0] in _TAP_AFTER:
                maps[_TAP_AFTER[layer[0]]] = x
        return FeatureModel(maps)

    def load_torchvision_state_dict(self, state: Dict[str, torch.Tensor], checksum: str = "") -> None:
        """Copy conv weights from a torchvision ``vgg19`` state dict."""
        with torch.no_grad():
            for name, idx in TORCHVISION_INDEX.items():
                for kind in ("weight", "bias"):
                    src = state[f"features.{idx}.{kind}"]
                    dst = getattr(self.convs[name], kind)
                    if src.shape != dst.shape:
                        raise ValueError(f"features.{idx}.{kind}: shape {tuple(src.shape)} "
                                         f"!= expected {tuple(dst.shape)}")
                    dst.copy_(src)
        self.source_checksum = checksum or "unknown"


def extract_feature_model(img: torch.Tensor, net: ModelingNetwork) -> FeatureModel:
    check_image_size(img)
    return net(img)
