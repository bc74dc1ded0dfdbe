"""Multi-scale patch discriminator (three scales, raw logits)."""

from typing import List

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import SizingError

MIN_SIZE = 64
WIDTHS = (64, 128, 256, 512)


class PatchDiscriminator(nn.Module):
    def __init__(self, in_ch: int = 3, widths=WIDTHS):
        super().__init__()
        layers = []
        for w in widths:
            layers += [nn.ReflectionPad2d(1), nn.Conv2d(in_ch, w, 4, stride=2), nn.LeakyReLU(0.2)]
            in_ch = w
        layers.append(nn.Conv2d(in_ch, 1, 1))
        self.net = nn.Sequential(*layers)

    def forward(self, x):
        return self.net(x)


class MultiScaleDiscriminator(nn.Module):
    def __init__(self, n_scales: int = 3):
        super().__init__()
        self.n_scales = n_scales
        for k in range(n_scales):
            self.add_module(f"scale{k}", PatchDiscriminator())

    def forward(self, img: torch.Tensor) -> List[torch.Tensor]:
        if min(img.shape[2], img.shape[3]) < MIN_SIZE:
            raise SizingError(
                f"discriminator input {img.shape[2]}x{img.shape[3]} is below {MIN_SIZE}x{MIN_SIZE}")
        logits = []
        for k in range(self.n_scales):
            logits.append(getattr(self, f"scale{k}")(img))
            img = F.avg_pool2d(img, 3, stride=2, padding=1, count_include_pad=False)
        return logits


def discriminate(img: torch.Tensor, d: MultiScaleDiscriminator) -> List[torch.Tensor]:
    return d(img)
