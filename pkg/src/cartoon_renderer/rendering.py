"""Decoder from a feature model back to image space.

Three two-path blocks climb from stride 8 to stride 1, each fusing the
upsampled running map with the skip map of the next scale (t18, t11, t4).
The fourth block has no skip and keeps full resolution: t31 already sits at
stride 8, so three x2 steps are all that is needed to return to the input
size.
"""

from typing import Optional

import torch
import torch.nn as nn
import torch.nn.functional as F

from .coordination import pad_reflect
from .features import FeatureModel

# (input ch, skip ch, per-path ch, upsample factor); block outputs 256/128/64/64
BLOCK_SPECS = (
    (512, 256, 128, 2),
    (256, 128, 64, 2),
    (128, 64, 32, 2),
    (64, None, 64, 1),
)
SKIP_SCALES = (18, 11, 4, None)


class RenderBlock(nn.Module):
    def __init__(self, in_ch: int, skip_ch: Optional[int], path_ch: int, upsample: int = 2):
        super().__init__()
        self.upsample = upsample
        self.up_conv = nn.Conv2d(in_ch, path_ch, 3)
        self.skip_conv = nn.Conv2d(skip_ch, path_ch, 3) if skip_ch else None
        self.out_channels = path_ch * (2 if skip_ch else 1)

    def forward(self, x: torch.Tensor, skip: Optional[torch.Tensor] = None) -> torch.Tensor:
        if self.upsample > 1:
            x = F.interpolate(x, scale_factor=self.upsample, mode="nearest")
        x = F.relu(self.up_conv(pad_reflect(x)))
        if self.skip_conv is None:
            return x
        s = F.relu(self.skip_conv(pad_reflect(skip)))
        # the fused map goes through one more activation
        return F.relu(torch.cat([x, s], dim=1))


class RenderingNetwork(nn.Module):
    def __init__(self):
        super().__init__()
        for i, spec in enumerate(BLOCK_SPECS, start=1):
            self.add_module(f"block{i}", RenderBlock(*spec))
        self.head = nn.Conv2d(BLOCK_SPECS[-1][2], 3, 3)

    def forward(self, psi: FeatureModel) -> torch.Tensor:
        psi.validate()
        x = psi[31]
        for i, skip_scale in enumerate(SKIP_SCALES, start=1):
            skip = psi[skip_scale] if skip_scale else None
            x = getattr(self, f"block{i}")(x, skip)
        return torch.tanh(self.head(pad_reflect(x)))


def render(psi: FeatureModel, net: RenderingNetwork) -> torch.Tensor:
    return net(psi)
