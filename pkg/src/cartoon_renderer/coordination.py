"""Soft-AdaIN feature coordination.

Each of the four scales owns a gate network that looks at the photo and
cartoon maps and emits channel-wise blend weights ``omega`` in (0, 1).  The
photo map is then whitened with its own statistics and re-coloured with
``omega``-blended statistics::

    sigma' = sigma_c * omega + sigma_p * (1 - omega)
    mu'    = mu_c    * omega + mu_p    * (1 - omega)
    out    = sigma' * (x_p - mu_p) / sigma_p + mu'
"""

from typing import NamedTuple, Optional, Union

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ChannelMismatchError
from .features import CHANNELS, SCALES, ChannelStats, FeatureModel, channel_stats

Omega = Union[None, float, torch.Tensor]


class BlendedStats(NamedTuple):
    sigma_prime: torch.Tensor
    mu_prime: torch.Tensor


def pad_reflect(x: torch.Tensor, pad: int = 1) -> torch.Tensor:
    """Reflection padding, falling back to replication on maps too small to reflect."""
    if min(x.shape[2], x.shape[3]) > pad:
        return F.pad(x, (pad,) * 4, mode="reflect")
    return F.pad(x, (pad,) * 4, mode="replicate")


class MiniConvNet(nn.Module):
    """conv3x3 -> ReLU -> conv3x3, reflection padded, channel count preserved."""

    def __init__(self, ch: int):
        super().__init__()
        self.conv1 = nn.Conv2d(ch, ch, 3)
        self.conv2 = nn.Conv2d(ch, ch, 3)

    def forward(self, x):
        x = F.relu(self.conv1(pad_reflect(x)))
        return self.conv2(pad_reflect(x))


class GateNetwork(nn.Module):
    def __init__(self, ch: int):
        super().__init__()
        self.ch = ch
        self.theta_p = MiniConvNet(ch)
        self.theta_c = MiniConvNet(ch)
        self.fc1 = nn.Linear(2 * ch, ch)
        self.fc2 = nn.Linear(ch, ch)
        nn.init.zeros_(self.fc2.bias)

    def pooled_photo(self, xp: torch.Tensor) -> torch.Tensor:
        return self.theta_p(xp).mean(dim=(2, 3))

    def pooled_cartoon(self, xc: torch.Tensor) -> torch.Tensor:
        return self.theta_c(xc).mean(dim=(2, 3))

    def weights_from_pooled(self, pooled_p: torch.Tensor, pooled_c: torch.Tensor) -> torch.Tensor:
        n = max(pooled_p.shape[0], pooled_c.shape[0])
        pooled = torch.cat([pooled_p.expand(n, -1), pooled_c.expand(n, -1)], dim=1)
        h = F.relu(self.fc1(pooled))
        return torch.sigmoid(self.fc2(h))

    def forward(self, xp: torch.Tensor, xc: torch.Tensor) -> torch.Tensor:
        _check_channels(xp, xc, self.ch)
        return self.weights_from_pooled(self.pooled_photo(xp), self.pooled_cartoon(xc))


def _check_channels(xp, xc, ch=None):
    if xp.shape[1] != xc.shape[1] or (ch is not None and xp.shape[1] != ch):
        expected = f", gate expects {ch}" if ch is not None else ""
        raise ChannelMismatchError(
            f"channel mismatch: content has {xp.shape[1]}, style has {xc.shape[1]}{expected}")


def gate_weights(xp: torch.Tensor, xc: torch.Tensor, g: GateNetwork) -> torch.Tensor:
    return g(xp, xc)


def blend_stats(sp: ChannelStats, sc: ChannelStats, omega: torch.Tensor) -> BlendedStats:
    if sp.mu.shape[-1] != sc.mu.shape[-1] or omega.shape[-1] != sp.mu.shape[-1]:
        raise ChannelMismatchError(
            f"length mismatch: photo {sp.mu.shape[-1]}, cartoon {sc.mu.shape[-1]}, "
            f"omega {omega.shape[-1]}")
    return BlendedStats(
        sc.sigma * omega + sp.sigma * (1.0 - omega),
        sc.mu * omega + sp.mu * (1.0 - omega),
    )


def apply_stats(x: torch.Tensor, own: ChannelStats, target: BlendedStats) -> torch.Tensor:
    """Whiten ``x`` with ``own`` statistics and re-colour with ``target``."""
    mu, sigma = own.mu[..., None, None], own.sigma[..., None, None]
    return target.sigma_prime[..., None, None] * (x - mu) / sigma + target.mu_prime[..., None, None]


def adain(content: torch.Tensor, style: torch.Tensor) -> torch.Tensor:
    _check_channels(content, style)
    sc = channel_stats(style)
    return apply_stats(content, channel_stats(content), BlendedStats(sc.sigma, sc.mu))


def _resolve_omega(omega: Omega, xp, xc, g) -> torch.Tensor:
    if omega is None:
        return g(xp, xc)
    if isinstance(omega, torch.Tensor):
        return omega.to(xp.dtype).expand(xp.shape[0], xp.shape[1])
    return xp.new_full((xp.shape[0], xp.shape[1]), float(omega))


def soft_adain(xp: torch.Tensor, xc: torch.Tensor, g: GateNetwork, omega: Omega = None) -> torch.Tensor:
    """Soft-AdaIN of photo map ``xp`` towards cartoon map ``xc``.

    ``omega`` overrides the gate output (a scalar or a (batch, ch) tensor);
    pass 1.0 to recover plain AdaIN or 0.0 for the identity.
    """
    _check_channels(xp, xc, g.ch)
    sp, sc = channel_stats(xp), channel_stats(xc)
    w = _resolve_omega(omega, xp, xc, g)
    return apply_stats(xp, sp, blend_stats(sp, sc, w))


class Coordinator(nn.Module):
    """Four Soft-AdaIN gates, one per tapped scale."""

    def __init__(self):
        super().__init__()
        for s in SCALES:
            self.add_module(f"block{s}", GateNetwork(CHANNELS[s]))

    def gate(self, scale: int) -> GateNetwork:
        return getattr(self, f"block{scale}")

    def forward(self, psi_p: FeatureModel, psi_c: FeatureModel, omega: Omega = None) -> FeatureModel:
        return FeatureModel({
            s: soft_adain(psi_p[s], psi_c[s], self.gate(s), omega) for s in SCALES
        })


def coordinate(psi_p: FeatureModel, psi_c: FeatureModel, c: Coordinator,
               omega: Optional[float] = None) -> FeatureModel:
    return c(psi_p, psi_c, omega)
