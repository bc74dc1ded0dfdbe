"""Training objectives: content, style, adversarial and reconstruction.

L1/L2 terms are averaged over elements within a scale and summed across
scales, so the default weights do not depend on crop size.
"""

import math
from dataclasses import asdict, dataclass, fields
from typing import Sequence

import torch
import torch.nn.functional as F

from .errors import ChannelMismatchError, NonFiniteLossError, SizingError
from .features import SCALES, FeatureModel, channel_stats, normalize


@dataclass
class LossWeights:
    style: float = 20.0
    content: float = 1.0
    reconstruction: float = 0.0001
    adversarial: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"loss weight '{f.name}' must be >= 0")


@dataclass
class LossReport:
    content: float = 0.0
    style: float = 0.0
    adversarial_g: float = 0.0
    adversarial_d: float = 0.0
    reconstruction: float = 0.0
    total: float = 0.0

    FIELDS = ("content", "style", "adversarial_g", "adversarial_d", "reconstruction", "total")

    def as_dict(self):
        return asdict(self)


def content_loss(psi_gen: FeatureModel, psi_photo: FeatureModel) -> torch.Tensor:
    total = 0.0
    for s in SCALES:
        g, p = psi_gen[s], psi_photo[s]
        if g.shape != p.shape:
            raise SizingError(f"content loss: scale {s} shapes differ, "
                              f"{tuple(g.shape)} vs {tuple(p.shape)}")
        total = total + (normalize(g) - normalize(p)).abs().mean()
    return total


def style_loss(psi_gen: FeatureModel, psi_style: FeatureModel) -> torch.Tensor:
    """Euclidean distance between channel means plus between channel stds.

    Norms are taken over the channel vector of each batch item, then averaged
    over the batch.
    """
    total = 0.0
    for s in SCALES:
        g, t = psi_gen[s], psi_style[s]
        if g.shape[1] != t.shape[1]:
            raise ChannelMismatchError(f"style loss: scale {s} has {g.shape[1]} vs {t.shape[1]} channels")
        sg, st = channel_stats(g), channel_stats(t)
        total = total + (sg.sigma - st.sigma).norm(dim=1).mean() + (sg.mu - st.mu).norm(dim=1).mean()
    return total


def adversarial_loss_d(real_logits: Sequence[torch.Tensor], fake_logits: Sequence[torch.Tensor]) -> torch.Tensor:
    # -log sigmoid(r) = softplus(-r); -log(1 - sigmoid(f)) = softplus(f)
    total = 0.0
    for r, f in zip(real_logits, fake_logits):
        total = total + F.softplus(-r).mean() + F.softplus(f).mean()
    return total


def adversarial_loss_g(fake_logits: Sequence[torch.Tensor]) -> torch.Tensor:
    """Non-saturating generator loss, -log D(fake)."""
    total = 0.0
    for f in fake_logits:
        total = total + F.softplus(-f).mean()
    return total


def reconstruction_loss(xp_rec, xp, xc_rec, xc) -> torch.Tensor:
    for name, a, b in (("photo", xp_rec, xp), ("cartoon", xc_rec, xc)):
        if a.shape != b.shape:
            raise SizingError(f"{name} reconstruction shape {tuple(a.shape)} != {tuple(b.shape)}")
    return F.mse_loss(xp_rec, xp) + F.mse_loss(xc_rec, xc)


def total_generator_loss(style, content, reconstruction, adversarial_g, w: LossWeights = None):
    """Weighted sum of the generator-side terms; works on floats or tensors."""
    w = w or LossWeights()
    terms = {"style": style, "content": content,
             "reconstruction": reconstruction, "adversarial_g": adversarial_g}
    for name, value in terms.items():
        v = float(value.detach()) if isinstance(value, torch.Tensor) else float(value)
        if not math.isfinite(v):
            raise NonFiniteLossError(name, v)
    return (w.style * style + w.content * content
            + w.reconstruction * reconstruction + w.adversarial * adversarial_g)
