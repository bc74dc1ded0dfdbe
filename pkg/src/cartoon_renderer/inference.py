"""Cartoonization, reconstruction and tiled high-resolution rendering."""

import math
from dataclasses import dataclass
from typing import Iterator, Tuple

import torch
import torch.nn.functional as F

from .checkpoint import load_modules, read_checkpoint
from .coordination import Coordinator, apply_stats, blend_stats
from .errors import SizingError
from .features import EPS, SCALES, STRIDES, ChannelStats, FeatureModel, ModelingNetwork, channel_stats
from .receptive import RECEPTIVE_RADIUS, TILE_MARGIN
from .rendering import RenderingNetwork

REFERENCE_SIDE = 256


@dataclass
class Pipeline:
    modeling: ModelingNetwork
    coordinator: Coordinator
    renderer: RenderingNetwork

    def eval(self) -> "Pipeline":
        self.modeling.eval()
        self.coordinator.eval()
        self.renderer.eval()
        return self


def load_pipeline(path) -> Pipeline:
    tensors, meta = read_checkpoint(path)
    pipe = Pipeline(ModelingNetwork(), Coordinator(), RenderingNetwork())
    load_modules(tensors, pipe.modeling, pipe.coordinator, pipe.renderer)
    pipe.modeling.source_checksum = meta.get("source_checksum", "unknown")
    return pipe.eval()


def pad_to_multiple(img: torch.Tensor, multiple: int = 8) -> Tuple[torch.Tensor, Tuple[int, int]]:
    """Reflection-pad bottom/right up to a multiple; returns the original (h, w)."""
    h, w = img.shape[2:]
    if min(h, w) < 8:
        raise SizingError(f"image {h}x{w} is below the 8x8 minimum")
    ph, pw = (-h) % multiple, (-w) % multiple
    if ph or pw:
        img = F.pad(img, (0, pw, 0, ph), mode="reflect")
    return img, (h, w)


def prepare_reference(ref: torch.Tensor, side: int = REFERENCE_SIDE) -> torch.Tensor:
    """Resize so the short side is ``side`` pixels, then pad to a multiple of 8."""
    h, w = ref.shape[2:]
    scale = side / min(h, w)
    size = (max(8, round(h * scale)), max(8, round(w * scale)))
    if size != (h, w):
        ref = F.interpolate(ref, size=size, mode="bilinear", align_corners=False, antialias=True)
    return pad_to_multiple(ref)[0]


@torch.no_grad()
def cartoonize(photo: torch.Tensor, cartoon_ref: torch.Tensor, pipe: Pipeline) -> torch.Tensor:
    x, (h, w) = pad_to_multiple(photo)
    ref = prepare_reference(cartoon_ref)
    psi_y = pipe.coordinator(pipe.modeling(x), pipe.modeling(ref))
    return pipe.renderer(psi_y)[:, :, :h, :w]


@torch.no_grad()
def reconstruct(img: torch.Tensor, pipe: Pipeline) -> torch.Tensor:
    x, (h, w) = pad_to_multiple(img)
    return pipe.renderer(pipe.modeling(x))[:, :, :h, :w]


# -- tiled rendering ----------------------------------------------------------

class RunningChannelStats:
    """Streaming per-channel mean / variance with pairwise (Chan) merging in float64."""

    def __init__(self):
        self.n = 0
        self.mean = None
        self.m2 = None

    def update(self, f: torch.Tensor) -> None:
        f = f.double()
        nb = f.shape[2] * f.shape[3]
        if nb == 0:
            return
        var_b, mean_b = torch.var_mean(f, dim=(2, 3), unbiased=False)
        m2_b = var_b * nb
        if self.n == 0:
            self.n, self.mean, self.m2 = nb, mean_b, m2_b
            return
        n = self.n + nb
        delta = mean_b - self.mean
        self.mean = self.mean + delta * (nb / n)
        self.m2 = self.m2 + m2_b + delta * delta * (self.n * nb / n)
        self.n = n

    def stats(self, eps: float = EPS) -> ChannelStats:
        return ChannelStats(self.mean, torch.sqrt(self.m2 / self.n + eps))


@dataclass
class Tile:
    core: Tuple[int, int, int, int]      # y0, y1, x0, x1 of the pixels this tile owns
    window: Tuple[int, int, int, int]    # region actually fed to the network

    def core_in_window(self, stride: int = 1):
        y0, y1, x0, x1 = self.core
        wy, wx = self.window[0], self.window[2]
        return (slice((y0 - wy) // stride, (y1 - wy) // stride),
                slice((x0 - wx) // stride, (x1 - wx) // stride))


def tile_grid(h: int, w: int, tile: int, context: int) -> Iterator[Tile]:
    """Partition an h x w image (multiples of 8) into cores with context windows."""
    for y0 in range(0, h, tile):
        for x0 in range(0, w, tile):
            y1, x1 = min(y0 + tile, h), min(x0 + tile, w)
            yield Tile((y0, y1, x0, x1),
                       (max(0, y0 - context), min(h, y1 + context),
                        max(0, x0 - context), min(w, x1 + context)))


def _window(img, t: Tile):
    y0, y1, x0, x1 = t.window
    return img[:, :, y0:y1, x0:x1]


def _check_tiling(tile: int, overlap: int) -> int:
    if tile % 8 or tile < 8:
        raise SizingError(f"tile {tile} must be a positive multiple of 8")
    need = max(RECEPTIVE_RADIUS, TILE_MARGIN)
    if overlap < need:
        raise SizingError(f"overlap {overlap} is below the receptive-field radius {need}; "
                          "tiles would not be seam-free")
    return 8 * math.ceil(overlap / 8)


@torch.no_grad()
def global_photo_statistics(x: torch.Tensor, pipe: Pipeline, tile: int, context: int):
    """Pass 1: exact channel statistics and pooled gate features over all tiles.

    Returns ({scale: ChannelStats}, {scale: pooled theta_p response}).
    """
    running = {s: RunningChannelStats() for s in SCALES}
    pooled_sum = {s: 0.0 for s in SCALES}
    for t in tile_grid(x.shape[2], x.shape[3], tile, context):
        psi = pipe.modeling(_window(x, t))
        for s in SCALES:
            ys, xs = t.core_in_window(STRIDES[s])
            running[s].update(psi[s][:, :, ys, xs])
            theta = pipe.coordinator.gate(s).theta_p(psi[s])[:, :, ys, xs]
            pooled_sum[s] = pooled_sum[s] + theta.double().sum(dim=(2, 3))
    stats = {s: running[s].stats() for s in SCALES}
    pooled = {s: pooled_sum[s] / running[s].n for s in SCALES}
    return stats, pooled


@torch.no_grad()
def cartoonize_highres(photo: torch.Tensor, cartoon_ref: torch.Tensor, pipe: Pipeline,
                       tile: int = 512, overlap: int = 64) -> torch.Tensor:
    """Two-pass tiled cartoonization with memory bounded by the tile size.

    Pass 1 streams the photo tile by tile to get exact global channel
    statistics and pooled gate responses; the blend weights and target
    statistics are then fixed, which makes coordination a per-channel affine
    map.  Pass 2 renders each tile with that map and keeps only the tile's own
    pixels; every kept pixel has its full receptive field inside the window.
    """
    context = _check_tiling(tile, overlap)
    x, (h, w) = pad_to_multiple(photo)
    dtype = x.dtype
    stats_p, pooled_p = global_photo_statistics(x, pipe, tile, context)

    ref = prepare_reference(cartoon_ref)
    psi_c = pipe.modeling(ref)
    targets, own = {}, {}
    for s in SCALES:
        gate = pipe.coordinator.gate(s)
        sc = channel_stats(psi_c[s])
        omega = gate.weights_from_pooled(pooled_p[s].to(dtype), gate.pooled_cartoon(psi_c[s]))
        sp = ChannelStats(stats_p[s].mu.to(dtype), stats_p[s].sigma.to(dtype))
        own[s] = sp
        targets[s] = blend_stats(sp, sc, omega)

    out = x.new_empty(x.shape)
    for t in tile_grid(x.shape[2], x.shape[3], tile, context):
        psi = pipe.modeling(_window(x, t))
        psi_y = FeatureModel({s: apply_stats(psi[s], own[s], targets[s]) for s in SCALES})
        y = pipe.renderer(psi_y)
        ys, xs = t.core_in_window()
        y0, y1, x0, x1 = t.core
        out[:, :, y0:y1, x0:x1] = y[:, :, ys, xs]
    return out[:, :, :h, :w]
