"""Exact dependency intervals for the encoder, gates and decoder.

Every operation in the pipeline is a 3x3 stride-1 conv, a 2x2 max pool or a
x2 nearest upsample, so the set of input rows (or columns) that can affect an
output index range is an interval obtained by walking the graph backwards.
The tiled renderer uses these to size its context margins.
"""

from typing import Dict, Tuple

from .features import SCALES, STRIDES, VGG_LAYERS

Interval = Tuple[int, int]


def _conv(iv: Interval, k: int = 3) -> Interval:
    return iv[0] - k // 2, iv[1] + k // 2


def _pool(iv: Interval) -> Interval:
    return 2 * iv[0], 2 * iv[1] + 1


def _up(iv: Interval) -> Interval:
    return iv[0] // 2, iv[1] // 2


def _union(a: Interval, b: Interval) -> Interval:
    return min(a[0], b[0]), max(a[1], b[1])


def _encoder_chains() -> Dict[int, list]:
    taps = {"conv1_1": 4, "conv2_1": 11, "conv3_1": 18, "conv4_1": 31}
    chains, ops = {}, []
    for layer in VGG_LAYERS:
        ops.append("pool" if layer[0] == "pool" else "conv")
        if layer[0] in taps:
            chains[taps[layer[0]]] = list(ops)
    return chains


_CHAINS = _encoder_chains()


def encoder_interval(scale: int, iv: Interval) -> Interval:
    """Image rows that feed tap ``scale`` indices ``iv``."""
    for op in reversed(_CHAINS[scale]):
        iv = _pool(iv) if op == "pool" else _conv(iv)
    return iv


def decoder_intervals(iv: Interval) -> Dict[int, Interval]:
    """Feature-model indices, per scale, that feed output rows ``iv``."""
    deps = {}
    iv = _conv(_conv(iv))          # head, block4
    deps[4] = _conv(iv)            # block3 skip path
    iv = _conv(iv)                 # block3 upsampling path, before the x2
    iv = _up(iv)
    deps[11] = _conv(iv)
    iv = _up(_conv(iv))
    deps[18] = _conv(iv)
    deps[31] = _up(_conv(iv))
    return deps


def pipeline_interval(iv: Interval) -> Interval:
    """Image rows that feed output rows ``iv`` through encoder and decoder."""
    out = None
    for s, fiv in decoder_intervals(iv).items():
        img = encoder_interval(s, fiv)
        out = img if out is None else _union(out, img)
    return out


def gate_interval(scale: int, iv: Interval) -> Interval:
    """Image rows that feed the photo gate extractor at ``scale`` indices ``iv``."""
    return encoder_interval(scale, _conv(_conv(iv)))


def _margin(fn, block: int = 8, origin: int = 1024) -> int:
    lo, hi = fn((origin, origin + block - 1))
    return max(origin - lo, hi - (origin + block - 1))


def render_margin() -> int:
    """Context (image pixels) an aligned 8-pixel block needs for exact output."""
    return _margin(pipeline_interval)


def stats_margin() -> int:
    """Context needed for exact features and gate responses over an aligned block."""
    worst = 0
    for s in SCALES:
        k = STRIDES[s]
        worst = max(worst, _margin(lambda iv: gate_interval(s, (iv[0] // k, iv[1] // k))))
    return worst


def receptive_radius() -> int:
    """Largest distance from any output pixel to an input pixel that affects it."""
    worst = 0
    for x in range(1024, 1032):
        lo, hi = pipeline_interval((x, x))
        worst = max(worst, x - lo, hi - x)
    return worst


RECEPTIVE_RADIUS = receptive_radius()
TILE_MARGIN = max(render_margin(), stats_margin())
