"""Self-checks run by ``cartoon-renderer check``: reductions, gradients, shape ladder."""

from typing import Callable, List, Tuple

import torch

from .coordination import Coordinator, GateNetwork, adain, blend_stats, soft_adain
from .features import CHANNELS, SCALES, STRIDES, FeatureModel, ModelingNetwork, channel_stats
from .losses import content_loss, style_loss
from .rendering import RenderBlock, RenderingNetwork

CheckResult = Tuple[str, bool, str]


def _maps(seed, shape, scale=2.0, shift=0.5):
    g = torch.Generator().manual_seed(seed)
    return torch.randn(*shape, generator=g, dtype=torch.float64) * scale + shift


def check_reductions() -> CheckResult:
    xp, xc = _maps(0, (2, 8, 9, 7)), _maps(1, (2, 8, 5, 12), 4.0, -1.0)
    g = GateNetwork(8).double()
    err1 = (soft_adain(xp, xc, g, omega=1.0) - adain(xp, xc)).abs().max().item()
    err0 = (soft_adain(xp, xc, g, omega=0.0) - xp).abs().max().item()
    ok = err1 <= 1e-5 and err0 <= 1e-4
    return "soft-adain reductions", ok, f"omega=1 err {err1:.2e}, omega=0 err {err0:.2e}"


def check_statistics() -> CheckResult:
    worst = 0.0
    for seed in range(20):
        torch.manual_seed(seed)
        ch = 2 + seed % 5
        xp = _maps(seed, (1, ch, 3 + seed % 6, 4 + seed % 5))
        xc = _maps(seed + 100, (1, ch, 2 + seed % 7, 5 + seed % 3), 3.0, -2.0)
        g = GateNetwork(ch).double()
        target = blend_stats(channel_stats(xp), channel_stats(xc), g(xp, xc))
        out = channel_stats(soft_adain(xp, xc, g))
        worst = max(worst, (out.mu - target.mu_prime).abs().max().item(),
                    (out.sigma - target.sigma_prime).abs().max().item())
    return "soft-adain output statistics", worst <= 1e-4, f"max err {worst:.2e}"


def _gradcheck(name: str, fn: Callable, inputs) -> CheckResult:
    try:
        ok = torch.autograd.gradcheck(fn, inputs, eps=1e-6, atol=1e-6, rtol=1e-3)
        detail = "analytic matches central differences"
    except RuntimeError as e:
        ok, detail = False, str(e).splitlines()[0]
    return f"gradient: {name}", ok, detail


def check_gradients() -> List[CheckResult]:
    torch.manual_seed(0)
    g = GateNetwork(4).double()
    xp = _maps(0, (1, 4, 4, 4)).requires_grad_()
    xc = _maps(1, (1, 4, 4, 4)).requires_grad_()
    block = RenderBlock(4, 4, 3).double()
    x = _maps(2, (1, 4, 4, 4)).requires_grad_()
    skip = _maps(3, (1, 4, 8, 8)).requires_grad_()

    def fm(tensors):
        return FeatureModel(dict(zip(SCALES, tensors)))

    gen = [_maps(10 + i, (1, 2, 4, 4)).requires_grad_() for i in range(4)]
    ref = [_maps(20 + i, (1, 2, 4, 4)) for i in range(4)]
    return [
        _gradcheck("soft_adain", lambda a, b: soft_adain(a, b, g), (xp, xc)),
        _gradcheck("render block", lambda a, b: block(a, b), (x, skip)),
        _gradcheck("content loss", lambda *t: content_loss(fm(t), fm(ref)), tuple(gen)),
        _gradcheck("style loss", lambda *t: style_loss(fm(t), fm(ref)), tuple(gen)),
    ]


def check_ladder() -> CheckResult:
    enc, coord, dec = ModelingNetwork(), Coordinator(), RenderingNetwork()
    problems = []
    with torch.no_grad():
        for h, w in ((64, 64), (96, 128)):
            x = torch.rand(1, 3, h, w) * 2 - 1
            psi = enc(x)
            for s in SCALES:
                want = (1, CHANNELS[s], h // STRIDES[s], w // STRIDES[s])
                if tuple(psi[s].shape) != want:
                    problems.append(f"{h}x{w} scale {s}: {tuple(psi[s].shape)} != {want}")
            y = dec(coord(psi, psi))
            if y.shape != x.shape:
                problems.append(f"{h}x{w}: rendered {tuple(y.shape)}")
    return "shape ladder", not problems, "; ".join(problems) or "64x64, 96x128 round-trip"


def run_all() -> List[CheckResult]:
    return [check_reductions(), check_statistics(), *check_gradients(), check_ladder()]
