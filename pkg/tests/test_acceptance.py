"""The ten acceptance criteria, each at its stated tolerance.

Every test prints one ``PASS``/``FAIL`` line (visible with ``pytest -s`` or in
``-v`` runs via the live print) before asserting.
"""

import dataclasses
import os

import numpy as np
import pytest
import torch
from PIL import Image

from cartoon_renderer.coordination import Coordinator, GateNetwork, adain, blend_stats, soft_adain
from cartoon_renderer.features import (CHANNELS, SCALES, STRIDES, FeatureModel, ModelingNetwork,
                                       channel_stats, extract_feature_model)
from cartoon_renderer.inference import (cartoonize, cartoonize_highres, global_photo_statistics,
                                        load_pipeline, reconstruct)
from cartoon_renderer.losses import (LossReport, LossWeights, adversarial_loss_d, adversarial_loss_g,
                                     content_loss, reconstruction_loss, style_loss, total_generator_loss)
from cartoon_renderer.rendering import RenderBlock, RenderingNetwork, render
from cartoon_renderer.training import Trainer, train
from fd import max_grad_error
from synthetic import make_photo


@pytest.fixture()
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
        return ok
    return emit


def _maps(seed, shape, scale=2.0, shift=0.5):
    g = torch.Generator().manual_seed(seed)
    return torch.randn(*shape, generator=g, dtype=torch.float64) * scale + shift


def _load(path):
    a = np.asarray(Image.open(path).convert("RGB"))
    return torch.from_numpy(a.transpose(2, 0, 1).copy()).float().unsqueeze(0) / 127.5 - 1


def _images(directory):
    return [_load(os.path.join(directory, n)) for n in sorted(os.listdir(directory))]


def test_01_soft_adain_reductions(report):
    worst1 = worst0 = 0.0
    for seed in range(10):
        torch.manual_seed(seed)
        xp = _maps(seed, (2, 16, 9, 11))
        xc = _maps(seed + 50, (2, 16, 6, 14), 4.0, -1.5)
        g = GateNetwork(16).double()
        worst1 = max(worst1, (soft_adain(xp, xc, g, omega=1.0) - adain(xp, xc)).abs().max().item())
        worst0 = max(worst0, (soft_adain(xp, xc, g, omega=0.0) - xp).abs().max().item())
    ok = worst1 <= 1e-5 and worst0 <= 1e-4
    report(1, ok, f"omega=1 vs adain {worst1:.2e} (<=1e-5), omega=0 vs content {worst0:.2e} (<=1e-4)")
    assert ok


def test_02_statistics_contract(report):
    rng = np.random.default_rng(0)
    worst = 0.0
    for case in range(100):
        torch.manual_seed(case)
        b, ch = int(rng.integers(1, 4)), int(rng.integers(1, 9))
        hp, wp, hc, wc = (int(v) for v in rng.integers(2, 17, size=4))
        xp = _maps(case, (b, ch, hp, wp), float(rng.uniform(0.5, 5)), float(rng.normal()))
        xc = _maps(case + 1000, (b, ch, hc, wc), float(rng.uniform(0.5, 5)), float(rng.normal()))
        g = GateNetwork(ch).double()
        target = blend_stats(channel_stats(xp), channel_stats(xc), g(xp, xc))
        out = channel_stats(soft_adain(xp, xc, g))
        worst = max(worst, (out.mu - target.mu_prime).abs().max().item(),
                    (out.sigma - target.sigma_prime).abs().max().item())
    ok = worst <= 1e-4
    report(2, ok, f"100 randomized cases, max stats error {worst:.2e} (<=1e-4)")
    assert ok


def test_03_gradient_suite(report):
    torch.manual_seed(0)
    shape = (1, 4, 8, 8)
    errors = {}

    g = GateNetwork(4).double()
    xp, xc = _maps(0, shape).requires_grad_(), _maps(1, shape, 3.0, -1.0).requires_grad_()
    errors["soft_adain"] = max_grad_error(lambda: (soft_adain(xp, xc, g) * _maps(2, shape)).sum(), [xp, xc])

    gen = [_maps(10 + i, shape).requires_grad_() for i in range(4)]
    ref = FeatureModel({s: _maps(20 + i, shape) for i, s in enumerate(SCALES)})
    fm = lambda: FeatureModel(dict(zip(SCALES, gen)))
    errors["content"] = max_grad_error(lambda: content_loss(fm(), ref), gen)
    errors["style"] = max_grad_error(lambda: style_loss(fm(), ref), gen)

    real = [_maps(30 + i, (1, 1, 8 >> i, 8 >> i)).requires_grad_() for i in range(3)]
    fake = [_maps(40 + i, (1, 1, 8 >> i, 8 >> i)).requires_grad_() for i in range(3)]
    errors["adversarial_d"] = max_grad_error(lambda: adversarial_loss_d(real, fake), real + fake)
    errors["adversarial_g"] = max_grad_error(lambda: adversarial_loss_g(fake), fake)

    imgs = [_maps(50 + i, (1, 3, 8, 8), 0.5, 0.0).requires_grad_() for i in range(4)]
    errors["reconstruction"] = max_grad_error(lambda: reconstruction_loss(*imgs), imgs)

    block = RenderBlock(4, 4, 2).double()
    x, skip = _maps(60, (1, 4, 4, 4)).requires_grad_(), _maps(61, shape).requires_grad_()
    w = _maps(62, (1, 4, 8, 8))
    errors["render_block"] = max_grad_error(
        lambda: (block(x, skip) * w).sum(), [x, skip] + list(block.parameters()))

    worst = max(errors.values())
    ok = worst < 1e-3
    report(3, ok, "max relative error " + ", ".join(f"{k} {v:.1e}" for k, v in errors.items()) + " (<1e-3)")
    assert ok


def test_04_content_loss_style_invariance(report):
    g = torch.Generator().manual_seed(0)
    gen = FeatureModel({s: _maps(s, (2, 8, 12, 12)) for s in SCALES})
    photo = FeatureModel({s: _maps(s + 100, (2, 8, 12, 12)) for s in SCALES})
    base = content_loss(gen, photo).item()
    worst = 0.0
    for trial in range(20):
        def affine(fm):
            out = {}
            for s, f in fm.items():
                a = torch.rand(f.shape[0], f.shape[1], 1, 1, generator=g, dtype=torch.float64) * 2.5 + 0.5
                b = torch.randn(f.shape[0], f.shape[1], 1, 1, generator=g, dtype=torch.float64) * 5
                out[s] = a * f + b
            return FeatureModel(out)
        worst = max(worst, abs(content_loss(affine(gen), photo).item() - base),
                    abs(content_loss(gen, affine(photo)).item() - base))
    ok = worst <= 1e-4
    report(4, ok, f"max change under per-channel positive affine maps {worst:.2e} (<=1e-4)")
    assert ok


def test_05_loss_arithmetic(report):
    one = torch.tensor(1.0, dtype=torch.float64)
    w = LossWeights()
    total = total_generator_loss(one, one, one, one, w).item()
    ok = (w.style, w.content, w.reconstruction, w.adversarial) == (20, 1, 0.0001, 1) and total == 22.0001
    report(5, ok, f"unit partials at weights (20, 1, 0.0001, 1) give {total!r} (== 22.0001)")
    assert ok


def test_06_shape_ladder(report):
    torch.manual_seed(0)
    enc, coord, dec = ModelingNetwork(), Coordinator(), RenderingNetwork()
    problems = []
    with torch.no_grad():
        for h, w in ((64, 64), (96, 128), (256, 256)):
            x = torch.rand(1, 3, h, w) * 2 - 1
            c = torch.rand(1, 3, 64, 96) * 2 - 1
            psi = extract_feature_model(x, enc)
            for s in SCALES:
                want = (1, CHANNELS[s], h // STRIDES[s], w // STRIDES[s])
                if tuple(psi[s].shape) != want:
                    problems.append(f"{h}x{w} scale {s}")
            y = render(coord(psi, extract_feature_model(c, enc)), dec)
            if y.shape != x.shape:
                problems.append(f"{h}x{w} output {tuple(y.shape)}")
    ok = not problems and [CHANNELS[s] for s in SCALES] == [64, 128, 256, 512] \
        and [STRIDES[s] for s in SCALES] == [1, 2, 4, 8]
    report(6, ok, "64x64, 96x128, 256x256 round-trip" if ok else "; ".join(problems))
    assert ok


def test_07_reconstruction_overfit(recon_run, report):
    rows = recon_run["rows"]
    first, last = rows[0]["reconstruction"], rows[-1]["reconstruction"]
    reduction = 1 - last / first
    pipe = load_pipeline(recon_run["ckpt"])
    imgs = _images(recon_run["cfg"].photo_dir) + _images(recon_run["cfg"].cartoon_dir)
    mae = float(np.mean([(reconstruct(x, pipe) - x).abs().mean().item() for x in imgs]))
    ok = len(rows) == 500 and len(imgs) == 8 and reduction >= 0.9 and mae < 0.08
    report(7, ok, f"500 steps on 8 images: loss {first:.4f} -> {last:.4f} "
                  f"({100 * reduction:.1f}% reduction, >=90%), reconstruct MAE {mae:.4f} (<0.08)")
    assert ok


def test_08_full_loop_stability(full_run, report):
    rows = full_run["rows"]
    finite = all(np.isfinite(r[f]) for r in rows for f in LossReport.FIELDS)
    active = all(r[f] != 0 for r in rows for f in LossReport.FIELDS)
    pipe = load_pipeline(full_run["ckpt"])
    photos, cartoons = _images(full_run["cfg"].photo_dir), _images(full_run["cfg"].cartoon_dir)
    mae = float(np.mean([(cartoonize(p, c, pipe) - p).abs().mean().item()
                         for p, c in zip(photos, cartoons)]))
    ok = len(rows) == 200 and finite and active and mae > 0.01
    report(8, ok, f"200 steps, all six logged terms finite={finite} and active={active}; "
                  f"output vs input MAE {mae:.4f} (>0.01)")
    assert ok


def test_09_tiled_equivalence(full_run, report):
    pipe = load_pipeline(full_run["ckpt"])
    rng = np.random.default_rng(9)
    a = make_photo(rng, 512, 512)
    photo = torch.from_numpy(a.transpose(2, 0, 1).copy()).float().unsqueeze(0) / 127.5 - 1
    ref = _images(full_run["cfg"].cartoon_dir)[0]
    full = cartoonize(photo, ref, pipe)
    tiled = cartoonize_highres(photo, ref, pipe, tile=256, overlap=64)
    diff = (tiled - full).abs()[0].amax(dim=0)
    seam_dist = torch.minimum(torch.arange(512) % 256, 255 - torch.arange(512) % 256)
    interior = (seam_dist[:, None] >= 64) & (seam_dist[None, :] >= 64)
    interior_err, overall_err = diff[interior].max().item(), diff.max().item()

    stats, _ = global_photo_statistics(photo, pipe, tile=256, context=64)
    with torch.no_grad():
        psi = pipe.modeling(photo)
    stats_err = max(max((stats[s].mu - channel_stats(psi[s]).mu.double()).abs().max().item(),
                        (stats[s].sigma - channel_stats(psi[s]).sigma.double()).abs().max().item())
                    for s in SCALES)
    ok = tiled.shape == photo.shape and interior_err <= 2 / 255 and stats_err <= 1e-5
    report(9, ok, f"512x512 tile 256/overlap 64: interior max diff {interior_err:.2e} "
                  f"(all pixels {overall_err:.2e}, <=2/255={2 / 255:.2e}); streamed stats err {stats_err:.2e} (<=1e-5)")
    assert ok


def test_10_checkpoint_round_trip(full_run, tmp_path, report):
    again = tmp_path / "again.crwa"
    Trainer.from_checkpoint(full_run["ckpt"]).save(again)
    identical = again.read_bytes() == open(full_run["ckpt"], "rb").read()

    mid = Trainer.from_checkpoint(os.path.join(full_run["cfg"].out_dir, "step_00000100.crwa"))
    snapshot_ok = mid.step == 100 and mid.cfg == full_run["cfg"]

    run = lambda d, n, **kw: train(dataclasses.replace(
        full_run["cfg"], out_dir=str(tmp_path / d), max_steps=n, checkpoint_every=2), **kw)
    whole = Trainer.from_checkpoint(run("a", 4))
    resumed = Trainer.from_checkpoint(run("b", 4, resume=run("b", 2)))
    same_params = all(torch.equal(whole.renderer.state_dict()[k], v)
                      for k, v in resumed.renderer.state_dict().items())
    same_cfg = resumed.cfg == dataclasses.replace(whole.cfg, out_dir=str(tmp_path / "b"))
    resume_ok = resumed.step == whole.step == 4 and same_cfg and same_params

    ok = identical and snapshot_ok and resume_ok
    report(10, ok, f"save->load->save identical={identical}; step-100 checkpoint restores step and "
                   f"config={snapshot_ok}; resume 2->4 matches uninterrupted={resume_ok}")
    assert ok
