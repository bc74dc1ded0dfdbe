"""Alternating GAN training of the coordinator, renderer and discriminator."""

import hashlib
import logging
import math
import os
from typing import Optional

import torch

from . import checkpoint as ckpt
from .archive import load_modeling_network
from .config import TrainingConfig
from .coordination import Coordinator
from .data import load_datasets
from .discriminator import MultiScaleDiscriminator
from .errors import NonFiniteLossError
from .features import ModelingNetwork, check_image_size
from .losses import (LossReport, adversarial_loss_d, adversarial_loss_g, content_loss,
                     reconstruction_loss, style_loss, total_generator_loss)
from .rendering import RenderingNetwork

log = logging.getLogger(__name__)

LOG_HEADER = "step\t" + "\t".join(LossReport.FIELDS)


def parameter_hash(module: torch.nn.Module) -> str:
    h = hashlib.sha256()
    for name, t in sorted(module.state_dict().items()):
        h.update(name.encode())
        h.update(t.detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()


def format_log_record(step: int, report: LossReport) -> str:
    return f"{step}\t" + "\t".join(repr(float(getattr(report, f))) for f in LossReport.FIELDS)


def _finite(name, value, step):
    v = float(value.detach())
    if not math.isfinite(v):
        raise NonFiniteLossError(name, v, step)
    return v


class Trainer:
    """Owns every network, both optimizers and the step counter.

    Zero-weighted generator terms are not evaluated and report 0.0; with
    style, content and adversarial weights all zero the cartoonization branch
    and discriminator update are skipped entirely.
    """

    def __init__(self, cfg: TrainingConfig, modeling: Optional[ModelingNetwork] = None):
        self.cfg = cfg
        self.device = torch.device(cfg.device)
        torch.manual_seed(cfg.seed)
        if modeling is None:
            modeling = load_modeling_network(cfg.vgg_weights) if cfg.vgg_weights else ModelingNetwork()
        self.modeling = modeling.to(self.device)
        self.coordinator = Coordinator().to(self.device)
        self.renderer = RenderingNetwork().to(self.device)
        self.discriminator = MultiScaleDiscriminator().to(self.device)
        betas = (cfg.beta1, cfg.beta2)
        self.opt_g = torch.optim.Adam(
            list(self.coordinator.parameters()) + list(self.renderer.parameters()),
            lr=cfg.lr_g, betas=betas)
        self.opt_d = torch.optim.Adam(self.discriminator.parameters(), lr=cfg.lr_d, betas=betas)
        self.step = 0
        self.streams = None
        self._pending_data_state = None

    # -- data ---------------------------------------------------------------

    def attach_data(self, streams) -> None:
        self.streams = streams
        if self._pending_data_state:
            streams[0].set_state(self._pending_data_state["photos"])
            streams[1].set_state(self._pending_data_state["cartoons"])
            self._pending_data_state = None

    def data_state(self):
        if self.streams is None:
            return self._pending_data_state
        return {"photos": self.streams[0].get_state(), "cartoons": self.streams[1].get_state()}

    def next_batches(self):
        photos, cartoons = self.streams
        bs = self.cfg.batch_size
        return photos.next_batch(bs).to(self.device), cartoons.next_batch(bs).to(self.device)

    # -- optimisation -------------------------------------------------------

    def discriminator_step(self, real: torch.Tensor, fake: torch.Tensor, step: int) -> float:
        """One discriminator update; ``fake`` is detached from the generator graph."""
        self.discriminator.requires_grad_(True)
        d_loss = adversarial_loss_d(self.discriminator(real), self.discriminator(fake.detach()))
        value = _finite("adversarial_d", d_loss, step)
        self.opt_d.zero_grad(set_to_none=True)
        d_loss.backward()
        self.opt_d.step()
        return value

    def train_step(self, p: torch.Tensor, c: torch.Tensor) -> LossReport:
        check_image_size(p)
        check_image_size(c)
        w = self.cfg.weights
        step = self.step + 1
        self.coordinator.train()
        self.renderer.train()
        report = LossReport()

        with torch.no_grad():
            psi_p = self.modeling(p)
            psi_c = self.modeling(c)

        terms = {}
        if w.reconstruction > 0:
            recon = reconstruction_loss(self.renderer(psi_p), p, self.renderer(psi_c), c)
            terms["reconstruction"] = recon
            report.reconstruction = _finite("reconstruction", recon, step)

        if w.style > 0 or w.content > 0 or w.adversarial > 0:
            y = self.renderer(self.coordinator(psi_p, psi_c))
            if w.adversarial > 0:
                report.adversarial_d = self.discriminator_step(c, y, step)
                self.discriminator.requires_grad_(False)
                terms["adversarial_g"] = adversarial_loss_g(self.discriminator(y))
                report.adversarial_g = _finite("adversarial_g", terms["adversarial_g"], step)
            if w.style > 0 or w.content > 0:
                psi_y = self.modeling(y)
                if w.content > 0:
                    terms["content"] = content_loss(psi_y, psi_p)
                    report.content = _finite("content", terms["content"], step)
                if w.style > 0:
                    terms["style"] = style_loss(psi_y, psi_c)
                    report.style = _finite("style", terms["style"], step)

        zero = p.new_zeros(())
        try:
            total = total_generator_loss(
                terms.get("style", zero), terms.get("content", zero),
                terms.get("reconstruction", zero), terms.get("adversarial_g", zero), w)
        except NonFiniteLossError as e:
            raise NonFiniteLossError(e.term, e.value, step) from None
        report.total = _finite("total", total, step)
        self.opt_g.zero_grad(set_to_none=True)
        if total.requires_grad:
            total.backward()
            self.opt_g.step()
        self.step = step
        return report

    # -- persistence --------------------------------------------------------

    def save(self, path) -> None:
        ckpt.save_checkpoint(path, self)

    @classmethod
    def from_checkpoint(cls, path, cfg: Optional[TrainingConfig] = None) -> "Trainer":
        tensors, meta = ckpt.read_checkpoint(path)
        cfg = cfg or TrainingConfig.from_dict(meta["config"])
        modeling = ModelingNetwork()
        trainer = cls(cfg, modeling=modeling)
        ckpt.load_modules(tensors, trainer.modeling, trainer.coordinator, trainer.renderer,
                          trainer.discriminator)
        trainer.modeling.source_checksum = meta["source_checksum"]
        ckpt.optimizer_from_archive("g", trainer.opt_g, tensors, meta["optim"]["g"])
        ckpt.optimizer_from_archive("d", trainer.opt_d, tensors, meta["optim"]["d"])
        trainer.step = meta["step"]
        trainer._pending_data_state = meta.get("data_state")
        return trainer


def total_steps(cfg: TrainingConfig, streams) -> int:
    if cfg.max_steps is not None:
        return cfg.max_steps
    per_epoch = cfg.steps_per_epoch or max(1, max(len(s) for s in streams) // cfg.batch_size)
    return cfg.epochs * per_epoch


def _check_writable(directory) -> None:
    os.makedirs(directory, exist_ok=True)
    probe = os.path.join(directory, ".write-probe")
    with open(probe, "w") as f:
        f.write("ok")
    os.unlink(probe)


def train(cfg: TrainingConfig, resume: Optional[str] = None, progress=None) -> str:
    """Run training to completion and return the final checkpoint path.

    Writes ``train_log.tsv`` (one tab-separated record per step, header
    ``step content style adversarial_g adversarial_d reconstruction total``),
    ``step_<n>.crwa`` every ``checkpoint_every`` steps, and ``final.crwa``.
    """
    try:
        _check_writable(cfg.out_dir)
    except OSError as e:
        raise OSError(f"checkpoint directory {cfg.out_dir} is not writable: {e}") from None
    streams = load_datasets(cfg)
    trainer = Trainer.from_checkpoint(resume, cfg) if resume else Trainer(cfg)
    trainer.attach_data(streams)
    if trainer.modeling.source_checksum == "random-init":
        log.warning("modeling network uses random weights; convert a VGG-19 checkpoint "
                    "and set vgg_weights for meaningful features")
    n_steps = total_steps(cfg, streams)

    log_path = os.path.join(cfg.out_dir, "train_log.tsv")
    new_log = not os.path.exists(log_path) or trainer.step == 0
    with open(log_path, "w" if new_log else "a") as logf:
        if new_log:
            logf.write(LOG_HEADER + "\n")
        while trainer.step < n_steps:
            p, c = trainer.next_batches()
            report = trainer.train_step(p, c)
            logf.write(format_log_record(trainer.step, report) + "\n")
            logf.flush()
            if progress:
                progress(trainer.step, report)
            if trainer.step % cfg.checkpoint_every == 0:
                trainer.save(os.path.join(cfg.out_dir, f"step_{trainer.step:08d}.crwa"))
    final = os.path.join(cfg.out_dir, "final.crwa")
    trainer.save(final)
    return final
