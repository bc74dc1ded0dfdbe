"""Training checkpoints on top of the weight-archive format.

Tensor entries::

    modeling.<conv>.{weight,bias}              frozen VGG prefix
    coordinator.block{4,11,18,31}.{theta_p,theta_c}.{conv1,conv2}.{weight,bias}
    coordinator.block{4,11,18,31}.{fc1,fc2}.{weight,bias}
    renderer.block{1..4}.{up_conv,skip_conv}.{weight,bias}
    renderer.head.{weight,bias}
    discriminator.scale{0,1,2}.net.<i>.{weight,bias}
    optim.{g,d}.state.<param index>.<key>      optimizer tensors

Metadata holds the architecture id, VGG source checksum, step counter,
config snapshot, optimizer hyper-parameters and the data-sampler state.
"""

from typing import Dict, Tuple

import torch

from .archive import load_archive, prefixed, save_archive, strip_prefix
from .errors import ArchiveFormatError

ARCHITECTURE = "cartoon-renderer-v1"
CHECKPOINT_VERSION = 1


def _json_safe(v):
    if isinstance(v, tuple):
        return list(v)
    return v


def optimizer_to_archive(name: str, opt: torch.optim.Optimizer) -> Tuple[Dict[str, torch.Tensor], dict]:
    sd = opt.state_dict()
    tensors, scalars = {}, {}
    for idx, state in sd["state"].items():
        for key, value in state.items():
            if isinstance(value, torch.Tensor):
                tensors[f"optim.{name}.state.{idx}.{key}"] = value
            else:
                scalars[f"{idx}.{key}"] = value
    groups = [{k: _json_safe(v) for k, v in g.items()} for g in sd["param_groups"]]
    return tensors, {"param_groups": groups, "scalars": scalars}


def optimizer_from_archive(name: str, opt: torch.optim.Optimizer, tensors, meta) -> None:
    state: Dict[int, dict] = {}
    prefix = f"optim.{name}.state."
    for key, value in tensors.items():
        if key.startswith(prefix):
            idx, field = key[len(prefix):].split(".", 1)
            state.setdefault(int(idx), {})[field] = value
    for key, value in meta["scalars"].items():
        idx, field = key.split(".", 1)
        state.setdefault(int(idx), {})[field] = value
    groups = []
    for g in meta["param_groups"]:
        g = dict(g)
        if "betas" in g:
            g["betas"] = tuple(g["betas"])
        groups.append(g)
    opt.load_state_dict({"state": state, "param_groups": groups})


def save_checkpoint(path, trainer) -> None:
    tensors = {}
    tensors.update(prefixed("modeling", trainer.modeling.convs.state_dict()))
    tensors.update(prefixed("coordinator", trainer.coordinator.state_dict()))
    tensors.update(prefixed("renderer", trainer.renderer.state_dict()))
    tensors.update(prefixed("discriminator", trainer.discriminator.state_dict()))
    optim_meta = {}
    for name, opt in (("g", trainer.opt_g), ("d", trainer.opt_d)):
        t, m = optimizer_to_archive(name, opt)
        tensors.update(t)
        optim_meta[name] = m
    meta = {
        "architecture": ARCHITECTURE,
        "checkpoint_version": CHECKPOINT_VERSION,
        "source_checksum": trainer.modeling.source_checksum,
        "step": trainer.step,
        "config": trainer.cfg.to_dict(),
        "optim": optim_meta,
        "data_state": trainer.data_state(),
    }
    save_archive(path, tensors, meta)


def read_checkpoint(path):
    tensors, meta = load_archive(path)
    if meta.get("architecture") != ARCHITECTURE:
        raise ArchiveFormatError(
            f"{path}: architecture {meta.get('architecture')!r} is not a {ARCHITECTURE} checkpoint")
    for group in ("modeling", "coordinator", "renderer"):
        if not any(k.startswith(group + ".") for k in tensors):
            raise ArchiveFormatError(f"{path}: checkpoint has no '{group}' parameters")
    return tensors, meta


def load_modules(tensors, modeling, coordinator, renderer, discriminator=None) -> None:
    try:
        modeling.convs.load_state_dict(strip_prefix("modeling", tensors))
        coordinator.load_state_dict(strip_prefix("coordinator", tensors))
        renderer.load_state_dict(strip_prefix("renderer", tensors))
        if discriminator is not None:
            discriminator.load_state_dict(strip_prefix("discriminator", tensors))
    except RuntimeError as e:
        raise ArchiveFormatError(f"checkpoint parameters do not match the architecture: {e}") from None
