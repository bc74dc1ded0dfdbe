"""Named-tensor weight archive.

Byte layout (all integers little-endian)::

    offset 0   4 bytes   magic  b"CRWA"
    offset 4   uint32    format version (currently 1)
    offset 8   uint64    header length N
    offset 16  N bytes   UTF-8 JSON header, keys sorted, no whitespace:
                         {"entries": [{"dtype": "<f4", "name": ...,
                                       "nbytes": ..., "offset": ...,
                                       "shape": [...]}, ...],
                          "format_version": 1,
                          "metadata": {...}}
    offset 16+N          data section; each entry's raw C-order bytes start
                         at data_start + entry["offset"], 8-byte aligned,
                         gaps zero-filled

``dtype`` is a numpy type string with explicit byte order.  Weight archives
carry ``architecture`` and ``source_checksum`` in the metadata.  Entries are
written in sorted name order, so equal contents give identical bytes.
"""

import hashlib
import json
import os
import struct
import tempfile
from typing import Dict, Tuple

import numpy as np
import torch

from .errors import ArchiveFormatError

MAGIC = b"CRWA"
FORMAT_VERSION = 1
_ALIGN = 8
_PREFIX = struct.Struct("<4sIQ")


def _to_numpy(t: torch.Tensor) -> np.ndarray:
    a = t.detach().cpu().contiguous().numpy()
    return a.astype(a.dtype.newbyteorder("<"), copy=False)


def encode_archive(tensors: Dict[str, torch.Tensor], metadata: dict) -> bytes:
    entries, chunks, offset = [], [], 0
    for name in sorted(tensors):
        a = _to_numpy(tensors[name])
        raw = a.tobytes(order="C")
        entries.append({"name": name, "dtype": a.dtype.str, "shape": list(a.shape),
                        "offset": offset, "nbytes": len(raw)})
        pad = (-len(raw)) % _ALIGN
        chunks.append(raw + b"\0" * pad)
        offset += len(raw) + pad
    header = json.dumps({"format_version": FORMAT_VERSION, "metadata": metadata,
                         "entries": entries}, sort_keys=True, separators=(",", ":"))
    hbytes = header.encode("utf-8")
    return _PREFIX.pack(MAGIC, FORMAT_VERSION, len(hbytes)) + hbytes + b"".join(chunks)


def decode_archive(blob: bytes) -> Tuple[Dict[str, torch.Tensor], dict]:
    if len(blob) < _PREFIX.size:
        raise ArchiveFormatError("archive is truncated (no header)")
    magic, version, hlen = _PREFIX.unpack_from(blob)
    if magic != MAGIC:
        raise ArchiveFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise ArchiveFormatError(f"unsupported archive format version {version}")
    start = _PREFIX.size + hlen
    try:
        header = json.loads(blob[_PREFIX.size:start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ArchiveFormatError(f"corrupt archive header: {e}") from None
    tensors = {}
    for e in header["entries"]:
        lo = start + e["offset"]
        if lo + e["nbytes"] > len(blob):
            raise ArchiveFormatError(f"entry '{e['name']}' runs past end of file")
        a = np.frombuffer(blob, dtype=np.dtype(e["dtype"]), count=int(np.prod(e["shape"], dtype=np.int64)),
                          offset=lo).reshape(e["shape"])
        tensors[e["name"]] = torch.from_numpy(a.astype(a.dtype.newbyteorder("="), copy=True))
    return tensors, header["metadata"]


def save_archive(path, tensors: Dict[str, torch.Tensor], metadata: dict) -> None:
    blob = encode_archive(tensors, metadata)
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)), suffix=".part")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_archive(path) -> Tuple[Dict[str, torch.Tensor], dict]:
    try:
        with open(path, "rb") as f:
            blob = f.read()
    except OSError as e:
        raise ArchiveFormatError(f"cannot read archive {path}: {e.strerror}") from None
    return decode_archive(blob)


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def prefixed(prefix: str, state: Dict[str, torch.Tensor]) -> Dict[str, torch.Tensor]:
    return {f"{prefix}.{k}": v for k, v in state.items()}


def strip_prefix(prefix: str, tensors: Dict[str, torch.Tensor]) -> Dict[str, torch.Tensor]:
    p = prefix + "."
    return {k[len(p):]: v for k, v in tensors.items() if k.startswith(p)}


def convert_torchvision_vgg19(src, dst) -> str:
    """Convert a torchvision ``vgg19`` checkpoint into a modeling-network archive.

    Returns the SHA-256 of the source file, which is also recorded in the
    archive metadata.
    """
    from .features import ModelingNetwork

    checksum = file_sha256(src)
    state = torch.load(src, map_location="cpu", weights_only=True)
    net = ModelingNetwork()
    net.load_torchvision_state_dict(state, checksum)
    save_archive(dst, prefixed("modeling", net.convs.state_dict()),
                 {"architecture": net.architecture, "source_checksum": checksum})
    return checksum


def load_modeling_network(path):
    from .features import ModelingNetwork

    tensors, meta = load_archive(path)
    if meta.get("architecture") != ModelingNetwork.architecture:
        raise ArchiveFormatError(
            f"archive architecture {meta.get('architecture')!r} is not {ModelingNetwork.architecture!r}")
    net = ModelingNetwork()
    net.convs.load_state_dict(strip_prefix("modeling", tensors))
    net.source_checksum = meta.get("source_checksum", "unknown")
    return net
