"""Binary checkpoints: JSON header plus raw little-endian arrays.

Layout: magic "E4D1", uint32 version, uint64 header length, UTF-8 JSON
header, then each array's bytes in header order. Arrays round-trip bitwise,
so a reloaded model encodes and predicts identically to the saved one.
"""

from __future__ import annotations

import io
import json
import struct

import numpy as np

from .encoder import Earth4DConfig
from .errors import CheckpointError
from .fileio import atomic_write_bytes
from .optim import Adam
from .regressor import LFMCRegressor, RegressorConfig

MAGIC = b"E4D1"
VERSION = 1


def _pack(header: dict, arrays) -> bytes:
    manifest = []
    blobs = []
    for name, arr in arrays:
        a = np.ascontiguousarray(arr)
        a = a.astype(a.dtype.newbyteorder("<"), copy=False)
        manifest.append({"name": name, "dtype": a.dtype.str, "shape": list(a.shape)})
        blobs.append(a.tobytes())
    payload = dict(header)
    payload["arrays"] = manifest
    encoded = json.dumps(payload, sort_keys=True).encode("utf-8")
    out = io.BytesIO()
    out.write(MAGIC)
    out.write(struct.pack("<I", VERSION))
    out.write(struct.pack("<Q", len(encoded)))
    out.write(encoded)
    for blob in blobs:
        out.write(blob)
    return out.getvalue()


def _unpack(data: bytes):
    if len(data) < 16 or data[:4] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (header_len,) = struct.unpack_from("<Q", data, 8)
    start = 16
    stop = start + header_len
    if stop > len(data):
        raise CheckpointError("truncated checkpoint header")
    try:
        header = json.loads(data[start:stop].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint header: {exc}") from None
    arrays = {}
    offset = stop
    for entry in header.get("arrays", []):
        dtype = np.dtype(entry["dtype"])
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        nbytes = dtype.itemsize * count
        if offset + nbytes > len(data):
            raise CheckpointError(f"truncated checkpoint data at array {entry['name']!r}")
        arr = np.frombuffer(data, dtype=dtype, count=count, offset=offset).reshape(shape)
        arrays[entry["name"]] = arr.copy()
        offset += nbytes
    if offset != len(data):
        raise CheckpointError("trailing bytes after last checkpoint array")
    return header, arrays


def save_checkpoint(
    path,
    regressor: LFMCRegressor,
    optimizer: Adam | None = None,
    extra: dict | None = None,
) -> None:
    header = {
        "encoder_config": regressor.encoder.config.to_dict(),
        "regressor_config": regressor.config.to_dict(),
        "species_names": list(regressor.species.names),
        "extra": extra if extra is not None else {},
        "optimizer": None,
    }
    arrays = [(p.name, p.values) for p in regressor.parameters()]
    if optimizer is not None:
        header["optimizer"] = {
            "step_count": optimizer.step_count,
            "beta1": optimizer.beta1,
            "beta2": optimizer.beta2,
            "eps": optimizer.eps,
            "groups": [
                {"lr": lr, "names": [p.name for p in params]}
                for params, lr in optimizer.groups
            ],
        }
        arrays.extend(optimizer.state_arrays())
    atomic_write_bytes(path, _pack(header, arrays))


def load_checkpoint(path):
    """Rebuild the regressor (and optimizer, if saved) from a checkpoint.
    Returns {"regressor", "optimizer", "extra"}."""
    with open(path, "rb") as fh:
        data = fh.read()
    header, arrays = _unpack(data)
    encoder_config = Earth4DConfig.from_dict(header["encoder_config"])
    regressor_config = RegressorConfig.from_dict(header["regressor_config"])
    regressor = LFMCRegressor.build(
        encoder_config,
        species_names=header["species_names"],
        config=regressor_config,
        seed=0,
    )
    for p in regressor.parameters():
        if p.name not in arrays:
            raise CheckpointError(f"checkpoint is missing array {p.name!r}")
        stored = arrays[p.name]
        if stored.shape != p.values.shape or stored.dtype != p.values.dtype:
            raise CheckpointError(
                f"array {p.name!r} has shape {stored.shape} dtype {stored.dtype}, "
                f"expected {p.values.shape} {p.values.dtype}"
            )
        p.values[...] = stored
    optimizer = None
    if header.get("optimizer"):
        meta = header["optimizer"]
        by_name = {p.name: p for p in regressor.parameters()}
        try:
            groups = [
                ([by_name[name] for name in group["names"]], group["lr"])
                for group in meta["groups"]
            ]
        except KeyError as exc:
            raise CheckpointError(f"optimizer references unknown array {exc}") from None
        optimizer = Adam(
            groups, beta1=meta["beta1"], beta2=meta["beta2"], eps=meta["eps"]
        )
        try:
            optimizer.load_state_arrays(arrays, meta["step_count"])
        except KeyError as exc:
            raise CheckpointError(f"checkpoint is missing optimizer array {exc}") from None
    return {
        "regressor": regressor,
        "optimizer": optimizer,
        "extra": header.get("extra", {}),
    }
