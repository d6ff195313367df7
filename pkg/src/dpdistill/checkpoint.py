"""Self-describing binary model checkpoints.

Layout: magic ``DPDFD1``, little-endian uint32 format version, a
length-prefixed JSON header (layer descriptors, init seed, array manifest),
then the raw array payloads in manifest order. Parameters are stored as
little-endian 32-bit floats; normalization counters as little-endian int64.
Writes are whole-file atomic (temp file + rename).
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np

from .exceptions import CheckpointError
from .nn.network import Network, network_from_descriptors

MAGIC = b"DPDFD1"
VERSION = 1

_DTYPES = {"float32": "<f4", "int64": "<i8"}


def save_checkpoint(network: Network, path) -> None:
    path = Path(path)
    arrays = network.state_arrays()
    manifest = [
        {"path": name, "dtype": str(arr.dtype), "shape": list(arr.shape)}
        for name, arr in arrays
    ]
    for entry in manifest:
        if entry["dtype"] not in _DTYPES:
            raise CheckpointError(
                f"array {entry['path']} has unsupported dtype {entry['dtype']}"
            )
    header = json.dumps(
        {
            "version": VERSION,
            "rng_seed": network.rng_seed,
            "layers": network.descriptors(),
            "arrays": manifest,
        }
    ).encode()
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<I", VERSION)
    blob += struct.pack("<Q", len(header))
    blob += header
    for (name, arr), entry in zip(arrays, manifest):
        payload = np.ascontiguousarray(arr).astype(_DTYPES[entry["dtype"]]).tobytes()
        blob += struct.pack("<Q", len(payload))
        blob += payload
    tmp = path.with_name(path.name + ".tmp")
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp.write_bytes(bytes(blob))
    os.replace(tmp, path)


def load_checkpoint(path) -> Network:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    data = path.read_bytes()
    if len(data) < len(MAGIC) + 12 or data[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
    offset = len(MAGIC)
    (version,) = struct.unpack_from("<I", data, offset)
    offset += 4
    if version != VERSION:
        raise CheckpointError(
            f"{path}: unsupported checkpoint version {version} (expected {VERSION})"
        )
    (header_len,) = struct.unpack_from("<Q", data, offset)
    offset += 8
    try:
        header = json.loads(data[offset : offset + header_len].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise CheckpointError(f"{path}: corrupt header: {err}") from None
    offset += header_len

    network = network_from_descriptors(
        header["layers"], rng_seed=int(header["rng_seed"])
    )
    snapshot = {}
    for entry in header["arrays"]:
        if offset + 8 > len(data):
            raise CheckpointError(f"{path}: truncated before {entry['path']}")
        (payload_len,) = struct.unpack_from("<Q", data, offset)
        offset += 8
        expected = int(np.prod(entry["shape"])) * np.dtype(
            _DTYPES[entry["dtype"]]
        ).itemsize
        if payload_len != expected:
            raise CheckpointError(
                f"{path}: array {entry['path']} has {payload_len} bytes, "
                f"expected {expected}"
            )
        if offset + payload_len > len(data):
            raise CheckpointError(
                f"{path}: truncated payload for {entry['path']}: need "
                f"{payload_len} bytes, have {len(data) - offset}"
            )
        arr = np.frombuffer(
            data, dtype=_DTYPES[entry["dtype"]], count=int(np.prod(entry["shape"])),
            offset=offset,
        ).reshape(entry["shape"])
        snapshot[entry["path"]] = arr.astype(entry["dtype"])
        offset += payload_len
    if offset != len(data):
        raise CheckpointError(f"{path}: {len(data) - offset} trailing bytes")
    network.restore_parameters(snapshot)
    return network
