"""Binary checkpoint format for parameter stores (``.pkt``).

Layout::

    u64 little-endian  N    length of the header
    N bytes                 canonical JSON header (sorted keys, no spaces)
    payload                 raw little-endian tensor data

The header maps each tensor name to ``{"dtype", "shape", "data_offsets"}``
with ``[begin, end)`` offsets into the payload; the reserved key
``__metadata__`` holds a string-to-string mapping. Tensors are laid out in
sorted name order and tile the payload exactly.

A pruned parameter ``p`` is stored as ``p_orig`` and ``p_mask``; metadata
``prune.p`` records its method history. On load the pair is reattached with
a :class:`~prunekit.methods.CustomFromMask` hook built from the stored mask.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np

from .methods import CustomFromMask
from .reparam import MASK_SUFFIX, ORIG_SUFFIX, ParameterStore
from .tensor import is_binary

FORMAT_VERSION = "1"
METADATA_KEY = "__metadata__"
HISTORY_PREFIX = "prune."
BUFFERS_KEY = "buffers"

DTYPES = {"F32": np.dtype("<f4"), "F64": np.dtype("<f8")}
TAGS = {np.dtype(np.float32): "F32", np.dtype(np.float64): "F64"}

PathLike = Union[str, os.PathLike]


class CheckpointError(ValueError):
    """Base class for checkpoint read/write failures."""


class MalformedHeaderError(CheckpointError):
    pass


class UnknownDtypeError(CheckpointError):
    pass


class OffsetError(CheckpointError):
    """Byte ranges overlap, leave gaps, or point past the payload."""


class TruncatedPayloadError(CheckpointError):
    pass


class InvalidMaskError(CheckpointError):
    pass


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True, allow_nan=False)


def _tensors(store: ParameterStore) -> Dict[str, np.ndarray]:
    out: Dict[str, np.ndarray] = {}
    for source in (store.params, store.buffers):
        for name, t in source.items():
            if name in out:
                raise CheckpointError(f"duplicate tensor name {name!r}")
            out[name] = t
    if METADATA_KEY in out:
        raise CheckpointError(f"{METADATA_KEY!r} is a reserved name")
    return out


def _metadata(store: ParameterStore) -> Dict[str, str]:
    meta = {k: v for k, v in store.metadata.items()
            if not k.startswith(HISTORY_PREFIX) and k not in (BUFFERS_KEY, "format_version")}
    for name in store.hooks:
        meta[HISTORY_PREFIX + name] = canonical_json(store.history.get(name, []))
    plain = sorted(b for b in store.buffers
                   if not (b.endswith(MASK_SUFFIX) and b[: -len(MASK_SUFFIX)] in store.hooks))
    if plain:
        meta[BUFFERS_KEY] = canonical_json(plain)
    meta["format_version"] = FORMAT_VERSION
    for k, v in meta.items():
        if not isinstance(k, str) or not isinstance(v, str):
            raise CheckpointError(f"metadata must map strings to strings, got {k!r}: {v!r}")
    return meta


def to_bytes(store: ParameterStore) -> bytes:
    tensors = _tensors(store)
    header: Dict[str, object] = {METADATA_KEY: _metadata(store)}
    chunks = []
    offset = 0
    for name in sorted(tensors):
        t = tensors[name]
        if t.dtype not in TAGS:
            raise CheckpointError(f"tensor {name!r} has unsupported dtype {t.dtype}")
        data = np.ascontiguousarray(t, dtype=t.dtype.newbyteorder("<")).tobytes()
        header[name] = {
            "dtype": TAGS[t.dtype],
            "shape": [int(d) for d in t.shape],
            "data_offsets": [offset, offset + len(data)],
        }
        chunks.append(data)
        offset += len(data)
    text = canonical_json(header).encode("utf-8")
    return struct.pack("<Q", len(text)) + text + b"".join(chunks)


def write_checkpoint(store: ParameterStore, path: PathLike) -> None:
    data = to_bytes(store)
    with open(path, "wb") as f:
        f.write(data)


def _no_duplicates(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise MalformedHeaderError(f"duplicate key {k!r} in header")
        out[k] = v
    return out


def _parse_header(raw: bytes) -> Tuple[dict, Dict[str, dict], int]:
    if len(raw) < 8:
        raise TruncatedPayloadError("file too short for the header length")
    (n,) = struct.unpack_from("<Q", raw, 0)
    if 8 + n > len(raw):
        raise TruncatedPayloadError(f"header length {n} exceeds file size {len(raw)}")
    try:
        header = json.loads(raw[8 : 8 + n].decode("utf-8"), object_pairs_hook=_no_duplicates)
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise MalformedHeaderError(f"header is not valid JSON: {e}") from None
    if not isinstance(header, dict):
        raise MalformedHeaderError("header must be a JSON object")
    meta = header.pop(METADATA_KEY, {})
    if not isinstance(meta, dict) or not all(isinstance(v, str) for v in meta.values()):
        raise MalformedHeaderError("metadata must map strings to strings")
    for name, entry in header.items():
        if not isinstance(entry, dict) or set(entry) != {"dtype", "shape", "data_offsets"}:
            raise MalformedHeaderError(f"bad header entry for {name!r}")
        shape, offs = entry["shape"], entry["data_offsets"]
        if (not isinstance(shape, list) or not shape
                or not all(type(d) is int and d >= 1 for d in shape)):
            raise MalformedHeaderError(f"bad shape for {name!r}: {shape!r}")
        if not isinstance(offs, list) or len(offs) != 2 or not all(type(o) is int for o in offs):
            raise MalformedHeaderError(f"bad data_offsets for {name!r}: {offs!r}")
        if entry["dtype"] not in DTYPES:
            raise UnknownDtypeError(f"unknown dtype tag {entry['dtype']!r} for {name!r}")
    return meta, header, 8 + n


def _check_offsets(header: Dict[str, dict], payload_size: int) -> None:
    expected = 0
    for name, entry in sorted(header.items(), key=lambda kv: tuple(kv[1]["data_offsets"])):
        begin, end = entry["data_offsets"]
        size = int(np.prod(entry["shape"])) * DTYPES[entry["dtype"]].itemsize
        if end - begin != size:
            raise OffsetError(f"{name!r}: range [{begin}, {end}) does not hold {size} bytes")
        if begin != expected:
            kind = "overlaps the previous tensor" if begin < expected else "leaves a gap"
            raise OffsetError(f"{name!r}: range [{begin}, {end}) {kind}")
        if end > payload_size:
            raise TruncatedPayloadError(
                f"{name!r}: range [{begin}, {end}) runs past the payload end ({payload_size})"
            )
        expected = end
    if expected != payload_size:
        raise OffsetError(f"payload has {payload_size - expected} trailing bytes")


def from_bytes(raw: bytes) -> ParameterStore:
    meta, header, start = _parse_header(raw)
    payload = memoryview(raw)[start:]
    _check_offsets(header, len(payload))

    tensors = {}
    for name, entry in header.items():
        begin, end = entry["data_offsets"]
        dtype = DTYPES[entry["dtype"]]
        arr = np.frombuffer(payload[begin:end], dtype=dtype).reshape(entry["shape"])
        tensors[name] = arr.astype(dtype.newbyteorder("="), copy=True)

    try:
        plain_buffers = set(json.loads(meta.get(BUFFERS_KEY, "[]")))
    except json.JSONDecodeError as e:
        raise MalformedHeaderError(f"bad {BUFFERS_KEY!r} metadata: {e}") from None
    pruned = sorted(
        name[: -len(ORIG_SUFFIX)]
        for name in tensors
        if name.endswith(ORIG_SUFFIX) and name[: -len(ORIG_SUFFIX)] + MASK_SUFFIX in tensors
        and name[: -len(ORIG_SUFFIX)] + MASK_SUFFIX not in plain_buffers
    )
    masks = {p + MASK_SUFFIX for p in pruned}

    store = ParameterStore()
    for name in sorted(tensors):
        if name in masks or name in plain_buffers:
            store.buffers[name] = tensors[name]
        else:
            store.params[name] = tensors[name]

    for p in pruned:
        orig, mask = store.params[p + ORIG_SUFFIX], store.buffers[p + MASK_SUFFIX]
        if mask.shape != orig.shape or mask.dtype != orig.dtype:
            raise InvalidMaskError(f"mask for {p!r} does not match {p + ORIG_SUFFIX!r}")
        if not is_binary(mask):
            raise InvalidMaskError(f"mask for {p!r} contains values other than 0 and 1")
        if p in store.params:
            raise MalformedHeaderError(f"{p!r} is stored both plain and pruned")
        hook = CustomFromMask(mask.copy())
        hook.tensor_name = p
        store.hooks[p] = hook
        try:
            history = json.loads(meta.get(HISTORY_PREFIX + p, "[]"))
        except json.JSONDecodeError as e:
            raise MalformedHeaderError(f"bad pruning history for {p!r}: {e}") from None
        store.history[p] = history
        store.run_hook(p)

    store.metadata = {k: v for k, v in meta.items()
                      if not k.startswith(HISTORY_PREFIX) and k != BUFFERS_KEY}
    return store


def read_checkpoint(path: PathLike) -> ParameterStore:
    return from_bytes(Path(path).read_bytes())
