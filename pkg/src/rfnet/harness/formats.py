"""Little-endian binary files for datasets (``RFDS``) and model checkpoints (``RFCK``).

Dataset layout::

    "RFDS" | version u16 | variant u8 | K u32 | L u32 | Nr u32 | envs u32 | classes u32 | records u32
    then per record: env_id u32 | class_id u16 | K*L*Nr float32

Checkpoint layout::

    "RFCK" | version u16 | dtype u8 | config_len u32 | config (UTF-8 key = value text) | tensors u32
    then per tensor: name_len u16 | name | ndim u8 | dims u32 * ndim | values in dtype
"""
from __future__ import annotations

import struct

import numpy as np

from ..signal_sim import VARIANT_CODES, Dataset, Environment, RadioConfig
from .config import format_config_text, parse_config_text

DATASET_MAGIC = b"RFDS"
CHECKPOINT_MAGIC = b"RFCK"
VERSION = 1
DATASET_HEADER = struct.Struct("<4sHBIIIIII")
RECORD_HEADER = struct.Struct("<IH")
CHECKPOINT_HEADER = struct.Struct("<4sHBI")
DTYPE_CODES = {np.dtype("<f4"): 0, np.dtype("<f8"): 1}
CODE_DTYPES = {v: k for k, v in DTYPE_CODES.items()}
CODE_VARIANTS = {v: k for k, v in VARIANT_CODES.items()}


class FormatError(ValueError):
    """A file could not be parsed."""


class BadMagicError(FormatError):
    pass


class TruncatedError(FormatError):
    pass


class ShapeMismatchError(FormatError):
    pass


class UnsupportedVersionError(FormatError):
    pass


def _check_magic(buf, magic, path):
    if len(buf) < len(magic):
        raise TruncatedError(f"{path}: file shorter than its magic number")
    if buf[:len(magic)] != magic:
        raise BadMagicError(f"{path}: expected magic {magic!r}, found {bytes(buf[:len(magic)])!r}")


def _need(buf, offset, n, path, what):
    if offset + n > len(buf):
        raise TruncatedError(f"{path}: truncated while reading {what} "
                             f"(need {offset + n} bytes, have {len(buf)})")


# -- datasets -------------------------------------------------------------------------

def encode_dataset(dataset):
    r = dataset.radio
    n_records = len(dataset)
    parts = [DATASET_HEADER.pack(DATASET_MAGIC, VERSION, VARIANT_CODES[r.variant], r.K, r.L, r.Nr,
                                 len(dataset.environments), dataset.n_classes, n_records)]
    for env in dataset.environments:
        values = np.ascontiguousarray(env.values, dtype="<f4")
        for label, matrix in zip(env.labels, values):
            parts.append(RECORD_HEADER.pack(env.env_id, int(label)))
            parts.append(matrix.tobytes())
    return b"".join(parts)


def decode_dataset(buf, path="<bytes>"):
    _check_magic(buf, DATASET_MAGIC, path)
    _need(buf, 0, DATASET_HEADER.size, path, "header")
    _, version, variant, K, L, Nr, n_envs, n_classes, n_records = DATASET_HEADER.unpack_from(buf)
    if version != VERSION:
        raise UnsupportedVersionError(f"{path}: version {version} (expected {VERSION})")
    if variant not in CODE_VARIANTS:
        raise FormatError(f"{path}: unknown radio variant code {variant}")
    if min(K, L, Nr) < 1:
        raise ShapeMismatchError(f"{path}: matrix shape ({K}, {L}, {Nr}) has an empty axis")
    rec_size = RECORD_HEADER.size + 4 * K * L * Nr
    body = len(buf) - DATASET_HEADER.size
    if body < n_records * rec_size:
        raise TruncatedError(f"{path}: {n_records} records of {rec_size} bytes need {n_records * rec_size} "
                             f"bytes, found {body}")
    if body > n_records * rec_size:
        raise ShapeMismatchError(f"{path}: {body - n_records * rec_size} trailing bytes do not fit "
                                 f"({K}, {L}, {Nr}) records")
    records = np.frombuffer(buf, dtype=np.dtype([("env", "<u4"), ("cls", "<u2"), ("x", "<f4", (K, L, Nr))]),
                            count=n_records, offset=DATASET_HEADER.size)
    env_order = list(dict.fromkeys(records["env"].tolist()))
    if len(env_order) != n_envs:
        raise ShapeMismatchError(f"{path}: header lists {n_envs} environments, records hold {len(env_order)}")
    present = set(records["cls"].tolist())
    if present != set(range(n_classes)):
        raise ShapeMismatchError(f"{path}: header lists {n_classes} classes, records hold ids {sorted(present)}")
    envs = []
    for e in env_order:
        sel = records["env"] == e
        envs.append(Environment(int(e), records["x"][sel].astype(np.float32), records["cls"][sel].astype(np.int64)))
    radio = RadioConfig.preset(CODE_VARIANTS[variant], K=K, L=L, Nr=Nr)
    return Dataset(radio, envs, n_classes)


def write_dataset(dataset, path):
    with open(path, "wb") as fh:
        fh.write(encode_dataset(dataset))


def read_dataset(path):
    with open(path, "rb") as fh:
        return decode_dataset(fh.read(), path)


# -- checkpoints -----------------------------------------------------------------------

def encode_checkpoint(state, config):
    """``state``: name -> array (one shared float dtype); ``config``: str -> str mapping."""
    dtypes = {np.asarray(v).dtype.newbyteorder("<") for v in state.values()}
    if len(dtypes) > 1:
        raise FormatError(f"checkpoint tensors must share one dtype, got {sorted(map(str, dtypes))}")
    dtype = dtypes.pop() if dtypes else np.dtype("<f4")
    if dtype not in DTYPE_CODES:
        raise FormatError(f"unsupported tensor dtype {dtype}")
    blob = format_config_text(config).encode("utf-8")
    parts = [CHECKPOINT_HEADER.pack(CHECKPOINT_MAGIC, VERSION, DTYPE_CODES[dtype], len(blob)), blob,
             struct.pack("<I", len(state))]
    for name in sorted(state):
        arr = np.ascontiguousarray(state[name], dtype=dtype)
        raw = name.encode("utf-8")
        parts.append(struct.pack(f"<H{len(raw)}sB{arr.ndim}I", len(raw), raw, arr.ndim, *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


def decode_checkpoint(buf, path="<bytes>"):
    """Inverse of :func:`encode_checkpoint`; returns ``(state, config)``."""
    _check_magic(buf, CHECKPOINT_MAGIC, path)
    _need(buf, 0, CHECKPOINT_HEADER.size, path, "header")
    _, version, code, blob_len = CHECKPOINT_HEADER.unpack_from(buf)
    if version != VERSION:
        raise UnsupportedVersionError(f"{path}: version {version} (expected {VERSION})")
    if code not in CODE_DTYPES:
        raise FormatError(f"{path}: unknown dtype code {code}")
    dtype = CODE_DTYPES[code]
    off = CHECKPOINT_HEADER.size
    _need(buf, off, blob_len + 4, path, "config")
    config = parse_config_text(bytes(buf[off:off + blob_len]).decode("utf-8"))
    off += blob_len
    (n_tensors,) = struct.unpack_from("<I", buf, off)
    off += 4
    state = {}
    for _ in range(n_tensors):
        _need(buf, off, 2, path, "tensor name")
        (n,) = struct.unpack_from("<H", buf, off)
        _need(buf, off + 2, n + 1, path, "tensor name")
        name = bytes(buf[off + 2:off + 2 + n]).decode("utf-8")
        ndim = buf[off + 2 + n]
        off += 3 + n
        _need(buf, off, 4 * ndim, path, f"shape of {name}")
        shape = struct.unpack_from(f"<{ndim}I", buf, off)
        off += 4 * ndim
        nbytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        _need(buf, off, nbytes, path, f"values of {name}")
        state[name] = np.frombuffer(buf, dtype=dtype, count=nbytes // dtype.itemsize, offset=off).reshape(shape).copy()
        off += nbytes
    if off != len(buf):
        raise ShapeMismatchError(f"{path}: {len(buf) - off} trailing bytes after the last tensor")
    return state, config


def write_checkpoint(path, state, config):
    with open(path, "wb") as fh:
        fh.write(encode_checkpoint(state, config))


def read_checkpoint(path):
    with open(path, "rb") as fh:
        return decode_checkpoint(fh.read(), path)
