"""PKNN binary container.

Layout (all integers little-endian)::

    b"PKNN"            magic
    u16                format version
    u8                 payload kind (stack / autoencoder / classifier / forest / dataset)
    u32 + bytes        UTF-8 JSON metadata
    u16                record count
    records...

Stack record::

    u8 record type (1) | u8 role | u8 frozen | u16 n_layers
    per layer: u32 in | u32 out | u8 activation id | u8 has_bn | f32 dropout_p
               | f32 bn_momentum | f32 bn_epsilon
    then, per layer in order: weights (row-major in x out), bias,
    [gamma, beta, running_mean, running_var] as IEEE-754 f32

Array record (forest node tables, dataset snapshots)::

    u8 record type (2) | u16 name length | name | u8 dtype code | u8 ndim | u32 dims... | data
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from typing import BinaryIO

import numpy as np

from .network import ACTIVATIONS, BatchNormState, DenseLayer, LayerStack

MAGIC = b"PKNN"
FORMAT_VERSION = 1

KIND_STACK, KIND_AUTOENCODER, KIND_CLASSIFIER, KIND_FOREST, KIND_DATASET = 1, 2, 3, 4, 5
ROLE_GENERIC, ROLE_ENCODER, ROLE_DECODER, ROLE_FFN = 0, 1, 2, 3

_REC_STACK, _REC_ARRAY = 1, 2
_ACT_IDS = {name: i for i, name in enumerate(ACTIVATIONS)}
_DTYPES = {1: "<f4", 2: "<f8", 3: "<i4", 4: "<i8", 5: "u1"}
_DTYPE_CODES = {np.dtype(v).str: k for k, v in _DTYPES.items()}


class FormatError(ValueError):
    pass


@dataclass
class Container:
    kind: int
    meta: dict = field(default_factory=dict)
    stacks: list[tuple[int, LayerStack]] = field(default_factory=list)
    arrays: dict[str, np.ndarray] = field(default_factory=dict)

    def stack(self, role: int) -> LayerStack:
        for r, s in self.stacks:
            if r == role:
                return s
        raise FormatError(f"container has no stack with role {role}")


def _write_stack(out: BinaryIO, role: int, stack: LayerStack) -> None:
    out.write(struct.pack("<BBBH", _REC_STACK, role, int(stack.frozen), len(stack.layers)))
    for layer in stack.layers:
        bn = layer.batch_norm
        out.write(
            struct.pack(
                "<IIBBfff",
                layer.in_width,
                layer.out_width,
                _ACT_IDS[layer.activation],
                int(bn is not None),
                layer.dropout_p,
                bn.momentum if bn else 0.0,
                bn.epsilon if bn else 0.0,
            )
        )
    for layer in stack.layers:
        blocks = [layer.weights, layer.bias]
        bn = layer.batch_norm
        if bn is not None:
            blocks += [bn.gamma, bn.beta, bn.running_mean, bn.running_var]
        for block in blocks:
            out.write(np.ascontiguousarray(block, dtype="<f4").tobytes())


def _read_exact(src: BinaryIO, n: int) -> bytes:
    buf = src.read(n)
    if len(buf) != n:
        raise FormatError("truncated container")
    return buf


def _read_f32(src: BinaryIO, count: int) -> np.ndarray:
    return np.frombuffer(_read_exact(src, 4 * count), dtype="<f4").astype(np.float64)


def _read_stack(src: BinaryIO) -> tuple[int, LayerStack]:
    role, frozen, n_layers = struct.unpack("<BBH", _read_exact(src, 4))
    specs = [struct.unpack("<IIBBfff", _read_exact(src, 22)) for _ in range(n_layers)]
    activations = {i: name for name, i in _ACT_IDS.items()}
    layers = []
    for n_in, n_out, act_id, has_bn, dropout_p, momentum, eps in specs:
        if act_id not in activations:
            raise FormatError(f"unknown activation id {act_id}")
        weights = _read_f32(src, n_in * n_out).reshape(n_in, n_out)
        bias = _read_f32(src, n_out)
        bn = None
        if has_bn:
            gamma, beta, mean, var = (_read_f32(src, n_out) for _ in range(4))
            bn = BatchNormState(
                gamma, beta, mean, var, momentum=float(np.float32(momentum)), epsilon=float(np.float32(eps))
            )
        layers.append(
            DenseLayer(
                weights,
                bias,
                activation=activations[act_id],
                batch_norm=bn,
                # f32 round trip of e.g. 0.5 is exact; other values are re-rounded for stability
                dropout_p=round(float(dropout_p), 6),
                frozen=bool(frozen),
            )
        )
    return role, LayerStack(layers)


def _write_array(out: BinaryIO, name: str, arr: np.ndarray) -> None:
    arr = np.asarray(arr)
    dt = arr.dtype.newbyteorder("<") if arr.dtype.byteorder == ">" else arr.dtype
    code = _DTYPE_CODES.get(np.dtype(dt).str)
    if code is None:
        raise FormatError(f"unsupported array dtype {arr.dtype}")
    raw = name.encode("utf-8")
    out.write(struct.pack("<BH", _REC_ARRAY, len(raw)) + raw)
    out.write(struct.pack("<BB", code, arr.ndim))
    out.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    out.write(np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes())


def _read_array(src: BinaryIO) -> tuple[str, np.ndarray]:
    (name_len,) = struct.unpack("<H", _read_exact(src, 2))
    name = _read_exact(src, name_len).decode("utf-8")
    code, ndim = struct.unpack("<BB", _read_exact(src, 2))
    if code not in _DTYPES:
        raise FormatError(f"unknown dtype code {code}")
    shape = struct.unpack(f"<{ndim}I", _read_exact(src, 4 * ndim))
    dtype = np.dtype(_DTYPES[code])
    count = int(np.prod(shape)) if shape else 1
    data = np.frombuffer(_read_exact(src, dtype.itemsize * count), dtype=dtype)
    return name, data.reshape(shape).copy()


def dumps(container: Container) -> bytes:
    out = io.BytesIO()
    meta = json.dumps(container.meta, sort_keys=True).encode("utf-8")
    out.write(MAGIC)
    out.write(struct.pack("<HBI", FORMAT_VERSION, container.kind, len(meta)))
    out.write(meta)
    out.write(struct.pack("<H", len(container.stacks) + len(container.arrays)))
    for role, stack in container.stacks:
        _write_stack(out, role, stack)
    for name, arr in container.arrays.items():
        _write_array(out, name, arr)
    return out.getvalue()


def loads(data: bytes, expect_kind: int | None = None) -> Container:
    src = io.BytesIO(data)
    if _read_exact(src, 4) != MAGIC:
        raise FormatError("not a PKNN container (bad magic)")
    version, kind, meta_len = struct.unpack("<HBI", _read_exact(src, 7))
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported container version {version}")
    if expect_kind is not None and kind != expect_kind:
        raise FormatError(f"container holds payload kind {kind}, expected {expect_kind}")
    meta = json.loads(_read_exact(src, meta_len).decode("utf-8"))
    (n_records,) = struct.unpack("<H", _read_exact(src, 2))
    container = Container(kind=kind, meta=meta)
    for _ in range(n_records):
        (rtype,) = struct.unpack("<B", _read_exact(src, 1))
        if rtype == _REC_STACK:
            container.stacks.append(_read_stack(src))
        elif rtype == _REC_ARRAY:
            name, arr = _read_array(src)
            container.arrays[name] = arr
        else:
            raise FormatError(f"unknown record type {rtype}")
    if src.read(1):
        raise FormatError("trailing bytes after last record")
    return container


def save_stack(path, stack: LayerStack, role: int = ROLE_GENERIC, meta: dict | None = None) -> None:
    from ..io_utils import atomic_write_bytes

    atomic_write_bytes(path, dumps(Container(KIND_STACK, meta or {}, [(role, stack)])))


def load_stack(path) -> LayerStack:
    with open(path, "rb") as fh:
        c = loads(fh.read(), expect_kind=KIND_STACK)
    return c.stacks[0][1]
