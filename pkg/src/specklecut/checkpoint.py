"""Binary model checkpoints.

Layout: magic "SPKL", uint32 format version, uint32 header length, a JSON
header describing the architecture plus free-form metadata, then every
weight and bias tensor as little-endian float32 in layer order, and a
trailing CRC32 of that payload. Loading reproduces each tensor bit for
bit.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    CheckpointError,
    CrcMismatch,
    TruncatedFile,
    VersionMismatch,
)
from .nn import (
    ConvLayerSpec,
    DenseLayerSpec,
    FlattenSpec,
    GapSpec,
    NetworkSpec,
    PoolLayerSpec,
    layer_output_shapes,
    validate_network,
)

MAGIC = b"SPKL"
FORMAT_VERSION = 1


def _layer_to_json(layer) -> dict:
    if isinstance(layer, ConvLayerSpec):
        return {"kind": "conv", "filters": layer.filters,
                "kernel": list(layer.kernel), "stride": list(layer.stride),
                "padding": layer.padding, "activation": layer.activation}
    if isinstance(layer, PoolLayerSpec):
        return {"kind": "pool", "kernel": list(layer.kernel),
                "stride": list(layer.stride), "padding": layer.padding}
    if isinstance(layer, FlattenSpec):
        return {"kind": "flatten"}
    if isinstance(layer, GapSpec):
        return {"kind": "gap"}
    if isinstance(layer, DenseLayerSpec):
        return {"kind": "dense", "units": layer.units,
                "activation": layer.activation}
    raise CheckpointError(f"cannot serialize layer {type(layer).__name__}")


def _tensor_shapes(input_shape, layer_objs):
    """Weight/bias shapes per trainable layer, derived from the shape chain."""
    shapes = []
    cur = tuple(input_shape)
    for obj in layer_objs:
        kind = obj["kind"]
        if kind == "conv":
            f_h, f_w = obj["kernel"]
            in_c = cur[2]
            shapes.append(((f_h, f_w, in_c, obj["filters"]),
                           (obj["filters"],)))
            s_h, s_w = obj["stride"]
            p = obj["padding"]
            cur = ((cur[0] - f_h + 2 * p) // s_h + 1,
                   (cur[1] - f_w + 2 * p) // s_w + 1, obj["filters"])
        elif kind == "pool":
            f_h, f_w = obj["kernel"]
            s_h, s_w = obj["stride"]
            p = obj["padding"]
            cur = ((cur[0] - f_h + 2 * p) // s_h + 1,
                   (cur[1] - f_w + 2 * p) // s_w + 1, cur[2])
        elif kind == "flatten":
            cur = (cur[0] * cur[1] * cur[2],)
        elif kind == "gap":
            cur = (cur[2],)
        elif kind == "dense":
            shapes.append(((cur[0], obj["units"]), (obj["units"],)))
            cur = (obj["units"],)
        else:
            raise CheckpointError(f"unknown layer kind {kind!r}")
    return shapes


def checkpoint_save(net: NetworkSpec, meta: dict, path) -> None:
    """Write the network and metadata; payload is float32 little-endian."""
    layer_output_shapes(net)  # fail fast on an inconsistent spec
    header = {
        "input_shape": list(net.input_shape),
        "layers": [_layer_to_json(l) for l in net.layers],
        "meta": meta,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = bytearray()
    for layer in net.layers:
        if hasattr(layer, "weights"):
            payload += np.ascontiguousarray(layer.weights,
                                            dtype="<f4").tobytes()
            payload += np.ascontiguousarray(layer.bias, dtype="<f4").tobytes()
    crc = zlib.crc32(bytes(payload)) & 0xFFFFFFFF
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(header_bytes)))
        fh.write(header_bytes)
        fh.write(payload)
        fh.write(struct.pack("<I", crc))


def checkpoint_load(path) -> tuple[NetworkSpec, dict]:
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise TruncatedFile("file too short for a checkpoint header")
    if data[:4] != MAGIC:
        raise BadMagic(f"expected magic {MAGIC!r}, got {data[:4]!r}")
    version, header_len = struct.unpack("<II", data[4:12])
    if version != FORMAT_VERSION:
        raise VersionMismatch(
            f"format version {version}, this build reads {FORMAT_VERSION}")
    if len(data) < 12 + header_len:
        raise TruncatedFile("header extends past end of file")
    try:
        header = json.loads(data[12:12 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable header: {exc}") from exc

    input_shape = tuple(header["input_shape"])
    layer_objs = header["layers"]
    shapes = _tensor_shapes(input_shape, layer_objs)
    payload_len = sum(4 * int(np.prod(w)) + 4 * int(np.prod(b))
                      for w, b in shapes)
    body = data[12 + header_len:]
    if len(body) < payload_len + 4:
        raise TruncatedFile(
            f"payload needs {payload_len + 4} bytes, found {len(body)}")
    if len(body) > payload_len + 4:
        raise CheckpointError("trailing bytes after checkpoint CRC")
    payload = body[:payload_len]
    (crc_stored,) = struct.unpack("<I", body[payload_len:payload_len + 4])
    if zlib.crc32(payload) & 0xFFFFFFFF != crc_stored:
        raise CrcMismatch("payload CRC does not match")

    offset = 0

    def take(shape):
        nonlocal offset
        n = int(np.prod(shape))
        arr = np.frombuffer(payload, dtype="<f4", count=n,
                            offset=offset).reshape(shape)
        offset += 4 * n
        return arr.astype(np.float32, copy=True)

    layers = []
    shape_iter = iter(shapes)
    for obj in layer_objs:
        kind = obj["kind"]
        if kind == "conv":
            w_shape, b_shape = next(shape_iter)
            layers.append(ConvLayerSpec(
                filters=obj["filters"], kernel=tuple(obj["kernel"]),
                weights=take(w_shape), bias=take(b_shape),
                stride=tuple(obj["stride"]), padding=obj["padding"],
                activation=obj["activation"]))
        elif kind == "pool":
            layers.append(PoolLayerSpec(kernel=tuple(obj["kernel"]),
                                        stride=tuple(obj["stride"]),
                                        padding=obj["padding"]))
        elif kind == "flatten":
            layers.append(FlattenSpec())
        elif kind == "gap":
            layers.append(GapSpec())
        else:
            w_shape, b_shape = next(shape_iter)
            layers.append(DenseLayerSpec(
                units=obj["units"], weights=take(w_shape),
                bias=take(b_shape), activation=obj["activation"]))
    net = NetworkSpec(input_shape=input_shape, layers=layers)
    validate_network(net)
    return net, header.get("meta", {})
