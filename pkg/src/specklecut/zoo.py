"""Canonical architecture builders.

ch3_material is the four-conv-block speckle classifier (32/64/128/128
filters, 3x3 kernels, 2x2 max pooling, 512-unit hidden dense, softmax
head). smoke_binary reuses the same convolutional backbone with a
256-relu / 1-sigmoid head for the smoke detector. Smaller input sides
keep the layer pattern and shrink only the spatial dims.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArchitecture
from .nn import (
    ConvLayerSpec,
    DenseLayerSpec,
    FlattenSpec,
    NetworkSpec,
    PoolLayerSpec,
    conv_output_dims,
    validate_network,
)

INPUT_SIDES = (64, 128, 224, 256)
BACKBONE_FILTERS = (32, 64, 128, 128)


@dataclass(frozen=True)
class ArchitectureId:
    name: str                       # "ch3_material" | "smoke_binary"
    input_side: int = 256
    num_classes: int = 2            # ignored by smoke_binary
    head_width: int | None = None   # default 512 / 256 per architecture

    def __post_init__(self):
        if self.name not in ("ch3_material", "smoke_binary"):
            raise InvalidArchitecture(f"unknown architecture {self.name!r}")
        if self.input_side not in INPUT_SIDES:
            raise InvalidArchitecture(
                f"input side must be one of {INPUT_SIDES}")
        if self.name == "ch3_material" and self.num_classes < 2:
            raise InvalidArchitecture("need at least 2 classes")

    def to_json(self) -> dict:
        return {"name": self.name, "input_side": self.input_side,
                "num_classes": self.num_classes,
                "head_width": self.head_width}

    @classmethod
    def from_json(cls, obj: dict) -> "ArchitectureId":
        return cls(name=obj["name"], input_side=obj.get("input_side", 256),
                   num_classes=obj.get("num_classes", 2),
                   head_width=obj.get("head_width"))


def _he_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(np.float32)


def _backbone(rng: np.random.Generator, side: int):
    layers = []
    in_c = 1
    h = w = side
    for filters in BACKBONE_FILTERS:
        fan_in = 3 * 3 * in_c
        layers.append(ConvLayerSpec(
            filters=filters, kernel=(3, 3),
            weights=_he_uniform(rng, (3, 3, in_c, filters), fan_in),
            bias=np.zeros(filters, dtype=np.float32), activation="relu"))
        h, w = conv_output_dims(h, w, 3, 3, 0, 1, 1)
        layers.append(PoolLayerSpec(kernel=(2, 2), stride=(2, 2)))
        h, w = conv_output_dims(h, w, 2, 2, 0, 2, 2)
        in_c = filters
    layers.append(FlattenSpec())
    return layers, h * w * in_c


def _dense(rng, in_units, units, activation):
    return DenseLayerSpec(
        units=units, weights=_he_uniform(rng, (in_units, units), in_units),
        bias=np.zeros(units, dtype=np.float32), activation=activation)


def build(arch: ArchitectureId, seed: int = 0) -> NetworkSpec:
    """Materialize an architecture with seeded He-uniform weights."""
    rng = np.random.default_rng(seed)
    layers, feat = _backbone(rng, arch.input_side)
    if arch.name == "ch3_material":
        width = arch.head_width or 512
        layers.append(_dense(rng, feat, width, "relu"))
        layers.append(_dense(rng, width, arch.num_classes, "softmax"))
    else:
        width = arch.head_width or 256
        layers.append(_dense(rng, feat, width, "relu"))
        layers.append(_dense(rng, width, 1, "sigmoid"))
    net = NetworkSpec(input_shape=(arch.input_side, arch.input_side, 1),
                      layers=layers)
    validate_network(net)
    return net


def ch3_material(num_classes: int, input_side: int = 256,
                 head_width: int = 512, seed: int = 0) -> NetworkSpec:
    return build(ArchitectureId("ch3_material", input_side=input_side,
                                num_classes=num_classes,
                                head_width=head_width), seed=seed)


def smoke_binary(input_side: int = 224, head_width: int = 256,
                 seed: int = 0) -> NetworkSpec:
    return build(ArchitectureId("smoke_binary", input_side=input_side,
                                head_width=head_width), seed=seed)
