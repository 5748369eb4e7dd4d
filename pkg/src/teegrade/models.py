"""Dual-head convolutional architectures at desk and full scale.

Each network is a conv/pool/linear trunk ending in a 10-unit fully-connected
layer. Those 10 activations feed two heads: softmax over the 10 units for
view classification, and a separate 1-output linear layer (identity
activation) for the quality score. The score head reads the pre-softmax
activations, so post-hoc changes to the class probabilities can never move
the score.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import engine, kernels
from .errors import BuildError, DataError, ShapeError

Array = np.ndarray

VIEW_COUNT = 10
HEAD_WIDTH = 10  # penultimate FC width; fixed by the output-stage design

ARCHITECTURES = ("alexnet-mini", "vgg-mini", "alexnet-full", "vgg-full")


@dataclass(frozen=True)
class ConvLayer:
    name: str
    out_channels: int
    kernel: int
    stride: int = 1
    padding: int = 0


@dataclass(frozen=True)
class PoolLayer:
    kernel: int = 2
    stride: int = 2


@dataclass(frozen=True)
class ReluLayer:
    pass


@dataclass(frozen=True)
class FlattenLayer:
    pass


@dataclass(frozen=True)
class DenseLayer:
    name: str
    out_features: int


LayerDef = Union[ConvLayer, PoolLayer, ReluLayer, FlattenLayer, DenseLayer]


@dataclass(frozen=True)
class ModelSpec:
    """Architecture description: input geometry plus the trunk layer list."""

    architecture: str
    input_hw: tuple[int, int]
    in_channels: int
    trunk: tuple[LayerDef, ...]

    def __post_init__(self):
        last = self.trunk[-1] if self.trunk else None
        if not isinstance(last, DenseLayer) or last.out_features != HEAD_WIDTH:
            raise BuildError(
                f"trunk must end in a {HEAD_WIDTH}-unit dense layer, got {last!r}"
            )
        self.layer_shapes()  # validates geometry, raises BuildError on collapse

    def layer_shapes(self) -> list[tuple]:
        """(c, h, w) or (features,) after each trunk layer; validates geometry."""
        c, (h, w) = self.in_channels, self.input_hw
        shape: tuple = (c, h, w)
        out = []
        for layer in self.trunk:
            if isinstance(layer, ConvLayer):
                if len(shape) != 3:
                    raise BuildError(f"conv layer {layer.name} after flatten")
                try:
                    oh, ow = kernels.conv_output_hw(
                        shape[1], shape[2], layer.kernel, layer.kernel,
                        layer.stride, layer.padding,
                    )
                except ShapeError as err:
                    raise BuildError(f"layer {layer.name}: {err}") from err
                shape = (layer.out_channels, oh, ow)
            elif isinstance(layer, PoolLayer):
                if len(shape) != 3 or layer.kernel > min(shape[1], shape[2]):
                    raise BuildError(
                        f"pool window {layer.kernel} exceeds extent {shape[1:]}"
                    )
                shape = (
                    shape[0],
                    (shape[1] - layer.kernel) // layer.stride + 1,
                    (shape[2] - layer.kernel) // layer.stride + 1,
                )
                if shape[1] < 1 or shape[2] < 1:
                    raise BuildError(f"spatial collapse after pool: {shape}")
            elif isinstance(layer, FlattenLayer):
                shape = (int(np.prod(shape)),)
            elif isinstance(layer, DenseLayer):
                if len(shape) != 1:
                    raise BuildError(f"dense layer {layer.name} before flatten")
                shape = (layer.out_features,)
            out.append(shape)
        return out

    def param_defs(self) -> dict[str, tuple[tuple, int]]:
        """Ordered name -> (shape, fan_in) for every parameter, heads included."""
        defs: dict[str, tuple[tuple, int]] = {}
        c, (h, w) = self.in_channels, self.input_hw
        shape: tuple = (c, h, w)
        for layer, after in zip(self.trunk, self.layer_shapes()):
            if isinstance(layer, ConvLayer):
                fan_in = shape[0] * layer.kernel * layer.kernel
                defs[f"{layer.name}.weight"] = (
                    (layer.out_channels, shape[0], layer.kernel, layer.kernel),
                    fan_in,
                )
                defs[f"{layer.name}.bias"] = ((layer.out_channels,), fan_in)
            elif isinstance(layer, DenseLayer):
                defs[f"{layer.name}.weight"] = (
                    (layer.out_features, shape[0]),
                    shape[0],
                )
                defs[f"{layer.name}.bias"] = ((layer.out_features,), shape[0])
            shape = after
        defs["score.weight"] = ((1, HEAD_WIDTH), HEAD_WIDTH)
        defs["score.bias"] = ((1,), HEAD_WIDTH)
        return defs

    def to_dict(self) -> dict:
        layers = []
        for layer in self.trunk:
            if isinstance(layer, ConvLayer):
                layers.append(
                    {
                        "kind": "conv",
                        "name": layer.name,
                        "out_channels": layer.out_channels,
                        "kernel": layer.kernel,
                        "stride": layer.stride,
                        "padding": layer.padding,
                    }
                )
            elif isinstance(layer, PoolLayer):
                layers.append(
                    {"kind": "pool", "kernel": layer.kernel, "stride": layer.stride}
                )
            elif isinstance(layer, ReluLayer):
                layers.append({"kind": "relu"})
            elif isinstance(layer, FlattenLayer):
                layers.append({"kind": "flatten"})
            else:
                layers.append(
                    {
                        "kind": "dense",
                        "name": layer.name,
                        "out_features": layer.out_features,
                    }
                )
        return {
            "architecture": self.architecture,
            "input_hw": list(self.input_hw),
            "in_channels": self.in_channels,
            "layers": layers,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        trunk: list[LayerDef] = []
        for entry in d["layers"]:
            kind = entry["kind"]
            if kind == "conv":
                trunk.append(
                    ConvLayer(
                        entry["name"],
                        entry["out_channels"],
                        entry["kernel"],
                        entry["stride"],
                        entry["padding"],
                    )
                )
            elif kind == "pool":
                trunk.append(PoolLayer(entry["kernel"], entry["stride"]))
            elif kind == "relu":
                trunk.append(ReluLayer())
            elif kind == "flatten":
                trunk.append(FlattenLayer())
            elif kind == "dense":
                trunk.append(DenseLayer(entry["name"], entry["out_features"]))
            else:
                raise BuildError(f"unknown layer kind {kind!r}")
        return cls(
            architecture=d["architecture"],
            input_hw=tuple(d["input_hw"]),
            in_channels=d["in_channels"],
            trunk=tuple(trunk),
        )


def _mini_tail() -> tuple[LayerDef, ...]:
    return (
        FlattenLayer(),
        DenseLayer("fc1", 128),
        ReluLayer(),
        DenseLayer("fc2", HEAD_WIDTH),
    )


def model_spec(
    architecture: str,
    input_hw: Optional[tuple[int, int]] = None,
    in_channels: int = 1,
) -> ModelSpec:
    """Named architecture presets. Minis default to 64x64 single-channel input."""
    if architecture == "alexnet-mini":
        hw = input_hw or (64, 64)
        trunk: tuple[LayerDef, ...] = (
            ConvLayer("conv1", 16, 5, stride=2, padding=2),
            ReluLayer(),
            PoolLayer(2, 2),
            ConvLayer("conv2", 32, 3, stride=1, padding=1),
            ReluLayer(),
            PoolLayer(2, 2),
            ConvLayer("conv3", 48, 3, stride=1, padding=1),
            ReluLayer(),
            PoolLayer(2, 2),
        ) + _mini_tail()
    elif architecture == "vgg-mini":
        hw = input_hw or (64, 64)
        blocks: list[LayerDef] = []
        for i, ch in enumerate((16, 32, 64), start=1):
            blocks += [
                ConvLayer(f"conv{i}_1", ch, 3, stride=1, padding=1),
                ReluLayer(),
                ConvLayer(f"conv{i}_2", ch, 3, stride=1, padding=1),
                ReluLayer(),
                PoolLayer(2, 2),
            ]
        trunk = tuple(blocks) + _mini_tail()
    elif architecture == "alexnet-full":
        hw = input_hw or (227, 227)
        trunk = (
            ConvLayer("conv1", 96, 11, stride=4, padding=0),
            ReluLayer(),
            PoolLayer(3, 2),
            ConvLayer("conv2", 256, 5, stride=1, padding=2),
            ReluLayer(),
            PoolLayer(3, 2),
            ConvLayer("conv3", 384, 3, stride=1, padding=1),
            ReluLayer(),
            ConvLayer("conv4", 384, 3, stride=1, padding=1),
            ReluLayer(),
            ConvLayer("conv5", 256, 3, stride=1, padding=1),
            ReluLayer(),
            PoolLayer(3, 2),
            FlattenLayer(),
            DenseLayer("fc1", 4096),
            ReluLayer(),
            DenseLayer("fc2", 4096),
            ReluLayer(),
            DenseLayer("fc3", HEAD_WIDTH),
        )
    elif architecture == "vgg-full":
        hw = input_hw or (224, 224)
        blocks = []
        widths = ((64, 64), (128, 128), (256, 256, 256), (512, 512, 512), (512, 512, 512))
        for i, block in enumerate(widths, start=1):
            for j, ch in enumerate(block, start=1):
                blocks += [
                    ConvLayer(f"conv{i}_{j}", ch, 3, stride=1, padding=1),
                    ReluLayer(),
                ]
            blocks.append(PoolLayer(2, 2))
        trunk = tuple(blocks) + (
            FlattenLayer(),
            DenseLayer("fc1", 4096),
            ReluLayer(),
            DenseLayer("fc2", 4096),
            ReluLayer(),
            DenseLayer("fc3", HEAD_WIDTH),
        )
    else:
        raise BuildError(
            f"unknown architecture {architecture!r}; expected one of {ARCHITECTURES}"
        )
    return ModelSpec(architecture, hw, in_channels, trunk)


class Model:
    """A built network: spec, parameter store, and the score de-normalisation."""

    def __init__(self, spec: ModelSpec, store: engine.ParamStore, score_scale: float = 100.0):
        self.spec = spec
        self.store = store
        self.score_scale = score_scale

    def _check_input(self, images: Array) -> None:
        expect = (self.spec.in_channels,) + tuple(self.spec.input_hw)
        if images.ndim != 4:
            raise ShapeError("images.ndim", 4, images.ndim, context="forward")
        if tuple(images.shape[1:]) != expect:
            raise ShapeError("images", expect, tuple(images.shape[1:]), context="forward")

    def forward(self, images: Array):
        """(scores, view_logits) for a batch; scores are in normalised [0,1] units."""
        scores, logits, _ = self._run(images, trace=False)
        return scores, logits

    def forward_trace(self, images: Array):
        """Forward pass that also returns the per-layer trace for backward()."""
        return self._run(images, trace=True)

    def _run(self, images: Array, trace: bool):
        self._check_input(images)
        x = np.asarray(images, dtype=np.float64)
        p = self.store.params
        saved: list = []
        for layer in self.spec.trunk:
            if isinstance(layer, ConvLayer):
                params = kernels.ConvParams(
                    p[f"{layer.name}.weight"],
                    p[f"{layer.name}.bias"],
                    layer.stride,
                    layer.padding,
                )
                if trace:
                    saved.append((layer, x, params))
                x = kernels.conv2d(x, params)
            elif isinstance(layer, PoolLayer):
                in_shape = x.shape
                x, idx = kernels.maxpool2d(x, layer.kernel, layer.stride)
                if trace:
                    saved.append((layer, idx, in_shape))
            elif isinstance(layer, ReluLayer):
                if trace:
                    saved.append((layer, x, None))
                x = kernels.relu(x)
            elif isinstance(layer, FlattenLayer):
                if trace:
                    saved.append((layer, x.shape, None))
                x = x.reshape(x.shape[0], -1)
            else:  # DenseLayer
                if trace:
                    saved.append((layer, x, None))
                x = kernels.linear(x, p[f"{layer.name}.weight"], p[f"{layer.name}.bias"])
        act10 = x
        scores = kernels.linear(act10, p["score.weight"], p["score.bias"])[:, 0]
        if trace:
            saved.append(("head", act10, None))
        return scores, act10, saved

    def backward(self, saved: list, d_scores: Array, d_logits: Array) -> None:
        """Fill store.grads from head gradients, walking the trace in reverse."""
        self.store.zero_grads()
        grads = self.store.grads
        tag, act10, _ = saved[-1]
        assert tag == "head"
        d_act, dw, db = kernels.linear_backward(
            d_scores[:, None], act10, self.store.params["score.weight"]
        )
        grads["score.weight"][...] = dw
        grads["score.bias"][...] = db
        d = d_act + d_logits
        for entry in reversed(saved[:-1]):
            layer = entry[0]
            if isinstance(layer, ConvLayer):
                _, x, params = entry
                d, dw, db = kernels.conv2d_backward(d, x, params)
                grads[f"{layer.name}.weight"][...] = dw
                grads[f"{layer.name}.bias"][...] = db
            elif isinstance(layer, PoolLayer):
                _, idx, in_shape = entry
                d = kernels.maxpool2d_backward(d, idx, in_shape)
            elif isinstance(layer, ReluLayer):
                d = kernels.relu_backward(d, entry[1])
            elif isinstance(layer, FlattenLayer):
                d = d.reshape(entry[1])
            else:  # DenseLayer
                _, x, _ = entry
                d, dw, db = kernels.linear_backward(
                    d, x, self.store.params[f"{layer.name}.weight"]
                )
                grads[f"{layer.name}.weight"][...] = dw
                grads[f"{layer.name}.bias"][...] = db

def build_model(spec: ModelSpec, seed: int = 0, score_scale: float = 100.0) -> Model:
    """Initialise a model for the given spec with seeded He-uniform weights."""
    return Model(spec, engine.init_params(spec, seed), score_scale)


@dataclass(frozen=True)
class VideoPrediction:
    score: float
    sigma: float
    view_id: int


def predict_video(model: Model, frames: Array) -> VideoPrediction:
    """Aggregate per-frame predictions of one video.

    Returns the mean de-normalised score, the population standard deviation
    across frames, and the majority-vote view id (ties break to the lowest
    view id).
    """
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 4 or frames.shape[0] < 1:
        raise DataError("predict_video needs at least one frame of shape (c, h, w)")
    scores, logits = model.forward(frames)
    denorm = scores * model.score_scale
    classes = logits.argmax(axis=1)
    counts = np.bincount(classes, minlength=VIEW_COUNT)
    return VideoPrediction(
        score=float(denorm.mean()),
        sigma=float(denorm.std()),
        view_id=int(counts.argmax()) + 1,
    )
