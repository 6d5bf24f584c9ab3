"""
network.py:

A multi-channel 2D U-Net written directly against numpy. The encoder has `depth` levels of two 3x3 convolution blocks
followed by 2x2 max pooling, channel counts doubling from base_filters. A bottleneck block is followed by `depth`
decoder levels, each upsampling with a 2x2 stride 2 transposed convolution, concatenating the encoder features of the
same level and applying two convolution blocks. A final 1x1 convolution produces class logits.

A convolution block is conv -> batch normalization -> ReLU. When normalization is disabled the convolution carries a
bias instead. Parameters are a flat dictionary keyed by dotted names ("enc0.conv1.weight"), running normalization
statistics live in a separate buffers dictionary.

Tensors are plain float64 numpy arrays.
"""
import dataclasses
import logging
from typing import Dict, Tuple

import numpy as np

from epvs_fusion.common.data_types.exceptions import ConfigException, DomainException, ShapeException
from epvs_fusion.common.unet import layers

LOGGER = logging.getLogger("unet")

Tensor = np.ndarray
NORM_MOMENTUM = 0.1


@dataclasses.dataclass(frozen=True)
class UNetConfig:
    in_channels: int = 1
    num_classes: int = 2
    depth: int = 3
    base_filters: int = 16
    normalization: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.in_channels <= 4:
            raise ConfigException(f"in_channels must be in 1..4, got {self.in_channels}")
        if self.num_classes < 2:
            raise ConfigException(f"num_classes must be at least 2, got {self.num_classes}")
        if self.depth < 1 or self.base_filters < 1:
            raise ConfigException(f"depth and base_filters must be positive, got {self.depth}, {self.base_filters}")

    @property
    def divisor(self):
        """Input height and width must be multiples of this"""
        return 2 ** self.depth

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, values):
        fields = {field.name for field in dataclasses.fields(cls)}
        unknown = set(values) - fields
        if unknown:
            raise ConfigException(f"unknown network settings {sorted(unknown)}")
        return cls(**values)


def _block_shapes(prefix, in_channels, out_channels, normalization):
    shapes = {}
    for index, channels in ((1, in_channels), (2, out_channels)):
        shapes[f"{prefix}.conv{index}.weight"] = (out_channels, channels, 3, 3)
        if normalization:
            shapes[f"{prefix}.norm{index}.gamma"] = (out_channels,)
            shapes[f"{prefix}.norm{index}.beta"] = (out_channels,)
        else:
            shapes[f"{prefix}.conv{index}.bias"] = (out_channels,)
    return shapes


def level_channels(config: UNetConfig, level):
    return config.base_filters * 2 ** level


def parameter_shapes(config: UNetConfig) -> Dict[str, Tuple[int, ...]]:
    """
    Closed form architecture: every parameter name and its shape, in initialization order.
    """
    shapes = {}
    channels = config.in_channels
    for level in range(config.depth):
        shapes.update(_block_shapes(f"enc{level}", channels, level_channels(config, level), config.normalization))
        channels = level_channels(config, level)
    bottom = level_channels(config, config.depth)
    shapes.update(_block_shapes("bottleneck", channels, bottom, config.normalization))
    channels = bottom
    for level in reversed(range(config.depth)):
        width = level_channels(config, level)
        shapes[f"dec{level}.up.weight"] = (channels, width, 2, 2)
        shapes[f"dec{level}.up.bias"] = (width,)
        shapes.update(_block_shapes(f"dec{level}", 2 * width, width, config.normalization))
        channels = width
    shapes["head.weight"] = (config.num_classes, config.base_filters, 1, 1)
    shapes["head.bias"] = (config.num_classes,)
    return shapes


def buffer_shapes(config: UNetConfig) -> Dict[str, Tuple[int, ...]]:
    """Running normalization statistics, one mean/var pair per normalization layer"""
    shapes = {}
    for name, shape in parameter_shapes(config).items():
        if name.endswith(".gamma"):
            layer = name[: -len(".gamma")]
            shapes[f"{layer}.running_mean"] = shape
            shapes[f"{layer}.running_var"] = shape
    return shapes


def _fan_in(name, shape):
    if name.endswith(".up.weight"):
        return shape[0]
    return int(np.prod(shape[1:]))


@dataclasses.dataclass
class UNetModel:
    config: UNetConfig
    parameters: Dict[str, Tensor]
    buffers: Dict[str, Tensor] = dataclasses.field(default_factory=dict)

    @classmethod
    def initialize(cls, config: UNetConfig):
        """
        Seeded fan-in scaled uniform initialization of weights, zero biases, unit normalization scale.
        """
        rng = np.random.default_rng(config.seed)
        parameters = {}
        for name, shape in parameter_shapes(config).items():
            if name.endswith(".weight"):
                bound = np.sqrt(6.0 / _fan_in(name, shape))
                parameters[name] = rng.uniform(-bound, bound, size=shape)
            elif name.endswith(".gamma"):
                parameters[name] = np.ones(shape)
            else:
                parameters[name] = np.zeros(shape)
        buffers = {
            name: (np.ones(shape) if name.endswith("running_var") else np.zeros(shape))
            for name, shape in buffer_shapes(config).items()
        }
        return cls(config, parameters, buffers)

    def copy(self):
        return UNetModel(
            self.config,
            {name: value.copy() for name, value in self.parameters.items()},
            {name: value.copy() for name, value in self.buffers.items()},
        )


def audit_shapes(model: UNetModel):
    """
    Verifies every parameter and buffer against the closed form shapes, raising ShapeException on any difference.
    """
    for expected, actual, kind in (
        (parameter_shapes(model.config), model.parameters, "parameter"),
        (buffer_shapes(model.config), model.buffers, "buffer"),
    ):
        if set(expected) != set(actual):
            missing = sorted(set(expected) - set(actual))
            extra = sorted(set(actual) - set(expected))
            raise ShapeException(f"{kind} names differ from architecture: missing {missing}, unexpected {extra}")
        for name, shape in expected.items():
            if tuple(actual[name].shape) != shape:
                raise ShapeException(f"{kind} {name} has shape {actual[name].shape}, architecture needs {shape}")


def _check_batch(config: UNetConfig, batch):
    if batch.ndim != 4 or batch.shape[1] != config.in_channels:
        raise ShapeException(f"batch must be (B, {config.in_channels}, H, W), got {batch.shape}")
    if batch.shape[2] % config.divisor or batch.shape[3] % config.divisor:
        raise ShapeException(f"height and width {batch.shape[2:]} must be multiples of {config.divisor}")


def _block_forward(model, prefix, x, training):
    params, config = model.parameters, model.config
    caches, stats = [], {}
    for index in (1, 2):
        conv = f"{prefix}.conv{index}"
        x, conv_cache = layers.conv2d_forward(x, params[f"{conv}.weight"], params.get(f"{conv}.bias"))
        norm_cache = None
        if config.normalization:
            norm = f"{prefix}.norm{index}"
            running = (None, None)
            if not training:
                running = (model.buffers[f"{norm}.running_mean"], model.buffers[f"{norm}.running_var"])
            x, norm_cache, stats[norm] = layers.batch_norm_forward(
                x, params[f"{norm}.gamma"], params[f"{norm}.beta"], *running
            )
        x, relu_cache = layers.relu_forward(x)
        caches.append((conv, conv_cache, norm_cache, relu_cache))
    return x, caches, stats


def _block_backward(model, dout, caches, grads):
    for conv, conv_cache, norm_cache, relu_cache in reversed(caches):
        dout = layers.relu_backward(dout, relu_cache)
        if norm_cache is not None:
            norm = conv.replace(".conv", ".norm")
            dout, grads[f"{norm}.gamma"], grads[f"{norm}.beta"] = layers.batch_norm_backward(dout, norm_cache)
        dout, grads[f"{conv}.weight"], dbias = layers.conv2d_backward(dout, conv_cache)
        if dbias is not None:
            grads[f"{conv}.bias"] = dbias
    return dout


def _forward(model: UNetModel, batch, training):
    config, params = model.config, model.parameters
    x = np.asarray(batch, dtype=np.float64)
    _check_batch(config, x)
    tape, stats, skips = [], {}, []
    for level in range(config.depth):
        x, caches, block_stats = _block_forward(model, f"enc{level}", x, training)
        stats.update(block_stats)
        skips.append(x)
        x, pool_cache = layers.max_pool_forward(x)
        tape.append(("enc", level, caches, pool_cache))
    x, caches, block_stats = _block_forward(model, "bottleneck", x, training)
    stats.update(block_stats)
    tape.append(("bottleneck", None, caches, None))
    for level in reversed(range(config.depth)):
        up, up_cache = layers.conv_transpose_forward(x, params[f"dec{level}.up.weight"], params[f"dec{level}.up.bias"])
        merged = np.concatenate([up, skips[level]], axis=1)
        x, caches, block_stats = _block_forward(model, f"dec{level}", merged, training)
        stats.update(block_stats)
        tape.append(("dec", level, caches, up_cache))
    logits, head_cache = layers.conv2d_forward(x, params["head.weight"], params["head.bias"])
    tape.append(("head", None, head_cache, None))
    return logits, tape, stats


def _backward(model: UNetModel, dlogits, tape):
    grads = {}
    _, _, head_cache, _ = tape.pop()
    dx, grads["head.weight"], grads["head.bias"] = layers.conv2d_backward(dlogits, head_cache)
    skip_grads = {}
    while tape:
        kind, level, caches, extra = tape.pop()
        if kind == "dec":
            dcat = _block_backward(model, dx, caches, grads)
            width = dcat.shape[1] // 2
            skip_grads[level] = dcat[:, width:]
            dx, grads[f"dec{level}.up.weight"], grads[f"dec{level}.up.bias"] = layers.conv_transpose_backward(
                dcat[:, :width], extra
            )
        elif kind == "bottleneck":
            dx = _block_backward(model, dx, caches, grads)
        else:
            dx = layers.max_pool_backward(dx, extra) + skip_grads[level]
            dx = _block_backward(model, dx, caches, grads)
    return grads


def forward(model: UNetModel, batch: Tensor) -> Tensor:
    """
    Inference pass using running normalization statistics.

    :param model: network
    :param batch: input (B, in_channels, H, W)
    :return: logits (B, num_classes, H, W)
    """
    logits, _, _ = _forward(model, batch, training=False)
    return logits


def weighted_cross_entropy(logits, labels, class_weights):
    """
    Class weighted voxel-wise cross entropy normalized by the voxel count.

    :return: loss and its gradient with respect to the logits
    """
    num_classes = logits.shape[1]
    labels = np.asarray(labels)
    if labels.shape != (logits.shape[0],) + logits.shape[2:]:
        raise ShapeException(f"labels shape {labels.shape} does not match logits {logits.shape}")
    out_of_range = labels.size and (labels.min() < 0 or labels.max() >= num_classes)
    if out_of_range or not np.array_equal(labels, np.round(labels)):
        raise DomainException(f"labels must be integers in 0..{num_classes - 1}")
    weights = np.asarray(class_weights, dtype=np.float64)
    if weights.shape != (num_classes,):
        raise ShapeException(f"expected {num_classes} class weights, got {weights.shape}")
    labels = labels.astype(np.int64)
    log_probs = layers.log_softmax(logits, axis=1)
    one_hot = np.moveaxis(np.eye(num_classes)[labels], -1, 1)
    voxel_weights = weights[labels][:, None]
    count = labels.size
    loss = -float((voxel_weights * one_hot * log_probs).sum()) / count
    dlogits = voxel_weights * (np.exp(log_probs) - one_hot) / count
    return loss, dlogits


def loss_and_grad_with_stats(model: UNetModel, batch, labels, class_weights):
    """
    Training mode loss: uses batch normalization statistics and also returns them so callers can update running
    averages.

    :return: loss, gradients keyed by parameter name, batch statistics keyed by normalization layer
    """
    logits, tape, stats = _forward(model, batch, training=True)
    loss, dlogits = weighted_cross_entropy(logits, labels, class_weights)
    return loss, _backward(model, dlogits, tape), stats


def loss_and_grad(model: UNetModel, batch, labels, class_weights):
    """
    :return: (loss, gradients keyed by parameter name)
    """
    loss, grads, _ = loss_and_grad_with_stats(model, batch, labels, class_weights)
    return loss, grads


def update_running_stats(model: UNetModel, stats, momentum=NORM_MOMENTUM):
    for layer, (mean, var) in stats.items():
        for name, value in ((f"{layer}.running_mean", mean), (f"{layer}.running_var", var)):
            model.buffers[name] = (1 - momentum) * model.buffers[name] + momentum * value
