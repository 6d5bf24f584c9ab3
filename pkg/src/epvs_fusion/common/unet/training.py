"""
training.py:

Mini-batch training of the U-Net with Adam, early stopping on validation loss and selection of the parameters with
the lowest validation loss. Initialization and shuffling are seeded so identical inputs give identical parameters.
"""
import dataclasses
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from epvs_fusion.common.data_types.exceptions import ConfigException, ShapeException
from epvs_fusion.common.data_types.slice_sample import SliceSample, stack_channels
from epvs_fusion.common.preprocess.slicing import pad_to_multiple
from epvs_fusion.common.unet.network import (
    UNetConfig,
    UNetModel,
    forward,
    loss_and_grad_with_stats,
    update_running_stats,
    weighted_cross_entropy,
)
from epvs_fusion.common.unet.optim import Adam

LOGGER = logging.getLogger("training")


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 20
    batch_size: int = 8
    class_weights: Optional[Tuple[float, ...]] = None
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    patience: int = 5
    max_class_weight: float = 25.0
    seed: int = 0

    def __post_init__(self):
        for name in ("learning_rate", "epochs", "batch_size", "epsilon", "patience", "max_class_weight"):
            if getattr(self, name) <= 0:
                raise ConfigException(f"train.{name} must be positive, got {getattr(self, name)}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigException(f"Adam betas must be in [0, 1), got ({self.beta1}, {self.beta2})")
        if self.class_weights is not None:
            weights = tuple(float(weight) for weight in self.class_weights)
            if any(weight <= 0 for weight in weights):
                raise ConfigException(f"class weights must be positive, got {weights}")
            object.__setattr__(self, "class_weights", weights)

    def to_dict(self):
        values = dataclasses.asdict(self)
        values["class_weights"] = None if self.class_weights is None else list(self.class_weights)
        return values

    @classmethod
    def from_dict(cls, values):
        fields = {field.name for field in dataclasses.fields(cls)}
        unknown = set(values) - fields
        if unknown:
            raise ConfigException(f"unknown training settings {sorted(unknown)}")
        return cls(**values)


@dataclasses.dataclass
class TrainHistory:
    train_loss: List[float] = dataclasses.field(default_factory=list)
    val_loss: List[float] = dataclasses.field(default_factory=list)
    best_epoch: int = -1
    stopped_early: bool = False

    def to_dict(self):
        return dataclasses.asdict(self)


def inverse_frequency_weights(samples: Sequence[SliceSample], num_classes, max_weight):
    """
    Class weights inversely proportional to class frequency, capped at max_weight times the
    weight of the most frequent class and normalized to mean 1.
    """
    counts = np.zeros(num_classes)
    for sample in samples:
        counts += np.bincount(sample.label.ravel(), minlength=num_classes)[:num_classes]
    weights = np.minimum(counts.max() / np.maximum(counts, 1.0), max_weight)
    return tuple(float(weight) for weight in weights / weights.mean())


def make_batch(samples: Sequence[SliceSample], divisor):
    images, labels = stack_channels(samples)
    images, _ = pad_to_multiple(images, divisor)
    labels, _ = pad_to_multiple(labels, divisor)
    return images, labels


def evaluation_loss(model: UNetModel, samples, class_weights, batch_size):
    """Voxel weighted mean loss of the samples in inference mode"""
    total, voxels = 0.0, 0
    for start in range(0, len(samples), batch_size):
        images, labels = make_batch(samples[start : start + batch_size], model.config.divisor)
        loss, _ = weighted_cross_entropy(forward(model, images), labels, class_weights)
        total += loss * labels.size
        voxels += labels.size
    return total / voxels


def _check_samples(config: UNetConfig, train_samples, val_samples):
    if not train_samples:
        raise ConfigException("training set is empty")
    for sample in list(train_samples) + list(val_samples):
        if sample.n_channels != config.in_channels:
            raise ShapeException(f"sample has {sample.n_channels} channels, network expects {config.in_channels}")
    overlap = {sample.subject_id for sample in train_samples} & {sample.subject_id for sample in val_samples}
    if overlap:
        raise ConfigException(f"subjects {sorted(overlap)} appear in both training and validation sets")


def train(config: UNetConfig, tconfig: TrainConfig, train_samples, val_samples) -> Tuple[UNetModel, TrainHistory]:
    """
    Trains a network from a seeded initialization.

    :param config: network configuration
    :param tconfig: training configuration
    :param train_samples: training samples
    :param val_samples: validation samples from other subjects; when empty the training loss drives selection
    :return: model with the lowest validation loss and the per-epoch loss history
    """
    train_samples, val_samples = list(train_samples), list(val_samples)
    _check_samples(config, train_samples, val_samples)
    if not val_samples:
        LOGGER.warning("No validation samples, selecting parameters on training loss")
    weights = tconfig.class_weights or inverse_frequency_weights(
        train_samples, config.num_classes, tconfig.max_class_weight
    )
    if len(weights) != config.num_classes:
        raise ConfigException(f"expected {config.num_classes} class weights, got {len(weights)}")
    LOGGER.info("Training on %d samples, class weights %s", len(train_samples), weights)

    model = UNetModel.initialize(config)
    optimizer = Adam(tconfig.learning_rate, tconfig.beta1, tconfig.beta2, tconfig.epsilon)
    rng = np.random.default_rng(tconfig.seed)
    history = TrainHistory()
    best_model, best_loss, stale = model.copy(), np.inf, 0

    for epoch in range(tconfig.epochs):
        order = rng.permutation(len(train_samples))
        total, voxels = 0.0, 0
        for start in range(0, len(order), tconfig.batch_size):
            batch = [train_samples[index] for index in order[start : start + tconfig.batch_size]]
            images, labels = make_batch(batch, config.divisor)
            loss, grads, stats = loss_and_grad_with_stats(model, images, labels, weights)
            optimizer.step(model.parameters, grads)
            update_running_stats(model, stats)
            total += loss * labels.size
            voxels += labels.size
        history.train_loss.append(total / voxels)
        selection_loss = history.train_loss[-1]
        if val_samples:
            selection_loss = evaluation_loss(model, val_samples, weights, tconfig.batch_size)
            history.val_loss.append(selection_loss)
        LOGGER.info(
            "Epoch %d/%d: train loss %.6f, validation loss %s",
            epoch + 1,
            tconfig.epochs,
            history.train_loss[-1],
            f"{history.val_loss[-1]:.6f}" if val_samples else "n/a",
        )
        if selection_loss < best_loss:
            best_model, best_loss, stale = model.copy(), selection_loss, 0
            history.best_epoch = epoch
        else:
            stale += 1
            if stale >= tconfig.patience:
                LOGGER.info("Stopping early after epoch %d, best epoch %d", epoch + 1, history.best_epoch + 1)
                history.stopped_early = True
                break
    return best_model, history
