"""
Tests the U-Net architecture, its backward pass and the optimizer
"""
import numpy as np
import pytest

from epvs_fusion.common.data_types.exceptions import ConfigException, DomainException, ShapeException
from epvs_fusion.common.unet.network import (
    UNetConfig,
    UNetModel,
    audit_shapes,
    buffer_shapes,
    forward,
    loss_and_grad,
    parameter_shapes,
    weighted_cross_entropy,
)
from epvs_fusion.common.unet.optim import Adam

STEP = 1e-5


def small_problem(normalization, seed=4):
    config = UNetConfig(in_channels=2, num_classes=2, depth=1, base_filters=2, normalization=normalization, seed=seed)
    rng = np.random.default_rng(seed)
    batch = rng.normal(size=(2, 2, 8, 8))
    labels = (rng.random(size=(2, 8, 8)) < 0.3).astype(int)
    return UNetModel.initialize(config), batch, labels


def numeric_gradient(model, batch, labels, weights, name, index):
    values = model.parameters[name]
    original = values[index]
    values[index] = original + STEP
    upper, _ = loss_and_grad(model, batch, labels, weights)
    values[index] = original - STEP
    lower, _ = loss_and_grad(model, batch, labels, weights)
    values[index] = original
    return (upper - lower) / (2 * STEP)


@pytest.mark.parametrize("normalization", [True, False])
def test_backward_matches_finite_differences(normalization):
    model, batch, labels = small_problem(normalization)
    weights = (0.6, 1.4)
    _, grads = loss_and_grad(model, batch, labels, weights)
    assert set(grads) == set(model.parameters), "FAIL: every parameter needs a gradient"
    rng = np.random.default_rng(0)
    analytic, numeric = [], []
    for name in sorted(model.parameters):
        shape = model.parameters[name].shape
        for _ in range(3):
            index = tuple(int(rng.integers(extent)) for extent in shape)
            analytic.append(grads[name][index])
            numeric.append(numeric_gradient(model, batch, labels, weights, name, index))
    analytic, numeric = np.array(analytic), np.array(numeric)
    error = np.linalg.norm(analytic - numeric) / max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    assert error < 1e-4, f"FAIL: relative gradient error {error:.3e}"


def test_parameter_shapes_closed_form():
    config = UNetConfig(in_channels=3, depth=1, base_filters=2)
    shapes = parameter_shapes(config)
    assert shapes["enc0.conv1.weight"] == (2, 3, 3, 3)
    assert shapes["enc0.conv2.weight"] == (2, 2, 3, 3)
    assert shapes["bottleneck.conv1.weight"] == (4, 2, 3, 3)
    assert shapes["dec0.up.weight"] == (4, 2, 2, 2)
    assert shapes["dec0.conv1.weight"] == (2, 4, 3, 3)
    assert shapes["head.weight"] == (2, 2, 1, 1)
    assert "enc0.conv1.bias" not in shapes and shapes["enc0.norm1.gamma"] == (2,)
    assert set(buffer_shapes(config)) == {
        f"{block}.norm{index}.{stat}"
        for block in ("enc0", "bottleneck", "dec0")
        for index in (1, 2)
        for stat in ("running_mean", "running_var")
    }

    deep = UNetConfig(depth=3, base_filters=16)
    assert parameter_shapes(deep)["bottleneck.conv2.weight"] == (128, 128, 3, 3)
    assert parameter_shapes(UNetConfig(normalization=False))["enc1.conv2.bias"] == (32,)


def test_initialization_is_seeded_and_audited():
    config = UNetConfig(depth=2, base_filters=4, seed=9)
    first, second = UNetModel.initialize(config), UNetModel.initialize(config)
    audit_shapes(first)
    for name in first.parameters:
        assert np.array_equal(first.parameters[name], second.parameters[name]), f"FAIL: {name} not reproducible"
    first.parameters["head.bias"] = np.zeros(3)
    with pytest.raises(ShapeException):
        audit_shapes(first)
    del second.buffers["enc0.norm1.running_var"]
    with pytest.raises(ShapeException):
        audit_shapes(second)


def test_forward_shapes():
    model = UNetModel.initialize(UNetConfig(in_channels=2, depth=2, base_filters=2))
    logits = forward(model, np.zeros((3, 2, 8, 12)))
    assert logits.shape == (3, 2, 8, 12)
    with pytest.raises(ShapeException):
        forward(model, np.zeros((1, 2, 6, 8)))
    with pytest.raises(ShapeException):
        forward(model, np.zeros((1, 1, 8, 8)))


def test_invalid_network_configs():
    for values in ({"in_channels": 5}, {"num_classes": 1}, {"depth": 0}, {"base_filters": 0}):
        with pytest.raises(ConfigException):
            UNetConfig(**values)
    with pytest.raises(ConfigException):
        UNetConfig.from_dict({"depth": 2, "width": 3})


def test_weighted_cross_entropy():
    logits = np.zeros((1, 2, 2, 2))
    labels = np.array([[[0, 1], [0, 0]]])
    loss, dlogits = weighted_cross_entropy(logits, labels, (1.0, 1.0))
    assert loss == pytest.approx(np.log(2.0))
    assert dlogits[0, 1, 0, 1] == pytest.approx(-0.5 / 4)
    assert dlogits[0, 1, 0, 0] == pytest.approx(0.5 / 4)

    weighted, _ = weighted_cross_entropy(logits, labels, (0.5, 2.0))
    assert weighted == pytest.approx(np.log(2.0) * (3 * 0.5 + 2.0) / 4)
    with pytest.raises(DomainException):
        weighted_cross_entropy(logits, labels + 1, (1.0, 1.0))
    with pytest.raises(ShapeException):
        weighted_cross_entropy(logits, labels, (1.0, 1.0, 1.0))


def test_adam_first_step():
    parameters = {"w": np.array([1.0, -2.0, 0.5])}
    grads = {"w": np.array([0.3, -4.0, 1e-3])}
    optimizer = Adam(learning_rate=0.1)
    optimizer.step(parameters, grads)
    expected = np.array([1.0, -2.0, 0.5]) - 0.1 * grads["w"] / (np.abs(grads["w"]) + 1e-8)
    assert np.allclose(parameters["w"], expected)
