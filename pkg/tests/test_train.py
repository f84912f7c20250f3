import numpy as np
import numpy.testing as npt
import pytest

from specklecut import nn, training
from specklecut.dataset import load_planes
from specklecut.errors import EmptyDataset, InvalidDistribution, ShapeMismatch
from specklecut.imaging import AugmentSpec, ChannelMode
from specklecut.synth import SynthDatasetSpec, default_material_classes, generate_dataset
from specklecut.training import (
    OptimizerState,
    TrainConfig,
    adam_step,
    binary_cross_entropy,
    categorical_cross_entropy,
    evaluate,
    fit,
)


def mini_net(k=4, seed=0, head="softmax", side=16):
    """Small trainable net for 16x16 planes; fast enough for loop tests."""
    rng = np.random.default_rng(seed)

    def he(shape, fan_in):
        lim = np.sqrt(6.0 / fan_in)
        return rng.uniform(-lim, lim, shape).astype(np.float32)

    s2 = (side - 2) // 2          # after conv 3x3 + pool 2
    s4 = (s2 - 2) // 2            # after second conv + pool
    feat = s4 * s4 * 8
    layers = [
        nn.ConvLayerSpec(filters=4, kernel=(3, 3), weights=he((3, 3, 1, 4), 9),
                         bias=np.zeros(4, np.float32), activation="relu"),
        nn.PoolLayerSpec(kernel=(2, 2), stride=(2, 2)),
        nn.ConvLayerSpec(filters=8, kernel=(3, 3), weights=he((3, 3, 4, 8), 36),
                         bias=np.zeros(8, np.float32), activation="relu"),
        nn.PoolLayerSpec(kernel=(2, 2), stride=(2, 2)),
        nn.FlattenSpec(),
        nn.DenseLayerSpec(units=16, weights=he((feat, 16), feat),
                          bias=np.zeros(16, np.float32), activation="relu"),
        nn.DenseLayerSpec(units=k, weights=he((16, k), 16),
                          bias=np.zeros(k, np.float32), activation=head),
    ]
    return nn.NetworkSpec(input_shape=(side, side, 1), layers=layers)


@pytest.fixture(scope="module")
def speckle_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("data") / "speckle16"
    spec = SynthDatasetSpec(classes=default_material_classes(),
                            images_per_class=10, image_size=16,
                            laser_wavelength_nm=650, seed=11)
    generate_dataset(spec, root)
    return root


@pytest.fixture()
def dataset(speckle_root):
    from specklecut.dataset import load_dataset
    return load_dataset(speckle_root)


RED = ChannelMode("red")


# -------------------------------------------------------------- losses

def test_cce_confident_correct_is_zero():
    y = np.array([0.0, 1.0, 0.0])
    loss, grad = categorical_cross_entropy(y, y)
    assert loss == 0.0
    npt.assert_array_equal(grad, np.zeros(3))


def test_cce_uniform_30_classes():
    p = np.full(30, 1 / 30)
    y = np.zeros(30)
    y[7] = 1.0
    loss, _ = categorical_cross_entropy(p, y)
    assert loss == pytest.approx(np.log(30.0), abs=1e-9)
    assert loss == pytest.approx(3.4012, abs=1e-4)


def test_cce_rejects_bad_inputs():
    with pytest.raises(InvalidDistribution):
        categorical_cross_entropy(np.array([0.9, 0.9]), np.array([1.0, 0.0]))
    with pytest.raises(InvalidDistribution):
        categorical_cross_entropy(np.array([0.5, 0.5]), np.array([1.0, 1.0]))
    with pytest.raises(InvalidDistribution):
        categorical_cross_entropy(np.array([0.5, 0.5]), np.array([0.5, 0.5]))


def test_fused_cce_gradient_is_p_minus_y_exactly():
    rng = np.random.default_rng(0)
    z = rng.standard_normal(6)
    p = nn.softmax(z)
    y = np.zeros(6)
    y[2] = 1.0
    _, grad = categorical_cross_entropy(p, y)
    npt.assert_array_equal(grad, p - y)


def test_fused_cce_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    z = rng.standard_normal(5)
    y = np.zeros(5)
    y[3] = 1.0
    _, grad = categorical_cross_entropy(nn.softmax(z), y)
    h = 1e-6
    for j in range(5):
        zp, zm = z.copy(), z.copy()
        zp[j] += h
        zm[j] -= h
        fd = (categorical_cross_entropy(nn.softmax(zp), y)[0]
              - categorical_cross_entropy(nn.softmax(zm), y)[0]) / (2 * h)
        assert abs(fd - grad[j]) / max(abs(fd), 1e-6) < 1e-4


def test_bce_values_and_gradient_sign():
    loss, grad = binary_cross_entropy(0.5, 1)
    assert loss == pytest.approx(np.log(2.0), abs=1e-12)
    assert binary_cross_entropy(0.5, 0)[0] == pytest.approx(np.log(2.0))
    assert binary_cross_entropy(1 - 1e-9, 1)[0] < 1e-6
    assert binary_cross_entropy(0.9, 0)[1] > 0
    assert binary_cross_entropy(0.1, 1)[1] < 0


# ------------------------------------------------------------- optimizer

def test_adam_zero_gradient_keeps_parameters():
    p = [np.ones((3, 2), np.float32)]
    g = [np.zeros((3, 2), np.float32)]
    state = OptimizerState.for_params(p)
    adam_step(p, g, state, TrainConfig())
    npt.assert_array_equal(p[0], np.ones((3, 2)))


@pytest.mark.parametrize("g", [1.0, 100.0])
def test_adam_first_step_magnitude(g):
    p = [np.zeros(1)]
    state = OptimizerState.for_params(p)
    adam_step(p, [np.array([g])], state, TrainConfig())
    assert p[0][0] == pytest.approx(-0.001, rel=1e-6)


def test_adamax_first_step():
    p = [np.zeros(1)]
    state = OptimizerState.for_params(p)
    cfg = TrainConfig(optimizer="adamax")
    adam_step(p, [np.array([2.0])], state, cfg)
    # m-hat = 2, u = 2 -> step = lr * 2 / (2 + eps)
    assert p[0][0] == pytest.approx(-0.001, rel=1e-6)


def test_adam_shape_mismatch():
    p = [np.zeros(2)]
    state = OptimizerState.for_params(p)
    with pytest.raises(ShapeMismatch):
        adam_step(p, [np.zeros(3)], state, TrainConfig())


def test_descent_on_fixed_batch(dataset):
    net = mini_net(seed=3)
    train = dataset.split("train")
    planes = load_planes(train, RED)[:16]
    labels = train.labels()[:16]
    params = nn.parameters(net)
    state = OptimizerState.for_params(params)
    cfg = TrainConfig(learning_rate=1e-3, batch_size=16)
    losses = []
    for _ in range(11):
        cache = nn.ForwardCache()
        probs = nn.forward_batch(net, planes, cache)
        loss, dlogits, _ = training._batch_loss_and_grad(probs, labels,
                                                         "categorical_ce")
        losses.append(loss)
        grads = nn.network_backward(net, cache, dlogits, from_logits=True)
        adam_step(params, grads.flat(), state, cfg)
    for a, b in zip(losses, losses[1:]):
        assert b <= a + 1e-7


# ------------------------------------------------------------------ fit

def small_cfg(**kw):
    base = dict(learning_rate=1e-3, batch_size=8, epochs=4,
                early_stop_patience=10, seed=5)
    base.update(kw)
    return TrainConfig(**base)


def test_fit_runs_and_logs(dataset):
    net = mini_net(seed=1)
    net, hist = fit(net, dataset.split("train"), dataset.split("val"),
                    small_cfg(), RED)
    assert len(hist.epochs) == 4
    assert 0 <= hist.best_epoch < 4
    assert not hist.stopped_early
    vals = [e.val_loss for e in hist.epochs]
    assert vals[hist.best_epoch] == min(vals)


def test_fit_is_bit_deterministic(dataset):
    results = []
    for _ in range(2):
        net = mini_net(seed=1)
        _, hist = fit(net, dataset.split("train"), dataset.split("val"),
                      small_cfg(), RED,
                      augment_spec=AugmentSpec(seed=5))
        results.append(hist)
    assert results[0].to_csv() == results[1].to_csv()
    assert results[0] == results[1]


def test_fit_best_weights_reproduce_best_val_loss(dataset):
    net = mini_net(seed=2)
    net, hist = fit(net, dataset.split("train"), dataset.split("val"),
                    small_cfg(epochs=5), RED)
    val_loss, _, _ = evaluate(net, dataset.split("val"), RED)
    assert val_loss == hist.epochs[hist.best_epoch].val_loss


def test_fit_constant_val_loss_stops_at_patience_plus_one(dataset):
    # learning rate below float32 resolution: weights never move
    net = mini_net(seed=1)
    cfg = small_cfg(learning_rate=1e-30, epochs=50, early_stop_patience=3)
    net, hist = fit(net, dataset.split("train"), dataset.split("val"),
                    cfg, RED)
    assert hist.stopped_early
    assert len(hist.epochs) == 4  # patience + 1
    assert hist.best_epoch == 0


def test_fit_steps_per_epoch_caps_batches(dataset):
    net = mini_net(seed=1)
    cfg = small_cfg(steps_per_epoch=1, epochs=2)
    net, hist = fit(net, dataset.split("train"), dataset.split("val"),
                    cfg, RED)
    assert len(hist.epochs) == 2


def test_fit_rejects_mismatched_head(dataset):
    net = mini_net(k=3)
    with pytest.raises(ShapeMismatch):
        fit(net, dataset.split("train"), dataset.split("val"),
            small_cfg(), RED)


def test_fit_rejects_empty_split(dataset):
    net = mini_net()
    empty = dataset.split("train")
    empty.records = []
    with pytest.raises(EmptyDataset):
        fit(net, empty, dataset.split("val"), small_cfg(), RED)


def test_history_csv_shape(dataset):
    net = mini_net(seed=1)
    _, hist = fit(net, dataset.split("train"), dataset.split("val"),
                  small_cfg(epochs=2), RED)
    lines = hist.to_csv().strip().split("\n")
    assert lines[0] == "epoch,train_loss,train_acc,val_loss,val_acc"
    assert len(lines) == 3
    assert lines[1].startswith("0,")


# ------------------------------------------------------------- evaluate

def test_evaluate_uniform_net_predicts_class_zero(dataset):
    net = mini_net()
    for layer in net.layers:
        if hasattr(layer, "weights"):
            layer.weights[:] = 0.0
            layer.bias[:] = 0.0
    val = dataset.split("val")
    loss, acc, probs = evaluate(net, val, RED)
    assert probs.shape == (len(val), 4)
    # argmax ties break to index 0, so accuracy is the share of class-0 labels
    assert acc == pytest.approx((val.labels() == 0).mean())
    assert loss == pytest.approx(np.log(4.0), abs=1e-5)


def test_evaluate_prediction_count(dataset):
    net = mini_net(seed=1)
    _, _, probs = evaluate(net, dataset.split("test"), RED)
    assert probs.shape[0] == len(dataset.split("test"))


def test_evaluate_empty_raises(dataset):
    net = mini_net()
    empty = dataset.split("val")
    empty.records = []
    with pytest.raises(EmptyDataset):
        evaluate(net, empty, RED)


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(optimizer="sgd")
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0)
    with pytest.raises(ValueError):
        TrainConfig(beta1=1.0)
    with pytest.raises(ValueError):
        TrainConfig(loss="hinge")


def test_train_config_json_round_trip():
    cfg = TrainConfig(optimizer="adamax", batch_size=64, steps_per_epoch=120,
                      seed=9, loss="binary_ce")
    assert TrainConfig.from_json(cfg.to_json()) == cfg
