"""Shared finite-difference gradient-check harness (float64 paths)."""

import numpy as np

from specklecut import nn

FD_STEP = 1e-5


def build_random_net(rng):
    """8x8x1 tiny net with randomized activations, pooling, and head."""
    conv_act = rng.choice(["relu", "tanh", "sigmoid"])
    hidden_act = rng.choice(["relu", "tanh", "sigmoid"])
    use_gap = rng.random() < 0.3
    binary = rng.random() < 0.3
    k = 1 if binary else int(rng.integers(2, 5))

    def arr(*shape):
        return rng.standard_normal(shape) * 0.6

    layers = [
        nn.ConvLayerSpec(filters=2, kernel=(3, 3), weights=arr(3, 3, 1, 2),
                         bias=arr(2) * 0.2, activation=conv_act),
        nn.PoolLayerSpec(kernel=(2, 2), stride=(2, 2)),
    ]
    feat = 2 if use_gap else 18
    layers.append(nn.GapSpec() if use_gap else nn.FlattenSpec())
    layers.append(nn.DenseLayerSpec(units=4, weights=arr(feat, 4),
                                    bias=arr(4) * 0.2, activation=hidden_act))
    layers.append(nn.DenseLayerSpec(
        units=k, weights=arr(4, k), bias=arr(k) * 0.2,
        activation="sigmoid" if binary else "softmax"))
    net = nn.NetworkSpec(input_shape=(8, 8, 1), layers=layers)
    nn.validate_network(net)
    return net, k, binary


def composed_loss(net, x, onehot, binary):
    out = nn.network_forward(net, x)
    if binary:
        p = min(max(out[0], 1e-12), 1 - 1e-12)
        y = onehot[0]
        return -(y * np.log(p) + (1 - y) * np.log(1 - p))
    return -np.log(max(out[onehot.argmax()], 1e-12))


def analytic_grads(net, x, onehot, binary):
    cache = nn.ForwardCache()
    out = nn.network_forward(net, x, cache=cache)
    dlogits = out - onehot  # fused softmax+CE / sigmoid+BCE gradient
    return nn.network_backward(net, cache, dlogits, from_logits=True)


def worst_relative_error(net, x, onehot, binary):
    # denominator floored at 1e-6: below that, central differences with
    # step 1e-5 only carry cancellation noise, not a measurable ratio
    grads = analytic_grads(net, x, onehot, binary).flat()
    params = nn.parameters(net)
    worst = 0.0
    for arr, g in zip(params, grads):
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + FD_STEP
            hi = composed_loss(net, x, onehot, binary)
            flat[idx] = orig - FD_STEP
            lo = composed_loss(net, x, onehot, binary)
            flat[idx] = orig
            fd = (hi - lo) / (2 * FD_STEP)
            denom = max(abs(gflat[idx]) + abs(fd), 1e-6)
            worst = max(worst, abs(gflat[idx] - fd) / denom)
    return worst


def run_seeded_check(seed):
    """Worst relative FD error for one randomized tiny network."""
    rng = np.random.default_rng(seed)
    net, k, binary = build_random_net(rng)
    x = rng.standard_normal((8, 8, 1))
    onehot = np.zeros(k)
    onehot[rng.integers(0, k)] = 1.0
    return worst_relative_error(net, x, onehot, binary)
