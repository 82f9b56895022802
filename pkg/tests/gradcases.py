"""Finite-difference gradient cases shared by the unit and acceptance suites."""
import numpy as np

from knockclf.neural import Model, ModelConfig, parameter_shapes
from knockclf.neural import ops
from knockclf.neural.recurrent import lstm_forward, rnn_forward
from oracles import grad_errors


def _away_from_zero(rng, shape, margin=0.05):
    x = rng.standard_normal(shape)
    return np.where(np.abs(x) < margin, np.sign(x + 1e-12) * margin * 2, x)


def case_conv1d(seed):
    rng = np.random.default_rng(seed)
    B, C, L, O, K = 2, 3, 7, 4, 3
    arrays = [rng.standard_normal((B, C, L)), rng.standard_normal((O, C, K)), rng.standard_normal(O)]
    return grad_errors(lambda t: ops.conv1d(t[0], t[1], t[2], pad=1), arrays, seed)


def case_pool(seed):
    rng = np.random.default_rng(seed)
    return grad_errors(lambda t: ops.avg_pool1d(t[0], 2), [rng.standard_normal((2, 3, 8))], seed)


def case_linear(seed):
    rng = np.random.default_rng(seed)
    arrays = [rng.standard_normal((4, 5)), rng.standard_normal((3, 5)), rng.standard_normal(3)]
    return grad_errors(lambda t: ops.linear(t[0], t[1], t[2]), arrays, seed)


def case_relu(seed):
    rng = np.random.default_rng(seed)
    return grad_errors(lambda t: ops.relu(t[0]), [_away_from_zero(rng, (4, 6))], seed)


def case_rnn(seed):
    rng = np.random.default_rng(seed)
    T, F, H = 5, 8, 8
    arrays = [rng.standard_normal((2, T, F)), rng.standard_normal((H, F)) * 0.5, rng.standard_normal((H, H)) * 0.5,
              rng.standard_normal(H) * 0.5, rng.standard_normal(H) * 0.5, rng.standard_normal((2, H)) * 0.5]
    return grad_errors(lambda t: rnn_forward(*t), arrays, seed)


def case_lstm(seed):
    rng = np.random.default_rng(seed)
    T, F, H = 5, 8, 8
    arrays = [rng.standard_normal((2, T, F)), rng.standard_normal((4 * H, F)) * 0.5,
              rng.standard_normal((4 * H, H)) * 0.5, rng.standard_normal(4 * H) * 0.5,
              rng.standard_normal(4 * H) * 0.5, rng.standard_normal((2, H)) * 0.5, rng.standard_normal((2, H)) * 0.5]
    return grad_errors(lambda t: lstm_forward(*t), arrays, seed)


def case_softmax_ce(seed):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 3, size=6)
    return grad_errors(lambda t: ops.softmax_cross_entropy(t[0], labels), [rng.standard_normal((6, 3)) * 2], seed)


def _relu_margin(cfg, p, x):
    """Smallest |input| seen by any ReLU in the network."""
    from knockclf.neural import Tensor

    z1 = ops.conv1d(Tensor(x), Tensor(p["conv1.weight"]), Tensor(p["conv1.bias"]), 1).data
    z2 = ops.conv1d(Tensor(np.maximum(z1, 0)), Tensor(p["conv2.weight"]), Tensor(p["conv2.bias"]), 1).data
    z3 = np.maximum(z2, 0).transpose(0, 2, 1) @ p["frame.weight"].T + p["frame.bias"]
    return min(np.abs(z).min() for z in (z1, z2, z3))


def case_model(seed, cell):
    """Whole network at reduced width with random non-zero parameters.

    Draws are repeated until every ReLU input is at least 0.01 from its kink,
    since a central difference straddling the kink is not a derivative.
    """
    cfg = ModelConfig(cell=cell, in_channels=16, conv1_channels=4, conv2_channels=6, frame_units=8,
                      hidden_units=8, dropout_p=0.5)
    shapes = parameter_shapes(cfg)
    names = list(shapes)
    for attempt in range(100):
        rng = np.random.default_rng([seed, attempt])
        p = {n: rng.standard_normal(s) * 0.5 for n, s in shapes.items()}
        x = rng.standard_normal((2, 16, 6))
        if _relu_margin(cfg, p, x) > 0.01:
            break
    arrays = [p[n] for n in names]
    labels = np.array([0, 2])

    def build(ts):
        m = Model(cfg, {n: a.data for n, a in zip(names, ts)})
        m.params = dict(zip(names, ts))
        return ops.softmax_cross_entropy(m(x, training=False), labels)

    return grad_errors(build, arrays, seed)


OPERATION_CASES = {
    "conv1d": case_conv1d,
    "avg_pool1d": case_pool,
    "linear": case_linear,
    "relu": case_relu,
    "rnn": case_rnn,
    "lstm": case_lstm,
    "softmax_cross_entropy": case_softmax_ce,
}
MODEL_CASES = {
    "model_rnn": lambda s: case_model(s, "rnn"),
    "model_lstm": lambda s: case_model(s, "lstm"),
}
SEEDS = (0, 1, 2, 3, 4)
