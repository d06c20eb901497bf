import numpy as np
import pytest

from codine.net import (
    SGD,
    Adam,
    MlpParams,
    NonFiniteError,
    TrainConfig,
    backward,
    forward,
    init_params,
    optimizer_step,
)


def _manual_forward(params, x):
    # independent trace: explicit loops over units, stable softplus by hand
    h = [list(row) for row in x]
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        nxt = []
        for row in h:
            z = [b[j] + sum(row[i] * w[i, j] for i in range(len(row))) for j in range(w.shape[1])]
            if k < len(params.weights) - 1:
                z = [np.log(np.exp(v) + 1.0) if v < 30 else v for v in z]
            nxt.append(z)
        h = nxt
    return np.array([r[0] for r in h])


def _numeric_grad(params, x, g, eps=1e-5):
    def obj():
        return float(np.sum(g * forward(params, x)))

    grads = []
    for arr in params.arrays():
        out = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            old = arr[idx]
            arr[idx] = old + eps
            up = obj()
            arr[idx] = old - eps
            down = obj()
            arr[idx] = old
            out[idx] = (up - down) / (2 * eps)
        grads.append(out)
    return grads


def _flat(dw, db):
    out = []
    for w, b in zip(dw, db):
        out += [w, b]
    return out


def test_zero_network_outputs_zero():
    p = MlpParams([np.zeros((3, 4)), np.zeros((4, 1))], [np.zeros(4), np.zeros(1)])
    assert np.array_equal(forward(p, np.ones((5, 3))), np.zeros(5))


def test_affine_single_layer():
    p = MlpParams([np.array([[2.0], [-1.0]])], [np.array([0.5])])
    x = np.array([[1.0, 3.0], [0.0, 0.0]])
    assert np.allclose(forward(p, x), [2 - 3 + 0.5, 0.5])


def test_seeded_2_16_1_matches_hand_trace():
    p = init_params((2, 16, 1), np.random.default_rng(7))
    p.biases[0][:] = np.linspace(-1, 1, 16)
    p.biases[1][:] = 0.3
    x = np.array([[-0.8, 0.2], [0.5, 0.9], [0.0, -1.0]])
    assert np.allclose(forward(p, x), _manual_forward(p, x), rtol=1e-12, atol=1e-14)


def test_shape_validation():
    p = init_params((2, 4, 1), np.random.default_rng(0))
    with pytest.raises(ValueError):
        forward(p, np.zeros((3, 3)))
    with pytest.raises(ValueError):
        backward(p, np.zeros((3, 2)), np.zeros(4))
    with pytest.raises(ValueError):
        MlpParams([np.zeros((2, 3)), np.zeros((4, 1))], [np.zeros(3), np.zeros(1)])
    with pytest.raises(ValueError):
        MlpParams([np.zeros((2, 2))], [np.zeros(2)])


@pytest.mark.parametrize("act", ["softplus", "tanh"])
@pytest.mark.parametrize("sizes", [(1, 1), (2, 5, 1), (3, 16, 8, 1), (4, 7, 7, 1)])
def test_gradient_check(sizes, act):
    rng = np.random.default_rng(sum(sizes))
    p = init_params(sizes, rng, act)
    for b in p.biases:
        b[:] = rng.normal(0, 0.3, b.shape)
    x = rng.uniform(-1, 1, (6, sizes[0]))
    g = rng.normal(size=6)
    analytic = _flat(*backward(p, x, g))
    numeric = _numeric_grad(p, x, g)
    for a, n in zip(analytic, numeric):
        assert a.shape == n.shape
        scale = np.maximum(np.abs(a) + np.abs(n), 1e-6)
        assert np.max(np.abs(a - n) / scale) <= 1e-4


def test_zero_output_gradient_gives_zero_grads():
    p = init_params((3, 8, 1), np.random.default_rng(1))
    dw, db = backward(p, np.ones((4, 3)), np.zeros(4))
    assert all(not w.any() for w in dw) and all(not b.any() for b in db)


def test_linear_one_one_gradient():
    p = MlpParams([np.array([[1.7]])], [np.array([0.2])])
    dw, db = backward(p, np.array([[0.6]]), np.array([1.0]))
    assert dw[0][0, 0] == pytest.approx(0.6)
    assert db[0][0] == pytest.approx(1.0)


def test_sgd_ascends():
    p = MlpParams([np.array([[1.0]])], [np.array([0.0])])
    optimizer_step(p, ([np.array([[2.0]])], [np.array([-1.0])]), SGD(0.1))
    assert p.weights[0][0, 0] == pytest.approx(1.2)
    assert p.biases[0][0] == pytest.approx(-0.1)


def test_adam_first_step_magnitude_is_lr():
    p = MlpParams([np.array([[1.0], [1.0]])], [np.zeros(1)])
    opt = Adam(0.01)
    g = ([np.array([[3.0], [-0.02]])], [np.array([1e-3])])
    optimizer_step(p, g, opt)
    # bias-corrected moments give lr * g / (|g| + eps)
    assert np.allclose(p.weights[0], [[1.01], [0.99]], atol=1e-6)
    assert p.biases[0][0] == pytest.approx(0.01, abs=1e-6)


@pytest.mark.parametrize("opt", [SGD(0.5), Adam(0.5)])
def test_zero_gradient_leaves_params(opt):
    p = init_params((2, 3, 1), np.random.default_rng(2))
    before = p.copy()
    optimizer_step(p, ([np.zeros_like(w) for w in p.weights], [np.zeros_like(b) for b in p.biases]), opt)
    for a, b in zip(p.arrays(), before.arrays()):
        assert np.array_equal(a, b)


def test_non_finite_gradient_aborts():
    p = init_params((2, 3, 1), np.random.default_rng(3))
    before = p.copy()
    dw = [np.zeros_like(w) for w in p.weights]
    dw[1][0, 0] = np.nan
    with pytest.raises(NonFiniteError, match="layer 1"):
        optimizer_step(p, (dw, [np.zeros_like(b) for b in p.biases]), SGD(0.1))
    assert all(np.array_equal(a, b) for a, b in zip(p.arrays(), before.arrays()))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_parameters_after_step_abort():
    p = MlpParams([np.array([[1e308]])], [np.array([0.0])])
    with pytest.raises(NonFiniteError):
        optimizer_step(p, ([np.array([[1e308]])], [np.array([0.0])]), SGD(10.0))


def test_init_is_seeded_and_bounded():
    a = init_params((4, 64, 1), np.random.default_rng(11))
    b = init_params((4, 64, 1), np.random.default_rng(11))
    assert all(np.array_equal(x, y) for x, y in zip(a.arrays(), b.arrays()))
    assert np.abs(a.weights[0]).max() <= 0.5
    assert np.abs(a.weights[1]).max() <= 1 / 8


def test_deterministic_trajectory():
    def run():
        rng = np.random.default_rng(5)
        p = init_params((2, 8, 1), rng)
        opt = Adam(0.01)
        for _ in range(20):
            x = rng.uniform(-1, 1, (16, 2))
            optimizer_step(p, backward(p, x, rng.normal(size=16)), opt)
        return p

    a, b = run(), run()
    assert all(np.array_equal(x, y) for x, y in zip(a.arrays(), b.arrays()))


def test_params_round_trip():
    p = init_params((3, 5, 1), np.random.default_rng(4), "tanh")
    q = MlpParams.from_dict(p.to_dict())
    assert q.hidden_activation == "tanh"
    assert all(np.array_equal(x, y) for x, y in zip(p.arrays(), q.arrays()))


class TestTrainConfig:
    def test_defaults(self):
        c = TrainConfig()
        assert c.hidden == (64, 64)
        assert c.optimizer == "adam"

    @pytest.mark.parametrize(
        "kw",
        [{"epochs": 0}, {"batch_size": 0}, {"learning_rate": 0.0}, {"learning_rate": -1e-3},
         {"optimizer": "rmsprop"}, {"hidden": (0,)}, {"hidden_activation": "relu"}, {"seed": -1},
         {"input_transform": "logit"}],
    )
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            TrainConfig(**kw)

    def test_cosine_schedule(self):
        c = TrainConfig(learning_rate=1.0)
        assert c.learning_rate_at(0.0) == pytest.approx(1.0)
        assert c.learning_rate_at(0.5) == pytest.approx(0.5)
        assert c.learning_rate_at(1.0) == pytest.approx(0.0)
        assert TrainConfig(learning_rate=0.3, lr_schedule="constant").learning_rate_at(0.9) == 0.3
