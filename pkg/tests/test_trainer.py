import math

import numpy as np
import pytest

from codine.fgen import make_generator
from codine.net import MlpParams, TrainConfig, init_params
from codine.oracle import kl_to_flat
from codine.trainer import (
    CopulaModel,
    TrainingError,
    evaluate_density,
    net_input,
    train,
    train_critic,
    value_function,
)

from conftest import SPEC_D2


def _constant_net(d, raw_value):
    # 2-layer net with zero weights: raw output is the final bias
    return MlpParams([np.zeros((d, 4)), np.zeros((4, 1))], [np.zeros(4), np.array([raw_value])])


def _grid(k=21):
    g = np.linspace(0.0, 1.0, k)
    a, b = np.meshgrid(g, g, indexing="ij")
    return np.column_stack([a.ravel(), b.ravel()])


class TestValueFunction:
    rng = np.random.default_rng(0)
    pos = rng.random((500, 2))
    neg = rng.random((500, 2))

    def test_kl_constant_one(self):
        j = value_function(make_generator("kl"), _constant_net(2, 1.0), self.pos, self.neg)
        assert j == pytest.approx(0.0, abs=1e-15)

    def test_gan_constant_log_half(self):
        # -softplus(0) = log(1/2)
        gen = make_generator("gan")
        j = value_function(gen, _constant_net(2, 0.0), self.pos, self.neg)
        # f-divergence of a density from itself, by midpoint quadrature of f(1)
        direct = np.mean(gen.f(np.ones(100)))
        assert j == pytest.approx(direct, abs=1e-12)
        assert j == pytest.approx(0.0, abs=1e-12)

    def test_hd_optimal_constant(self):
        # 1 - softplus(log(e-1)) = 0 = f'(1)
        j = value_function(make_generator("hd"), _constant_net(2, math.log(math.e - 1)), self.pos, self.neg)
        assert j == pytest.approx(0.0, abs=1e-12)

    def test_is_lower_bound_for_any_critic(self):
        # D_f(pi || pi) = 0, so a random critic cannot exceed it beyond MC error
        rng = np.random.default_rng(1)
        for name in ("kl", "gan", "hd"):
            gen = make_generator(name)
            params = init_params((2, 8, 1), rng)
            a, b = rng.random((20_000, 2)), rng.random((20_000, 2))
            assert value_function(gen, params, a, b) < 0.01


def test_zero_network_density_is_inverse_e():
    model = CopulaModel(_constant_net(3, 0.0), "kl", 3)
    pts = np.random.default_rng(2).random((7, 3))
    assert np.allclose(evaluate_density(model, pts), math.exp(-1.0), rtol=1e-15)


def test_density_rejects_points_outside_cube():
    model = CopulaModel(_constant_net(2, 0.0), "kl", 2)
    with pytest.raises(ValueError, match="unit cube"):
        model(np.array([[0.5, 1.01]]))
    with pytest.raises(ValueError, match="shape"):
        model(np.zeros((3, 3)))


def test_density_clamps_boundary():
    model = CopulaModel(init_params((2, 8, 1), np.random.default_rng(3)), "gan", 2)
    corner = model(np.array([[0.0, 1.0]]))
    inside = model(np.array([[1e-12, 1 - 1e-12]]))
    assert np.isfinite(corner).all()
    assert corner[0] == pytest.approx(inside[0], rel=1e-9)


def test_smoke_tiny_run():
    u = np.random.default_rng(4).random((10, 2))
    model = train(u, "kl", TrainConfig(epochs=1, batch_size=10))
    assert model.d == 2
    assert len(model.metadata["curve"]) == 1
    assert np.all(model(u) >= 0)


@pytest.mark.parametrize("name", ["gan", "hd"])
def test_other_generators_train_and_stay_nonnegative(name):
    u = np.random.default_rng(5).random((500, 2))
    model = train(u, name, TrainConfig(epochs=3, batch_size=100))
    assert np.all(model(_grid()) >= 0)


def test_rejects_pseudo_outside_open_cube():
    with pytest.raises(ValueError, match="strictly inside"):
        train(np.array([[0.0, 0.5], [0.2, 0.3]]), "kl", TrainConfig(epochs=1))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_objective_aborts_with_context():
    u = np.random.default_rng(6).random((64, 2))
    with pytest.raises(TrainingError, match=r"epoch \d+, batch \d+"):
        train(u, "kl", TrainConfig(epochs=5, batch_size=16, learning_rate=1e6, optimizer="sgd"))


def test_callback_receives_records():
    seen = []
    u = np.random.default_rng(7).random((100, 2))
    train(u, "kl", TrainConfig(epochs=3, batch_size=50), callback=seen.append)
    assert [r["epoch"] for r in seen] == [0, 1, 2]
    assert all({"objective", "wall_time"} <= r.keys() for r in seen)


def test_training_is_deterministic():
    u = np.random.default_rng(8).random((300, 2))
    cfg = TrainConfig(epochs=4, batch_size=64, seed=42)
    a, b = train(u, "kl", cfg), train(u, "kl", cfg)
    assert all(np.array_equal(x, y) for x, y in zip(a.params.arrays(), b.params.arrays()))
    assert a.metadata["curve"] == b.metadata["curve"]


def test_custom_negative_sampler_is_used():
    calls = []

    def neg(batch, rng):
        calls.append(batch.shape)
        return rng.random(batch.shape)

    u = np.random.default_rng(9).random((40, 2))
    train_critic(u, make_generator("kl"), TrainConfig(epochs=2, batch_size=20), negatives=neg)
    assert calls == [(20, 2)] * 4


def test_model_round_trip(tmp_path):
    u = np.random.default_rng(10).random((50, 2))
    m = train(u, "hd", TrainConfig(epochs=2, batch_size=25))
    m.save(tmp_path / "model.json")
    back = CopulaModel.load(tmp_path / "model.json")
    assert back.generator == "hd"
    assert np.array_equal(back(u), m(u))


def test_net_input_transforms():
    u = np.array([[0.5, 0.975], [1e-12, 0.8413447460685429]])
    assert np.allclose(net_input(u, "linear"), [[0.0, 0.95], [-1.0, 0.6826894921370859]])
    # ndtri(0.975) = 1.959963984540054, ndtri(Phi(1)) = 1; tails clip at 3
    assert np.allclose(net_input(u, "probit"), [[0.0, 1.959963984540054 / 3], [-1.0, 1.0 / 3]])
    with pytest.raises(ValueError, match="input transform"):
        net_input(u, "logit")


def test_probit_model_round_trip(tmp_path):
    u = np.random.default_rng(11).random((50, 2))
    m = train(u, "kl", TrainConfig(epochs=2, batch_size=25, input_transform="probit"))
    assert m.input_transform == "probit"
    m.save(tmp_path / "model.json")
    back = CopulaModel.load(tmp_path / "model.json")
    assert back.input_transform == "probit"
    assert np.array_equal(back(u), m(u))
    linear = CopulaModel(m.params, "kl", 2)
    assert not np.allclose(linear(u), m(u))


def test_model_version_checked():
    d = CopulaModel(_constant_net(2, 0.0), "kl", 2).to_dict()
    d["version"] = 7
    with pytest.raises(ValueError, match="unsupported model file"):
        CopulaModel.from_dict(d)


def test_independence_recovered(independence_model):
    c = independence_model(_grid())
    assert np.max(np.abs(c - 1.0)) <= 0.15


def test_self_normalization(oracle_model_d2, independence_model):
    r = np.random.default_rng(11).random((100_000, 2))
    for model in (oracle_model_d2, independence_model):
        assert abs(model(r).mean() - 1.0) <= 0.05


def test_objective_rises_over_first_half(oracle_model_d2):
    curve = np.array(oracle_model_d2.metadata["curve"])
    smooth = np.convolve(curve, np.ones(10) / 10, "valid")
    # per-epoch noise estimated from the flat tail; tolerance is 3 SE of a window mean
    noise = np.std(np.diff(curve[len(curve) // 2:])) / math.sqrt(2)
    tol = 3 * noise * math.sqrt(2 / 10)
    assert np.min(np.diff(smooth[: len(curve) // 2])) >= -tol
    assert smooth[len(curve) // 2] > smooth[0]


def test_final_objective_is_below_true_divergence(oracle_model_d2):
    # training objective on 10^4 samples; MC error well under 0.01 nats
    assert oracle_model_d2.metadata["final_objective"] <= kl_to_flat(SPEC_D2) + 0.01
