import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from codine.fgen import GENERATOR_NAMES, activation, density_from_t, make_generator

U_GRID = [0.1, 0.5, 1.0, 2.0, 10.0]


@pytest.fixture(params=GENERATOR_NAMES)
def gen(request):
    return make_generator(request.param)


def test_unknown_generator_rejected():
    with pytest.raises(ValueError, match="unknown generator"):
        make_generator("tv")


def test_name_is_case_insensitive():
    assert make_generator("KL").name == "kl"


def test_t_domains():
    assert make_generator("gan").t_domain == (-math.inf, 0.0)
    assert make_generator("kl").t_domain == (-math.inf, math.inf)
    assert make_generator("hd").t_domain == (-math.inf, 1.0)


def test_f_vanishes_at_one(gen):
    assert gen.f(1.0) == pytest.approx(0.0, abs=1e-15)


def test_table_values():
    assert make_generator("kl").f(1.0) == 0.0
    # 1*log 1 - 2 log 2 + log 4
    assert make_generator("gan").f(1.0) == pytest.approx(0.0, abs=1e-15)
    # (sqrt(4) - 1)^2
    assert make_generator("hd").f(4.0) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("u", U_GRID)
def test_conjugate_inversion(gen, u):
    assert gen.f_star_prime(gen.f_prime(u)) == pytest.approx(u, abs=1e-10)


@pytest.mark.parametrize("u", U_GRID)
def test_young_fenchel_equality(gen, u):
    lhs = gen.f_star(gen.f_prime(u))
    rhs = u * gen.f_prime(u) - gen.f(u)
    assert lhs == pytest.approx(rhs, abs=1e-10)


@pytest.mark.parametrize("u", [0.2, 0.7, 1.5, 3.0, 8.0])
def test_f_prime_matches_finite_differences(gen, u):
    h = 1e-6 * max(u, 1.0)
    fd = (gen.f(u + h) - gen.f(u - h)) / (2 * h)
    assert gen.f_prime(u) == pytest.approx(fd, rel=1e-6, abs=1e-9)


def test_f_star_prime_matches_finite_differences(gen):
    lo, hi = gen.t_domain
    for t in np.linspace(max(lo, -4.0), min(hi, 2.0), 9)[1:-1]:
        h = 1e-6
        fd = (gen.f_star(t + h) - gen.f_star(t - h)) / (2 * h)
        assert gen.f_star_prime(t) == pytest.approx(fd, rel=1e-6)


@settings(max_examples=200, deadline=None)
@given(
    name=st.sampled_from(GENERATOR_NAMES),
    a=st.floats(1e-3, 1e3),
    b=st.floats(1e-3, 1e3),
)
def test_midpoint_convexity(name, a, b):
    gen = make_generator(name)
    mid = gen.f(0.5 * (a + b))
    avg = 0.5 * (gen.f(a) + gen.f(b))
    assert mid <= avg + 1e-9 * (1 + abs(avg))


def test_density_from_t_examples():
    assert density_from_t(make_generator("kl"), 1.0) == pytest.approx(1.0)
    assert density_from_t(make_generator("gan"), math.log(0.5)) == pytest.approx(1.0, abs=1e-15)
    # (f*)'(t) = 1/(1-t)^2 at t = 1 - 1/sqrt(4)
    assert density_from_t(make_generator("hd"), 0.5) == pytest.approx(4.0)


def test_density_from_t_rejects_out_of_domain():
    with pytest.raises(ValueError):
        density_from_t(make_generator("gan"), 0.1)
    with pytest.raises(ValueError):
        density_from_t(make_generator("hd"), 1.0)


def test_density_is_inverse_of_f_prime(gen):
    u = np.geomspace(1e-3, 1e3, 50)
    assert np.allclose(density_from_t(gen, gen.f_prime(u)), u, rtol=1e-10)


def test_activation_examples():
    kl, gan, hd = (make_generator(n) for n in ("kl", "gan", "hd"))
    raw = np.array([-3.0, 0.0, 2.5])
    assert np.array_equal(activation(kl, raw), raw)
    assert activation(gan, 0.0) == pytest.approx(-math.log(2.0))
    assert activation(hd, 0.0) == pytest.approx(1.0 - math.log(2.0))
    assert activation(hd, 0.0) < 1.0


@settings(max_examples=200, deadline=None)
@given(name=st.sampled_from(GENERATOR_NAMES), raw=st.floats(-30, 30))
def test_activation_lands_in_domain(name, raw):
    gen = make_generator(name)
    assert gen.in_domain(activation(gen, raw))


def test_activation_strictly_monotone_with_matching_gradient(gen):
    raw = np.linspace(-6, 6, 241)
    t = activation(gen, raw)
    step = np.diff(t)
    assert np.all(step > 0) or np.all(step < 0)
    h = 1e-6
    fd = (activation(gen, raw + h) - activation(gen, raw - h)) / (2 * h)
    assert np.allclose(gen.activation_grad(raw), fd, rtol=1e-6, atol=1e-9)
