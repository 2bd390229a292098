import numpy as np
import pytest
from hypothesis import given, strategies as st

from wavekin import field
from wavekin.errors import NumericError


def central(f, x, h=1e-6):
    return (f(x + h) - f(x - h)) / (2 * h)


def test_param_count_default():
    assert field.param_count((2, 128, 128, 1)) == 2 * 128 + 128 + 128 * 128 + 128 + 128 + 1


def test_zero_network_value():
    # every hidden unit of the zero network outputs 1/2, the output is 0
    p = field.zero_params((2, 4, 3, 1))
    assert field.forward(p, 0.3, 0.7).value == 0.0


def test_unit_network_oracle():
    # 1-1-1-1 chain with unit weights, zero biases: out = sigma(sigma(t + x))
    p = field.NetworkParameters([np.ones((1, 2)), np.ones((1, 1)), np.ones((1, 1))],
                                [np.zeros(1), np.zeros(1), np.zeros(1)])
    rec = field.forward(p, 0.0, 0.0)
    assert rec.value == pytest.approx(0.6224593312018546, abs=1e-15)
    # d/dt = sigma'(sigma(0)) * sigma'(0)
    s = 0.6224593312018546
    assert rec.d_dt == pytest.approx(s * (1 - s) * 0.25, rel=1e-14)
    assert rec.d_dx == pytest.approx(rec.d_dt, rel=1e-14)


def test_init_is_seeded(small_params):
    again = field.init_params(7, widths=(2, 6, 5, 1))
    assert np.array_equal(again.ravel(), small_params.ravel())
    other = field.init_params(8, widths=(2, 6, 5, 1))
    assert not np.array_equal(other.ravel(), small_params.ravel())


def test_scaled_init_statistics():
    p = field.init_params(0, scheme="scaled")
    assert np.all(p.biases[0] == 0)
    assert np.std(p.weights[1]) == pytest.approx(1 / np.sqrt(128), rel=0.05)


def test_flat_roundtrip(small_params):
    flat = small_params.ravel()
    back = field.NetworkParameters.from_flat(flat, small_params.widths)
    assert np.array_equal(back.ravel(), flat)
    with pytest.raises(ValueError):
        field.NetworkParameters.from_flat(flat[:-1], small_params.widths)


@given(st.floats(-2, 2), st.floats(0, 10), st.integers(0, 50))
def test_input_derivatives_match_fd(t, x, seed):
    p = field.init_params(seed, widths=(2, 8, 8, 1))
    rec = field.forward(p, t, x)
    fdt = central(lambda s: field.forward(p, s, x).value, t)
    fdx = central(lambda s: field.forward(p, t, s).value, x)
    assert rec.d_dt == pytest.approx(fdt, rel=1e-6, abs=1e-8)
    assert rec.d_dx == pytest.approx(fdx, rel=1e-6, abs=1e-8)


def test_objective_gradient_matches_fd(small_params, rng):
    inp = rng.uniform(0, 2, (9, 2))
    dirs = rng.standard_normal((9, 2))

    def obj(val, tan):
        J = np.sum(val ** 2) + np.sum(np.sin(tan))
        return J, 2 * val, np.cos(tan)

    J, grad = field.objective_gradient(small_params, inp, dirs, obj)
    theta = small_params.ravel()
    d = rng.standard_normal(theta.size)

    def Jat(eps):
        q = field.NetworkParameters.from_flat(theta + eps * d, small_params.widths)
        return field.objective_gradient(q, inp, dirs, obj)[0]

    assert grad.ravel() @ d == pytest.approx(central(Jat, 0.0), rel=1e-7)


def test_chunked_gradient_is_identical(small_params, rng):
    inp = rng.uniform(0, 2, (50, 2))
    dirs = rng.standard_normal((50, 2))
    obj = lambda v, t: (np.sum(v * t), t.copy(), v.copy())
    J1, g1 = field.objective_gradient(small_params, inp, dirs, obj)
    J2, g2 = field.objective_gradient(small_params, inp, dirs, obj, chunk=7)
    assert J1 == pytest.approx(J2, rel=1e-14)
    assert np.allclose(g1.ravel(), g2.ravel(), rtol=1e-12, atol=1e-14)


def test_nonfinite_input_raises(small_params):
    with pytest.raises(NumericError):
        field.forward_batch(small_params, np.array([[np.nan, 1.0]]))


def test_checkpoint_roundtrip(tmp_path, small_params):
    path = tmp_path / "ck.txt"
    field.save_checkpoint(path, small_params, seed=7)
    back = field.load_checkpoint(path)
    assert back.widths == small_params.widths
    assert np.array_equal(back.ravel(), small_params.ravel())


def test_checkpoint_without_widths(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("1.0\n2.0\n")
    with pytest.raises(ValueError):
        field.load_checkpoint(path)


def test_network_field_adapter(small_params):
    f = field.NetworkField(small_params)
    t, x = np.array([0.1, 0.5]), np.array([1.0, 3.0])
    assert np.allclose(f.value(t, x), [field.forward(small_params, a, b).value for a, b in zip(t, x)])
    assert np.allclose(f.d_dx(t, x), [field.forward(small_params, a, b).d_dx for a, b in zip(t, x)])


def test_function_field_fd_fallback():
    f = field.FunctionField(lambda t, x: t * x ** 2)
    assert f.d_dx(np.array([2.0]), np.array([3.0]))[0] == pytest.approx(12.0, rel=1e-6)
    assert field.constant_field(2.5).value(np.zeros(3), np.ones(3)).tolist() == [2.5] * 3
