import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from wavekin import field, wke
from wavekin.errors import ConfigError, DomainError


def plan_with(n_inner=32, layout="paired", gamma=2.0, n_W=256, n_initial=16, **kw):
    return wke.build_plan(wke.WKEConfig(gamma=gamma, n_W=n_W, n_initial=n_initial,
                                        n_inner=n_inner, layout=layout, **kw))


def test_initial_data_has_unit_mass():
    mass = integrate.quad(wke.g0, -np.inf, np.inf)[0]
    assert mass == pytest.approx(1.0, abs=1e-9)
    assert wke.g0(2.0) == pytest.approx(np.sqrt(7 / (2 * np.pi)))


def test_plan_layout():
    plan = plan_with()
    assert plan.W.shape == (256, 2)
    assert np.array_equal(plan.W0, plan.W[:16, 1])
    assert np.all((plan.W[:, 0] > 0) & (plan.W[:, 0] <= 10))
    short = wke.build_plan(wke.WKEConfig(n_W=256, n_initial=16), T=2.0)
    assert np.allclose(short.W[:, 0] * 5, plan.W[:, 0])
    assert np.array_equal(short.W[:, 1], plan.W[:, 1])


def test_config_validation():
    with pytest.raises(ConfigError):
        plan_with(n_initial=512)
    with pytest.raises(ConfigError):
        plan_with(gamma=-1)
    with pytest.warns(UserWarning):
        plan_with(n_W=100)


def test_constant_state_oracle():
    p = np.linspace(0.25, 10, 24)
    errs = []
    for n in (2**5, 2**8, 2**12):
        Q, dQ = wke.collision_and_derivative(field.constant_field(1.0), 0.0, p, plan_with(n))
        exact = 10 * p - 1.5 * p ** 2
        errs.append(np.max(np.abs(Q - exact)) / np.max(np.abs(exact)))
        if n == 2**12:
            assert np.allclose(dQ, 10 - 3 * p, atol=1e-3 * 10)
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-3


def test_constant_state_tensor_layout():
    p = np.array([1.0, 4.0, 9.0])
    Q = wke.collision_qmc(field.constant_field(1.0), 0.0, p, plan_with(64, "tensor"))
    assert np.allclose(Q, 10 * p - 1.5 * p ** 2, rtol=3e-2)


def test_zero_state_and_domain():
    plan = plan_with()
    Q, dQ = wke.collision_and_derivative(field.constant_field(0.0), 1.0, np.array([1.0, 5.0]), plan)
    assert np.all(Q == 0) and np.all(dQ == 0)
    with pytest.raises(DomainError):
        wke.collision_qmc(field.constant_field(1.0), 0.0, 10.5, plan)


@pytest.mark.parametrize("gamma", [2.0, 3.0])
@given(p=st.floats(0.1, 9.9), seed=st.integers(0, 20))
def test_dQ_matches_fd_of_discrete_operator(gamma, p, seed):
    plan = plan_with(16, gamma=gamma)
    fld = field.NetworkField(field.init_params(seed, widths=(2, 6, 6, 1)))
    _, dQ = wke.collision_and_derivative(fld, 0.7, p, plan)
    h = 1e-5
    fd = (wke.collision_qmc(fld, 0.7, p + h, plan) - wke.collision_qmc(fld, 0.7, p - h, plan)) / (2 * h)
    assert dQ[0] == pytest.approx(fd[0], rel=1e-6, abs=1e-8)


@pytest.mark.parametrize("gamma,layout", [(2.0, "paired"), (3.0, "paired"), (2.0, "tensor")])
def test_loss_gradient_matches_fd(gamma, layout, rng):
    plan = plan_with(8, layout, gamma, n_W=32, n_initial=8)
    p = field.init_params(5, widths=(2, 6, 5, 1))
    J, g = wke.loss_and_grad(p, plan)
    assert J == pytest.approx(wke.loss(field.NetworkField(p), plan), rel=1e-12)
    theta = p.ravel()
    d = rng.standard_normal(theta.size)
    h = 1e-6
    Jp = wke.loss_and_grad(field.NetworkParameters.from_flat(theta + h * d, p.widths), plan)[0]
    Jm = wke.loss_and_grad(field.NetworkParameters.from_flat(theta - h * d, p.widths), plan)[0]
    assert g.ravel() @ d == pytest.approx((Jp - Jm) / (2 * h), rel=1e-6)


def test_initial_only_loss():
    plan = plan_with(8, n_W=32, n_initial=8)
    p = field.init_params(5, widths=(2, 6, 5, 1))
    J, _ = wke.loss_and_grad(p, plan, ic_only=True)
    assert J == pytest.approx(wke.initial_loss(field.NetworkField(p), plan), rel=1e-12)
    prob = wke.WKEProblem(plan, ic_only=True)
    assert prob.n_samples == 1


def test_predict_flags_large_wavenumbers():
    vals, outside = wke.predict(field.constant_field(2.0), 1.0, np.array([1.0, 10.0, 1e6]), R=10)
    assert vals.tolist() == [2.0, 2.0, 2.0]
    assert outside.tolist() == [False, False, True]
