import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wavekin import field, train
from wavekin.errors import DivergenceError, NumericError


class Quadratic:
    """Least squares on the flat parameter vector: rows are coordinates."""

    def __init__(self, target, scale=1.0):
        self.target = target
        self.scale = scale

    @property
    def n_samples(self):
        return self.target.size

    def loss_and_grad(self, params, batch=None):
        th = params.ravel().astype(float)
        sl = slice(None) if batch is None else batch
        d = np.zeros_like(th)
        d[sl] = th[sl] - self.target[sl]
        J = self.scale * np.sum(d ** 2)
        return J, field.NetworkParameters.from_flat(2 * self.scale * d, params.widths)

    def loss(self, params):
        return self.loss_and_grad(params)[0]


WIDTHS = (2, 3, 1)


def test_adam_first_step_is_lr_times_sign():
    st0 = train.AdamState.zeros(3, lr=0.1)
    st1, th = train.adam_step(st0, np.zeros(3), np.array([2.0, -5.0, 1e-3]))
    assert st1.step == 1
    assert np.allclose(th, [-0.1, 0.1, -0.1], rtol=1e-4)


def test_adam_two_steps_hand_computed():
    st0 = train.AdamState.zeros(1, lr=1.0)
    st1, th = train.adam_step(st0, np.zeros(1), np.array([1.0]))
    st2, th = train.adam_step(st1, th, np.array([3.0]))
    m = 0.9 * 0.1 + 0.1 * 3.0
    v = 0.999 * 0.001 + 0.001 * 9.0
    expected = -1.0 / (1 + 1e-8) - (m / (1 - 0.81)) / (math.sqrt(v / (1 - 0.999 ** 2)) + 1e-8)
    assert th[0] == pytest.approx(expected, rel=1e-12)


def test_adam_rejects_bad_gradients():
    st0 = train.AdamState.zeros(2)
    with pytest.raises(NumericError):
        train.adam_step(st0, np.zeros(2), np.array([np.nan, 0.0]))
    with pytest.raises(ValueError):
        train.adam_step(st0, np.zeros(2), np.zeros(3))


@given(st.integers(1, 200), st.one_of(st.none(), st.integers(1, 64)))
def test_batches_partition(n, size):
    parts = train.batches(n, size)
    covered = np.concatenate([np.arange(n)[s] for s in parts])
    assert np.array_equal(covered, np.arange(n))
    if size is not None and size < n:
        assert all(s.stop - s.start == size for s in parts[:-1])


def test_toy_quadratic_converges():
    p0 = field.zero_params(WIDTHS)
    target = np.linspace(-1, 1, p0.size())
    sched = train.TrainingSchedule([train.Stage("s", Quadratic(target), 2000)], lr=0.01)
    res = train.train(p0, sched)
    assert res.best_loss < 1e-6
    assert np.allclose(res.params.ravel(), target, atol=1e-3)
    assert [h[2] for h in res.history] == sorted(h[2] for h in res.history)


def test_zero_epoch_schedule_returns_initial():
    p0 = field.init_params(1, WIDTHS)
    sched = train.TrainingSchedule([train.Stage("s", Quadratic(np.zeros(p0.size())), 0)])
    res = train.train(p0, sched)
    assert np.array_equal(res.params.ravel(), p0.ravel())
    assert res.best_loss == pytest.approx(np.sum(p0.ravel() ** 2))


def test_minibatch_and_stages():
    p0 = field.zero_params(WIDTHS)
    t1 = np.ones(p0.size())
    t2 = -np.ones(p0.size())
    sched = train.TrainingSchedule([train.Stage("a", Quadratic(t1), 300),
                                    train.Stage("b", Quadratic(t2), 600)],
                                   batch_size=4, lr=0.05, eval_every=5)
    res = train.train(p0, sched)
    assert set(res.stage_best) == {"a", "b"}
    assert np.allclose(res.stage_params["a"].ravel(), t1, atol=0.05)
    assert np.allclose(res.params.ravel(), t2, atol=0.05)
    stages = [h[0] for h in res.history]
    assert stages.index("b") > stages.index("a")


def test_best_parameters_are_returned():
    # a huge learning rate makes late iterates worse than early ones
    p0 = field.zero_params(WIDTHS)
    prob = Quadratic(np.full(p0.size(), 0.01))
    res = train.train(p0, train.TrainingSchedule([train.Stage("s", prob, 30)], lr=1.0,
                                                 divergence_factor=1e12))
    assert prob.loss(res.params) == pytest.approx(res.best_loss)
    assert res.best_loss == min(h[4] for h in res.history if not math.isnan(h[4]))


def test_divergence_aborts():
    class Exploding(Quadratic):
        def loss_and_grad(self, params, batch=None):
            J, g = super().loss_and_grad(params, batch)
            return J * 1e9 + 1.0, g

        def loss(self, params):
            return Quadratic.loss_and_grad(self, params)[0]

    p0 = field.init_params(0, WIDTHS)
    sched = train.TrainingSchedule([train.Stage("s", Exploding(np.zeros(p0.size())), 5)])
    with pytest.raises(DivergenceError) as info:
        train.train(p0, sched)
    assert len(info.value.history) >= 1


def test_history_csv(tmp_path):
    path = tmp_path / "h.csv"
    train.write_history(path, [("s", 0, 0, math.nan, 1.5), ("s", 1, 1, 1.5, 1.25)])
    lines = path.read_text().splitlines()
    assert lines[0].startswith("#")
    assert lines[1] == ",".join(train.HISTORY_COLUMNS)
    assert lines[3] == "s,1,1,1.5,1.25"


def test_lowest_loss_across_stages_is_returned():
    p0 = field.zero_params(WIDTHS)
    easy = Quadratic(np.zeros(p0.size()))
    hard = Quadratic(np.ones(p0.size()), scale=100.0)
    sched = train.TrainingSchedule([train.Stage("easy", easy, 5), train.Stage("hard", hard, 3)],
                                   lr=0.01)
    res = train.train(p0, sched)
    assert res.best_loss == res.stage_best["easy"] < res.stage_best["hard"]
    assert np.array_equal(res.params.ravel(), res.stage_params["easy"].ravel())
