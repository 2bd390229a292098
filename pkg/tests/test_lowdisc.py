import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import qmc

from wavekin import lowdisc
from wavekin.errors import ConfigError, DomainError


def test_first_points_frozen():
    pts = lowdisc.sobol_points(2, 8, skip=0)
    expected = [[0.0, 0.0], [0.5, 0.5], [0.75, 0.25], [0.25, 0.75],
                [0.375, 0.375], [0.875, 0.875], [0.625, 0.125], [0.125, 0.625]]
    assert pts.tolist() == expected


@pytest.mark.parametrize("dim", [1, 2])
def test_matches_reference_generator(dim):
    ref = qmc.Sobol(d=dim, scramble=False).random_base2(10)
    ours = lowdisc.sobol_points(dim, 1024, skip=0)
    assert np.array_equal(ours, ref)


def test_default_skip_drops_origin():
    pts = lowdisc.sobol_points(2, 4)
    assert np.all(pts > 0)
    assert np.array_equal(pts, lowdisc.sobol_points(2, 5, skip=0)[1:])


@given(skip=st.integers(0, 5000), count=st.integers(1, 64))
def test_windows_are_consistent(skip, count):
    full = lowdisc.sobol_points(2, skip + count, skip=0)
    assert np.array_equal(lowdisc.sobol_points(2, count, skip=skip), full[skip:])


@given(k=st.integers(0, 10))
def test_dyadic_blocks_are_stratified(k):
    # the first 2^k points (origin included) hit every dyadic interval of length 2^-k once
    pts = lowdisc.sobol_points(2, 2**k, skip=0)
    for d in range(2):
        cells = np.floor(pts[:, d] * 2**k).astype(int)
        assert sorted(cells) == list(range(2**k))


def test_stream_continues_where_it_stopped():
    s = lowdisc.SobolStream(2)
    a = s.take(5)
    b = s.take(3)
    assert s.index == 9
    assert np.array_equal(np.vstack([a, b]), lowdisc.sobol_points(2, 8))


@pytest.mark.parametrize("bad", [0, 3])
def test_dimension_out_of_range(bad):
    with pytest.raises(ConfigError):
        lowdisc.sobol_points(bad, 4)
    with pytest.raises(ConfigError):
        lowdisc.SobolStream(bad)


def test_count_and_skip_validation():
    with pytest.raises(ConfigError):
        lowdisc.sobol_points(1, 0)
    with pytest.raises(ConfigError):
        lowdisc.sobol_points(1, 3, skip=-1)


def test_map_to_rect_shifts_zero_time():
    pts = lowdisc.sobol_points(2, 4, skip=0)
    out = lowdisc.map_to_rect(pts, 10.0, 10.0)
    assert out[0, 0] == 10.0 * 2.0**-30
    assert out[0, 1] == 0.0
    assert np.array_equal(out[1:], pts[1:] * 10.0)


@given(st.lists(st.floats(0, 0.999), min_size=1, max_size=20),
       st.floats(0.1, 100), st.floats(0.1, 100))
def test_map_to_rect_lands_in_rectangle(us, T, R):
    pts = np.column_stack([us, us[::-1]])
    out = lowdisc.map_to_rect(pts, T, R)
    assert np.all(out[:, 0] > 0) and np.all(out[:, 0] <= T)
    assert np.all(out[:, 1] >= 0) and np.all(out[:, 1] <= R)


def test_map_to_rect_rejects_bad_box():
    with pytest.raises(ConfigError):
        lowdisc.map_to_rect(np.zeros((1, 2)), 0.0, 1.0)


def test_nested_map_and_derivative():
    # interval [v - v1, R] with v1 = u1 v; derivative with respect to v at fixed u
    R = 8.0
    m = lowdisc.AffineIntervalMap(lambda c: c[0] - c[1], lambda c: R + 0 * c[0])
    v, v1 = 3.0, 1.0
    assert m(0.0, (v, v1)) == 2.0
    assert m(1.0, (v, v1)) == R
    assert m.length((v, v1)) == 6.0
    outer = lowdisc.AffineIntervalMap(lambda v: 0 * v, lambda v: v, dupper=lambda v: 1.0)
    assert outer.derivative(0.25, 2.0) == 0.25


def test_degenerate_interval_raises():
    m = lowdisc.AffineIntervalMap(lambda c: c, lambda c: c - 1.0)
    with pytest.raises(DomainError):
        m(0.5, 2.0)


def test_export_samples_csv(tmp_path):
    u = lowdisc.sobol_points(2, 4)
    lowdisc.export_samples_csv(tmp_path / "s.csv", u, lowdisc.map_to_rect(u, 1.0, 2.0))
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "index,u1,u2,mapped1,mapped2"
    assert len(lines) == 5
