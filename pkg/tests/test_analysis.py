import numpy as np
import pytest
from hypothesis import given, strategies as st

from wavekin import analysis
from wavekin.errors import AlignmentError, DomainError
from wavekin.field import FunctionField, constant_field


@given(st.floats(-2.0, -0.1), st.floats(0.1, 10.0))
def test_power_law_slope_is_recovered(alpha, c):
    t = np.linspace(20, 148, 40)
    s, b, r2 = analysis.decay_slope(analysis.EnergySeries(t, c * t ** alpha))
    assert s == pytest.approx(alpha, abs=1e-10)
    assert b == pytest.approx(np.log(c), abs=1e-9)
    assert r2 == pytest.approx(1.0)


def test_slope_uses_only_window():
    t = np.linspace(1, 148, 300)
    E = np.where(t < 20, 1.0, (t / 20) ** -0.5)
    assert analysis.decay_slope(analysis.EnergySeries(t, E))[0] == pytest.approx(-0.5)


def test_slope_errors():
    with pytest.raises(ValueError):
        analysis.decay_slope(analysis.EnergySeries([1.0, 2.0], [1.0, 0.5]))
    t = np.linspace(20, 148, 10)
    with pytest.raises(DomainError):
        analysis.decay_slope(analysis.EnergySeries(t, -np.ones(10)))
    with pytest.raises(ValueError):
        analysis.EnergySeries([2.0, 1.0], [1.0, 1.0])


def test_midpoint_energy_is_exact_for_linear_fields():
    f = FunctionField(lambda t, x: 2.0 * x + t)
    assert analysis.total_energy(f, 1.0, 10.0, 64) == pytest.approx(100.0 + 10.0, rel=1e-14)
    assert analysis.total_energy(constant_field(3.0), 0.0, 2.0, 8) == pytest.approx(6.0)


def test_qmc_energy_agrees_with_midpoint():
    f = FunctionField(lambda t, x: np.exp(-((x - 2) ** 2)) * np.exp(-t))
    a = analysis.total_energy(f, 0.5, 10.0)
    b = analysis.total_energy_qmc(f, 0.5, 10.0)
    assert a == pytest.approx(b, rel=1e-3)


def test_energy_series_matches_pointwise():
    f = FunctionField(lambda t, x: x / (1 + t))
    s = analysis.energy_series(f, [0.0, 1.0, 3.0], 4.0, 32)
    assert s.energies.tolist() == pytest.approx([8.0, 4.0, 2.0])


def test_sup_error_report():
    grid = np.linspace(0, 1, 11)
    rep = analysis.sup_error(constant_field(1.0), lambda t, x: 1.0 + 0.1 * x, 0.0, grid)
    assert rep.sup_error == pytest.approx(0.1)
    assert rep.l2_error < rep.sup_error


def snap(t, x, v):
    return analysis.Snapshot(t, np.asarray(x, float), np.asarray(v, float))


def test_compare_identical_and_shifted():
    x = np.linspace(0, 10, 101)
    a = [snap(1.0, x, np.sin(x) + 2)]
    rows = analysis.compare_nn_fvs(a, a)
    assert rows[0].l2 == 0 and rows[0].sup == 0
    b = [snap(1.0, x, np.sin(x) + 2.5)]
    rows = analysis.compare_nn_fvs(b, a)
    assert rows[0].sup == pytest.approx(0.5)


def test_compare_interpolates_and_clips():
    fine = [snap(1.0, np.linspace(-1, 11, 121), np.ones(121))]
    coarse = [snap(1.0, np.linspace(0.05, 9.95, 100), np.ones(100))]
    assert analysis.compare_nn_fvs(fine, coarse)[0].l2 == 0.0


def test_compare_alignment_errors():
    x = np.linspace(0, 1, 5)
    with pytest.raises(AlignmentError):
        analysis.compare_nn_fvs([snap(1.0, x, x)], [snap(1.1, x, x)])
    with pytest.raises(AlignmentError):
        analysis.compare_nn_fvs([snap(1.0, x + 5, x)], [snap(1.0, x, x)])


def test_csv_roundtrips(tmp_path):
    s = analysis.EnergySeries([0.0, 0.5, 1.0], [1.0, 0.9, 0.8125], "fvs")
    analysis.write_energy_csv(tmp_path / "e.csv", s)
    back = analysis.read_energy_csv(tmp_path / "e.csv")
    assert back.method == "fvs"
    assert np.array_equal(back.energies, s.energies)

    snaps = [snap(0.0, [0.1, 0.2], [1.0, 2.0]), snap(1.0, [0.1, 0.2], [3.0, 4.0])]
    analysis.write_snapshots_csv(tmp_path / "s.csv", snaps)
    got = analysis.read_snapshots_csv(tmp_path / "s.csv")
    assert [g.t for g in got] == [0.0, 1.0]
    assert np.array_equal(got[1].values, [3.0, 4.0])


def test_svg_writer(tmp_path):
    path = tmp_path / "p.svg"
    analysis.svg_lines(path, [("a", [1, 2, 3], [1, 0.5, 0.25]), ("empty", [1], [-1])],
                       title="E", logx=True, logy=True)
    text = path.read_text()
    assert text.startswith("<svg") and text.count("<polyline") == 1
