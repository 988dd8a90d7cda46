from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nlmc.finescale import GridFunction, assemble_aQ, energy
from nlmc.grid import build_grid, oversample
from nlmc.metrics import (
    ErrorReport,
    UndefinedRelativeError,
    cell_energy,
    coarse_average,
    energy_tail,
    relative_l2_error,
    reports_to_csv,
    series_to_csv,
)
from oracles import block_sums


def test_average_matches_loop_oracle(small_grid, rng):
    v = GridFunction(rng.standard_normal((2, small_grid.num_fine)))
    avg = coarse_average(small_grid, v)
    for i in range(2):
        np.testing.assert_allclose(avg[i], block_sums(v.values[i], 4, 8), rtol=1e-12)


def test_average_of_constant():
    g = build_grid(3, 5)
    avg = coarse_average(g, GridFunction(np.full((2, g.num_fine), 7.0)))
    np.testing.assert_allclose(avg, 7.0)


def test_known_error_value():
    f = np.array([[1.0, 2.0], [1.0, 2.0]])
    ms = np.array([[1.0, 1.0], [1.0, 2.0]])
    e1, e2 = relative_l2_error(f, ms)
    assert f"{100 * e1:.2f}" == "44.72"
    assert e2 == 0.0


@given(
    f=arrays(float, (2, 6), elements=st.floats(0.1, 10)),
    ms=arrays(float, (2, 6), elements=st.floats(-10, 10)),
    c=st.floats(1e-3, 1e3),
)
@settings(max_examples=50, deadline=None)
def test_error_scale_invariant(f, ms, c):
    a = relative_l2_error(f, ms)
    b = relative_l2_error(c * f, c * ms)
    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-15)


def test_error_of_zero_reference():
    z = np.zeros((2, 4))
    assert relative_l2_error(z, z) == (0.0, 0.0)
    with pytest.raises(UndefinedRelativeError):
        relative_l2_error(z, z + 1e-3)
    with pytest.raises(ValueError):
        relative_l2_error(np.zeros((2, 3)), np.zeros((2, 4)))


def test_cell_energy_sums_to_quadratic_form(small_grid, small_media, rng):
    v = GridFunction(rng.standard_normal((2, small_grid.num_fine)))
    total = cell_energy(small_grid, small_media, v).sum()
    assert total == pytest.approx(energy(assemble_aQ(small_grid, small_media), v), rel=1e-12)
    assert np.all(cell_energy(small_grid, small_media, v) >= 0)


def test_energy_tail(small_grid, small_media, rng):
    v = GridFunction(rng.standard_normal((2, small_grid.num_fine)))
    full = energy_tail(small_grid, small_media, v, None)
    assert full == pytest.approx(energy(assemble_aQ(small_grid, small_media), v), rel=1e-12)
    assert energy_tail(small_grid, small_media, v, small_grid.domain()) == 0.0
    tails = [energy_tail(small_grid, small_media, v, oversample(small_grid, 5, m)) for m in range(4)]
    assert all(x >= y for x, y in zip([full] + tails, tails))


def _report(H, m, e1, e2, area=None):
    return ErrorReport(Fraction(H), m, e1, e2, area)


def test_csv_without_area():
    reports = [_report(Fraction(1, 8), 3, 0.0944, 0.1), _report(Fraction(1, 16), 5, 0.0018, 0.002)]
    text = reports_to_csv(reports).splitlines()
    assert text[0] == "H,m,e1_pct,e2_pct"
    assert text[1] == "1/8,3,9.4400,10.0000"


def test_csv_with_area_for_m_sweep():
    reports = [_report(Fraction(1, 32), m, 0.01, 0.02, a) for m, a in ((3, 0.0479), (4, 0.0791))]
    text = reports_to_csv(reports).splitlines()
    assert text[0] == "H,m,area_ratio_pct,e1_pct,e2_pct"
    assert text[1] == "1/32,3,4.79,1.0000,2.0000"


def test_csv_global_bases():
    assert reports_to_csv([_report(1, None, 0.0, 0.0)], with_area=False).splitlines()[1] == "1,global,0.0000,0.0000"


def test_series_csv():
    r = _report(Fraction(1, 16), 5, 0.0, 0.0)
    r.series = [(0.25, 0.5, 0.25)]
    assert series_to_csv(r).splitlines() == ["time,e1_pct,e2_pct", "0.25,50.0000,25.0000"]
