import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from ebmono.mixture import GridFunction
from ebmono.summaries import Metric, all_distances, distance, summarize

GRID = np.linspace(0.0, 8.0, 4096)


def test_constant_trace():
    f = np.exp(-GRID)
    b = summarize(np.tile(f, (7, 1)), GRID)
    for g in (b.median, b.low, b.high):
        assert np.array_equal(g.values, f)


def test_two_draws_midpoint():
    d = np.vstack((np.zeros(GRID.size), np.ones(GRID.size)))
    assert np.allclose(summarize(d, GRID).median.values, 0.5)


@settings(max_examples=40, deadline=None)
@given(arrays(float, (9, 12), elements=st.floats(0, 10)))
def test_band_ordering(draws):
    b = summarize(draws, np.arange(12.0))
    assert np.all(b.low.values <= b.median.values + 1e-12)
    assert np.all(b.median.values <= b.high.values + 1e-12)


def test_summarize_errors():
    with pytest.raises(ValueError):
        summarize(np.empty((0, 4)), np.arange(4.0))
    with pytest.raises(ValueError):
        summarize(np.ones((3, 4)), np.arange(4.0), quantiles=(0.9, 0.1))


def test_distance_zero():
    f = GridFunction(GRID, np.cos(GRID))
    assert all(v == 0.0 for v in all_distances(f, f).values())


def test_constant_offset():
    f = GridFunction(GRID, np.sin(GRID))
    g = GridFunction(GRID, np.sin(GRID) + 0.3)
    assert distance(f, g, "L1") == pytest.approx(2.4)
    assert distance(f, g, Metric.SUP) == pytest.approx(0.3)
    assert distance(f, g, Metric.L2) == pytest.approx(0.72)
    assert distance(f, g, Metric.L2_NORM) == pytest.approx(np.sqrt(0.72))


def test_piecewise_analytic():
    # difference 1 on [0,2), 0.25 on [2,6), t-6 on [6,8]
    grid = np.linspace(0.0, 8.0, 10_000)
    diff = np.where(grid < 2, 1.0, np.where(grid < 6, 0.25, grid - 6))
    f, g = GridFunction(grid, diff), GridFunction(grid, np.zeros_like(grid))
    assert distance(f, g, "L1") == pytest.approx(2 + 1 + 2, abs=1e-3)
    assert distance(f, g, "L2") == pytest.approx(2 + 0.25 + 8 / 3, abs=1e-3)
    assert distance(f, g, "Sup") == pytest.approx(2.0)


def test_grid_mismatch():
    with pytest.raises(ValueError):
        distance(GridFunction(GRID, GRID), GridFunction(GRID[:-1], GRID[:-1]))
    with pytest.raises(ValueError):
        distance(GridFunction(GRID, GRID), GridFunction(GRID + 1e-9, GRID))


def test_bands_csv(tmp_path):
    b = summarize(np.vstack((GRID, GRID + 1)), GRID)
    b.to_csv(tmp_path / "b.csv", truth=GRID)
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines[0] == "grid,low,median,high,truth"
    assert len(lines) == GRID.size + 1
