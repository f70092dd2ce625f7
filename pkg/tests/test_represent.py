import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import make_stream
from evtad.represent import Grid, RepresentConfig, event_histogram, resize_grid, snapshot, time_map


def test_histogram_empty_window():
    s = make_stream([5_000_000], [1], [1], width=4, height=3)
    g = event_histogram(s, 1.0, 1.0)
    assert g.values.shape == (3, 4) and g.values.sum() == 0


def test_histogram_counts_pixel():
    s = make_stream([900_000, 1_000_000, 1_100_000], [2, 2, 2], [1, 1, 1], width=4, height=3)
    g = event_histogram(s, 1.0, 1.0)
    assert g.values[1, 2] == 3 and g.values.sum() == 3


def test_histogram_half_open():
    s = make_stream([500_000, 1_500_000], [0, 1], [0, 0], width=4, height=3)
    g = event_histogram(s, 1.0, 1.0)
    assert g.values[0, 0] == 1 and g.values[0, 1] == 0


def test_timemap_examples():
    s = make_stream([800_000, 1_000_000], [0, 1], [0, 0], width=3, height=1)
    g = time_map(s, 1.0, 0.2)
    assert g.values[0, 1] == 1.0
    assert g.values[0, 0] == pytest.approx(math.exp(-1), abs=1e-12)
    assert g.values[0, 2] == 0.0


def test_timemap_ignores_future_and_old():
    s = make_stream([0, 2_000_000], [0, 1], [0, 0], width=2, height=1)
    g = time_map(s, 1.5, 0.2)  # first event is 7.5 tau old, second is in the future
    assert g.values.tolist() == [[0.0, 0.0]]


def test_resize_examples():
    g = Grid(np.array([[0.0, 1.0], [1.0, 0.0]]), 0.0, "histogram")
    assert resize_grid(g, 2, 2) is g
    assert resize_grid(g, 3, 3).values[1, 1] == pytest.approx(0.5, abs=1e-12)
    c = Grid(np.full((5, 7), 2.5), 0.0, "histogram")
    np.testing.assert_allclose(resize_grid(c, 11, 3).values, 2.5, atol=1e-12)


def test_snapshot_config():
    s = make_stream([1_000_000], [3], [2], width=8, height=8)
    g = snapshot(s, 1.0, RepresentConfig(kind="timemap", out_h=4, out_w=4))
    assert g.values.shape == (4, 4) and g.kind == "timemap"
    with pytest.raises(ValueError):
        RepresentConfig(kind="voxel")


stream_rows = st.lists(st.tuples(st.integers(0, 3_000_000), st.integers(0, 5), st.integers(0, 4)), max_size=80)


def _stream(rows):
    if not rows:
        return make_stream([], [], [], width=6, height=5, t_begin=0, t_end=3_000_000)
    t, x, y = (np.array(c) for c in zip(*rows))
    return make_stream(t, x, y, width=6, height=5, t_begin=0, t_end=3_000_000)


@settings(max_examples=500, deadline=None)
@given(stream_rows, st.floats(0, 3), st.floats(0.01, 3))
def test_histogram_conservation(rows, tc, window):
    s = _stream(rows)
    g = event_histogram(s, tc, window)
    lo, hi = (tc - window / 2) * 1e6, (tc + window / 2) * 1e6
    expected = sum(1 for t, _, _ in rows if lo <= t < hi)
    assert g.values.sum() == expected
    assert np.all(g.values == np.round(g.values)) and g.values.min() >= 0


@settings(max_examples=500, deadline=None)
@given(stream_rows, st.integers(0, 3_000_000), st.integers(1, 500_000), st.floats(0.05, 1.0))
def test_timemap_bounds_and_decay(rows, tc_us, dt_us, tau):
    s = _stream(rows)
    tc = tc_us / 1e6
    g = time_map(s, tc, tau).values
    assert np.all((g >= 0) & (g <= 1))
    at_center = {(y, x) for t, x, y in rows if t == tc_us}
    ones = {tuple(i) for i in np.argwhere(g == 1.0)}
    assert ones == at_center
    # no event in (tc, tc + dt] -> every nonzero cell strictly decays
    if not any(tc_us < t <= tc_us + dt_us for t, _, _ in rows):
        later = time_map(s, (tc_us + dt_us) / 1e6, tau).values
        nz = g > 0
        assert np.all(later[nz] < g[nz])


@settings(max_examples=500, deadline=None)
@given(
    st.integers(1, 6),
    st.integers(1, 6),
    st.integers(1, 9),
    st.integers(1, 9),
    st.integers(0, 2**32 - 1),
)
def test_resize_bounds_and_oracle(h, w, oh, ow, seed):
    v = np.random.default_rng(seed).uniform(-3, 3, (h, w))
    out = resize_grid(Grid(v, 0.0, "histogram"), oh, ow).values
    assert out.shape == (oh, ow)
    assert out.min() >= v.min() and out.max() <= v.max()
    np.testing.assert_allclose(out, oracles.bilinear(v.tolist(), oh, ow), atol=1e-12)
