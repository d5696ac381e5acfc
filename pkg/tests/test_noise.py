import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vibdsde.errors import BadParameter, ShapeMismatch
from vibdsde.noise import (STREAM_B, STREAM_W, backward_path, bridge_path, counter_normals, make_time_grid,
                           sample_noise)


def test_grid_examples():
    assert list(make_time_grid(0, 1, 4).nodes) == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert list(make_time_grid(0, 1, 1).nodes) == [0.0, 1.0]
    with pytest.raises(BadParameter):
        make_time_grid(0, 1, 0)
    with pytest.raises(BadParameter):
        make_time_grid(1, 1, 3)


def test_grid_last_node_exact_and_index_lookup():
    g = make_time_grid(0.0, 0.7, 3)
    assert g.nodes[-1] == 0.7
    assert g.index_of(0.7 * 2 / 3) == 2
    with pytest.raises(BadParameter):
        g.index_of(0.1)


def test_bundle_deterministic():
    g = make_time_grid(0, 1, 5)
    a, b = sample_noise(g, 100, 2, 9), sample_noise(g, 100, 2, 9)
    assert np.array_equal(a.increments(), b.increments())
    assert np.array_equal(a.B, b.B)


def test_increment_moments():
    g = make_time_grid(0, 1, 1)
    dw = sample_noise(g, 100_000, 1, 3).dW(0)[:, 0]
    se_mean = math.sqrt(g.dt / len(dw))
    se_var = g.dt * math.sqrt(2.0 / len(dw))
    assert abs(dw.mean()) < 4 * se_mean
    assert abs(dw.var() - g.dt) < 4 * se_var


def test_backward_path_starts_at_zero():
    g = make_time_grid(0, 1, 10)
    assert sample_noise(g, 3, 1, 1).B[0] == 0.0


def test_bad_B_rejected():
    g = make_time_grid(0, 1, 3)
    with pytest.raises(ShapeMismatch):
        sample_noise(g, 2, 1, 0, B=np.zeros(3))
    with pytest.raises(BadParameter):
        sample_noise(g, 2, 1, 0, B=np.ones(4))


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 50), st.integers(0, 2**32))
def test_path_independent_of_batch_size(M, seed):
    g = make_time_grid(0, 1, 4)
    big = sample_noise(g, M, 2, seed)
    small = sample_noise(g, 1, 2, seed)
    m = M - 1
    assert np.array_equal(big.increments()[0], small.increments()[0])
    assert np.array_equal(big.increments()[m], big.path_increments(m))


def test_chunked_generation_matches_full():
    g = make_time_grid(0, 1, 3)
    b = sample_noise(g, 40, 1, 5)
    full = b.dW(1)
    assert np.array_equal(np.vstack([b.dW(1, 0, 17), b.dW(1, 17, 40)]), full)


def test_streams_uncorrelated():
    paths = np.arange(200_000)
    w = counter_normals(11, STREAM_W, paths, np.array([0]))[:, 0]
    b = counter_normals(11, STREAM_B, paths, np.array([0]))[:, 0]
    assert abs(np.corrcoef(w, b)[0, 1]) < 4 / math.sqrt(len(paths))


def test_scenario_seed_controls_B_only():
    g = make_time_grid(0, 1, 8)
    a = sample_noise(g, 10, 1, 1, scenario_seed=5)
    b = sample_noise(g, 10, 1, 2, scenario_seed=5)
    c = sample_noise(g, 10, 1, 1, scenario_seed=6)
    assert np.array_equal(a.B, b.B)
    assert not np.array_equal(a.B, c.B)
    assert np.array_equal(a.increments(), c.increments())


def test_bridge_hits_end_value():
    g = make_time_grid(0, 1, 16)
    b = bridge_path(g, 3, 0.2)
    assert b[0] == 0.0 and b[-1] == pytest.approx(0.2, abs=1e-15)
    assert not np.array_equal(b, backward_path(g, 3))
