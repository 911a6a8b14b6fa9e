import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import lloyd_step
from panelsom.errors import ConfigurationError, EmptyObservationError
from panelsom.panel import ObservationMatrix
from panelsom.som import (
    CodeBook,
    Decay,
    Topology,
    TrainingSchedule,
    batch_step,
    bmu,
    grid_distance,
    init_codebook,
    neighborhood_weight,
    quantization_error,
    train,
    train_batch,
    train_online,
)


def fixed_schedule(epochs=1, eta=0.5, radius=0.0, **kw):
    return TrainingSchedule(epochs, Decay(eta, eta), Decay(radius, radius), **kw)


# topology and kernels


def test_grid_distance_examples():
    g = Topology.grid(8, 8)
    assert grid_distance(g, 0, 9) == 1
    assert grid_distance(g, 0, 63) == 7
    assert grid_distance(Topology.chain(7), 2, 6) == 4
    for u in range(64):
        assert grid_distance(g, u, u) == 0


def test_distance_matrix_is_symmetric_chebyshev():
    g = Topology.grid(3, 4)
    D = g.distance_matrix()
    assert np.array_equal(D, D.T)
    for a in range(12):
        for b in range(12):
            assert D[a, b] == grid_distance(g, a, b)
    # a radius-1 neighborhood of an interior unit is the 3x3 block
    assert (D[5] <= 1).sum() == 9


def test_topology_validation_and_round_trip():
    with pytest.raises(ConfigurationError):
        Topology.grid(0, 3)
    for t in (Topology.grid(2, 5), Topology.chain(7)):
        assert Topology.from_dict(t.to_dict()) == t


def test_kernel_examples():
    for kernel in ("hard", "gaussian"):
        assert neighborhood_weight(kernel, 1.0, 0) == 1.0
        assert neighborhood_weight(kernel, 0.0, 0) == 1.0
    assert neighborhood_weight("hard", 1.0, 2) == 0.0
    assert neighborhood_weight("gaussian", 1.0, 1) == pytest.approx(math.exp(-0.5), abs=1e-15)
    assert neighborhood_weight("gaussian", 1.0, 1) == pytest.approx(0.6065, abs=5e-5)
    with pytest.raises(ConfigurationError):
        neighborhood_weight("box", 1.0, 1)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(["hard", "gaussian"]), st.floats(0, 10), st.integers(0, 20))
def test_kernel_non_increasing(kernel, radius, d):
    assert neighborhood_weight(kernel, radius, d + 1) <= neighborhood_weight(kernel, radius, d)
    assert 0.0 <= neighborhood_weight(kernel, radius, d) <= 1.0


def test_schedule_validation():
    with pytest.raises(ConfigurationError):
        TrainingSchedule(0)
    with pytest.raises(ConfigurationError):
        TrainingSchedule(5, Decay(0.1, 0.5))
    with pytest.raises(ConfigurationError):
        TrainingSchedule(5, radius=Decay(1.0, 2.0))
    with pytest.raises(ConfigurationError):
        TrainingSchedule(5, kernel="box")
    s = TrainingSchedule.default(Topology.grid(8, 8), seed=3)
    assert (s.epochs, s.radius.start, s.radius.end, s.kernel) == (50, 4.0, 0.0, "hard")
    assert TrainingSchedule.from_dict(s.to_dict()) == s


def test_decay_endpoints():
    d = Decay(0.5, 0.01)
    assert d.at(0, 100) == 0.5
    assert d.at(99, 100) == pytest.approx(0.01)
    e = Decay(4.0, 0.5, "exponential")
    assert e.at(99, 100) == pytest.approx(0.5)


# best-matching unit


def test_bmu_examples():
    cb = CodeBook(Topology.chain(2), [[0.0, 0.0], [1.0, 1.0]])
    assert bmu(cb, [0.1, 0.1])[0] == 0
    u, d = bmu(cb, [np.nan, 0.9])
    assert u == 1 and d == pytest.approx(0.1)
    assert bmu(cb, [0.5, 0.5])[0] == 0
    assert bmu(cb, [5.0, 0.9], missing=[True, False])[0] == 1
    with pytest.raises(EmptyObservationError):
        bmu(cb, [np.nan, np.nan])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_bmu_invariant_under_appended_missing_coordinate(seed):
    rng = np.random.default_rng(seed)
    w = rng.normal(size=(6, 3))
    x = rng.normal(size=3)
    cb = CodeBook(Topology.grid(2, 3), w)
    cb4 = CodeBook(Topology.grid(2, 3), np.hstack([w, rng.normal(size=(6, 1))]))
    assert bmu(cb, x)[0] == bmu(cb4, np.append(x, np.nan))[0]


# initialization


def test_init_deterministic_and_sample_rows():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(30, 3))
    data = ObservationMatrix.from_array(x)
    a = init_codebook(Topology.grid(3, 3), data, seed=5)
    b = init_codebook(Topology.grid(3, 3), data, seed=5)
    assert np.array_equal(a.weights, b.weights)
    rows = {tuple(r) for r in x}
    assert all(tuple(w) in rows for w in a.weights)


def test_init_uniform_box_degenerate_range():
    x = np.column_stack([np.zeros(10), np.arange(10.0)])
    cb = init_codebook(Topology.grid(2, 2), ObservationMatrix.from_array(x), seed=1, method="uniform-box")
    assert np.all(cb.weights[:, 0] == 0.0)
    assert np.all((cb.weights[:, 1] >= 0) & (cb.weights[:, 1] <= 9))


# online training


def test_online_update_formula():
    cb = CodeBook(Topology.chain(1), [[0.0, 0.0]])
    out, _ = train_online(cb, ObservationMatrix.from_array([[1.0, 0.0]]), fixed_schedule())
    assert out.weights.tolist() == [[0.5, 0.0]]


def test_online_contracts_monotonically():
    cb = CodeBook(Topology.chain(1), [[0.0, 0.0]])
    data = ObservationMatrix.from_array([[3.0, -1.0]])
    dists = []
    for e in range(1, 8):
        w, _ = train_online(cb, data, fixed_schedule(epochs=e, eta=0.3))
        dists.append(np.linalg.norm(w.weights[0] - [3.0, -1.0]))
    assert all(b < a for a, b in zip(dists, dists[1:]))


def test_online_update_touches_only_observed_coordinates():
    rng = np.random.default_rng(1)
    w0 = rng.normal(size=(4, 3))
    cb = CodeBook(Topology.grid(2, 2), w0)
    data = ObservationMatrix.from_array([[1.0, np.nan, 2.0]])
    out, _ = train_online(cb, data, fixed_schedule(radius=1.0))
    assert np.array_equal(out.weights[:, 1], w0[:, 1])
    assert not np.array_equal(out.weights[:, 0], w0[:, 0])


def test_online_deterministic():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(50, 4))
    x[rng.random(x.shape) < 0.1] = np.nan
    data = ObservationMatrix.from_array(x)
    s = TrainingSchedule.default(Topology.grid(3, 3), seed=9, epochs=5)
    a = train(init_codebook(Topology.grid(3, 3), data, 9), data, s)
    b = train(init_codebook(Topology.grid(3, 3), data, 9), data, s)
    assert a.codebook.weights.tobytes() == b.codebook.weights.tobytes()
    assert a.qe_trace == b.qe_trace and len(a.qe_trace) == 5


# batch training


def test_batch_radius_zero_is_one_lloyd_step():
    rng = np.random.default_rng(4)
    pts = rng.normal(size=(10, 2))
    centers = pts[:3].copy()
    cb = CodeBook(Topology.chain(3), centers)
    out = batch_step(cb, ObservationMatrix.from_array(pts), 0.0)
    _, want = lloyd_step(pts.tolist(), centers.tolist())
    assert np.allclose(out.weights, want, atol=1e-12)


def test_batch_identical_rows_converge():
    data = ObservationMatrix.from_array(np.tile([1.0, 2.0], (8, 1)))
    cb = CodeBook(Topology.chain(3), [[0.0, 0.0], [5.0, 5.0], [9.0, 9.0]])
    out, _ = train_batch(cb, data, TrainingSchedule(3, radius=Decay(2.0, 2.0)))
    assert np.allclose(out.weights, [[1.0, 2.0]] * 3)


def test_batch_empty_cluster_keeps_weights():
    data = ObservationMatrix.from_array([[0.0], [0.2]])
    cb = CodeBook(Topology.chain(2), [[0.1], [100.0]])
    out = batch_step(cb, data, 0.0)
    assert out.weights[1, 0] == 100.0
    assert out.weights[0, 0] == pytest.approx(0.1)


# quantization error


def test_quantization_error_examples():
    x = np.array([[0.0, 0.0], [2.0, 0.0]])
    assert quantization_error(CodeBook(Topology.chain(2), x), ObservationMatrix.from_array(x)) == 0.0
    cb = CodeBook(Topology.chain(1), [[1.0, 0.0]])
    assert quantization_error(cb, ObservationMatrix.from_array(x)) == 1.0
    dup = ObservationMatrix.from_array([[0.0, 0.0], [2.0, 0.0], [2.0, 0.0], [0.0, 0.0]])
    assert quantization_error(cb, dup) == 1.0


def test_neighbouring_units_have_closer_code_vectors():
    rng = np.random.default_rng(7)
    centers = rng.normal(scale=6.0, size=(4, 5))
    x = np.vstack([c + rng.normal(size=(100, 5)) for c in centers])
    data = ObservationMatrix.from_array(x)
    topo = Topology.grid(6, 6)
    cb, _ = train(init_codebook(topo, data, 0), data, TrainingSchedule.default(topo, seed=0, epochs=20))
    W = cb.weights
    D = topo.distance_matrix()
    wd = np.linalg.norm(W[:, None] - W[None, :], axis=2)
    adjacent = wd[D == 1].mean()
    off = ~np.eye(topo.n_units, dtype=bool)
    assert adjacent < wd[off].mean()


def test_codebook_round_trip_and_validation():
    cb = CodeBook(Topology.grid(2, 2), np.arange(8.0).reshape(4, 2))
    assert np.array_equal(CodeBook.from_dict(cb.to_dict()).weights, cb.weights)
    with pytest.raises(ConfigurationError):
        CodeBook(Topology.grid(2, 2), np.zeros((3, 2)))
    with pytest.raises(ConfigurationError):
        CodeBook(Topology.grid(1, 1), [[np.nan]])
