import numpy as np
import pytest

from .. import errors, ksc, series


def _bump(length, center, width):
    t = np.arange(length)
    return np.exp(-0.5 * ((t - center) / width) ** 2)


def test_shift():
    x = np.array([1.0, 2.0, 3.0])
    np.testing.assert_array_equal(ksc.shift(x, 1), [0, 1, 2])
    np.testing.assert_array_equal(ksc.shift(x, -1), [2, 3, 0])
    np.testing.assert_array_equal(ksc.shift(x, 0, 5), [1, 2, 3, 0, 0])
    np.testing.assert_array_equal(ksc.shift(x, 4), [0, 0, 0])


def test_distance_is_scale_and_shift_invariant():
    x = np.zeros(40)
    x[10:20] = np.arange(1.0, 11.0)
    y = 2.5 * ksc.shift(x, 3)
    match = ksc.ksc_distance(x, y)
    assert match.distance == pytest.approx(0.0, abs=1e-12)
    assert match.shift == -3
    assert match.alpha == pytest.approx(0.4)


def test_distance_bounded(rng):
    for _ in range(10):
        x = rng.uniform(0, 1, 30)
        y = rng.uniform(0, 1, 30)
        d = ksc.ksc_distance(x, y, 5).distance
        assert 0.0 <= d <= 1.0


def test_distance_restricted_shifts():
    x = np.zeros(20)
    x[5] = 1.0
    y = ksc.shift(x, 4)
    assert ksc.ksc_distance(x, y, 2).distance == pytest.approx(1.0)
    assert ksc.ksc_distance(x, y, [-4]).distance == pytest.approx(0.0)


def test_distance_to_zero_series():
    with pytest.raises(errors.UndefinedDistance):
        ksc.ksc_distance(np.zeros(5), np.ones(5))


def test_centroid_of_scaled_copies():
    shape = _bump(30, 12, 3)
    centroid = ksc.update_centroid([shape, 2 * shape, 0.5 * shape])
    np.testing.assert_allclose(centroid, shape / np.linalg.norm(shape), atol=1e-8)
    assert np.linalg.norm(centroid) == pytest.approx(1.0)


def test_centroid_of_nothing():
    with pytest.raises(errors.EmptyCluster):
        ksc.update_centroid([np.zeros(4)])


def _two_shape_groups(rng):
    spikes = [rng.uniform(0.5, 3) * _bump(48, 20 + rng.integers(-3, 4), 1.5) for _ in range(6)]
    plateaus = []
    for _ in range(6):
        p = np.zeros(48)
        start = 10 + int(rng.integers(-3, 4))
        p[start:start + 24] = rng.uniform(0.5, 3)
        plateaus.append(p)
    return spikes, plateaus


def test_cluster_separates_shapes(rng):
    spikes, plateaus = _two_shape_groups(rng)
    model = ksc.ksc_cluster(spikes + plateaus, 2, seed=1)
    labels = model.assignments
    assert len(set(labels[:6])) == 1
    assert len(set(labels[6:])) == 1
    assert labels[0] != labels[6]
    assert sorted(model.sizes()) == [6, 6]
    assert model.objective < 0.5
    np.testing.assert_allclose(np.linalg.norm(model.centroids, axis=1), 1.0)


def test_cluster_is_deterministic(rng):
    spikes, plateaus = _two_shape_groups(rng)
    profiles = {f"p{i}": p for i, p in enumerate(spikes + plateaus)}
    a = ksc.ksc_cluster(profiles, 3, seed=5)
    b = ksc.ksc_cluster(profiles, 3, seed=5)
    np.testing.assert_array_equal(a.assignments, b.assignments)
    np.testing.assert_array_equal(a.centroids, b.centroids)
    assert set(a.to_dict()["assignments"]) == set(profiles)


def test_cluster_argument_checks():
    with pytest.raises(errors.InvalidArgument):
        ksc.ksc_cluster([np.ones(5)], 2)
    with pytest.raises(errors.UndefinedDistance):
        ksc.ksc_cluster([np.ones(5), np.zeros(5)], 1)


def test_cluster_pads_unequal_lengths():
    model = ksc.ksc_cluster([_bump(20, 8, 2), _bump(30, 8, 2)], 1)
    assert model.centroids.shape == (1, 30)


def test_pattern_report(market):
    lifecycles = [series.build_lifecycle(pid, recs) for pid, recs in sorted(market.records.items())
                  if pid.startswith("P")]
    profiles = ksc.lifecycle_profiles(lifecycles)
    assert set(profiles[lifecycles[0].product_id]) == set(ksc.FAMILIES)
    report = ksc.pattern_report(profiles, k_outer=2)
    assert len(report.groups) == 2
    assert sum(g.size for g in report.groups) == len(lifecycles)
    data = report.to_dict()
    assert data["outer_family"] == "sales"
    frames = report.centroid_frames()
    assert "sales_c0" in frames
    assert list(frames["sales_c0"].columns) == ["week", "value"]


def _planted_shape(family, length, center):
    t = np.arange(length) - center
    if family == "early":
        return np.clip(np.where(t < 0, 1 + t / 3, 1 - t / 12), 0, None)
    if family == "late":
        return np.clip(np.where(t > 0, 1 - t / 3, 1 + t / 12), 0, None)
    return np.clip(1 - (t / 8) ** 2, 0, None)


def _planted_families(rng, noise, members=30, length=64):
    profiles, truth = [], []
    for label, family in enumerate(("early", "mid", "late")):
        for _ in range(members):
            shape = _planted_shape(family, length, 32 + int(rng.integers(-4, 5)))
            profiles.append(rng.uniform(0.5, 2) * shape + noise * rng.standard_normal(length))
            truth.append(label)
    return profiles, np.array(truth)


def test_recovers_planted_families(rng):
    profiles, truth = _planted_families(rng, noise=0.01)
    model = ksc.ksc_cluster(profiles, 3, seed=0)
    agreeing = sum(np.bincount(model.assignments[truth == label]).max() for label in range(3))
    assert agreeing / len(truth) >= 0.95
    assert sorted(set(model.assignments)) == [0, 1, 2]


def test_objective_never_increases(rng):
    profiles, _ = _planted_families(rng, noise=0.0, members=10)
    # fewer groups than shapes
    model = ksc.ksc_cluster(profiles, 2, seed=2)
    history = np.array(model.objective_history)
    assert len(history) == model.n_iter
    assert np.all(np.diff(history) <= 1e-9)


def test_default_group_counts():
    assert ksc.default_group_count("sales") == 4
    assert ksc.default_group_count("nonavp") == 5
    assert ksc.default_group_count("sentiment") == 4
