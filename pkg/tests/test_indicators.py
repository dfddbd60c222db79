"""Tests for the streaming frequency/diversity trackers."""

import math

import numpy as np
import pytest

from dess.indicators import IndicatorConfig, InteractionStats, ItemFeatureStore


def store_from(pairs):
    return ItemFeatureStore({k: np.asarray(v, float) for k, v in pairs})


# -- brute-force oracle ----------------------------------------------------

def brute_feature(store, item, dim):
    vec = store.get(item)
    return np.zeros(dim) if vec is None else vec


def brute_ind(events, store, user, window, dim):
    rated = [it for u, it in events if u == user]
    if len(rated) < 2:
        return 0.0
    feats = [brute_feature(store, it, dim) for it in rated]
    centroid = np.mean(feats, axis=0)
    win = rated if window is None else rated[-window:]
    dists = [np.linalg.norm(brute_feature(store, it, dim) - centroid) for it in win]
    return float(np.mean(dists))


def brute_pod(events, store, item, window, dim):
    raters = [u for u, it in events if it == item]
    if len(raters) < 2:
        return 0.0
    win = raters if window is None else raters[-window:]
    means = []
    for u in win:
        rated = [it for uu, it in events if uu == u]
        means.append(np.mean([brute_feature(store, it, dim) for it in rated], axis=0))
    centroid = np.mean(means, axis=0)
    return float(np.mean([np.linalg.norm(q - centroid) for q in means]))


# -- recording -------------------------------------------------------------

def test_record_counts():
    stats = InteractionStats(store_from([("i1", [1.0, 0.0])]))
    stats.record("u1", "i1")
    assert stats.fre("u1", "user") == 1
    assert stats.fre("i1", "item") == 1
    stats.record("u1", "i1")
    assert stats.fre("u1", "user") == 2
    assert stats.fre("i1", "item") == 2


def test_running_mean_two_points():
    stats = InteractionStats(store_from([("i1", [0.0, 0.0]), ("i2", [2.0, 4.0])]))
    stats.record("u1", "i1")
    stats.record("u1", "i2")
    assert np.allclose(stats.user_mean("u1"), [1.0, 2.0])


def test_counts_never_decrease():
    stats = InteractionStats(store_from([("a", [1.0])]))
    last = 0
    for _ in range(10):
        stats.record("u", "a")
        cur = stats.fre("u", "user")
        assert cur == last + 1
        last = cur


def test_missing_features_fall_back_to_zero():
    stats = InteractionStats(store_from([("known", [1.0, 1.0])]))
    stats.record("u", "mystery")
    stats.record("u", "mystery")
    assert "mystery" in stats.missing_items
    assert stats.ind("u") == 0.0


# -- user interest diversity ------------------------------------------------

def test_ind_single_item_is_zero():
    stats = InteractionStats(store_from([("i1", [3.0, 4.0])]))
    stats.record("u", "i1")
    assert stats.ind("u") == 0.0


def test_ind_two_points():
    stats = InteractionStats(store_from([("a", [0.0, 0.0]), ("b", [2.0, 0.0])]))
    stats.record("u", "a")
    stats.record("u", "b")
    assert stats.ind("u") == pytest.approx(1.0, abs=1e-12)


def test_ind_three_points():
    stats = InteractionStats(store_from([("a", [0.0, 0.0]), ("b", [0.0, 3.0])]))
    for item in ("a", "a", "b"):
        stats.record("u", item)
    # centroid (0, 1); distances 1, 1, 2
    assert stats.ind("u") == pytest.approx(4.0 / 3.0, abs=1e-12)


# -- item property diversity -------------------------------------------------

def test_pod_single_rater_is_zero():
    stats = InteractionStats(store_from([("x", [1.0])]))
    stats.record("u", "x")
    assert stats.pod("x") == 0.0


def test_pod_two_raters():
    store = store_from([("z1", [0.0, 0.0]), ("z2", [8.0, 0.0]), ("x", [0.0, 0.0])])
    stats = InteractionStats(store)
    stats.record("a", "z1")
    stats.record("b", "z2")
    stats.record("a", "x")
    stats.record("b", "x")
    # rater means at query time: (0,0) and (4,0); centroid (2,0)
    assert stats.pod("x") == pytest.approx(2.0, abs=1e-12)


def test_pod_three_raters():
    store = store_from([
        ("za", [0.0, 0.0]), ("zb", [4.0, 0.0]), ("zc", [8.0, 0.0]), ("x", [0.0, 0.0]),
    ])
    stats = InteractionStats(store)
    for user, prep in (("a", "za"), ("b", "zb"), ("c", "zc")):
        stats.record(user, prep)
    for user in ("a", "b", "c"):
        stats.record(user, "x")
    # rater means (0,0), (2,0), (4,0); centroid (2,0); distances 2, 0, 2
    assert stats.pod("x") == pytest.approx(4.0 / 3.0, abs=1e-12)


# -- context vectors ---------------------------------------------------------

def test_context_unseen_id_is_origin():
    stats = InteractionStats()
    for side in ("user", "item"):
        cv = stats.context_vector("ghost", side)
        assert np.array_equal(cv.x, [0.0, 0.0])


def test_context_saturates_at_caps():
    store = store_from([("a", [0.0, 0.0]), ("b", [2.0, 0.0])])
    cfg = IndicatorConfig(fre_cap=2.0, ind_cap=1.0)
    stats = InteractionStats(store, cfg)
    stats.record("u", "a")
    stats.record("u", "b")
    cv = stats.context_vector("u", "user")
    assert np.allclose(cv.x, [1.0, 1.0])
    assert np.linalg.norm(cv.x) == pytest.approx(math.sqrt(2.0))


def test_context_frequency_cap():
    stats = InteractionStats(store_from([("a", [1.0])]),
                             IndicatorConfig(fre_cap=1000.0))
    for _ in range(1000):
        stats.record("u", "a")
    cv = stats.context_vector("u", "user")
    assert cv.x[0] == pytest.approx(1.0, abs=1e-12)


def test_context_components_stay_bounded():
    rng = np.random.default_rng(0)
    store = store_from([(i, rng.normal(size=3) * 10) for i in range(5)])
    stats = InteractionStats(store, IndicatorConfig(window=4, fre_cap=10.0))
    for _ in range(200):
        stats.record(int(rng.integers(6)), int(rng.integers(6)))
    for key in range(6):
        for side in ("user", "item"):
            x = stats.context_vector(key, side).x
            assert np.all(x >= 0.0) and np.all(x <= 1.0)
            assert np.linalg.norm(x) <= math.sqrt(2.0) + 1e-12


# -- windowed oracle equivalence ---------------------------------------------

def random_stream(rng, n_users=6, n_items=8, length=60, dim=3):
    store = store_from([(i, rng.normal(size=dim)) for i in range(n_items)])
    events = [(int(rng.integers(n_users)), int(rng.integers(n_items)))
              for _ in range(length)]
    return store, events


@pytest.mark.parametrize("window", [4, 64, None])
def test_matches_scratch_recomputation(window):
    rng = np.random.default_rng(17)
    for _ in range(40):
        store, events = random_stream(rng)
        stats = InteractionStats(store, IndicatorConfig(window=window))
        for u, i in events:
            stats.record(u, i)
        dim = store.dim
        for u in {u for u, _ in events}:
            assert stats.ind(u) == pytest.approx(
                brute_ind(events, store, u, window, dim), abs=1e-9)
        for i in {i for _, i in events}:
            assert stats.pod(i) == pytest.approx(
                brute_pod(events, store, i, window, dim), abs=1e-9)


def test_diversity_bounded_by_feature_diameter():
    rng = np.random.default_rng(23)
    store, events = random_stream(rng, length=120)
    feats = list(store.features.values())
    diameter = max(np.linalg.norm(a - b) for a in feats for b in feats)
    stats = InteractionStats(store, IndicatorConfig(window=8))
    for u, i in events:
        stats.record(u, i)
    for u in {u for u, _ in events}:
        assert 0.0 <= stats.ind(u) <= diameter + 1e-12
    for i in {i for _, i in events}:
        assert 0.0 <= stats.pod(i) <= diameter + 1e-12


def test_sensitivity_outside_window_is_permutation_only():
    # Shuffling events older than the window must not change the windowed
    # diversity values (full-history centroids are order-free sums).
    rng = np.random.default_rng(31)
    store, events = random_stream(rng, length=80)
    window = 5
    prefix, suffix = events[:50], events[50:]
    shuffled = list(prefix)
    rng.shuffle(shuffled)

    def build(order):
        stats = InteractionStats(store, IndicatorConfig(window=window))
        for u, i in order:
            stats.record(u, i)
        return stats

    s1, s2 = build(prefix + suffix), build(shuffled + suffix)
    for u in {u for u, _ in suffix}:
        # only ids whose windowed occurrences all land in the suffix
        if sum(1 for uu, _ in suffix if uu == u) >= window:
            assert s1.ind(u) == pytest.approx(s2.ind(u), abs=1e-12)
    for i in {i for _, i in suffix}:
        if sum(1 for _, ii in suffix if ii == i) >= window:
            assert s1.pod(i) == pytest.approx(s2.pod(i), abs=1e-12)


# -- feature store ------------------------------------------------------------

def test_feature_store_dimension_enforced():
    store = ItemFeatureStore()
    store.add("a", [1.0, 0.0, 0.0])
    with pytest.raises(ValueError, match="dimension"):
        store.add("b", [1.0, 0.0])
    assert store.dim == 3
    assert len(store) == 1
    assert "a" in store


def test_indicator_config_validation():
    with pytest.raises(ValueError):
        IndicatorConfig(window=0)
    with pytest.raises(ValueError):
        IndicatorConfig(fre_cap=0.0)
    with pytest.raises(ValueError):
        IndicatorConfig(ind_cap=-1.0)
    cfg = IndicatorConfig(window=math.inf)
    assert cfg.window is None
