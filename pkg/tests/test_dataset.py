import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stdgi.dataset import (FeatureSeries, apply_normalizer, fit_normalizer, load_features_csv,
                           make_windows, split_series, synthesize_traffic, with_time_of_day,
                           write_features_csv)
from stdgi.errors import ConfigError, IngestionError, NormalizationError, ParseError, ValidationError
from stdgi.graph import Graph, make_graph, normalize_adjacency, star_graph


def test_load_features_two_steps(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text("t,node,speed\n0,0,60\n1,0,55\n")
    s = load_features_csv(p, step_minutes=5)
    np.testing.assert_array_equal(s.values[0, 0], [60.0, 0.0])
    np.testing.assert_allclose(s.values[1, 0], [55.0, 5 / 1440], atol=1e-15)


def test_load_features_offset_t(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text("t,node,speed\n10,0,60\n11,0,55\n10,1,40\n11,1,41\n")
    s = load_features_csv(p)
    assert s.values.shape == (2, 2, 2)
    assert s.values[0, 1, 0] == 40.0
    assert s.values[0, 0, 1] == 0.0


def test_load_features_gap(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text("t,node,speed\n0,0,60\n0,1,50\n1,1,55\n")
    with pytest.raises(IngestionError, match=r"t=1, node=0"):
        load_features_csv(p)


def test_load_features_non_numeric(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text("t,node,speed\n0,0,fast\n")
    with pytest.raises(ParseError):
        load_features_csv(p)


def test_features_round_trip(tmp_path):
    s = synthesize_traffic(normalize_adjacency(make_graph("ring", 4, np.random.default_rng(0))), 30,
                           0.5, 1.0, np.random.default_rng(1))
    write_features_csv(s, tmp_path / "f.csv")
    back = load_features_csv(tmp_path / "f.csv")
    np.testing.assert_array_equal(back.values, s.values)


def test_time_of_day_channel_wraps():
    s = with_time_of_day(np.zeros((600, 1)), 5)
    tod = s.values[:, 0, 1]
    assert np.all((tod >= 0) & (tod < 1))
    np.testing.assert_allclose(tod[288:576], tod[:288], atol=0)
    np.testing.assert_allclose(np.diff(tod[:287]), 5 / 1440)


def test_normalizer_hand_values():
    series = with_time_of_day(np.array([[2.0], [4.0], [100.0]]), 5)
    stats = fit_normalizer(series, (0, 2))
    assert (stats.mean, stats.std) == (3.0, 1.0)
    z = apply_normalizer(series, stats)
    np.testing.assert_array_equal(z.values[:2, 0, 0], [-1.0, 1.0])
    np.testing.assert_array_equal(z.values[:, 0, 1], series.values[:, 0, 1])


def test_normalizer_round_trip(rng):
    series = with_time_of_day(rng.uniform(10, 70, (50, 3)), 5)
    stats = fit_normalizer(series, (0, 30))
    back = stats.invert(stats.apply(series))
    np.testing.assert_allclose(back.values, series.values, atol=1e-12)


def test_normalizer_constant_speed():
    with pytest.raises(NormalizationError):
        fit_normalizer(with_time_of_day(np.full((5, 2), 50.0), 5), (0, 5))


def test_normalizer_ignores_non_training_values(rng):
    speed = rng.uniform(10, 70, (100, 3))
    a = fit_normalizer(with_time_of_day(speed, 5), (0, 70))
    speed[80:] = 1e6
    b = fit_normalizer(with_time_of_day(speed, 5), (0, 70))
    assert a == b


@pytest.mark.parametrize("length,count", [(24, 1), (25, 2), (23, 0)])
def test_window_counts(length, count):
    w = make_windows(None, 12, 12, (0, length))
    assert len(w) == count
    assert w.short == (count == 0)


def test_window_starts_and_contents(rng):
    series = with_time_of_day(rng.normal(size=(25, 2)), 5)
    w = make_windows(series, 12, 12, (0, 25))
    assert list(w.starts) == [0, 1]
    sample = w.samples(series)[1]
    np.testing.assert_array_equal(sample.input, series.values[1:13])
    np.testing.assert_array_equal(sample.target[:, :, 0], series.values[13:25, :, 0])


def test_split_hand_values():
    s = split_series(100, min_length=1)
    assert (s.train, s.val, s.test) == ((0, 70), (70, 80), (80, 100))


def test_split_metr_la_sizes():
    s = split_series(34249)
    sizes = [b - a for a, b in (s.train, s.val, s.test)]
    assert sizes == [23974, 3425, 6850]


def test_split_bad_ratios():
    with pytest.raises(ConfigError):
        split_series(1000, (0.5, 0.5, 0.5))


def test_split_too_short():
    with pytest.raises(ConfigError):
        split_series(60)


@settings(max_examples=40)
@given(st.integers(120, 5000), st.floats(0.3, 0.8), st.floats(0.05, 0.3))
def test_no_window_crosses_split_boundary(T, r_train, r_val):
    ratios = (r_train, r_val, 1 - r_train - r_val)
    try:
        spec = split_series(T, ratios)
    except ConfigError:
        return
    prev_end = 0
    for a, b in (spec.train, spec.val, spec.test):
        assert a == prev_end
        prev_end = b
        w = make_windows(None, 12, 12, (a, b))
        assert w.starts.min() >= a
        assert w.starts.max() + 24 <= b
    assert prev_end == T


def test_synth_degenerate_dynamics_constant():
    g = normalize_adjacency(make_graph("ring", 6, np.random.default_rng(0)))
    s = synthesize_traffic(g, 50, alpha=0.0, noise_std=0.0, beta=0.0, rng=np.random.default_rng(1))
    np.testing.assert_array_equal(s.speed, np.broadcast_to(s.speed[0], s.speed.shape))


def test_synth_star_hub_averages_neighbours():
    g = normalize_adjacency(star_graph(4))
    s0 = np.array([40.0, 50.0, 60.0, 70.0])
    s = synthesize_traffic(g, 2, alpha=1.0, noise_std=0.0, beta=0.0, initial=s0)
    # hand-propagated: hub row = [1,1,1,1]/4, leaf i row = (hub + leaf)/2
    np.testing.assert_allclose(s.speed[1], [55.0, 45.0, 50.0, 55.0], atol=1e-12)


def test_synth_deterministic():
    g = normalize_adjacency(make_graph("geometric", 8, np.random.default_rng(0)))
    a = synthesize_traffic(g, 200, 0.5, 1.0, np.random.default_rng(9))
    b = synthesize_traffic(g, 200, 0.5, 1.0, np.random.default_rng(9))
    np.testing.assert_array_equal(a.values, b.values)


def test_synth_bounds_and_tod():
    g = normalize_adjacency(make_graph("ring", 10, np.random.default_rng(0)))
    s = synthesize_traffic(g, 1000, 0.5, 8.0, np.random.default_rng(3), beta=3.0)
    assert s.speed.min() >= 0 and s.speed.max() <= 80
    np.testing.assert_array_equal(s.values[288:576, :, 1], s.values[:288, :, 1])


def test_synth_alpha_validation():
    g = normalize_adjacency(Graph(2, ()))
    with pytest.raises(ValidationError):
        synthesize_traffic(g, 10, alpha=1.5, noise_std=0.0)


def test_feature_series_shape_validation():
    with pytest.raises(ValidationError):
        FeatureSeries(np.zeros((0, 2, 2)))
