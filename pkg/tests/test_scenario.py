import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isac_ot.errors import ConfigError, DegenerateGeometry
from isac_ot.scenario import (ScenarioConfig, SpatialDensity, average_uav_count, build_scenario,
                              cell_masses, db_to_linear, dbm_to_watt, departure_angles,
                              desk_config, load_config, sample_points)

UNIT = (np.zeros(3), np.ones(3))


# ---- departure angles ------------------------------------------------------

def test_angles_axis_aligned():
    az, el = departure_angles((1, 0, 0), (0, 0, 0))
    assert az == 0.0
    assert el == pytest.approx(math.pi / 2, rel=1e-12)


def test_angles_zenith_pins_azimuth():
    assert departure_angles((0, 0, 1), (0, 0, 0)) == (0.0, 0.0)


def test_angles_diagonal():
    az, el = departure_angles((1, 1, math.sqrt(2)), (0, 0, 0))
    # independent evaluation: horizontal and vertical legs are equal
    assert az == pytest.approx(math.pi / 4, rel=1e-12)
    assert el == pytest.approx(math.pi / 4, rel=1e-12)


def test_angles_coincident():
    with pytest.raises(DegenerateGeometry):
        departure_angles((1, 2, 3), (1, 2, 3))


def test_angles_negative_x_axis_maps_to_pi():
    az, _ = departure_angles((-1, 0, 0), (0, 0, 0))
    assert az == pytest.approx(math.pi)


finite = st.floats(-1e3, 1e3, allow_nan=False)


@given(st.tuples(finite, finite, finite), st.tuples(finite, finite, finite))
def test_angle_ranges(a, b):
    if np.allclose(a, b, atol=1e-9):
        return
    az, el = departure_angles(a, b)
    assert -math.pi < az <= math.pi
    assert 0.0 <= el <= math.pi


# ---- sampling ---------------------------------------------------------------

def test_uniform_cube_mean():
    cloud = sample_points(SpatialDensity(*UNIT), 100_000, seed=11)
    assert np.all(np.abs(cloud.points.mean(axis=0) - 0.5) < 0.01)


def test_sampling_deterministic():
    d = SpatialDensity(*UNIT)
    a, b = sample_points(d, 1000, 5), sample_points(d, 1000, 5)
    assert a.points.tobytes() == b.points.tobytes()


def test_gaussian_mean():
    d = SpatialDensity(np.array([-100.0, -100.0, -50.0]), np.array([100.0, 100.0, 150.0]),
                       kind="gaussian_mixture", means=np.array([[5.0, 5.0, 50.0]]), stds=np.array([1.0]),
                       weights=np.array([1.0]))
    cloud = sample_points(d, 100_000, 3)
    assert np.all(np.abs(cloud.points.mean(axis=0) - [5, 5, 50]) < 0.02)


def test_points_inside_bounds():
    d = SpatialDensity(np.zeros(3), np.array([1.0, 2.0, 3.0]), kind="gaussian_mixture",
                       means=np.array([[0.0, 0, 0], [1, 2, 3]]), stds=np.array([0.5, 2.0]),
                       weights=np.array([0.3, 0.7]))
    p = sample_points(d, 5000, 1).points
    assert np.all(p >= 0) and np.all(p <= [1, 2, 3])


def test_sample_count_must_be_positive():
    with pytest.raises(ValueError):
        sample_points(SpatialDensity(*UNIT), 0, 1)


def test_bad_mixture_rejected():
    with pytest.raises(ConfigError):
        SpatialDensity(np.zeros(3), np.ones(3), kind="gaussian_mixture", means=np.zeros((1, 3)),
                       stds=np.array([-1.0]), weights=np.array([1.0]))
    with pytest.raises(ConfigError):
        SpatialDensity(np.zeros(3), np.ones(3), kind="gaussian_mixture", means=np.zeros((2, 3)),
                       stds=np.array([1.0, 1.0]), weights=np.array([0.5, 0.6]))


# ---- average UAV count ------------------------------------------------------

def test_half_split_counts():
    cloud = sample_points(SpatialDensity(*UNIT), 100_000, 2)
    labels = (cloud.points[:, 0] >= 0.5).astype(int)
    u = [average_uav_count(cloud, labels, 18, m) for m in (0, 1)]
    assert u[0] == pytest.approx(9, abs=0.2)
    assert u[1] == pytest.approx(9, abs=0.2)


def test_single_cell_is_exact():
    cloud = sample_points(SpatialDensity(*UNIT), 1000, 2)
    assert average_uav_count(cloud, np.zeros(1000, int), 18, 0) == 18.0


def test_counts_match_quadrature():
    """Three slabs of a two-component mixture against the closed-form box mass."""
    d = SpatialDensity(np.zeros(3), np.full(3, 10.0), kind="gaussian_mixture",
                       means=np.array([[2.0, 5, 5], [7, 5, 5]]), stds=np.array([1.5, 2.5]),
                       weights=np.array([0.4, 0.6]))
    n, K = 40_000, 18
    cloud = sample_points(d, n, 0)
    edges = [0.0, 3.0, 6.5, 10.0]
    labels = np.digitize(cloud.points[:, 0], edges[1:-1])
    for m in range(3):
        lo = np.array([edges[m], 0, 0])
        hi = np.array([edges[m + 1], 10, 10])
        p = d.box_probability(lo, hi)
        se = K * math.sqrt(p * (1 - p) / n)
        assert abs(average_uav_count(cloud, labels, K, m) - K * p) <= 2 * se


def test_density_integrates_to_one():
    d = SpatialDensity(np.zeros(3), np.full(3, 4.0), kind="gaussian_mixture",
                       means=np.array([[1.0, 1, 1]]), stds=np.array([3.0]), weights=np.array([1.0]))
    assert d.box_probability(d.lower, d.upper) == pytest.approx(1.0, rel=1e-12)


@given(st.lists(st.integers(0, 4), min_size=1, max_size=200), st.integers(1, 30))
def test_masses_sum_to_K(labels, K):
    u = cell_masses(np.array(labels), 5, K)
    assert u.sum() == pytest.approx(K, rel=1e-14)
    assert np.all(u >= 0)


def test_cloud_weights_uniform():
    cloud = sample_points(SpatialDensity(*UNIT), 777, 0)
    assert cloud.weights.sum() == pytest.approx(1.0, rel=1e-15)


# ---- configuration ----------------------------------------------------------

def test_defaults_match_parameter_table():
    cfg = ScenarioConfig()
    assert cfg.carrier_frequency == 30e9
    assert cfg.noise_psd == pytest.approx(10 ** (-169 / 10) * 1e-3, rel=1e-12)
    assert cfg.p_min == pytest.approx(1e-3) and cfg.p_max == pytest.approx(10.0)
    assert cfg.reference_gain == pytest.approx(1e-5)
    assert (cfg.M, cfg.K) == (6, 18)


def test_unit_conversions():
    assert dbm_to_watt(30) == pytest.approx(1.0)
    assert db_to_linear(-50) == pytest.approx(1e-5)


def test_config_json_round_trip(tmp_path):
    cfg = desk_config(theta1=0.3)
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    again = load_config(path)
    assert again == cfg and again.config_hash() == cfg.config_hash()


def test_config_dbm_keys(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"p_max_dbm": 30, "noise_psd_dbm_hz": -174}))
    cfg = load_config(path)
    assert cfg.p_max == pytest.approx(1.0)
    assert cfg.noise_psd == pytest.approx(10 ** (-17.4) * 1e-3)


@pytest.mark.parametrize("bad", [{"p_min": 5.0, "p_max": 1.0}, {"theta1": 1.5},
                                 {"sample_count": 0}, {"nonsense": 1}])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict(bad)


def test_missing_config_names_path(tmp_path):
    with pytest.raises(ConfigError, match="nope.json"):
        load_config(tmp_path / "nope.json")


# ---- assembled scenario -----------------------------------------------------

def test_build_is_deterministic():
    a, b = build_scenario(desk_config()), build_scenario(desk_config())
    assert a.cloud.points.tobytes() == b.cloud.points.tobytes()
    assert a.delta_d.tobytes() == b.delta_d.tobytes()
    assert a.uav_positions.tobytes() == b.uav_positions.tobytes()


def test_one_noncooperative_uav(desk):
    kinds = [u.kind.name for u in desk.uavs]
    assert kinds.count("NON_COOPERATIVE") == 1 and kinds[-1] == "NON_COOPERATIVE"
    assert len(desk.uavs) == desk.K + 1


def test_estimated_distance_positive(desk):
    assert np.all(desk.estimated_distance > 0.1 - 1e-12)
    np.testing.assert_allclose(desk.estimated_distance + desk.delta_d, desk.true_distance)


def test_slots_share_cloud_but_move_uavs():
    cfg = desk_config(N=2)
    s0 = build_scenario(cfg)
    s1 = build_scenario(cfg, cloud=s0.cloud, slot=1)
    assert s0.cloud is s1.cloud
    assert not np.array_equal(s0.uav_positions, s1.uav_positions)


def test_wrong_bs_count():
    with pytest.raises(ConfigError):
        build_scenario(desk_config(bs_positions=((0.0, 0.0, 0.0),)))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_seed_determinism_property(seed):
    cfg = desk_config(sample_count=50)
    a, b = build_scenario(cfg, seed=seed), build_scenario(cfg, seed=seed)
    assert a.cloud.points.tobytes() == b.cloud.points.tobytes()
    assert a.phase.tobytes() == b.phase.tobytes()
