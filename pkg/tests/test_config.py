"""Configuration defaults, validation, YAML round-trip, and hashing."""

import math

import pytest

from cfisac.config import ConfigError, ScenarioConfig, config_hash, load_config


def test_default_values_match_reference_scenario():
    cfg = ScenarioConfig()
    assert cfg.num_tx_aps == 5
    assert cfg.num_rx_aps == 16
    assert cfg.num_ues == 8
    assert cfg.antennas_per_ap == 16
    assert cfg.num_sensing_points == 100
    assert cfg.area_size_m == 500.0
    assert cfg.sensing_area_size_m == 400.0
    assert cfg.tx_ap_height_m == 20.0
    assert cfg.rx_ap_height_m == 50.0
    assert cfg.target_altitude_m == 100.0
    assert cfg.carrier_frequency_hz == 1.9e9
    assert cfg.bandwidth_hz == 20e6
    assert cfg.noise_figure_db == 7.0
    assert cfg.max_ap_power_w == 1.0
    assert cfg.min_blocklength == 50
    assert cfg.max_blocklength == 300
    assert cfg.false_alarm_prob == 0.1
    assert cfg.detection_threshold == 0.9
    assert cfg.sinr_threshold_db == 10.0


def test_derived_quantities():
    cfg = ScenarioConfig()
    # lambda = c / f
    assert cfg.wavelength_m == pytest.approx(299_792_458.0 / 1.9e9, rel=1e-12)
    # -174 dBm/Hz + 10 log10(20e6) + 7 dB, converted to watts
    noise_dbm = -174.0 + 10.0 * math.log10(20e6) + 7.0
    assert cfg.noise_power_w == pytest.approx(10 ** (noise_dbm / 10) / 1000, rel=1e-12)
    assert cfg.noise_power_w == pytest.approx(3.9905e-13, rel=1e-4)
    assert cfg.symbol_rate_hz == 2e7
    assert cfg.sinr_threshold_linear == pytest.approx(10.0)
    # default ridge K sigma^2 / rho_max
    assert cfg.rzf_regularizer_value == pytest.approx(8 * cfg.noise_power_w / 1.0)
    # default step 1/20 makes the weight ladder hit exactly 1.0 at the top
    assert cfg.weight_step_value == pytest.approx(0.05)
    grid = cfg.w0_grid_values()
    assert len(grid) == 20
    assert grid[0] == pytest.approx(0.05)
    assert grid[-1] == pytest.approx(1.0)


@pytest.mark.parametrize(
    "field,value",
    [
        ("num_tx_aps", 0),
        ("num_rx_aps", -1),
        ("antennas_per_ap", 0),
        ("grid_points_per_side", 0),
        ("area_size_m", -5.0),
        ("sensing_area_size_m", 600.0),  # larger than the deployment area
        ("carrier_frequency_hz", 0.0),
        ("bandwidth_hz", -1.0),
        ("mean_rcs_m2", -1e-3),
        ("max_ap_power_w", 0.0),
        ("min_blocklength", 0),
        ("max_blocklength", 40),  # below min_blocklength
        ("false_alarm_prob", 0.0),
        ("false_alarm_prob", 1.0),
        ("detection_threshold", 1.5),
        ("weight_steps", 0),
        ("weight_step_size", 1.5),
        ("opt_trials", 0),
        ("ccp_tol", 0.0),
        ("workers", 0),
    ],
)
def test_validation_rejects_bad_values(field, value):
    with pytest.raises(ConfigError):
        ScenarioConfig(**{field: value})


def test_replace_revalidates():
    cfg = ScenarioConfig()
    with pytest.raises(ConfigError):
        cfg.replace(num_ues=-2)
    assert cfg.replace(num_ues=4).num_ues == 4


def test_yaml_round_trip(tmp_path):
    text = """
geometry:
  num_tx_aps: 3
  num_rx_aps: 4
  num_ues: 2
  antennas_per_ap: 8
  grid_points_per_side: 5
rf:
  carrier_frequency_hz: 2.0e9
constraints:
  sinr_threshold_db: 7.5
  max_ap_power_w: 0.5
monte_carlo:
  master_seed: 99
  opt_trials: 5000
experiments:
  gamma_c_grid_db: [3, 6]
"""
    path = tmp_path / "scenario.yaml"
    path.write_text(text)
    cfg = load_config(path)
    assert cfg.num_tx_aps == 3
    assert cfg.antennas_per_ap == 8
    assert cfg.carrier_frequency_hz == 2.0e9
    assert cfg.sinr_threshold_db == 7.5
    assert cfg.max_ap_power_w == 0.5
    assert cfg.master_seed == 99
    assert cfg.opt_trials == 5000
    assert cfg.gamma_c_grid_db == (3.0, 6.0)
    # untouched keys keep their defaults
    assert cfg.num_rx_aps == 4
    assert cfg.bandwidth_hz == 20e6


def test_yaml_unknown_section_rejected(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("mystery:\n  foo: 1\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_yaml_unknown_key_rejected(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("geometry:\n  num_tx_apz: 5\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_yaml_bad_value_rejected(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("geometry:\n  num_tx_aps: -3\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_config_hash_tracks_content():
    a = ScenarioConfig()
    b = ScenarioConfig()
    assert config_hash(a) == config_hash(b)
    c = a.replace(master_seed=2)
    assert config_hash(a) != config_hash(c)
    # hash is a hex digest string
    assert len(config_hash(a)) == 64
    int(config_hash(a), 16)


def test_to_dict_is_plain_data():
    d = ScenarioConfig().to_dict()
    assert d["num_tx_aps"] == 5
    assert isinstance(d["gamma_c_grid_db"], list)
