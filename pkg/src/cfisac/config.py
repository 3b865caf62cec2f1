"""Scenario configuration: schema, validation, file loading, derived RF quantities."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import yaml


class ConfigError(ValueError):
    """A scenario configuration failed validation."""


@dataclass(frozen=True)
class ScenarioConfig:
    """Full description of one simulated deployment.

    Distances are metres, powers watts, frequencies hertz. Defaults describe a
    500 m x 500 m urban area with 5 transmit APs, 16 receive APs, 8 ground UEs
    and a 10 x 10 sensing grid at drone altitude.
    """

    # geometry
    area_size_m: float = 500.0
    sensing_area_size_m: float = 400.0
    grid_points_per_side: int = 10
    num_tx_aps: int = 5
    num_rx_aps: int = 16
    num_ues: int = 8
    antennas_per_ap: int = 16
    tx_ap_height_m: float = 20.0
    rx_ap_height_m: float = 50.0
    ue_height_m: float = 1.5
    target_altitude_m: float = 100.0

    # rf front end
    carrier_frequency_hz: float = 1.9e9
    bandwidth_hz: float = 20e6
    noise_figure_db: float = 7.0
    noise_psd_dbm_per_hz: float = -174.0

    # propagation
    pathloss_ref_db: float = 30.5
    pathloss_exponent: float = 3.67
    pathloss_ref_distance_m: float = 1.0
    mean_rcs_m2: float = 1e-3
    rzf_regularizer: float | None = None  # None -> K * noise_power / max_ap_power

    # communication constraints
    max_ap_power_w: float = 1.0
    sinr_threshold_db: float = 10.0

    # sensing blocklength bounds (symbols)
    min_blocklength: int = 50
    max_blocklength: int = 300

    # detection targets
    false_alarm_prob: float = 0.1
    detection_threshold: float = 0.9

    # adaptive weight schedule
    weight_steps: int = 20
    weight_step_size: float | None = None  # None -> 1 / weight_steps

    # optimizer controls
    ccp_tol: float = 1e-4
    ccp_max_iters: int = 50
    fpp_penalty_base: float = 1e3
    fpp_slack_tol: float = 1e-8
    eigenvalue_cutoff: float = 1e-12

    # monte carlo controls
    opt_trials: int = 10_000
    report_trials: int = 100_000
    master_seed: int = 1
    workers: int = 1

    # experiment grids
    gamma_c_grid_db: tuple[float, ...] = (5.0, 10.0, 15.0)
    p_th_grid: tuple[float, ...] = (0.8, 0.9, 0.99)
    altitude_grid_m: tuple[float, ...] = (100.0, 200.0, 400.0, 800.0, 1600.0)
    w0_grid: tuple[float, ...] | None = None  # None -> the schedule's weight grid

    def __post_init__(self):
        self.validate()

    # ------------------------------------------------------------------ #
    # derived quantities

    @property
    def wavelength_m(self) -> float:
        return 299_792_458.0 / self.carrier_frequency_hz

    @property
    def noise_power_w(self) -> float:
        """Receiver noise power over the full bandwidth, noise figure included."""
        dbm = (
            self.noise_psd_dbm_per_hz
            + 10.0 * math.log10(self.bandwidth_hz)
            + self.noise_figure_db
        )
        return 10.0 ** (dbm / 10.0) / 1000.0

    @property
    def symbol_rate_hz(self) -> float:
        # one complex symbol per channel use at the full bandwidth
        return self.bandwidth_hz

    @property
    def sinr_threshold_linear(self) -> float:
        return 10.0 ** (self.sinr_threshold_db / 10.0)

    @property
    def num_sensing_points(self) -> int:
        return self.grid_points_per_side**2

    @property
    def rzf_regularizer_value(self) -> float:
        if self.rzf_regularizer is not None:
            return self.rzf_regularizer
        return self.num_ues * self.noise_power_w / self.max_ap_power_w

    @property
    def weight_step_value(self) -> float:
        if self.weight_step_size is not None:
            return self.weight_step_size
        return 1.0 / self.weight_steps

    def w0_grid_values(self) -> tuple[float, ...]:
        """Precision-weight grid for fixed-weight sweeps (defaults to the schedule grid)."""
        if self.w0_grid is not None:
            return self.w0_grid
        r = self.weight_step_value
        zmax = self.weight_steps
        return tuple(
            min(1.0, max(0.0, 1.0 - r * (zmax - z))) for z in range(1, zmax + 1)
        )

    # ------------------------------------------------------------------ #

    def validate(self) -> None:
        """Raise ConfigError naming the first offending field."""
        positive = [
            "area_size_m",
            "sensing_area_size_m",
            "grid_points_per_side",
            "num_tx_aps",
            "num_rx_aps",
            "antennas_per_ap",
            "carrier_frequency_hz",
            "bandwidth_hz",
            "pathloss_ref_distance_m",
            "mean_rcs_m2",
            "max_ap_power_w",
            "min_blocklength",
            "max_blocklength",
            "weight_steps",
            "ccp_tol",
            "ccp_max_iters",
            "fpp_penalty_base",
            "opt_trials",
            "report_trials",
            "workers",
        ]
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)!r}")
        nonnegative = ["num_ues", "target_altitude_m", "fpp_slack_tol", "eigenvalue_cutoff"]
        for name in nonnegative:
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative, got {getattr(self, name)!r}")
        if self.min_blocklength > self.max_blocklength:
            raise ConfigError(
                f"min_blocklength {self.min_blocklength} exceeds "
                f"max_blocklength {self.max_blocklength}"
            )
        if not 0.0 < self.false_alarm_prob < 1.0:
            raise ConfigError(f"false_alarm_prob must lie in (0, 1), got {self.false_alarm_prob!r}")
        if not 0.0 < self.detection_threshold < 1.0:
            raise ConfigError(
                f"detection_threshold must lie in (0, 1), got {self.detection_threshold!r}"
            )
        if self.weight_step_size is not None and not 0.0 < self.weight_step_size <= 1.0:
            raise ConfigError(
                f"weight_step_size must lie in (0, 1], got {self.weight_step_size!r}"
            )
        if self.rzf_regularizer is not None and self.rzf_regularizer < 0:
            raise ConfigError(f"rzf_regularizer must be nonnegative, got {self.rzf_regularizer!r}")
        if self.sensing_area_size_m > self.area_size_m:
            raise ConfigError(
                f"sensing_area_size_m {self.sensing_area_size_m} exceeds "
                f"area_size_m {self.area_size_m}"
            )
        for name in ("p_th_grid",):
            for v in getattr(self, name):
                if not 0.0 < v < 1.0:
                    raise ConfigError(f"{name} entries must lie in (0, 1), got {v!r}")
        for v in self.altitude_grid_m:
            if v <= 0:
                raise ConfigError(f"altitude_grid_m entries must be positive, got {v!r}")
        if self.w0_grid is not None:
            for v in self.w0_grid:
                if not 0.0 <= v <= 1.0:
                    raise ConfigError(f"w0_grid entries must lie in [0, 1], got {v!r}")

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        """Flat field -> value mapping with JSON-safe values."""
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        return out


# file schema: section -> {key -> dataclass field}
_SCHEMA: dict[str, dict[str, str]] = {
    "geometry": {
        "area_size_m": "area_size_m",
        "sensing_area_size_m": "sensing_area_size_m",
        "grid_points_per_side": "grid_points_per_side",
        "num_tx_aps": "num_tx_aps",
        "num_rx_aps": "num_rx_aps",
        "num_ues": "num_ues",
        "antennas_per_ap": "antennas_per_ap",
        "tx_ap_height_m": "tx_ap_height_m",
        "rx_ap_height_m": "rx_ap_height_m",
        "ue_height_m": "ue_height_m",
        "target_altitude_m": "target_altitude_m",
    },
    "rf": {
        "carrier_frequency_hz": "carrier_frequency_hz",
        "bandwidth_hz": "bandwidth_hz",
        "noise_figure_db": "noise_figure_db",
        "noise_psd_dbm_per_hz": "noise_psd_dbm_per_hz",
    },
    "channel": {
        "pathloss_ref_db": "pathloss_ref_db",
        "pathloss_exponent": "pathloss_exponent",
        "pathloss_ref_distance_m": "pathloss_ref_distance_m",
        "mean_rcs_m2": "mean_rcs_m2",
        "rzf_regularizer": "rzf_regularizer",
    },
    "constraints": {
        "max_ap_power_w": "max_ap_power_w",
        "sinr_threshold_db": "sinr_threshold_db",
        "min_blocklength": "min_blocklength",
        "max_blocklength": "max_blocklength",
    },
    "detection": {
        "false_alarm_prob": "false_alarm_prob",
        "detection_threshold": "detection_threshold",
    },
    "schedule": {
        "weight_steps": "weight_steps",
        "weight_step_size": "weight_step_size",
    },
    "optimizer": {
        "ccp_tol": "ccp_tol",
        "ccp_max_iters": "ccp_max_iters",
        "fpp_penalty_base": "fpp_penalty_base",
        "fpp_slack_tol": "fpp_slack_tol",
        "eigenvalue_cutoff": "eigenvalue_cutoff",
    },
    "monte_carlo": {
        "opt_trials": "opt_trials",
        "report_trials": "report_trials",
        "master_seed": "master_seed",
        "workers": "workers",
    },
    "experiments": {
        "gamma_c_grid_db": "gamma_c_grid_db",
        "p_th_grid": "p_th_grid",
        "altitude_grid_m": "altitude_grid_m",
        "w0_grid": "w0_grid",
    },
}

_TUPLE_FIELDS = {"gamma_c_grid_db", "p_th_grid", "altitude_grid_m", "w0_grid"}
_INT_FIELDS = {
    "grid_points_per_side",
    "num_tx_aps",
    "num_rx_aps",
    "num_ues",
    "antennas_per_ap",
    "min_blocklength",
    "max_blocklength",
    "weight_steps",
    "ccp_max_iters",
    "opt_trials",
    "report_trials",
    "master_seed",
    "workers",
}


def load_config(path: str | Path) -> ScenarioConfig:
    """Load a YAML scenario file.

    The file holds nested sections (geometry, rf, channel, constraints,
    detection, schedule, optimizer, monte_carlo, experiments); every key is
    optional and falls back to the dataclass default. Unknown sections or keys
    raise ConfigError so typos never pass silently.
    """
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"could not parse {path}: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"top level of {path} must be a mapping")
    kwargs = {}
    for section, entries in raw.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section {section!r}")
        if entries is None:
            continue
        if not isinstance(entries, dict):
            raise ConfigError(f"section {section!r} must be a mapping")
        for key, value in entries.items():
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section {section!r}")
            field = _SCHEMA[section][key]
            kwargs[field] = _coerce(field, value)
    return ScenarioConfig(**kwargs)


def _coerce(field: str, value):
    if value is None:
        return None
    if isinstance(value, str):
        # YAML 1.1 reads exponents without a sign ("2.0e9") as strings
        try:
            value = float(value)
        except ValueError:
            raise ConfigError(f"{field} must be numeric, got {value!r}") from None
    if field in _TUPLE_FIELDS:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{field} must be a list")
        return tuple(float(v) for v in value)
    if field in _INT_FIELDS:
        if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
            raise ConfigError(f"{field} must be an integer, got {value!r}")
        return int(value)
    return float(value)


def config_hash(config: ScenarioConfig) -> str:
    """Stable hash of the full configuration, for run manifests."""
    blob = json.dumps(config.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()
