"""Deployment geometry, steering angles, channels, and target reflectivity draws.

Coordinates are 3D metres. Every transmit AP carries a horizontal uniform
linear array with half-wavelength spacing along the x axis, so the response of
antenna m to a direction (azimuth phi, elevation theta) is
exp(j * pi * m * sin(phi) * cos(theta)).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .config import ScenarioConfig

_MIN_RANGE_M = 1e-6  # below this an AP sits on top of the target


class GeometryError(ValueError):
    """Degenerate placement (zero-range AP/target pair, malformed arrays)."""


def array_response(azimuth: float, elevation: float, num_antennas: int) -> np.ndarray:
    """Half-wavelength ULA response, unit-modulus entries, squared norm M.

    :param azimuth: angle in the horizontal plane, radians
    :param elevation: angle above the horizontal plane, radians
    :param num_antennas: array size M, must be positive
    """
    if num_antennas <= 0:
        raise ValueError(f"num_antennas must be positive, got {num_antennas}")
    phase = np.pi * np.sin(azimuth) * np.cos(elevation)
    return np.exp(1j * phase * np.arange(num_antennas))


def azimuth_elevation(origins: np.ndarray, target: np.ndarray):
    """Azimuth/elevation of `target` seen from each row of `origins`.

    Returns two arrays of length origins.shape[0]. Azimuth is measured in the
    xy plane with atan2(dy, dx); elevation is atan2(dz, ground_range), so a
    target directly overhead gives elevation pi/2.
    """
    origins = np.atleast_2d(np.asarray(origins, dtype=float))
    target = np.asarray(target, dtype=float)
    delta = target[None, :] - origins
    ground = np.hypot(delta[:, 0], delta[:, 1])
    azimuth = np.arctan2(delta[:, 1], delta[:, 0])
    elevation = np.arctan2(delta[:, 2], ground)
    return azimuth, elevation


def bistatic_gain(
    wavelength_m: float, mean_rcs_m2: float, tx_range_m, rx_range_m
) -> np.ndarray:
    """Two-hop power gain lambda^2 * sigma / ((4 pi)^3 d_tx^2 d_rx^2)."""
    tx_range_m = np.asarray(tx_range_m, dtype=float)
    rx_range_m = np.asarray(rx_range_m, dtype=float)
    if np.any(tx_range_m < _MIN_RANGE_M) or np.any(rx_range_m < _MIN_RANGE_M):
        raise GeometryError("AP co-located with the sensing point: zero range")
    return (
        wavelength_m**2
        * mean_rcs_m2
        / ((4.0 * np.pi) ** 3 * tx_range_m**2 * rx_range_m**2)
    )


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class NetworkGeometry:
    """AP, UE, and sensing-grid positions; arrays are read-only."""

    tx_ap_positions: np.ndarray  # (L, 3)
    rx_ap_positions: np.ndarray  # (R, 3)
    ue_positions: np.ndarray  # (K, 3)
    sensing_points: np.ndarray  # (S, 3)
    antennas_per_ap: int

    def __post_init__(self):
        for name in ("tx_ap_positions", "rx_ap_positions", "ue_positions", "sensing_points"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim != 2 or arr.shape[1] != 3:
                raise GeometryError(f"{name} must have shape (n, 3), got {arr.shape}")
            object.__setattr__(self, name, _freeze(arr))
        if self.antennas_per_ap <= 0:
            raise GeometryError("antennas_per_ap must be positive")

    @property
    def num_tx(self) -> int:
        return self.tx_ap_positions.shape[0]

    @property
    def num_rx(self) -> int:
        return self.rx_ap_positions.shape[0]

    @property
    def num_ues(self) -> int:
        return self.ue_positions.shape[0]

    @property
    def num_points(self) -> int:
        return self.sensing_points.shape[0]


@dataclass(frozen=True)
class SteeringAngles:
    """Tx and Rx AP look angles toward one sensing point (radians)."""

    tx_azimuth: np.ndarray
    tx_elevation: np.ndarray
    rx_azimuth: np.ndarray
    rx_elevation: np.ndarray

    def __post_init__(self):
        for name in ("tx_azimuth", "tx_elevation", "rx_azimuth", "rx_elevation"):
            object.__setattr__(self, name, _freeze(np.asarray(getattr(self, name), float)))


@dataclass(frozen=True)
class ChannelSet:
    """Channels for one sensing point.

    ue_channels[k] stacks the k-th UE's channel across transmit APs (length
    L*M); target_channel stacks the transmit steering vectors the same way.
    sensing_gains[r, l] is the real two-hop power gain of the (tx l -> target
    -> rx r) path, mean target reflectivity included.
    """

    ue_channels: np.ndarray  # (K, L*M) complex
    target_channel: np.ndarray  # (L*M,) complex
    sensing_gains: np.ndarray  # (R, L) real
    noise_power: float

    def __post_init__(self):
        object.__setattr__(self, "ue_channels", _freeze(np.asarray(self.ue_channels, complex)))
        object.__setattr__(
            self, "target_channel", _freeze(np.asarray(self.target_channel, complex))
        )
        gains = np.asarray(self.sensing_gains, dtype=float)
        if np.any(gains < 0):
            raise GeometryError("sensing_gains must be nonnegative")
        object.__setattr__(self, "sensing_gains", _freeze(gains))
        if self.noise_power <= 0:
            raise GeometryError("noise_power must be positive")


@dataclass(frozen=True)
class RcsRealization:
    """One Swerling-I draw of the per-path complex reflection coefficients."""

    coefficients: np.ndarray  # (R*L,) complex, unit variance

    def __post_init__(self):
        object.__setattr__(
            self, "coefficients", _freeze(np.asarray(self.coefficients, complex))
        )


@dataclass(frozen=True)
class Scene:
    """Geometry plus the channels for the currently selected sensing point."""

    geometry: NetworkGeometry
    angles: SteeringAngles
    channels: ChannelSet
    point_index: int
    wavelength_m: float
    mean_rcs_m2: float

    def for_point(self, point_index: int) -> "Scene":
        """Same deployment and UE channels, retargeted to another grid point.

        Deterministic: steering angles, the target channel, and the bistatic
        gains are pure functions of geometry, so no randomness is consumed.
        """
        geo = self.geometry
        if not 0 <= point_index < geo.num_points:
            raise IndexError(
                f"point_index {point_index} outside grid of {geo.num_points} points"
            )
        angles, target_channel, gains = _point_quantities(
            geo, point_index, self.wavelength_m, self.mean_rcs_m2
        )
        channels = ChannelSet(
            ue_channels=self.channels.ue_channels,
            target_channel=target_channel,
            sensing_gains=gains,
            noise_power=self.channels.noise_power,
        )
        return replace(self, angles=angles, channels=channels, point_index=point_index)


def default_tx_positions(config: ScenarioConfig) -> np.ndarray:
    """Transmit AP preset: centre plus mid-edge sites for L = 5, else a ring."""
    a = config.area_size_m
    h = config.tx_ap_height_m
    L = config.num_tx_aps
    if L == 5:
        xy = np.array(
            [
                [a / 2, a / 2],
                [a / 2, a / 10],
                [a / 2, 9 * a / 10],
                [a / 10, a / 2],
                [9 * a / 10, a / 2],
            ]
        )
    else:
        # fallback for non-default sizes: evenly spaced circle around the centre
        ang = 2.0 * np.pi * np.arange(L) / L
        xy = np.column_stack(
            [a / 2 + 0.35 * a * np.cos(ang), a / 2 + 0.35 * a * np.sin(ang)]
        )
    return np.column_stack([xy, np.full(L, h)])


def default_rx_positions(config: ScenarioConfig) -> np.ndarray:
    """Receive AP preset: square lattice over the area interior."""
    a = config.area_size_m
    h = config.rx_ap_height_m
    R = config.num_rx_aps
    side = int(np.ceil(np.sqrt(R)))
    coords = (np.arange(side) + 1.0) * a / (side + 1.0)
    xx, yy = np.meshgrid(coords, coords, indexing="xy")
    xy = np.column_stack([xx.ravel(), yy.ravel()])[:R]
    return np.column_stack([xy, np.full(R, h)])


def sensing_grid(config: ScenarioConfig) -> np.ndarray:
    """Uniform square grid at the target altitude, centred in the area."""
    a = config.area_size_m
    b = config.sensing_area_size_m
    n = config.grid_points_per_side
    # n cells of width b/n, points at cell centres
    offsets = (np.arange(n) + 0.5) * b / n + (a - b) / 2.0
    xx, yy = np.meshgrid(offsets, offsets, indexing="xy")
    return np.column_stack(
        [xx.ravel(), yy.ravel(), np.full(n * n, config.target_altitude_m)]
    )


def _point_quantities(geo: NetworkGeometry, point_index: int, wavelength: float, rcs: float):
    point = geo.sensing_points[point_index]
    tx_az, tx_el = azimuth_elevation(geo.tx_ap_positions, point)
    rx_az, rx_el = azimuth_elevation(geo.rx_ap_positions, point)
    angles = SteeringAngles(tx_az, tx_el, rx_az, rx_el)
    M = geo.antennas_per_ap
    target_channel = np.concatenate(
        [array_response(tx_az[l], tx_el[l], M) for l in range(geo.num_tx)]
    )
    tx_range = np.linalg.norm(geo.tx_ap_positions - point[None, :], axis=1)
    rx_range = np.linalg.norm(geo.rx_ap_positions - point[None, :], axis=1)
    gains = bistatic_gain(wavelength, rcs, tx_range[None, :], rx_range[:, None])
    return angles, target_channel, gains


def build_scene(
    config: ScenarioConfig, rng_seed, point_index: int = 0
) -> Scene:
    """Draw one deployment and aim it at `point_index`.

    The RNG stream covers, in order: UE positions (uniform over the area),
    then the i.i.d. Rayleigh UE channel coefficients. Same seed, same scene,
    bit for bit. AP and grid placement is deterministic. `rng_seed` is
    anything numpy's default_rng accepts.
    """
    rng = np.random.default_rng(rng_seed)
    geo = NetworkGeometry(
        tx_ap_positions=default_tx_positions(config),
        rx_ap_positions=default_rx_positions(config),
        ue_positions=np.column_stack(
            [
                rng.uniform(0.0, config.area_size_m, size=(config.num_ues, 2)),
                np.full(config.num_ues, config.ue_height_m),
            ]
        ),
        sensing_points=sensing_grid(config),
        antennas_per_ap=config.antennas_per_ap,
    )
    ue_channels = _draw_ue_channels(config, geo, rng)
    angles, target_channel, gains = _point_quantities(
        geo, point_index, config.wavelength_m, config.mean_rcs_m2
    )
    channels = ChannelSet(
        ue_channels=ue_channels,
        target_channel=target_channel,
        sensing_gains=gains,
        noise_power=config.noise_power_w,
    )
    return Scene(
        geometry=geo,
        angles=angles,
        channels=channels,
        point_index=point_index,
        wavelength_m=config.wavelength_m,
        mean_rcs_m2=config.mean_rcs_m2,
    )


def _draw_ue_channels(config: ScenarioConfig, geo: NetworkGeometry, rng) -> np.ndarray:
    """i.i.d. Rayleigh per antenna, variance set by log-distance path loss."""
    K, L, M = geo.num_ues, geo.num_tx, geo.antennas_per_ap
    if K == 0:
        return np.zeros((0, L * M), dtype=complex)
    # (K, L) 3D distances
    diff = geo.ue_positions[:, None, :] - geo.tx_ap_positions[None, :, :]
    dist = np.linalg.norm(diff, axis=2)
    dist = np.maximum(dist, config.pathloss_ref_distance_m)
    pl_db = config.pathloss_ref_db + 10.0 * config.pathloss_exponent * np.log10(
        dist / config.pathloss_ref_distance_m
    )
    var = 10.0 ** (-pl_db / 10.0)  # per-antenna channel variance
    scale = np.sqrt(np.repeat(var, M, axis=1) / 2.0)  # (K, L*M)
    raw = rng.standard_normal((K, L * M)) + 1j * rng.standard_normal((K, L * M))
    return scale * raw


def draw_rcs(rng_seed, num_rx: int, num_tx: int) -> RcsRealization:
    """Swerling-I reflection coefficients: unit-variance circular Gaussian."""
    rng = np.random.default_rng(rng_seed)
    n = num_rx * num_tx
    coeff = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2.0)
    return RcsRealization(coefficients=coeff)
