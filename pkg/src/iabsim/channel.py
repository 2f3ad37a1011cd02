"""Large-scale path loss, elevation-dependent Rician fading, and steering vectors.

Conventions used everywhere in the package:
  * ``loss`` is a linear power ratio >= 1 that grows with distance; received
    power is transmit power divided by loss. Channel coefficient amplitudes
    therefore carry sqrt(1/loss).
  * Elevation angles are stored in degrees; the Rician exponent converts to
    radians explicitly.
  * The LoS/NLoS mixture is applied in expectation (no per-slot Bernoulli
    draw): the channel state is constant within a slot and redrawn across
    slots.

Scalar entry points take a LinkGeometry; the ``*_batch`` variants evaluate
whole target lists at once (same formulas, one RNG draw per link so per-link
substreams stay independent).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import ChannelParams, db_to_linear

__all__ = [
    "LinkGeometry",
    "geometry_between",
    "los_probability",
    "large_scale_a2g",
    "large_scale_a2a",
    "rician_factor",
    "steering_vector",
    "sample_a2g_channel",
    "sample_a2a_channel",
    "rssi_dbm",
    "noise_power_watt",
]


@dataclass(frozen=True)
class LinkGeometry:
    """3-D separation of one link plus the array sizes that see it."""

    distance: float        # m, > 0
    elevation_deg: float   # [0, 90]
    wavelength: float      # m
    tx_antennas: int
    rx_antennas: int = 1

    def __post_init__(self):
        if self.distance <= 0:
            raise ValueError("link distance must be positive")
        if not 0.0 <= self.elevation_deg <= 90.0:
            raise ValueError("elevation must lie in [0, 90] degrees")


def geometry_between(tx_pos: np.ndarray, rx_pos: np.ndarray, wavelength: float,
                     tx_antennas: int, rx_antennas: int = 1) -> LinkGeometry:
    """Geometry for a link between an elevated transmitter and a receiver."""
    d = float(np.linalg.norm(np.asarray(tx_pos, float) - np.asarray(rx_pos, float)))
    dz = abs(float(tx_pos[2]) - float(rx_pos[2]))
    elevation = math.degrees(math.asin(min(1.0, dz / d))) if d > 0 else 90.0
    return LinkGeometry(d, elevation, wavelength, tx_antennas, rx_antennas)


def distances_elevations(tx_pos: np.ndarray, rx_pos: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized distance and elevation (degrees) from one position to many."""
    rx = np.atleast_2d(np.asarray(rx_pos, float))
    diff = rx - np.asarray(tx_pos, float)
    d = np.linalg.norm(diff, axis=1)
    dz = np.abs(diff[:, 2])
    return d, np.degrees(np.arcsin(np.minimum(1.0, dz / d)))


def los_probability(elevation_deg, params: ChannelParams):
    """Sigmoid-in-elevation probability that the link is line of sight."""
    a, b = params.los_a, params.los_b
    return 1.0 / (1.0 + a * np.exp(-b * (np.asarray(elevation_deg) - a)))


def _friis_core(distance, wavelength: float, alpha: float):
    return (4.0 * math.pi * np.asarray(distance) / wavelength) ** alpha


def large_scale_a2g_arrays(distance, elevation_deg, wavelength: float,
                           params: ChannelParams):
    p_los = los_probability(elevation_deg, params)
    mix = (db_to_linear(params.mu_los_db) * p_los
           + db_to_linear(params.mu_nlos_db) * (1.0 - p_los))
    return _friis_core(distance, wavelength, params.alpha) * mix


def large_scale_a2g(geom: LinkGeometry, params: ChannelParams) -> float:
    """Expected ground-link path loss: Friis core times the LoS/NLoS mix."""
    return float(large_scale_a2g_arrays(
        geom.distance, geom.elevation_deg, geom.wavelength, params))


def large_scale_a2a(geom: LinkGeometry, params: ChannelParams) -> float:
    """Aerial-link path loss: pure LoS, no probability mixture."""
    return float(_friis_core(geom.distance, geom.wavelength, params.alpha)
                 * db_to_linear(params.mu_los_db))


def rician_factor(elevation_deg, params: ChannelParams):
    return params.rician_a1 * np.exp(params.rician_a2 * np.radians(np.asarray(elevation_deg)))


def steering_vector(angle_rad: float, n_antennas: int) -> np.ndarray:
    """Half-wavelength ULA response; element i is exp(-j*pi*i*cos(angle))."""
    i = np.arange(n_antennas)
    return np.exp(-1j * math.pi * i * np.cos(angle_rad))


def _steering_matrix(angles_rad: np.ndarray, n_antennas: int) -> np.ndarray:
    i = np.arange(n_antennas)
    return np.exp(-1j * math.pi * np.outer(np.cos(angles_rad), i))


_INV_SQRT2 = 1.0 / math.sqrt(2.0)


def _cscg(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """Zero-mean unit-variance circularly symmetric complex Gaussian entries."""
    n = math.prod(shape)
    z = rng.standard_normal(2 * n)
    out = z[:n] * _INV_SQRT2 + (1j * _INV_SQRT2) * z[n:]
    return out.reshape(shape) if len(shape) > 1 else out


def sample_a2g_batch(distance: np.ndarray, elevation_deg: np.ndarray,
                     wavelength: float, n_antennas: int, params: ChannelParams,
                     rngs: list[np.random.Generator]) -> np.ndarray:
    """One slot's ground-link rows for many links from one transmitter.

    Row i is the 1 x A Rician coefficient of link i: sqrt(gain) times the
    mixture of the deterministic steering response and per-link CSCG scatter.
    """
    d = np.asarray(distance, float)
    theta = np.asarray(elevation_deg, float)
    loss = large_scale_a2g_arrays(d, theta, wavelength, params)
    k = rician_factor(theta, params)
    phi = math.pi / 2.0 - np.radians(theta)
    los = np.exp(-2j * math.pi * d / wavelength)[:, None] * _steering_matrix(phi, n_antennas)
    nlos = np.stack([_cscg(rng, (n_antennas,)) for rng in rngs])
    eta = (np.sqrt(k / (k + 1.0))[:, None] * los
           + np.sqrt(1.0 / (k + 1.0))[:, None] * nlos)
    return np.sqrt(1.0 / loss)[:, None] * eta


def sample_a2g_channel(geom: LinkGeometry, params: ChannelParams,
                       rng: np.random.Generator) -> np.ndarray:
    """One slot's 1 x A ground-link coefficient row."""
    if geom.rx_antennas != 1:
        raise ValueError("ground links are single-receive-antenna")
    return sample_a2g_batch(
        np.array([geom.distance]), np.array([geom.elevation_deg]),
        geom.wavelength, geom.tx_antennas, params, [rng])


def sample_a2a_channel(geom: LinkGeometry, params: ChannelParams,
                       rng: np.random.Generator) -> np.ndarray:
    """One slot's A_rx x A_tx aerial-link coefficient matrix (rank-1 LoS part)."""
    loss = large_scale_a2a(geom, params)
    k = float(rician_factor(geom.elevation_deg, params))
    phi = math.pi / 2.0 - math.radians(geom.elevation_deg)
    e_r = steering_vector(phi, geom.rx_antennas)
    e_t = steering_vector(phi, geom.tx_antennas)
    los = np.exp(-2j * math.pi * geom.distance / geom.wavelength) * np.outer(e_r, e_t.conj())
    nlos = _cscg(rng, (geom.rx_antennas, geom.tx_antennas))
    eta = math.sqrt(k / (k + 1.0)) * los + math.sqrt(1.0 / (k + 1.0)) * nlos
    return math.sqrt(1.0 / loss) * eta


def rssi_dbm(tx_power_dbm: float, loss):
    """Received signal strength: transmit power divided by path loss, in dBm."""
    return tx_power_dbm - 10.0 * np.log10(loss)


def noise_power_watt(bandwidth_hz: float, params: ChannelParams) -> float:
    """Thermal noise floor over the link bandwidth plus receiver noise figure."""
    dbm = params.noise_density_dbm + 10.0 * math.log10(bandwidth_hz) + params.noise_figure_db
    return 10.0 ** (dbm / 10.0) * 1e-3
