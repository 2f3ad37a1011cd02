"""Association, MRT precoding, SINR under intra/inter-cell interference, capacity.

All SINR math stays in the linear power domain at double precision. Victim
links are evaluated against interfering precoders computed for their own
targets; constraint enforcement happens upstream (this module asserts, never
repairs).
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "DegenerateChannelError",
    "associate",
    "mrt_precoder",
    "equal_power_split",
    "sinr_tuav_to_gue",
    "sinr_tuav_to_uuav",
    "sinr_uuav_to_gue",
    "quantized_capacity",
]


class DegenerateChannelError(ValueError):
    """Raised when asked to precode along an all-zero channel."""


def associate(rssi_table: np.ndarray) -> np.ndarray:
    """Map each ground user to its argmax-RSSI UAV (ties to the lowest UAV index).

    ``rssi_table[k, m]`` is the dBm RSSI of UAV k at user m; the table must be
    complete (finite) at association time.
    """
    table = np.asarray(rssi_table, dtype=float)
    if not np.all(np.isfinite(table)):
        raise ValueError("RSSI table must be finite everywhere")
    return np.argmax(table, axis=0)


def mrt_precoder(g: np.ndarray) -> np.ndarray:
    """Unit-norm transmit vector maximizing received power on channel ``g``.

    MISO rows use the conjugate-channel direction; matrix channels use the
    principal right singular vector (the matched generalization).
    """
    g = np.asarray(g)
    if not np.any(g):
        raise DegenerateChannelError("cannot precode a zero channel")
    if g.ndim == 1 or 1 in g.shape:
        v = g.conj().ravel()
        return v / np.linalg.norm(v)
    _, _, vh = np.linalg.svd(g)
    return vh[0].conj()


def equal_power_split(total_power_watt: float, n_scheduled: int) -> float:
    if n_scheduled <= 0:
        raise ValueError("power split needs at least one scheduled target")
    return total_power_watt / n_scheduled


def _beam_power(g: np.ndarray, w: np.ndarray) -> float:
    """|g w|^2 for a row channel, ||g w||^2 for a matrix channel."""
    y = np.asarray(g) @ np.asarray(w)
    return float(np.real(np.vdot(y, y)))


def sinr_tuav_to_gue(g_victim: np.ndarray, w_victim: np.ndarray,
                     interfering_precoders: list[np.ndarray],
                     power_watt: float, noise_watt: float) -> float:
    """Donor-to-user SINR; interferers are the donor's other scheduled beams
    (co-scheduled users and backhaul beams alike), weighted by the victim's
    allocated power."""
    g = np.asarray(g_victim).ravel()
    num = power_watt * _beam_power(g, w_victim)
    den = noise_watt + sum(power_watt * _beam_power(g, w) for w in interfering_precoders)
    return num / den


def sinr_tuav_to_uuav(g_victim: np.ndarray, w_victim: np.ndarray,
                      interfering_precoders: list[np.ndarray],
                      power_watt: float, noise_watt: float) -> float:
    """Donor-to-node backhaul SINR with matched receive combining on the
    desired beam; interference terms keep the unfiltered ||g w_i||^2 form."""
    g = np.asarray(g_victim)
    num = power_watt * _beam_power(g, w_victim)
    den = noise_watt + sum(power_watt * _beam_power(g, w) for w in interfering_precoders)
    return num / den


def sinr_uuav_to_gue(g_victim: np.ndarray, w_victim: np.ndarray,
                     intra_precoders: list[np.ndarray],
                     cross_beams: list[tuple[np.ndarray, np.ndarray, float]],
                     power_watt: float, noise_watt: float) -> float:
    """Node-to-user SINR.

    ``intra_precoders`` are the same node's other scheduled beams (victim's
    power applies); ``cross_beams`` are (victim's channel from the other node,
    that beam's precoder, that beam's allocated power) triples for every
    scheduled user of every other node. The donor band does not interfere.
    """
    g = np.asarray(g_victim).ravel()
    num = power_watt * _beam_power(g, w_victim)
    den = noise_watt + sum(power_watt * _beam_power(g, w) for w in intra_precoders)
    for g_cross, w, p in cross_beams:
        den += p * _beam_power(np.asarray(g_cross).ravel(), w)
    return num / den


def quantized_capacity(bandwidth_hz: float, sinr_linear: float, slot_s: float,
                       packet_bits: float) -> int:
    """Whole packets deliverable in one slot at Shannon rate."""
    if sinr_linear < 0:
        raise ValueError("SINR must be non-negative")
    return int(math.floor(bandwidth_hz * math.log2(1.0 + sinr_linear) * slot_s / packet_bits))
