"""Square-QAM constellations, bit mapping and hard demapping, EVM, bandwidth
arithmetic, and closed-form bit-error-rate curves."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

SUPPORTED_ORDERS = (4, 16, 64, 256)


def _gray(n):
    return n ^ (n >> 1)


@dataclass(frozen=True)
class ConstellationMap:
    """Gray-coded square-QAM symbol table with unit average energy.

    ``points[label]`` is the complex amplitude for an N-bit label. The upper
    N/2 bits of the label select the I level and the lower N/2 bits the Q
    level; each axis carries an independent reflected-Gray code, so grid
    neighbours differ in exactly one bit.
    """

    order: int
    bits_per_symbol: int
    points: np.ndarray       # complex128, indexed by symbol label
    axis_levels: np.ndarray  # ascending coordinate levels shared by I and Q
    axis_labels: np.ndarray  # Gray label carried by each axis level

    @property
    def levels_per_axis(self) -> int:
        return int(self.axis_levels.size)

    def min_distance(self) -> float:
        """Spacing between adjacent grid points along one axis."""
        return float(self.axis_levels[1] - self.axis_levels[0])


def build_constellation(order: int) -> ConstellationMap:
    """Unit-energy square QAM on the odd-integer grid, Gray-labeled per axis."""
    if order not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported QAM order {order}; expected one of {SUPPORTED_ORDERS}")
    n_bits = int(math.log2(order))
    side = int(math.isqrt(order))
    half = n_bits // 2

    level_index = np.arange(side)
    labels = _gray(level_index)
    # grid ..., -3, -1, +1, +3, ... scaled so the mean symbol energy is one
    coords = (2.0 * level_index - (side - 1)) / math.sqrt(2.0 * (order - 1) / 3.0)

    level_of_label = np.empty(side, dtype=np.intp)
    level_of_label[labels] = level_index

    all_labels = np.arange(order)
    i_level = level_of_label[all_labels >> half]
    q_level = level_of_label[all_labels & (side - 1)]
    points = coords[i_level] + 1j * coords[q_level]
    return ConstellationMap(order, n_bits, points, coords, labels)


def map_bits(bits, cmap: ConstellationMap) -> np.ndarray:
    """Map a {0,1} sequence onto constellation points, MSB first per symbol."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.ndim != 1:
        raise ValueError("bits must be one-dimensional")
    if bits.size % cmap.bits_per_symbol:
        raise ValueError(
            f"bit count {bits.size} is not a multiple of {cmap.bits_per_symbol}")
    if bits.size == 0:
        return np.empty(0, dtype=np.complex128)
    groups = bits.reshape(-1, cmap.bits_per_symbol).astype(np.int64)
    weights = 1 << np.arange(cmap.bits_per_symbol - 1, -1, -1)
    return cmap.points[groups @ weights]


def _nearest_axis_label(values: np.ndarray, cmap: ConstellationMap) -> np.ndarray:
    """Gray label of the nearest coordinate level on one axis.

    A value exactly between two levels resolves to the smaller Gray label,
    which makes the full-symbol tie rule "smaller label wins" hold because
    the I bits sit above the Q bits.
    """
    levels = cmap.axis_levels
    labels = cmap.axis_labels
    side = levels.size
    mids = 0.5 * (levels[:-1] + levels[1:])
    idx = np.searchsorted(mids, values)  # boundary values land on the lower level
    tie = np.flatnonzero((idx < side - 1) & (values == mids[np.minimum(idx, side - 2)]))
    if tie.size:
        k = idx[tie]
        idx[tie] = np.where(labels[k] <= labels[k + 1], k, k + 1)
    return labels[idx]


def demap_hard(symbols, cmap: ConstellationMap) -> np.ndarray:
    """Hard-decision demapping to bits by nearest constellation point."""
    symbols = np.asarray(symbols, dtype=np.complex128)
    half = cmap.bits_per_symbol // 2
    labels = (_nearest_axis_label(symbols.real, cmap) << half) | _nearest_axis_label(
        symbols.imag, cmap)
    shifts = np.arange(cmap.bits_per_symbol - 1, -1, -1)
    return ((labels[:, None] >> shifts) & 1).astype(np.uint8).reshape(-1)


@dataclass(frozen=True)
class BandwidthPlan:
    """Bit rate, symbol rate, and first-null bandwidth of an M-ary QAM signal."""

    bit_rate_bps: float
    bits_per_symbol: int
    symbol_rate_hz: float
    null_to_null_hz: float


def bandwidth_plan(bit_rate_bps: float, order: int) -> BandwidthPlan:
    if bit_rate_bps <= 0.0:
        raise ValueError(f"bit rate must be > 0, got {bit_rate_bps}")
    if order not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported QAM order {order}; expected one of {SUPPORTED_ORDERS}")
    n = int(math.log2(order))
    symbol_rate = bit_rate_bps / n
    return BandwidthPlan(bit_rate_bps, n, symbol_rate, 2.0 * symbol_rate)


def theoretical_ber(order: int, ebn0_db):
    """Gray-coded square-QAM bit error probability (nearest-neighbour form).

    P_b = (4/N) (1 - 1/sqrt(M)) Q(sqrt(3N/(M-1) * Eb/N0)). Accepts a scalar
    or an array of Eb/N0 values in dB; the result is capped at 0.5.
    """
    if order not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported QAM order {order}; expected one of {SUPPORTED_ORDERS}")
    n = math.log2(order)
    gamma_b = 10.0 ** (np.asarray(ebn0_db, dtype=float) / 10.0)
    q = 0.5 * erfc(np.sqrt(1.5 * n / (order - 1) * gamma_b))
    ber = np.minimum((4.0 / n) * (1.0 - 1.0 / math.sqrt(order)) * q, 0.5)
    return float(ber) if np.isscalar(ebn0_db) else ber


def ebn0_for_ber(order: int, target_ber: float, tol_db: float = 0.01,
                 max_iter: int = 200) -> float:
    """Eb/N0 in dB at which theoretical_ber hits target_ber, by bisection.

    Targets above the curve's low-SNR plateau pin to the lower search edge
    instead of failing; the curve simply never gets that bad.
    """
    if not 0.0 < target_ber < 0.5:
        raise ValueError(f"target BER must be in (0, 0.5), got {target_ber}")
    lo, hi = -20.0, 80.0
    for _ in range(max_iter):
        if hi - lo <= tol_db:
            return 0.5 * (lo + hi)
        mid = 0.5 * (lo + hi)
        if theoretical_ber(order, mid) > target_ber:
            lo = mid
        else:
            hi = mid
    raise RuntimeError(
        f"bisection did not reach {tol_db} dB within {max_iter} iterations")


def evm_rms(reference, measured) -> float:
    """RMS error vector magnitude in percent.

    The measured sequence is first scaled by the complex factor that
    least-squares fits it onto the reference, so bulk chain gain and phase
    do not count as error.
    """
    ref = np.asarray(reference, dtype=np.complex128)
    meas = np.asarray(measured, dtype=np.complex128)
    if ref.size == 0 or ref.shape != meas.shape:
        raise ValueError("reference and measured must be non-empty and equal-length")
    ref_power = np.mean(np.abs(ref) ** 2)
    if ref_power == 0.0:
        raise ValueError("reference power is zero")
    meas_power = np.sum(np.abs(meas) ** 2)
    scale = np.sum(np.conj(meas) * ref) / meas_power if meas_power > 0.0 else 0.0
    err_power = np.mean(np.abs(scale * meas - ref) ** 2)
    return 100.0 * math.sqrt(err_power / ref_power)
