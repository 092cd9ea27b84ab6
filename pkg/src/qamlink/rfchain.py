"""Memoryless RF stage models (gain, noise figure, compression, third-order
intercept) and Friis cascade analysis of gain and noise figure."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .units import (
    GainDb,
    PowerDbm,
    THERMAL_NOISE_DBM_PER_HZ,
    db_to_linear,
    dbm_to_watts,
    watts_to_dbm,
)

# Fractional gain drop at the 1 dB compression point: 1 - 10^(-1/20).
_COMPRESSION_1DB = 1.0 - 10.0 ** (-1.0 / 20.0)

# Two-tone offset between output P1dB and OIP3 quoted for the PA family used
# here. The third-order envelope polynomial below implies 10.64 dB, so the
# quoted constant and the waveform model agree to within 0.04 dB.
OIP3_OVER_P1DB_DB = 10.6


@dataclass(frozen=True)
class StageSpec:
    """One RF stage: gain, noise figure, optional compression/intercept data."""

    name: str
    gain_db: GainDb
    nf_db: float = 0.0
    p1db_out_dbm: PowerDbm | None = None
    oip3_dbm: PowerDbm | None = None

    def __post_init__(self):
        if not math.isfinite(self.gain_db):
            raise ValueError(f"stage {self.name!r}: gain must be finite")
        if not math.isfinite(self.nf_db) or self.nf_db < 0.0:
            raise ValueError(f"stage {self.name!r}: noise figure must be >= 0 dB")
        if (self.p1db_out_dbm is not None and self.oip3_dbm is not None
                and self.oip3_dbm < self.p1db_out_dbm):
            raise ValueError(f"stage {self.name!r}: OIP3 below output P1dB")

    @property
    def is_nonlinear(self) -> bool:
        return self.p1db_out_dbm is not None

    @classmethod
    def passive(cls, name: str, loss_db: float) -> "StageSpec":
        """Matched passive stage; its noise figure equals its loss."""
        if loss_db < 0.0:
            raise ValueError(f"stage {name!r}: passive loss must be >= 0 dB")
        return cls(name=name, gain_db=-loss_db, nf_db=loss_db)

    def linearized(self) -> "StageSpec":
        """Same stage with compression disabled."""
        return replace(self, p1db_out_dbm=None, oip3_dbm=None)


@dataclass(frozen=True)
class ChainSpec:
    """Ordered cascade of stages; antenna-side first for RX, baseband-side
    first for TX."""

    stages: tuple[StageSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        if not self.stages:
            raise ValueError("chain must contain at least one stage")

    def linearized(self) -> "ChainSpec":
        return ChainSpec(tuple(s.linearized() for s in self.stages))


@dataclass(frozen=True)
class CascadeResult:
    total_gain_db: GainDb
    total_nf_db: float
    per_stage_cumulative: tuple[tuple[GainDb, float], ...]


def cascade(chain: ChainSpec) -> CascadeResult:
    """Friis cascade of gain and noise figure, prefix by prefix.

    F = F1 + (F2-1)/G1 + (F3-1)/(G1*G2) + ... with noise factors and gains
    in linear units; gains accumulate by summing dB.
    """
    cumulative: list[tuple[float, float]] = []
    gain_db_sum = 0.0
    gain_product = 1.0
    f_total = 1.0
    for i, stage in enumerate(chain.stages):
        f_stage = db_to_linear(stage.nf_db)
        if i == 0:
            f_total = f_stage
        else:
            f_total += (f_stage - 1.0) / gain_product
        gain_db_sum += stage.gain_db
        gain_product *= db_to_linear(stage.gain_db)
        cumulative.append((gain_db_sum, 10.0 * math.log10(f_total)))
    return CascadeResult(cumulative[-1][0], cumulative[-1][1], tuple(cumulative))


def oip3_from_p1db(p1db_out_dbm: PowerDbm) -> PowerDbm:
    """Output third-order intercept from output P1dB via the 10.6 dB offset."""
    return p1db_out_dbm + OIP3_OVER_P1DB_DB


def im3_delta(p_out_dbm: PowerDbm, oip3_dbm: PowerDbm) -> float:
    """dB gap between a fundamental tone and its third-order intermod product.

    Standard two-tone relation: delta = 2 * (OIP3 - P_out), valid only below
    the intercept point.
    """
    if p_out_dbm > oip3_dbm:
        raise ValueError(
            f"per-tone power {p_out_dbm} dBm is above the {oip3_dbm} dBm intercept; "
            "the extrapolation is not meaningful there")
    return 2.0 * (oip3_dbm - p_out_dbm)


def _polynomial_coefficients(spec: StageSpec) -> tuple[float, float]:
    """(a1, a3) of y = a1*x - a3*|x|^2*x.

    a1 is the small-signal voltage gain; a3 is fixed by requiring the output
    power at the 1 dB compression input to equal the stage's output P1dB.
    """
    a1 = 10.0 ** (spec.gain_db / 20.0)
    out_amp_1db = math.sqrt(dbm_to_watts(spec.p1db_out_dbm))
    in_amp_1db = out_amp_1db / (a1 * 10.0 ** (-1.0 / 20.0))
    a3 = _COMPRESSION_1DB * a1 / (in_amp_1db * in_amp_1db)
    return a1, a3


def amplifier_transfer(x, spec: StageSpec):
    """Apply one stage to complex baseband samples.

    Linear stages scale by the voltage gain. A stage with an output P1dB
    follows the third-order AM/AM polynomial above; past the polynomial's
    peak input the output envelope hard-clips at the peak value so the
    envelope stays monotone. Phase passes through untouched (no AM/PM).
    """
    x = np.asarray(x, dtype=np.complex128)
    if not spec.is_nonlinear:
        y = x * 10.0 ** (spec.gain_db / 20.0)
    else:
        a1, a3 = _polynomial_coefficients(spec)
        peak_in = math.sqrt(a1 / (3.0 * a3))
        env = np.abs(x)
        shrink = np.ones_like(env)
        np.divide(peak_in, env, out=shrink, where=env > peak_in)
        clipped = env * shrink
        y = (a1 - a3 * clipped * clipped) * shrink * x
    return complex(y) if y.ndim == 0 else y


def stage_noise_power(spec: StageSpec, bandwidth_hz: float,
                      input_noise_dbm: PowerDbm) -> PowerDbm:
    """Noise power at the stage output: amplified input noise plus the
    stage's own added noise kTB(F-1)G."""
    if bandwidth_hz <= 0.0:
        raise ValueError(f"bandwidth must be > 0, got {bandwidth_hz}")
    gain = db_to_linear(spec.gain_db)
    out_w = dbm_to_watts(input_noise_dbm) * gain + stage_added_noise_watts(
        spec, bandwidth_hz)
    return watts_to_dbm(out_w)


def stage_added_noise_watts(spec: StageSpec, bandwidth_hz: float) -> float:
    """Output-referred noise power the stage itself adds over the bandwidth."""
    ktb_w = dbm_to_watts(THERMAL_NOISE_DBM_PER_HZ) * bandwidth_hz
    return ktb_w * (db_to_linear(spec.nf_db) - 1.0) * db_to_linear(spec.gain_db)


def chain_transfer(x, chain: ChainSpec, bandwidth_hz: float | None = None,
                   rng: np.random.Generator | None = None) -> np.ndarray:
    """Run complex baseband samples through every stage in order.

    Given an RNG and a bandwidth, each stage also injects its own thermal
    noise (kTB(F-1)G at the stage output), which makes a simulated chain
    reproduce the Friis cascade noise figure when driven at the kTB floor.
    """
    y = np.asarray(x, dtype=np.complex128)
    for stage in chain.stages:
        y = amplifier_transfer(y, stage)
        if rng is not None and bandwidth_hz is not None:
            var = stage_added_noise_watts(stage, bandwidth_hz)
            if var > 0.0:
                sigma = math.sqrt(var / 2.0)
                y = y + sigma * (rng.standard_normal(y.shape)
                                 + 1j * rng.standard_normal(y.shape))
    return y
