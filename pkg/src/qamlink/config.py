"""Flat ``key = value`` run-configuration files.

Unknown keys, malformed lines, and bad values all raise ConfigError with the
offending file and line number; a file either parses completely or not at all.
Missing keys fall back to the reference design shipped in ``paper.cfg``
(1 Gbps, 256-QAM, 5 GHz, 23.31 dBm).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .channel import ChannelSpec
from .linkbudget import FCC_UNII_LIMIT_DBM, LinkScenario
from .rfchain import ChainSpec, StageSpec
from .simulate import PULSE_SHAPES, SimConfig

OUTPUT_FORMATS = ("text", "csv", "both")


class ConfigError(ValueError):
    """Unparsable or inconsistent run configuration."""


def default_tx_stages() -> list[StageSpec]:
    """Transmit chain of the reference design (baseband side first)."""
    return [
        # quadrature modulator; NF derived from its -160 dBm/Hz output floor
        StageSpec("ADL5375 modulator", gain_db=0.0, nf_db=14.2),
        StageSpec.passive("TX bandpass filter", loss_db=3.0),
        # power amplifier; datasheet is silent on NF, 5 dB is typical
        StageSpec("SE5003L1 PA", gain_db=32.0, nf_db=5.0,
                  p1db_out_dbm=32.0, oip3_dbm=42.6),
    ]


def default_rx_stages() -> list[StageSpec]:
    """Receive chain of the reference design (antenna side first)."""
    return [
        StageSpec.passive("RX bandpass filter", loss_db=3.0),
        StageSpec("SKY65981 LNA", gain_db=13.0, nf_db=1.5,
                  p1db_out_dbm=0.0, oip3_dbm=7.0),
        StageSpec("ADL5380 demodulator", gain_db=7.0, nf_db=10.9),
    ]


@dataclass
class RunConfig:
    """Union of scenario, chain, simulation, and output settings."""

    source: str = "<defaults>"
    bit_rate_bps: float = 1e9
    modulation_order: int = 256
    target_ber: float = 1e-5
    ebn0_override_db: float | None = 23.39
    rx_nf_override_db: float | None = 6.24
    tx_power_dbm: float = 23.31
    frequency_hz: float = 5e9
    distance_m: float = 1.79
    tx_antenna_gain_db: float = 0.0
    rx_antenna_gain_db: float = 0.0
    noise_temperature_k: float = 290.0
    occupied_bandwidth_hz: float | None = None
    fcc_limit_dbm: float = FCC_UNII_LIMIT_DBM
    tx_stages: list[StageSpec] = field(default_factory=default_tx_stages)
    rx_stages: list[StageSpec] = field(default_factory=default_rx_stages)
    samples_per_symbol: int = 8
    pulse_shape: str = "gaussian"
    gaussian_bt: float = 0.5
    n_bits: int = 1_000_000
    seed: int = 1
    pa_backoff_db: float = 8.69
    evm_threshold_pct: float = 2.0
    output_dir: str = "."
    output_format: str = "both"

    def channel(self) -> ChannelSpec:
        return ChannelSpec(
            frequency_hz=self.frequency_hz,
            distance_m=self.distance_m,
            tx_antenna_gain_db=self.tx_antenna_gain_db,
            rx_antenna_gain_db=self.rx_antenna_gain_db,
            noise_temperature_k=self.noise_temperature_k,
        )

    def scenario(self) -> LinkScenario:
        try:
            return LinkScenario(
                bit_rate_bps=self.bit_rate_bps,
                modulation_order=self.modulation_order,
                target_ber=self.target_ber,
                tx_power_dbm=self.tx_power_dbm,
                channel=self.channel(),
                rx_chain=ChainSpec(tuple(self.rx_stages)),
                ebn0_override_db=self.ebn0_override_db,
                rx_nf_override_db=self.rx_nf_override_db,
                occupied_bandwidth_hz=self.occupied_bandwidth_hz,
                fcc_limit_dbm=self.fcc_limit_dbm,
            )
        except ValueError as exc:
            raise ConfigError(f"{self.source}: {exc}") from exc

    def sim_config(self, *, n_bits: int | None = None, seed: int | None = None,
                   calibration_ebn0_db: float | None = None,
                   noise_enabled: bool = True,
                   pa_linear: bool = False) -> SimConfig:
        try:
            return SimConfig(
                scenario=self.scenario(),
                tx_chain=ChainSpec(tuple(self.tx_stages)),
                n_bits=self.n_bits if n_bits is None else n_bits,
                seed=self.seed if seed is None else seed,
                samples_per_symbol=self.samples_per_symbol,
                pulse_shape=self.pulse_shape,
                gaussian_bt=self.gaussian_bt,
                pa_backoff_db=self.pa_backoff_db,
                noise_enabled=noise_enabled,
                pa_linear=pa_linear,
                calibration_ebn0_db=calibration_ebn0_db,
                evm_threshold_pct=self.evm_threshold_pct,
            )
        except ValueError as exc:
            raise ConfigError(f"{self.source}: {exc}") from exc


_FLOAT_KEYS = {
    "bit_rate_bps", "target_ber", "ebn0_override_db", "rx_nf_override_db",
    "tx_power_dbm", "frequency_hz", "distance_m", "tx_antenna_gain_db",
    "rx_antenna_gain_db", "noise_temperature_k", "occupied_bandwidth_hz",
    "fcc_limit_dbm", "gaussian_bt", "pa_backoff_db", "evm_threshold_pct",
}
_INT_KEYS = {"modulation_order", "samples_per_symbol", "n_bits", "seed"}
_STR_KEYS = {"pulse_shape", "output_dir", "output_format"}

_STAGE_FIELDS = ("name", "gain_db", "nf_db", "p1db_out_dbm", "oip3_dbm")
_CHAIN_KEY = re.compile(r"^(tx|rx)_chain\.(\d+)\.(\w+)$")


def _parse_float(raw: str, where: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{where}: expected a number, got {raw!r}") from None


def _parse_int(raw: str, where: str) -> int:
    try:
        return int(raw)
    except ValueError:
        pass
    value = _parse_float(raw, where)
    if not value.is_integer():
        raise ConfigError(f"{where}: expected an integer, got {raw!r}")
    return int(value)


def parse_config_text(text: str, source: str = "<string>") -> RunConfig:
    entries: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not sep or not key or not value:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        if key in entries:
            raise ConfigError(
                f"{source}:{lineno}: duplicate key {key!r} "
                f"(first set on line {entries[key][1]})")
        entries[key] = (value, lineno)

    cfg = RunConfig(source=source)
    chain_fields: dict[str, dict[int, dict[str, tuple[str, int]]]] = {
        "tx": {}, "rx": {}}

    for key, (value, lineno) in entries.items():
        where = f"{source}:{lineno}"
        m = _CHAIN_KEY.match(key)
        if m:
            side, index, fieldname = m.group(1), int(m.group(2)), m.group(3)
            if fieldname not in _STAGE_FIELDS:
                raise ConfigError(
                    f"{where}: unknown stage field {fieldname!r}; "
                    f"expected one of {_STAGE_FIELDS}")
            chain_fields[side].setdefault(index, {})[fieldname] = (value, lineno)
        elif key in _FLOAT_KEYS:
            setattr(cfg, key, _parse_float(value, where))
        elif key in _INT_KEYS:
            setattr(cfg, key, _parse_int(value, where))
        elif key in _STR_KEYS:
            setattr(cfg, key, value)
        else:
            raise ConfigError(f"{where}: unknown key {key!r}")

    if cfg.pulse_shape not in PULSE_SHAPES:
        raise ConfigError(
            f"{source}: pulse_shape must be one of {PULSE_SHAPES}, "
            f"got {cfg.pulse_shape!r}")
    if cfg.output_format not in OUTPUT_FORMATS:
        raise ConfigError(
            f"{source}: output_format must be one of {OUTPUT_FORMATS}, "
            f"got {cfg.output_format!r}")

    for side, per_index in chain_fields.items():
        if not per_index:
            continue  # keep the default chain
        stages = []
        for index in sorted(per_index):
            fields = per_index[index]
            for required in ("gain_db", "nf_db"):
                if required not in fields:
                    raise ConfigError(
                        f"{source}: {side}_chain.{index} is missing {required}")
            name = fields.get("name", (f"{side}_stage_{index}", 0))[0]
            numbers = {}
            for key in ("gain_db", "nf_db", "p1db_out_dbm", "oip3_dbm"):
                if key in fields:
                    value, lineno = fields[key]
                    numbers[key] = _parse_float(value, f"{source}:{lineno}")
            try:
                stages.append(StageSpec(name=name, **numbers))
            except ValueError as exc:
                raise ConfigError(f"{source}: {side}_chain.{index}: {exc}") from exc
        setattr(cfg, f"{side}_stages", stages)
    return cfg


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from exc
    return parse_config_text(text, source=path)
