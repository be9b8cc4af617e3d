"""Flat ``key = value`` experiment configuration files.

Lines are ``key = value`` with ``#`` comments. Lists are comma separated.
A measurement entry is either a total budget (``300``, split automatically)
or an explicit ``M_BSxM_MS`` pair (``24x13``).
"""
from __future__ import annotations

import configparser
import math
from dataclasses import replace
from pathlib import Path
from typing import Any, Mapping, Optional

from .channel import AngleModel, ChannelConfig, GainModel, LinkBudget, dbm_to_watts
from .geometry import ArrayGeometry
from .sim import (
    CoherenceSweep,
    ExperimentConfig,
    MeasurementPoint,
    MeasurementSweep,
    RateMode,
    TrainingKind,
    measurement_point,
)
from .training import TrainingConfig

DEFAULT_MEASUREMENTS = "16,32,64,96,128,140,160,200,240,280,300,330,400,512,1024,2048"
DEFAULT_COHERENCE_LENGTHS = "600,1000,2000,5000,50000"
DEFAULT_COHERENCE_MEASUREMENTS = "32,48,64,80,96,128,160,200,240,300,400,512"


class ConfigError(ValueError):
    pass


DEFAULTS: dict[str, str] = {
    "n_bs": "64",
    "n_ms": "32",
    "n_users": "4",
    "rf_chains": "",
    "carrier_frequency_hz": "28e9",
    "bandwidth_hz": "50e6",
    "distance_m": "500",
    "tx_power_dbm": "37",
    "noise_figure_db": "0",
    "gain_model": GainModel.CONSTANT_LOS.value,
    "angle_model": AngleModel.ON_GRID.value,
    "m_total": "300",
    "m_bs": "",
    "m_ms": "",
    "nq_bs": "4",
    "nq_ms": "4",
    "training_power_dbm": "",
    "normalize_columns": "true",
    "training_kind": TrainingKind.RANDOM.value,
    "noiseless_training": "false",
    "shared_noise": "false",
    "requantize_precoder": "false",
    "sparsity": "1",
    "n_trials": "1000",
    "master_seed": "0",
    "rate_mode": RateMode.SINR.value,
    "sweep": "measurements",
    "measurements": DEFAULT_MEASUREMENTS,
    "coherence_lengths": DEFAULT_COHERENCE_LENGTHS,
    "coherence_measurements": DEFAULT_COHERENCE_MEASUREMENTS,
    "epsilon": "0.05",
}

_BOOLEANS = {"true": True, "yes": True, "on": True, "1": True, "false": False, "no": False, "off": False, "0": False}


def read_flat(path) -> dict[str, str]:
    """Parse a config file into raw string values."""
    text = Path(path).read_text(encoding="utf-8")
    parser = configparser.ConfigParser(comment_prefixes=("#",), inline_comment_prefixes=("#",), delimiters=("=",))
    try:
        parser.read_string("[experiment]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return dict(parser["experiment"])


def _int(raw: dict, key: str) -> int:
    try:
        return int(raw[key], 0)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {raw[key]!r}") from None


def _float(raw: dict, key: str) -> float:
    try:
        return float(raw[key])
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {raw[key]!r}") from None


def _bool(raw: dict, key: str) -> bool:
    try:
        return _BOOLEANS[raw[key].strip().lower()]
    except KeyError:
        raise ConfigError(f"{key}: expected a boolean, got {raw[key]!r}") from None


def _enum(raw: dict, key: str, kind):
    try:
        return kind(raw[key].strip().lower())
    except ValueError:
        choices = ", ".join(k.value for k in kind)
        raise ConfigError(f"{key}: expected one of {choices}, got {raw[key]!r}") from None


def parse_points(text: str, n_bs: int, n_ms: int) -> tuple[MeasurementPoint, ...]:
    points = []
    for item in text.split(","):
        item = item.strip().lower()
        if not item:
            continue
        try:
            if "x" in item:
                m_bs, m_ms = (int(v) for v in item.split("x"))
                if m_bs < 1 or m_ms < 1:
                    raise ValueError
                points.append(MeasurementPoint(m_bs * m_ms, m_bs, m_ms))
            else:
                points.append(measurement_point(int(item), n_bs, n_ms))
        except ValueError:
            raise ConfigError(f"bad measurement entry {item!r}") from None
    if not points:
        raise ConfigError("empty measurement list")
    return tuple(points)


def build_config(values: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
    """Build an ExperimentConfig from flat values layered over ``DEFAULTS``."""
    raw = dict(DEFAULTS)
    for key, value in (values or {}).items():
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        raw[key] = str(value)

    try:
        n_bs, n_ms = _int(raw, "n_bs"), _int(raw, "n_ms")
        link = LinkBudget(
            carrier_frequency_hz=_float(raw, "carrier_frequency_hz"),
            bandwidth_hz=_float(raw, "bandwidth_hz"),
            distance_m=_float(raw, "distance_m"),
            tx_power_dbm=_float(raw, "tx_power_dbm"),
            noise_figure_db=_float(raw, "noise_figure_db"),
        )
        channel = ChannelConfig(
            bs_geometry=ArrayGeometry(n_bs),
            ms_geometry=ArrayGeometry(n_ms),
            n_users=_int(raw, "n_users"),
            link=link,
            gain_model=_enum(raw, "gain_model", GainModel),
            angle_model=_enum(raw, "angle_model", AngleModel),
            rf_chains=_int(raw, "rf_chains") if raw["rf_chains"] else None,
        )

        kind = _enum(raw, "training_kind", TrainingKind)
        if raw["m_bs"] or raw["m_ms"]:
            if not (raw["m_bs"] and raw["m_ms"]):
                raise ConfigError("m_bs and m_ms must be given together")
            m_bs, m_ms = _int(raw, "m_bs"), _int(raw, "m_ms")
        elif kind is TrainingKind.EXHAUSTIVE:
            m_bs, m_ms = n_bs, n_ms
        else:
            pt = measurement_point(_int(raw, "m_total"), n_bs, n_ms)
            m_bs, m_ms = pt.m_bs, pt.m_ms
        p_train = dbm_to_watts(_float(raw, "training_power_dbm")) if raw["training_power_dbm"] else link.tx_power_w
        training = TrainingConfig(
            m_bs, m_ms, _int(raw, "nq_bs"), _int(raw, "nq_ms"), p_train, _bool(raw, "normalize_columns")
        )

        sweep_kind = raw["sweep"].strip().lower()
        if sweep_kind == "measurements":
            sweep = MeasurementSweep(parse_points(raw["measurements"], n_bs, n_ms))
        elif sweep_kind == "coherence":
            lengths = tuple(float(v) for v in raw["coherence_lengths"].split(",") if v.strip())
            if not lengths or any(not lc > 0 for lc in lengths):
                raise ConfigError("coherence_lengths must be positive")
            epsilon = _float(raw, "epsilon")
            if not 0 < epsilon < 1:
                raise ConfigError(f"epsilon must lie in (0, 1), got {epsilon}")
            sweep = CoherenceSweep(lengths, parse_points(raw["coherence_measurements"], n_bs, n_ms), epsilon)
        else:
            raise ConfigError(f"sweep: expected 'measurements' or 'coherence', got {raw['sweep']!r}")

        if kind is TrainingKind.EXHAUSTIVE:
            sweep = replace(sweep, points=(MeasurementPoint(n_bs * n_ms, n_bs, n_ms),))

        return ExperimentConfig(
            channel=channel,
            training=training,
            n_trials=_int(raw, "n_trials"),
            master_seed=_int(raw, "master_seed"),
            rate_mode=_enum(raw, "rate_mode", RateMode),
            sweep=sweep,
            training_kind=kind,
            noiseless_training=_bool(raw, "noiseless_training"),
            shared_noise=_bool(raw, "shared_noise"),
            requantize_precoder=_bool(raw, "requantize_precoder"),
            sparsity=_int(raw, "sparsity"),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path=None, overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
    values = read_flat(path) if path is not None else {}
    values.update(overrides or {})
    return build_config(values)


def _points_text(points, n_bs: int, n_ms: int) -> str:
    return ",".join(
        str(p.requested) if p == measurement_point(p.requested, n_bs, n_ms) else f"{p.m_bs}x{p.m_ms}"
        for p in points
    )


def to_flat(config: ExperimentConfig) -> dict[str, str]:
    """Echo a config as flat strings; ``build_config(to_flat(c))`` rebuilds ``c``."""
    ch, tr, link = config.channel, config.training, config.channel.link
    flat = {
        "n_bs": str(ch.bs_geometry.n_antennas),
        "n_ms": str(ch.ms_geometry.n_antennas),
        "n_users": str(ch.n_users),
        "rf_chains": "" if ch.rf_chains is None else str(ch.rf_chains),
        "carrier_frequency_hz": repr(link.carrier_frequency_hz),
        "bandwidth_hz": repr(link.bandwidth_hz),
        "distance_m": repr(link.distance_m),
        "tx_power_dbm": repr(link.tx_power_dbm),
        "noise_figure_db": repr(link.noise_figure_db),
        "gain_model": ch.gain_model.value,
        "angle_model": ch.angle_model.value,
        "m_bs": str(tr.m_bs),
        "m_ms": str(tr.m_ms),
        "nq_bs": str(tr.nq_bs),
        "nq_ms": str(tr.nq_ms),
        "training_power_dbm": repr(10.0 * math.log10(tr.training_power_w * 1e3)),
        "normalize_columns": str(tr.normalize_columns).lower(),
        "training_kind": config.training_kind.value,
        "noiseless_training": str(config.noiseless_training).lower(),
        "shared_noise": str(config.shared_noise).lower(),
        "requantize_precoder": str(config.requantize_precoder).lower(),
        "sparsity": str(config.sparsity),
        "n_trials": str(config.n_trials),
        "master_seed": str(config.master_seed),
        "rate_mode": config.rate_mode.value,
    }
    if isinstance(config.sweep, MeasurementSweep):
        flat["sweep"] = "measurements"
        flat["measurements"] = _points_text(config.sweep.points, ch.bs_geometry.n_antennas, ch.ms_geometry.n_antennas)
    elif isinstance(config.sweep, CoherenceSweep):
        flat["sweep"] = "coherence"
        flat["coherence_lengths"] = ",".join(repr(lc) for lc in config.sweep.coherence_lengths)
        flat["coherence_measurements"] = _points_text(config.sweep.points, ch.bs_geometry.n_antennas, ch.ms_geometry.n_antennas)
        flat["epsilon"] = repr(config.sweep.epsilon)
    return flat
