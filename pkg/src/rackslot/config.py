"""Run configuration: INI files, defaults, overrides, validation.

A run is described by an INI file with sections [run], [topology],
[scheduler], [switch], [delays], [rds], and [scenario].  Every key has a
default, so an empty file is a valid (if dull) run.  Command-line
overrides use ``section.key=value`` strings.  Unknown sections or keys
are errors; a handful of legal-but-risky combinations produce warnings
instead.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass

from .baselines import RdsParams
from .delays import DelayModel
from .host import SchedulerParams
from .workload import Scenario, WorkloadError, parse_size_dist


class ConfigError(ValueError):
    """A configuration file or override was invalid."""


PROTOCOLS = ("pl2", "raw", "rds")
FORMATS = ("json", "csv", "both")

DEFAULTS = {
    "run": {
        "label": "run",
        "protocol": "pl2",
        "seed": "1",
        "out_dir": "runs",
        "format": "json",
        "collect_packet_latency": "false",
        "debug_audit": "false",
        "timeseries": "false",
    },
    "topology": {
        "rate_gbps": "100",
        "mtu_bytes": "1500",
        "control_bytes": "64",
    },
    "scheduler": {
        "burst_packets": "4",
        "low_load_slots": "15",
        "recency_window_ns": "",
        "pipeline": "false",
        "per_destination": "false",
    },
    "switch": {
        "unsolicited_threshold": "60",
        "port_capacity_bytes": "1500000",
        "shared_capacity_bytes": "2000000",
    },
    "delays": {
        "exchange_min_ns": "1000",
        "exchange_median_ns": "1060",
        "exchange_max_ns": "14000",
        "exchange_sigma": "2.0",
        "exchange_constant_ns": "",
        "switching_ns": "347",
        "switching_jitter": "false",
        "switching_min_ns": "346",
        "switching_max_ns": "508",
        "nic_fixed_ns": "100",
        "propagation_ns": "50",
    },
    "rds": {
        "blind_bytes": "62464",
        "grant_window": "4",
        "timeout_ns": "1000000",
    },
    "scenario": {
        "pattern": "incast",
        "width": "5",
        "servers": "0",
        "threads": "11",
        "arrival": "poisson",
        "load_gbps": "18",
        "size_dist": "fixed:62464",
        "duration_ns": "1000000000",
        "request_bytes": "0",
        "response_bytes": "0",
        "script": "",
    },
}


@dataclass(frozen=True)
class RunConfig:
    label: str
    protocol: str
    seed: int
    out_dir: str
    out_format: str
    collect_packet_latency: bool
    debug_audit: bool
    timeseries: bool
    rate_bps: int
    mtu: int
    ctrl_bytes: int
    scheduler: SchedulerParams
    unsolicited_threshold: int
    port_capacity_bytes: int
    shared_capacity_bytes: int
    delays: DelayModel
    rds: RdsParams
    scenario: Scenario


def _fresh_parser() -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    parser.read_dict(DEFAULTS)
    return parser


def _check_known(parser) -> None:
    for section in parser.sections():
        if section not in DEFAULTS:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser[section]:
            if key not in DEFAULTS[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")


def apply_overrides(parser, overrides) -> None:
    for text in overrides:
        key, eq, value = text.partition("=")
        section, dot, name = key.strip().partition(".")
        if not eq or not dot or not section or not name:
            raise ConfigError(
                f"override {text!r} is not of the form section.key=value")
        if section not in DEFAULTS:
            raise ConfigError(f"override names unknown section [{section}]")
        if name not in DEFAULTS[section]:
            raise ConfigError(
                f"override names unknown key {name!r} in section [{section}]")
        parser[section][name] = value.strip()


def _get_int(parser, section, key, minimum=None):
    raw = parser[section][key]
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: not an integer: {raw!r}") from None
    if minimum is not None and value < minimum:
        raise ConfigError(f"[{section}] {key}: must be >= {minimum}, got {value}")
    return value


def _get_opt_int(parser, section, key, minimum=None):
    if not parser[section][key].strip():
        return None
    return _get_int(parser, section, key, minimum)


def _get_float(parser, section, key, minimum=None):
    raw = parser[section][key]
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: not a number: {raw!r}") from None
    if minimum is not None and value < minimum:
        raise ConfigError(f"[{section}] {key}: must be >= {minimum}, got {value}")
    return value


def _get_bool(parser, section, key):
    try:
        return parser.getboolean(section, key)
    except ValueError:
        raw = parser[section][key]
        raise ConfigError(f"[{section}] {key}: not a boolean: {raw!r}") from None


def _get_choice(parser, section, key, choices):
    value = parser[section][key].strip().lower()
    if value not in choices:
        raise ConfigError(
            f"[{section}] {key}: expected one of {', '.join(choices)}, "
            f"got {value!r}")
    return value


def _parse_script(text):
    entries = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = [p.strip() for p in chunk.split(",")]
        if len(parts) not in (4, 5):
            raise ConfigError(
                f"script entry {chunk!r}: expected "
                "time_ns,src,dst,size[,thread]")
        try:
            entries.append(tuple(int(p) for p in parts))
        except ValueError:
            raise ConfigError(f"script entry {chunk!r}: malformed integer") from None
    return tuple(entries)


def build_config(parser) -> RunConfig:
    _check_known(parser)

    protocol = _get_choice(parser, "run", "protocol", PROTOCOLS)
    out_format = _get_choice(parser, "run", "format", FORMATS)

    rate_gbps = _get_float(parser, "topology", "rate_gbps")
    if rate_gbps <= 0:
        raise ConfigError("[topology] rate_gbps: must be positive")
    rate_bps = round(rate_gbps * 1e9)
    mtu = _get_int(parser, "topology", "mtu_bytes", minimum=1)
    ctrl_bytes = _get_int(parser, "topology", "control_bytes", minimum=1)

    try:
        scheduler = SchedulerParams(
            k_max=_get_int(parser, "scheduler", "burst_packets"),
            low_load_slots=_get_int(parser, "scheduler", "low_load_slots"),
            recency_window_ns=_get_opt_int(parser, "scheduler",
                                           "recency_window_ns"),
            pipeline_segments=_get_bool(parser, "scheduler", "pipeline"),
            per_destination_flows=_get_bool(parser, "scheduler",
                                            "per_destination"),
        )
        delays = DelayModel(
            exchange_min_ns=_get_int(parser, "delays", "exchange_min_ns"),
            exchange_median_ns=_get_int(parser, "delays", "exchange_median_ns"),
            exchange_max_ns=_get_int(parser, "delays", "exchange_max_ns"),
            exchange_sigma=_get_float(parser, "delays", "exchange_sigma"),
            exchange_constant_ns=_get_opt_int(parser, "delays",
                                              "exchange_constant_ns"),
            switching_ns=_get_int(parser, "delays", "switching_ns"),
            switching_jitter=_get_bool(parser, "delays", "switching_jitter"),
            switching_min_ns=_get_int(parser, "delays", "switching_min_ns"),
            switching_max_ns=_get_int(parser, "delays", "switching_max_ns"),
            nic_fixed_ns=_get_int(parser, "delays", "nic_fixed_ns"),
            propagation_ns=_get_int(parser, "delays", "propagation_ns"),
        )
        rds = RdsParams(
            blind_bytes=_get_int(parser, "rds", "blind_bytes"),
            grant_window=_get_int(parser, "rds", "grant_window"),
            timeout_ns=_get_int(parser, "rds", "timeout_ns"),
        )
        scenario = Scenario(
            pattern=parser["scenario"]["pattern"].strip().lower(),
            width=_get_int(parser, "scenario", "width"),
            servers=_get_int(parser, "scenario", "servers"),
            threads=_get_int(parser, "scenario", "threads"),
            arrival=parser["scenario"]["arrival"].strip().lower(),
            load_bps=_get_float(parser, "scenario", "load_gbps") * 1e9,
            size_spec=parser["scenario"]["size_dist"].strip(),
            duration_ns=_get_int(parser, "scenario", "duration_ns"),
            request_bytes=_get_int(parser, "scenario", "request_bytes"),
            response_bytes=_get_int(parser, "scenario", "response_bytes"),
            script=_parse_script(parser["scenario"]["script"]),
        )
        parse_size_dist(scenario.size_spec)  # fail at load time, not mid-run
    except ConfigError:
        raise
    except (ValueError, WorkloadError) as exc:
        raise ConfigError(str(exc)) from None

    threshold = _get_int(parser, "switch", "unsolicited_threshold", minimum=1)
    if scheduler.low_load_slots >= threshold:
        raise ConfigError(
            "scheduler low_load_slots must stay below the switch "
            "unsolicited_threshold, otherwise every admission gate is open")
    port_cap = _get_int(parser, "switch", "port_capacity_bytes", minimum=mtu)
    shared_cap = _get_int(parser, "switch", "shared_capacity_bytes",
                          minimum=mtu)

    return RunConfig(
        label=parser["run"]["label"].strip() or "run",
        protocol=protocol,
        seed=_get_int(parser, "run", "seed", minimum=0),
        out_dir=parser["run"]["out_dir"].strip(),
        out_format=out_format,
        collect_packet_latency=_get_bool(parser, "run",
                                         "collect_packet_latency"),
        debug_audit=_get_bool(parser, "run", "debug_audit"),
        timeseries=_get_bool(parser, "run", "timeseries"),
        rate_bps=rate_bps,
        mtu=mtu,
        ctrl_bytes=ctrl_bytes,
        scheduler=scheduler,
        unsolicited_threshold=threshold,
        port_capacity_bytes=port_cap,
        shared_capacity_bytes=shared_cap,
        delays=delays,
        rds=rds,
        scenario=scenario,
    )


def load_config(path=None, overrides=(), extra=None) -> RunConfig:
    """Build a RunConfig from defaults, an optional preset dict, an
    optional INI file, and override strings, in that order."""
    parser = _fresh_parser()
    if extra:
        try:
            parser.read_dict(extra)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad preset data: {exc}") from None
    if path is not None:
        read = parser.read(path)
        if not read:
            raise ConfigError(f"config file not found: {path}")
    apply_overrides(parser, overrides)
    return build_config(parser)


def config_warnings(cfg: RunConfig) -> list[str]:
    """Legal configurations that deserve a second look."""
    warnings = []
    if cfg.unsolicited_threshold < 4 * cfg.scheduler.low_load_slots:
        warnings.append(
            "switch unsolicited_threshold is below four times the "
            "scheduler's low_load_slots gate; bursts sent without waiting "
            "may be dropped at the switch under load")
    scenario = cfg.scenario
    if cfg.protocol == "rds" and cfg.rds.blind_bytes < cfg.mtu:
        warnings.append(
            "rds blind window is below one MTU; every message starts "
            "with a single runt packet")
    if (scenario.pattern in ("incast", "outcast", "shuffle")
            and scenario.arrival != "backlogged"
            and scenario.load_bps > cfg.rate_bps):
        warnings.append(
            "per-host offered load exceeds the link rate; open-loop "
            "queues will grow without bound")
    return warnings
