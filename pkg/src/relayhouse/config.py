"""
relayhouse.config - Daemon configuration file loading.

The config is a small JSON object; the house section may be inline or a
path to a separate house file.  Input paths (house, scenario) resolve
relative to the config file's directory; the log path is an output and
resolves against the working directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

from .house import ConfigError, HouseConfig, house_from_dict, load_house, validate_config

_ALLOWED_KEYS = {"house", "backend", "scenario", "arm_on_start", "bind", "log_path"}

DEFAULT_BIND = "127.0.0.1:8123"


@dataclass(frozen=True)
class DaemonConfig:
    house: HouseConfig
    backend: str = "sim"
    scenario: Optional[Path] = None
    arm_on_start: bool = True
    bind: str = DEFAULT_BIND
    log_path: Optional[Path] = None


def parse_bind(bind: str) -> Tuple[str, int]:
    host, sep, port = bind.rpartition(":")
    if not sep or not host:
        raise ConfigError(f"bind must look like host:port, got {bind!r}")
    try:
        port_num = int(port)
    except ValueError as exc:
        raise ConfigError(f"bind port must be an integer, got {port!r}") from exc
    if not 0 <= port_num <= 65535:
        raise ConfigError(f"bind port out of range: {port_num}")
    return host, port_num


def daemon_config_from_dict(obj: dict, base_dir: Path) -> DaemonConfig:
    if not isinstance(obj, dict):
        raise ConfigError("daemon config must be a JSON object")
    unknown = set(obj) - _ALLOWED_KEYS
    if unknown:
        raise ConfigError(f"unknown keys in daemon config: {sorted(unknown)}")
    if "house" not in obj:
        raise ConfigError("daemon config needs a house section")

    house_spec = obj["house"]
    if isinstance(house_spec, str):
        house = load_house(base_dir / house_spec)
    else:
        house = house_from_dict(house_spec)
    violations = validate_config(house)
    if violations:
        raise ConfigError("invalid house config: " + "; ".join(violations))

    backend = obj.get("backend", "sim")
    if backend != "sim":
        raise ConfigError(f"unsupported backend {backend!r} (only 'sim' is available)")

    bind = obj.get("bind", DEFAULT_BIND)
    parse_bind(bind)

    scenario = obj.get("scenario")
    log_path = obj.get("log_path")
    return DaemonConfig(
        house=house,
        backend=backend,
        scenario=(base_dir / scenario) if scenario else None,
        arm_on_start=bool(obj.get("arm_on_start", True)),
        bind=bind,
        log_path=Path(log_path) if log_path else None,
    )


def load_daemon_config(path: str | Path) -> DaemonConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return daemon_config_from_dict(obj, path.resolve().parent)
