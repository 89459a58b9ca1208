"""Run configuration: one JSON document mirroring the configuration dataclasses.

Non-finite values use Python's JSON extensions (``Infinity``, ``-Infinity``);
the strings ``"inf"`` and ``"-inf"`` are accepted as well. Device and channel
seeds left out (or ``null``) are derived from ``master_seed``.
"""

from __future__ import annotations

import dataclasses
import json
import math
import re
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .channel import CrosstalkSpec
from .errors import ConfigError
from .fec_budget import FecSpec
from .mode_catalog import FiberSpec, LpMode, enumerate_group
from .mux_demux import MuxSpec
from .transceiver import CaptureSpec, TxSpec

# SeedSequence spawn keys under master_seed. Keys that depend on a channel
# use its group order, not its list position, so adding a channel never
# shifts another channel's random streams.
SEED_MUX = 0
SEED_CROSSTALK = 1
SEED_RECEIVER_NOISE = 2
SEED_OPTICAL_NOISE = 3
SEED_TRIGGER = 4

_JSON_NAMES = {"lambda_": "lambda"}


def derive_seed(master_seed: int, *key: int) -> int:
    ss = np.random.SeedSequence(master_seed, spawn_key=key)
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def stream(master_seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=key)


def default_ports(orders) -> tuple[LpMode, ...]:
    """First member of each group, except LP31a for group 6."""
    preferred = {6: LpMode(3, 1, "a")}
    return tuple(preferred.get(m, enumerate_group(m).members[0]) for m in orders)


@dataclass(frozen=True)
class RunConfig:
    fiber: FiberSpec = field(default_factory=FiberSpec)
    mux: MuxSpec = field(default_factory=MuxSpec)
    crosstalk: CrosstalkSpec = field(default_factory=CrosstalkSpec)
    tx: TxSpec = field(default_factory=TxSpec)
    capture: CaptureSpec = field(default_factory=CaptureSpec)
    fec: FecSpec = field(default_factory=FecSpec)
    channels: tuple[int, ...] = (3, 4, 5, 6)
    sequences: Optional[int] = None
    master_seed: int = 2014
    osnr_db: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        if len(set(self.channels)) != len(self.channels):
            raise ValueError("channels must be distinct")
        if any(c < 3 for c in self.channels):
            raise ValueError("channel mode-group orders must be >= 3")
        if len(self.mux.ports) != len(self.channels):
            raise ValueError("mux needs one port per channel")
        if [p.order for p in self.mux.ports] != list(self.channels):
            raise ValueError("mux port i must target a mode of channels[i]")
        if len(self.tx.port_delay_bits) < len(self.channels):
            raise ValueError("tx needs one port delay per channel")
        if self.sequences is not None and self.sequences < 1:
            raise ValueError("sequences must be >= 1")

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


# -- (de)serialisation -----------------------------------------------------

def _encode(value):
    if isinstance(value, LpMode):
        return value.label
    if isinstance(value, tuple):
        return [_encode(v) for v in value]
    return value


def _section_to_dict(obj) -> dict:
    return {
        _JSON_NAMES.get(f.name, f.name): _encode(getattr(obj, f.name))
        for f in dataclasses.fields(obj)
    }


def to_dict(config: RunConfig) -> dict:
    out = {}
    for f in dataclasses.fields(config):
        value = getattr(config, f.name)
        out[f.name] = _section_to_dict(value) if dataclasses.is_dataclass(value) else _encode(value)
    return out


def dumps(config: RunConfig) -> str:
    return json.dumps(to_dict(config), indent=2) + "\n"


def _number(value):
    if isinstance(value, str) and value.strip().lower() in ("inf", "+inf", "-inf", "infinity", "-infinity"):
        return float(value.replace("inity", ""))
    return value


def _line_of(text: Optional[str], *keys: str) -> Optional[int]:
    """Best-effort line number of ``keys`` (nested) in the JSON source."""
    if not text:
        return None
    pos = 0
    for key in keys:
        hit = text.find(f'"{key}"', pos)
        if hit < 0:
            return None
        pos = hit
    return text.count("\n", 0, pos) + 1


def _mentioned(message: str, keys) -> Optional[str]:
    hits = [k for k in keys if re.search(rf"\b{re.escape(k)}\b", message)]
    return max(hits, key=len) if hits else None


_SECTIONS = {
    "fiber": FiberSpec,
    "mux": MuxSpec,
    "crosstalk": CrosstalkSpec,
    "tx": TxSpec,
    "capture": CaptureSpec,
    "fec": FecSpec,
}


def _build_section(name, cls, data, text, master_seed):
    if not isinstance(data, dict):
        raise ConfigError(f"section {name!r} must be an object", _line_of(text, name))
    names = {_JSON_NAMES.get(f.name, f.name): f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in names:
            raise ConfigError(f"unknown field {name}.{key}", _line_of(text, name, key))
        kwargs[names[key]] = _number(value)
    if name == "mux":
        if "ports" in kwargs:
            try:
                kwargs["ports"] = tuple(LpMode.parse(p) for p in kwargs["ports"])
            except (ValueError, TypeError, AttributeError) as exc:
                raise ConfigError(f"mux.ports: {exc}", _line_of(text, name, "ports")) from None
        if kwargs.get("seed") is None:
            kwargs["seed"] = derive_seed(master_seed, SEED_MUX)
    if name == "crosstalk" and kwargs.get("seed") is None:
        kwargs["seed"] = derive_seed(master_seed, SEED_CROSSTALK)
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        bad = _mentioned(str(exc), data)
        line = _line_of(text, name, bad) if bad else _line_of(text, name)
        raise ConfigError(f"{name}: {exc}", line) from None


def from_dict(data: dict, text: Optional[str] = None) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("run config must be a JSON object", 1 if text else None)
    known = {f.name for f in dataclasses.fields(RunConfig)}
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown top-level field {key!r}", _line_of(text, key))
    master_seed = data.get("master_seed", RunConfig.master_seed)
    if not isinstance(master_seed, int):
        raise ConfigError("master_seed must be an integer", _line_of(text, "master_seed"))

    kwargs: dict[str, Any] = {"master_seed": master_seed}
    channels = data.get("channels", list(RunConfig.channels))
    for name, cls in _SECTIONS.items():
        section = data.get(name, {})
        if not isinstance(section, dict):
            raise ConfigError(f"section {name!r} must be an object", _line_of(text, name))
        section = dict(section)
        if name == "mux" and "ports" not in section:
            try:
                section["ports"] = [p.label for p in default_ports(channels)]
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"channels: {exc}", _line_of(text, "channels")) from None
        kwargs[name] = _build_section(name, cls, section, text, master_seed)
    for key in ("channels", "sequences", "osnr_db"):
        if key in data:
            kwargs[key] = _number(data[key])
    try:
        return RunConfig(**kwargs)
    except (ValueError, TypeError) as exc:
        bad = _mentioned(str(exc), ("channels", "sequences", "mux", "tx"))
        raise ConfigError(str(exc), _line_of(text, bad) if bad else None) from None


def loads(text: str) -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", exc.lineno) from None
    return from_dict(data, text)


def load(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def default_config(**changes) -> RunConfig:
    """Defaults with seeds derived from ``master_seed`` like a loaded file."""
    return from_dict({}).replace(**changes) if changes else from_dict({})
