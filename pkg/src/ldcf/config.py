"""Flat ``key = value`` run configuration with section prefixes.

A config file collects every tunable of a run under dotted keys, e.g.::

    channels.shrink = 2
    filters.k = 4
    boost.num_trees = 2048
    detect.stride = 4
    train.jitter = 2
    seed = 7

Values are coerced by the type of each dataclass field's default;
command-line flags override file values, which override the dataclass
defaults.  Unknown keys are rejected so typos fail loudly before any
work starts.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import ConfigError, MalformedLine
from .boost import BoostConfig
from .channels import ChannelConfig
from .detect import DetectorConfig
from .filterbank import FilterBankConfig


@dataclass(frozen=True)
class TrainConfig:
    """Detector-training orchestration knobs.

    ``jitter`` adds shifted copies of every positive crop (the four
    axis shifts of that many pixels), which keeps the detector and the
    cascade calibration tolerant to stride misalignment;
    ``context_pad`` is how many window-scale pixels of surrounding
    image each positive crop carries so its border cells see real
    context instead of replicated edges.
    """

    jitter: int = 2
    context_pad: int = 8
    initial_negatives_per_image: int = 5

    def __post_init__(self):
        if self.jitter < 0 or self.context_pad < 0:
            raise ConfigError("jitter and context_pad must be non-negative")
        if self.initial_negatives_per_image < 1:
            raise ConfigError("need at least one initial negative per image")


@dataclass(frozen=True)
class RunConfig:
    channels: ChannelConfig = ChannelConfig()
    filters: FilterBankConfig = FilterBankConfig()
    boost: BoostConfig = BoostConfig()
    detect: DetectorConfig = DetectorConfig()
    train: TrainConfig = TrainConfig()
    seed: int = 0


_SECTIONS = {
    "channels": ChannelConfig,
    "filters": FilterBankConfig,
    "boost": BoostConfig,
    "detect": DetectorConfig,
    "train": TrainConfig,
}

# fields whose default is None and so carry no type to coerce by
_NONE_FIELD_TYPES = {"min_scale": float, "leaf_smoothing": float}

_LINE = re.compile(r"^([A-Za-z_][\w.]*)\s*=\s*(.*)$")


def parse_kv_text(text: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines; blank lines and # comments skipped."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        m = _LINE.match(stripped)
        if not m:
            raise MalformedLine(f"{source}:{lineno}: expected 'key = value'")
        out[m.group(1)] = m.group(2).strip()
    return out


def coerce_value(raw: str, default, name: str):
    """Interpret a raw string by the type of the field's default."""
    if default is None:
        if raw.lower() in ("none", ""):
            return None
        default = _NONE_FIELD_TYPES.get(name, str)()
    if raw.lower() in ("none",) and name in _NONE_FIELD_TYPES:
        return None
    try:
        if isinstance(default, bool):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if isinstance(default, int):
            if raw.lower() == "inf":
                return math.inf
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            parts = [t for t in re.split(r"[,\s]+", raw) if t]
            return tuple(int(t) for t in parts)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {exc}") from exc
    return raw


def _apply(cfg, section: str, kv: dict):
    """Replace dataclass fields from dotted keys of one section."""
    by_name = {f.name: f for f in fields(cfg)}
    updates = {}
    for key, raw in kv.items():
        if not key.startswith(section + "."):
            continue
        name = key[len(section) + 1 :]
        if name not in by_name:
            raise ConfigError(f"unknown key {key!r}")
        updates[name] = (
            raw if not isinstance(raw, str)
            else coerce_value(raw, getattr(cfg, name), name)
        )
    return replace(cfg, **updates) if updates else cfg


def load_run_config(path=None, overrides: dict | None = None) -> RunConfig:
    """File values (if any) then overrides, on top of the defaults.

    ``overrides`` uses the same dotted keys; values may be raw strings
    or already-typed Python values.
    """
    kv: dict = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        kv.update(parse_kv_text(p.read_text(), str(p)))
    kv.update(overrides or {})

    known = set()
    run = RunConfig()
    for section, _ in _SECTIONS.items():
        cfg = _apply(getattr(run, section), section, kv)
        run = replace(run, **{section: cfg})
        known.update(k for k in kv if k.startswith(section + "."))
    seed = run.seed
    if "seed" in kv:
        raw = kv["seed"]
        if isinstance(raw, str):
            try:
                raw = int(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for seed: {exc}") from exc
        seed = raw
        known.add("seed")
    unknown = sorted(set(kv) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    run = replace(run, seed=seed)
    validate_cross(run)
    return run


def validate_cross(run: RunConfig) -> None:
    """Cross-section constraints checked before any work starts."""
    total_shrink = run.channels.shrink * (2 if run.detect.filter_downsample else 1)
    if (
        run.detect.window_height % total_shrink
        or run.detect.window_width % total_shrink
    ):
        raise ConfigError(
            f"window {run.detect.window_height}x{run.detect.window_width} "
            f"not divisible by total shrink {total_shrink}"
        )
    if run.filters.k > run.filters.m * run.filters.m:
        raise ConfigError(
            f"k={run.filters.k} exceeds m*m={run.filters.m * run.filters.m}"
        )
    if run.boost.split_policy != "orthogonal" and run.boost.m < 1:
        raise ConfigError("oblique patch side must be positive")
