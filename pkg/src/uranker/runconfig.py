"""Flat key=value run configuration: file parsing, typed coercion onto the
recipe/config dataclasses, and resolved-snapshot writing. Unknown keys are
rejected."""

import dataclasses
import json
from pathlib import Path


class ConfigError(Exception):
    pass


def parse_kv_file(path):
    """Parse `key = value` lines; '#' starts a comment, blank lines ignored."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def parse_kv_pairs(pairs):
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _coerce(key, raw, current):
    try:
        if isinstance(current, bool):
            low = str(raw).strip().lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if isinstance(current, int):
            return int(raw)
        if isinstance(current, float):
            return float(raw)
        if isinstance(current, tuple):
            return tuple(int(v.strip()) for v in str(raw).split(","))
        return str(raw)
    except ValueError as e:
        raise ConfigError(f"bad value for {key}: {e}")


def apply_settings(kv, *targets):
    """Route key=value settings onto dataclass instances by field name.

    Raises on keys no target claims. Targets are mutated in place.
    """
    field_owner = {}
    for t in targets:
        for f in dataclasses.fields(t):
            field_owner.setdefault(f.name, t)
    unknown = sorted(set(kv) - set(field_owner))
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    for key, raw in kv.items():
        target = field_owner[key]
        setattr(target, key, _coerce(key, raw, getattr(target, key)))
    return targets


def gather_settings(config_file, set_pairs):
    kv = {}
    if config_file:
        kv.update(parse_kv_file(config_file))
    kv.update(parse_kv_pairs(set_pairs))
    return kv


def write_snapshot(path, command, resolved):
    """Resolved-config snapshot written next to a command's outputs."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"command": command, **resolved}
    path.write_text(json.dumps(payload, indent=2, default=str) + "\n")
    return path
