"""Flat ``key = value`` config files: one pair per line, ``#`` comments.

The same format serves run configs, synth configs, and emitted run manifests
(informational manifest keys are namespaced under ``info.`` and ignored when a
manifest is fed back in as a config).
"""

from __future__ import annotations

from pathlib import Path


class ConfigError(ValueError):
    pass


def parse_kv(path: str | Path) -> dict[str, str]:
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        if key in pairs:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        pairs[key] = value.strip()
    return pairs


def write_kv(pairs: dict[str, str], path: str | Path, header: str | None = None) -> None:
    lines = []
    if header:
        lines.append(f"# {header}")
    lines += [f"{key} = {value}" for key, value in pairs.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def parse_bool(value: str, key: str) -> bool:
    lowered = value.lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")
