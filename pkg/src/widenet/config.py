"""Experiment config files: JSON, or line-oriented `key = value` with
[section] headers. Values are parsed as JSON fragments when possible
(numbers, lists, booleans), otherwise kept as strings.
"""

import hashlib
import json


class ConfigError(ValueError):
    pass


def _parse_value(raw):
    raw = raw.strip()
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def loads(text):
    text = text.strip()
    if text.startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON config: {exc}") from exc
    cfg = {}
    section = cfg
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            section = cfg.setdefault(name, {})
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got "
                              f"{line!r}")
        key, raw = line.split("=", 1)
        section[key.strip()] = _parse_value(raw)
    return cfg


def load(path):
    with open(path) as fh:
        return loads(fh.read())


def canonical_json(cfg):
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def content_hash(cfg):
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()[:16]


def validate(cfg, schema):
    """Check required fields; returns a list of 'path: message' strings."""
    errors = []
    for path, (required, types) in schema.items():
        node = cfg
        parts = path.split(".")
        for part in parts:
            if not isinstance(node, dict) or part not in node:
                node = None
                break
            node = node[part]
        if node is None:
            if required:
                errors.append(f"{path}: required field missing")
            continue
        if types and not isinstance(node, types):
            errors.append(f"{path}: expected {types}, got "
                          f"{type(node).__name__}")
    return errors
