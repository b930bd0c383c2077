"""Sectioned key-value experiment configs with typed scalars and lists.

The on-disk format is a TOML-subset: ``[section]`` headers, ``key = value``
lines, ``#`` comments, and values that are integers, floats, booleans,
double-quoted strings, or (nested) lists of those. ``parse(dump(cfg)) == cfg``
holds exactly, which is what makes presets diffable and reruns byte-stable.
"""
from __future__ import annotations


class ConfigError(ValueError):
    pass


def _strip_comment(line: str) -> str:
    out = []
    in_str = False
    for ch in line:
        if ch == '"':
            in_str = not in_str
        if ch == "#" and not in_str:
            break
        out.append(ch)
    return "".join(out)


def _parse_value(text: str, lineno: int):
    text = text.strip()
    if not text:
        raise ConfigError(f"line {lineno}: missing value")
    if text.startswith("["):
        return _parse_list(text, lineno)
    if text.startswith('"'):
        if not (text.endswith('"') and len(text) >= 2):
            raise ConfigError(f"line {lineno}: unterminated string")
        return text[1:-1]
    if text == "true":
        return True
    if text == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"line {lineno}: cannot parse value {text!r}") from None


def _split_items(body: str, lineno: int) -> list[str]:
    items, depth, in_str, cur = [], 0, False, []
    for ch in body:
        if ch == '"':
            in_str = not in_str
        if not in_str:
            if ch == "[":
                depth += 1
            elif ch == "]":
                depth -= 1
                if depth < 0:
                    raise ConfigError(f"line {lineno}: unbalanced brackets")
            elif ch == "," and depth == 0:
                items.append("".join(cur))
                cur = []
                continue
        cur.append(ch)
    if depth != 0 or in_str:
        raise ConfigError(f"line {lineno}: unbalanced brackets or string")
    if "".join(cur).strip():
        items.append("".join(cur))
    return items


def _parse_list(text: str, lineno: int):
    if not text.endswith("]"):
        raise ConfigError(f"line {lineno}: unterminated list")
    body = text[1:-1].strip()
    if not body:
        return []
    return [_parse_value(item, lineno) for item in _split_items(body, lineno)]


def parse(text: str) -> dict:
    """Parse config text into {section: {key: value}}."""
    config: dict[str, dict] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"line {lineno}: malformed section header")
            name = line[1:-1].strip()
            if not name or "[" in name or "]" in name:
                raise ConfigError(f"line {lineno}: malformed section name")
            if name in config:
                raise ConfigError(f"line {lineno}: duplicate section [{name}]")
            config[name] = {}
            section = name
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if section is None:
            raise ConfigError(f"line {lineno}: key outside any section")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in config[section]:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} in [{section}]")
        config[section][key] = _parse_value(value, lineno)
    return config


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str):
        if '"' in value or "\n" in value:
            raise ConfigError(f"cannot serialize string {value!r}")
        return f'"{value}"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_format_value(v) for v in value) + "]"
    raise ConfigError(f"cannot serialize {type(value).__name__}")


def dump(config: dict) -> str:
    """Canonical text for a {section: {key: value}} config."""
    lines = []
    for section, body in config.items():
        lines.append(f"[{section}]")
        for key, value in body.items():
            lines.append(f"{key} = {_format_value(value)}")
        lines.append("")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# schema validation

REQUIRED = object()


def validate(config: dict, schema: dict, name: str = "config") -> dict:
    """Check sections/keys/types against the schema and fill defaults.

    Schema: {section: {key: (type_tag, default-or-REQUIRED)}}; unknown
    sections or keys are rejected outright.
    """
    out: dict[str, dict] = {}
    for section in config:
        if section not in schema:
            raise ConfigError(f"{name}: unknown section [{section}]")
    for section, keys in schema.items():
        body = dict(config.get(section, {}))
        result = {}
        for key, (tag, default) in keys.items():
            if key in body:
                result[key] = _check_type(body.pop(key), tag, f"{name}: [{section}] {key}")
            elif default is REQUIRED:
                raise ConfigError(f"{name}: [{section}] missing required key {key!r}")
            else:
                result[key] = default
        for stray in body:
            raise ConfigError(f"{name}: unknown key {stray!r} in [{section}]")
        out[section] = result
    return out


def _check_type(value, tag: str, where: str):
    def fail():
        raise ConfigError(f"{where}: expected {tag}, got {value!r}")

    if tag == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            fail()
        return value
    if tag == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            fail()
        return float(value)
    if tag == "str":
        if not isinstance(value, str):
            fail()
        return value
    if tag == "bool":
        if not isinstance(value, bool):
            fail()
        return value
    if tag == "list[float]":
        if not isinstance(value, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
        ):
            fail()
        return [float(v) for v in value]
    if tag == "list[int]":
        if not isinstance(value, list) or not all(
            isinstance(v, int) and not isinstance(v, bool) for v in value
        ):
            fail()
        return list(value)
    if tag == "list[str]":
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            fail()
        return list(value)
    if tag == "schedule":  # [[epoch, value], ...]
        if not isinstance(value, list):
            fail()
        out = []
        for item in value:
            if (
                not isinstance(item, list)
                or len(item) != 2
                or isinstance(item[0], bool)
                or not isinstance(item[0], int)
                or isinstance(item[1], bool)
                or not isinstance(item[1], (int, float))
            ):
                fail()
            out.append([item[0], float(item[1])])
        return out
    raise ConfigError(f"unknown schema tag {tag!r}")
