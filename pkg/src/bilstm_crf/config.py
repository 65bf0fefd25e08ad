"""Flat ``key=value`` configuration files."""

from .errors import ConfigError


def parse_config(text):
    """Parse ``key=value`` lines into a dict of strings.

    Blank lines and lines starting with ``#`` are skipped; later keys
    override earlier ones.
    """
    out = {}
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value.strip()
    return out


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def format_config(values):
    return "".join(f"{k}={v}\n" for k, v in values.items())


def parse_bool(value):
    v = str(value).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {value!r}")
