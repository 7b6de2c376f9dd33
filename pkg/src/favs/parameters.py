# Licensed under the MIT License

"""Model and run parameters.

Parameters are a plain dictionary created by :func:`default` and updated
by key. On disk they are a flat UTF-8 ``key=value`` file::

    stages=3
    experts=4
    channels=32
    tau=1.0,0.6,0.3,0.1
    seed=42
"""

from pathlib import Path

from .errors import ConfigError
from .spectral import DEFAULT_TAUS


def default() -> dict:
    """Return a dictionary with the default value of every parameter."""
    return {
        "stages": 3,
        "channels": 32,
        "experts": 4,
        "queries": 8,
        "classes": 2,
        "size": 64,
        "tau": DEFAULT_TAUS,
        "seed": 42,
        "groups": 4,
        "reduction": 4,
        "stc_reduction": 4,
        "stc_kernel": 3,
        "audio_grid": 4,
        "force_dense": False,
        "fixed_k": 0,
        "fded": True,
        "scmc": True,
        "enhance": True,
        "threads": 1,
    }


def _parse_value(text: str, like):
    if isinstance(like, bool):
        if text.lower() in ("true", "1", "yes"):
            return True
        if text.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"expected true or false, got {text!r}")
    if isinstance(like, int):
        return int(text)
    if isinstance(like, tuple):
        return tuple(float(t) for t in text.split(","))
    return type(like)(text)


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(repr(float(v)) for v in value)
    return str(value)


def parse_parameters(text: str, source: str = "<string>") -> dict:
    """Parse ``key=value`` lines on top of the defaults.

    Blank lines and lines starting with ``#`` are ignored. Unknown keys,
    repeated keys and unparsable values raise :class:`ConfigError`.
    """
    p = default()
    seen = set()
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        where = f"{source}:{number}"
        if not sep:
            raise ConfigError(f"{where}: expected key=value, got {line!r}")
        if key not in p:
            raise ConfigError(f"{where}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"{where}: duplicate key {key!r}")
        try:
            p[key] = _parse_value(value, p[key])
        except ValueError as e:
            raise ConfigError(f"{where}: invalid value for {key}: {e}") from e
        seen.add(key)
    return p


def load_parameters(path) -> dict:
    """Load parameters from a config file."""
    path = Path(path)
    return parse_parameters(path.read_text(encoding="utf-8"), str(path))


def save_parameters(p: dict, path):
    """Write parameters as a sorted ``key=value`` file."""
    text = "".join(f"{key}={_format_value(p[key])}\n" for key in sorted(p))
    Path(path).write_text(text, encoding="utf-8")
