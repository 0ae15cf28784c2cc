import json
from pathlib import Path

import tomli
import yaml

from mdrobustness.errors import ConfigError


class ConfigLoader:
    """
    Registry of experiment-configuration parsers keyed by format.

    A parser takes a file path and returns a plain dictionary. Formats are
    registered by instantiating a subclass; ``load`` picks the parser from the
    file extension unless ``format`` is given.

    Methods
    -------
    load(path, format=None)
        Parse ``path`` with the registered parser.

    Raises
    ------
    ConfigError
        If the format is not registered, the file cannot be read or parsed,
        or it does not hold a mapping.
    """

    format_dictionary = {}

    def __init__(self, format, config_loader_function):
        type(self).format_dictionary[format] = config_loader_function

    @classmethod
    def load(cls, path, format=None):
        path = Path(path)
        if format is None:
            format = path.suffix.lstrip(".").lower()
            format = "yaml" if format == "yml" else format
        if format not in cls.format_dictionary:
            raise ConfigError([f"Format '{format}' is not supported."])
        try:
            loaded = cls.format_dictionary[format](path)
        except OSError as exc:
            raise ConfigError([f"cannot read {path}: {exc.strerror}"]) from exc
        except (ValueError, yaml.YAMLError) as exc:
            raise ConfigError([f"cannot parse {path}: {exc}"]) from exc
        if loaded is None:
            return {}
        if not isinstance(loaded, dict):
            raise ConfigError([f"{path} must contain a mapping at top level"])
        return loaded


class JSONConfigLoader(ConfigLoader):
    def __init__(self):
        ConfigLoader.__init__(self, "json", self._load)

    @staticmethod
    def _load(path):
        with open(path, "r") as f:
            return json.load(f)


class YAMLConfigLoader(ConfigLoader):
    def __init__(self):
        ConfigLoader.__init__(self, "yaml", self._load)

    @staticmethod
    def _load(path):
        with open(path, "r") as f:
            return yaml.safe_load(f)


class TOMLConfigLoader(ConfigLoader):
    """TOML configs; a top-level ``[experiment]`` table is unwrapped if present."""

    def __init__(self):
        ConfigLoader.__init__(self, "toml", self._load)

    @staticmethod
    def _load(path):
        with open(path, "rb") as f:
            loaded = tomli.load(f)
        return loaded.get("experiment", loaded)


YAMLConfigLoader()
JSONConfigLoader()
TOMLConfigLoader()
