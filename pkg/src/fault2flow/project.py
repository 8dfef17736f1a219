"""File-based project store and its ``fault2flow.config`` settings."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

CONFIG_NAME = "fault2flow.config"
LAYOUT = ("regulations", "mindmaps", "trees", "workflows", "suites", "reports")
API_KEY_ENV = "FAULT2FLOW_N8N_KEY"

# key -> (type, default)
SETTINGS = {
    "seed": (int, 0),
    "epsilon": (float, 1e-3),
    "region_cap": (int, 4096),
    "random_count": (int, 16),
    "max_iterations": (int, 5),
    "leaf_cap": (int, 12),
    "evolve.islands": (int, 4),
    "evolve.population": (int, 16),
    "evolve.iterations": (int, 200),
    "evolve.inspirations": (int, 2),
    "evolve.migration_interval": (int, 10),
    "evolve.migration_size": (int, 2),
    "readability.naming": (float, 0.25),
    "readability.depth": (float, 0.25),
    "readability.redundancy": (float, 0.25),
    "readability.degenerate": (float, 0.25),
    "n8n.endpoint": (str, "http://localhost:5678"),
    "n8n.api_key_env": (str, API_KEY_ENV),
    "n8n.timeout": (float, 10.0),
}

DEFAULT_CONFIG = """\
# fault2flow project settings (key = value)
seed = 0
epsilon = 0.001
region_cap = 4096
random_count = 16
max_iterations = 5
leaf_cap = 12

evolve.islands = 4
evolve.population = 16
evolve.iterations = 200

# the API key itself is read from this environment variable, never stored here
n8n.endpoint = http://localhost:5678
n8n.api_key_env = FAULT2FLOW_N8N_KEY
n8n.timeout = 10
"""


def parse_config(text: str) -> dict:
    values = {k: default for k, (_, default) in SETTINGS.items()}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{CONFIG_NAME}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in SETTINGS:
            raise ConfigError(f"{CONFIG_NAME}:{lineno}: unknown key {key!r}")
        kind = SETTINGS[key][0]
        try:
            values[key] = kind(value)
        except ValueError:
            raise ConfigError(f"{CONFIG_NAME}:{lineno}: {key} expects {kind.__name__}, got {value!r}") from None
    return values


@dataclass
class Project:
    root: Path
    settings: dict = field(default_factory=lambda: parse_config(""))

    @classmethod
    def load(cls, root: str | os.PathLike = ".") -> "Project":
        root = Path(root)
        path = root / CONFIG_NAME
        text = path.read_text(encoding="utf-8") if path.exists() else ""
        return cls(root, parse_config(text))

    @classmethod
    def init(cls, root: str | os.PathLike) -> "Project":
        root = Path(root)
        for name in LAYOUT:
            (root / name).mkdir(parents=True, exist_ok=True)
        config = root / CONFIG_NAME
        if not config.exists():
            config.write_text(DEFAULT_CONFIG, encoding="utf-8")
        return cls.load(root)

    def __getitem__(self, key):
        return self.settings[key]

    def api_key(self) -> str | None:
        return os.environ.get(self.settings["n8n.api_key_env"])
