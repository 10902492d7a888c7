"""Run manifests and the JSON file helpers every subcommand writes through"""

import json
import sys
import time
from dataclasses import dataclass, field

from . import __version__
from .errors import ConfigError


@dataclass
class RunManifest:
    subcommand: str
    config: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    version: str = __version__
    wall_time: float = 0.0
    _started: float = field(default_factory=time.perf_counter, repr=False)

    def finish(self):
        self.wall_time = time.perf_counter() - self._started
        return self

    def to_dict(self):
        return {
            'subcommand': self.subcommand,
            'config': self.config,
            'seeds': self.seeds,
            'inputs': self.inputs,
            'outputs': self.outputs,
            'version': self.version,
            'wall_time': self.wall_time,
        }


def write_json(path, payload):
    """Write payload as indented JSON; '-' or None means stdout"""
    text = json.dumps(payload, indent=2, sort_keys=True, allow_nan=False)
    if path in (None, '-'):
        sys.stdout.write(text + '\n')
        sys.stdout.flush()
        return
    with open(path, 'w') as f:
        f.write(text + '\n')


def read_json(path):
    """Load a JSON document; '-' reads stdin"""
    try:
        if path == '-':
            return json.load(sys.stdin)
        with open(path, 'r') as f:
            return json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"File not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"Invalid JSON in {path}: {e}")


def sidecar_path(path):
    return f"{path}.manifest.json"


def write_sidecar(path, manifest):
    """Manifest next to a non-JSON output (CSV)"""
    write_json(sidecar_path(path), manifest.to_dict())


def with_manifest(payload, manifest):
    """Copy of payload carrying the manifest under 'manifest'"""
    result = dict(payload)
    result['manifest'] = manifest.to_dict()
    return result
