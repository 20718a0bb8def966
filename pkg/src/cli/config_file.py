"""
Structured-text run configuration and provenance manifest
"""
import configparser
import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union
from dataclasses import dataclass, field
import logging

from ..chain import __version__
from ..chain.model import ChainConfig, PotentialKind, ProfileVariant, SchemeKind
from ..chain.errors import ChainConfigError

logger = logging.getLogger(__name__)

# Config key -> (section, ChainConfig field). Keys match the CLI flag names.
CONFIG_KEYS: Dict[str, Tuple[str, str]] = {
    'n': ('chain', 'n_sites'),
    'n0': ('chain', 'n_physical'),
    'coupling': ('chain', 'coupling'),
    'beta': ('chain', 'beta'),
    'gamma': ('chain', 'gamma'),
    'mass_squared': ('chain', 'mass_squared'),
    'kappa': ('chain', 'kappa'),
    'sigma': ('chain', 'sigma'),
    'potential': ('chain', 'potential'),
    'profile': ('chain', 'profile'),
    'initial_displacement': ('chain', 'initial_displacement'),
    'initial_velocity': ('chain', 'initial_velocity'),
    'amplitude': ('drive', 'amplitude'),
    'frequency': ('drive', 'frequency'),
    'ramp_time': ('drive', 'ramp_time'),
    'dt': ('numerics', 'dt'),
    't_final': ('numerics', 't_final'),
    'scheme': ('numerics', 'scheme'),
    'second_order_start': ('numerics', 'second_order_start'),
}
RUN_KEYS = ('probes', 'workers')
SECTIONS = ('chain', 'drive', 'numerics', 'run')

_INT_FIELDS = {'n_sites', 'n_physical'}
_ENUM_FIELDS = {'potential': PotentialKind, 'profile': ProfileVariant, 'scheme': SchemeKind}
_LIST_FIELDS = {'initial_displacement', 'initial_velocity'}


def _parse_list(text: str) -> List[float]:
    return [float(v) for v in text.replace(' ', '').split(',') if v]


def coerce_value(key: str, raw: Any) -> Any:
    """Convert a config/flag value to the type its ChainConfig field expects"""
    if key in RUN_KEYS:
        if key == 'probes':
            values = raw if isinstance(raw, (list, tuple)) else _parse_list(str(raw))
            return [int(v) for v in values]
        return int(raw)

    if key not in CONFIG_KEYS:
        raise ChainConfigError(key, "unknown configuration key")
    name = CONFIG_KEYS[key][1]
    try:
        if name in _ENUM_FIELDS:
            return raw if isinstance(raw, _ENUM_FIELDS[name]) else _ENUM_FIELDS[name](str(raw).strip())
        if name in _INT_FIELDS:
            return int(raw)
        if name in _LIST_FIELDS:
            return raw if isinstance(raw, (list, tuple)) else _parse_list(str(raw))
        if name == 'second_order_start':
            if isinstance(raw, bool):
                return raw
            return configparser.ConfigParser.BOOLEAN_STATES[str(raw).strip().lower()]
        return float(raw)
    except (ValueError, KeyError):
        raise ChainConfigError(key, f"cannot interpret {raw!r}") from None


def read_config(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Read an INI config file into flat, typed overrides

    Args:
        path: file with [chain], [drive], [numerics] and [run] sections

    Returns:
        dict keyed by config key (the CLI flag names with underscores)
    """
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding='utf-8') as f:
            parser.read_file(f)
    except OSError as e:
        raise ChainConfigError('config', f"cannot read {path}: {e}") from None
    except configparser.Error as e:
        raise ChainConfigError('config', f"malformed file {path}: {e}") from None

    overrides = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ChainConfigError('config', f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if section == 'run':
                if key not in RUN_KEYS:
                    raise ChainConfigError(key, "unknown key in [run]")
            elif CONFIG_KEYS.get(key, (None,))[0] != section:
                raise ChainConfigError(key, f"not a key of [{section}]")
            overrides[key] = coerce_value(key, raw)
    logger.info(f"Loaded {len(overrides)} settings from {path}")
    return overrides


def build_config(overrides: Dict[str, Any], base: Optional[ChainConfig] = None) -> ChainConfig:
    """Apply chain overrides (run keys are ignored) to `base` or the defaults"""
    base = base or ChainConfig()
    changes = {}
    for key, value in overrides.items():
        if key in RUN_KEYS or value is None:
            continue
        changes[CONFIG_KEYS[key][1]] = coerce_value(key, value)
    return base.with_updates(**changes)


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ', '.join(_format(v) for v in value)
    return str(value)


def dump_config(cfg: ChainConfig, run: Optional[Dict[str, Any]] = None) -> str:
    """Resolved configuration as INI text that read_config parses back to the same values"""
    flat = cfg.to_dict()
    lines: List[str] = []
    for section in SECTIONS:
        lines.append(f"[{section}]")
        if section == 'run':
            for key in RUN_KEYS:
                if run and run.get(key) is not None:
                    lines.append(f"{key} = {_format(run[key])}")
        else:
            for key, (owner, name) in CONFIG_KEYS.items():
                if owner != section:
                    continue
                value = flat[name]
                if name in _LIST_FIELDS and not value:
                    continue
                lines.append(f"{key} = {_format(value)}")
        lines.append("")
    return "\n".join(lines)


@dataclass
class RunManifest:
    """Provenance embedded in every output file"""
    command: str
    config: Dict[str, Any]
    parameters: Dict[str, Any] = field(default_factory=dict)
    version: str = __version__

    @classmethod
    def build(cls, command: str, cfg: ChainConfig, **parameters) -> 'RunManifest':
        return cls(command=command, config=cfg.to_dict(), parameters=_jsonable(parameters))

    def canonical(self) -> str:
        payload = {'command': self.command, 'config': self.config, 'parameters': self.parameters}
        return json.dumps(payload, sort_keys=True, separators=(',', ':'))

    @property
    def content_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode('utf-8')).hexdigest()

    def header_lines(self) -> List[str]:
        return [
            f"# supratransmission {self.version}",
            f"# command: {self.command}",
            f"# hash: sha256:{self.content_hash}",
            f"# config: {json.dumps(self.config, sort_keys=True)}",
            f"# parameters: {json.dumps(self.parameters, sort_keys=True)}",
        ]

    def sidecar(self, started: datetime, finished: datetime, workers: int, files: Iterable[str]) -> Dict[str, Any]:
        """Run record with the worker count and timestamps kept out of the CSV headers"""
        return {
            'tool': 'supratransmission',
            'version': self.version,
            'command': self.command,
            'hash': f"sha256:{self.content_hash}",
            'config': self.config,
            'parameters': self.parameters,
            'workers': workers,
            'started': started.astimezone(timezone.utc).isoformat(),
            'finished': finished.astimezone(timezone.utc).isoformat(),
            'wall_seconds': (finished - started).total_seconds(),
            'files': sorted(files),
        }


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, 'value') and not isinstance(value, (int, float, str)):
        return value.value
    if hasattr(value, 'item'):
        return value.item()
    return value
