"""
Utility module for resolving run configuration
Combines command-line flags, an optional JSON file and environment variables
into one RunConfig that is written into every manifest
"""

import json
import logging
import os
from dataclasses import asdict, dataclass, fields, replace
from typing import Optional, Union

from errors import ConfigError

logger = logging.getLogger(__name__)

THREADS_ENV = 'MJDS_THREADS'
OUT_DIR_ENV = 'MJDS_OUT_DIR'
LOG_LEVEL_ENV = 'MJDS_LOG_LEVEL'

NUMBER = (int, float)

# Execution-only options; they never change a result and stay out of manifests
RUNTIME_KEYS = ('threads', 'out_dir')


@dataclass(frozen=True)
class RunConfig:
    """Every option of a run, after precedence resolution"""

    command: str = 'simulate'
    seed: int = 0
    out_dir: str = 'out'
    threads: int = 1
    system: str = 'sat'
    gamma: float = 1.2
    p: float = 0.95
    q: float = 0.01
    c: Union[float, str] = 'e'
    lambda_ratio: Optional[float] = None
    delta: Optional[int] = None
    alphabet: Optional[list] = None
    tpm: Optional[list] = None
    xi0: float = 1.0
    eta0: Union[None, int, list] = None
    horizon: int = 60
    runs: int = 1000
    dump_runs: int = 0
    grid: int = 200
    alpha3: Optional[float] = None
    samples: int = 10000
    radius: float = 10.0
    curve: Optional[str] = None
    certificate: Optional[str] = None
    xi0_norm: Optional[float] = None
    burn_in: Optional[int] = None
    gnuplot: bool = False

    def to_dict(self):
        """Result-determining options; RUNTIME_KEYS are left out"""
        return {key: value for key, value in asdict(self).items() if key not in RUNTIME_KEYS}

    def model_config(self):
        """The model part in the shape model_from_config expects"""
        config = {'system': self.system, 'gamma': self.gamma}
        if self.delta is not None:
            config['delta'] = self.delta
        if self.alphabet is not None:
            config['alphabet'] = self.alphabet
        return config

    def sat_spec(self):
        return {'gamma': self.gamma, 'p': self.p, 'q': self.q, 'c': self.c,
                'lambda_ratio': self.lambda_ratio}


# Allowed JSON types per key; None always allowed for optional fields
FIELD_TYPES = {
    'seed': int,
    'out_dir': str,
    'threads': int,
    'system': str,
    'gamma': NUMBER,
    'p': NUMBER,
    'q': NUMBER,
    'c': NUMBER + (str,),
    'lambda_ratio': NUMBER,
    'delta': int,
    'alphabet': list,
    'tpm': list,
    'xi0': NUMBER,
    'eta0': (int, list),
    'horizon': int,
    'runs': int,
    'dump_runs': int,
    'grid': int,
    'alpha3': NUMBER,
    'samples': int,
    'radius': NUMBER,
    'curve': str,
    'certificate': str,
    'xi0_norm': NUMBER,
    'burn_in': int,
    'gnuplot': bool,
}


def _check_value(key, value):
    if key not in FIELD_TYPES:
        raise ConfigError(f"unknown key '{key}'", field=key)
    if value is None:
        return value
    expected = FIELD_TYPES[key]
    if isinstance(value, bool) and expected is not bool:
        raise ConfigError(f"'{key}' must not be a boolean", field=key)
    if not isinstance(value, expected):
        names = expected.__name__ if isinstance(expected, type) else '/'.join(t.__name__ for t in expected)
        raise ConfigError(f"'{key}' must be {names}, got {type(value).__name__}", field=key)
    return value


def load_config_file(path):
    """
    Load a JSON run configuration

    Args:
        path: File holding one JSON object

    Returns:
        dict of validated keys

    Raises:
        ConfigError with the line number for syntax errors and the field
        name for unknown keys or wrongly typed values
    """
    with open(path, 'r') as f:
        text = f.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: {e.msg}", line=e.lineno) from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return {key: _check_value(key, value) for key, value in data.items()}


def env_overrides():
    """Values taken from MJDS_THREADS and MJDS_OUT_DIR when set"""
    overrides = {}
    threads = os.getenv(THREADS_ENV)
    if threads:
        try:
            overrides['threads'] = int(threads)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {threads!r}", field='threads') from None
    out_dir = os.getenv(OUT_DIR_ENV)
    if out_dir:
        overrides['out_dir'] = out_dir
    return overrides


def resolve_config(command, flags=None, config_path=None):
    """
    Merge configuration sources: flags > config file > environment > defaults

    Args:
        command: Subcommand name
        flags: Options given on the command line; None values count as unset
        config_path: Optional JSON file

    Returns:
        RunConfig
    """
    merged = env_overrides()
    if config_path:
        merged.update(load_config_file(config_path))
        logger.info(f"Loaded configuration from {config_path}")
    for key, value in (flags or {}).items():
        if value is not None:
            merged[key] = _check_value(key, value)

    config = replace(RunConfig(), command=command, **merged)
    if config.threads < 1:
        raise ConfigError(f"threads must be at least 1, got {config.threads}", field='threads')
    return config


def config_keys():
    return [f.name for f in fields(RunConfig) if f.name != 'command']
