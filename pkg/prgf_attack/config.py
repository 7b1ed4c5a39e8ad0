"""
Experiment configuration

Declared with the mkdocs config schema machinery and loaded from YAML or JSON
(JSON being a YAML subset). Validation warnings, including unrecognised keys,
are treated as errors.
"""

import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml
from mkdocs.config import config_options
from mkdocs.config.base import Config

from .attack import PRESETS, NormKind
from .exceptions import ConfigError

logger = logging.getLogger('prgf.config')

CONFIG_VERSION = 1
ORACLE_SOURCES = ('oracle_builtin', 'oracle_model', 'oracle_url')


class ExperimentConfig(Config):
    """Configuration of one attack suite"""

    version = config_options.Type(int, default=CONFIG_VERSION)

    # Oracle: exactly one source
    oracle_builtin = config_options.Optional(config_options.Choice(['dataset-target']))
    oracle_model = config_options.Optional(config_options.Type(str))
    oracle_url = config_options.Optional(config_options.Type(str))

    # Surrogate model files; empty means the surrogate stored with the dataset
    surrogates = config_options.ListOfItems(config_options.Type(str), default=[])
    dataset = config_options.Optional(config_options.Type(str))
    instances = config_options.Optional(config_options.Type(int))

    # Threat model
    preset = config_options.Choice(PRESETS, default='desk-l2')
    norm = config_options.Optional(config_options.Choice(['l2', 'linf']))
    loss = config_options.Optional(config_options.Choice(['cross_entropy', 'cw_margin']))
    max_queries = config_options.Type(int, default=10000)

    # Estimator
    variant = config_options.Choice(['rgf', 'prgf-bs', 'prgf-ga'], default='prgf-ga')
    prior = config_options.Choice(['single', 'avg', 'proj'], default='single')
    q = config_options.Optional(config_options.Type(int))
    sigma = config_options.Optional(config_options.Type((int, float)))
    dd = config_options.Type(bool, default=False)
    dd_dim = config_options.Optional(config_options.Type(int))
    ga_impl = config_options.Choice(['projection', 'closed-form'], default='projection')
    fixed_lambda = config_options.Optional(config_options.Type((int, float)))
    fixed_mu = config_options.Optional(config_options.Type((int, float)))

    # Run
    seed = config_options.Type(int, default=0)
    jobs = config_options.Type(int, default=1)
    out = config_options.Type(str, default='results')

    @property
    def oracle_source(self) -> str:
        for key in ORACLE_SOURCES:
            if self[key] is not None:
                return key
        return 'oracle_builtin'

    def preset_name(self) -> str:
        """Preset after applying the norm override (same family, other norm)"""
        name = self['preset']
        if self['norm'] is None:
            return name
        family = name.rsplit('-', 1)[0]
        return f"{family}-{NormKind(self['norm']).value}"

    def summary(self) -> Dict[str, Any]:
        """Settings shown at the top of report.md"""
        keys = ('preset', 'variant', 'prior', 'max_queries', 'seed', 'q', 'sigma', 'dd', 'dd_dim',
                'ga_impl', 'fixed_lambda', 'fixed_mu', 'loss')
        summary = {key: self[key] for key in keys if self[key] is not None}
        summary['preset'] = self.preset_name()
        summary['oracle'] = self[self.oracle_source] or 'dataset-target'
        return summary


def _read(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"Cannot read config {path}: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"Config {path} must be a mapping, got {type(data).__name__}")
    return data


def load_config(path: Optional[Union[str, Path]] = None,
                overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """
    Load, merge and validate an experiment configuration

    Args:
        path: YAML/JSON file, or None for defaults only
        overrides: values taking precedence over the file (None values ignored)

    Raises:
        ConfigError: on unreadable files, schema errors, unknown keys, an
            unsupported version, or more than one oracle source
    """
    data = _read(path) if path is not None else {}
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value

    config = ExperimentConfig(config_file_path=str(path) if path else None)
    config.load_dict(data)
    errors, warnings = config.validate()
    problems = [f"{key}: {message}" for key, message in list(errors) + list(warnings)]
    if problems:
        raise ConfigError("Invalid configuration: " + "; ".join(problems))

    if config['version'] != CONFIG_VERSION:
        raise ConfigError(f"Unsupported config version {config['version']}, expected {CONFIG_VERSION}")
    sources = [key for key in ORACLE_SOURCES if config[key] is not None]
    if len(sources) > 1:
        raise ConfigError(f"Exactly one oracle source allowed, got {', '.join(sources)}")
    if not sources:
        config['oracle_builtin'] = 'dataset-target'
    for key in ('max_queries', 'jobs'):
        if config[key] < 1:
            raise ConfigError(f"{key} must be >= 1, got {config[key]}")
    if config['seed'] < 0:
        raise ConfigError(f"seed must be >= 0, got {config['seed']}")
    if config['instances'] is not None and config['instances'] < 0:
        raise ConfigError(f"instances must be >= 0, got {config['instances']}")

    logger.debug(f"Loaded config: {config.summary()}")
    return config
