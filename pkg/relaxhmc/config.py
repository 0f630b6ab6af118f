# THIS FILE IS PART OF RELAXHMC, CONSTRAINT RELAXED POSTERIOR SAMPLING.
# Copyright (C) relaxhmc contributors.
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>.
"""Experiment configuration: the catalog, loading and validation.

Configuration may be a JSON document or a Rose configuration file, both
are turned into a :class:`metomi.rose.config.ConfigNode` whose values are
literal strings before validation.
"""

from dataclasses import asdict, dataclass, field
import json
import math
import os
from pathlib import Path
import re
import shlex
from typing import (
    Any,
    Dict,
    Iterable,
    List,
    Mapping,
    Optional,
    Tuple,
    Union,
)

from metomi.isodatetime.datetimeoper import DateTimeOperator
from metomi.rose.config import ConfigDumper, ConfigNode
from metomi.rose.config_tree import ConfigTreeLoader

from relaxhmc import LOG
from relaxhmc.exceptions import (
    ConfigError,
    ConfigValidationError,
    InvalidArgumentError,
    UnknownExperimentError,
)
from relaxhmc.hmc import HmcConfig
from relaxhmc.parser import Parser
from relaxhmc.targets import (
    MODEL_DEFAULTS,
    ModelName,
    ModelSpec,
    make_model,
)

RELAXHMC_SEED = 'RELAXHMC_SEED'
RELAXHMC_OPT_CONF_KEYS = 'RELAXHMC_OPT_CONF_KEYS'
SECTIONS = ('hmc', 'model')
TOP_LEVEL_KEYS = (
    'experiment',
    'lambda_grid',
    'replicates',
    'seed',
    'output_dir',
    'jobs',
    'grid',
)
# keys whose values may be given as bare (unquoted) strings
STRING_KEYS = {'experiment', 'output_dir'}
MODEL_STRING_KEYS = {'shrinkage', 'data', 'norm_order'}

# (section or None, key) -> line number
LineLookup = Dict[Tuple[Optional[str], str], int]
Problems = List[Tuple[Optional[int], str]]


@dataclass(frozen=True)
class ExperimentDefaults:
    """A catalog experiment and its default settings."""

    name: str
    description: str
    model: ModelName
    lambda_grid: Tuple[float, ...]
    replicates: int = 1
    hmc: Mapping[str, Any] = field(default_factory=dict)
    model_params: Mapping[str, Any] = field(default_factory=dict)
    grid: Optional[int] = None
    rate: bool = False
    codimension: int = 1


_CIRCLE = {'F': [math.sqrt(0.5), math.sqrt(0.5)], 'sigma2': 0.5}
# steps scale as 1 / lambda at a fixed integration time, hence the cap
_SPHERE_HMC = {
    'n_iterations': 4000,
    'n_burnin': 1000,
    'integration_time': 1.0,
    'max_leapfrog': 2000,
}

CATALOG: Dict[str, ExperimentDefaults] = {
    item.name: item for item in (
        ExperimentDefaults(
            'gaussian-inequality',
            'Gaussian mean restricted to theta <= 1 (truncated normal).',
            ModelName.GAUSSIAN_INEQUALITY,
            (1e-2,),
            hmc={'n_iterations': 3000, 'n_burnin': 1000, 'n_leapfrog': 20},
            model_params={'n': 100, 'theta_true': 0.5},
        ),
        ExperimentDefaults(
            'circle-benchmark',
            'Von Mises-Fisher on the unit circle against exact draws.',
            ModelName.SPHERE_GAUSSIAN,
            (1e-3, 1e-4, 1e-5),
            replicates=10,
            hmc={
                'n_iterations': 6000,
                'n_burnin': 1000,
                'integration_time': 1.0,
                'max_leapfrog': 500,
            },
            model_params=_CIRCLE,
        ),
        ExperimentDefaults(
            'sphere-gaussian',
            'Gaussian parent relaxed onto the 2-sphere.',
            ModelName.SPHERE_GAUSSIAN,
            (1e-3,),
            hmc=_SPHERE_HMC,
            model_params={'sigma2': 0.1},
        ),
        ExperimentDefaults(
            'sphere-t',
            'Student t parent relaxed onto the 2-sphere.',
            ModelName.SPHERE_T,
            (1e-3,),
            hmc=_SPHERE_HMC,
            model_params={'sigma2': 0.1, 'm': 3.0},
        ),
        ExperimentDefaults(
            'torus',
            'Uniform law on a torus with the Jacobian factor.',
            ModelName.TORUS_UNIFORM,
            (1e-1, 1e-2, 1e-3),
            hmc={
                'n_iterations': 3000,
                'n_burnin': 1000,
                'integration_time': 3.0,
            },
        ),
        ExperimentDefaults(
            'simplex',
            'Dirichlet kernel relaxed onto the probability simplex.',
            ModelName.SIMPLEX_TOY,
            (1e-2, 1e-3),
            hmc={
                'n_iterations': 3000,
                'n_burnin': 1000,
                'integration_time': 1.0,
                'max_leapfrog': 1000,
            },
        ),
        ExperimentDefaults(
            'factor-network',
            'Latent factor network model with Stiefel relaxed factors.',
            ModelName.FACTOR_NETWORK,
            (1e-3,),
            hmc={
                'n_iterations': 600,
                'n_burnin': 300,
                'integration_time': 0.5,
                'max_leapfrog': 300,
            },
        ),
        ExperimentDefaults(
            'rate-zero-measure',
            'Relaxed vs sharp quadrature on the circle as lambda shrinks.',
            ModelName.SPHERE_GAUSSIAN,
            (1e-2, 3e-3, 1e-3, 3e-4, 1e-4),
            model_params=_CIRCLE,
            rate=True,
        ),
        ExperimentDefaults(
            'rate-positive-measure',
            'Relaxed quadrature vs the truncated normal as lambda shrinks.',
            ModelName.GAUSSIAN_INEQUALITY,
            (1e-1, 3e-2, 1e-2, 3e-3, 1e-3),
            model_params={'n': 100, 'ybar': 1.2},
            rate=True,
            codimension=0,
        ),
    )
}


def get_experiment(name: str) -> ExperimentDefaults:
    try:
        return CATALOG[name]
    except KeyError:
        raise UnknownExperimentError(name, list(CATALOG)) from None


@dataclass(frozen=True)
class ExperimentConfig:
    """A fully resolved experiment configuration."""

    experiment: str
    lambda_grid: Tuple[float, ...]
    hmc: Mapping[str, Any] = field(default_factory=dict)
    model: Mapping[str, Any] = field(default_factory=dict)
    replicates: int = 1
    output_dir: str = '.'
    seed: int = 0
    jobs: int = 1
    grid: Optional[int] = None

    @property
    def defaults(self) -> ExperimentDefaults:
        return get_experiment(self.experiment)

    def model_spec(self) -> ModelSpec:
        return ModelSpec(self.defaults.model, self.model)

    def hmc_config(self, replicate: int = 0) -> HmcConfig:
        """Sampler settings for a replicate, seeded ``seed + replicate``."""
        return HmcConfig(**self.hmc, seed=self.seed + replicate)

    def to_dict(self) -> Dict[str, Any]:
        """The JSON form, complete enough to replay the run."""
        hmc = asdict(self.hmc_config())
        hmc.pop('seed')
        return _jsonable({
            'experiment': self.experiment,
            'lambda_grid': list(self.lambda_grid),
            'replicates': self.replicates,
            'seed': self.seed,
            'output_dir': self.output_dir,
            'jobs': self.jobs,
            'grid': self.grid,
            'hmc': hmc,
            'model': self.model_spec().resolved(),
        })


def _jsonable(value):
    if isinstance(value, dict):
        return {key: _jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    if hasattr(value, 'tolist'):
        return value.tolist()
    return value


def parse_cli_defines(
    define: str,
) -> Union[bool, Tuple[List[str], str, str]]:
    """Parse a define string.

    Args:
        define:
            ``key=value`` or ``[section]key=value``, optionally with ``!`` or
            ``!!`` before the key to switch the item off.

    Returns:
        False if the define is malformed, otherwise ``(keys, value, state)``.

    Examples:
        >>> parse_cli_defines('replicates=4')
        (['replicates'], '4', '')
        >>> parse_cli_defines('[hmc]!adapt_mass = true')
        (['hmc', 'adapt_mass'], 'true', '!')
        >>> parse_cli_defines('[]seed=3')
        (['seed'], '3', '')
        >>> parse_cli_defines('replicates')
        False

    """
    match = re.match(
        (
            r'^\[(?P<section>.*)\](?P<state>!{0,2})'
            r'(?P<key>[^=]*?)\s*=\s*(?P<value>.*)'
        ),
        define,
    )
    if match:
        section = match['section'].strip()
        keys = [section, match['key'].strip()] if section else [
            match['key'].strip()
        ]
    else:
        match = re.match(
            r'^(?P<state>!{0,2})(?P<key>[^=\[]*?)\s*=\s*(?P<value>.*)',
            define,
        )
        if not match:
            return False
        keys = [match['key'].strip()]
    if not all(keys):
        return False
    return (keys, match['value'], match['state'])


def invalid_defines_check(defines: Iterable[str]) -> None:
    r"""Check for defines which cannot be parsed.

    Examples:
        >>> import pytest
        >>> with pytest.raises(
        ...     ConfigValidationError, match='invalid define: foo '
        ... ):
        ...     invalid_defines_check(['foo', 'bar=1', '=2'])

    """
    invalid = [
        (None, f'invalid define: {define} (should be [section]key=value)')
        for define in defines
        if parse_cli_defines(define) is False
    ]
    if invalid:
        raise ConfigValidationError(invalid, source='(command line)')


def apply_defines(node: ConfigNode, defines: Iterable[str]) -> ConfigNode:
    """Set each ``[section]key=value`` define on a config node."""
    invalid_defines_check(defines)
    for define in defines:
        keys, value, state = parse_cli_defines(define)  # type: ignore
        node.set(keys, value, state=state or ConfigNode.STATE_NORMAL)
    return node


def json_to_node(doc: Mapping[str, Any]) -> ConfigNode:
    """Convert a JSON document into a config node of literal strings.

    Examples:
        >>> node = json_to_node({'replicates': 2, 'hmc': {'seed': 1}})
        >>> node.get_value(['replicates']), node.get_value(['hmc', 'seed'])
        ('2', '1')

    """
    node = ConfigNode()
    for key, value in doc.items():
        if isinstance(value, dict):
            node.set([key], {})
            for sub_key, sub_value in value.items():
                node.set([key, sub_key], repr(sub_value))
        else:
            node.set([key], repr(value))
    return node


def source_lines(path: Path) -> LineLookup:
    """Map ``(section, key)`` to the line defining it in a config file."""
    lines: LineLookup = {}
    text = path.read_text().splitlines()
    if path.suffix == '.json':
        section = None
        for number, line in enumerate(text, start=1):
            for match in re.finditer(r'"([^"]+)"\s*:\s*(\{)?', line):
                key = match[1]
                if match[2] and key in SECTIONS:
                    section = key
                    lines.setdefault((None, key), number)
                elif section and (section, key) not in lines and (
                    key not in TOP_LEVEL_KEYS or key in HmcConfig.field_names()
                ):
                    lines[(section, key)] = number
                else:
                    lines.setdefault((None, key), number)
            if section and re.match(r'^\s{0,4}\}', line):
                section = None
    else:
        section = None
        for number, line in enumerate(text, start=1):
            header = re.match(r'^\s*\[!{0,2}([^\]]*)\]', line)
            if header:
                section = header[1].strip() or None
                lines.setdefault((None, section or ''), number)
                continue
            item = re.match(r'^\s*!{0,2}([^=#\s]+)\s*=', line)
            if item:
                lines.setdefault((section, item[1]), number)
    return lines


def load_config_node(
    path: Path,
    opt_conf_keys: Iterable[str] = (),
    environ: Mapping[str, str] = os.environ,
) -> ConfigNode:
    """Load a JSON or Rose format experiment configuration.

    Optional configurations (``opt/<name>-<key>.conf``) apply to Rose
    format files only; keys come from ``RELAXHMC_OPT_CONF_KEYS`` then the
    command line.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f'No such configuration file: {path}')
    opt_keys: List[str] = []
    env_keys = environ.get(RELAXHMC_OPT_CONF_KEYS)
    if env_keys:
        opt_keys += shlex.split(env_keys)
    opt_keys += list(opt_conf_keys)
    if path.suffix == '.json':
        if opt_conf_keys:
            raise ConfigError(
                'optional configurations need a Rose format (.conf) file'
            )
        if opt_keys:
            LOG.warning(
                f'{RELAXHMC_OPT_CONF_KEYS} ignored for JSON configuration'
            )
        try:
            doc = json.loads(path.read_text())
        except ValueError as exc:
            raise ConfigValidationError(
                [(getattr(exc, 'lineno', None), f'invalid JSON: {exc}')],
                source=str(path),
            ) from None
        if not isinstance(doc, dict):
            raise ConfigValidationError(
                [(None, 'the document must be a JSON object')],
                source=str(path),
            )
        return json_to_node(doc)
    try:
        config_tree = ConfigTreeLoader().load(
            str(path.parent.resolve()), path.name, opt_keys=opt_keys
        )
    except Exception as exc:
        raise ConfigError(f'Cannot load {path}: {exc}') from None
    return config_tree.node


def _items(node: ConfigNode):
    """Yield ``(section, key, value)`` for every item switched on."""
    for key, sub in sorted(node.value.items()):
        if sub.state != ConfigNode.STATE_NORMAL:
            continue
        if isinstance(sub.value, dict):
            for sub_key, item in sorted(sub.value.items()):
                if item.state == ConfigNode.STATE_NORMAL:
                    yield key, sub_key, item.value
        else:
            yield None, key, sub.value


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _check_lambda_grid(value) -> Optional[str]:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        value = [value]
    if not isinstance(value, (list, tuple)) or not value:
        return 'lambda_grid must be a non-empty list of numbers'
    if not all(
        isinstance(lam, (int, float)) and not isinstance(lam, bool)
        for lam in value
    ):
        return 'lambda_grid must be a non-empty list of numbers'
    if not all(lam > 0 and math.isfinite(lam) for lam in value):
        return 'lambda_grid must be positive'
    if any(later >= earlier for earlier, later in zip(value, value[1:])):
        return 'lambda_grid must be strictly decreasing'
    return None


def resolve_config(
    node: ConfigNode,
    experiment: Optional[str] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    lines: Optional[LineLookup] = None,
    source: Optional[str] = None,
    environ: Mapping[str, str] = os.environ,
) -> ExperimentConfig:
    """Validate a config node against the catalog and resolve defaults.

    Precedence (lowest first): catalog defaults, the node (file, optional
    configurations and defines), then ``overrides`` from command line flags.
    Every problem is collected before raising.

    Raises:
        ConfigValidationError:
            Listing every problem found.
        UnknownExperimentError:
            If the experiment is not in the catalog.

    """
    overrides = dict(overrides or {})
    lines = lines or {}
    problems: Problems = []
    parser = Parser()
    top: Dict[str, Any] = {}
    sections: Dict[str, Dict[str, Any]] = {name: {} for name in SECTIONS}

    for section, key, raw in _items(node):
        line = lines.get((section, key))
        if section is None and key not in TOP_LEVEL_KEYS:
            problems.append((line, f'unknown setting {key}'))
            continue
        if section is not None and section not in SECTIONS:
            problems.append((
                lines.get((None, section)), f'unknown section [{section}]'
            ))
            continue
        string_ok = (
            key in STRING_KEYS if section is None
            else section == 'model' and key in MODEL_STRING_KEYS
        )
        try:
            value = parser.parse_item(str(raw), string_ok=string_ok)
        except Exception as exc:
            label = f'[{section}]{key}' if section else key
            problems.append((line, f'{label}: {str(exc).splitlines()[0]}'))
            continue
        if section is None:
            top[key] = value
        else:
            sections[section][key] = value

    name = experiment or top.get('experiment')
    if not name:
        problems.append((None, 'no experiment given'))
        raise ConfigValidationError(problems, source)
    defaults = get_experiment(str(name))

    def _pick(key, default):
        if key in overrides:
            return overrides[key], None
        if key in top:
            return top[key], lines.get((None, key))
        return default, None

    lambda_grid, line = _pick('lambda_grid', list(defaults.lambda_grid))
    msg = _check_lambda_grid(lambda_grid)
    if msg:
        problems.append((line, msg))
    elif not isinstance(lambda_grid, (list, tuple)):
        lambda_grid = [lambda_grid]

    env_seed = environ.get(RELAXHMC_SEED)
    seed_default: Any = 0
    if env_seed is not None:
        try:
            seed_default = int(env_seed)
        except ValueError:
            problems.append(
                (None, f'{RELAXHMC_SEED} must be an integer, got {env_seed}')
            )
    seed, line = _pick('seed', seed_default)
    if not _is_int(seed) or seed < 0:
        problems.append((line, 'seed must be a non-negative integer'))
    replicates, line = _pick('replicates', defaults.replicates)
    if not _is_int(replicates) or replicates < 1:
        problems.append((line, 'replicates must be >= 1'))
    jobs, line = _pick('jobs', 1)
    if not _is_int(jobs) or jobs < 1:
        problems.append((line, 'jobs must be >= 1'))
    grid, line = _pick('grid', defaults.grid)
    if grid is not None and (not _is_int(grid) or grid < 16):
        problems.append((line, 'grid must be an integer >= 16'))
    output_dir, line = _pick('output_dir', '.')
    if not isinstance(output_dir, str) or not output_dir:
        problems.append((line, 'output_dir must be a path'))

    # sampler settings
    hmc = {**defaults.hmc, **sections['hmc']}
    if 'seed' in sections['hmc']:
        problems.append((
            lines.get(('hmc', 'seed')),
            '[hmc]seed is not allowed, set seed at the top level',
        ))
        hmc.pop('seed')
    if 'n_iterations' in overrides:
        hmc['n_iterations'] = overrides['n_iterations']
        if (
            'n_burnin' not in sections['hmc']
            and _is_int(hmc['n_iterations'])
            and hmc.get('n_burnin', HmcConfig.n_burnin) >= hmc['n_iterations']
        ):
            hmc['n_burnin'] = hmc['n_iterations'] // 2
    for key, msg in HmcConfig.check(hmc):
        problems.append((lines.get(('hmc', key)), f'[hmc]{msg}'))

    # model parameters
    model = {**defaults.model_params, **sections['model']}
    if 'n' in overrides:
        if 'n' in MODEL_DEFAULTS[defaults.model]:
            model['n'] = overrides['n']
        else:
            problems.append(
                (None, f'--n does not apply to {defaults.name}')
            )
    known = MODEL_DEFAULTS[defaults.model]
    for key in sorted(set(model) - set(known)):
        problems.append((
            lines.get(('model', key)),
            f'[model]{key} is not a parameter of {defaults.model.value}',
        ))
        model.pop(key)

    if problems:
        raise ConfigValidationError(problems, source)

    config = ExperimentConfig(
        experiment=defaults.name,
        lambda_grid=tuple(float(lam) for lam in lambda_grid),
        hmc=hmc,
        model=model,
        replicates=replicates,
        output_dir=output_dir,
        seed=seed,
        jobs=jobs,
        grid=grid,
    )
    try:
        make_model(config.model_spec(), config.lambda_grid[0])
    except InvalidArgumentError as exc:
        raise ConfigValidationError([(None, f'[model]: {exc}')], source)
    return config


def load_experiment_config(
    path: Optional[Path] = None,
    experiment: Optional[str] = None,
    opt_conf_keys: Iterable[str] = (),
    defines: Iterable[str] = (),
    overrides: Optional[Mapping[str, Any]] = None,
    environ: Mapping[str, str] = os.environ,
) -> ExperimentConfig:
    """Load, override and validate an experiment configuration."""
    defines = list(defines)
    invalid_defines_check(defines)
    if path is None:
        if opt_conf_keys:
            raise ConfigError('optional configurations need a config file')
        node, lines, source = ConfigNode(), {}, None
    else:
        path = Path(path)
        node = load_config_node(path, opt_conf_keys, environ)
        lines, source = source_lines(path), str(path)
    apply_defines(node, defines)
    return resolve_config(
        node, experiment, overrides, lines, source, environ
    )


def config_to_node(config: ExperimentConfig) -> ConfigNode:
    """The resolved configuration as a Rose config node."""
    node = ConfigNode()
    for key, value in config.to_dict().items():
        if isinstance(value, dict):
            node.set([key], {})
            for sub_key, sub_value in value.items():
                node.set([key, sub_key], repr(sub_value))
        else:
            node.set([key], repr(value))
    return node


def timestamp() -> str:
    return DateTimeOperator().process_time_point_str(
        print_format='%Y%m%dT%H%M%S%z'
    )


def dump_config_log(
    out_dir: Path, node: ConfigNode, stamp: Optional[str] = None
) -> str:
    """Dump a config node to a timestamped file in ``<out_dir>/log``.

    Returns:
        The dump file path relative to ``out_dir``.

    """
    dumper = ConfigDumper()
    rel_path = f'log/{stamp or timestamp()}-experiment.conf'
    fpath = Path(out_dir) / rel_path
    fpath.parent.mkdir(exist_ok=True, parents=True)
    dumper.dump(node, str(fpath))
    return rel_path
