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
"""relaxhmc run EXPERIMENT [OPTIONS]
       relaxhmc validate FILE [OPTIONS]
       relaxhmc list

Sample constraint relaxed posteriors and check them against references.

run
    Run a catalog experiment. Settings come from (lowest precedence first)
    the catalog, the --config file, its optional configurations, --define
    items and the dedicated options below. Writes to the output directory:

    samples.csv
        replicate, lambda, iteration, theta_0 ... theta_{r-1}, distance,
        accepted; one row per kept draw, floats with 17 significant digits.
        Rate experiments write the header only.
    summary.json
        Per lambda acceptance, step size, ESS, violation summary,
        expectation differences, the rate fit and experiment extras.
    config_resolved.json
        The resolved configuration, pass it back with --config to replay
        the run exactly.

validate
    Check a JSON or Rose format configuration and print it resolved.

list
    Print the experiment catalog.

Exit status: 0 on success, 1 for configuration or run errors, 2 for an
unknown experiment or bad usage.
"""

import json
import logging
from optparse import OptionGroup, OptionParser, Values
import sys
from typing import Any, Dict, List, Optional

from ansimarkup import parse as cparse
from metomi.rose.reporter import Reporter

from relaxhmc import LOG, __version__
from relaxhmc.config import CATALOG, load_experiment_config
from relaxhmc.exceptions import RelaxError, UnknownExperimentError

EXC_EXIT = cparse('<red><bold>{name}: </bold>{exc}</red>')
LOG_FORMAT = '%(levelname)s - %(message)s'

COMMANDS = ('run', 'validate', 'list')


def _float_list(value: str) -> List[float]:
    """Parse a comma separated list of numbers.

    Examples:
        >>> _float_list('1e-3, 1e-4,1e-5')
        [0.001, 0.0001, 1e-05]

    """
    return [float(item) for item in value.split(',') if item.strip()]


def get_option_parser() -> OptionParser:
    parser = OptionParser(usage=__doc__, version=__version__)
    parser.add_option(
        "--config", "-c",
        help="Experiment configuration, JSON or Rose format (.conf).",
        metavar="FILE",
        dest="config_file")
    parser.add_option(
        "--define", "-D",
        help=(
            "Override a configuration item, '[section]key=value' or"
            " 'key=value'. Can be used more than once."
        ),
        action="append",
        metavar="[SECTION]KEY=VALUE",
        default=[],
        dest="defines")
    parser.add_option(
        "--opt-conf-key", "-O",
        help=(
            "Use the optional configuration opt/<name>-KEY.conf of a Rose"
            " format configuration. Can be used more than once."
        ),
        action="append",
        metavar="KEY",
        default=[],
        dest="opt_conf_keys")
    parser.add_option(
        "--verbose", "-v",
        help="Report more, twice to show tracebacks.",
        action="count",
        default=0,
        dest="verbosity")
    parser.add_option(
        "--quiet", "-q",
        help="Report less.",
        action="count",
        default=0,
        dest="quietness")

    run_options = OptionGroup(parser, 'Run Options')
    run_options.add_option(
        "--lambda", "-l",
        help="Comma separated, strictly decreasing relaxation parameters.",
        metavar="LIST",
        dest="lambda_grid")
    run_options.add_option(
        "--iterations",
        help=(
            "HMC iterations per chain including burn-in (the burn-in"
            " defaults to half of these if it would not fit)."
        ),
        type="int",
        metavar="N",
        dest="n_iterations")
    run_options.add_option(
        "--seed",
        help="Base seed, replicate i uses seed + i. Default $RELAXHMC_SEED.",
        type="int",
        metavar="N",
        dest="seed")
    run_options.add_option(
        "--replicates",
        help="Independent chains per lambda.",
        type="int",
        metavar="N",
        dest="replicates")
    run_options.add_option(
        "--n",
        help="Sample size of the Gaussian inequality model.",
        type="int",
        metavar="N",
        dest="n")
    run_options.add_option(
        "--jobs", "-j",
        help="Worker processes for the chains.",
        type="int",
        metavar="N",
        dest="jobs")
    run_options.add_option(
        "--out", "-o",
        help="Output directory.",
        metavar="DIR",
        dest="output_dir")
    parser.add_option_group(run_options)
    return parser


def get_overrides(opts: Values) -> Dict[str, Any]:
    """The settings given by dedicated command line options."""
    overrides: Dict[str, Any] = {}
    if opts.lambda_grid:
        overrides['lambda_grid'] = _float_list(opts.lambda_grid)
    for key in ('n_iterations', 'seed', 'replicates', 'n', 'jobs',
                'output_dir'):
        value = getattr(opts, key)
        if value is not None:
            overrides[key] = value
    return overrides


def list_experiments() -> str:
    width = max(len(name) for name in CATALOG)
    return '\n'.join(
        f'{name:<{width}}  {item.description}'
        for name, item in CATALOG.items()
    )


def run(
    opts: Values,
    args: List[str],
    overrides: Dict[str, Any],
    reporter: Reporter,
) -> int:
    from relaxhmc.experiments import run_experiment
    config = load_experiment_config(
        opts.config_file,
        args[0] if args else None,
        opt_conf_keys=opts.opt_conf_keys,
        defines=opts.defines,
        overrides=overrides,
    )
    run_experiment(config, reporter)
    return 0


def validate(
    opts: Values, args: List[str], overrides: Dict[str, Any]
) -> int:
    path = args[0] if args else opts.config_file
    if not path:
        raise RelaxError('validate needs a configuration file')
    config = load_experiment_config(
        path,
        opt_conf_keys=opts.opt_conf_keys,
        defines=opts.defines,
        overrides=overrides,
    )
    print(json.dumps(config.to_dict(), indent=2))
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    """Parse the command line and dispatch, returning the exit status."""
    parser = get_option_parser()
    opts, args = parser.parse_args(
        sys.argv[1:] if argv is None else argv
    )
    if not args or args[0] not in COMMANDS:
        parser.error(f'command must be one of: {", ".join(COMMANDS)}')
    command, args = args[0], args[1:]
    if len(args) > 1:
        parser.error(f'{command}: too many arguments')
    try:
        overrides = get_overrides(opts)
    except ValueError:
        parser.error(f'--lambda: not a list of numbers: {opts.lambda_grid}')
    verbosity = opts.verbosity - opts.quietness
    reporter = Reporter(verbosity)
    level = LOG.level
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    LOG.addHandler(handler)
    if verbosity > 1:
        LOG.setLevel(logging.DEBUG)
    elif verbosity < 0:
        LOG.setLevel(logging.ERROR)
    try:
        if command == 'list':
            print(list_experiments())
            return 0
        if command == 'run':
            return run(opts, args, overrides, reporter)
        return validate(opts, args, overrides)
    except RelaxError as exc:
        if opts.verbosity > 1:
            raise exc
        print(
            EXC_EXIT.format(
                name=exc.__class__.__name__,
                exc=exc
            ),
            file=sys.stderr
        )
        return 2 if isinstance(exc, UnknownExperimentError) else 1
    finally:
        LOG.removeHandler(handler)
        LOG.setLevel(level)
