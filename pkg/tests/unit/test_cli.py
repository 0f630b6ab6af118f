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
"""Unit tests for the relaxhmc command line."""

import json

import pytest
from pytest import param

from relaxhmc import LOG
from relaxhmc.cli import get_option_parser, get_overrides, main
from relaxhmc.config import CATALOG
from relaxhmc.exceptions import UnknownExperimentError


def test_get_overrides():
    opts, _ = get_option_parser().parse_args([
        '-l', '1e-2,1e-3', '--iterations', '100', '--seed', '4', '-j', '2',
    ])
    assert get_overrides(opts) == {
        'lambda_grid': [1e-2, 1e-3],
        'n_iterations': 100,
        'seed': 4,
        'jobs': 2,
    }


def test_list(relaxhmc_cli):
    result = relaxhmc_cli('list')
    assert result.ret == 0
    for name in CATALOG:
        assert name in result.out


@pytest.mark.parametrize(
    'args',
    [
        param([], id='no-command'),
        param(['sample'], id='bad-command'),
        param(['run', 'torus', 'circle'], id='too-many-args'),
        param(['run', 'torus', '--lambda', '1e-2,big'], id='bad-lambda'),
        param(['run', 'torus', '--seed', 'x'], id='bad-seed'),
    ]
)
def test_usage_errors(args, capsys):
    with pytest.raises(SystemExit) as exc:
        main(args)
    assert exc.value.code == 2
    assert 'Usage' in capsys.readouterr().err


def test_unknown_experiment(relaxhmc_cli):
    result = relaxhmc_cli('run cube')
    assert result.ret == 2
    assert 'UnknownExperimentError' in result.err
    assert 'Unknown experiment "cube"' in result.err


@pytest.mark.parametrize(
    'args, message',
    [
        param('run torus --replicates 0', 'replicates must be >= 1',
              id='replicates'),
        param('run torus --lambda 1e-3,1e-2',
              'lambda_grid must be strictly decreasing', id='lambda-order'),
        param('run torus -D bad', 'invalid define: bad', id='define'),
        param('run torus --n 10', '--n does not apply to torus', id='n'),
        param('validate', 'validate needs a configuration file',
              id='validate-no-file'),
    ]
)
def test_config_errors(relaxhmc_cli, args, message):
    result = relaxhmc_cli(args)
    assert result.ret == 1
    assert message in result.err


def test_debug_raises():
    """Twice verbose shows the traceback."""
    level = LOG.level
    try:
        with pytest.raises(UnknownExperimentError):
            main(['run', 'cube', '-vv'])
    finally:
        LOG.setLevel(level)


def test_log_to_stderr(relaxhmc_cli, tmp_path):
    """Library warnings reach stderr and the handler goes away after."""
    handlers = list(LOG.handlers)
    result = relaxhmc_cli(
        f"run gaussian-inequality --iterations 40 --out {tmp_path}"
        " -D '[hmc]n_burnin=20' -D '[hmc]adapt_mass=true'"
    )
    assert result.ret == 0
    assert 'WARNING - 20 warmup iterations are too few' in result.err
    assert LOG.handlers == handlers


def test_debug_log_to_stderr(relaxhmc_cli, tmp_path):
    level = LOG.level
    result = relaxhmc_cli(
        f"run gaussian-inequality --iterations 60 --out {tmp_path} -vv"
        " -D '[hmc]n_burnin=40' -D '[hmc]adapt_mass=true'"
    )
    assert result.ret == 0
    assert 'DEBUG - mass from warmup iterations 20 to 34' in result.err
    assert LOG.level == level


def test_validate(relaxhmc_cli, tmp_path):
    path = tmp_path / 'exp.json'
    path.write_text(json.dumps({
        'experiment': 'simplex', 'lambda_grid': [1e-1, 1e-2],
    }))
    result = relaxhmc_cli(f'validate {path} -D seed=6 --replicates 2')
    assert result.ret == 0
    resolved = json.loads(result.out)
    assert resolved['experiment'] == 'simplex'
    assert resolved['lambda_grid'] == [0.1, 0.01]
    assert resolved['seed'] == 6
    assert resolved['replicates'] == 2
    assert resolved['hmc']['integration_time'] == 1.0
    assert 'seed' not in resolved['hmc']


def test_validate_config_option(relaxhmc_cli, tmp_path):
    """The file may also be given with --config."""
    path = tmp_path / 'exp.json'
    path.write_text('{"experiment": "torus"}')
    result = relaxhmc_cli(f'validate --config {path}')
    assert result.ret == 0
    assert json.loads(result.out)['lambda_grid'] == [0.1, 0.01, 0.001]


def test_validate_reports_file_errors(relaxhmc_cli, tmp_path):
    path = tmp_path / 'exp.json'
    path.write_text('{\n    "experiment": "torus",\n    "jobs": 0\n}\n')
    result = relaxhmc_cli(f'validate {path}')
    assert result.ret == 1
    assert 'line 3: jobs must be >= 1' in result.err
