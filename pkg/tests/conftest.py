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

import csv
import json
from pathlib import Path
from shlex import split
from types import SimpleNamespace

import numpy as np
import pytest

from relaxhmc.cli import main as cli_main
from relaxhmc.config import RELAXHMC_OPT_CONF_KEYS, RELAXHMC_SEED
from relaxhmc.targets import ModelSpec, make_model


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    """Keep the developer's environment out of the tests."""
    monkeypatch.delenv(RELAXHMC_SEED, raising=False)
    monkeypatch.delenv(RELAXHMC_OPT_CONF_KEYS, raising=False)


@pytest.fixture(scope='module')
def monkeymodule():
    """Make monkeypatching available in a module scope."""
    with pytest.MonkeyPatch.context() as mp:
        yield mp


@pytest.fixture
def circle_target():
    """The circle benchmark target at a given lambda."""
    def _inner(lam=1e-3, **params):
        params = {
            'F': [np.sqrt(0.5), np.sqrt(0.5)], 'sigma2': 0.5, **params
        }
        return make_model(ModelSpec('sphere-gaussian', params), lam)
    return _inner


def _run_cli(capsys, args):
    if isinstance(args, str):
        args = split(args)
    ret = cli_main(list(args))
    out, err = capsys.readouterr()
    return SimpleNamespace(ret=ret, out=out, err=err)


@pytest.fixture
def relaxhmc_cli(capsys):
    """Run the relaxhmc command line, returning (ret, out, err)."""
    def _inner(args):
        return _run_cli(capsys, args)
    return _inner


def read_outputs(out_dir):
    """Load the result files of a run."""
    out_dir = Path(out_dir)
    with open(out_dir / 'samples.csv', newline='') as handle:
        rows = list(csv.reader(handle))
    return SimpleNamespace(
        out_dir=out_dir,
        header=rows[0],
        rows=rows[1:],
        summary=json.loads((out_dir / 'summary.json').read_text()),
        resolved=json.loads((out_dir / 'config_resolved.json').read_text()),
        samples_text=(out_dir / 'samples.csv').read_text(),
    )


@pytest.fixture
def read_results():
    return read_outputs


@pytest.fixture(scope='module')
def mod_run(tmp_path_factory, monkeymodule):
    """Run an experiment once per module and load its outputs.

    Call with the command line after ``relaxhmc run``; ``--out`` is added.
    """
    monkeymodule.delenv(RELAXHMC_SEED, raising=False)
    cache = {}

    def _inner(args):
        if args not in cache:
            out_dir = tmp_path_factory.mktemp('run')
            ret = cli_main(['run', *split(args), '--out', str(out_dir)])
            assert ret == 0
            cache[args] = read_outputs(out_dir)
        return cache[args]
    return _inner
