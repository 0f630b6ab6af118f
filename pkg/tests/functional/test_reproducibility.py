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
"""Run reproducibility and replay."""

from pathlib import Path

import pytest

RUN = (
    'run circle-benchmark --lambda 1e-2 --replicates 2 --iterations 200'
    " -D '[hmc]max_leapfrog=40'"
)


@pytest.fixture
def run_twice(relaxhmc_cli, read_results, tmp_path):
    """Run the same command into two output directories."""
    def _inner(first, second):
        outputs = []
        for name, args in (('one', first), ('two', second)):
            out_dir = tmp_path / name
            result = relaxhmc_cli(f'{args} --out {out_dir}')
            assert result.ret == 0, result.err
            outputs.append(read_results(out_dir))
        return outputs
    return _inner


def test_same_seed_same_samples(run_twice):
    one, two = run_twice(f'{RUN} --seed 3', f'{RUN} --seed 3')
    assert one.samples_text == two.samples_text


def test_other_seed_other_samples(run_twice):
    one, two = run_twice(f'{RUN} --seed 3', f'{RUN} --seed 4')
    assert one.samples_text != two.samples_text


def test_environment_seed(run_twice, monkeypatch):
    monkeypatch.setenv('RELAXHMC_SEED', '3')
    one, two = run_twice(RUN, f'{RUN} --seed 3')
    assert one.summary['seed'] == 3
    assert one.samples_text == two.samples_text


def test_parallel_chains(run_twice):
    """Worker processes do not change the chains."""
    one, two = run_twice(f'{RUN} --seed 5', f'{RUN} --seed 5 --jobs 2')
    assert one.samples_text == two.samples_text


def test_replay_resolved_config(run_twice, tmp_path):
    """config_resolved.json replays the run exactly."""
    first = tmp_path / 'one'
    one, two = run_twice(
        f'{RUN} --seed 9',
        f'run --config {first / "config_resolved.json"}',
    )
    assert one.samples_text == two.samples_text
    assert one.resolved == {**two.resolved, 'output_dir': str(first)}


def test_reporting(relaxhmc_cli, tmp_path):
    result = relaxhmc_cli(f'{RUN} --out {tmp_path}')
    assert result.ret == 0
    assert (
        'Running circle-benchmark over lambda = 0.01 with 2 replicate(s)'
        in result.out
    )
    assert str(Path(tmp_path, 'summary.json')) in result.out
    quiet = relaxhmc_cli(f'{RUN} --out {tmp_path} -q')
    assert 'Running' not in quiet.out
