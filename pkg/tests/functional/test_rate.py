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
"""Quadrature convergence rate experiments."""

import pytest

from relaxhmc.experiments import EXTRAS_KEYS


def _errors(summary):
    return [item['error'] for item in summary['per_lambda']]


@pytest.mark.slow
def test_positive_measure_rate(mod_run):
    """The relaxation error falls at least as fast as sqrt(lambda)."""
    results = mod_run('rate-positive-measure')
    summary = results.summary
    assert results.rows == []
    assert summary['baseline'] is None
    errors = _errors(summary)
    assert len(errors) == 5
    assert all(later < earlier for earlier, later in zip(errors, errors[1:]))
    fit = summary['rate_fit']
    assert fit['s'] == 0
    assert fit['slope'] >= 0.5
    assert fit['bound_ratios'] == pytest.approx(
        [err / lam for err, lam in zip(errors, summary['lambdas'])]
    )


def test_positive_measure_reference(mod_run):
    """The reference is the truncated normal mean."""
    summary = mod_run('rate-positive-measure').summary
    extras = summary['extras']
    assert extras['reference_method'] == 'analytic'
    assert list(extras) == list(EXTRAS_KEYS)
    assert extras['tail_fraction'] is None
    assert extras['reference_error_bound'] == 0.0
    assert extras['reference_value'] == pytest.approx(0.9627, abs=1e-3)
    for item in summary['per_lambda']:
        assert item['oracle_value'] == extras['reference_value']
        assert item['accept_rate'] is None


@pytest.mark.slow
def test_zero_measure_rate(mod_run):
    summary = mod_run('rate-zero-measure').summary
    assert summary['extras']['reference_method'] == 'quadrature'
    errors = _errors(summary)
    assert errors[-1] < errors[0]
    assert summary['rate_fit']['s'] == 1
    assert summary['rate_fit']['slope'] > 0.0


def test_zero_measure_violation(mod_run):
    """On the circle the mean relaxed distance is about lambda."""
    for item in mod_run('rate-zero-measure').summary['per_lambda']:
        lam = item['lambda']
        assert 0.5 * lam < item['violation']['mean'] < 1.5 * lam


def test_rate_needs_three_lambdas(mod_run):
    """Too short a grid gives no fit."""
    summary = mod_run('rate-zero-measure --lambda 1e-2,1e-3').summary
    assert summary['rate_fit'] is None
    assert len(summary['per_lambda']) == 2
