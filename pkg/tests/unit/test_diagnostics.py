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
"""Unit tests for chain diagnostics and rate fits."""

import math

import numpy as np
import pytest
from pytest import param

from relaxhmc.diagnostics import (
    auc,
    chain_expectation,
    effective_sample_size,
    expectation_diff,
    fit_rate,
    mcse,
    rate_bound,
    violation_summary,
)
from relaxhmc.exceptions import InsufficientDataError, InvalidArgumentError
from relaxhmc.oracles import OracleMethod, OracleResult


def _ar1(phi, size, seed):
    rng = np.random.default_rng(seed)
    noise = rng.normal(size=size)
    series = np.empty(size)
    series[0] = noise[0] / math.sqrt(1 - phi ** 2)
    for i in range(1, size):
        series[i] = phi * series[i - 1] + noise[i]
    return series


def test_ess_independent():
    series = np.random.default_rng(1).normal(size=10000)
    value = effective_sample_size(series).value
    assert 8000 < value <= 10000


def test_ess_autocorrelated():
    """An AR(1) chain has ESS near n (1 - phi) / (1 + phi)."""
    phi, size = 0.9, 20000
    estimate = effective_sample_size(_ar1(phi, size, seed=2))
    expect = size * (1 - phi) / (1 + phi)
    assert not estimate.degenerate
    assert 0.7 * expect < estimate.value < 1.4 * expect


@pytest.mark.parametrize(
    'scale, shift',
    [
        param(3.0, 0.0, id='scale'),
        param(1.0, -7.5, id='shift'),
        param(-0.01, 1e3, id='negate'),
    ]
)
def test_ess_affine_invariant(scale, shift):
    series = _ar1(0.6, 3000, seed=4)
    assert effective_sample_size(scale * series + shift).value == (
        pytest.approx(effective_sample_size(series).value, rel=1e-8)
    )


def test_ess_constant(caplog):
    estimate = effective_sample_size(np.full(50, 0.3))
    assert estimate.degenerate
    assert estimate.value == 50.0
    assert 'constant series' in caplog.text


@pytest.mark.parametrize(
    'series, match',
    [
        param(np.zeros(9), 'at least 10', id='short'),
        param([0.0] * 10 + [np.nan], 'finite', id='nan'),
    ]
)
def test_ess_invalid(series, match):
    with pytest.raises(InvalidArgumentError, match=match):
        effective_sample_size(series)


def test_mcse():
    series = np.random.default_rng(3).normal(size=4000)
    assert mcse(series) == pytest.approx(1 / math.sqrt(4000), rel=0.15)


def test_violation_summary():
    summary = violation_summary(np.arange(100) / 100)
    assert summary.mean == pytest.approx(0.495)
    assert summary.q025 == pytest.approx(0.02475)
    assert summary.q975 == pytest.approx(0.96525)


def test_violation_summary_empty():
    with pytest.raises(InvalidArgumentError):
        violation_summary(np.array([]))


def test_expectation_diff():
    samples = np.array([[0.0, 1.0], [2.0, 3.0]])
    assert chain_expectation(samples, lambda theta: theta[..., 1]) == 2.0
    oracle = OracleResult(1.5, 0.0, OracleMethod.ANALYTIC)
    assert expectation_diff(
        samples, lambda theta: theta[..., 1], oracle
    ) == pytest.approx(0.5)


def test_expectation_diff_infinite_oracle():
    oracle = OracleResult(math.inf, 0.0, OracleMethod.QUADRATURE)
    with pytest.raises(InvalidArgumentError, match='not finite'):
        expectation_diff(np.zeros((3, 1)), np.squeeze, oracle)


def test_fit_rate_bound_ratios():
    """Errors on the bound itself give unit ratios."""
    lambdas = [1e-1, 1e-2, 1e-3, 1e-4]
    errors = [rate_bound(lam) for lam in lambdas]
    fit = fit_rate(lambdas, errors)
    assert fit.bound_ratios == pytest.approx((1.0,) * 4)
    assert 1.0 < fit.slope < 1.5
    assert fit.r_squared > 0.99


@pytest.mark.parametrize(
    'coefficient, power',
    [
        param(0.3, 0.5, id='sqrt'),
        param(2.0, 1.5, id='super-linear'),
        param(1e-2, 0.25, id='slow'),
    ]
)
def test_fit_rate_recovers_power_law(coefficient, power):
    lambdas = np.array([1e-1, 3e-2, 1e-2, 3e-3, 1e-3])
    fit = fit_rate(lambdas, coefficient * lambdas ** power)
    assert fit.slope == pytest.approx(power, abs=1e-6)
    assert math.exp(fit.intercept) == pytest.approx(coefficient, rel=1e-6)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-9)


def test_fit_rate_drops_non_positive(caplog):
    fit = fit_rate([1e-1, 1e-2, 1e-3, 1e-4], [1e-1, 0.0, 1e-3, 1e-4])
    assert fit.lambdas == (1e-1, 1e-3, 1e-4)
    assert 'dropping 1 non-positive' in caplog.text


def test_fit_rate_too_few():
    with pytest.raises(InsufficientDataError, match='needs 3'):
        fit_rate([1e-1, 1e-2, 1e-3], [1e-1, 0.0, 1e-3])


@pytest.mark.parametrize(
    'lambdas, errors',
    [
        param([1e-3, 1e-2, 1e-1], [1.0, 1.0, 1.0], id='increasing'),
        param([1e-1, 1e-2], [1.0, 1.0, 1.0], id='lengths'),
        param([1e-1, 0.0, -1.0], [1.0, 1.0, 1.0], id='non-positive'),
    ]
)
def test_fit_rate_invalid(lambdas, errors):
    with pytest.raises(InvalidArgumentError):
        fit_rate(lambdas, errors)


@pytest.mark.parametrize(
    'scores, labels, expect',
    [
        param([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1], 1.0, id='separated'),
        param([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1], 0.0, id='reversed'),
        param([0.5] * 4, [0, 1, 0, 1], 0.5, id='ties'),
    ]
)
def test_auc(scores, labels, expect):
    assert auc(scores, labels) == pytest.approx(expect)


def test_auc_one_class():
    with pytest.raises(InvalidArgumentError, match='both'):
        auc([0.1, 0.2], [1, 1])
