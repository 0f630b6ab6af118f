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
"""Chain diagnostics and convergence rate fits."""

from dataclasses import dataclass
import math
from typing import Callable, NamedTuple, Tuple, Union

import numpy as np
from scipy.stats import linregress, rankdata

from relaxhmc import LOG
from relaxhmc.exceptions import InsufficientDataError, InvalidArgumentError
from relaxhmc.hmc import Chain
from relaxhmc.oracles import OracleResult

MIN_SERIES_LENGTH = 10


class EssEstimate(NamedTuple):
    value: float
    degenerate: bool = False


class ViolationSummary(NamedTuple):
    mean: float
    q025: float
    q975: float


@dataclass(frozen=True)
class RateFit:
    """Least squares fit of ``log(error)`` against ``log(lambda)``.

    ``bound_ratios`` holds ``error / (lambda / |log lambda|^s)`` for each
    kept pair.
    """

    lambdas: Tuple[float, ...]
    errors: Tuple[float, ...]
    slope: float
    intercept: float
    r_squared: float
    bound_ratios: Tuple[float, ...]
    s: int = 1


def _autocovariance(series: np.ndarray) -> np.ndarray:
    """Biased autocovariance at every lag via the FFT."""
    size = len(series)
    centred = series - series.mean()
    padded = 2 ** int(math.ceil(math.log2(2 * size)))
    spectrum = np.fft.rfft(centred, n=padded)
    acov = np.fft.irfft(spectrum * np.conjugate(spectrum), n=padded)[:size]
    return acov / size


def effective_sample_size(series) -> EssEstimate:
    """Effective sample size with Geyer's initial monotone sequence.

    The estimate is clamped to ``[1, n]``. A constant series has no
    autocorrelation to speak of and returns ``n`` flagged as degenerate.

    Examples:
        >>> effective_sample_size(np.ones(20))
        EssEstimate(value=20.0, degenerate=True)

    """
    series = np.asarray(series, dtype=float).ravel()
    size = len(series)
    if size < MIN_SERIES_LENGTH:
        raise InvalidArgumentError(
            f'ESS needs at least {MIN_SERIES_LENGTH} draws, got {size}'
        )
    if not np.all(np.isfinite(series)):
        raise InvalidArgumentError('ESS needs finite draws')
    acov = _autocovariance(series)
    if not acov[0] > 1e-300 or np.ptp(series) == 0:
        LOG.warning(f'constant series of {size} draws, ESS set to {size}')
        return EssEstimate(float(size), True)
    var_plus = acov[0]
    mean_var = var_plus * size / (size - 1.0)
    rho = np.zeros(size)
    rho_even = 1.0
    rho[0] = rho_even
    rho_odd = 1.0 - (mean_var - acov[1]) / var_plus
    rho[1] = rho_odd
    # initial positive sequence
    lag = 1
    while lag < size - 2 and rho_even + rho_odd >= 0.0:
        rho_even = 1.0 - (mean_var - acov[lag + 1]) / var_plus
        rho_odd = 1.0 - (mean_var - acov[lag + 2]) / var_plus
        rho[lag + 1] = rho_even
        if rho_even + rho_odd >= 0:
            rho[lag + 2] = rho_odd
        lag += 2
    max_lag = lag
    # initial monotone sequence
    lag = 1
    while lag <= max_lag - 2:
        if rho[lag + 1] + rho[lag + 2] > rho[lag - 1] + rho[lag]:
            rho[lag + 1] = 0.5 * (rho[lag - 1] + rho[lag])
            rho[lag + 2] = rho[lag + 1]
        lag += 2
    tau = -1.0 + 2.0 * np.sum(rho[:max_lag]) + np.sum(
        rho[max_lag + 1:max_lag + 2]
    )
    value = size / tau if tau > 0 else float(size)
    return EssEstimate(float(min(max(value, 1.0), size)))


def ess(series) -> float:
    return effective_sample_size(series).value


def mcse(series) -> float:
    """Monte Carlo standard error of the mean of a series."""
    series = np.asarray(series, dtype=float).ravel()
    return float(np.std(series, ddof=1) / math.sqrt(ess(series)))


def violation_summary(
    chain: Union[Chain, np.ndarray]
) -> ViolationSummary:
    """Mean and 95% interval of the per-draw constraint distance.

    Examples:
        >>> violation_summary(np.zeros(5))
        ViolationSummary(mean=0.0, q025=0.0, q975=0.0)

    """
    values = np.asarray(
        chain.violations if isinstance(chain, Chain) else chain, dtype=float
    ).ravel()
    if values.size == 0:
        raise InvalidArgumentError('no draws to summarise')
    low, high = np.quantile(values, [0.025, 0.975])
    return ViolationSummary(float(values.mean()), float(low), float(high))


def chain_expectation(chain: Union[Chain, np.ndarray], g: Callable) -> float:
    samples = chain.samples if isinstance(chain, Chain) else chain
    samples = np.asarray(samples, dtype=float)
    values = np.asarray(g(samples), dtype=float)
    if values.shape != samples.shape[:-1]:
        values = np.array([float(g(point)) for point in samples])
    return float(values.mean())


def expectation_diff(
    chain: Union[Chain, np.ndarray], g: Callable, oracle: OracleResult
) -> float:
    """``|mean of g over the chain - oracle value|``."""
    if not math.isfinite(oracle.value):
        raise InvalidArgumentError('the oracle value is not finite')
    return abs(chain_expectation(chain, g) - oracle.value)


def rate_bound(lam: float, s: int = 1) -> float:
    """``lambda / |log lambda|^s``.

    Examples:
        >>> round(rate_bound(math.exp(-2.0), s=1), 12) == round(
        ...     math.exp(-2.0) / 2, 12)
        True

    """
    return lam / abs(math.log(lam)) ** s


def fit_rate(lambdas, errors, s: int = 1) -> RateFit:
    """Fit ``error ~ C lambda^slope`` on a decreasing lambda grid.

    Non-positive errors are dropped with a warning.

    Raises:
        InsufficientDataError:
            If fewer than three pairs remain.

    Examples:
        >>> fit = fit_rate([1e-1, 1e-2, 1e-3], [2e-1, 2e-2, 2e-3])
        >>> round(fit.slope, 9), round(fit.r_squared, 9)
        (1.0, 1.0)

    """
    lambdas = np.asarray(lambdas, dtype=float).ravel()
    errors = np.asarray(errors, dtype=float).ravel()
    if lambdas.shape != errors.shape:
        raise InvalidArgumentError('need one error per lambda')
    if not np.all(lambdas > 0) or np.any(np.diff(lambdas) >= 0):
        raise InvalidArgumentError(
            'lambdas must be positive and strictly decreasing'
        )
    keep = np.isfinite(errors) & (errors > 0)
    if not np.all(keep):
        LOG.warning(
            f'dropping {int((~keep).sum())} non-positive error(s) at'
            f' lambda = {", ".join(f"{lam:g}" for lam in lambdas[~keep])}'
        )
    lambdas, errors = lambdas[keep], errors[keep]
    if len(lambdas) < 3:
        raise InsufficientDataError(
            f'a rate fit needs 3 positive errors, got {len(lambdas)}'
        )
    fit = linregress(np.log(lambdas), np.log(errors))
    with np.errstate(divide='ignore'):
        ratios = errors / (lambdas / np.abs(np.log(lambdas)) ** s)
    return RateFit(
        tuple(lambdas.tolist()),
        tuple(errors.tolist()),
        float(fit.slope),
        float(fit.intercept),
        float(fit.rvalue ** 2),
        tuple(ratios.tolist()),
        s,
    )


def auc(scores, labels) -> float:
    """Area under the ROC curve by the rank sum statistic.

    Examples:
        >>> auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1])
        0.75

    """
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels).ravel().astype(bool)
    if scores.shape != labels.shape:
        raise InvalidArgumentError('need one label per score')
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise InvalidArgumentError('AUC needs both positive and negative')
    ranks = rankdata(scores)
    stat = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(stat / (n_pos * n_neg))
