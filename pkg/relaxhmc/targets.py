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
"""Unnormalised relaxed posterior densities and the model catalog.

The relaxed log density of a target is::

    log L(theta) + log pi(theta) - sum_j w_j |nu_j(theta)| / lambda_j
        [+ log J(theta) if the target carries the Jacobian factor]

and is ``-inf`` outside the target's support box.
"""

from dataclasses import dataclass, field
from enum import Enum
from functools import partial
import math
from typing import Any, Callable, Dict, Mapping, Optional, Tuple

import numpy as np
from scipy.special import xlogy

from relaxhmc.constraints import (
    Box,
    ConstraintKind,
    ConstraintSet,
    NormOrder,
    constraint_gradients,
    distance,
    eval_constraints,
    grad_log_jacobian,
    half_space,
    jacobian,
    log_jacobian_grid,
    simplex,
    sphere,
    torus,
)
from relaxhmc.exceptions import (
    InvalidArgumentError,
    NumericError,
    OutOfSupportError,
)


class ModelName(Enum):
    GAUSSIAN_INEQUALITY = 'gaussian-inequality'
    SPHERE_GAUSSIAN = 'sphere-gaussian'
    SPHERE_T = 'sphere-t'
    TORUS_UNIFORM = 'torus-uniform'
    SIMPLEX_TOY = 'simplex-toy'
    FACTOR_NETWORK = 'factor-network'


# Model parameters and their defaults, ``None`` means "derived".
MODEL_DEFAULTS: Dict[ModelName, Dict[str, Any]] = {
    ModelName.GAUSSIAN_INEQUALITY: {
        'n': 100,
        'ybar': None,
        'theta_true': 0.5,
        'data_seed': 0,
        'prior_variance': 1000.0,
        'upper': 1.0,
        'norm_order': 'L2',
        'weights': None,
    },
    ModelName.SPHERE_GAUSSIAN: {
        'F': None,
        'r': 3,
        'sigma2': 0.1,
        'weights': None,
    },
    ModelName.SPHERE_T: {
        'F': None,
        'r': 3,
        'sigma2': 0.1,
        'm': 3.0,
        'weights': None,
    },
    ModelName.TORUS_UNIFORM: {
        'weights': None,
    },
    ModelName.SIMPLEX_TOY: {
        'r': 3,
        'alpha': None,
        'weights': None,
    },
    ModelName.FACTOR_NETWORK: {
        'R': 10,
        'n': 5,
        'd': 3,
        'data_seed': 0,
        'data': None,
        'shrinkage': 'laplace',
        'laplace_scale': 1.0,
        'constrained': True,
        'mu_variance': 1.0,
        'v_variance': 1.0,
        'weights': None,
    },
}


@dataclass(frozen=True)
class ModelSpec:
    """A catalog model name with its parameters.

    Examples:
        >>> ModelSpec('sphere-t', {'m': 3}).name
        <ModelName.SPHERE_T: 'sphere-t'>
        >>> ModelSpec('sphere-t', {'nu': 3}).resolved()
        Traceback (most recent call last):
        relaxhmc.exceptions.InvalidArgumentError: ... unknown parameter(s): nu

    """

    name: ModelName
    parameters: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        try:
            object.__setattr__(self, 'name', ModelName(self.name))
        except ValueError:
            raise InvalidArgumentError(
                f'unknown model "{self.name}", choose from: '
                + ', '.join(item.value for item in ModelName)
            ) from None
        object.__setattr__(self, 'parameters', dict(self.parameters))

    def resolved(self) -> Dict[str, Any]:
        """Return the parameters merged over the model defaults."""
        defaults = MODEL_DEFAULTS[self.name]
        unknown = sorted(set(self.parameters) - set(defaults))
        if unknown:
            raise InvalidArgumentError(
                f'model {self.name.value}: unknown parameter(s): '
                + ', '.join(unknown)
            )
        return {**defaults, **self.parameters}


@dataclass(frozen=True)
class RelaxedTarget:
    """An unnormalised relaxed posterior over ``R^dim``.

    Args:
        dim:
            The ambient dimension ``r``.
        log_likelihood, grad_log_likelihood, log_prior, grad_log_prior:
            Base density terms and their gradients.
        constraint_set:
            The constraints to relax, ``None`` for an unconstrained target.
        lambdas:
            One relaxation scale shared by all constraints or one per
            constraint.
        jacobian_factor:
            Multiply the density by the co-area Jacobian.
        box:
            Support bounds ``(lower, upper)``, infinite entries allowed.
        initial_point:
            A point on or near ``D`` with finite density.
        name:
            Model name for messages and output.
        chart:
            Name of the tubular chart the relaxed quadrature oracle should
            use for this target (``circle``, ``sphere``, ``torus``,
            ``half-line``), ``None`` for a Cartesian box grid.
        metadata:
            Model facts used by oracles and experiments.

    """

    dim: int
    log_likelihood: Callable[[np.ndarray], Any]
    grad_log_likelihood: Callable[[np.ndarray], np.ndarray]
    log_prior: Callable[[np.ndarray], Any]
    grad_log_prior: Callable[[np.ndarray], np.ndarray]
    constraint_set: Optional[ConstraintSet] = None
    lambdas: Tuple[float, ...] = (1.0,)
    jacobian_factor: bool = False
    box: Optional[Box] = None
    initial_point: Optional[Tuple[float, ...]] = None
    name: str = ''
    chart: Optional[str] = None
    metadata: Mapping[str, Any] = field(default_factory=dict)
    _scales: np.ndarray = field(init=False, repr=False, compare=False)
    _lower: np.ndarray = field(init=False, repr=False, compare=False)
    _upper: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidArgumentError(f'dim must be >= 1, got {self.dim}')
        lambdas = _as_lambdas(self.lambdas)
        object.__setattr__(self, 'lambdas', lambdas)
        cset = self.constraint_set
        if cset is not None:
            if cset.dim != self.dim:
                raise InvalidArgumentError(
                    f'constraint set acts on dimension {cset.dim},'
                    f' target has dimension {self.dim}'
                )
            if len(lambdas) not in (1, cset.size):
                raise InvalidArgumentError(
                    f'expected 1 or {cset.size} relaxation scales,'
                    f' got {len(lambdas)}'
                )
            scales = np.asarray(cset.weights) / np.broadcast_to(
                np.asarray(lambdas), (cset.size,)
            )
        else:
            scales = np.zeros(0)
        if self.jacobian_factor and (
            cset is None or cset.kind != ConstraintKind.MEASURE_ZERO
        ):
            raise InvalidArgumentError(
                'the Jacobian factor needs a measure zero constraint set'
            )
        object.__setattr__(self, '_scales', scales)
        lower = np.full(self.dim, -np.inf)
        upper = np.full(self.dim, np.inf)
        if self.box is not None:
            lower = np.asarray(self.box[0], dtype=float)
            upper = np.asarray(self.box[1], dtype=float)
            if lower.shape != (self.dim,) or upper.shape != (self.dim,):
                raise InvalidArgumentError(
                    f'box bounds must have length {self.dim}'
                )
            if np.any(lower >= upper):
                raise InvalidArgumentError('box lower must be below upper')
        object.__setattr__(self, '_lower', lower)
        object.__setattr__(self, '_upper', upper)
        if self.initial_point is not None:
            point = tuple(float(x) for x in self.initial_point)
            if len(point) != self.dim:
                raise InvalidArgumentError(
                    f'initial point must have length {self.dim}'
                )
            object.__setattr__(self, 'initial_point', point)
        object.__setattr__(self, 'metadata', dict(self.metadata))

    @property
    def scales(self) -> np.ndarray:
        """The relaxation multipliers ``w_j / lambda_j``."""
        return self._scales

    @property
    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        return self._lower, self._upper

    def with_lambdas(self, lambdas) -> 'RelaxedTarget':
        """Return a copy with other relaxation scales."""
        return RelaxedTarget(
            self.dim,
            self.log_likelihood,
            self.grad_log_likelihood,
            self.log_prior,
            self.grad_log_prior,
            self.constraint_set,
            _as_lambdas(lambdas),
            self.jacobian_factor,
            self.box,
            self.initial_point,
            self.name,
            self.chart,
            self.metadata,
        )


def _as_lambdas(lambdas) -> Tuple[float, ...]:
    """Normalise relaxation scales to a tuple of positive floats.

    Examples:
        >>> _as_lambdas(0.1)
        (0.1,)
        >>> _as_lambdas([1e-3, 0.0])
        Traceback (most recent call last):
        relaxhmc.exceptions.InvalidArgumentError: ...

    """
    values = tuple(float(lam) for lam in np.atleast_1d(lambdas))
    if not values or not all(lam > 0 and math.isfinite(lam) for lam in (
        values
    )):
        raise InvalidArgumentError(
            f'relaxation scales must be positive and finite, got {lambdas}'
        )
    return values


def _check_point(target: RelaxedTarget, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (target.dim,):
        raise InvalidArgumentError(
            f'{target.name or "target"} has dimension {target.dim},'
            f' got a point of shape {theta.shape}'
        )
    if not in_support(target, theta):
        raise OutOfSupportError(
            f'point outside the support box of {target.name or "target"}'
        )
    return theta


def in_support(target: RelaxedTarget, theta) -> bool:
    theta = np.asarray(theta, dtype=float)
    return bool(
        np.all(theta >= target._lower) and np.all(theta <= target._upper)
    )


def relaxation(target: RelaxedTarget, theta):
    """Return ``-sum_j w_j |nu_j(theta)| / lambda_j``, broadcasting.

    Examples:
        >>> spec = ModelSpec('gaussian-inequality', {'n': 0})
        >>> target = make_model(spec, 1e-2)
        >>> round(float(relaxation(target, [1.1])), 9)
        -10.0

    """
    if target.constraint_set is None:
        return np.zeros(np.shape(theta)[:-1])
    nu = eval_constraints(target.constraint_set, theta)
    return -(np.abs(nu) @ target._scales)


def log_relaxed_density(target: RelaxedTarget, theta) -> float:
    """Return the unnormalised relaxed log density at a point.

    Raises:
        OutOfSupportError:
            If ``theta`` is outside the support box.
        NumericError:
            If the result is not finite.

    """
    theta = _check_point(target, theta)
    value = (
        target.log_likelihood(theta)
        + target.log_prior(theta)
        + relaxation(target, theta)
    )
    if target.jacobian_factor:
        value = value + math.log(jacobian(target.constraint_set, theta))
    value = float(value)
    if not math.isfinite(value):
        raise NumericError(
            f'non-finite log density {value} for {target.name or "target"}'
        )
    return value


def grad_log_relaxed_density(target: RelaxedTarget, theta) -> np.ndarray:
    """Return the gradient of :func:`log_relaxed_density`.

    The relaxation contributes ``-sum_j w_j sign(nu_j) grad(nu_j) /
    lambda_j`` with ``sign(0) = 0``.
    """
    theta = _check_point(target, theta)
    grad = (
        np.asarray(target.grad_log_likelihood(theta), dtype=float)
        + np.asarray(target.grad_log_prior(theta), dtype=float)
    )
    cset = target.constraint_set
    if cset is not None:
        nu = eval_constraints(cset, theta)
        grads = constraint_gradients(cset, theta)
        grad = grad - (np.sign(nu) * target._scales) @ grads
        if target.jacobian_factor:
            grad = grad + grad_log_jacobian(cset, theta)
    if not np.all(np.isfinite(grad)):
        raise NumericError(
            f'non-finite gradient for {target.name or "target"}'
        )
    return grad


def log_density_grid(target: RelaxedTarget, thetas) -> np.ndarray:
    """Evaluate the relaxed log density over a batch ``(..., r)``.

    Points outside the box (or where the Jacobian factor vanishes) get
    ``-inf``. The base density terms must broadcast over leading axes.
    """
    thetas = np.asarray(thetas, dtype=float)
    with np.errstate(divide='ignore', invalid='ignore'):
        values = (
            np.asarray(target.log_likelihood(thetas), dtype=float)
            + np.asarray(target.log_prior(thetas), dtype=float)
            + relaxation(target, thetas)
        )
        if target.jacobian_factor:
            values = values + log_jacobian_grid(target.constraint_set, thetas)
    inside = np.all(
        (thetas >= target._lower) & (thetas <= target._upper), axis=-1
    )
    values = np.where(inside, values, -np.inf)
    return np.where(np.isnan(values), -np.inf, values)


def target_distance(target: RelaxedTarget, theta):
    """The constraint distance of a point (0 for unconstrained targets)."""
    if target.constraint_set is None:
        return np.zeros(np.shape(theta)[:-1])
    return distance(target.constraint_set, theta)


# base density terms; all broadcast over leading axes


def _zero(theta):
    return np.zeros(np.shape(theta)[:-1])


def _zero_grad(theta):
    return np.zeros(np.shape(theta))


def _gaussian_mean_loglik(n, ybar, theta):
    return -0.5 * n * (np.asarray(theta)[..., 0] - ybar) ** 2


def _gaussian_mean_grad(n, ybar, theta):
    return -n * (np.asarray(theta) - ybar)


def _normal_logprior(center, variance, theta):
    diff = np.asarray(theta) - center
    return -0.5 * np.sum(diff * diff, axis=-1) / variance


def _normal_grad(center, variance, theta):
    return -(np.asarray(theta) - center) / variance


def _student_logprior(center, variance, dof, theta):
    diff = np.asarray(theta) - center
    power = 0.5 * (dof + diff.shape[-1])
    return -power * np.log1p(np.sum(diff * diff, axis=-1) / (dof * variance))


def _student_grad(center, variance, dof, theta):
    diff = np.asarray(theta) - center
    quad = np.sum(diff * diff, axis=-1, keepdims=True) / (dof * variance)
    return -(dof + diff.shape[-1]) * diff / (dof * variance * (1.0 + quad))


def _dirichlet_logprior(alpha, theta):
    return np.sum(xlogy(alpha - 1.0, np.asarray(theta)), axis=-1)


def _dirichlet_grad(alpha, theta):
    theta = np.asarray(theta)
    shift = np.broadcast_to(alpha - 1.0, theta.shape)
    return np.divide(
        shift, theta, out=np.zeros(theta.shape), where=shift != 0
    )


# model builders


def _positive(params, key):
    value = float(params[key])
    if not value > 0 or not math.isfinite(value):
        raise InvalidArgumentError(f'{key} must be positive, got {value}')
    return value


def conjugate_posterior(n: int, ybar: float, prior_variance: float):
    """Posterior mean and variance of a normal mean with N(0, v) prior.

    Examples:
        >>> mean, var = conjugate_posterior(100, 1.2, 1000.0)
        >>> round(mean, 6), round(var, 8)
        (1.199988, 0.0099999)

    """
    precision = 1.0 / prior_variance + n
    return n * ybar / precision, 1.0 / precision


def _gaussian_inequality(params, lambdas):
    n = int(params['n'])
    if n < 0:
        raise InvalidArgumentError(f'n must be >= 0, got {n}')
    prior_variance = _positive(params, 'prior_variance')
    upper = float(params['upper'])
    ybar = params['ybar']
    if ybar is None:
        if n > 0:
            rng = np.random.default_rng(int(params['data_seed']))
            ybar = float(
                np.mean(rng.normal(float(params['theta_true']), 1.0, n))
            )
        else:
            ybar = 0.0
    ybar = float(ybar)
    try:
        norm_order = NormOrder[str(params['norm_order'])]
    except KeyError:
        raise InvalidArgumentError(
            f'norm_order must be L1 or L2, got {params["norm_order"]}'
        ) from None
    mean, variance = conjugate_posterior(n, ybar, prior_variance)
    return RelaxedTarget(
        1,
        partial(_gaussian_mean_loglik, n, ybar),
        partial(_gaussian_mean_grad, n, ybar),
        partial(_normal_logprior, 0.0, prior_variance),
        partial(_normal_grad, 0.0, prior_variance),
        half_space([1.0], upper, norm_order, params['weights']),
        lambdas,
        initial_point=(min(mean, upper),),
        name=ModelName.GAUSSIAN_INEQUALITY.value,
        chart='half-line',
        metadata={
            'n': n,
            'ybar': ybar,
            'upper': upper,
            'posterior_mean': mean,
            'posterior_variance': variance,
        },
    )


def _sphere_center(params):
    r = int(params['r'])
    center = params['F']
    if center is None:
        center = np.full(r, 1.0 / math.sqrt(r))
    center = np.asarray(center, dtype=float)
    if center.ndim != 1 or center.size < 2 or not np.any(center):
        raise InvalidArgumentError(
            'F must be a non-zero vector of length >= 2'
        )
    return center


def _sphere_model(name, params, lambdas, logprior, grad):
    center = _sphere_center(params)
    r = center.size
    cset = sphere(r, params['weights'])
    return RelaxedTarget(
        r,
        _zero,
        _zero_grad,
        logprior,
        grad,
        cset,
        lambdas,
        box=cset.ambient_box,
        initial_point=tuple(center / np.linalg.norm(center)),
        name=name.value,
        chart={2: 'circle', 3: 'sphere'}.get(r),
        metadata={'F': tuple(center), 'sigma2': float(params['sigma2'])},
    )


def _sphere_gaussian(params, lambdas):
    center = _sphere_center(params)
    sigma2 = _positive(params, 'sigma2')
    return _sphere_model(
        ModelName.SPHERE_GAUSSIAN,
        params,
        lambdas,
        partial(_normal_logprior, center, sigma2),
        partial(_normal_grad, center, sigma2),
    )


def _sphere_t(params, lambdas):
    center = _sphere_center(params)
    sigma2 = _positive(params, 'sigma2')
    dof = _positive(params, 'm')
    target = _sphere_model(
        ModelName.SPHERE_T,
        params,
        lambdas,
        partial(_student_logprior, center, sigma2, dof),
        partial(_student_grad, center, sigma2, dof),
    )
    target.metadata['m'] = dof
    return target


def _torus_uniform(params, lambdas):
    return RelaxedTarget(
        3,
        _zero,
        _zero_grad,
        _zero,
        _zero_grad,
        torus(params['weights']),
        lambdas,
        jacobian_factor=True,
        initial_point=(1.5, 0.0, 0.0),
        name=ModelName.TORUS_UNIFORM.value,
        chart='torus',
    )


def _simplex_toy(params, lambdas):
    r = int(params['r'])
    alpha = params['alpha']
    alpha = np.ones(r) if alpha is None else np.asarray(alpha, dtype=float)
    if alpha.shape != (r,) or not np.all(alpha > 0):
        raise InvalidArgumentError(
            f'alpha must be {r} positive concentrations'
        )
    cset = simplex(r, params['weights'])
    return RelaxedTarget(
        r,
        _zero,
        _zero_grad,
        partial(_dirichlet_logprior, alpha),
        partial(_dirichlet_grad, alpha),
        cset,
        lambdas,
        box=cset.ambient_box,
        initial_point=tuple(np.full(r, 1.0 / r)),
        name=ModelName.SIMPLEX_TOY.value,
        metadata={'alpha': tuple(alpha)},
    )


def _factor_network(params, lambdas):
    from relaxhmc.network import make_network_model
    return make_network_model(params, lambdas)


_BUILDERS = {
    ModelName.GAUSSIAN_INEQUALITY: _gaussian_inequality,
    ModelName.SPHERE_GAUSSIAN: _sphere_gaussian,
    ModelName.SPHERE_T: _sphere_t,
    ModelName.TORUS_UNIFORM: _torus_uniform,
    ModelName.SIMPLEX_TOY: _simplex_toy,
    ModelName.FACTOR_NETWORK: _factor_network,
}


def make_model(spec: ModelSpec, lambdas) -> RelaxedTarget:
    """Assemble the relaxed target of a catalog model.

    Examples:
        >>> target = make_model(ModelSpec('torus-uniform'), 0.1)
        >>> target.dim, target.jacobian_factor
        (3, True)
        >>> make_model(ModelSpec('sphere-gaussian', {'sigma2': -1}), 0.1)
        Traceback (most recent call last):
        relaxhmc.exceptions.InvalidArgumentError: sigma2 must be positive...

    """
    return _BUILDERS[spec.name](spec.resolved(), _as_lambdas(lambdas))
