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
"""Hamiltonian Monte Carlo over relaxed targets.

The potential energy is ``U(theta) = -log_relaxed_density(theta)`` and the
kinetic energy ``K(p) = p^T M^-1 p / 2`` for a diagonal mass ``M``.
"""

from dataclasses import dataclass, field, fields
import math
from typing import Any, List, Mapping, Optional, Tuple

import numpy as np

from relaxhmc import LOG
from relaxhmc.exceptions import (
    AdaptationError,
    DegenerateJacobianError,
    InvalidArgumentError,
    InvalidStartError,
    NumericError,
    OutOfSupportError,
)
from relaxhmc.targets import (
    RelaxedTarget,
    grad_log_relaxed_density,
    log_relaxed_density,
    target_distance,
)

# warmup acceptance below this means the sampler never moved
MIN_WARMUP_ACCEPT = 1e-3

# failures inside a trajectory reject the proposal
TRAJECTORY_ERRORS = (OutOfSupportError, NumericError, DegenerateJacobianError)


def _is_real(value) -> bool:
    return isinstance(
        value, (int, float, np.integer, np.floating)
    ) and not isinstance(value, bool)


@dataclass(frozen=True)
class HmcConfig:
    """Sampler settings.

    Args:
        step_size:
            Leapfrog step size (the initial value when adapting).
        n_leapfrog:
            Leapfrog steps per iteration.
        integration_time:
            If set, use ``floor(integration_time / step_size)`` steps,
            clipped to ``[1, max_leapfrog]``, instead of ``n_leapfrog``.
        max_leapfrog:
            Cap on the steps derived from ``integration_time``.
        mass_diag:
            Diagonal of the mass matrix (identity if unset).
        n_iterations:
            Total iterations including burn-in.
        n_burnin:
            Warmup iterations, discarded.
        seed:
            Seed of the chain's random number generator.
        adapt_step_size:
            Dual averaging of the step size during burn-in.
        adapt_mass:
            Diagonal mass from warmup variances.
        target_accept:
            Mean acceptance probability aimed at by dual averaging.
        initial_point:
            Overrides the target's initial point.
        divergence_threshold:
            Energy errors above this are divergent.

    Examples:
        >>> HmcConfig(step_size=0.05).step_size
        0.05
        >>> HmcConfig(n_iterations=10, n_burnin=10)
        Traceback (most recent call last):
        relaxhmc.exceptions.InvalidArgumentError: n_burnin must be less...

    """

    step_size: float = 0.1
    n_leapfrog: int = 50
    integration_time: Optional[float] = None
    max_leapfrog: int = 1000
    mass_diag: Optional[Tuple[float, ...]] = None
    n_iterations: int = 2000
    n_burnin: int = 1000
    seed: int = 0
    adapt_step_size: bool = True
    adapt_mass: bool = False
    target_accept: float = 0.8
    initial_point: Optional[Tuple[float, ...]] = None
    divergence_threshold: float = 1000.0

    def __post_init__(self):
        problems = [msg for _, msg in self.check(
            {name: getattr(self, name) for name in self.field_names()}
        )]
        if problems:
            raise InvalidArgumentError('; '.join(problems))
        for name in ('mass_diag', 'initial_point'):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(
                    self, name, tuple(float(x) for x in value)
                )

    @classmethod
    def field_names(cls) -> List[str]:
        return [item.name for item in fields(cls)]

    @classmethod
    def check(cls, values: Mapping[str, Any]) -> List[Tuple[str, str]]:
        """Return ``(field, message)`` for every invalid setting.

        Missing fields take their defaults.

        Examples:
            >>> HmcConfig.check({'n_leapfrog': 0, 'bogus': 1})
            [('bogus', 'unknown setting bogus'), ('n_leapfrog', ...)]
            >>> HmcConfig.check({'step_size': 'big'})
            [('step_size', 'step_size must be a number')]

        """
        defaults = {item.name: item.default for item in fields(cls)}
        problems = [
            (name, f'unknown setting {name}')
            for name in sorted(set(values) - set(defaults))
        ]
        merged = {**defaults, **values}
        kinds = {
            'step_size': 'real',
            'n_leapfrog': 'int',
            'integration_time': 'real?',
            'max_leapfrog': 'int',
            'mass_diag': 'reals?',
            'n_iterations': 'int',
            'n_burnin': 'int',
            'seed': 'int',
            'adapt_step_size': 'bool',
            'adapt_mass': 'bool',
            'target_accept': 'real',
            'initial_point': 'reals?',
            'divergence_threshold': 'real',
        }
        typed = {}
        for name, kind in kinds.items():
            value = merged[name]
            if kind.endswith('?') and value is None:
                typed[name] = None
                continue
            kind = kind.rstrip('?')
            if kind == 'bool':
                ok = isinstance(value, bool)
            elif kind == 'int':
                ok = isinstance(value, (int, np.integer)) and not isinstance(
                    value, bool
                )
            elif kind == 'real':
                ok = _is_real(value)
            else:
                ok = isinstance(value, (list, tuple, np.ndarray)) and all(
                    _is_real(x) for x in value
                )
            if ok:
                typed[name] = value
            else:
                article = 'an integer' if kind == 'int' else {
                    'bool': 'true or false',
                    'real': 'a number',
                    'reals': 'a list of numbers',
                }[kind]
                problems.append((name, f'{name} must be {article}'))
        rules = [
            ('step_size', lambda v: v > 0 and math.isfinite(v),
             'step_size must be positive'),
            ('n_leapfrog', lambda v: v >= 1, 'n_leapfrog must be >= 1'),
            ('integration_time', lambda v: v is None or v > 0,
             'integration_time must be positive'),
            ('max_leapfrog', lambda v: v >= 1, 'max_leapfrog must be >= 1'),
            ('mass_diag', lambda v: v is None or all(
                m > 0 and math.isfinite(m) for m in v
            ), 'mass_diag must be positive'),
            ('n_iterations', lambda v: v >= 1, 'n_iterations must be >= 1'),
            ('target_accept', lambda v: 0 < v < 1,
             'target_accept must be in (0, 1)'),
            ('divergence_threshold', lambda v: v > 0,
             'divergence_threshold must be positive'),
        ]
        for name, rule, msg in rules:
            if name in typed and not rule(typed[name]):
                problems.append((name, msg))
        if 'n_burnin' in typed and 'n_iterations' in typed and not (
            0 <= typed['n_burnin'] < typed['n_iterations']
        ):
            problems.append((
                'n_burnin',
                'n_burnin must be less than n_iterations and >= 0',
            ))
        return problems

    def steps_for(self, step_size: float) -> int:
        """The number of leapfrog steps at a given step size.

        Examples:
            >>> HmcConfig(integration_time=1.0).steps_for(0.3)
            3
            >>> HmcConfig(integration_time=0.1).steps_for(0.3)
            1
            >>> config = HmcConfig(integration_time=1.0, max_leapfrog=50)
            >>> config.steps_for(1e-4)
            50

        """
        if self.integration_time is None:
            return self.n_leapfrog
        steps = int(math.floor(self.integration_time / step_size))
        return min(self.max_leapfrog, max(1, steps))


@dataclass(frozen=True)
class Chain:
    """The kept draws of one chain with per-draw diagnostics."""

    samples: np.ndarray
    accept_rate: float
    violations: np.ndarray
    hamiltonian_errors: np.ndarray
    seed_used: int
    accepted: np.ndarray
    iterations: np.ndarray
    divergences: int
    step_size: float
    n_leapfrog: int
    mass_diag: Tuple[float, ...] = field(default=())

    def __len__(self):
        return len(self.samples)


class DualAverageAdapter:
    """Dual averaging of the log step size toward a target acceptance.

    Examples:
        >>> adapter = DualAverageAdapter(0.1)
        >>> first = adapter.step(0.0)
        >>> first < 0.1
        False
        >>> adapter.step(0.0) < first
        True

    """

    def __init__(self, initial_step_size: float, target_accept: float = 0.8):
        self._log_avg_step = 0.0
        self._stat = 0.0
        self._mu = math.log(10 * initial_step_size)
        self._t0 = 10
        self._delta = target_accept
        self._gamma = 0.05
        self._kappa = 0.75
        self._count = 1.0

    def step(self, accept_prob: float) -> float:
        frac = 1.0 / (self._count + self._t0)
        self._stat = (1 - frac) * self._stat + frac * (
            self._delta - min(accept_prob, 1.0)
        )
        log_step = self._mu - (math.sqrt(self._count) / self._gamma) * (
            self._stat
        )
        avg_frac = self._count ** (-self._kappa)
        self._log_avg_step = (
            avg_frac * log_step + (1 - avg_frac) * self._log_avg_step
        )
        self._count += 1
        return math.exp(log_step)

    def finalize(self) -> float:
        return math.exp(self._log_avg_step)


def _integrate(target, theta, p, grad, step_size, n_steps, inv_mass):
    """Leapfrog from a known gradient, returning the final gradient too."""
    p = p + 0.5 * step_size * grad
    for step in range(n_steps):
        theta = theta + step_size * inv_mass * p
        grad = grad_log_relaxed_density(target, theta)
        if step < n_steps - 1:
            p = p + step_size * grad
    p = p + 0.5 * step_size * grad
    return theta, p, grad


def leapfrog(
    target: RelaxedTarget,
    theta,
    p,
    step_size: float,
    n_steps: int,
    mass_diag=None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Take ``n_steps`` leapfrog steps from ``(theta, p)``.

    Raises:
        OutOfSupportError:
            If the trajectory leaves the target's box.

    Examples:
        >>> from relaxhmc.targets import ModelSpec, make_model
        >>> target = make_model(ModelSpec('gaussian-inequality', {
        ...     'n': 0, 'prior_variance': 1.0, 'upper': 10.0}), 1.0)
        >>> theta, p = leapfrog(target, [1.0], [0.0], 0.1, 1)
        >>> print(np.round(theta, 12), np.round(p, 12))
        [0.995] [-0.09975]

    """
    if not (step_size > 0 and n_steps >= 1):
        raise InvalidArgumentError('step size and steps must be positive')
    theta = np.array(theta, dtype=float)
    p = np.array(p, dtype=float)
    inv_mass = _inverse_mass(target.dim, mass_diag)
    grad = grad_log_relaxed_density(target, theta)
    theta, p, _ = _integrate(
        target, theta, p, grad, step_size, n_steps, inv_mass
    )
    return theta, p


def _inverse_mass(dim, mass_diag) -> np.ndarray:
    if mass_diag is None:
        return np.ones(dim)
    mass = np.asarray(mass_diag, dtype=float)
    if mass.shape != (dim,):
        raise InvalidArgumentError(f'mass_diag must have length {dim}')
    return 1.0 / mass


def _regularized_mass(window: np.ndarray) -> np.ndarray:
    count = len(window)
    var = np.var(window, axis=0, ddof=1)
    var = (count / (count + 5.0)) * var + 1e-3 * (5.0 / (count + 5.0))
    return 1.0 / var


def _start(target: RelaxedTarget, config: HmcConfig):
    point: Any = config.initial_point or target.initial_point
    if point is None:
        point = np.zeros(target.dim)
    theta = np.array(point, dtype=float)
    if theta.shape != (target.dim,):
        raise InvalidArgumentError(
            f'initial point has length {theta.size},'
            f' target has dimension {target.dim}'
        )
    try:
        logp = log_relaxed_density(target, theta)
        grad = grad_log_relaxed_density(target, theta)
    except TRAJECTORY_ERRORS as exc:
        raise InvalidStartError(
            f'cannot start {target.name or "target"} at {theta}: {exc}'
        ) from None
    return theta, logp, grad


def sample(target: RelaxedTarget, config: HmcConfig) -> Chain:
    """Run one Metropolis corrected HMC chain.

    Raises:
        InvalidStartError:
            If the initial point has no finite density.
        AdaptationError:
            If (almost) every warmup proposal was rejected.

    """
    rng = np.random.Generator(np.random.PCG64(config.seed))
    theta, logp, grad = _start(target, config)
    dim = target.dim
    mass = 1.0 / _inverse_mass(dim, config.mass_diag)
    step_size = config.step_size
    n_burnin = config.n_burnin
    n_kept = config.n_iterations - n_burnin
    adapter = None
    if config.adapt_step_size and n_burnin > 0:
        adapter = DualAverageAdapter(step_size, config.target_accept)
    # mass from the second half of warmup; the last eighth retunes the step
    window = (n_burnin // 2, (7 * n_burnin) // 8)
    adapt_mass = config.adapt_mass and n_burnin > 0
    if adapt_mass and window[1] - window[0] < 10:
        LOG.warning(
            f'{n_burnin} warmup iterations are too few to adapt the mass'
        )
        adapt_mass = False
    window_draws: List[np.ndarray] = []
    warmup_accept = 0.0

    samples = np.empty((n_kept, dim))
    accepted = np.zeros(n_kept, dtype=bool)
    energy_errors = np.empty(n_kept)
    divergences = 0
    for it in range(config.n_iterations):
        n_steps = config.steps_for(step_size)
        inv_mass = 1.0 / mass
        p0 = rng.standard_normal(dim) * np.sqrt(mass)
        energy0 = -logp + 0.5 * np.sum(p0 * p0 * inv_mass)
        accept_prob = 0.0
        divergent = False
        delta = math.inf
        try:
            theta1, p1, grad1 = _integrate(
                target, theta, p0, grad, step_size, n_steps, inv_mass
            )
            logp1 = log_relaxed_density(target, theta1)
        except OutOfSupportError:
            pass
        except (NumericError, DegenerateJacobianError):
            divergent = True
        else:
            delta = float(-logp1 + 0.5 * np.sum(p1 * p1 * inv_mass)) - (
                energy0
            )
            if not abs(delta) <= config.divergence_threshold:
                divergent = True
            else:
                accept_prob = min(1.0, math.exp(-delta))
        accept = rng.uniform() < accept_prob
        if accept:
            theta, logp, grad = theta1, logp1, grad1

        if it < n_burnin:
            warmup_accept += accept_prob
            if adapter is not None:
                step_size = adapter.step(accept_prob)
            if adapt_mass:
                if window[0] <= it < window[1]:
                    window_draws.append(theta)
                if it == window[1] - 1:
                    mass = _regularized_mass(np.array(window_draws))
                    LOG.debug(
                        f'mass from warmup iterations {window[0]}'
                        f' to {window[1] - 1}'
                    )
                    if adapter is not None:
                        adapter = DualAverageAdapter(
                            step_size, config.target_accept
                        )
            if it == n_burnin - 1:
                if warmup_accept / n_burnin < MIN_WARMUP_ACCEPT:
                    raise AdaptationError(
                        f'{target.name or "target"}: mean warmup'
                        f' acceptance {warmup_accept / n_burnin:.2g}'
                        f' at step size {step_size:.3g}'
                    )
                if adapter is not None:
                    step_size = adapter.finalize()
            continue

        ind = it - n_burnin
        samples[ind] = theta
        accepted[ind] = accept
        energy_errors[ind] = abs(delta)
        divergences += divergent

    if divergences:
        LOG.warning(
            f'{target.name or "target"}: {divergences} divergent'
            f' transitions after warmup'
        )
    return Chain(
        samples=samples,
        accept_rate=float(np.mean(accepted)),
        violations=np.asarray(target_distance(target, samples), dtype=float),
        hamiltonian_errors=energy_errors,
        seed_used=config.seed,
        accepted=accepted,
        iterations=np.arange(n_burnin, config.n_iterations),
        divergences=divergences,
        step_size=step_size,
        n_leapfrog=config.steps_for(step_size),
        mass_diag=tuple(float(m) for m in mass),
    )


def _potential_grad(target, theta):
    return -grad_log_relaxed_density(target, theta)


def finite_difference_hessian(target: RelaxedTarget, theta) -> np.ndarray:
    """Symmetrised central difference Hessian of ``U = -log density``."""
    theta = np.asarray(theta, dtype=float)
    dim = theta.size
    hess = np.empty((dim, dim))
    for j in range(dim):
        h = 1e-5 * max(1.0, abs(theta[j]))
        shift = np.zeros(dim)
        shift[j] = h
        hess[:, j] = (
            _potential_grad(target, theta + shift)
            - _potential_grad(target, theta - shift)
        ) / (2 * h)
    return 0.5 * (hess + hess.T)


def stability_stepsize_hint(
    target: RelaxedTarget, theta, max_iterations: int = 200
) -> float:
    """Return ``2 / sqrt(xi)`` for the largest Hessian eigenvalue ``xi``.

    ``xi`` is the largest signed eigenvalue, not the largest in magnitude:
    power iteration runs on the Hessian shifted by its Gershgorin bound,
    which makes every eigenvalue non-negative. A potential with no positive
    curvature gives ``inf``.

    Examples:
        >>> from relaxhmc.targets import ModelSpec, make_model
        >>> target = make_model(ModelSpec('gaussian-inequality', {
        ...     'n': 0, 'prior_variance': 1.0, 'upper': 10.0}), 1.0)
        >>> round(stability_stepsize_hint(target, [0.3]), 6)
        2.0

    """
    try:
        hess = finite_difference_hessian(target, theta)
    except TRAJECTORY_ERRORS as exc:
        raise NumericError(f'cannot difference the potential: {exc}') from None
    if not np.all(np.isfinite(hess)):
        raise NumericError('non-finite entries in the potential Hessian')
    shift = float(np.max(np.sum(np.abs(hess), axis=1)))
    if shift == 0.0:
        return math.inf
    shifted = hess + shift * np.eye(hess.shape[0])
    vec = np.linspace(1.0, 2.0, hess.shape[0])
    vec /= np.linalg.norm(vec)
    top = 0.0
    for _ in range(max_iterations):
        image = shifted @ vec
        norm = float(np.linalg.norm(image))
        if norm == 0.0:
            break
        vec = image / norm
        converged = abs(norm - top) <= 1e-10 * norm
        top = norm
        if converged:
            break
    xi = top - shift
    if xi <= 1e-12 * shift:
        return math.inf
    return 2.0 / math.sqrt(xi)
