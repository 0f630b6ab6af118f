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
"""Ground truth for sharply constrained and relaxed posteriors.

Quadrature works on charts: a tensor product of 1-D composite trapezoid
rules (periodic where the coordinate is an angle) mapped to ``R^r`` with
the log volume element of the map. Weights are accumulated in the log
domain and the error bound compares the rule with its refinement.
"""

from dataclasses import dataclass
from enum import Enum
import math
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import ive, log_ndtr, logsumexp

from relaxhmc.constraints import TORUS_MAJOR_RADIUS, TORUS_MINOR_RADIUS
from relaxhmc.exceptions import (
    InvalidArgumentError,
    NumericError,
    UnsupportedOracleError,
)
from relaxhmc.targets import (
    ModelName,
    ModelSpec,
    RelaxedTarget,
    log_density_grid,
    make_model,
)

# A 1-D rule: nodes and (positive) weights.
Rule = Tuple[np.ndarray, np.ndarray]

# Points per chunk of the first chart axis.
CHUNK_POINTS = 2 ** 20


class OracleMethod(Enum):
    ANALYTIC = 'analytic'
    QUADRATURE = 'quadrature'
    REJECTION_MC = 'rejection-mc'


@dataclass(frozen=True)
class OracleResult:
    """A reference value with its error bound.

    Examples:
        >>> OracleResult(1.0, 0.1, OracleMethod.ANALYTIC)
        Traceback (most recent call last):
        relaxhmc.exceptions.InvalidArgumentError: analytic results are exact

    """

    value: float
    error_bound: float
    method: OracleMethod

    def __post_init__(self):
        if not self.error_bound >= 0:
            raise InvalidArgumentError('error_bound must be non-negative')
        if self.method == OracleMethod.ANALYTIC and self.error_bound != 0:
            raise InvalidArgumentError('analytic results are exact')


def truncated_normal_moments(
    mu: float, sigma2: float, upper: float
) -> Tuple[float, float]:
    """Mean and variance of ``N(mu, sigma2)`` truncated to ``(-inf, upper)``.

    Examples:
        >>> truncated_normal_moments(0.0, 1.0, math.inf)
        (0.0, 1.0)
        >>> mean, var = truncated_normal_moments(0.0, 1.0, 0.0)
        >>> round(mean, 4), round(var, 4)
        (-0.7979, 0.3634)

    """
    if not sigma2 > 0:
        raise InvalidArgumentError(f'sigma2 must be positive, got {sigma2}')
    if upper == math.inf:
        return float(mu), float(sigma2)
    sigma = math.sqrt(sigma2)
    beta = (upper - mu) / sigma
    # inverse Mills ratio phi(beta) / Phi(beta)
    mills = math.exp(
        -0.5 * beta * beta - 0.5 * math.log(2 * math.pi) - log_ndtr(beta)
    )
    mean = mu - sigma * mills
    var = sigma2 * (1.0 - beta * mills - mills * mills)
    return float(mean), float(var)


def vmf_mean_resultant_length(kappa: float, dim: int = 2) -> float:
    """``I_{p/2}(kappa) / I_{p/2-1}(kappa)`` for the vMF in ``R^p``.

    Examples:
        >>> round(vmf_mean_resultant_length(10.0), 4)
        0.9486
        >>> vmf_mean_resultant_length(0.0)
        0.0

    """
    if kappa < 0 or dim < 2:
        raise InvalidArgumentError('need kappa >= 0 and dim >= 2')
    if kappa == 0:
        return 0.0
    return float(ive(dim / 2, kappa) / ive(dim / 2 - 1, kappa))


def _unit_direction(direction) -> np.ndarray:
    direction = np.asarray(direction, dtype=float)
    norm = float(np.linalg.norm(direction))
    if not math.isclose(norm, 1.0, rel_tol=1e-6):
        raise InvalidArgumentError(
            f'F must be a unit vector, got norm {norm:.6g}'
        )
    return direction / norm


def vmf_circle_sample(F, sigma2: float, n: int, seed: int) -> np.ndarray:
    """Exact draws from the von Mises law on the unit circle.

    The natural parameter is ``F / sigma2``; numpy's von Mises sampler
    uses the Best-Fisher wrapped Cauchy rejection scheme.

    Examples:
        >>> draws = vmf_circle_sample([1.0, 0.0], 0.1, 5, seed=1)
        >>> draws.shape
        (5, 2)
        >>> bool(np.allclose(np.hypot(*draws.T), 1.0))
        True

    """
    direction = _unit_direction(F)
    if direction.shape != (2,):
        raise InvalidArgumentError('F must have two components')
    if not sigma2 > 0 or n < 1:
        raise InvalidArgumentError('need sigma2 > 0 and n >= 1')
    rng = np.random.Generator(np.random.PCG64(seed))
    angles = rng.vonmises(
        math.atan2(direction[1], direction[0]), 1.0 / sigma2, n
    )
    return np.column_stack([np.cos(angles), np.sin(angles)])


def torus_point(tube_angle, ring_angle, tube_radius=TORUS_MINOR_RADIUS):
    """Map torus angles (and optionally a tube radius) into ``R^3``."""
    ring = TORUS_MAJOR_RADIUS + tube_radius * np.cos(tube_angle)
    return np.stack(
        [
            ring * np.cos(ring_angle),
            ring * np.sin(ring_angle),
            tube_radius * np.sin(tube_angle) * np.ones_like(ring),
        ],
        axis=-1,
    )


def torus_angles(theta) -> Tuple[np.ndarray, np.ndarray]:
    """The (tube, ring) angles of points in ``R^3``, in ``[0, 2 pi)``."""
    theta = np.asarray(theta, dtype=float)
    rho = np.hypot(theta[..., 0], theta[..., 1])
    tube = np.arctan2(theta[..., 2], rho - TORUS_MAJOR_RADIUS)
    ring = np.arctan2(theta[..., 1], theta[..., 0])
    return np.mod(tube, 2 * np.pi), np.mod(ring, 2 * np.pi)


def torus_uniform_sample(n: int, seed: int) -> np.ndarray:
    """Exact uniform (surface measure) draws on the torus.

    Examples:
        >>> from relaxhmc.constraints import eval_constraints, torus
        >>> draws = torus_uniform_sample(100, seed=2)
        >>> bool(np.max(np.abs(eval_constraints(torus(), draws))) < 1e-12)
        True

    """
    if n < 1:
        raise InvalidArgumentError(f'n must be >= 1, got {n}')
    rng = np.random.Generator(np.random.PCG64(seed))
    ratio = TORUS_MINOR_RADIUS / TORUS_MAJOR_RADIUS
    tube: List[np.ndarray] = []
    count = 0
    while count < n:
        batch = max(64, 2 * (n - count))
        angles = rng.uniform(0.0, 2 * np.pi, batch)
        keep = rng.uniform(size=batch) < (
            (1.0 + ratio * np.cos(angles)) / (1.0 + ratio)
        )
        tube.append(angles[keep])
        count += int(keep.sum())
    tube_angle = np.concatenate(tube)[:n]
    ring_angle = rng.uniform(0.0, 2 * np.pi, n)
    return torus_point(tube_angle, ring_angle)


# quadrature rules


def periodic_rule(size: int, start: float = 0.0) -> Rule:
    """Equally spaced nodes on ``[start, start + 2 pi)``."""
    nodes = start + 2 * np.pi * np.arange(size) / size
    return nodes, np.full(size, 2 * np.pi / size)


def graded_rule(breaks: Sequence[float], counts: Sequence[int]) -> Rule:
    """Composite trapezoid over consecutive segments.

    Segment ``i`` spans ``breaks[i]..breaks[i + 1]`` with ``counts[i]``
    intervals; shared end nodes are merged. Empty segments are skipped.

    Examples:
        >>> nodes, weights = graded_rule([0.0, 1.0, 3.0], [2, 2])
        >>> print(nodes)
        [0.  0.5 1.  2.  3. ]
        >>> print(weights)
        [0.25 0.5  0.75 1.   0.5 ]

    """
    nodes: List[float] = []
    weights: List[float] = []
    for (lo, hi), count in zip(zip(breaks[:-1], breaks[1:]), counts):
        if not hi > lo:
            continue
        seg = np.linspace(lo, hi, count + 1)
        step = (hi - lo) / count
        seg_weights = np.full(count + 1, step)
        seg_weights[[0, -1]] = 0.5 * step
        if nodes and math.isclose(nodes[-1], lo):
            weights[-1] += seg_weights[0]
            seg, seg_weights = seg[1:], seg_weights[1:]
        nodes.extend(seg)
        weights.extend(seg_weights)
    if not nodes:
        raise InvalidArgumentError('the quadrature range is empty')
    return np.array(nodes), np.array(weights)


def _apply(g: Callable, theta: np.ndarray) -> np.ndarray:
    """Evaluate ``g`` over a batch, looping if ``g`` does not broadcast."""
    values = np.asarray(g(theta), dtype=float)
    if values.shape != theta.shape[:-1]:
        flat = theta.reshape(-1, theta.shape[-1])
        values = np.array([float(g(point)) for point in flat]).reshape(
            theta.shape[:-1]
        )
    return values


def chart_expectation(
    rules: Sequence[Rule],
    to_theta: Callable[..., Tuple[np.ndarray, np.ndarray]],
    log_density: Callable[[np.ndarray], np.ndarray],
    g: Callable,
) -> float:
    """Weighted mean of ``g`` over a tensor chart.

    Args:
        rules:
            One 1-D rule per chart coordinate.
        to_theta:
            Maps the coordinate meshes to ``(theta, log volume element)``.
        log_density:
            Unnormalised log density over batches of ``theta``.
        g:
            The integrand.

    Raises:
        NumericError:
            If every weight underflows.

    """
    first_nodes, first_weights = rules[0]
    rest = rules[1:]
    rest_mesh = np.meshgrid(*[nodes for nodes, _ in rest], indexing='ij')
    rest_log_weight = sum(
        np.log(mesh_w) for mesh_w in np.meshgrid(
            *[weights for _, weights in rest], indexing='ij'
        )
    ) if rest else np.zeros(())
    chunk = max(1, CHUNK_POINTS // max(1, int(np.prod(
        [len(nodes) for nodes, _ in rest]
    ))))
    log_parts = []
    mean_parts = []
    for start in range(0, len(first_nodes), chunk):
        stop = start + chunk
        first = first_nodes[start:stop].reshape(
            (-1,) + (1,) * len(rest)
        )
        coords = [first] + [mesh[np.newaxis] for mesh in rest_mesh]
        theta, log_volume = to_theta(*coords)
        with np.errstate(divide='ignore'):
            log_w = (
                log_density(theta)
                + log_volume
                + np.log(first_weights[start:stop]).reshape(first.shape)
                + rest_log_weight
            )
        log_w = np.where(np.isnan(log_w), -np.inf, log_w)
        part = logsumexp(log_w)
        if part == -np.inf:
            continue
        values = _apply(g, theta)
        weights = np.exp(log_w - part)
        log_parts.append(part)
        mean_parts.append(float(np.sum(
            np.where(weights > 0, weights * values, 0.0)
        )))
    if not log_parts:
        raise NumericError('all quadrature weights underflow')
    log_parts_arr = np.array(log_parts)
    shares = np.exp(log_parts_arr - logsumexp(log_parts_arr))
    return float(shares @ np.array(mean_parts))


def _refine(compute: Callable[[int], float], grid: int) -> OracleResult:
    coarse = compute(grid)
    fine = compute(2 * grid)
    bound = max(
        abs(fine - coarse),
        64 * np.finfo(float).eps * max(1.0, abs(fine)),
    )
    return OracleResult(fine, bound, OracleMethod.QUADRATURE)


# charts; each returns (theta, log volume element)


def _circle_chart(t):
    return np.stack([np.cos(t), np.sin(t)], axis=-1), np.zeros(t.shape)


def _sphere_chart(phi, t):
    sin_phi = np.sin(phi)
    theta = np.stack(
        np.broadcast_arrays(sin_phi * np.cos(t), sin_phi * np.sin(t),
                            np.cos(phi)),
        axis=-1,
    )
    with np.errstate(divide='ignore'):
        return theta, np.broadcast_to(np.log(sin_phi), theta.shape[:-1])


def _torus_chart(tube_angle, ring_angle):
    theta = torus_point(*np.broadcast_arrays(tube_angle, ring_angle))
    log_volume = np.log(TORUS_MINOR_RADIUS * (
        TORUS_MAJOR_RADIUS + TORUS_MINOR_RADIUS * np.cos(tube_angle)
    ))
    return theta, np.broadcast_to(log_volume, theta.shape[:-1])


def _segment_chart(u):
    return np.stack([u, 1.0 - u], axis=-1), np.zeros(u.shape)


def _triangle_chart(u, w):
    u, w = np.broadcast_arrays(u, w)
    rest = 1.0 - u
    theta = np.stack([u, rest * w, rest * (1.0 - w)], axis=-1)
    with np.errstate(divide='ignore'):
        return theta, np.log(rest)


def _line_chart(x):
    return x[..., np.newaxis], np.zeros(x.shape)


def _polar_chart(radius, t):
    radius, t = np.broadcast_arrays(radius, t)
    theta = np.stack([radius * np.cos(t), radius * np.sin(t)], axis=-1)
    with np.errstate(divide='ignore'):
        return theta, np.log(radius)


def _spherical_chart(radius, phi, t):
    radius, phi, t = np.broadcast_arrays(radius, phi, t)
    direction, log_sin = _sphere_chart(phi, t)
    with np.errstate(divide='ignore'):
        return (
            radius[..., np.newaxis] * direction,
            2 * np.log(radius) + log_sin,
        )


def _toroidal_chart(tube_radius, tube_angle, ring_angle):
    tube_radius, tube_angle, ring_angle = np.broadcast_arrays(
        tube_radius, tube_angle, ring_angle
    )
    theta = torus_point(tube_angle, ring_angle, tube_radius)
    with np.errstate(divide='ignore', invalid='ignore'):
        log_volume = np.log(tube_radius) + np.log(
            TORUS_MAJOR_RADIUS + tube_radius * np.cos(tube_angle)
        )
    return theta, log_volume


def _closed_rule(lo, hi, size):
    return graded_rule([lo, hi], [size])


def _base_log_density(target: RelaxedTarget):
    def _log_density(theta):
        return (
            np.asarray(target.log_likelihood(theta), dtype=float)
            + np.asarray(target.log_prior(theta), dtype=float)
        )
    return _log_density


def _half_line_range(target: RelaxedTarget) -> Tuple[float, float, float]:
    meta = target.metadata
    sigma = math.sqrt(meta['posterior_variance'])
    upper = meta['upper']
    return min(meta['posterior_mean'], upper) - 12 * sigma, upper, sigma


def sharp_expectation_quadrature(
    model: ModelSpec, g: Callable, grid: int = 512
) -> OracleResult:
    """``E[g(theta) | theta in D]`` under the sharply constrained posterior.

    The base density is weighted by ``1 / J`` against the surface measure
    of ``D`` (and by ``J`` again for models carrying the Jacobian factor).
    ``g`` maps ``(..., r)`` to ``(...)``.

    Raises:
        UnsupportedOracleError:
            If there is no chart for the model's constrained space.

    Examples:
        >>> spec = ModelSpec('torus-uniform')
        >>> result = sharp_expectation_quadrature(
        ...     spec, lambda theta: np.ones(theta.shape[:-1]), grid=64)
        >>> round(result.value, 12)
        1.0

    """
    if grid < 64:
        raise InvalidArgumentError(f'grid must be >= 64, got {grid}')
    target = make_model(model, 1.0)
    base = _base_log_density(target)
    name = model.name

    if name in (ModelName.SPHERE_GAUSSIAN, ModelName.SPHERE_T) and (
        target.dim in (2, 3)
    ):
        # J = 2 |theta| is constant on the sphere
        if target.dim == 2:
            def compute(size):
                return chart_expectation(
                    [periodic_rule(size)], _circle_chart, base, g
                )
        else:
            def compute(size):
                return chart_expectation(
                    [_closed_rule(0.0, np.pi, size), periodic_rule(size)],
                    _sphere_chart,
                    base,
                    g,
                )
    elif name == ModelName.TORUS_UNIFORM:
        # J / J: uniform against the surface measure
        def compute(size):
            return chart_expectation(
                [periodic_rule(size), periodic_rule(size)],
                _torus_chart,
                base,
                g,
            )
    elif name == ModelName.SIMPLEX_TOY and target.dim in (2, 3):
        if min(target.metadata['alpha']) < 1:
            raise UnsupportedOracleError(
                'simplex quadrature needs concentrations >= 1'
            )
        if target.dim == 2:
            def compute(size):
                return chart_expectation(
                    [_closed_rule(0.0, 1.0, size)], _segment_chart, base, g
                )
        else:
            def compute(size):
                return chart_expectation(
                    [_closed_rule(0.0, 1.0, size)] * 2,
                    _triangle_chart,
                    base,
                    g,
                )
    elif name == ModelName.GAUSSIAN_INEQUALITY:
        lo, upper, _ = _half_line_range(target)

        def compute(size):
            return chart_expectation(
                [_closed_rule(lo, upper, size)], _line_chart, base, g
            )
    else:
        raise UnsupportedOracleError(
            f'no sharp quadrature for {name.value} in dimension'
            f' {target.dim}'
        )
    return _refine(compute, grid)


def _relaxation_scale(target: RelaxedTarget) -> float:
    """The smallest effective ``lambda_j / w_j``."""
    return 1.0 / float(np.max(target.scales))


def relaxed_expectation_quadrature(
    target: RelaxedTarget,
    g: Callable,
    grid: Optional[int] = None,
    bounds=None,
) -> OracleResult:
    """``E[g(theta)]`` under the relaxed density by quadrature over ``R^r``.

    Curved constraint sets use tubular charts with a normal coordinate
    graded around ``D``, the one dimensional inequality model a grid graded
    around its boundary, and anything else a Cartesian grid over ``bounds``
    (default: the target's box).

    Raises:
        UnsupportedOracleError:
            If ``r > 3`` or the integration region is unbounded.

    Examples:
        >>> spec = ModelSpec('gaussian-inequality', {'n': 100, 'ybar': 1.2})
        >>> target = make_model(spec, 1e-2)
        >>> relaxed = relaxed_expectation_quadrature(target, np.squeeze)
        >>> mean, _ = truncated_normal_moments(
        ...     target.metadata['posterior_mean'],
        ...     target.metadata['posterior_variance'],
        ...     1.0,
        ... )
        >>> relaxed.value > mean
        True

    """
    if target.dim > 3:
        raise UnsupportedOracleError(
            f'relaxed quadrature needs r <= 3, got {target.dim}'
        )
    if grid is None:
        grid = 512 if target.dim <= 2 else 128
    if grid < 16:
        raise InvalidArgumentError(f'grid must be >= 16, got {grid}')

    def log_density(theta):
        return log_density_grid(target, theta)

    chart = target.chart if bounds is None else None
    if chart in ('circle', 'sphere', 'torus', 'half-line'):
        scale = _relaxation_scale(target)

    if chart == 'circle':
        width = min(0.5, 20 * scale)
        outer = math.sqrt(2.0)

        def compute(size):
            radial = graded_rule(
                [0.0, 1.0 - width, 1.0, 1.0 + width, outer],
                [size // 4, size // 2, size // 2, size // 4],
            )
            return chart_expectation(
                [radial, periodic_rule(size)], _polar_chart, log_density, g
            )
    elif chart == 'sphere':
        width = min(0.5, 20 * scale)
        outer = math.sqrt(3.0)

        def compute(size):
            radial = graded_rule(
                [0.0, 1.0 - width, 1.0, 1.0 + width, outer],
                [size // 4, size // 2, size // 2, size // 4],
            )
            return chart_expectation(
                [radial, _closed_rule(0.0, np.pi, size), periodic_rule(
                    size
                )],
                _spherical_chart,
                log_density,
                g,
            )
    elif chart == 'torus':
        width = min(0.25, 40 * scale)

        def compute(size):
            radial = graded_rule(
                [0.0, 0.5 - width, 0.5, 0.5 + width, 1.0],
                [size // 4, size // 2, size // 2, size // 4],
            )
            return chart_expectation(
                [radial, periodic_rule(size), periodic_rule(size)],
                _toroidal_chart,
                log_density,
                g,
            )
    elif chart == 'half-line':
        lo, upper, sigma = _half_line_range(target)
        below = min(0.5 * (upper - lo), 40 * scale)
        above = min(
            40 * scale,
            max(target.metadata['posterior_mean'] - upper, 0.0) + 12 * sigma,
        )

        def compute(size):
            rule = graded_rule(
                [lo, upper - below, upper, upper + above],
                [size // 2, size // 2, size // 2],
            )
            return chart_expectation([rule], _line_chart, log_density, g)
    else:
        if bounds is None:
            bounds = target.bounds
        lower = np.asarray(bounds[0], dtype=float)
        upper_b = np.asarray(bounds[1], dtype=float)
        if lower.shape != (target.dim,) or upper_b.shape != (target.dim,):
            raise InvalidArgumentError(
                f'bounds must have length {target.dim}'
            )
        if not np.all(np.isfinite(lower) & np.isfinite(upper_b)):
            raise UnsupportedOracleError(
                f'{target.name or "target"} has an unbounded support box,'
                ' pass finite bounds'
            )

        def _cartesian(*coords):
            mesh = np.broadcast_arrays(*coords)
            return np.stack(mesh, axis=-1), np.zeros(mesh[0].shape)

        def compute(size):
            return chart_expectation(
                [
                    _closed_rule(lo_j, hi_j, size)
                    for lo_j, hi_j in zip(lower, upper_b)
                ],
                _cartesian,
                log_density,
                g,
            )
    return _refine(compute, grid)
