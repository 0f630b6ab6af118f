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
"""Constraint functions, distances and the catalog of constrained spaces.

A constrained space ``D`` is described implicitly by constraint functions
``nu_j`` which vanish exactly on ``D``. Sets of positive measure (e.g.
half-spaces) use a direct projection distance instead, wrapped up as a
single non-negative constraint function so that both kinds can be relaxed
in the same way.

All constraint functions broadcast over leading axes: ``theta`` may have
shape ``(r,)`` or ``(..., r)``.
"""

from dataclasses import dataclass, field
from enum import Enum
from functools import partial
import math
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from relaxhmc.exceptions import (
    DegenerateJacobianError,
    InvalidArgumentError,
)


# Cholesky pivots of the Gram matrix below this are treated as singular.
PIVOT_TOLERANCE = 1e-12
# Rank tolerance for the modified Gram-Schmidt used by the line entry.
RANK_TOLERANCE = 1e-12

TORUS_MAJOR_RADIUS = 1.0
TORUS_MINOR_RADIUS = 0.5

Box = Tuple[Tuple[float, ...], Tuple[float, ...]]


class ConstraintKind(Enum):
    MEASURE_ZERO = 'measure-zero'
    POSITIVE_MEASURE = 'positive-measure'


class NormOrder(Enum):
    L1 = 1
    L2 = 2


class CatalogName(Enum):
    SIMPLEX = 'simplex'
    LINE = 'line'
    SPHERE = 'sphere'
    STIEFEL = 'stiefel'
    TORUS = 'torus'
    HALF_SPACE = 'half-space'
    BOX = 'box'
    AFFINE = 'affine'


@dataclass(frozen=True)
class ConstraintFn:
    """A single constraint function ``nu_j`` with its derivatives.

    ``hess_func`` is optional, it is only needed when a target carries the
    Jacobian factor.
    """

    dim_in: int
    func: Callable[[np.ndarray], np.ndarray]
    grad_func: Callable[[np.ndarray], np.ndarray]
    label: str = ''
    hess_func: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def value(self, theta):
        return self.func(theta)

    def grad(self, theta):
        return self.grad_func(theta)

    def hess(self, theta):
        if self.hess_func is None:
            raise InvalidArgumentError(
                f'constraint "{self.label}" does not provide a Hessian'
            )
        return self.hess_func(theta)


@dataclass(frozen=True)
class DirectDistance:
    """Projection distance ``inf_{x in D} ||theta - x||_k`` to a set.

    ``project`` maps a point to a nearest point of ``D`` under the chosen
    norm. ``grad_func`` overrides the generic gradient, which is only right
    when the projection is the Euclidean one (L2) or acts coordinatewise
    (L1).
    """

    dim_in: int
    project: Callable[[np.ndarray], np.ndarray]
    norm_order: NormOrder = NormOrder.L2
    label: str = ''
    grad_func: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        return np.linalg.norm(
            theta - self.project(theta),
            ord=self.norm_order.value,
            axis=-1,
        )

    def grad(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.grad_func is not None:
            return self.grad_func(theta)
        diff = theta - self.project(theta)
        if self.norm_order == NormOrder.L1:
            return np.sign(diff)
        dist = np.linalg.norm(diff, axis=-1, keepdims=True)
        return np.divide(
            diff, dist, out=np.zeros_like(diff), where=dist > 0
        )


@dataclass(frozen=True)
class ConstraintSet:
    """The vector map ``nu_D = [nu_1, ..., nu_s]`` defining ``D``.

    Args:
        constraints:
            The constraint functions, all acting on the same dimension.
        weights:
            Positive multipliers of each ``|nu_j|`` in the distance.
        kind:
            Measure zero (manifolds) or positive measure (direct distance).
        direct:
            The direct distance, required for positive measure sets.
        ambient_box:
            The bounded ambient space the constraint is usually truncated
            to, as ``(lower, upper)``.
        label:
            Name for messages.

    """

    constraints: Tuple[ConstraintFn, ...]
    weights: Tuple[float, ...] = ()
    kind: ConstraintKind = ConstraintKind.MEASURE_ZERO
    direct: Optional[DirectDistance] = None
    ambient_box: Optional[Box] = None
    label: str = ''
    _weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        constraints = tuple(self.constraints)
        if not constraints:
            raise InvalidArgumentError(
                'a constraint set needs at least one constraint'
            )
        dims = {con.dim_in for con in constraints}
        if len(dims) != 1:
            raise InvalidArgumentError(
                'all constraints must share one ambient dimension,'
                f' got {sorted(dims)}'
            )
        weights = tuple(
            float(weight) for weight in (self.weights or [1.0] * len(
                constraints
            ))
        )
        if len(weights) != len(constraints):
            raise InvalidArgumentError(
                f'expected {len(constraints)} weights, got {len(weights)}'
            )
        if not all(weight > 0 and math.isfinite(weight) for weight in (
            weights
        )):
            raise InvalidArgumentError(
                f'weights must be positive and finite: {weights}'
            )
        if self.kind == ConstraintKind.POSITIVE_MEASURE and not self.direct:
            raise InvalidArgumentError(
                'positive measure constraint sets need a direct distance'
            )
        object.__setattr__(self, 'constraints', constraints)
        object.__setattr__(self, 'weights', weights)
        object.__setattr__(self, '_weights', np.array(weights))

    @property
    def dim(self) -> int:
        return self.constraints[0].dim_in

    @property
    def size(self) -> int:
        """The number of constraints ``s``."""
        return len(self.constraints)

    def with_weights(self, weights: Sequence[float]) -> 'ConstraintSet':
        return ConstraintSet(
            self.constraints,
            tuple(weights),
            self.kind,
            self.direct,
            self.ambient_box,
            self.label,
        )


def _as_point(cset: ConstraintSet, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.ndim == 0 or theta.shape[-1] != cset.dim:
        raise InvalidArgumentError(
            f'{cset.label or "constraint set"} acts on dimension'
            f' {cset.dim}, got a point of shape {theta.shape}'
        )
    return theta


def eval_constraints(cset: ConstraintSet, theta) -> np.ndarray:
    """Return ``[nu_1(theta), ..., nu_s(theta)]``, shape ``(..., s)``.

    Examples:
        >>> print(eval_constraints(sphere(3), [0.0, 0.0, 0.0]))
        [-1.]

    """
    theta = _as_point(cset, theta)
    return np.stack([con.value(theta) for con in cset.constraints], axis=-1)


def constraint_gradients(cset: ConstraintSet, theta) -> np.ndarray:
    """Return the stacked gradients, shape ``(..., s, r)``."""
    theta = _as_point(cset, theta)
    return np.stack([con.grad(theta) for con in cset.constraints], axis=-2)


def constraint_hessians(cset: ConstraintSet, theta) -> np.ndarray:
    """Return the stacked Hessians, shape ``(..., s, r, r)``."""
    theta = _as_point(cset, theta)
    return np.stack([con.hess(theta) for con in cset.constraints], axis=-3)


def distance(cset: ConstraintSet, theta):
    """Return the weighted distance ``sum_j w_j |nu_j(theta)|``.

    For positive measure sets the single constraint is the direct distance
    so this is the (weighted) projection distance.

    Examples:
        >>> float(distance(half_space([1.0], 1.0), [0.5]))
        0.0
        >>> float(distance(sphere(2, weights=[3.0]), [2.0, 0.0]))
        9.0

    """
    return np.abs(eval_constraints(cset, theta)) @ cset._weights


def gram_matrix(cset: ConstraintSet, theta) -> np.ndarray:
    grads = constraint_gradients(cset, theta)
    return grads @ np.swapaxes(grads, -1, -2)


def jacobian(cset: ConstraintSet, theta) -> float:
    """Return ``sqrt(det(G))`` for the Gram matrix ``G`` of the gradients.

    Raises:
        DegenerateJacobianError:
            If the constraint gradients are (numerically) dependent.

    Examples:
        >>> round(float(jacobian(sphere(3), [0.0, 1.0, 0.0])), 12)
        2.0

    """
    if cset.kind != ConstraintKind.MEASURE_ZERO:
        raise InvalidArgumentError(
            'the Jacobian is only defined for measure zero constraint sets'
        )
    theta = _as_point(cset, theta)
    gram = gram_matrix(cset, theta)
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError:
        raise DegenerateJacobianError(theta, 0.0) from None
    diag = np.diagonal(chol, axis1=-2, axis2=-1)
    smallest = float(np.min(diag ** 2))
    if not smallest >= PIVOT_TOLERANCE:
        raise DegenerateJacobianError(theta, smallest)
    return np.prod(diag, axis=-1)


def log_jacobian_grid(cset: ConstraintSet, thetas) -> np.ndarray:
    """Return ``log J`` over a batch of points, ``-inf`` where ``J = 0``."""
    gram = gram_matrix(cset, thetas)
    sign, logdet = np.linalg.slogdet(gram)
    return np.where(sign > 0, 0.5 * logdet, -np.inf)


def grad_log_jacobian(cset: ConstraintSet, theta) -> np.ndarray:
    """Return the gradient of ``log J`` at a single point.

    Uses ``sum_ij (G^-1)_ij H_i grad(nu_j)`` where ``H_i`` is the Hessian of
    ``nu_i``.
    """
    jacobian(cset, theta)  # raises if degenerate
    grads = constraint_gradients(cset, theta)
    gram = grads @ grads.T
    hessians = constraint_hessians(cset, theta)
    return np.einsum(
        'ij,iab,jb->a', np.linalg.inv(gram), hessians, grads
    )


def d_expansion_contains(cset: ConstraintSet, theta, d: float) -> bool:
    """Return True if ``theta`` is in the d-expansion of ``D``.

    Distances within a relative 1e-12 of ``d`` count as inside.

    Examples:
        >>> d_expansion_contains(simplex(2), [0.5, 0.5], 0.0)
        True
        >>> d_expansion_contains(simplex(2), [0.5, 0.6], 0.05)
        False

    """
    if not d >= 0:
        raise InvalidArgumentError(f'd must be non-negative, got {d}')
    dist = float(distance(cset, theta))
    return dist <= d or math.isclose(dist, d, rel_tol=1e-12, abs_tol=1e-15)


# catalog


def _weights_for(weights, size):
    if weights is None:
        return (1.0,) * size
    weights = tuple(float(weight) for weight in np.atleast_1d(weights))
    if len(weights) != size:
        raise InvalidArgumentError(
            f'expected {size} weights, got {len(weights)}'
        )
    return weights


def _zeros_hess(theta):
    theta = np.asarray(theta, dtype=float)
    return np.zeros(theta.shape + theta.shape[-1:])


def _constant_grad(vector, theta):
    return np.zeros_like(np.asarray(theta, dtype=float)) + vector


def _constant_hess(matrix, theta):
    theta = np.asarray(theta, dtype=float)
    return np.zeros(theta.shape[:-1] + matrix.shape) + matrix


def _affine_value(row, offset, theta):
    return np.asarray(theta, dtype=float) @ row - offset


def affine(matrix, offset, weights=None) -> ConstraintSet:
    """Affine equality constraints ``nu_j = a_j . theta - offset_j``.

    Examples:
        >>> cset = affine([[1.0, 1.0]], [1.0])
        >>> print(eval_constraints(cset, [0.25, 0.75]))
        [0.]

    """
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    offset = np.atleast_1d(np.asarray(offset, dtype=float))
    if offset.shape != (matrix.shape[0],):
        raise InvalidArgumentError(
            f'offset must have {matrix.shape[0]} entries'
        )
    dim = matrix.shape[1]
    constraints = tuple(
        ConstraintFn(
            dim,
            partial(_affine_value, row, off),
            partial(_constant_grad, row),
            f'affine[{ind}]',
            _zeros_hess,
        )
        for ind, (row, off) in enumerate(zip(matrix, offset))
    )
    return ConstraintSet(
        constraints, _weights_for(weights, len(constraints)), label='affine'
    )


def simplex(r: int, weights=None) -> ConstraintSet:
    """The probability simplex ``sum(theta) = 1`` inside ``[0, 1]^r``.

    Examples:
        >>> print(eval_constraints(simplex(2), [0.5, 0.5]))
        [0.]

    """
    if r < 2:
        raise InvalidArgumentError(f'simplex needs r >= 2, got {r}')
    ones = np.ones(r)
    con = ConstraintFn(
        r,
        partial(_affine_value, ones, 1.0),
        partial(_constant_grad, ones),
        'simplex',
        _zeros_hess,
    )
    return ConstraintSet(
        (con,),
        _weights_for(weights, 1),
        ambient_box=((0.0,) * r, (1.0,) * r),
        label=f'simplex({r})',
    )


def _gram_schmidt(vectors, tol=RANK_TOLERANCE):
    """Orthonormalise the rows of ``vectors`` (modified Gram-Schmidt).

    Examples:
        >>> print(_gram_schmidt([[2.0, 0.0], [1.0, 1.0]]))
        [[1. 0.]
         [0. 1.]]

    """
    basis = []
    for ind, vector in enumerate(np.asarray(vectors, dtype=float)):
        work = vector.copy()
        for other in basis:
            work -= (other @ work) * other
        norm = np.linalg.norm(work)
        if norm <= tol * max(1.0, float(np.linalg.norm(vector))):
            raise InvalidArgumentError(
                f'basis vector {ind} is linearly dependent on the others'
            )
        basis.append(work / norm)
    return np.array(basis)


def _line_value(vector, point, theta):
    return (np.asarray(theta, dtype=float) - point) @ vector


def line(direction, basis=None, point=None, weights=None) -> ConstraintSet:
    """The line ``{point + t u}`` as ``r - 1`` linear constraints.

    The constraints are ``nu_j = (theta - point) . b_j`` for an orthonormal
    basis ``b_j`` of the orthogonal complement of ``u``. A supplied basis is
    checked and orthonormalised, otherwise one is constructed.

    Examples:
        The line of points with ``theta_1 + theta_2 = 1, theta_3 = 1/2``:

        >>> cset = line(
        ...     [1.0, -1.0, 0.0],
        ...     basis=[[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        ...     point=[0.5, 0.5, 0.5],
        ... )
        >>> cset.size
        2
        >>> bool(abs(distance(cset, [0.3, 0.7, 0.5])) < 1e-15)
        True

    """
    direction = np.asarray(direction, dtype=float)
    dim = direction.shape[-1]
    if direction.ndim != 1 or dim < 2:
        raise InvalidArgumentError('direction must be a vector of length >= 2')
    norm = np.linalg.norm(direction)
    if norm == 0:
        raise InvalidArgumentError('direction must be non-zero')
    unit = direction / norm
    if basis is None:
        # Q of a QR decomposition is orthogonal with +-u as its first column
        qmat, _ = np.linalg.qr(np.column_stack([unit, np.eye(dim)]))
        basis = qmat[:, 1:dim].T
    else:
        basis = np.atleast_2d(np.asarray(basis, dtype=float))
        if basis.shape != (dim - 1, dim):
            raise InvalidArgumentError(
                f'a line in R^{dim} needs {dim - 1} basis vectors of length'
                f' {dim}, got shape {basis.shape}'
            )
        for ind, vector in enumerate(basis):
            if abs(vector @ unit) > 1e-10 * max(
                1.0, float(np.linalg.norm(vector))
            ):
                raise InvalidArgumentError(
                    f'basis vector {ind} is not orthogonal to the direction'
                )
        basis = _gram_schmidt(basis)
    point = (
        np.zeros(dim) if point is None else np.asarray(point, dtype=float)
    )
    if point.shape != (dim,):
        raise InvalidArgumentError(f'point must have length {dim}')
    constraints = tuple(
        ConstraintFn(
            dim,
            partial(_line_value, vector, point),
            partial(_constant_grad, vector),
            f'line[{ind}]',
            _zeros_hess,
        )
        for ind, vector in enumerate(basis)
    )
    return ConstraintSet(
        constraints, _weights_for(weights, dim - 1), label=f'line({dim})'
    )


def _sphere_value(theta):
    theta = np.asarray(theta, dtype=float)
    return np.sum(theta * theta, axis=-1) - 1.0


def _sphere_grad(theta):
    return 2.0 * np.asarray(theta, dtype=float)


def sphere(r: int, weights=None) -> ConstraintSet:
    """The unit sphere ``||theta||^2 = 1`` inside ``[-1, 1]^r``."""
    if r < 2:
        raise InvalidArgumentError(f'sphere needs r >= 2, got {r}')
    con = ConstraintFn(
        r,
        _sphere_value,
        _sphere_grad,
        'sphere',
        partial(_constant_hess, 2.0 * np.eye(r)),
    )
    return ConstraintSet(
        (con,),
        _weights_for(weights, 1),
        ambient_box=((-1.0,) * r, (1.0,) * r),
        label=f'sphere({r})',
    )


def _as_matrix(n, k, theta):
    theta = np.asarray(theta, dtype=float)
    return theta.reshape(theta.shape[:-1] + (n, k))


def _stiefel_value(n, k, i, j, theta):
    mat = _as_matrix(n, k, theta)
    return np.sum(mat[..., :, i] * mat[..., :, j], axis=-1) - float(i == j)


def _stiefel_grad(n, k, i, j, theta):
    mat = _as_matrix(n, k, theta)
    grad = np.zeros_like(mat)
    grad[..., :, i] += mat[..., :, j]
    grad[..., :, j] += mat[..., :, i]
    return grad.reshape(mat.shape[:-2] + (n * k,))


def _stiefel_hess(n, k, i, j):
    hess = np.zeros((n, k, n, k))
    for row in range(n):
        hess[row, i, row, j] += 1.0
        hess[row, j, row, i] += 1.0
    return hess.reshape(n * k, n * k)


def stiefel(n: int, k: int, weights=None) -> ConstraintSet:
    """Orthonormal columns ``X'X = I`` for ``X`` in ``R^{n x k}``.

    ``theta`` is ``X`` flattened in row-major order. The constraints
    ``nu_ij = x_i . x_j - delta_ij`` are ordered lexicographically over
    ``i <= j``.

    Examples:
        >>> stiefel(3, 2).size
        3
        >>> [con.label for con in stiefel(3, 2).constraints]
        ['stiefel[0,0]', 'stiefel[0,1]', 'stiefel[1,1]']

    """
    if not 1 <= k <= n:
        raise InvalidArgumentError(
            f'Stiefel manifold needs 1 <= k <= n, got n={n}, k={k}'
        )
    constraints = tuple(
        ConstraintFn(
            n * k,
            partial(_stiefel_value, n, k, i, j),
            partial(_stiefel_grad, n, k, i, j),
            f'stiefel[{i},{j}]',
            partial(_constant_hess, _stiefel_hess(n, k, i, j)),
        )
        for i in range(k)
        for j in range(i, k)
    )
    return ConstraintSet(
        constraints,
        _weights_for(weights, len(constraints)),
        ambient_box=((-1.0,) * (n * k), (1.0,) * (n * k)),
        label=f'stiefel({n},{k})',
    )


def _torus_rho(theta):
    return np.hypot(theta[..., 0], theta[..., 1])


def _torus_value(theta):
    theta = np.asarray(theta, dtype=float)
    return (
        (TORUS_MAJOR_RADIUS - _torus_rho(theta)) ** 2
        + theta[..., 2] ** 2
        - TORUS_MINOR_RADIUS ** 2
    )


def _torus_grad(theta):
    theta = np.asarray(theta, dtype=float)
    rho = _torus_rho(theta)
    factor = np.divide(
        -2.0 * (TORUS_MAJOR_RADIUS - rho),
        rho,
        out=np.zeros_like(rho),
        where=rho > 0,
    )
    return np.stack(
        [factor * theta[..., 0], factor * theta[..., 1], 2.0 * theta[..., 2]],
        axis=-1,
    )


def _torus_hess(theta):
    theta = np.asarray(theta, dtype=float)
    rho = _torus_rho(theta)
    inv_cube = np.divide(
        2.0 * TORUS_MAJOR_RADIUS,
        rho ** 3,
        out=np.zeros_like(rho),
        where=rho > 0,
    )
    hess = np.zeros(theta.shape + (3,))
    hess[..., 0, 0] = 2.0 - inv_cube * theta[..., 1] ** 2
    hess[..., 1, 1] = 2.0 - inv_cube * theta[..., 0] ** 2
    hess[..., 0, 1] = inv_cube * theta[..., 0] * theta[..., 1]
    hess[..., 1, 0] = hess[..., 0, 1]
    hess[..., 2, 2] = 2.0
    return hess


def torus(weights=None) -> ConstraintSet:
    """The torus with major radius 1 and tube radius 1/2 in ``R^3``.

    Examples:
        >>> print(eval_constraints(torus(), [1.5, 0.0, 0.0]))
        [0.]

    """
    con = ConstraintFn(3, _torus_value, _torus_grad, 'torus', _torus_hess)
    return ConstraintSet((con,), _weights_for(weights, 1), label='torus')


def _positive_measure_set(direct, weights, ambient_box, label):
    con = ConstraintFn(direct.dim_in, direct, direct.grad, label)
    return ConstraintSet(
        (con,),
        _weights_for(weights, 1),
        ConstraintKind.POSITIVE_MEASURE,
        direct,
        ambient_box,
        label,
    )


def _half_space_excess(normal, offset, theta):
    return np.maximum(np.asarray(theta, dtype=float) @ normal - offset, 0.0)


def _half_space_project(normal, offset, step, theta):
    theta = np.asarray(theta, dtype=float)
    excess = np.asarray(_half_space_excess(normal, offset, theta))
    return theta - excess[..., np.newaxis] * step


def _half_space_grad(normal, offset, scaled, theta):
    theta = np.asarray(theta, dtype=float)
    outside = np.asarray(_half_space_excess(normal, offset, theta) > 0)
    return np.where(outside[..., np.newaxis], scaled, 0.0)


def half_space(
    normal, offset: float, norm_order: NormOrder = NormOrder.L2, weights=None
) -> ConstraintSet:
    """The half-space ``{normal . theta <= offset}``.

    The direct distance is ``(normal . theta - offset)_+`` divided by the
    dual norm of ``normal``.

    Examples:
        >>> round(float(distance(half_space([1.0], 1.0), [1.3])), 12)
        0.3

    """
    normal = np.atleast_1d(np.asarray(normal, dtype=float))
    if normal.ndim != 1 or not np.any(normal):
        raise InvalidArgumentError('normal must be a non-zero vector')
    offset = float(offset)
    if norm_order == NormOrder.L2:
        step = normal / (normal @ normal)
        scaled = normal / np.linalg.norm(normal)
    else:
        # move along the coordinate with the largest normal component
        ind = int(np.argmax(np.abs(normal)))
        step = np.zeros_like(normal)
        step[ind] = 1.0 / normal[ind]
        scaled = normal / np.max(np.abs(normal))
    direct = DirectDistance(
        normal.size,
        partial(_half_space_project, normal, offset, step),
        norm_order,
        'half-space',
        partial(_half_space_grad, normal, offset, scaled),
    )
    return _positive_measure_set(direct, weights, None, 'half-space')


def _clip(lower, upper, theta):
    return np.clip(np.asarray(theta, dtype=float), lower, upper)


def box(
    lower, upper, norm_order: NormOrder = NormOrder.L2, weights=None
) -> ConstraintSet:
    """The axis aligned box ``[lower, upper]``.

    Examples:
        >>> cset = box([0.0, 0.0], [1.0, 1.0], NormOrder.L1)
        >>> float(distance(cset, [1.5, -0.5]))
        1.0

    """
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    if lower.shape != upper.shape or lower.ndim != 1:
        raise InvalidArgumentError('lower and upper must be equal length')
    if np.any(lower > upper):
        raise InvalidArgumentError('lower must not exceed upper')
    direct = DirectDistance(
        lower.size, partial(_clip, lower, upper), norm_order, 'box'
    )
    return _positive_measure_set(
        direct, weights, (tuple(lower), tuple(upper)), 'box'
    )


def _block_value(con, start, stop, theta):
    return con.value(np.asarray(theta, dtype=float)[..., start:stop])


def _block_grad(con, start, stop, dim, theta):
    theta = np.asarray(theta, dtype=float)
    grad = np.zeros(theta.shape[:-1] + (dim,))
    grad[..., start:stop] = con.grad(theta[..., start:stop])
    return grad


def _block_hess(con, start, stop, dim, theta):
    theta = np.asarray(theta, dtype=float)
    hess = np.zeros(theta.shape[:-1] + (dim, dim))
    hess[..., start:stop, start:stop] = con.hess(theta[..., start:stop])
    return hess


def _block_project(direct, start, stop, theta):
    theta = np.array(theta, dtype=float)
    theta[..., start:stop] = direct.project(theta[..., start:stop])
    return theta


def embed(cset: ConstraintSet, dim: int, start: int) -> ConstraintSet:
    """Lift ``cset`` to act on ``theta[start:start + cset.dim]``.

    Examples:
        >>> lifted = embed(sphere(2), 4, 1)
        >>> print(eval_constraints(lifted, [9.0, 1.0, 0.0, 9.0]))
        [0.]

    """
    stop = start + cset.dim
    if start < 0 or stop > dim:
        raise InvalidArgumentError(
            f'cannot place a block of {cset.dim} at {start} in dimension'
            f' {dim}'
        )
    constraints = tuple(
        ConstraintFn(
            dim,
            partial(_block_value, con, start, stop),
            partial(_block_grad, con, start, stop, dim),
            con.label,
            (
                partial(_block_hess, con, start, stop, dim)
                if con.hess_func is not None else None
            ),
        )
        for con in cset.constraints
    )
    direct = None
    if cset.direct is not None:
        direct = DirectDistance(
            dim,
            partial(_block_project, cset.direct, start, stop),
            cset.direct.norm_order,
            cset.direct.label,
        )
    ambient_box = None
    if cset.ambient_box is not None:
        lower = [-math.inf] * dim
        upper = [math.inf] * dim
        lower[start:stop] = cset.ambient_box[0]
        upper[start:stop] = cset.ambient_box[1]
        ambient_box = (tuple(lower), tuple(upper))
    return ConstraintSet(
        constraints,
        cset.weights,
        cset.kind,
        direct,
        ambient_box,
        cset.label,
    )


_CATALOG: Dict[CatalogName, Callable[..., ConstraintSet]] = {
    CatalogName.SIMPLEX: simplex,
    CatalogName.LINE: line,
    CatalogName.SPHERE: sphere,
    CatalogName.STIEFEL: stiefel,
    CatalogName.TORUS: torus,
    CatalogName.HALF_SPACE: half_space,
    CatalogName.BOX: box,
    CatalogName.AFFINE: affine,
}


def catalog(name, **params) -> ConstraintSet:
    """Build a constraint set from the catalog by name.

    Examples:
        >>> catalog('stiefel', n=3, k=2).size
        3
        >>> catalog(CatalogName.TORUS).dim
        3
        >>> catalog('cube')
        Traceback (most recent call last):
        relaxhmc.exceptions.InvalidArgumentError: unknown constraint ...

    """
    try:
        key = CatalogName(name)
    except ValueError:
        raise InvalidArgumentError(
            f'unknown constraint "{name}", choose from: '
            + ', '.join(item.value for item in CatalogName)
        ) from None
    try:
        return _CATALOG[key](**params)
    except TypeError as exc:
        raise InvalidArgumentError(
            f'bad parameters for {key.value}: {exc}'
        ) from None
