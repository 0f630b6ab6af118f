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
"""Unit tests for constraint functions and distances."""

import math

import numpy as np
import pytest
from pytest import param

from relaxhmc.constraints import (
    ConstraintKind,
    NormOrder,
    affine,
    box,
    catalog,
    constraint_gradients,
    d_expansion_contains,
    distance,
    embed,
    eval_constraints,
    grad_log_jacobian,
    half_space,
    jacobian,
    line,
    log_jacobian_grid,
    simplex,
    sphere,
    stiefel,
    torus,
)
from relaxhmc.exceptions import DegenerateJacobianError, InvalidArgumentError


def _numeric_gradient(func, theta, h=1e-6):
    theta = np.asarray(theta, dtype=float)
    grad = np.empty_like(theta)
    for j in range(theta.size):
        shift = np.zeros_like(theta)
        shift[j] = h
        grad[j] = (func(theta + shift) - func(theta - shift)) / (2 * h)
    return grad


@pytest.mark.parametrize(
    'cset, theta',
    [
        param(sphere(3), [0.0, 0.6, 0.8], id='sphere'),
        param(simplex(3), [0.2, 0.3, 0.5], id='simplex'),
        param(torus(), [0.0, 1.0, 0.5], id='torus'),
        param(
            stiefel(3, 2), np.eye(3)[:, :2].ravel(), id='stiefel'
        ),
        param(
            line([1.0, -1.0, 0.0], point=[0.5, 0.5, 0.5]),
            [0.9, 0.1, 0.5],
            id='line',
        ),
        param(half_space([1.0], 1.0), [-3.0], id='half-space'),
        param(box([0.0, 0.0], [1.0, 1.0]), [0.5, 1.0], id='box'),
    ]
)
def test_zero_on_the_set(cset, theta):
    """The constraints and distance vanish on D."""
    assert np.allclose(eval_constraints(cset, theta), 0.0, atol=1e-12)
    assert float(distance(cset, theta)) == pytest.approx(0.0, abs=1e-12)
    assert d_expansion_contains(cset, theta, 0.0)


def test_distance_is_weighted_sum():
    cset = line(
        [1.0, 0.0, 0.0],
        basis=[[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        weights=[2.0, 5.0],
    )
    theta = [0.0, 0.3, -0.1]
    assert np.allclose(eval_constraints(cset, theta), [0.3, -0.1])
    assert float(distance(cset, theta)) == pytest.approx(1.1)


def test_distance_broadcasts():
    """Batches of points give batches of distances."""
    points = np.random.default_rng(3).normal(size=(4, 5, 3))
    result = distance(sphere(3), points)
    assert result.shape == (4, 5)
    assert np.allclose(
        result, np.abs(np.sum(points ** 2, axis=-1) - 1.0)
    )


def test_wrong_dimension():
    with pytest.raises(InvalidArgumentError, match='dimension 3'):
        eval_constraints(sphere(3), [1.0, 0.0])


@pytest.mark.parametrize(
    'norm_order, expect',
    [
        param(NormOrder.L2, 1 / math.sqrt(2), id='L2'),
        param(NormOrder.L1, 1.0, id='L1'),
    ]
)
def test_half_space_distance(norm_order, expect):
    """The projection distance depends on the norm."""
    cset = half_space([1.0, 1.0], 1.0, norm_order)
    assert cset.kind == ConstraintKind.POSITIVE_MEASURE
    assert float(distance(cset, [1.0, 1.0])) == pytest.approx(expect)
    assert float(distance(cset, [0.2, 0.2])) == 0.0


def test_half_space_gradient():
    cset = half_space([1.0, 1.0], 1.0)
    grads = constraint_gradients(cset, [1.0, 1.0])
    assert np.allclose(grads, [[1 / math.sqrt(2), 1 / math.sqrt(2)]])
    assert np.allclose(constraint_gradients(cset, [0.0, 0.0]), 0.0)


def test_box_distance():
    cset = box([0.0, 0.0], [1.0, 1.0])
    assert float(distance(cset, [2.0, 2.0])) == pytest.approx(math.sqrt(2))
    assert cset.ambient_box == ((0.0, 0.0), (1.0, 1.0))


def test_sphere_jacobian():
    """J = 2 |theta| for the sphere."""
    theta = np.array([0.3, -1.2, 0.4])
    assert float(jacobian(sphere(3), theta)) == pytest.approx(
        2 * np.linalg.norm(theta)
    )


def test_jacobian_degenerate():
    """The sphere constraint has no gradient at the origin."""
    with pytest.raises(DegenerateJacobianError) as exc:
        jacobian(sphere(2), [0.0, 0.0])
    assert 'transversal' in str(exc.value)


def test_jacobian_positive_measure():
    with pytest.raises(InvalidArgumentError):
        jacobian(half_space([1.0], 0.0), [2.0])


def test_log_jacobian_grid():
    """The batch log Jacobian agrees with the pointwise one."""
    points = np.array([[1.3, 0.4, 0.2], [0.2, 1.6, -0.1], [1.0, 1.0, 0.3]])
    cset = torus()
    expect = [math.log(float(jacobian(cset, point))) for point in points]
    assert np.allclose(log_jacobian_grid(cset, points), expect)


def test_log_jacobian_grid_degenerate():
    assert log_jacobian_grid(sphere(2), np.zeros((1, 2)))[0] == -np.inf


@pytest.mark.parametrize(
    'cset, theta',
    [
        param(torus(), [1.3, 0.4, 0.2], id='torus'),
        param(sphere(3), [0.3, -0.9, 0.5], id='sphere'),
        param(
            stiefel(3, 2),
            [0.9, 0.1, 0.2, 0.8, 0.1, 0.3],
            id='stiefel',
        ),
    ]
)
def test_grad_log_jacobian(cset, theta):
    """The analytic gradient of log J matches central differences."""
    def log_j(point):
        return math.log(float(jacobian(cset, point)))
    assert np.allclose(
        grad_log_jacobian(cset, theta),
        _numeric_gradient(log_j, theta),
        rtol=1e-5,
        atol=1e-6,
    )


def test_stiefel_batches():
    """Stiefel constraints take a batch of flattened matrices."""
    rng = np.random.default_rng(0)
    mats = np.stack([
        np.linalg.qr(rng.normal(size=(4, 2)))[0] for _ in range(3)
    ])
    values = eval_constraints(stiefel(4, 2), mats.reshape(3, 8))
    assert values.shape == (3, 3)
    assert np.allclose(values, 0.0, atol=1e-12)


def test_stiefel_row_major():
    """theta is X flattened row by row."""
    theta = np.zeros(6)
    theta[0] = 2.0  # X[0, 0]
    values = eval_constraints(stiefel(3, 2), theta)
    assert values.tolist() == [3.0, 0.0, -1.0]


def test_line_default_basis():
    """A constructed basis spans the orthogonal complement."""
    cset = line([1.0, 2.0, 2.0])
    assert cset.size == 2
    grads = constraint_gradients(cset, np.zeros(3))
    assert np.allclose(grads @ [1.0, 2.0, 2.0], 0.0)
    assert np.allclose(grads @ grads.T, np.eye(2))


def test_line_bad_basis():
    with pytest.raises(InvalidArgumentError, match='not orthogonal'):
        line([1.0, 0.0], basis=[[1.0, 1.0]])


def test_weighted_line_multiplier():
    """A multiplier on one constraint scales that term of the distance."""
    base = line([1.0, -1.0, 0.0], basis=[[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
                point=[0.5, 0.5, 0.5])
    weighted = base.with_weights([1.0, 10.0])
    theta = [0.5, 0.5, 0.6]
    assert float(distance(weighted, theta)) == pytest.approx(
        10 * float(distance(base, theta))
    )


@pytest.mark.parametrize(
    'weights',
    [
        param([0.0], id='zero'),
        param([1.0, 2.0], id='too-many'),
        param([-1.0], id='negative'),
    ]
)
def test_bad_weights(weights):
    with pytest.raises(InvalidArgumentError):
        sphere(2, weights=weights)


def test_embed():
    """Embedded constraints ignore the other coordinates."""
    lifted = embed(stiefel(2, 1), 5, 2)
    theta = np.array([7.0, -3.0, 0.6, 0.8, 11.0])
    assert np.allclose(eval_constraints(lifted, theta), 0.0)
    grads = constraint_gradients(lifted, theta)
    assert np.allclose(grads[0, [0, 1, 4]], 0.0)
    assert np.allclose(grads[0, 2:4], [1.2, 1.6])
    assert lifted.ambient_box[0][0] == -math.inf


def test_embed_out_of_range():
    with pytest.raises(InvalidArgumentError):
        embed(sphere(3), 4, 2)


def test_d_expansion():
    cset = simplex(3)
    assert d_expansion_contains(cset, [0.3, 0.3, 0.5], 0.1)
    assert not d_expansion_contains(cset, [0.3, 0.3, 0.5], 0.09)
    with pytest.raises(InvalidArgumentError):
        d_expansion_contains(cset, [0.3, 0.3, 0.4], -1.0)


def test_catalog():
    assert catalog('sphere', r=4).dim == 4
    assert catalog('half-space', normal=[1.0], offset=0.0).size == 1
    with pytest.raises(InvalidArgumentError, match='bad parameters'):
        catalog('sphere', radius=2)


def test_affine():
    cset = affine([[1.0, 0.0], [0.0, 2.0]], [1.0, 2.0], weights=[1.0, 3.0])
    assert np.allclose(eval_constraints(cset, [1.0, 1.0]), 0.0)
    assert eval_constraints(cset, [2.0, 0.5]).tolist() == [1.0, -1.0]
    assert float(distance(cset, [2.0, 0.5])) == pytest.approx(4.0)
    assert np.allclose(
        constraint_gradients(cset, [5.0, 5.0]), [[1.0, 0.0], [0.0, 2.0]]
    )


@pytest.mark.parametrize(
    'name, params',
    [
        param('simplex', {'r': 3}, id='simplex'),
        param('line', {'direction': [1.0, 2.0, 0.5]}, id='line'),
        param('sphere', {'r': 3}, id='sphere'),
        param('stiefel', {'n': 3, 'k': 2}, id='stiefel'),
        param('torus', {}, id='torus'),
        param('affine', {'matrix': [[1.0, -1.0, 2.0]], 'offset': [0.5]},
              id='affine'),
        param('half-space', {'normal': [1.0, -2.0], 'offset': 0.3},
              id='half-space-L2'),
        param('half-space', {'normal': [1.0, -2.0], 'offset': 0.3,
                             'norm_order': NormOrder.L1},
              id='half-space-L1'),
    ]
)
def test_catalog_gradients(name, params):
    """Constraint gradients match central differences at random points."""
    cset = catalog(name, **params)
    rng = np.random.default_rng(21)
    checked = 0
    for theta in rng.uniform(-1.5, 1.5, (200, cset.dim)):
        if name == 'torus' and np.hypot(theta[0], theta[1]) < 0.1:
            continue
        if name == 'half-space' and abs(
            theta @ params['normal'] - params['offset']
        ) < 1e-3:
            continue
        for j, grad in enumerate(constraint_gradients(cset, theta)):
            numeric = _numeric_gradient(
                lambda point: eval_constraints(cset, point)[j], theta
            )
            assert np.allclose(grad, numeric, rtol=1e-6, atol=1e-6)
        checked += 1
    assert checked >= 100


def _near(name, rng):
    """A random point within 0.05 of the named set."""
    if name == 'sphere':
        point = rng.normal(size=3)
        return point / np.linalg.norm(point) * rng.uniform(0.95, 1.05)
    if name == 'stiefel':
        frame, _ = np.linalg.qr(rng.normal(size=(3, 2)))
        return frame.ravel() + rng.uniform(-0.01, 0.01, 6)
    if name == 'torus':
        angles = rng.uniform(0.0, 2 * np.pi, 2)
        point = np.array([
            (1 + 0.5 * math.cos(angles[0])) * math.cos(angles[1]),
            (1 + 0.5 * math.cos(angles[0])) * math.sin(angles[1]),
            0.5 * math.sin(angles[0]),
        ])
        return point + rng.uniform(-0.03, 0.03, 3)
    return rng.dirichlet(np.ones(3)) + rng.uniform(-0.02, 0.02, 3)


@pytest.mark.parametrize(
    'cset, name',
    [
        param(sphere(3), 'sphere', id='sphere'),
        param(stiefel(3, 2), 'stiefel', id='stiefel'),
        param(torus(), 'torus', id='torus'),
        param(simplex(3), 'simplex', id='simplex'),
    ]
)
def test_jacobian_positive_near_the_set(cset, name):
    rng = np.random.default_rng(22)
    for _ in range(100):
        value = float(jacobian(cset, _near(name, rng)))
        assert math.isfinite(value)
        assert value > 0.0


def test_torus_jacobian_closed_form():
    """J = 2 sqrt((1 - rho)^2 + z^2) off the core circle."""
    rng = np.random.default_rng(23)
    points = rng.uniform(-1.5, 1.5, (100, 3))
    rho = np.hypot(points[:, 0], points[:, 1])
    points = points[
        (rho > 0.1) & (np.hypot(1.0 - rho, points[:, 2]) > 0.05)
    ]
    assert len(points) > 50
    for point in points:
        rho = math.hypot(point[0], point[1])
        assert float(jacobian(torus(), point)) == pytest.approx(
            2.0 * math.hypot(1.0 - rho, point[2]), rel=1e-12
        )


@pytest.mark.parametrize(
    'norm_order, norm',
    [
        param(NormOrder.L2, 2, id='L2'),
        param(NormOrder.L1, 1, id='L1'),
    ]
)
def test_half_space_triangle_inequality(norm_order, norm):
    """d(x, D) <= |x - y| + d(y, D) in the distance's own norm."""
    cset = half_space([1.0, -2.0, 0.5], 0.3, norm_order)
    rng = np.random.default_rng(24)
    for x, y in rng.normal(0.0, 2.0, (200, 2, 3)):
        assert float(distance(cset, x)) <= (
            np.linalg.norm(x - y, ord=norm) + float(distance(cset, y)) + 1e-12
        )
