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
"""Latent factor model for a population of undirected networks.

Each of ``n`` networks over ``R`` shared nodes has edge log-odds::

    eta_ikl = mu_kl + sum_s v_is U_ks U_ls        (k < l)

with node factors ``U`` (``R x d``) kept near the Stiefel manifold
``U^T U = I`` by relaxation and a shrinkage (Laplace) prior on ``U``.

The parameter vector is laid out as ``[mu (pairs k < l), v (n x d, row
major), U (R x d, row major)]``.
"""

from dataclasses import dataclass
from functools import partial
import json
import math
from pathlib import Path
from typing import Any, Dict, Mapping, Tuple, Union

import numpy as np
from scipy.special import expit, logit

from relaxhmc import LOG
from relaxhmc.constraints import embed, stiefel
from relaxhmc.exceptions import InvalidArgumentError
from relaxhmc.targets import ModelName, RelaxedTarget

SHRINKAGE_PRIORS = ('laplace', 'normal')


@dataclass(frozen=True)
class NetworkLayout:
    """Where ``mu``, ``v`` and ``U`` live in the parameter vector.

    Examples:
        >>> layout = NetworkLayout(R=4, n=2, d=2)
        >>> layout.n_pairs, layout.dim
        (6, 18)

    """

    R: int
    n: int
    d: int

    def __post_init__(self):
        if self.R < 2 or self.n < 1 or self.d < 1 or self.d > self.R:
            raise InvalidArgumentError(
                'network dimensions need R >= 2, n >= 1 and 1 <= d <= R,'
                f' got R={self.R}, n={self.n}, d={self.d}'
            )

    @property
    def n_pairs(self) -> int:
        return self.R * (self.R - 1) // 2

    @property
    def u_start(self) -> int:
        return self.n_pairs + self.n * self.d

    @property
    def dim(self) -> int:
        return self.u_start + self.R * self.d

    @property
    def pairs(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.triu_indices(self.R, 1)

    def split(self, theta) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        theta = np.asarray(theta, dtype=float)
        mu = theta[:self.n_pairs]
        v = theta[self.n_pairs:self.u_start].reshape(self.n, self.d)
        u = theta[self.u_start:].reshape(self.R, self.d)
        return mu, v, u

    def join(self, mu, v, u) -> np.ndarray:
        return np.concatenate([
            np.ravel(mu), np.ravel(v), np.ravel(u)
        ]).astype(float)


@dataclass(frozen=True)
class NetworkData:
    """Adjacency matrices ``(n, R, R)`` of a network population."""

    adjacency: np.ndarray
    d_true: int
    seed: int

    def __post_init__(self):
        adjacency = np.asarray(self.adjacency, dtype=float)
        if adjacency.ndim != 3 or adjacency.shape[1] != adjacency.shape[2]:
            raise InvalidArgumentError(
                'adjacency must have shape (n, R, R),'
                f' got {adjacency.shape}'
            )
        if not np.all((adjacency == 0) | (adjacency == 1)):
            raise InvalidArgumentError('adjacency entries must be 0 or 1')
        if not np.array_equal(adjacency, np.swapaxes(adjacency, 1, 2)):
            raise InvalidArgumentError('adjacency matrices must be symmetric')
        object.__setattr__(self, 'adjacency', adjacency)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def R(self) -> int:
        return self.adjacency.shape[1]

    def edges(self) -> np.ndarray:
        """The upper triangle edge indicators, shape ``(n, pairs)``."""
        rows, cols = np.triu_indices(self.R, 1)
        return self.adjacency[:, rows, cols]


def generate_network(
    R: int = 10,
    n: int = 5,
    d: int = 3,
    seed: int = 0,
    mu_variance: float = 1.0,
    v_variance: float = 1.0,
) -> NetworkData:
    """Draw a synthetic network population from the factor model.

    ``U`` is uniform on the Stiefel manifold; ``mu`` and ``v`` come from
    their normal priors with the given variances.

    Examples:
        >>> data = generate_network(R=6, n=3, d=2, seed=1)
        >>> data.adjacency.shape
        (3, 6, 6)
        >>> bool((generate_network(6, 3, 2, 1).adjacency
        ...       == data.adjacency).all())
        True

    """
    layout = NetworkLayout(R, n, d)
    if min(mu_variance, v_variance) <= 0:
        raise InvalidArgumentError('prior variances must be positive')
    rng = np.random.default_rng(seed)
    mu = rng.normal(0.0, math.sqrt(mu_variance), layout.n_pairs)
    u, _ = np.linalg.qr(rng.normal(size=(R, d)))
    v = rng.normal(0.0, math.sqrt(v_variance), size=(n, d))
    probs = expit(_log_odds(layout, mu, v, u))
    rows, cols = layout.pairs
    adjacency = np.zeros((n, R, R))
    edges = (rng.uniform(size=probs.shape) < probs).astype(float)
    adjacency[:, rows, cols] = edges
    adjacency[:, cols, rows] = edges
    LOG.debug(
        f'generated {n} networks over {R} nodes, edge density'
        f' {edges.mean():.3f}'
    )
    return NetworkData(adjacency, d, seed)


def dump_network(data: NetworkData, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps({
        'n': data.n,
        'R': data.R,
        'd_true': data.d_true,
        'seed': data.seed,
        'adjacency': data.adjacency.astype(int).tolist(),
    }, indent=1))


def load_network(path: Union[str, Path]) -> NetworkData:
    try:
        doc = json.loads(Path(path).read_text())
        data = NetworkData(
            doc['adjacency'], int(doc.get('d_true', 0)), int(
                doc.get('seed', 0)
            )
        )
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise InvalidArgumentError(
            f'could not read network data from {path}: {exc}'
        ) from None
    if (doc.get('n'), doc.get('R')) not in ((None, None), (data.n, data.R)):
        raise InvalidArgumentError(
            f'{path}: n and R do not match the adjacency shape'
        )
    return data


def _log_odds(layout: NetworkLayout, mu, v, u) -> np.ndarray:
    rows, cols = layout.pairs
    factors = u[rows] * u[cols]  # (pairs, d)
    return mu[np.newaxis, :] + v @ factors.T


def edge_probabilities(layout: NetworkLayout, theta) -> np.ndarray:
    """Edge probabilities ``(n, pairs)`` at a parameter vector."""
    return expit(_log_odds(layout, *layout.split(theta)))


def _log_likelihood(layout, edges, theta):
    eta = _log_odds(layout, *layout.split(theta))
    return float(np.sum(edges * eta - np.logaddexp(0.0, eta)))


def _grad_log_likelihood(layout, edges, theta):
    mu, v, u = layout.split(theta)
    rows, cols = layout.pairs
    factors = u[rows] * u[cols]
    resid = edges - expit(mu[np.newaxis, :] + v @ factors.T)
    full = np.zeros((layout.n, layout.R, layout.R))
    full[:, rows, cols] = resid
    full[:, cols, rows] = resid
    return layout.join(
        resid.sum(axis=0),
        resid @ factors,
        np.einsum('ikl,ls,is->ks', full, u, v),
    )


def _log_prior(layout, shrinkage, scale, mu_var, v_var, theta):
    mu, v, u = layout.split(theta)
    value = -0.5 * (mu @ mu / mu_var + np.sum(v * v) / v_var)
    if shrinkage == 'laplace':
        value -= np.sum(np.abs(u)) / scale
    else:
        value -= 0.5 * np.sum(u * u) / scale ** 2
    return float(value)


def _grad_log_prior(layout, shrinkage, scale, mu_var, v_var, theta):
    mu, v, u = layout.split(theta)
    if shrinkage == 'laplace':
        grad_u = -np.sign(u) / scale
    else:
        grad_u = -u / scale ** 2
    return layout.join(-mu / mu_var, -v / v_var, grad_u)


def initial_point(layout: NetworkLayout, edges=None) -> np.ndarray:
    """Zero ``v`` with orthonormal ``U``.

    ``mu`` starts at the smoothed empirical log odds of each edge when the
    edges are given, at zero otherwise.

    Examples:
        >>> layout = NetworkLayout(R=3, n=3, d=1)
        >>> edges = np.array([[1, 0, 0], [1, 0, 1], [1, 0, 0]])
        >>> np.round(initial_point(layout, edges)[:3], 4)
        array([ 1.9459, -1.9459, -0.5108])

    """
    base = np.eye(layout.R)[:, :layout.d] + 1.0 / layout.R
    u, _ = np.linalg.qr(base)
    mu = np.zeros(layout.n_pairs)
    if edges is not None:
        counts = np.sum(edges, axis=0)
        mu = logit((counts + 0.5) / (layout.n + 1.0))
    return layout.join(mu, np.zeros((layout.n, layout.d)), u)


def make_network_model(
    params: Mapping[str, Any], lambdas: Tuple[float, ...]
) -> RelaxedTarget:
    """Build the relaxed factor network target from model parameters."""
    if params['data'] is not None:
        data = load_network(params['data'])
    else:
        data = generate_network(
            int(params['R']),
            int(params['n']),
            int(params['d']),
            int(params['data_seed']),
            float(params['mu_variance']),
            float(params['v_variance']),
        )
    layout = NetworkLayout(data.R, data.n, int(params['d']))
    shrinkage = str(params['shrinkage']).lower()
    if shrinkage not in SHRINKAGE_PRIORS:
        raise InvalidArgumentError(
            f'shrinkage must be one of {", ".join(SHRINKAGE_PRIORS)},'
            f' got {shrinkage}'
        )
    prior = (
        shrinkage,
        float(params['laplace_scale']),
        float(params['mu_variance']),
        float(params['v_variance']),
    )
    if min(prior[1:]) <= 0:
        raise InvalidArgumentError('prior scales must be positive')
    cset = None
    if params['constrained']:
        cset = embed(
            stiefel(layout.R, layout.d, params['weights']),
            layout.dim,
            layout.u_start,
        )
    edges = data.edges()
    metadata: Dict[str, Any] = {'layout': layout, 'data': data}
    return RelaxedTarget(
        layout.dim,
        partial(_log_likelihood, layout, edges),
        partial(_grad_log_likelihood, layout, edges),
        partial(_log_prior, layout, *prior),
        partial(_grad_log_prior, layout, *prior),
        cset,
        lambdas,
        box=None if cset is None else cset.ambient_box,
        initial_point=tuple(initial_point(layout, edges)),
        name=ModelName.FACTOR_NETWORK.value,
        metadata=metadata,
    )
