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
"""
Relaxhmc
========

Sample Bayesian posteriors whose parameters are restricted to a constrained
space ``D`` by replacing the sharp indicator ``1_D(theta)`` with the
exponential kernel ``exp(-sum_j w_j |nu_j(theta)| / lambda_j)`` of a
constraint derived distance, then running Hamiltonian Monte Carlo on the
resulting density over the ambient space.

Library
-------

The library is split by concern:

``relaxhmc.constraints``
   Constraint functions ``nu_j``, the weighted distance, direct (projection)
   distances for sets of positive measure, the co-area Jacobian and a
   catalog of common constrained spaces (simplex, line, sphere, Stiefel,
   torus, half-space, box).
``relaxhmc.targets``
   Unnormalised relaxed log densities with gradients, and the catalog of
   models (``make_model``).
``relaxhmc.network``
   The latent factor network model with a synthetic data generator.
``relaxhmc.hmc``
   Leapfrog integration, the Metropolis corrected sampler with dual
   averaging step size adaptation and the stability step size hint.
``relaxhmc.oracles``
   Ground truth: analytic moments, exact samplers on the circle and torus
   and quadrature for sharply constrained and relaxed expectations.
``relaxhmc.diagnostics``
   Effective sample size, violation summaries, expectation differences and
   convergence rate fits.

Example::

   from relaxhmc.hmc import HmcConfig, sample
   from relaxhmc.targets import ModelName, ModelSpec, make_model

   target = make_model(
       ModelSpec(ModelName.SPHERE_GAUSSIAN, {'sigma2': 0.1}),
       1e-3,
   )
   chain = sample(target, HmcConfig(n_iterations=2000, n_burnin=1000))

Command Line
------------

The ``relaxhmc`` command runs named experiments:

.. code-block:: console

   $ relaxhmc list
   $ relaxhmc run circle-benchmark --lambda 1e-3,1e-4,1e-5 --replicates 10
   $ relaxhmc validate experiment.json

Experiment configuration may be given as a JSON document or as a Rose
configuration file (``key=value`` with ``[hmc]`` and ``[model]`` sections).

.. code-block:: ini

   # experiment.conf
   experiment=circle-benchmark
   lambda_grid=[1e-3, 1e-4]
   replicates=4

   [hmc]
   n_iterations=3000
   n_burnin=1000

   [model]
   sigma2=0.5

Rose optional configurations (``opt/experiment-<key>.conf``) can be switched
on with ``-O <key>`` or the ``RELAXHMC_OPT_CONF_KEYS`` environment variable
and any item can be overridden with ``-D '[section]key=value'``.

Each run writes ``samples.csv``, ``summary.json`` and
``config_resolved.json``; the last of these reproduces ``samples.csv``
exactly when run again.
"""

import logging

__version__ = '0.1.0.dev'

LOG = logging.getLogger('relaxhmc')
