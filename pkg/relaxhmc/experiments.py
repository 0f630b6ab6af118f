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
"""Run catalog experiments and write their result files.

A run writes to its output directory:

``samples.csv``
   One row per kept draw: replicate, lambda, iteration, the components
   ``theta_0 ...``, the constraint distance and the accept flag.
   Rate experiments write the header only.
``summary.json``
   Per lambda diagnostics, the rate fit, the exact sampler baseline and
   experiment specific extras.
``config_resolved.json``
   The configuration after every default and override was applied.
``log/<time>-experiment.conf``
   The same configuration in Rose format.
"""

import csv
import json
import math
from multiprocessing import Pool
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from metomi.rose.reporter import Event, Reporter
from scipy.stats import chisquare

from relaxhmc.config import (
    ExperimentConfig,
    config_to_node,
    dump_config_log,
    timestamp,
)
from relaxhmc.diagnostics import (
    MIN_SERIES_LENGTH,
    auc,
    chain_expectation,
    effective_sample_size,
    fit_rate,
    violation_summary,
)
from relaxhmc.exceptions import (
    InsufficientDataError,
    RelaxError,
    UnsupportedOracleError,
)
from relaxhmc.hmc import Chain, HmcConfig, sample, stability_stepsize_hint
from relaxhmc.network import edge_probabilities
from relaxhmc.oracles import (
    OracleMethod,
    OracleResult,
    relaxed_expectation_quadrature,
    sharp_expectation_quadrature,
    torus_angles,
    truncated_normal_moments,
    vmf_circle_sample,
    vmf_mean_resultant_length,
)
from relaxhmc.targets import (
    ModelSpec,
    RelaxedTarget,
    make_model,
    target_distance,
)

# draws further than this from the torus count as outside it
TORUS_TOLERANCE = 0.05
# angular distance (radians) beyond which sphere draws are in the tail
SPHERE_TAIL_ANGLE = 1.0
TORUS_BINS = 20
MAX_NETWORK_DRAWS = 200
BASELINE_SEED_OFFSET = 7919
# every summary carries all of these, null where they do not apply
EXTRAS_KEYS = (
    'truncated_mean',
    'truncated_variance',
    'relaxed_means',
    'analytic_value',
    'tail_fraction',
    'fraction_outside',
    'alpha2_pvalue',
    'stiefel_error',
    'auc',
    'reference_value',
    'reference_error_bound',
    'reference_method',
)


class ExperimentStartEvent(Event):

    """Event to report the start of an experiment."""

    LEVEL = Event.DEFAULT

    def __repr__(self):
        return "Running %s over lambda = %s with %d replicate(s)" % (
            self.args[0],
            ', '.join('%g' % lam for lam in self.args[1]),
            self.args[2],
        )

    __str__ = __repr__


class ChainDoneEvent(Event):

    """Event to report a finished chain."""

    LEVEL = Event.V

    def __repr__(self):
        chain = self.args[2]
        return (
            "Chain lambda=%g replicate=%d: accept rate %.3f,"
            " step size %.3g, %d divergence(s)" % (
                self.args[0],
                self.args[1],
                chain.accept_rate,
                chain.step_size,
                chain.divergences,
            )
        )

    __str__ = __repr__


class QuadratureDoneEvent(Event):

    """Event to report a reference value."""

    LEVEL = Event.V

    def __repr__(self):
        return "Quadrature %s = %.10g (+/- %.2g)" % (
            self.args[0], self.args[1].value, self.args[1].error_bound
        )

    __str__ = __repr__


class FileWrittenEvent(Event):

    """Event to report a result file has been written."""

    LEVEL = Event.DEFAULT

    def __repr__(self):
        return "Wrote %s" % (self.args[0])

    __str__ = __repr__


# functions of interest, (..., r) -> (...)


def first_component(theta):
    return np.asarray(theta)[..., 0]


def component_sum(theta):
    return np.asarray(theta).sum(axis=-1)


def height(theta):
    return np.asarray(theta)[..., 2]


INTEGRANDS: Dict[str, Optional[Callable]] = {
    'gaussian-inequality': first_component,
    'circle-benchmark': component_sum,
    'sphere-gaussian': component_sum,
    'sphere-t': component_sum,
    'torus': height,
    'simplex': first_component,
    'factor-network': None,
    'rate-zero-measure': component_sum,
    'rate-positive-measure': first_component,
}


def _run_chain(task: Tuple[str, Dict[str, Any], float, Dict[str, Any]]):
    """Sample one (lambda, replicate) pair; runs in a worker process."""
    model, params, lam, hmc = task
    target = make_model(ModelSpec(model, params), lam)
    return sample(target, HmcConfig(**hmc))


def _interval(values) -> Optional[Dict[str, float]]:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return None
    low, high = np.quantile(values, [0.025, 0.975])
    return {
        'mean': float(values.mean()),
        'q025': float(low),
        'q975': float(high),
    }


def _finite_or_none(value) -> Optional[float]:
    if value is None or not math.isfinite(value):
        return None
    return float(value)


def _pooled(chains: List[Chain]) -> np.ndarray:
    return np.concatenate([chain.samples for chain in chains])


def _vmf_parameters(target: RelaxedTarget) -> Tuple[np.ndarray, float]:
    """Direction and concentration of the sphere model's sharp law."""
    center = np.asarray(target.metadata['F'], dtype=float)
    norm = float(np.linalg.norm(center))
    return center / norm, norm / target.metadata['sigma2']


class ExperimentRunner:

    """Run an experiment from its resolved configuration."""

    def __init__(
        self,
        config: ExperimentConfig,
        reporter: Optional[Reporter] = None,
    ):
        self.config = config
        self.defaults = config.defaults
        self.reporter = reporter or Reporter()
        self.out_dir = Path(config.output_dir)
        self.g = INTEGRANDS[config.experiment]
        self.oracle: Optional[OracleResult] = None

    def target(self, lam) -> RelaxedTarget:
        return make_model(self.config.model_spec(), lam)

    def run(self) -> Dict[str, Any]:
        """Run the experiment and write the result files.

        Returns:
            The summary written to ``summary.json``.

        """
        config = self.config
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.reporter(ExperimentStartEvent(
            config.experiment, config.lambda_grid, config.replicates
        ))
        created = timestamp()
        dim = self.target(config.lambda_grid[0]).dim
        if self.defaults.rate:
            chains: Dict[Tuple[float, int], Chain] = {}
            per_lambda, rate_fit, extras = self._rate()
            baseline = None
        else:
            chains = self._sample()
            self.oracle = self._oracle()
            per_lambda = [
                self._summarise(lam, [
                    chains[(lam, rep)] for rep in range(config.replicates)
                ])
                for lam in config.lambda_grid
            ]
            rate_fit = None
            baseline = self._baseline(chains)
            extras = self._extras(chains)
        summary = {
            'experiment': config.experiment,
            'created': created,
            'seed': config.seed,
            'lambdas': list(config.lambda_grid),
            'replicates': config.replicates,
            'dim': dim,
            'per_lambda': per_lambda,
            'rate_fit': rate_fit,
            'baseline': baseline,
            'extras': {**dict.fromkeys(EXTRAS_KEYS), **extras},
        }
        self._write_samples(chains, dim)
        self._write_json('summary.json', summary)
        self._write_json('config_resolved.json', config.to_dict())
        self.reporter(FileWrittenEvent(self.out_dir / dump_config_log(
            self.out_dir, config_to_node(config), created
        )))
        return summary

    # sampling

    def _sample(self) -> Dict[Tuple[float, int], Chain]:
        config = self.config
        keys = [
            (lam, rep)
            for lam in config.lambda_grid
            for rep in range(config.replicates)
        ]
        tasks = []
        for lam, rep in keys:
            hmc = {
                key: value
                for key, value in vars(config.hmc_config(rep)).items()
            }
            tasks.append((
                self.defaults.model.value, dict(config.model), lam, hmc
            ))
        if config.jobs > 1 and len(tasks) > 1:
            with Pool(min(config.jobs, len(tasks))) as pool:
                results = pool.map(_run_chain, tasks)
        else:
            results = [_run_chain(task) for task in tasks]
        chains = dict(zip(keys, results))
        for (lam, rep), chain in chains.items():
            self.reporter(ChainDoneEvent(lam, rep, chain))
        return chains

    def _oracle(self) -> Optional[OracleResult]:
        if self.g is None:
            return None
        grid = self.config.grid or 512
        try:
            result = sharp_expectation_quadrature(
                self.config.model_spec(), self.g, grid=max(grid, 64)
            )
        except UnsupportedOracleError as exc:
            self.reporter(f'No reference value: {exc}', level=Reporter.V)
            return None
        self.reporter(QuadratureDoneEvent('sharp expectation', result))
        return result

    def _summarise(self, lam: float, chains: List[Chain]) -> Dict[str, Any]:
        oracle = self.oracle
        n_kept = len(chains[0])
        ess = None
        ess_per_1000 = None
        if n_kept >= MIN_SERIES_LENGTH:
            per_chain = np.array([
                [
                    effective_sample_size(column).value
                    for column in chain.samples.T
                ]
                for chain in chains
            ])
            ess = per_chain.mean(axis=0).tolist()
            ess_per_1000 = float(
                np.mean(per_chain.min(axis=1)) * 1000.0 / n_kept
            )
        diff = None
        if oracle is not None:
            diff = _interval([
                abs(chain_expectation(chain, self.g) - oracle.value)
                for chain in chains
            ])
        violations = violation_summary(
            np.concatenate([chain.violations for chain in chains])
        )
        try:
            hint = stability_stepsize_hint(
                self.target(lam), chains[0].samples[-1]
            )
        except RelaxError:
            hint = None
        return {
            'lambda': lam,
            'accept_rate': float(np.mean([c.accept_rate for c in chains])),
            'step_size': float(np.mean([c.step_size for c in chains])),
            'n_leapfrog': int(round(
                float(np.mean([c.n_leapfrog for c in chains]))
            )),
            'divergences': int(sum(c.divergences for c in chains)),
            'ess': ess,
            'ess_per_1000': ess_per_1000,
            'violation': violations._asdict(),
            'expectation_diff': diff,
            'oracle_value': None if oracle is None else oracle.value,
            'stepsize_hint': _finite_or_none(hint),
            'error': None,
        }

    def _baseline(self, chains) -> Optional[Dict[str, float]]:
        """Error of exact von Mises draws of the same length as the chains.

        Only the circle benchmark has an exact sampler.
        """
        oracle = self.oracle
        if self.config.experiment != 'circle-benchmark' or oracle is None:
            return None
        target = self.target(self.config.lambda_grid[0])
        direction, kappa = _vmf_parameters(target)
        n_kept = len(next(iter(chains.values())))
        diffs = []
        for rep in range(self.config.replicates):
            draws = vmf_circle_sample(
                direction,
                1.0 / kappa,
                n_kept,
                seed=self.config.seed + BASELINE_SEED_OFFSET + rep,
            )
            diffs.append(abs(float(np.mean(self.g(draws))) - oracle.value))
        return _interval(diffs)

    def _by_lambda(self, chains) -> List[Tuple[float, List[Chain]]]:
        return [
            (lam, [
                chains[(lam, rep)] for rep in range(self.config.replicates)
            ])
            for lam in self.config.lambda_grid
        ]

    def _extras(self, chains) -> Dict[str, Any]:
        name = self.config.experiment
        target = self.target(self.config.lambda_grid[0])
        extras: Dict[str, Any] = {}
        by_lambda = self._by_lambda(chains)
        if name == 'gaussian-inequality':
            meta = target.metadata
            extras['truncated_mean'], extras['truncated_variance'] = (
                truncated_normal_moments(
                    meta['posterior_mean'],
                    meta['posterior_variance'],
                    meta['upper'],
                )
            )
            extras['relaxed_means'] = [
                relaxed_expectation_quadrature(
                    self.target(lam), first_component, self.config.grid
                ).value
                for lam in self.config.lambda_grid
            ]
        elif name in ('circle-benchmark', 'sphere-gaussian'):
            direction, kappa = _vmf_parameters(target)
            extras['analytic_value'] = vmf_mean_resultant_length(
                kappa, target.dim
            ) * float(direction.sum())
        if name in ('sphere-gaussian', 'sphere-t'):
            direction, _ = _vmf_parameters(target)
            extras['tail_fraction'] = []
            for _, lam_chains in by_lambda:
                draws = _pooled(lam_chains)
                unit = draws / np.linalg.norm(draws, axis=-1, keepdims=True)
                angle = np.arccos(np.clip(unit @ direction, -1.0, 1.0))
                extras['tail_fraction'].append(
                    float(np.mean(angle > SPHERE_TAIL_ANGLE))
                )
        elif name == 'torus':
            extras['fraction_outside'] = [
                float(np.mean(
                    np.concatenate([c.violations for c in lam_chains])
                    > TORUS_TOLERANCE
                ))
                for _, lam_chains in by_lambda
            ]
            extras['alpha2_pvalue'] = [
                _ring_angle_pvalue(lam_chains)
                for _, lam_chains in by_lambda
            ]
        elif name == 'factor-network':
            extras['stiefel_error'] = []
            extras['auc'] = []
            layout = target.metadata['layout']
            edges = target.metadata['data'].edges()
            for _, lam_chains in by_lambda:
                draws = _pooled(lam_chains)
                u = draws[:, layout.u_start:].reshape(-1, layout.R, layout.d)
                gram = np.einsum('...ki,...kj->...ij', u, u)
                extras['stiefel_error'].append(float(np.mean(
                    np.abs(gram - np.eye(layout.d)).sum(axis=(-2, -1))
                )))
                keep = np.linspace(
                    0, len(draws) - 1, min(len(draws), MAX_NETWORK_DRAWS)
                ).astype(int)
                probs = np.mean(
                    [edge_probabilities(layout, draws[i]) for i in keep],
                    axis=0,
                )
                try:
                    extras['auc'].append(auc(probs, edges))
                except RelaxError:
                    extras['auc'].append(None)
        return extras

    # quadrature rate experiments

    def _reference(self) -> OracleResult:
        name = self.config.experiment
        if name == 'rate-positive-measure':
            meta = self.target(1.0).metadata
            mean, _ = truncated_normal_moments(
                meta['posterior_mean'],
                meta['posterior_variance'],
                meta['upper'],
            )
            return OracleResult(mean, 0.0, OracleMethod.ANALYTIC)
        return sharp_expectation_quadrature(
            self.config.model_spec(), self.g, grid=max(
                self.config.grid or 512, 64
            )
        )

    def _rate(self):
        """Relaxed vs sharp expectations by quadrature over the grid."""
        reference = self._reference()
        self.reporter(QuadratureDoneEvent('reference', reference))
        s = self.defaults.codimension
        per_lambda = []
        errors = []
        for lam in self.config.lambda_grid:
            target = self.target(lam)
            relaxed = relaxed_expectation_quadrature(
                target, self.g, self.config.grid
            )
            violation = relaxed_expectation_quadrature(
                target,
                _DistanceIntegrand(target),
                self.config.grid,
            )
            self.reporter(QuadratureDoneEvent('lambda=%g' % lam, relaxed))
            error = abs(relaxed.value - reference.value)
            errors.append(error)
            per_lambda.append({
                'lambda': lam,
                'accept_rate': None,
                'step_size': None,
                'n_leapfrog': None,
                'divergences': None,
                'ess': None,
                'ess_per_1000': None,
                'violation': {
                    'mean': violation.value, 'q025': None, 'q975': None,
                },
                'expectation_diff': None,
                'oracle_value': reference.value,
                'stepsize_hint': None,
                'error': error,
            })
        try:
            fit = fit_rate(self.config.lambda_grid, errors, s=s)
        except InsufficientDataError as exc:
            self.reporter(f'No rate fit: {exc}', level=Reporter.DEFAULT)
            rate_fit = None
        else:
            rate_fit = {
                'slope': fit.slope,
                'intercept': fit.intercept,
                'r_squared': fit.r_squared,
                's': fit.s,
                'lambdas': list(fit.lambdas),
                'errors': list(fit.errors),
                'bound_ratios': list(fit.bound_ratios),
            }
        extras = {
            'reference_value': reference.value,
            'reference_error_bound': reference.error_bound,
            'reference_method': reference.method.value,
        }
        return per_lambda, rate_fit, extras

    # output

    def _write_samples(self, chains, dim: int) -> None:
        path = self.out_dir / 'samples.csv'
        with open(path, 'w', newline='') as handle:
            writer = csv.writer(handle)
            writer.writerow(
                ['replicate', 'lambda', 'iteration']
                + [f'theta_{i}' for i in range(dim)]
                + ['distance', 'accepted']
            )
            for (lam, rep), chain in sorted(
                chains.items(), key=lambda item: (-item[0][0], item[0][1])
            ):
                for iteration, theta, dist, accepted in zip(
                    chain.iterations,
                    chain.samples,
                    chain.violations,
                    chain.accepted,
                ):
                    writer.writerow(
                        [rep, '%.17g' % lam, int(iteration)]
                        + ['%.17g' % value for value in theta]
                        + ['%.17g' % dist, int(bool(accepted))]
                    )
        self.reporter(FileWrittenEvent(path))

    def _write_json(self, name: str, doc: Dict[str, Any]) -> None:
        path = self.out_dir / name
        path.write_text(json.dumps(doc, indent=2, allow_nan=False) + '\n')
        self.reporter(FileWrittenEvent(path))


class _DistanceIntegrand:
    """Picklable ``theta -> d(theta, D)`` for a target."""

    def __init__(self, target: RelaxedTarget):
        self.target = target

    def __call__(self, theta):
        return target_distance(self.target, theta)


def _ring_angle_pvalue(chains: List[Chain]) -> Optional[float]:
    """Chi-square uniformity p-value of the ring angle, thinned by ESS."""
    thinned = []
    for chain in chains:
        _, ring = torus_angles(chain.samples)
        if len(ring) < MIN_SERIES_LENGTH:
            continue
        ess = min(
            effective_sample_size(np.cos(ring)).value,
            effective_sample_size(np.sin(ring)).value,
        )
        step = max(1, int(math.ceil(len(ring) / ess)))
        thinned.append(ring[::step])
    if not thinned:
        return None
    ring = np.concatenate(thinned)
    if len(ring) < 5 * TORUS_BINS:
        return None
    counts, _ = np.histogram(ring, bins=TORUS_BINS, range=(0.0, 2 * np.pi))
    return float(chisquare(counts).pvalue)


def run_experiment(
    config: ExperimentConfig,
    reporter: Optional[Reporter] = None,
) -> Dict[str, Any]:
    """Run an experiment, see :class:`ExperimentRunner`."""
    return ExperimentRunner(config, reporter).run()
