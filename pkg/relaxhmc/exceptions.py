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
"""Exceptions raised by relaxhmc."""

from typing import Iterable, List, Optional, Tuple


class RelaxError(Exception):
    """Base class for all relaxhmc errors."""


class InvalidArgumentError(RelaxError, ValueError):
    ...


class DegenerateJacobianError(RelaxError):
    """The constraint gradients are not linearly independent at a point."""

    def __init__(self, theta, pivot):
        Exception.__init__(self, theta, pivot)
        self.theta = theta
        self.pivot = pivot

    def __str__(self):
        return (
            'Constraint gradients are not transversal at the given point'
            f' (smallest Cholesky pivot {self.pivot:.3g})'
        )


class OutOfSupportError(RelaxError):
    """A point lies outside the support box of a target."""


class NumericError(RelaxError, ArithmeticError):
    ...


class InvalidStartError(RelaxError):
    ...


class AdaptationError(RelaxError):
    ...


class UnsupportedOracleError(RelaxError):
    ...


class InsufficientDataError(RelaxError):
    ...


class ConfigError(RelaxError):
    ...


class ConfigValidationError(ConfigError):
    """Collects every problem found in an experiment configuration.

    Examples:
        >>> print(ConfigValidationError(
        ...     [(3, 'replicates must be >= 1'), (None, 'oops')],
        ...     source='exp.json',
        ... ))
        Invalid experiment configuration exp.json:
         * line 3: replicates must be >= 1
         * oops

    """

    def __init__(
        self,
        problems: Iterable[Tuple[Optional[int], str]],
        source: Optional[str] = None,
    ):
        self.problems: List[Tuple[Optional[int], str]] = list(problems)
        self.source = source
        Exception.__init__(self, self.problems, source)

    def __str__(self):
        msg = 'Invalid experiment configuration'
        if self.source:
            msg += f' {self.source}'
        msg += ':'
        for line, problem in self.problems:
            if line is None:
                msg += f'\n * {problem}'
            else:
                msg += f'\n * line {line}: {problem}'
        return msg


class UnknownExperimentError(ConfigError):

    def __init__(self, name, known):
        Exception.__init__(self, name, known)
        self.name = name
        self.known = known

    def __str__(self):
        return (
            f'Unknown experiment "{self.name}", choose from: '
            + ', '.join(self.known)
        )
