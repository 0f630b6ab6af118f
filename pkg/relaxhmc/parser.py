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
"""Parsing of configuration values written as Python/Jinja2 literals."""

from ast import literal_eval as python_literal_eval
from typing import Any

from jinja2.nativetypes import NativeEnvironment  # type: ignore
from jinja2.nodes import (  # type: ignore
    Literal, Neg, Node, Output, Pair, Template
)


class Parser(NativeEnvironment):
    """Read numbers, lists, booleans and quoted strings from config text.

    Values are rendered as one Jinja2 expression; anything other than a
    literal (or a negated literal) in the expression is refused.
    """

    ALLOWED = (Template, Output, Literal, Pair, Neg)

    def literal_eval(self, value: str) -> Any:
        r"""Evaluate a literal, refusing expressions.

        Examples:
            >>> parser = Parser()
            >>> parser.literal_eval('"circle-benchmark"')
            'circle-benchmark'
            >>> parser.literal_eval('[1e-3, 1e-4]')
            [0.001, 0.0001]
            >>> parser.literal_eval('-0.5')
            -0.5
            >>> parser.literal_eval('true')
            True
            >>> parser.literal_eval('1e-2, 1e-3')
            (0.01, 0.001)
            >>> parser.literal_eval('1 / 3')
            Traceback (most recent call last):
            ValueError: Invalid literal: 1 / 3
            <class 'jinja2.nodes.Div'>

        """
        value = value.strip()
        # quoted strings skip the native renderer, which would turn "1" to 1
        if len(value) > 1 and value[0] in '\'"' and value[-1] == value[0]:
            return python_literal_eval(value)
        source = '{{ %s }}' % value
        tree = self.parse(source)
        for node in (tree, *tree.find_all(Node)):
            if not isinstance(node, self.ALLOWED):
                raise ValueError(f'Invalid literal: {value}\n{type(node)}')
        return self.from_string(source).render()

    def parse_item(self, value: str, string_ok: bool = False) -> Any:
        """Parse a config value, optionally accepting a bare string.

        Examples:
            >>> Parser().parse_item('laplace', string_ok=True)
            'laplace'
            >>> Parser().parse_item('laplace')
            Traceback (most recent call last):
            ValueError: Invalid literal: laplace...

        """
        try:
            return self.literal_eval(value)
        except Exception as exc:
            if string_ok and value.strip():
                return value.strip()
            if isinstance(exc, ValueError):
                raise
            raise ValueError(f'Invalid literal: {value}: {exc}') from None
