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

import pytest
from pytest import param

from relaxhmc.parser import Parser


@pytest.fixture(scope='module')
def parser():
    return Parser()


@pytest.mark.parametrize(
    'value, expect',
    [
        param('1e-3', 0.001, id='float'),
        param('  42 ', 42, id='int'),
        param('-1e-5', -1e-05, id='negative'),
        param('[1e-2, 1e-3, 1e-4]', [0.01, 0.001, 0.0001], id='list'),
        param("'laplace'", 'laplace', id='quoted'),
        param('false', False, id='jinja2-bool'),
        param('{"F": [0.5, 0.5]}', {'F': [0.5, 0.5]}, id='dict'),
        param("'1'", '1', id='quoted-digits'),
        param('[-1, 2]', [-1, 2], id='nested-negative'),
    ]
)
def test_literal_eval(parser, value, expect):
    assert parser.literal_eval(value) == expect


@pytest.mark.parametrize(
    'value',
    [
        param('1 + 1', id='arithmetic'),
        param('foo', id='name'),
        param('range(3)', id='call'),
    ]
)
def test_literal_eval_rejects(parser, value):
    with pytest.raises(ValueError, match='Invalid literal'):
        parser.literal_eval(value)


def test_parse_item_string(parser):
    assert parser.parse_item(' data/network.json ', string_ok=True) == (
        'data/network.json'
    )
    assert parser.parse_item('0.5', string_ok=True) == 0.5


def test_parse_item_empty(parser):
    with pytest.raises(ValueError):
        parser.parse_item('   ', string_ok=True)
