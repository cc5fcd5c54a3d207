# Copyright (c) 2020 The tripletqmc authors
# All rights reserved.
#
#   Redistribution and use in source and binary forms, with or
#   without modification, are permitted provided that the following
#   conditions are met:
#
#    1. Redistributions of source code must retain the above copyright
#       notice, this list of conditions and the following disclaimer.
#    2. Redistributions in binary form must reproduce the above
#       copyright notice, this list of conditions and the following
#       disclaimer in the documentation and/or other materials provided
#       with the distribution.
#
# THIS SOFTWARE IS PROVIDED BY THE COPYRIGHT HOLDERS AND CONTRIBUTORS
# "AS IS" AND ANY EXPRESS OR IMPLIED WARRANTIES, INCLUDING, BUT NOT
# LIMITED TO, THE IMPLIED WARRANTIES OF MERCHANTABILITY AND FITNESS
# FOR A PARTICULAR PURPOSE ARE DISCLAIMED. IN NO EVENT SHALL THE
# COPYRIGHT HOLDER OR CONTRIBUTORS BE LIABLE FOR ANY DIRECT, INDIRECT,
# INCIDENTAL, SPECIAL, EXEMPLARY, OR CONSEQUENTIAL DAMAGES (INCLUDING,
# BUT NOT LIMITED TO, PROCUREMENT OF SUBSTITUTE GOODS OR SERVICES;
# LOSS OF USE, DATA, OR PROFITS; OR BUSINESS INTERRUPTION) HOWEVER
# CAUSED AND ON ANY THEORY OF LIABILITY, WHETHER IN CONTRACT, STRICT
# LIABILITY, OR TORT (INCLUDING NEGLIGENCE OR OTHERWISE) ARISING IN
# ANY WAY OUT OF THE USE OF THIS SOFTWARE, EVEN IF ADVISED OF THE
# POSSIBILITY OF SUCH DAMAGE.

"""Run configuration.

Configurations are JSON documents with the sections ``model``,
``initial_state``, ``s_grid``, ``schedule``, ``runs``, ``observables``,
``output`` and ``dump_loops``. :func:`parse_config` validates them and fills
in defaults; :meth:`RunConfig.to_dict` gives back the resolved form, which
parses to an equal RunConfig.
"""

from numbers import Number
import json
import os

from .engine import DEFAULT_POPULATION_CAP, Decompression, LoopSchedule
from .ensemble import SGrid
from .error import ConfigError, SimulationError
from .model import SpinChain, initial_state
from .observables import resolve_observables

__all__ = [
    'ENV_SEED',
    'ENV_WORKERS',
    'RunSettings',
    'RunConfig',
    'parse_config',
    'apply_override'
]


ENV_SEED = 'TRIPLETQMC_SEED'
ENV_WORKERS = 'TRIPLETQMC_WORKERS'

_SECTIONS = {'model', 'initial_state', 's_grid', 'schedule', 'runs',
             'observables', 'output', 'dump_loops'}
_MODEL_KEYS = {
    'xxz': {'variant', 'L', 'J_xy', 'J_z'},
    'ising': {'variant', 'L', 'J', 'h_x', 'h_z'},
}
_GRID_KEYS = {'min', 'max', 'count', 'spacing', 'ref'}
_SCHEDULE_KEYS = {'r', 'M_trunc', 'kappa', 'w_u', 'u_dw', 'dw_enable',
                  'target_population', 'decompression'}
_RUNS_KEYS = {'count', 'master_seed', 'population_cap', 'workers'}


class RunSettings(object):
    """Replica settings: run count, master seed, population cap, workers.

    The worker count is not part of :meth:`to_dict`, so echoed
    configurations do not depend on it.
    """

    def __init__(self, count, master_seed,
                 population_cap=DEFAULT_POPULATION_CAP, workers=1):
        self.count = count
        self.master_seed = master_seed
        self.population_cap = population_cap
        self.workers = workers

    def to_dict(self):
        return {
            'count': self.count,
            'master_seed': self.master_seed,
            'population_cap': self.population_cap,
        }


class RunConfig(object):
    """A validated run configuration."""

    def __init__(self, model, initial_state, s_grid, schedule, runs,
                 observables, output='.', dump_loops=False, spacing='log',
                 grid_bounds=None):
        self.model = model
        self.initial_state = initial_state
        self.s_grid = s_grid
        self.schedule = schedule
        self.runs = runs
        self.observables = list(observables)
        self.output = output
        self.dump_loops = dump_loops
        self.spacing = spacing
        self.grid_bounds = grid_bounds or (s_grid.values[0],
                                           s_grid.values[-1])

    @property
    def psi0(self):
        return initial_state(self.model, self.initial_state)

    def to_dict(self):
        return {
            'model': self.model.to_dict(),
            'initial_state': self.initial_state,
            's_grid': {
                'min': self.grid_bounds[0],
                'max': self.grid_bounds[1],
                'count': len(self.s_grid),
                'spacing': self.spacing,
                'ref': {'index': self.s_grid.ref_index},
            },
            'schedule': self.schedule.to_dict(),
            'runs': self.runs.to_dict(),
            'observables': list(self.observables),
            'output': self.output,
            'dump_loops': self.dump_loops,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    def __eq__(self, other):
        return isinstance(other, RunConfig) and \
            self.to_dict() == other.to_dict()

    def __ne__(self, other):
        return not self == other

    def __repr__(self):
        return 'RunConfig(%s)' % self.to_json()


def _check_keys(section, data, allowed):
    if not isinstance(data, dict):
        raise ConfigError(section, 'expected a mapping')
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(section, 'unknown keys: {}'.format(
            ', '.join(sorted(unknown))), unknown)


def _number(data, section, key, default=None, integer=False):
    field = '{}.{}'.format(section, key)
    if key not in data:
        if default is None:
            raise ConfigError(field, 'missing')
        return default
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, Number):
        raise ConfigError(field, 'expected a number')
    if integer:
        if int(value) != value:
            raise ConfigError(field, 'expected an integer')
        return int(value)
    return float(value)


def _positive(value, field):
    if not value > 0:
        raise ConfigError(field, 'must be positive')
    return value


def _parse_model(data):
    if not isinstance(data, dict):
        raise ConfigError('model', 'expected a mapping')
    variant = data.get('variant')
    if variant not in _MODEL_KEYS:
        raise ConfigError('model.variant', 'expected one of {}'.format(
            ', '.join(sorted(_MODEL_KEYS))))
    _check_keys('model', data, _MODEL_KEYS[variant])
    values = {'variant': variant,
              'L': _number(data, 'model', 'L', integer=True)}
    for key in sorted(_MODEL_KEYS[variant] - {'variant', 'L'}):
        values[key] = _number(data, 'model', key)
    try:
        return SpinChain.from_dict(values)
    except SimulationError as e:
        raise ConfigError('model.L', e.cause)


def _parse_initial_state(model, data):
    try:
        initial_state(model, data)
    except SimulationError as e:
        raise ConfigError('initial_state', e.cause)
    return data


def _parse_grid(data):
    _check_keys('s_grid', data, _GRID_KEYS)
    s_min = _positive(_number(data, 's_grid', 'min'), 's_grid.min')
    s_max = _number(data, 's_grid', 'max')
    count = _positive(_number(data, 's_grid', 'count', integer=True),
                      's_grid.count')
    spacing = data.get('spacing', 'log')
    if spacing not in ('linear', 'log'):
        raise ConfigError('s_grid.spacing', 'expected linear or log')
    if count > 1 and not s_max > s_min:
        raise ConfigError('s_grid.max', 'must exceed s_grid.min')
    build = SGrid.log if spacing == 'log' else SGrid.linear
    grid = build(s_min, s_max, count)
    ref = data.get('ref', {'index': 0})
    _check_keys('s_grid.ref', ref, {'index', 'value'})
    if len(ref) != 1:
        raise ConfigError('s_grid.ref', 'give exactly one of index, value')
    if 'index' in ref:
        index = _number(ref, 's_grid.ref', 'index', integer=True)
        if not 0 <= index < count:
            raise ConfigError('s_grid.ref.index', 'out of range')
    else:
        index = grid.index_of(_number(ref, 's_grid.ref', 'value'))
    return SGrid(grid.values, index), spacing, (s_min, s_max)


def _parse_schedule(data):
    _check_keys('schedule', data, _SCHEDULE_KEYS)
    r = _number(data, 'schedule', 'r')
    dw_enable = data.get('dw_enable', {'loop': 0})
    _check_keys('schedule.dw_enable', dw_enable, {'loop', 'paper_units'})
    if len(dw_enable) != 1:
        raise ConfigError('schedule.dw_enable',
                          'give exactly one of loop, paper_units')
    if 'loop' in dw_enable:
        loop = _number(dw_enable, 'schedule.dw_enable', 'loop', integer=True)
    else:
        loop = LoopSchedule.loop_from_paper_units(
            _number(dw_enable, 'schedule.dw_enable', 'paper_units'), r)
    target = data.get('target_population')
    if target is not None:
        target = _number(data, 'schedule', 'target_population', integer=True)
    try:
        decompression = Decompression(data.get('decompression', 'split'))
    except ValueError:
        raise ConfigError('schedule.decompression',
                          'expected split or stochastic')
    return LoopSchedule(
        r=r,
        m_trunc=_number(data, 'schedule', 'M_trunc', integer=True),
        kappa=_number(data, 'schedule', 'kappa', 0.0),
        w_u=_number(data, 'schedule', 'w_u'),
        u_dw=_number(data, 'schedule', 'u_dw', 0.0),
        dw_enable_loop=loop,
        target_population=target,
        decompression=decompression)


def _parse_runs(data):
    _check_keys('runs', data, _RUNS_KEYS)
    count = _positive(_number(data, 'runs', 'count', integer=True),
                      'runs.count')
    seed = _number(data, 'runs', 'master_seed', integer=True)
    if seed < 0:
        raise ConfigError('runs.master_seed', 'must be non-negative')
    cap = _positive(_number(data, 'runs', 'population_cap',
                            DEFAULT_POPULATION_CAP, integer=True),
                    'runs.population_cap')
    workers = _positive(_number(data, 'runs', 'workers', 1, integer=True),
                        'runs.workers')
    return RunSettings(count, seed, cap, workers)


def _parse_observables(model, psi0, data):
    if not isinstance(data, list) or not data or not all(
            isinstance(name, str) for name in data):
        raise ConfigError('observables', 'expected a list of names')
    try:
        resolve_observables(model, data, psi0)
    except SimulationError as e:
        raise ConfigError('observables', e.cause)
    return list(data)


def apply_override(data, assignment):
    """Applies a ``section.key=value`` assignment to raw config data.

    The value is parsed as JSON, falling back to the plain string.
    """
    path, sep, raw = assignment.partition('=')
    if not sep or not path:
        raise ConfigError(assignment, 'expected section.key=value')
    try:
        value = json.loads(raw)
    except ValueError:
        value = raw
    keys = path.split('.')
    node = data
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError(path, 'not a section')
    node[keys[-1]] = value
    return data


def parse_config(text, environ=None, overrides=()):
    """Parses and validates a JSON run configuration.

    :param text: The JSON document.
    :param environ: Mapping used for environment overrides; os.environ when
        None.
    :param overrides: Sequence of ``section.key=value`` assignments applied
        before validation.
    :return: A RunConfig.
    """
    try:
        data = json.loads(text)
    except ValueError as e:
        raise ConfigError('config', 'invalid JSON: {}'.format(e))
    for assignment in overrides:
        apply_override(data, assignment)
    _check_keys('config', data, _SECTIONS)
    for section in ('model', 's_grid', 'schedule', 'runs'):
        if section not in data:
            raise ConfigError(section, 'missing')

    model = _parse_model(data['model'])
    kind = _parse_initial_state(model, data.get('initial_state',
                                                'domain_wall'))
    grid, spacing, bounds = _parse_grid(data['s_grid'])
    schedule = _parse_schedule(data['schedule'])
    runs = _parse_runs(data['runs'])

    environ = os.environ if environ is None else environ
    if environ.get(ENV_SEED):
        runs.master_seed = _env_int(environ, ENV_SEED, 0)
    if environ.get(ENV_WORKERS):
        runs.workers = _env_int(environ, ENV_WORKERS, 1)

    output = data.get('output', '.')
    if not isinstance(output, str):
        raise ConfigError('output', 'expected a path')
    dump_loops = data.get('dump_loops', False)
    if not isinstance(dump_loops, bool):
        raise ConfigError('dump_loops', 'expected true or false')

    return RunConfig(model, kind, grid, schedule, runs,
                     _parse_observables(model, initial_state(model, kind),
                                        data.get('observables',
                                                 ['standard'])),
                     output, dump_loops, spacing, bounds)


def _env_int(environ, name, minimum):
    try:
        value = int(environ[name])
    except ValueError:
        raise ConfigError(name, 'expected an integer')
    if value < minimum:
        raise ConfigError(name, 'must be at least {}'.format(minimum))
    return value
