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

"""Command line interface.

Subcommands::

    run <config>                      Monte Carlo replicas -> results.csv,
                                      population.csv (and loops.csv)
    oracle <config>                   exact references in the same schema
    invert <results.csv> --observable NAME --t-grid START:STOP:COUNT
    analyze <results.csv> --observable NAME

The environment variables TRIPLETQMC_SEED and TRIPLETQMC_WORKERS override
the master seed and the worker count of a configuration.
"""

from collections import OrderedDict
from multiprocessing.pool import Pool
import argparse
import json
import logging
import os
import sys
import numpy as np

from . import __version__
from .config import parse_config
from .engine import RunResult, run_simulation
from .error import SimulationError, PopulationLimitError
from .laplace import (rational_fit, zakian_invert, log_derivative_peak,
                      amplitude_estimate)
from .observables import aggregate_runs, finalize_run, resolve_observables
from .oracle import MAX_DENSE_LENGTH, quadrature_reference, resolvent_reference
from .results import (write_results, write_population, write_loops,
                      write_series, read_results)
from .utils import derive_seed

logger = logging.getLogger(__name__)

__all__ = [
    'run_replica',
    'execute_runs',
    'run_command',
    'oracle_command',
    'invert_command',
    'analyze_command',
    'main'
]


def run_replica(task):
    """Runs replica `run_index` of a configuration.

    :param task: Tuple of (RunConfig, run_index).
    :return: A RunResult, or the PopulationLimitError that stopped it.
    """
    config, run_index = task
    psi0 = config.psi0
    rng = np.random.default_rng(derive_seed(config.runs.master_seed,
                                            run_index))
    observables = resolve_observables(config.model, config.observables, psi0)
    try:
        return run_simulation(config.model, psi0, config.s_grid,
                              config.schedule, observables, rng,
                              config.runs.population_cap)
    except PopulationLimitError as e:
        return e.in_run(run_index)


def execute_runs(config):
    """Runs all replicas, in a process pool when more than one worker is
    configured. Outcomes are ordered by run index."""
    tasks = [(config, i) for i in range(config.runs.count)]
    workers = min(config.runs.workers, len(tasks))
    if workers <= 1:
        return [run_replica(task) for task in tasks]
    logger.info('Running %d replicas on %d workers', len(tasks), workers)
    with Pool(processes=workers) as pool:
        return pool.map(run_replica, tasks)


def _path(config, name):
    return os.path.join(config.output, name)


def _run_header(config, source):
    return OrderedDict([('source', source), ('config', config.to_dict())])


def run_command(config):
    """Executes the Monte Carlo replicas of `config` and writes results.

    :return: Exit status, 0 on success and 2 when a replica failed.
    """
    outcomes = execute_runs(config)
    results = [o for o in outcomes if isinstance(o, RunResult)]
    failures = [o for o in outcomes if not isinstance(o, RunResult)]
    for failure in failures:
        logger.error('%s', failure)
    if not results:
        raise failures[0]

    header = _run_header(config, 'monte_carlo')
    names = results[0].observables
    s_values = config.s_grid.values
    if len(results) >= 2:
        totals = aggregate_runs(results)
        loops = aggregate_runs(results, per_loop=True) \
            if config.dump_loops else None
    else:
        header['single_run'] = True
        totals = _SingleRun(finalize_run(results[0]), results[0].attempts)
        loops = _SingleRun(results[0].contributions, results[0].attempts) \
            if config.dump_loops else None

    if not os.path.isdir(config.output):
        os.makedirs(config.output)
    write_results(_path(config, 'results.csv'), names, s_values, totals.mean,
                  totals.stderr_re, totals.stderr_im, totals.n_runs, header,
                  failed=len(failures) if failures else None)
    write_population(_path(config, 'population.csv'), totals.population_mean,
                     totals.population_stderr, header)
    if loops is not None:
        write_loops(_path(config, 'loops.csv'), names, s_values, loops.mean,
                    loops.stderr_re, loops.stderr_im, header)
    return 2 if failures else 0


class _SingleRun(object):
    """Statistics of a lone run: its values with zero errors."""

    def __init__(self, values, attempts):
        self.mean = values
        self.stderr_re = np.zeros(values.shape)
        self.stderr_im = np.zeros(values.shape)
        self.n_runs = 1
        self.population_mean = np.asarray(attempts, dtype=float)
        self.population_stderr = np.zeros(len(attempts))


def oracle_command(config, series_path=None, dt=0.01):
    """Writes exact reference values of `config` in the results schema.

    Chains with L <= 8 use the dense resolvent; longer chains, or any chain
    when a time series is requested, use propagation and quadrature.
    """
    psi0 = config.psi0
    observables = resolve_observables(config.model, config.observables, psi0)
    names = [obs.name for obs in observables]
    s_values = config.s_grid.values
    header = _run_header(config, 'oracle')
    if config.model.length <= MAX_DENSE_LENGTH and series_path is None:
        values = resolvent_reference(config.model, psi0, observables,
                                     s_values)
    else:
        values, series = quadrature_reference(config.model, psi0,
                                              observables, s_values, dt)
        header['dt'] = dt
        if series_path is not None:
            write_series(series_path, ['t'] + names,
                         zip(series.times, *series.values), header)
    if not os.path.isdir(config.output):
        os.makedirs(config.output)
    zeros = np.zeros(values.shape)
    write_results(_path(config, 'results.csv'), names, s_values, values,
                  zeros, zeros, 0, header)
    return 0


def _series(results_path, observable):
    table = read_results(results_path)
    if observable not in table.series:
        raise SimulationError.ERR.INVALID_INPUT(
            'No observable {!r} in {}'.format(observable, results_path))
    data = table.series[observable]
    return data['s'], data['value'].real


def _fit(s, values, max_order):
    return rational_fit(s, values, max_order=min(max_order,
                                                 len(s) // 2 - 1))


def _parse_t_grid(text):
    try:
        start, stop, count = text.split(':')
        times = np.linspace(float(start), float(stop), int(count))
    except ValueError:
        raise SimulationError.ERR.INVALID_INPUT(
            'Expected START:STOP:COUNT, got {!r}'.format(text))
    if np.any(times <= 0):
        raise SimulationError.ERR.INVALID_INPUT('Times must be positive')
    return times


def invert_command(results_path, observable, t_grid, output, max_order=6):
    """Fits a rational model to one observable and inverts it to the time
    domain, writing (t, value) rows.

    Result files hold C(s) = s F(s), so the inverted transform is C(s) / s.
    """
    s, values = _series(results_path, observable)
    model = _fit(s, values, max_order)
    times = _parse_t_grid(t_grid)
    header = OrderedDict([('source', 'zakian'), ('observable', observable),
                          ('fit_order', list(model.order)),
                          ('residual', model.residual)])
    values = zakian_invert(lambda z: model(z) / z, times)
    write_series(output, ['t', 'value'], zip(times, values), header)
    return 0


def analyze_command(results_path, observable, output=None, max_order=6):
    """Reports oscillation frequency, amplitude and fit quality as JSON."""
    s, values = _series(results_path, observable)
    model = _fit(s, values, max_order)
    peak = log_derivative_peak(s, values)
    report = OrderedDict([
        ('observable', observable),
        ('frequency', peak.frequency),
        ('fit_order', list(model.order)),
        ('residual', model.residual),
        ('orders', [[list(order), residual]
                    for order, residual in model.history]),
    ])
    try:
        report['amplitude'] = amplitude_estimate(s, values, model)
    except SimulationError as e:
        report['amplitude'] = None
        report['amplitude_error'] = str(e)
    text = json.dumps(report, indent=2) + '\n'
    if output:
        with open(output, 'w') as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _read_config(args):
    with open(args.config) as f:
        return parse_config(f.read(), overrides=args.set)


def _parser():
    parser = argparse.ArgumentParser(
        prog='tripletqmc',
        description='Laplace-domain Monte Carlo for spin chain dynamics.')
    parser.add_argument('--version', action='version',
                        version='%(prog)s ' + __version__)
    parser.add_argument('-v', '--verbose', action='count', default=0,
                        help='increase logging verbosity')
    commands = parser.add_subparsers(dest='command')
    commands.required = True

    run = commands.add_parser('run', help='run Monte Carlo replicas')
    oracle = commands.add_parser('oracle', help='compute exact references')
    for sub in (run, oracle):
        sub.add_argument('config', help='JSON configuration file')
        sub.add_argument('--set', action='append', default=[],
                         metavar='KEY=VALUE',
                         help='override a configuration value')
    oracle.add_argument('--series', help='write the time series to this CSV')
    oracle.add_argument('--dt', type=float, default=0.01,
                        help='time step of the propagation route')

    invert = commands.add_parser('invert', help='invert to the time domain')
    analyze = commands.add_parser('analyze', help='extract frequency and '
                                  'amplitude')
    for sub in (invert, analyze):
        sub.add_argument('results', help='results.csv to read')
        sub.add_argument('--observable', required=True)
        sub.add_argument('--max-order', type=int, default=6)
    invert.add_argument('--t-grid', required=True,
                        metavar='START:STOP:COUNT')
    invert.add_argument('--output', default='inverted.csv')
    analyze.add_argument('--output')
    return parser


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=[logging.WARNING, logging.INFO, logging.DEBUG][
            min(args.verbose, 2)],
        format='%(asctime)s %(name)s %(levelname)s %(message)s')
    try:
        if args.command == 'run':
            return run_command(_read_config(args))
        if args.command == 'oracle':
            return oracle_command(_read_config(args), args.series, args.dt)
        if args.command == 'invert':
            return invert_command(args.results, args.observable, args.t_grid,
                                  args.output, args.max_order)
        return analyze_command(args.results, args.observable, args.output,
                               args.max_order)
    except SimulationError as e:
        sys.stderr.write('tripletqmc: {}\n'.format(e))
        return 2
