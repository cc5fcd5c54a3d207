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

"""CSV encoding of results.

Every file starts with ``# key: value`` header lines followed by a CSV
header row. Floating point numbers are written with 17 significant digits
so that files reproduce the in-memory values exactly.
"""

from collections import OrderedDict, namedtuple
import csv
import json
import numpy as np

from . import __version__
from .error import SimulationError

__all__ = [
    'RESULT_COLUMNS',
    'POPULATION_COLUMNS',
    'LOOP_COLUMNS',
    'format_number',
    'write_results',
    'write_population',
    'write_loops',
    'write_series',
    'read_results',
    'ResultTable'
]


RESULT_COLUMNS = ['s', 'observable', 'value_re', 'value_im', 'stderr_re',
                  'stderr_im', 'n_runs']
POPULATION_COLUMNS = ['loop_m', 'mean_attempts', 'stderr_attempts']
LOOP_COLUMNS = ['loop_m', 's', 'observable', 'value_re', 'value_im',
                'stderr_re', 'stderr_im']


def format_number(value):
    return '%.17g' % value


def _header(f, fields):
    f.write('# tripletqmc {}\n'.format(__version__))
    for key, value in fields.items():
        if not isinstance(value, str):
            value = json.dumps(value, sort_keys=True)
        f.write('# {}: {}\n'.format(key, value))


def _writer(f, columns):
    writer = csv.writer(f, lineterminator='\n')
    writer.writerow(columns)
    return writer


def write_results(path, observables, s_values, mean, stderr_re, stderr_im,
                  n_runs, header, failed=None):
    """Writes results.csv.

    :param observables: Observable names, the first axis of the arrays.
    :param s_values: Grid values, the second axis of the arrays.
    :param mean: Complex array of shape (observables, s values).
    :param stderr_re: Standard errors of the real parts.
    :param stderr_im: Standard errors of the imaginary parts.
    :param n_runs: Number of runs behind each value.
    :param header: Ordered mapping of header fields.
    :param failed: Number of failed runs; adds a ``failed`` column.
    """
    columns = RESULT_COLUMNS + (['failed'] if failed is not None else [])
    with open(path, 'w', newline='') as f:
        _header(f, header)
        writer = _writer(f, columns)
        for k, name in enumerate(observables):
            for j, s in enumerate(s_values):
                row = [format_number(s), name,
                       format_number(mean[k, j].real),
                       format_number(mean[k, j].imag),
                       format_number(stderr_re[k, j]),
                       format_number(stderr_im[k, j]),
                       str(n_runs)]
                if failed is not None:
                    row.append(str(failed))
                writer.writerow(row)


def write_population(path, mean, stderr, header):
    """Writes population.csv with one row per loop."""
    with open(path, 'w', newline='') as f:
        _header(f, header)
        writer = _writer(f, POPULATION_COLUMNS)
        for m, (value, error) in enumerate(zip(mean, stderr), 1):
            writer.writerow([str(m), format_number(value),
                             format_number(error)])


def write_loops(path, observables, s_values, mean, stderr_re, stderr_im,
                header):
    """Writes loops.csv with per-loop contributions.

    The arrays have shape (observables, s values, loops).
    """
    with open(path, 'w', newline='') as f:
        _header(f, header)
        writer = _writer(f, LOOP_COLUMNS)
        for m in range(mean.shape[2]):
            for j, s in enumerate(s_values):
                for k, name in enumerate(observables):
                    writer.writerow([
                        str(m + 1), format_number(s), name,
                        format_number(mean[k, j, m].real),
                        format_number(mean[k, j, m].imag),
                        format_number(stderr_re[k, j, m]),
                        format_number(stderr_im[k, j, m])])


def write_series(path, columns, rows, header):
    """Writes a plain numeric table, e.g. a time series (t, value)."""
    with open(path, 'w', newline='') as f:
        _header(f, header)
        writer = _writer(f, columns)
        for row in rows:
            writer.writerow([format_number(v) for v in row])


ResultTable = namedtuple('ResultTable', ['header', 'columns', 'series'])
"""Parsed results.csv: header fields, column names and, per observable, a
dict of arrays keyed by s, value, stderr_re, stderr_im and n_runs."""


def read_results(path):
    """Reads a results.csv file written by write_results.

    :return: A ResultTable.
    """
    header = OrderedDict()
    with open(path, newline='') as f:
        lines = f.read().splitlines()
    body = []
    for line in lines:
        if line.startswith('#'):
            key, sep, value = line[1:].strip().partition(': ')
            if sep:
                header[key] = _decode(value)
        elif line:
            body.append(line)
    rows = list(csv.reader(body))
    if not rows or rows[0][:len(RESULT_COLUMNS)] != RESULT_COLUMNS:
        raise SimulationError.ERR.INVALID_INPUT(
            '{} is not a results file'.format(path))
    columns = rows[0]
    grouped = OrderedDict()
    for row in rows[1:]:
        grouped.setdefault(row[1], []).append(row)
    series = OrderedDict()
    for name, group in grouped.items():
        group.sort(key=lambda row: float(row[0]))
        series[name] = {
            's': np.array([float(row[0]) for row in group]),
            'value': np.array([complex(float(row[2]), float(row[3]))
                               for row in group]),
            'stderr_re': np.array([float(row[4]) for row in group]),
            'stderr_im': np.array([float(row[5]) for row in group]),
            'n_runs': np.array([int(row[6]) for row in group]),
        }
    return ResultTable(header, columns, series)


def _decode(value):
    try:
        return json.loads(value)
    except ValueError:
        return value
