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

"""Reduction of per-loop contributions into correlation functions and
statistics over independent runs."""

import numpy as np

from .error import SimulationError
from .model import (Identity, SigmaZ, Projector, BondEnergy, IsingChain,
                    make_observable)

__all__ = [
    'AggregateResult',
    'finalize_run',
    'aggregate',
    'aggregate_runs',
    'standard_observable_suite',
    'resolve_observables'
]


class AggregateResult(object):
    """Means and standard errors over independent runs.

    :param mean: Complex array of per-run means.
    :param stderr_re: Standard error of the real part.
    :param stderr_im: Standard error of the imaginary part.
    :param n_runs: Number of runs aggregated.
    :param population_mean: Optional mean spawning attempts per loop.
    :param population_stderr: Optional standard error of the attempts.
    """

    def __init__(self, mean, stderr_re, stderr_im, n_runs,
                 population_mean=None, population_stderr=None,
                 observables=None, s_values=None):
        self.mean = mean
        self.stderr_re = stderr_re
        self.stderr_im = stderr_im
        self.n_runs = n_runs
        self.population_mean = population_mean
        self.population_stderr = population_stderr
        self.observables = observables
        self.s_values = s_values

    @property
    def stderr(self):
        """Standard errors as a complex array (real and imaginary parts)."""
        return self.stderr_re + 1j * self.stderr_im


def finalize_run(result):
    """Sums loop contributions of a RunResult per observable and s.

    :return: Complex array of shape (observables, s-grid).
    """
    return np.asarray(result.contributions).sum(axis=-1)


def _mean_and_error(samples):
    samples = np.asarray(samples)
    n = samples.shape[0]
    return samples.mean(axis=0), samples.std(axis=0, ddof=1) / np.sqrt(n)


def aggregate(runs, populations=None):
    """Aggregates finalized values of independent runs.

    :param runs: Sequence of equally shaped (complex) arrays, one per run.
    :param populations: Optional sequence of per-loop attempt counts.
    :return: An AggregateResult.
    """
    runs = np.asarray([np.asarray(run, dtype=complex) for run in runs])
    if len(runs) < 2:
        raise SimulationError.ERR.INVALID_INPUT(
            'Standard errors need at least 2 independent runs')
    mean, _ = _mean_and_error(runs)
    _, stderr_re = _mean_and_error(runs.real)
    _, stderr_im = _mean_and_error(runs.imag)
    population_mean = population_stderr = None
    if populations is not None:
        population_mean, population_stderr = _mean_and_error(
            np.asarray(populations, dtype=float))
    return AggregateResult(mean, stderr_re, stderr_im, len(runs),
                           population_mean, population_stderr)


def aggregate_runs(results, per_loop=False):
    """Aggregates RunResult objects of one configuration.

    :param results: Sequence of RunResult.
    :param per_loop: Aggregate the per-loop contributions instead of the
        finalized sums.
    :return: An AggregateResult labelled with observables and s values.
    """
    results = list(results)
    if per_loop:
        values = [r.contributions for r in results]
    else:
        values = [finalize_run(r) for r in results]
    aggregated = aggregate(values, [r.attempts for r in results])
    aggregated.observables = results[0].observables
    aggregated.s_values = results[0].s_values
    return aggregated


def standard_observable_suite(model, psi0):
    """Identity, every sigma_z, the Loschmidt projector, and for Ising
    chains the energy density of every bond."""
    suite = [Identity()]
    suite.extend(SigmaZ(i, model.length) for i in range(1, model.length + 1))
    suite.append(Projector(model.state(model.check_state(psi0)), 'loschmidt'))
    if isinstance(model, IsingChain):
        suite.extend(BondEnergy(model, i) for i in range(1, model.length))
    return suite


def resolve_observables(model, names, psi0):
    """Expands observable names into Observable objects.

    Besides the names accepted by make_observable, ``standard`` expands to
    the standard suite and ``sigma_z:*`` / ``energy:*`` to every site or
    bond. Duplicates are dropped, keeping the first occurrence.
    """
    found = []
    for name in names:
        if name == 'standard':
            found.extend(standard_observable_suite(model, psi0))
        elif name == 'sigma_z:*':
            found.extend(SigmaZ(i, model.length)
                         for i in range(1, model.length + 1))
        elif name == 'energy:*':
            found.extend(BondEnergy(model, i) for i in range(1, model.length))
        else:
            found.append(make_observable(model, name, psi0))
    unique = []
    seen = set()
    for obs in found:
        if obs.name not in seen:
            seen.add(obs.name)
            unique.append(obs)
    return unique
