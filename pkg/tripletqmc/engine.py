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

"""The main loop: free-evolution weight updates, stochastic spawning through
the interaction and per-loop measurement.

Loop m of a run holds an unbiased sample of [T_r(s)]^(m-1) R^free_(s+r) rho_0
with T_r(s) = r R^free_(s+r) (1 + L^int / r), so that summing
s * Tr(X rho^(m)) over loops gives the Laplace-domain correlation function.
"""

from enum import Enum, unique
import logging
import numpy as np

from .ensemble import Ensemble, Triplet, triplet_nbytes
from .error import ConfigError

logger = logging.getLogger(__name__)

__all__ = [
    'DEFAULT_POPULATION_CAP',
    'FreeEvolution',
    'Decompression',
    'LoopSchedule',
    'RunResult',
    'init_ensemble',
    'propagator_bound',
    'free_update',
    'spawn_step',
    'spawn_outcomes',
    'measure',
    'run_simulation'
]


DEFAULT_POPULATION_CAP = 10 ** 7


@unique
class FreeEvolution(Enum):
    INITIAL = 'initial'
    LOOP = 'loop'


@unique
class Decompression(Enum):
    SPLIT = 'split'
    STOCHASTIC = 'stochastic'


class LoopSchedule(object):
    """Parameters of the main loop.

    :param r: Jump rate, the inverse of the effective time step.
    :param m_trunc: Number of loops, at least 1.
    :param kappa: Spring constant of the harmonic importance bias.
    :param w_u: Unit weight of a walker.
    :param u_dw: Deadweight threshold in weight units, 0 disables it.
    :param dw_enable_loop: First loop index m at which deadweight applies.
    :param target_population: Optional diagnostic population level.
    :param decompression: How actives are split before spawning.
    """

    def __init__(self, r, m_trunc, kappa=0.0, w_u=1e-3, u_dw=0.0,
                 dw_enable_loop=0, target_population=None,
                 decompression=Decompression.SPLIT):
        _require(r > 0, 'r', 'must be positive')
        _require(int(m_trunc) == m_trunc and m_trunc >= 1, 'M_trunc',
                 'must be an integer >= 1')
        _require(kappa >= 0, 'kappa', 'must be non-negative')
        _require(w_u > 0, 'w_u', 'must be positive')
        _require(u_dw >= 0, 'u_dw', 'must be non-negative')
        _require(int(dw_enable_loop) == dw_enable_loop and dw_enable_loop >= 0,
                 'dw_enable', 'must be a non-negative loop index')
        _require(target_population is None or target_population > 0,
                 'target_population', 'must be positive')
        self.r = float(r)
        self.m_trunc = int(m_trunc)
        self.kappa = float(kappa)
        self.w_u = float(w_u)
        self.u_dw = float(u_dw)
        self.dw_enable_loop = int(dw_enable_loop)
        self.target_population = target_population
        self.decompression = Decompression(decompression)

    @staticmethod
    def loop_from_paper_units(value, r):
        """Converts a loop position given as m / r into a loop index."""
        return int(round(value * r))

    def deadweight_active(self, m):
        return self.u_dw > 0 and m >= self.dw_enable_loop

    def to_dict(self):
        return {
            'r': self.r,
            'M_trunc': self.m_trunc,
            'kappa': self.kappa,
            'w_u': self.w_u,
            'u_dw': self.u_dw,
            'dw_enable': {'loop': self.dw_enable_loop},
            'target_population': self.target_population,
            'decompression': self.decompression.value,
        }

    def __eq__(self, other):
        return (isinstance(other, LoopSchedule) and
                self.to_dict() == other.to_dict())

    def __ne__(self, other):
        return not self == other

    def __repr__(self):
        return 'LoopSchedule(%r)' % self.to_dict()


def _require(condition, field, message):
    if not condition:
        raise ConfigError('schedule.' + field, message)


class RunResult(object):
    """Outcome of one run.

    `contributions` has shape (observables, s-grid, loops) and already
    includes the factor s; `attempts` and `sizes` are per loop.
    """

    def __init__(self, observables, s_values, contributions, attempts, sizes,
                 cancellations=0, kills=0):
        self.observables = list(observables)
        self.s_values = np.asarray(s_values)
        self.contributions = contributions
        self.attempts = attempts
        self.sizes = sizes
        self.cancellations = cancellations
        self.kills = kills

    @property
    def m_trunc(self):
        return self.contributions.shape[2]

    def finalize(self):
        """Sums the loop contributions, see observables.finalize_run."""
        return self.contributions.sum(axis=2)


def init_ensemble(model, psi0, s_grid):
    """Returns the single diagonal triplet (1, psi0, psi0) with unit
    reweight vector."""
    bits = model.check_state(psi0)
    return Ensemble(s_grid, w=[1.0], ket=[bits], bra=[bits], norm=[0],
                    loop_index=1)


def propagator_bound(model, s, r):
    """Upper bound on the norm of T_r(s) on the space of density matrices.

    Loop contributions shrink geometrically once the bound is below one;
    above it the series may diverge.
    """
    width = 2 * model.interaction_bound()
    return np.hypot(r, width) / (s + r)


def free_factors(s_values, r, delta_e, mode):
    """Free resolvent factors g(s) per triplet and grid point.

    g(s) = r / (s + r + i dE) in loop mode and 1 / (s + r + i dE) in
    initial mode.
    """
    numerator = r if FreeEvolution(mode) is FreeEvolution.LOOP else 1.0
    delta_e = np.asarray(delta_e, dtype=float)
    return numerator / (np.asarray(s_values)[None, :] + r +
                        1j * delta_e[:, None])


def free_update(ensemble, model, r, mode):
    """Applies the free resolvent to every triplet.

    The control weight takes the factor at s_ref and the reweight vectors
    the ratios g(s) / g(s_ref), keeping reweight[s_ref] = 1.
    """
    grid = ensemble.s_grid
    delta_e = model.free_energies(ensemble.ket) - \
        model.free_energies(ensemble.bra)
    g = free_factors(grid.values, r, delta_e, mode)
    g_ref = g[:, grid.ref_index]
    result = ensemble.take(slice(None))
    result.w = ensemble.w * g_ref
    result.reweight = ensemble.reweight * (g / g_ref[:, None])
    result.reweight[:, grid.ref_index] = 1
    return result


def _spawn_factor(side, amplitude, n_t, r, kappa, norm_old, norm_new):
    """Weight factor of a spawn: side -1 acts on the ket (-i H), +1 on the
    bra (+i H)."""
    bias = np.exp(0.5 * kappa * (np.asarray(norm_old, dtype=float) ** 2 -
                                 np.asarray(norm_new, dtype=float) ** 2))
    return side * 1j * (amplitude / r) * 2 * n_t * bias


def spawn_step(ensemble, model, schedule, rng):
    """Lets every triplet attempt one spawn.

    A side is drawn with probability 1/2 and a transition uniformly among
    the n_t transitions of that side's state. Parents are kept unchanged.

    :return: The parents followed by the spawned triplets.
    """
    n = len(ensemble)
    ket_side = rng.random(n) < 0.5
    draw = rng.random(n)
    source = np.where(ket_side, ensemble.ket, ensemble.bra)
    n_t = model.count_transitions(source)
    go = n_t > 0
    n_t = n_t[go]
    ket_side = ket_side[go]
    index = np.minimum(np.floor(draw[go] * n_t).astype(np.int64), n_t - 1)
    targets, amplitudes = model.select_transitions(source[go], index)
    ket = np.where(ket_side, targets, ensemble.ket[go])
    bra = np.where(ket_side, ensemble.bra[go], targets)
    norm = model.dynamic_norms(ket, bra)
    factor = _spawn_factor(np.where(ket_side, -1, 1), amplitudes, n_t,
                           schedule.r, schedule.kappa, ensemble.norm[go], norm)
    spawned = Ensemble(ensemble.s_grid, ensemble.w[go] * factor, ket, bra,
                       ensemble.reweight[go], norm, ensemble.loop_index)
    return ensemble.extend(spawned)


def spawn_outcomes(model, schedule, triplet):
    """Lists every possible spawn of one triplet.

    :return: A list of (probability, Triplet) pairs using the same weights
        as spawn_step. Probabilities sum to the chance that a spawn occurs.
    """
    outcomes = []
    for side, source in ((-1, triplet.ket), (1, triplet.bra)):
        transitions = model.transitions(model.state(int(source)))
        for transition in transitions:
            if side < 0:
                ket, bra = int(transition.target), int(triplet.bra)
            else:
                ket, bra = int(triplet.ket), int(transition.target)
            norm = model.dynamic_norm(model.state(ket), model.state(bra))
            factor = _spawn_factor(side, transition.amplitude,
                                   len(transitions), schedule.r,
                                   schedule.kappa, triplet.norm, norm)
            outcomes.append((0.5 / len(transitions), Triplet(
                complex(triplet.w_ctrl * factor), ket, bra,
                np.array(triplet.reweight, dtype=complex), norm)))
    return outcomes


def measure(ensemble, observables, kappa):
    """Returns s * sum_n c_n(s) <bra_n|X|ket_n> per observable and s."""
    physical = ensemble.physical_weights(kappa)
    values = np.array([obs.elements(ensemble.bra, ensemble.ket)
                       for obs in observables],
                      dtype=complex).reshape(len(observables), len(ensemble))
    return ensemble.s_grid.values[None, :] * values.dot(physical)


def run_simulation(model, psi0, s_grid, schedule, observables, rng,
                   population_cap=DEFAULT_POPULATION_CAP):
    """Runs the main loop for M_trunc loops.

    :param model: The SpinChain.
    :param psi0: Initial basis state.
    :param s_grid: The SGrid to measure on.
    :param schedule: A LoopSchedule.
    :param observables: Sequence of Observable.
    :param rng: A numpy Generator, the only source of randomness.
    :param population_cap: Hard limit on the triplets held at once, counting
        the children of a loop, their spawns and the inactive triplets.
    :return: A RunResult.
    """
    observables = list(observables)
    m_trunc = schedule.m_trunc
    contributions = np.zeros((len(observables), len(s_grid), m_trunc),
                             dtype=complex)
    attempts = np.zeros(m_trunc, dtype=np.int64)
    sizes = np.zeros(m_trunc, dtype=np.int64)
    kills = 0
    warned = False

    logger.info('Starting run: %r, L=%d, %d loops', model, model.length,
                m_trunc)
    logger.info('Population cap %d: up to %.3g GB per ensemble copy',
                population_cap,
                population_cap * triplet_nbytes(len(s_grid)) / 1e9)
    s_min = float(np.min(s_grid.values))
    bound = propagator_bound(model, s_min, schedule.r)
    if bound >= 1:
        logger.warning('Loop series not guaranteed to converge at s = %g '
                       'with r = %g (norm bound %.4f)', s_min, schedule.r,
                       bound)
    ensemble = free_update(init_ensemble(model, psi0, s_grid), model,
                           schedule.r, FreeEvolution.INITIAL)
    contributions[:, :, 0] = measure(ensemble, observables, schedule.kappa)
    sizes[0] = len(ensemble)

    for m in range(2, m_trunc + 1):
        ensemble = ensemble.compress()
        ensemble.loop_index = m
        inactive = Ensemble(s_grid, loop_index=m)
        if schedule.deadweight_active(m):
            ensemble, inactive, killed = ensemble.deactivate(schedule.u_dw,
                                                             rng)
            kills += killed
        if schedule.decompression is Decompression.STOCHASTIC:
            children = ensemble.decompress(schedule.w_u, rng, population_cap,
                                           len(inactive))
        else:
            children = ensemble.split(schedule.w_u, population_cap,
                                      len(inactive))
        attempts[m - 1] = len(children)
        if (schedule.target_population and not warned and
                len(children) > schedule.target_population):
            logger.info('Loop %d: population %d above target %d', m,
                        len(children), schedule.target_population)
            warned = True

        ensemble = spawn_step(children, model, schedule, rng).extend(inactive)
        ensemble = ensemble.compress()
        ensemble = free_update(ensemble, model, schedule.r,
                               FreeEvolution.LOOP)
        contributions[:, :, m - 1] = measure(ensemble, observables,
                                             schedule.kappa)
        sizes[m - 1] = len(ensemble)
        logger.debug('Loop %d: %d attempts, %d triplets, %d inactive, '
                     '%d cancellations, %d killed', m, attempts[m - 1],
                     len(ensemble), len(inactive), ensemble.cancellations,
                     kills)

    logger.info('Finished run: %d cancellations, %d killed',
                ensemble.cancellations, kills)
    return RunResult([obs.name for obs in observables], s_grid.values,
                     contributions, attempts, sizes, ensemble.cancellations,
                     kills)
