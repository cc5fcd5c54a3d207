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

"""Exact references for small chains.

Two independent routes lead to s * Tr(X R_s rho_0): a dense solve of the
Liouvillian resolvent equation, and unitary propagation of the initial
wavefunction followed by numerical Laplace quadrature. The truncated
geometric series evaluated densely mirrors, term by term, what the
Monte Carlo loop samples.
"""

from collections import namedtuple
from scipy import linalg, sparse
from scipy.integrate import simpson
from scipy.sparse.linalg import expm_multiply
import logging
import numpy as np

from .error import SimulationError
from .model import Observable

logger = logging.getLogger(__name__)

__all__ = [
    'MAX_DENSE_LENGTH',
    'MAX_PROPAGATION_LENGTH',
    'DenseOperatorRep',
    'pure_density',
    'expectation',
    'liouvillian',
    'dense_resolvent',
    'apply_propagator',
    'truncated_magic_terms',
    'dense_truncated_magic',
    'propagator_radius',
    'TimeSeries',
    'propagation_chunk',
    'time_domain_reference',
    'QuadratureResult',
    'laplace_quadrature',
    'default_t_max',
    'resolvent_reference',
    'quadrature_reference'
]


MAX_DENSE_LENGTH = 8
MAX_LIOUVILLIAN_LENGTH = 4
MAX_PROPAGATION_LENGTH = 20
MAX_RADIUS_PAIRS = 4096

_CHUNK = 256
# Complex entries held per propagated block.
_BLOCK_ELEMENTS = 1 << 20


class DenseOperatorRep(object):
    """Dense matrices of a chain: H^free (diagonal), H^int and H."""

    def __init__(self, model):
        if model.length > MAX_DENSE_LENGTH:
            raise SimulationError.ERR.RESOURCE_LIMIT(
                'Dense operators limited to L <= {}, use '
                'time_domain_reference for L = {}'.format(
                    MAX_DENSE_LENGTH, model.length))
        self.model = model
        self.dimension = model.dimension
        self.free = model.free_energies(model.all_states())
        self.interaction = model.interaction_matrix().toarray()
        self.hamiltonian = np.diag(self.free) + self.interaction

    def observable(self, observable):
        """Dense matrix with entry [a, b] = <a|X|b>."""
        return observable.matrix(self.model.length).toarray()

    def interaction_action(self, x):
        """L^int x = -i (H^int x - x H^int)."""
        return -1j * (self.interaction.dot(x) - x.dot(self.interaction))

    def free_resolvent(self, z):
        """Entry-wise factors 1 / (z + i(E_i - E_j)) of R^free_z."""
        return 1.0 / (z + 1j * (self.free[:, None] - self.free[None, :]))


def _rep(model):
    if isinstance(model, DenseOperatorRep):
        return model
    return DenseOperatorRep(model)


def pure_density(model, psi0):
    """Returns |psi0><psi0| as a dense matrix."""
    bits = model.check_state(psi0)
    rho = np.zeros((model.dimension, model.dimension), dtype=complex)
    rho[bits, bits] = 1
    return rho


def expectation(x_matrix, rho):
    """Tr(X rho) for dense X and rho."""
    return np.sum(x_matrix * rho.T)


def liouvillian(model):
    """Dense Liouvillian of shape (4**L, 4**L) on row-major vectorized
    density matrices."""
    if model.length > MAX_LIOUVILLIAN_LENGTH:
        raise SimulationError.ERR.RESOURCE_LIMIT(
            'Dense Liouvillian limited to L <= {}'.format(
                MAX_LIOUVILLIAN_LENGTH))
    h = _rep(model).hamiltonian
    identity = np.eye(len(h))
    return -1j * (np.kron(h, identity) - np.kron(identity, h.T))


def dense_resolvent(model, rho0, s):
    """Returns s R_s rho0 by solving (s - L) x = rho0.

    The Liouvillian equation is the Sylvester equation
    (iH + s/2) x + x (-iH + s/2) = rho0.

    :param model: A SpinChain (L <= 8) or a DenseOperatorRep.
    :param rho0: Dense initial density matrix.
    :param s: Positive Laplace variable.
    :return: The dense matrix s * x.
    """
    if s <= 0:
        raise SimulationError.ERR.INVALID_INPUT('s must be positive')
    h = _rep(model).hamiltonian
    shift = 0.5 * s * np.eye(len(h))
    x = linalg.solve_sylvester(1j * h + shift, -1j * h + shift,
                               np.asarray(rho0, dtype=complex))
    return s * x


def apply_propagator(model, x, s, r):
    """Applies T_r(s) = r R^free_(s+r) (1 + L^int / r) to x."""
    rep = _rep(model)
    return r * rep.free_resolvent(s + r) * (x + rep.interaction_action(x) / r)


def truncated_magic_terms(model, rho0, s, r, m_trunc):
    """Terms s [T_r(s)]^m R^free_(s+r) rho0 for m = 0..m_trunc."""
    if s <= 0 or r <= 0:
        raise SimulationError.ERR.INVALID_INPUT('s and r must be positive')
    rep = _rep(model)
    x = rep.free_resolvent(s + r) * np.asarray(rho0, dtype=complex)
    terms = [s * x]
    for _ in range(m_trunc):
        x = apply_propagator(rep, x, s, r)
        terms.append(s * x)
    return terms


def dense_truncated_magic(model, rho0, s, r, m_trunc):
    """Sum of the truncated series, the M-term approximation of s R_s rho0.
    """
    return sum(truncated_magic_terms(model, rho0, s, r, m_trunc))


def _sector(model, psi0):
    """Basis states reachable from psi0 through H^int, sorted."""
    seen = {int(model.check_state(psi0))}
    frontier = list(seen)
    while frontier:
        state = frontier.pop()
        for t in model.transitions(model.state(state)):
            if int(t.target) not in seen:
                seen.add(int(t.target))
                frontier.append(int(t.target))
    return sorted(seen)


def propagator_radius(model, psi0, s, r):
    """Spectral radius of T_r(s) on density matrices over the sector of psi0.

    The loop series converges for every state of the sector exactly when
    the radius is below one.
    """
    if s <= 0 or r <= 0:
        raise SimulationError.ERR.INVALID_INPUT('s and r must be positive')
    states = _sector(model, psi0)
    d = len(states)
    if d * d > MAX_RADIUS_PAIRS:
        raise SimulationError.ERR.RESOURCE_LIMIT(
            'Sector of {} states too large for a dense radius'.format(d))
    index = {state: i for i, state in enumerate(states)}
    h = np.zeros((d, d))
    for i, state in enumerate(states):
        for t in model.transitions(model.state(state)):
            h[index[int(t.target)], i] += t.amplitude
    energies = model.free_energies(np.array(states, dtype=np.int64))
    identity = np.eye(d)
    interaction = -1j * (np.kron(h, identity) - np.kron(identity, h.T))
    factors = r / (s + r + 1j * (energies[:, None] - energies[None, :]))
    t_matrix = factors.reshape(-1)[:, None] * (np.eye(d * d) +
                                               interaction / r)
    return float(np.max(np.abs(linalg.eigvals(t_matrix))))


TimeSeries = namedtuple('TimeSeries', ['times', 'values', 'norm_error'])
QuadratureResult = namedtuple('QuadratureResult',
                              ['value', 'tail_bound', 'tail_warning'])


def _sparse_hamiltonian(model):
    return (sparse.diags(model.free_energies(model.all_states())) +
            model.interaction_matrix()).tocsr()


def propagation_chunk(dimension):
    """Number of time steps propagated per block for a Hilbert space of the
    given dimension."""
    return max(1, min(_CHUNK, _BLOCK_ELEMENTS // dimension - 1))


def time_domain_reference(model, psi0, observable, t_max, dt):
    """Propagates the initial basis state and samples expectation values.

    States are propagated in blocks of `propagation_chunk(dimension)` steps,
    so memory stays a bounded multiple of the state size.

    :param model: A SpinChain with L <= 20.
    :param psi0: Initial basis state.
    :param observable: An Observable, or a sequence of them.
    :param t_max: Final time.
    :param dt: Sampling interval; must resolve the spectral width of H.
    :return: A TimeSeries; values has one row per observable when a
        sequence was given.
    """
    if model.length > MAX_PROPAGATION_LENGTH:
        raise SimulationError.ERR.RESOURCE_LIMIT(
            'Propagation limited to L <= {}'.format(MAX_PROPAGATION_LENGTH))
    steps = int(round(t_max / dt))
    if dt <= 0 or steps < 2:
        raise SimulationError.ERR.INVALID_INPUT(
            'Need dt > 0 and at least two steps')
    hamiltonian = _sparse_hamiltonian(model)
    omega_max = 2 * abs(hamiltonian).sum(axis=1).max()
    if dt * omega_max > np.pi:
        raise SimulationError.ERR.ACCURACY(
            'dt = {} does not resolve frequencies up to {:.3g}'.format(
                dt, omega_max))

    single = isinstance(observable, Observable)
    observables = [observable] if single else list(observable)
    matrices = [obs.matrix(model.length) for obs in observables]
    generator = (-1j * hamiltonian).tocsr()
    psi = np.zeros(model.dimension, dtype=complex)
    psi[model.check_state(psi0)] = 1

    values = np.zeros((len(observables), steps + 1))
    norms = np.zeros(steps + 1)
    chunk = propagation_chunk(model.dimension)
    start = 0
    while start < steps:
        end = min(start + chunk, steps)
        block = expm_multiply(generator, psi, start=0.0,
                              stop=(end - start) * dt,
                              num=end - start + 1, endpoint=True)
        for k, x in enumerate(matrices):
            for i, phi in enumerate(block):
                values[k, start + i] = np.vdot(phi, x.dot(phi)).real
        norms[start:end + 1] = np.linalg.norm(block, axis=1)
        psi = block[-1]
        start = end
        logger.debug('Propagated to t = %g', end * dt)

    norm_error = float(np.max(np.abs(norms - 1)))
    if norm_error > 1e-9:
        logger.warning('Propagation norm drift %.3g', norm_error)
    times = np.arange(steps + 1) * dt
    return TimeSeries(times, values[0] if single else values, norm_error)


def laplace_quadrature(times, values, s, tolerance=1e-10):
    """Computes s * int_0^T <X>_t exp(-s t) dt by composite Simpson
    quadrature.

    :param times: Uniform sample times starting at 0.
    :param values: Samples of <X>_t.
    :param s: Positive Laplace variable, scalar or array.
    :param tolerance: Tail bound above which `tail_warning` is set.
    :return: A QuadratureResult; the tail bound is max|<X>| exp(-s T).
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values)
    steps = np.diff(times)
    if len(times) < 3 or not np.allclose(steps, steps[0], rtol=1e-9):
        raise SimulationError.ERR.INVALID_INPUT(
            'Quadrature needs at least 3 uniform samples')
    s_values = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(s_values <= 0):
        raise SimulationError.ERR.INVALID_INPUT('s must be positive')
    kernel = np.exp(-s_values[:, None] * times[None, :])
    value = s_values * simpson(values[None, :] * kernel, x=times, axis=-1)
    tail = np.max(np.abs(values)) * np.exp(-s_values * times[-1])
    warning = tail > tolerance
    if np.any(warning):
        logger.warning('Quadrature tail bound %.3g exceeds %.3g',
                       np.max(tail), tolerance)
    if np.ndim(s) == 0:
        return QuadratureResult(value[0], float(tail[0]), bool(warning[0]))
    return QuadratureResult(value, tail, warning)


def default_t_max(s_min):
    """Propagation time making the quadrature tail e^-50 small."""
    return 50.0 / s_min


def resolvent_reference(model, psi0, observables, s_values):
    """Exact s * Tr(X R_s rho0) for every observable and s, by dense solve.

    :return: Complex array of shape (observables, s values).
    """
    rep = _rep(model)
    rho0 = pure_density(model, psi0)
    matrices = [rep.observable(obs) for obs in observables]
    result = np.zeros((len(matrices), len(s_values)), dtype=complex)
    for j, s in enumerate(s_values):
        rho_s = dense_resolvent(rep, rho0, s)
        for k, x in enumerate(matrices):
            result[k, j] = expectation(x, rho_s)
    return result


def quadrature_reference(model, psi0, observables, s_values, dt,
                         t_max=None):
    """Reference values via propagation and Laplace quadrature.

    :return: Tuple of (real array of shape (observables, s values),
        TimeSeries).
    """
    s_values = np.asarray(s_values, dtype=float)
    if t_max is None:
        t_max = default_t_max(s_values.min())
    series = time_domain_reference(model, psi0, list(observables), t_max, dt)
    result = np.array([laplace_quadrature(series.times, row, s_values).value
                       for row in series.values])
    return result, series
