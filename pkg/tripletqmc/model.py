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

"""Spin-chain Hamiltonians split into a diagonal free part and a hopping part.

Basis states are bit patterns: site ``i`` (1-based) lives in bit ``i - 1``,
and a set bit is spin up (s^z = +1). Every chain exposes scalar operations on
:class:`SpinBasisState` values together with vectorized counterparts working
on int64 arrays of bit patterns; the scalar forms are thin wrappers around
the vectorized ones.
"""

from collections import namedtuple
from scipy import sparse
import numpy as np
import abc

from .error import SimulationError
from .utils import bit_mask, popcount

__all__ = [
    'MAX_LENGTH',
    'SpinBasisState',
    'Transition',
    'SpinChain',
    'XXZChain',
    'IsingChain',
    'initial_state',
    'Observable',
    'Identity',
    'SigmaZ',
    'Projector',
    'BondEnergy',
    'make_observable'
]


MAX_LENGTH = 63

_UP = (u'u', u'1', u'↑', u'+')
_DOWN = (u'd', u'0', u'↓', u'-')


class SpinBasisState(int):
    """A computational basis state of a chain of `length` spins.

    Behaves as the integer bit pattern, so two states compare equal iff all
    their bits are equal.

    :param bits: The bit pattern, site 1 in the least significant bit.
    :param length: The number of sites.
    """

    def __new__(cls, bits, length):
        if not 1 <= length <= MAX_LENGTH:
            raise SimulationError.ERR.INVALID_INPUT(
                'Chain length must be in 1..{}'.format(MAX_LENGTH))
        bits = int(bits)
        if bits < 0 or bits >> length:
            raise SimulationError.ERR.INVALID_INPUT(
                'Bit pattern {:#x} does not fit {} sites'.format(bits, length))
        self = super(SpinBasisState, cls).__new__(cls, bits)
        self.length = length
        return self

    @classmethod
    def from_string(cls, text):
        """Parses a state written site 1 first, e.g. ``'uudd'`` or ``'1100'``.
        """
        bits = 0
        for i, c in enumerate(text):
            if c in _UP:
                bits |= 1 << i
            elif c not in _DOWN:
                raise SimulationError.ERR.INVALID_INPUT(
                    'Invalid spin {!r} in {!r}'.format(c, text))
        return cls(bits, len(text))

    def spin(self, site):
        """Returns s^z = +1 or -1 of the 1-based `site`."""
        if not 1 <= site <= self.length:
            raise SimulationError.ERR.INVALID_INPUT(
                'Site {} out of range'.format(site))
        return 1 if (self >> (site - 1)) & 1 else -1

    def __str__(self):
        return u''.join(u'↑' if (self >> i) & 1 else u'↓'
                        for i in range(self.length))

    def __repr__(self):
        return '%s(%r)' % (type(self).__name__, self.to_string())

    def to_string(self):
        """Returns the ``u``/``d`` form accepted by :meth:`from_string`."""
        return ''.join('u' if (self >> i) & 1 else 'd'
                       for i in range(self.length))

    def __reduce__(self):
        return (SpinBasisState, (int(self), self.length))


Transition = namedtuple('Transition', ['target', 'amplitude'])
"""One off-diagonal element ``<target|H^int|source>`` of the interaction."""


def _as_states(states):
    return np.asarray(states, dtype=np.int64)


def _spin(states, site):
    return 2 * ((states >> (site - 1)) & 1) - 1


class SpinChain(abc.ABC):
    """Open chain of spin-1/2 sites with H = H^free + H^int.

    H^free is diagonal in the computational basis, H^int is real symmetric
    and off-diagonal.
    """

    NAME = None

    def __init__(self, length):
        if not 2 <= length <= MAX_LENGTH:
            raise SimulationError.ERR.INVALID_INPUT(
                'Chain length must be in 2..{}'.format(MAX_LENGTH))
        self.length = length

    @property
    def dimension(self):
        return 1 << self.length

    def check_state(self, state):
        """Validates a state against this chain, returning its bit pattern."""
        state_length = getattr(state, 'length', self.length)
        if state_length != self.length:
            raise SimulationError.ERR.INVALID_INPUT(
                'State of length {} used with a chain of length {}'.format(
                    state_length, self.length))
        bits = int(state)
        if bits < 0 or bits >> self.length:
            raise SimulationError.ERR.INVALID_INPUT(
                'Bit pattern {:#x} does not fit {} sites'.format(
                    bits, self.length))
        return bits

    def state(self, bits):
        return SpinBasisState(bits, self.length)

    def all_states(self):
        return np.arange(self.dimension, dtype=np.int64)

    def _anti_aligned(self, states):
        return (states ^ (states >> 1)) & bit_mask(self.length - 1)

    def _bond_sum(self, states):
        """Sum of s_i s_{i+1} over all bonds."""
        broken = popcount(self._anti_aligned(states), self.length - 1)
        return (self.length - 1) - 2 * broken

    def _check_bond(self, bond):
        if not 1 <= bond <= self.length - 1:
            raise SimulationError.ERR.INVALID_INPUT(
                'Bond {} out of range 1..{}'.format(bond, self.length - 1))

    @abc.abstractmethod
    def free_energies(self, states):
        """Vectorized diagonal <x|H^free|x>."""

    @abc.abstractmethod
    def count_transitions(self, states):
        """Vectorized number of interaction transitions n_t per state."""

    @abc.abstractmethod
    def select_transitions(self, states, index):
        """Vectorized pick of the `index`-th transition of each state.

        :return: Tuple of (targets, amplitudes).
        """

    @abc.abstractmethod
    def dynamic_norms(self, a, b):
        """Vectorized dynamic norm, -1 where b is unreachable from a."""

    @abc.abstractmethod
    def bond_elements(self, bra, ket, bond):
        """Vectorized <bra|H_bond|ket> of the bond energy density."""

    @abc.abstractmethod
    def bond_partners(self, states, bond):
        """States possibly connected to `states` by the bond energy."""

    @abc.abstractmethod
    def parameters(self):
        """Couplings as a dict keyed by configuration names."""

    @abc.abstractmethod
    def interaction_bound(self):
        """Largest absolute row sum of H^int, bounding its spectral norm."""

    def free_energy(self, state):
        """Returns <state|H^free|state>."""
        bits = self.check_state(state)
        return float(self.free_energies(_as_states([bits]))[0])

    def transitions(self, state):
        """Returns the interaction transitions out of `state`.

        The order is by increasing site index and matches the index used by
        :meth:`select_transitions`.
        """
        bits = _as_states([self.check_state(state)])
        result = []
        for k in range(int(self.count_transitions(bits)[0])):
            targets, amplitudes = self.select_transitions(
                bits, np.full(1, k, dtype=np.int64))
            result.append(Transition(self.state(targets[0]),
                                     float(amplitudes[0])))
        return result

    def dynamic_norm(self, a, b):
        """Minimum number of H^int applications linking a and b.

        :return: A non-negative int, or None when b is unreachable.
        """
        n = int(self.dynamic_norms(_as_states([self.check_state(a)]),
                                   _as_states([self.check_state(b)]))[0])
        return None if n < 0 else n

    def initial_state(self, kind):
        return initial_state(self, kind)

    def interaction_matrix(self):
        """Sparse H^int with entry [target, source] = amplitude."""
        states = self.all_states()
        counts = self.count_transitions(states)
        rows, cols, values = [], [], []
        for k in range(int(counts.max()) if len(counts) else 0):
            source = states[counts > k]
            targets, amplitudes = self.select_transitions(
                source, np.full(len(source), k, dtype=np.int64))
            rows.append(targets)
            cols.append(source)
            values.append(amplitudes)
        if not rows:
            return sparse.csr_matrix((self.dimension, self.dimension))
        return sparse.coo_matrix(
            (np.concatenate(values),
             (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.dimension, self.dimension)).tocsr()

    def to_dict(self):
        data = {'variant': self.NAME, 'L': self.length}
        data.update(self.parameters())
        return data

    def __eq__(self, other):
        return type(self) is type(other) and self.to_dict() == other.to_dict()

    def __ne__(self, other):
        return not self == other

    def __hash__(self):
        return hash(tuple(sorted(self.to_dict().items())))

    def __repr__(self):
        return '%s(%s)' % (type(self).__name__, ', '.join(
            '%s=%r' % item for item in sorted(self.to_dict().items())
            if item[0] != 'variant'))

    @staticmethod
    def for_name(name):
        for cls in SpinChain.__subclasses__():
            if cls.NAME == name:
                return cls
        raise SimulationError.ERR.INVALID_INPUT(
            'Unsupported model variant: {}'.format(name))

    @staticmethod
    def from_dict(data):
        data = dict(data)
        cls = SpinChain.for_name(data.pop('variant', None))
        return cls.from_parameters(data)


class XXZChain(SpinChain):
    """Heisenberg XXZ chain.

    H^free = J_z sum_i s_i s_{i+1}; H^int exchanges anti-aligned neighbours
    with amplitude 2 J_xy.
    """

    NAME = 'xxz'

    def __init__(self, length, j_xy, j_z):
        super(XXZChain, self).__init__(length)
        self.j_xy = float(j_xy)
        self.j_z = float(j_z)

    @classmethod
    def from_parameters(cls, data):
        return cls(data['L'], data['J_xy'], data['J_z'])

    def parameters(self):
        return {'J_xy': self.j_xy, 'J_z': self.j_z}

    @property
    def hop_amplitude(self):
        return 2 * self.j_xy

    def interaction_bound(self):
        return (self.length - 1) * abs(self.hop_amplitude)

    def free_energies(self, states):
        return self.j_z * self._bond_sum(_as_states(states))

    def count_transitions(self, states):
        states = _as_states(states)
        if self.j_xy == 0:
            return np.zeros(states.shape, dtype=np.int64)
        return popcount(self._anti_aligned(states), self.length - 1)

    def select_transitions(self, states, index):
        states = _as_states(states)
        anti = self._anti_aligned(states)
        seen = np.zeros(states.shape, dtype=np.int64)
        position = np.full(states.shape, -1, dtype=np.int64)
        for b in range(self.length - 1):
            hit = (anti >> b) & 1
            position[(hit == 1) & (seen == index)] = b
            seen += hit
        if np.any(position < 0):
            raise SimulationError.ERR.INVALID_INPUT(
                'Transition index out of range')
        targets = states ^ np.left_shift(np.int64(3), position)
        return targets, np.full(states.shape, self.hop_amplitude)

    def dynamic_norms(self, a, b):
        a = _as_states(a)
        b = _as_states(b)
        ups_a = np.zeros(a.shape, dtype=np.int64)
        ups_b = np.zeros(b.shape, dtype=np.int64)
        total = np.zeros(a.shape, dtype=np.int64)
        # Prefix differences of up-spin counts across every cut
        for site in range(self.length - 1):
            ups_a += (a >> site) & 1
            ups_b += (b >> site) & 1
            total += np.abs(ups_a - ups_b)
        total[popcount(a, self.length) != popcount(b, self.length)] = -1
        return total

    def bond_elements(self, bra, ket, bond):
        self._check_bond(bond)
        bra = _as_states(bra)
        ket = _as_states(ket)
        diagonal = self.j_z * _spin(ket, bond) * _spin(ket, bond + 1)
        anti = ((ket >> (bond - 1)) ^ (ket >> bond)) & 1
        swapped = ket ^ (3 << (bond - 1))
        return np.where(bra == ket, diagonal, 0.0) + np.where(
            (anti == 1) & (bra == swapped), self.hop_amplitude, 0.0)

    def bond_partners(self, states, bond):
        self._check_bond(bond)
        return [_as_states(states) ^ (3 << (bond - 1))]


class IsingChain(SpinChain):
    """Quantum Ising chain in a tilted field.

    H^free = -J sum_i s_i s_{i+1} - h_z sum_i s_i; H^int = -h_x sum_i sigma^x_i.
    """

    NAME = 'ising'

    def __init__(self, length, j, h_x, h_z):
        super(IsingChain, self).__init__(length)
        self.j = float(j)
        self.h_x = float(h_x)
        self.h_z = float(h_z)

    @classmethod
    def from_parameters(cls, data):
        return cls(data['L'], data['J'], data['h_x'], data['h_z'])

    def parameters(self):
        return {'J': self.j, 'h_x': self.h_x, 'h_z': self.h_z}

    def interaction_bound(self):
        return self.length * abs(self.h_x)

    def free_energies(self, states):
        states = _as_states(states)
        magnetization = 2 * popcount(states, self.length) - self.length
        return -self.j * self._bond_sum(states) - self.h_z * magnetization

    def count_transitions(self, states):
        states = _as_states(states)
        n_t = self.length if self.h_x != 0 else 0
        return np.full(states.shape, n_t, dtype=np.int64)

    def select_transitions(self, states, index):
        states = _as_states(states)
        index = _as_states(index)
        if np.any((index < 0) | (index >= self.length)):
            raise SimulationError.ERR.INVALID_INPUT(
                'Transition index out of range')
        targets = states ^ np.left_shift(np.int64(1), index)
        return targets, np.full(states.shape, -self.h_x)

    def dynamic_norms(self, a, b):
        return popcount(_as_states(a) ^ _as_states(b), self.length)

    def bond_elements(self, bra, ket, bond):
        self._check_bond(bond)
        bra = _as_states(bra)
        ket = _as_states(ket)
        s_i = _spin(ket, bond)
        s_j = _spin(ket, bond + 1)
        diagonal = -self.j * s_i * s_j - 0.5 * self.h_z * (s_i + s_j)
        flipped = (bra == ket ^ (1 << (bond - 1))) | (bra == ket ^ (1 << bond))
        return np.where(bra == ket, diagonal, 0.0) + np.where(
            flipped, -0.5 * self.h_x, 0.0)

    def bond_partners(self, states, bond):
        self._check_bond(bond)
        states = _as_states(states)
        return [states ^ (1 << (bond - 1)), states ^ (1 << bond)]


def initial_state(model, kind):
    """Builds an initial product state for `model`.

    :param model: The SpinChain.
    :param kind: ``'domain_wall'`` (first half up), ``'all_up'``, a
        ``{'custom': bits}`` mapping, a ``('custom', bits)`` pair or a
        SpinBasisState. Custom bits may be a ``u``/``d`` string or an int.
    :return: A SpinBasisState.
    """
    if isinstance(kind, SpinBasisState):
        return model.state(model.check_state(kind))
    if isinstance(kind, dict) and list(kind) == ['custom']:
        kind = ('custom', kind['custom'])
    if isinstance(kind, tuple) and len(kind) == 2 and kind[0] == 'custom':
        bits = kind[1]
        if isinstance(bits, str):
            bits = SpinBasisState.from_string(bits)
        return model.state(model.check_state(bits))
    if kind == 'domain_wall':
        if model.length % 2:
            raise SimulationError.ERR.INVALID_INPUT(
                'Domain wall state needs an even chain length')
        return model.state(bit_mask(model.length // 2))
    if kind == 'all_up':
        return model.state(bit_mask(model.length))
    raise SimulationError.ERR.INVALID_INPUT(
        'Unknown initial state: {!r}'.format(kind))


class Observable(abc.ABC):
    """A Hermitian operator given by its matrix elements <bra|X|ket>."""

    NAMES = ()
    diagonal_only = True

    def __init__(self, name):
        self.name = name

    @abc.abstractmethod
    def elements(self, bra, ket):
        """Vectorized <bra|X|ket> as a complex array."""

    def partners(self, states):
        """Bra states that may have nonzero elements with ket `states`,
        besides the states themselves."""
        return []

    def __call__(self, bra, ket):
        return complex(self.elements(_as_states([int(bra)]),
                                     _as_states([int(ket)]))[0])

    def matrix(self, length):
        """Sparse matrix with entry [a, b] = <a|X|b> over all 2**length
        basis states."""
        dimension = 1 << length
        states = np.arange(dimension, dtype=np.int64)
        rows, cols = [states], [states]
        values = [self.elements(states, states)]
        for bras in self.partners(states):
            found = self.elements(bras, states)
            keep = found != 0
            rows.append(bras[keep])
            cols.append(states[keep])
            values.append(found[keep])
        return sparse.coo_matrix(
            (np.concatenate(values),
             (np.concatenate(rows), np.concatenate(cols))),
            shape=(dimension, dimension)).tocsr()

    def __repr__(self):
        return '%s(%r)' % (type(self).__name__, self.name)

    @classmethod
    @abc.abstractmethod
    def parse(cls, model, argument, initial):
        """Builds the observable from the text after the colon of its name."""


class Identity(Observable):
    NAMES = ('identity',)

    def __init__(self):
        super(Identity, self).__init__('identity')

    def elements(self, bra, ket):
        return (_as_states(bra) == _as_states(ket)).astype(complex)

    @classmethod
    def parse(cls, model, argument, initial):
        return cls()


class SigmaZ(Observable):
    """Local magnetization s^z of one 1-based site."""

    NAMES = ('sigma_z',)

    def __init__(self, site, length):
        if not 1 <= site <= length:
            raise SimulationError.ERR.INVALID_INPUT(
                'Site {} out of range 1..{}'.format(site, length))
        super(SigmaZ, self).__init__('sigma_z:%d' % site)
        self.site = site

    def elements(self, bra, ket):
        bra = _as_states(bra)
        ket = _as_states(ket)
        return np.where(bra == ket, _spin(ket, self.site), 0).astype(complex)

    @classmethod
    def parse(cls, model, argument, initial):
        return cls(_parse_index(argument), model.length)


class Projector(Observable):
    """Rank-one projector onto a basis state."""

    NAMES = ('projector', 'loschmidt')

    def __init__(self, state, name=None):
        super(Projector, self).__init__(
            name or 'projector:%s' % state.to_string())
        self.state = state

    def elements(self, bra, ket):
        target = int(self.state)
        hit = (_as_states(bra) == target) & (_as_states(ket) == target)
        return hit.astype(complex)

    @classmethod
    def parse(cls, model, argument, initial):
        if argument is None:
            if initial is None:
                raise SimulationError.ERR.INVALID_INPUT(
                    'The Loschmidt echo needs an initial state')
            return cls(model.state(model.check_state(initial)), 'loschmidt')
        state = SpinBasisState.from_string(argument)
        model.check_state(state)
        return cls(state)


class BondEnergy(Observable):
    """Energy density H_i of the bond between sites i and i + 1."""

    NAMES = ('energy',)
    diagonal_only = False

    def __init__(self, model, bond):
        model._check_bond(bond)
        super(BondEnergy, self).__init__('energy:%d' % bond)
        self.model = model
        self.bond = bond

    def elements(self, bra, ket):
        return self.model.bond_elements(bra, ket, self.bond).astype(complex)

    def partners(self, states):
        return self.model.bond_partners(states, self.bond)

    @classmethod
    def parse(cls, model, argument, initial):
        return cls(model, _parse_index(argument))


def _parse_index(argument):
    try:
        return int(argument)
    except (TypeError, ValueError):
        raise SimulationError.ERR.INVALID_INPUT(
            'Expected an integer index, got {!r}'.format(argument))


def make_observable(model, name, initial=None):
    """Builds an observable from its name.

    Supported names are ``identity``, ``loschmidt``, ``sigma_z:<site>``,
    ``energy:<bond>`` and ``projector:<bits>``, with 1-based indices.

    :param model: The SpinChain the observable acts on.
    :param name: The observable name.
    :param initial: The initial state, needed for ``loschmidt``.
    :return: An Observable.
    """
    kind, _, argument = name.partition(':')
    for cls in Observable.__subclasses__():
        if kind in cls.NAMES:
            return cls.parse(model, argument or None, initial)
    raise SimulationError.ERR.INVALID_INPUT(
        'Unknown observable: {!r}'.format(name))
