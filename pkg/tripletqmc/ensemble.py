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

"""Walker ensembles and their population-management primitives.

A triplet ``(w_ctrl, ket, bra, reweight, norm)`` represents the operator
``w_ctrl * reweight[s] * exp(kappa * norm**2 / 2) |ket><bra|`` at every point
``s`` of an :class:`SGrid`. The ensemble stores triplets as parallel arrays;
the per-triplet functions at the bottom of this module share the weight
rules with the array methods.
"""

from collections import namedtuple
import numpy as np

from .error import SimulationError, PopulationLimitError

__all__ = [
    'Triplet',
    'SGrid',
    'Ensemble',
    'split_counts',
    'compress',
    'pre_spawn_split',
    'deactivate',
    'stochastic_decompress',
    'physical_weight',
    'triplet_nbytes'
]


Triplet = namedtuple('Triplet', ['w_ctrl', 'ket', 'bra', 'reweight', 'norm'])


class SGrid(object):
    """Strictly increasing, strictly positive grid of Laplace variables with
    a designated reference point.

    :param values: The grid values.
    :param ref_index: Index of the reference point s_ref.
    """

    def __init__(self, values, ref_index=0):
        values = np.array(values, dtype=float).reshape(-1)
        if len(values) == 0:
            raise SimulationError.ERR.INVALID_INPUT('Empty s-grid')
        if not np.all(np.isfinite(values)) or values[0] <= 0:
            raise SimulationError.ERR.INVALID_INPUT(
                's-grid values must be finite and positive')
        if np.any(np.diff(values) <= 0):
            raise SimulationError.ERR.INVALID_INPUT(
                's-grid values must be strictly increasing')
        if not 0 <= ref_index < len(values):
            raise SimulationError.ERR.INVALID_INPUT(
                'Reference index {} out of range'.format(ref_index))
        self.values = values
        self.values.setflags(write=False)
        self.ref_index = int(ref_index)

    @classmethod
    def linear(cls, s_min, s_max, count, ref_index=0):
        return cls(np.linspace(s_min, s_max, count), ref_index)

    @classmethod
    def log(cls, s_min, s_max, count, ref_index=0):
        if s_min <= 0:
            raise SimulationError.ERR.INVALID_INPUT(
                'Logarithmic s-grid needs a positive minimum')
        return cls(np.geomspace(s_min, s_max, count), ref_index)

    def index_of(self, value):
        """Index of the grid point nearest to `value`."""
        return int(np.argmin(np.abs(self.values - value)))

    @property
    def ref_value(self):
        return float(self.values[self.ref_index])

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __eq__(self, other):
        return (isinstance(other, SGrid) and
                self.ref_index == other.ref_index and
                np.array_equal(self.values, other.values))

    def __ne__(self, other):
        return not self == other

    def __repr__(self):
        return 'SGrid(%r, ref_index=%d)' % (self.values.tolist(),
                                            self.ref_index)


def split_counts(w, w_u):
    """Children per triplet of the floor split, max(1, floor(|w| / w_u))."""
    if w_u <= 0:
        raise SimulationError.ERR.INVALID_CONFIG('w_u must be positive')
    return np.maximum(1, np.floor(np.abs(w) / w_u)).astype(np.int64)


def triplet_nbytes(grid_size):
    """Bytes one stored triplet occupies on a grid of `grid_size` points."""
    return 16 + 3 * 8 + 16 * grid_size


def _phase(w):
    modulus = np.abs(w)
    return np.where(modulus > 0, w / np.where(modulus > 0, modulus, 1), 0)


def _decompress_counts(w, w_u, u):
    if w_u <= 0:
        raise SimulationError.ERR.INVALID_CONFIG('w_u must be positive')
    ratio = np.abs(w) / w_u
    whole = np.floor(ratio)
    rest = u < ratio - whole
    return (whole + rest).astype(np.int64)


def _survives(w, u_dw, u):
    return u < np.abs(w) / u_dw


def _bias(norm, kappa):
    return np.exp(0.5 * kappa * np.asarray(norm, dtype=float) ** 2)


class Ensemble(object):
    """Structure-of-arrays storage of triplets on a shared s-grid.

    :param s_grid: The SGrid all reweight vectors refer to.
    :param w: Complex control weights at s_ref.
    :param ket: Ket bit patterns.
    :param bra: Bra bit patterns.
    :param reweight: Complex array of shape (len(w), len(s_grid)).
    :param norm: Dynamic norms of the (ket, bra) pairs.
    :param loop_index: The main-loop index m the ensemble belongs to.
    :param cancellations: Classes dropped by exact cancellation so far.
    """

    def __init__(self, s_grid, w=(), ket=(), bra=(), reweight=None,
                 norm=(), loop_index=0, cancellations=0):
        self.s_grid = s_grid
        self.w = np.asarray(w, dtype=complex).reshape(-1)
        self.ket = np.asarray(ket, dtype=np.int64).reshape(-1)
        self.bra = np.asarray(bra, dtype=np.int64).reshape(-1)
        self.norm = np.asarray(norm, dtype=np.int64).reshape(-1)
        if reweight is None:
            reweight = np.ones((len(self.w), len(s_grid)), dtype=complex)
        self.reweight = np.asarray(reweight, dtype=complex).reshape(
            len(self.w), len(s_grid))
        if not (len(self.ket) == len(self.bra) == len(self.norm) ==
                len(self.w)):
            raise SimulationError.ERR.INVALID_INPUT(
                'Triplet arrays differ in length')
        self.loop_index = loop_index
        self.cancellations = cancellations

    @classmethod
    def from_triplets(cls, s_grid, triplets, loop_index=0):
        triplets = list(triplets)
        if not triplets:
            return cls(s_grid, loop_index=loop_index)
        return cls(s_grid,
                   w=[t.w_ctrl for t in triplets],
                   ket=[int(t.ket) for t in triplets],
                   bra=[int(t.bra) for t in triplets],
                   reweight=np.stack([np.asarray(t.reweight, dtype=complex)
                                      for t in triplets]),
                   norm=[t.norm for t in triplets],
                   loop_index=loop_index)

    def triplets(self):
        """Returns the content as a list of Triplet tuples."""
        return [Triplet(complex(self.w[n]), int(self.ket[n]),
                        int(self.bra[n]), self.reweight[n].copy(),
                        int(self.norm[n]))
                for n in range(len(self))]

    def __len__(self):
        return len(self.w)

    def _derive(self, w, ket, bra, reweight, norm):
        return Ensemble(self.s_grid, w, ket, bra, reweight, norm,
                        self.loop_index, self.cancellations)

    def take(self, index):
        """Selects triplets by boolean mask or index array."""
        return self._derive(self.w[index], self.ket[index], self.bra[index],
                            self.reweight[index], self.norm[index])

    def repeat(self, counts, w):
        """Replaces each triplet by counts[n] copies carrying weight w[n]."""
        return self._derive(np.repeat(w, counts),
                            np.repeat(self.ket, counts),
                            np.repeat(self.bra, counts),
                            np.repeat(self.reweight, counts, axis=0),
                            np.repeat(self.norm, counts))

    def extend(self, *others):
        """Concatenates other ensembles on the same grid onto this one."""
        parts = (self,) + others
        return self._derive(
            np.concatenate([e.w for e in parts]),
            np.concatenate([e.ket for e in parts]),
            np.concatenate([e.bra for e in parts]),
            np.concatenate([e.reweight for e in parts]),
            np.concatenate([e.norm for e in parts]))

    def bias(self, kappa):
        """Importance-sampling factors exp(kappa * norm**2 / 2)."""
        return _bias(self.norm, kappa)

    def physical_weights(self, kappa):
        """Physical weights, shape (len(self), len(s_grid))."""
        return (self.w * self.bias(kappa))[:, None] * self.reweight

    def total_weight(self, kappa=0.0):
        """Per-s sum of physical weights."""
        return self.physical_weights(kappa).sum(axis=0)

    def compress(self):
        """Merges triplets sharing a (ket, bra) pair.

        The merged control weight is the sum of the class, and its reweight
        vector is the control-weighted average so that every per-s class
        weight is conserved. Classes whose control weights sum to exactly
        zero are dropped and counted in `cancellations`.
        """
        if len(self) == 0:
            return self._derive(self.w, self.ket, self.bra, self.reweight,
                                self.norm)
        order = np.lexsort((self.bra, self.ket))
        ket = self.ket[order]
        bra = self.bra[order]
        w = self.w[order]
        first = np.ones(len(order), dtype=bool)
        first[1:] = (ket[1:] != ket[:-1]) | (bra[1:] != bra[:-1])
        starts = np.flatnonzero(first)
        w_sum = np.add.reduceat(w, starts)
        weighted = self.reweight[order]
        weighted *= w[:, None]
        weighted = np.add.reduceat(weighted, starts, axis=0)
        keep = w_sum != 0
        reweight = weighted[keep] / w_sum[keep][:, None]
        reweight[:, self.s_grid.ref_index] = 1
        result = self._derive(w_sum[keep], ket[starts][keep],
                              bra[starts][keep], reweight,
                              self.norm[order][starts][keep])
        result.cancellations += int(np.count_nonzero(~keep))
        return result

    def split(self, w_u, cap=None, reserve=0):
        """Pre-spawn split into max(1, floor(|w| / w_u)) equal children.

        With a cap, raises PopulationLimitError before splitting when the
        children, their spawns and `reserve` further triplets would exceed
        it.
        """
        counts = split_counts(self.w, w_u)
        self._check_cap(counts, cap, reserve)
        return self.repeat(counts, self.w / counts)

    def decompress(self, w_u, rng, cap=None, reserve=0):
        """Stochastic decompression into children of modulus w_u.

        Each triplet yields floor(|w| / w_u) children plus one more with
        probability equal to the fractional part, all carrying the phase of
        w. The total weight is conserved on average.
        """
        counts = _decompress_counts(self.w, w_u, rng.random(len(self)))
        self._check_cap(counts, cap, reserve)
        return self.repeat(counts, w_u * _phase(self.w))

    def _check_cap(self, counts, cap, reserve):
        # Every child may add one spawned triplet.
        total = 2 * int(counts.sum()) + reserve
        if cap is not None and total > cap:
            raise PopulationLimitError(self.loop_index, total, cap)

    def deactivate(self, u_dw, rng):
        """Resolves triplets with |w| < u_dw.

        Each sub-threshold triplet survives with probability |w| / u_dw and
        is then promoted to modulus u_dw, keeping its phase.

        :return: Tuple of (active, inactive survivors, number killed).
        """
        below = np.abs(self.w) < u_dw
        active = self.take(~below)
        candidates = self.take(below)
        alive = _survives(candidates.w, u_dw, rng.random(len(candidates)))
        inactive = candidates.take(alive)
        inactive.w = u_dw * _phase(inactive.w)
        return active, inactive, int(np.count_nonzero(~alive))

    def __repr__(self):
        return 'Ensemble(loop=%d, size=%d)' % (self.loop_index, len(self))


def compress(ensemble):
    """Merges triplets sharing a (ket, bra) pair, see Ensemble.compress."""
    return ensemble.compress()


def pre_spawn_split(t, w_u):
    """Splits a triplet into max(1, floor(|w| / w_u)) children of equal
    weight.

    :param t: The Triplet.
    :param w_u: The unit weight.
    :return: A list of Triplet.
    """
    n_c = int(split_counts(np.array([t.w_ctrl]), w_u)[0])
    return [t._replace(w_ctrl=t.w_ctrl / n_c) for _ in range(n_c)]


def deactivate(t, u_dw, rng):
    """Stochastically resolves a sub-threshold triplet.

    :param t: A Triplet with |w_ctrl| < u_dw.
    :param u_dw: The deadweight threshold.
    :param rng: A numpy Generator.
    :return: The surviving Triplet with modulus u_dw, or None when killed.
    """
    if abs(t.w_ctrl) >= u_dw:
        raise SimulationError.ERR.CONTRACT_VIOLATION(
            'deactivate called with |w| >= u_dw')
    if _survives(t.w_ctrl, u_dw, rng.random()):
        return t._replace(w_ctrl=complex(u_dw * _phase(t.w_ctrl)))
    return None


def stochastic_decompress(t, w_u, rng):
    """Decompresses a triplet into unit-modulus children plus a stochastic
    rest, see Ensemble.decompress.

    :return: A list of Triplet.
    """
    count = int(_decompress_counts(np.array([t.w_ctrl]), w_u,
                                   rng.random())[0])
    unit = complex(w_u * _phase(t.w_ctrl))
    return [t._replace(w_ctrl=unit) for _ in range(count)]


def physical_weight(t, kappa, s_index):
    """Returns w_ctrl * reweight[s_index] * exp(kappa * norm**2 / 2)."""
    return complex(t.w_ctrl * t.reweight[s_index] * _bias(t.norm, kappa))
