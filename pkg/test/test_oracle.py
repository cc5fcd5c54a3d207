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


import unittest

import mock
import numpy as np
from scipy.linalg import expm
from scipy.sparse.linalg import expm_multiply

from tripletqmc.engine import propagator_bound
from tripletqmc.error import SimulationError
from tripletqmc.model import XXZChain, IsingChain, SpinBasisState, SigmaZ
from tripletqmc.observables import standard_observable_suite
from tripletqmc.oracle import (DenseOperatorRep, pure_density, expectation,
                               liouvillian, dense_resolvent, apply_propagator,
                               truncated_magic_terms, dense_truncated_magic,
                               propagator_radius,
                               propagation_chunk, time_domain_reference,
                               laplace_quadrature,
                               resolvent_reference, quadrature_reference)


def state(text):
    return SpinBasisState.from_string(text)


def random_density(dimension, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(dimension, dimension)) + \
        1j * rng.normal(size=(dimension, dimension))
    rho = a.dot(a.conj().T)
    return rho / np.trace(rho)


class TestDenseResolvent(unittest.TestCase):

    models = [XXZChain(4, 1.0, 0.9), IsingChain(4, 1.0, 0.5, 0.2)]

    def test_trace(self):
        for model in self.models:
            rho0 = pure_density(model, model.initial_state('domain_wall'))
            for s in (0.05, 0.5, 5.0):
                rho = dense_resolvent(model, rho0, s)
                self.assertAlmostEqual(np.trace(rho), 1.0, delta=1e-10)
                np.testing.assert_allclose(rho, rho.conj().T, atol=1e-10)

    def test_stationary(self):
        model = IsingChain(4, 1.0, 0.0, 0.3)
        rho0 = pure_density(model, state('udud'))
        for s in (0.05, 2.0):
            np.testing.assert_allclose(dense_resolvent(model, rho0, s), rho0,
                                       atol=1e-12)

    def test_liouvillian(self):
        for model in (XXZChain(3, 1.0, 0.9), IsingChain(3, 1.0, 0.5, 0.2)):
            rho0 = random_density(model.dimension, 1)
            generator = liouvillian(model)
            for s in (0.1, 1.0):
                x = np.linalg.solve(s * np.eye(len(generator)) - generator,
                                    rho0.reshape(-1))
                np.testing.assert_allclose(
                    dense_resolvent(model, rho0, s),
                    s * x.reshape(rho0.shape), atol=1e-10)

    def test_limits(self):
        with self.assertRaises(SimulationError) as e:
            DenseOperatorRep(XXZChain(9, 1.0, 1.0))
        self.assertEqual(e.exception.code, SimulationError.ERR.RESOURCE_LIMIT)
        with self.assertRaises(SimulationError):
            liouvillian(XXZChain(5, 1.0, 1.0))
        with self.assertRaises(SimulationError):
            dense_resolvent(XXZChain(2, 1.0, 1.0), np.eye(4), 0.0)

    def test_reference_values(self):
        model = XXZChain(4, 1.0, 0.9)
        psi0 = state('uudd')
        suite = standard_observable_suite(model, psi0)
        values = resolvent_reference(model, psi0, suite, [0.5, 1.0])
        self.assertEqual(values.shape, (6, 2))
        np.testing.assert_allclose(values[0], 1.0, atol=1e-10)
        np.testing.assert_allclose(values.imag, 0.0, atol=1e-10)
        # Total magnetization is conserved
        np.testing.assert_allclose(values[1:5].sum(axis=0), 0.0, atol=1e-10)


class TestTruncatedSeries(unittest.TestCase):

    def test_free_chain(self):
        model = XXZChain(3, 0.0, 0.9)
        rep = DenseOperatorRep(model)
        rho0 = random_density(model.dimension, 2)
        s, r = 0.7, 20.0
        terms = truncated_magic_terms(rep, rho0, s, r, 0)
        self.assertEqual(len(terms), 1)
        np.testing.assert_allclose(terms[0],
                                   s * rep.free_resolvent(s + r) * rho0)

    def test_propagator(self):
        model = IsingChain(3, 1.0, 0.5, 0.0)
        rep = DenseOperatorRep(model)
        x = random_density(model.dimension, 3)
        s, r = 1.0, 10.0
        expected = r * rep.free_resolvent(s + r) * (
            x - 1j * (rep.interaction.dot(x) - x.dot(rep.interaction)) / r)
        np.testing.assert_allclose(apply_propagator(model, x, s, r),
                                   expected)

    def test_convergence(self):
        model = XXZChain(4, 1.0, 0.9)
        rep = DenseOperatorRep(model)
        rho0 = pure_density(model, state('uudd'))
        s, r = 0.5, 150.0
        exact = dense_resolvent(rep, rho0, s)
        partial = np.cumsum(truncated_magic_terms(rep, rho0, s, r, 3000),
                            axis=0)
        errors = [np.linalg.norm(partial[m] - exact) / np.linalg.norm(exact)
                  for m in range(200, 3001, 200)]
        self.assertLess(errors[-1], 1e-3)
        coarse = errors[::3]
        for before, after in zip(coarse, coarse[1:]):
            self.assertLess(after, before)

    def test_divergence(self):
        model = XXZChain(4, 1.0, 0.9)
        rep = DenseOperatorRep(model)
        rho0 = pure_density(model, state('uudd'))
        terms = truncated_magic_terms(rep, rho0, 0.5, 30.0, 1500)
        self.assertGreater(np.linalg.norm(terms[1500]),
                           np.linalg.norm(terms[500]))

    def test_trace(self):
        model = IsingChain(4, 1.0, 0.5, 0.2)
        rho0 = pure_density(model, state('uuuu'))
        rho = dense_truncated_magic(model, rho0, 2.0, 30.0, 600)
        self.assertAlmostEqual(np.trace(rho), 1.0, delta=1e-8)


class TestPropagatorRadius(unittest.TestCase):

    def test_free_chain(self):
        radius = propagator_radius(XXZChain(4, 0.0, 0.9), state('uudd'),
                                   1.0, 10.0)
        self.assertAlmostEqual(radius, 10.0 / 11.0)

    def test_rate_threshold(self):
        model = XXZChain(4, 1.0, 0.9)
        psi0 = state('uudd')
        self.assertGreater(propagator_radius(model, psi0, 0.5, 30.0), 1.01)
        radius = propagator_radius(model, psi0, 0.5, 150.0)
        self.assertGreater(radius, 0.995)
        self.assertLess(radius, 0.9995)

    def test_below_norm_bound(self):
        cases = [
            (XXZChain(4, 1.0, 0.9), 'uudd', 0.5, 30.0),
            (XXZChain(4, 1.0, 0.9), 'uudd', 0.5, 150.0),
            (XXZChain(6, 1.0, 0.9), 'uuuddd', 2.0, 100.0),
            (IsingChain(4, 1.0, 0.2, 0.6), 'uudd', 1.0, 40.0),
        ]
        for model, text, s, r in cases:
            radius = propagator_radius(model, state(text), s, r)
            self.assertLessEqual(radius, propagator_bound(model, s, r),
                                 (model, s, r))
        self.assertLess(propagator_radius(*cases[2]), 1.0)

    def test_invalid(self):
        model = XXZChain(4, 1.0, 0.9)
        with self.assertRaises(SimulationError):
            propagator_radius(model, state('uudd'), 0.0, 30.0)
        with self.assertRaises(SimulationError):
            propagator_radius(IsingChain(8, 1.0, 0.2, 0.0),
                              state('uuuudddd'), 1.0, 30.0)


class TestTimeDomain(unittest.TestCase):

    def test_free_chain_constant(self):
        model = XXZChain(4, 0.0, 0.9)
        series = time_domain_reference(model, state('udud'), SigmaZ(2, 4),
                                       2.0, 0.01)
        np.testing.assert_allclose(series.values, -1.0)
        self.assertLess(series.norm_error, 1e-9)

    def test_matches_expm(self):
        model = XXZChain(4, 1.0, 0.9)
        rep = DenseOperatorRep(model)
        x = rep.observable(SigmaZ(2, 4))
        psi0 = state('uudd')
        series = time_domain_reference(model, psi0, SigmaZ(2, 4), 5.0, 0.01)
        self.assertLess(series.norm_error, 1e-9)
        psi = np.zeros(model.dimension, dtype=complex)
        psi[int(psi0)] = 1
        for k in (0, 77, 250, 256, 257, 500):
            phi = expm(-1j * rep.hamiltonian * series.times[k]).dot(psi)
            self.assertAlmostEqual(series.values[k],
                                   np.vdot(phi, x.dot(phi)).real,
                                   delta=1e-8)

    def test_coarse_step(self):
        model = XXZChain(4, 1.0, 0.9)
        with self.assertRaises(SimulationError) as e:
            time_domain_reference(model, state('uudd'), SigmaZ(1, 4),
                                  10.0, 0.5)
        self.assertEqual(e.exception.code, SimulationError.ERR.ACCURACY)

    def test_chunk_size(self):
        self.assertEqual(propagation_chunk(16), 256)
        self.assertEqual(propagation_chunk(2 ** 16), 15)
        self.assertEqual(propagation_chunk(2 ** 20), 1)

    def test_bounded_blocks(self):
        model = XXZChain(4, 1.0, 0.9)
        observables = [SigmaZ(1, 4), SigmaZ(3, 4)]
        whole = time_domain_reference(model, state('uudd'), observables,
                                      3.0, 0.01)
        with mock.patch('tripletqmc.oracle._BLOCK_ELEMENTS', 80), \
                mock.patch('tripletqmc.oracle.expm_multiply',
                           wraps=expm_multiply) as propagate:
            blocked = time_domain_reference(model, state('uudd'),
                                            observables, 3.0, 0.01)
        self.assertEqual(propagate.call_count, 75)
        for call in propagate.call_args_list:
            self.assertLessEqual(call[1]['num'], 5)
        np.testing.assert_allclose(blocked.values, whole.values, atol=1e-10)


class TestQuadrature(unittest.TestCase):

    def test_constant(self):
        times = np.linspace(0, 10, 1001)
        result = laplace_quadrature(times, np.full(1001, 0.3), 0.5)
        self.assertAlmostEqual(result.value, 0.3 * (1 - np.exp(-5)),
                               delta=1e-10)
        self.assertTrue(result.tail_warning)

    def test_cosine(self):
        times = np.linspace(0, 60, 12001)
        s = np.array([0.5, 1.0, 2.0])
        result = laplace_quadrature(times, np.cos(2 * times), s)
        np.testing.assert_allclose(result.value, s ** 2 / (s ** 2 + 4),
                                   atol=1e-6)
        self.assertFalse(np.any(result.tail_warning))

    def test_tail_bound(self):
        times = np.linspace(0, 50, 501)
        result = laplace_quadrature(times, np.cos(times), 0.5)
        self.assertAlmostEqual(result.tail_bound, np.exp(-25), delta=1e-20)

    def test_invalid(self):
        with self.assertRaises(SimulationError):
            laplace_quadrature([0.0, 1.0], [1.0, 1.0], 1.0)
        with self.assertRaises(SimulationError):
            laplace_quadrature([0.0, 1.0, 3.0], [1.0, 1.0, 1.0], 1.0)
        with self.assertRaises(SimulationError):
            laplace_quadrature([0.0, 1.0, 2.0], [1.0, 1.0, 1.0], -1.0)

    def test_routes_agree(self):
        model = XXZChain(4, 1.0, 0.9)
        psi0 = state('uudd')
        suite = standard_observable_suite(model, psi0)
        s_values = [0.5, 1.0, 2.0]
        exact = resolvent_reference(model, psi0, suite, s_values)
        values, series = quadrature_reference(model, psi0, suite, s_values,
                                              0.005)
        self.assertEqual(series.values.shape[0], len(suite))
        self.assertAlmostEqual(series.times[-1], 100.0)
        np.testing.assert_allclose(values, exact.real, atol=1e-6)


class TestExpectation(unittest.TestCase):

    def test_trace_product(self):
        x = np.array([[1.0, 2.0], [3.0, 4.0]])
        rho = np.array([[0.5, 0.1j], [-0.1j, 0.5]])
        self.assertAlmostEqual(expectation(x, rho), np.trace(x.dot(rho)))
