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


import math
import unittest

import mock
import numpy as np

from tripletqmc.engine import (LoopSchedule, FreeEvolution, Decompression,
                               RunResult, init_ensemble, free_factors,
                               free_update, spawn_step, spawn_outcomes,
                               measure, propagator_bound, run_simulation)
from tripletqmc.ensemble import SGrid, Ensemble, Triplet
from tripletqmc.error import ConfigError, PopulationLimitError
from tripletqmc.model import (XXZChain, IsingChain, SpinBasisState,
                              make_observable)
from tripletqmc.observables import aggregate_runs
from tripletqmc.oracle import (DenseOperatorRep, pure_density, expectation,
                               truncated_magic_terms, dense_truncated_magic)


def state(text):
    return SpinBasisState.from_string(text)


def expected_step(ensemble, model, schedule):
    """One loop applied to the mean ensemble: parents plus every spawn
    weighted by its probability, then the free evolution."""
    triplets = list(ensemble.triplets())
    for t in ensemble.triplets():
        for probability, child in spawn_outcomes(model, schedule, t):
            triplets.append(child._replace(w_ctrl=probability * child.w_ctrl))
    merged = Ensemble.from_triplets(ensemble.s_grid, triplets,
                                    ensemble.loop_index + 1).compress()
    return free_update(merged, model, schedule.r, FreeEvolution.LOOP)


class TestLoopSchedule(unittest.TestCase):

    def test_defaults(self):
        schedule = LoopSchedule(30, 100)
        self.assertEqual(schedule.kappa, 0.0)
        self.assertEqual(schedule.decompression, Decompression.SPLIT)
        self.assertFalse(schedule.deadweight_active(50))

    def test_invalid(self):
        for kwargs, field in (({'r': -1}, 'schedule.r'),
                              ({'m_trunc': 0}, 'schedule.M_trunc'),
                              ({'kappa': -0.5}, 'schedule.kappa'),
                              ({'w_u': 0}, 'schedule.w_u'),
                              ({'u_dw': -1e-3}, 'schedule.u_dw')):
            args = {'r': 30, 'm_trunc': 10}
            args.update(kwargs)
            with self.assertRaises(ConfigError) as e:
                LoopSchedule(**args)
            self.assertEqual(e.exception.field, field)

    def test_paper_units(self):
        self.assertEqual(LoopSchedule.loop_from_paper_units(8, 30), 240)
        schedule = LoopSchedule(30, 300, u_dw=1e-3, dw_enable_loop=240)
        self.assertFalse(schedule.deadweight_active(239))
        self.assertTrue(schedule.deadweight_active(240))


class TestInitAndFreeUpdate(unittest.TestCase):

    def test_init(self):
        model = XXZChain(4, 1.0, 0.9)
        grid = SGrid([0.1, 1.0])
        e = init_ensemble(model, state('uudd'), grid)
        self.assertEqual(len(e), 1)
        t = e.triplets()[0]
        self.assertEqual((t.w_ctrl, t.ket, t.bra, t.norm), (1, 3, 3, 0))
        np.testing.assert_array_equal(t.reweight, [1, 1])

    def test_initial_mode(self):
        model = XXZChain(4, 1.0, 0.9)
        grid = SGrid([0.1, 1.0], ref_index=1)
        e = free_update(init_ensemble(model, state('uudd'), grid), model,
                        30.0, FreeEvolution.INITIAL)
        self.assertAlmostEqual(e.w[0], 1 / 31.0)
        self.assertAlmostEqual(e.reweight[0, 0], 31 / 30.1)
        self.assertEqual(e.reweight[0, 1], 1)

    def test_loop_mode_diagonal(self):
        model = XXZChain(4, 1.0, 0.9)
        grid = SGrid([0.1, 1.0], ref_index=1)
        e = Ensemble(grid, [0.5j], [3], [3], norm=[0])
        result = free_update(e, model, 30.0, FreeEvolution.LOOP)
        self.assertAlmostEqual(result.w[0], 0.5j * 30 / 31.0)

    def test_loop_mode_matches_dense(self):
        model = XXZChain(4, 1.0, 0.9)
        rep = DenseOperatorRep(model)
        grid = SGrid([0.05, 0.5, 5.0], ref_index=1)
        ket, bra = int(state('duud')), int(state('uudd'))
        e = Ensemble(grid, [1.0], [ket], [bra],
                     norm=[model.dynamic_norm(state('duud'), state('uudd'))])
        result = free_update(e, model, 30.0, FreeEvolution.LOOP)
        physical = result.physical_weights(0.0)[0]
        for j, s in enumerate(grid):
            g = 30.0 * rep.free_resolvent(s + 30.0)[ket, bra]
            self.assertAlmostEqual(physical[j], g)
            self.assertLess(abs(physical[j]), 1)

    def test_propagator_bound(self):
        model = XXZChain(4, 1.0, 0.9)
        self.assertEqual(model.interaction_bound(), 6.0)
        self.assertAlmostEqual(propagator_bound(model, 0.5, 30.0),
                               math.sqrt(900 + 144) / 30.5)
        self.assertLess(propagator_bound(model, 0.5, 150.0), 1.0)
        ising = IsingChain(12, 1.0, -0.2, 0.6)
        self.assertAlmostEqual(ising.interaction_bound(), 2.4)
        self.assertAlmostEqual(propagator_bound(ising, 1.0, 40.0),
                               math.hypot(40.0, 4.8) / 41.0)

    def test_free_factors(self):
        g = free_factors([1.0, 2.0], 10.0, [0.0, 3.0], 'loop')
        np.testing.assert_allclose(g[1], 10.0 / (np.array([11.0, 12.0]) +
                                                 3j))
        g = free_factors([1.0], 10.0, [0.0], FreeEvolution.INITIAL)
        self.assertAlmostEqual(g[0, 0], 1 / 11.0)


class TestSpawn(unittest.TestCase):

    def test_two_site_example(self):
        model = XXZChain(2, 1.0, 0.9)
        schedule = LoopSchedule(30.0, 10, kappa=0.5)
        grid = SGrid([1.0])
        parent = Ensemble(grid, [0.2], [int(state('ud'))], [int(state('ud'))],
                          norm=[0])
        factor = (2.0 / 30.0) * 2 * math.exp(-0.25)
        expected = {
            (int(state('du')), int(state('ud'))): -1j * 0.2 * factor,
            (int(state('ud')), int(state('du'))): 1j * 0.2 * factor,
        }
        rng = np.random.default_rng(0)
        seen = set()
        for _ in range(20):
            result = spawn_step(parent, model, schedule, rng)
            self.assertEqual(len(result), 2)
            self.assertEqual(result.w[0], 0.2)
            pair = (int(result.ket[1]), int(result.bra[1]))
            self.assertAlmostEqual(result.w[1], expected[pair])
            self.assertEqual(result.norm[1], 1)
            seen.add(pair)
        self.assertEqual(seen, set(expected))

    def test_outcomes_cover_step(self):
        model = IsingChain(3, 1.0, 0.4, 0.2)
        schedule = LoopSchedule(20.0, 10, kappa=1.0)
        grid = SGrid([0.5, 1.0])
        parent = Triplet(0.3 - 0.1j, int(state('udu')), int(state('uuu')),
                         np.array([1.2, 1.0], dtype=complex), 1)
        outcomes = spawn_outcomes(model, schedule, parent)
        self.assertEqual(len(outcomes), 6)
        self.assertAlmostEqual(sum(p for p, _ in outcomes), 1.0)
        weights = {(t.ket, t.bra): t.w_ctrl for _, t in outcomes}

        n = 60000
        copies = Ensemble.from_triplets(grid, [parent] * n)
        result = spawn_step(copies, model, schedule,
                            np.random.default_rng(4))
        spawned = result.take(slice(n, None))
        self.assertEqual(len(spawned), n)
        counts = {}
        for ket, bra, w in zip(spawned.ket, spawned.bra, spawned.w):
            self.assertAlmostEqual(w, weights[(ket, bra)])
            counts[(ket, bra)] = counts.get((ket, bra), 0) + 1
        for p, t in outcomes:
            stderr = math.sqrt(p * (1 - p) / n)
            self.assertLess(abs(counts[(t.ket, t.bra)] / n - p), 4 * stderr)

    def test_diagonal_bias_attenuates(self):
        model = XXZChain(4, 1.0, 0.9)
        schedule = LoopSchedule(30.0, 10, kappa=2.0)
        psi = int(state('uudd'))
        parent = Triplet(1.0, psi, psi, np.ones(1, dtype=complex), 0)
        plain = LoopSchedule(30.0, 10)
        for (_, biased), (_, unbiased) in zip(
                spawn_outcomes(model, schedule, parent),
                spawn_outcomes(model, plain, parent)):
            self.assertLessEqual(abs(biased.w_ctrl), abs(unbiased.w_ctrl))

    def test_no_transitions(self):
        model = XXZChain(3, 1.0, 0.9)
        grid = SGrid([1.0])
        psi = int(state('uuu'))
        parent = Ensemble(grid, [1.0], [psi], [psi], norm=[0])
        result = spawn_step(parent, model, LoopSchedule(30.0, 10),
                            np.random.default_rng(0))
        self.assertEqual(len(result), 1)


class TestExpectedDynamics(unittest.TestCase):

    def check_against_series(self, model, psi0, kappa, names, loops=6):
        r = 30.0
        grid = SGrid([0.5, 1.0, 2.0], ref_index=1)
        schedule = LoopSchedule(r, loops, kappa=kappa)
        observables = [make_observable(model, name, psi0) for name in names]
        rep = DenseOperatorRep(model)
        matrices = [rep.observable(obs) for obs in observables]
        rho0 = pure_density(model, psi0)
        terms = [truncated_magic_terms(rep, rho0, s, r, loops - 1)
                 for s in grid]

        e = free_update(init_ensemble(model, psi0, grid), model, r,
                        FreeEvolution.INITIAL)
        for m in range(loops):
            if m:
                e = expected_step(e, model, schedule)
            values = measure(e, observables, kappa)
            for k, x in enumerate(matrices):
                for j in range(len(grid)):
                    exact = expectation(x, terms[j][m])
                    self.assertAlmostEqual(values[k, j], exact, delta=1e-12,
                                           msg=(m, names[k], j))

    def test_xxz(self):
        model = XXZChain(3, 1.0, 0.9)
        for kappa in (0.0, 2.0):
            self.check_against_series(model, state('udd'), kappa,
                                      ['identity', 'sigma_z:1', 'energy:1'])

    def test_ising(self):
        model = IsingChain(3, 1.0, 0.5, 0.2)
        for kappa in (0.0, 2.0):
            self.check_against_series(model, state('uuu'), kappa,
                                      ['identity', 'sigma_z:2', 'energy:2',
                                       'loschmidt'])

    def test_two_sites(self):
        self.check_against_series(XXZChain(2, 1.0, 0.9), state('ud'), 1.0,
                                  ['identity', 'sigma_z:1'], loops=10)


class TestRunSimulation(unittest.TestCase):

    def test_single_loop(self):
        model = XXZChain(4, 1.0, 0.9)
        grid = SGrid([0.1, 1.0, 10.0])
        observables = [make_observable(model, 'identity'),
                       make_observable(model, 'sigma_z:1'),
                       make_observable(model, 'sigma_z:4')]
        result = run_simulation(model, state('uudd'), grid,
                                LoopSchedule(30.0, 1), observables,
                                np.random.default_rng(0))
        self.assertIsInstance(result, RunResult)
        self.assertEqual(result.m_trunc, 1)
        s = grid.values
        np.testing.assert_allclose(result.finalize(),
                                   [s / (s + 30), s / (s + 30),
                                    -s / (s + 30)])
        self.assertEqual(result.attempts.tolist(), [0])

    def test_population_cap(self):
        model = XXZChain(4, 1.0, 0.9)
        grid = SGrid([1.0])
        with self.assertRaises(PopulationLimitError) as e:
            run_simulation(model, state('uudd'), grid,
                           LoopSchedule(30.0, 5, w_u=1e-3),
                           [make_observable(model, 'identity')],
                           np.random.default_rng(0), population_cap=10)
        self.assertEqual(e.exception.loop, 2)

    def test_population_cap_counts_spawns(self):
        model = XXZChain(4, 1.0, 0.9)
        grid = SGrid([1.0])
        identity = [make_observable(model, 'identity')]
        # 32 children at loop 2 may hold 64 triplets after spawning
        with self.assertRaises(PopulationLimitError) as e:
            run_simulation(model, state('uudd'), grid,
                           LoopSchedule(30.0, 2, w_u=1e-3), identity,
                           np.random.default_rng(0), population_cap=63)
        self.assertEqual(e.exception.population, 64)

        held = []

        def spawn(*args):
            spawned = spawn_step(*args)
            held.append(len(spawned))
            return spawned

        with mock.patch('tripletqmc.engine.spawn_step', side_effect=spawn):
            run_simulation(model, state('uudd'), grid,
                           LoopSchedule(30.0, 2, w_u=1e-3), identity,
                           np.random.default_rng(0), population_cap=64)
        self.assertEqual(len(held), 1)
        self.assertLessEqual(held[0], 64)

    def test_divergence_warning(self):
        model = XXZChain(4, 1.0, 0.9)
        identity = [make_observable(model, 'identity')]
        with self.assertLogs('tripletqmc.engine', 'WARNING') as logs:
            run_simulation(model, state('uudd'), SGrid([0.5, 5.0]),
                           LoopSchedule(30.0, 1), identity,
                           np.random.default_rng(0))
        self.assertEqual(len(logs.records), 1)
        self.assertIn('s = 0.5', logs.output[0])

        with mock.patch('tripletqmc.engine.logger') as logger:
            run_simulation(model, state('uudd'), SGrid([0.5, 5.0]),
                           LoopSchedule(150.0, 1), identity,
                           np.random.default_rng(0))
        logger.warning.assert_not_called()

    def test_attempts_count_children(self):
        model = XXZChain(4, 1.0, 0.9)
        grid = SGrid([1.0, 2.0])
        with mock.patch('tripletqmc.engine.spawn_step',
                        wraps=spawn_step) as spy:
            result = run_simulation(model, state('uudd'), grid,
                                    LoopSchedule(30.0, 8, w_u=1e-3,
                                                 u_dw=5e-4),
                                    [make_observable(model, 'identity')],
                                    np.random.default_rng(1))
        self.assertEqual(spy.call_count, 7)
        self.assertEqual(result.attempts[0], 0)
        self.assertEqual(result.attempts[1], math.floor(1 / (31 * 1e-3)))
        for m, call in enumerate(spy.call_args_list, 2):
            self.assertEqual(result.attempts[m - 1], len(call[0][0]))

    def test_reproducible(self):
        model = IsingChain(4, 1.0, 0.5, 0.0)
        grid = SGrid([0.5, 1.0])
        observables = [make_observable(model, 'sigma_z:2')]
        schedule = LoopSchedule(30.0, 20, kappa=1.0, w_u=1e-3)
        first = run_simulation(model, state('uuuu'), grid, schedule,
                               observables, np.random.default_rng(9))
        second = run_simulation(model, state('uuuu'), grid, schedule,
                                observables, np.random.default_rng(9))
        np.testing.assert_array_equal(first.contributions,
                                      second.contributions)
        np.testing.assert_array_equal(first.attempts, second.attempts)


class TestMonteCarloAgreement(unittest.TestCase):

    def check(self, schedule, runs=30):
        model = XXZChain(3, 0.5, 1.0)
        psi0 = state('udd')
        grid = SGrid([1.0, 2.0, 5.0])
        observables = [make_observable(model, 'identity'),
                       make_observable(model, 'sigma_z:1')]
        results = [run_simulation(model, psi0, grid, schedule, observables,
                                  np.random.default_rng(100 + i))
                   for i in range(runs)]
        aggregated = aggregate_runs(results)

        rep = DenseOperatorRep(model)
        rho0 = pure_density(model, psi0)
        for j, s in enumerate(grid):
            rho = dense_truncated_magic(rep, rho0, s, schedule.r,
                                        schedule.m_trunc - 1)
            for k, obs in enumerate(observables):
                exact = expectation(rep.observable(obs), rho)
                mean = aggregated.mean[k, j]
                self.assertLessEqual(
                    abs(mean.real - exact.real),
                    4 * aggregated.stderr_re[k, j] + 1e-10, (obs, s))
                self.assertLessEqual(
                    abs(mean.imag - exact.imag),
                    4 * aggregated.stderr_im[k, j] + 1e-10, (obs, s))

    def test_split(self):
        self.check(LoopSchedule(30.0, 150, w_u=1e-3))

    def test_stochastic_with_deadweight(self):
        self.check(LoopSchedule(30.0, 150, kappa=1.0, w_u=1e-3, u_dw=5e-4,
                                dw_enable_loop=30,
                                decompression=Decompression.STOCHASTIC))
