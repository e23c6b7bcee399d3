import math

import numpy as np
import pytest

from oracles import boltzmann, clique_instance, dense_energy, naive_chain, state_codes
from territorial_ising.errors import (DimensionMismatch, IndexOutOfRange, InvalidIteration,
                                      NonPositiveTemperature)
from territorial_ising.network import InteractionGraph
from territorial_ising.sampler import (AnnealingSchedule, ChainSpec, MarginalEstimate,
                                       acceptance_probability, delta_energy, hamiltonian,
                                       replicate_seed, resample_replicates, run_chain,
                                       run_replicates, sample_configurations, temperature_at)

EDGE = InteractionGraph.from_edges(2, [(0, 1)])
FIXED1 = AnnealingSchedule("fixed", 1.0)


class TestHamiltonian:
    def test_empty_graph_zero_field(self):
        assert hamiltonian([1, -1, 1], InteractionGraph.empty(3), np.zeros(3)) == 0.0

    @pytest.mark.parametrize("s, expected", [((1, 1), -1.0), ((1, -1), 1.0), ((-1, -1), -1.0)])
    def test_single_edge(self, s, expected):
        assert hamiltonian(s, EDGE, np.zeros(2)) == expected

    def test_isolated_node_field(self):
        assert hamiltonian([1], InteractionGraph.empty(1), [2.0]) == -2.0

    def test_matches_double_loop(self, rng):
        J, h = clique_instance(rng, 9)
        g = InteractionGraph.from_dense(J)
        for _ in range(20):
            s = rng.choice([-1, 1], 9)
            assert hamiltonian(s, g, h) == pytest.approx(dense_energy(s, J, h), abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            hamiltonian([1, 1, 1], EDGE, np.zeros(2))
        with pytest.raises(DimensionMismatch):
            hamiltonian([1, 1], EDGE, np.zeros(3))


class TestDeltaEnergy:
    def test_isolated_zero_field(self):
        assert delta_energy([1, -1], 0, InteractionGraph.empty(2), np.zeros(2)) == 0.0

    def test_single_edge_flip(self):
        before = hamiltonian([1, 1], EDGE, np.zeros(2))
        after = hamiltonian([-1, 1], EDGE, np.zeros(2))
        assert delta_energy([1, 1], 0, EDGE, np.zeros(2)) == after - before == 2.0

    def test_random_instances_match_recompute(self, rng):
        for _ in range(1000):
            n = 10
            upper = np.triu(rng.random((n, n)) < 0.4, 1).astype(float)
            J = upper + upper.T
            h = rng.uniform(-2, 2, n)
            g = InteractionGraph.from_dense(J)
            s = rng.choice([-1, 1], n)
            i = int(rng.integers(n))
            flipped = s.copy()
            flipped[i] = -flipped[i]
            ref = dense_energy(flipped, J, h) - dense_energy(s, J, h)
            assert delta_energy(s, i, g, h) == pytest.approx(ref, rel=1e-9, abs=1e-9)

    def test_index_checked(self):
        with pytest.raises(IndexOutOfRange):
            delta_energy([1, 1], 5, EDGE, np.zeros(2))


class TestAcceptance:
    @pytest.mark.parametrize("dh", [-3.0, 0.0])
    def test_favourable(self, dh):
        assert acceptance_probability(dh, 0.5) == 1.0

    def test_one_temperature_unit(self):
        assert acceptance_probability(1.7, 1.7) == pytest.approx(0.36787944117144233)

    def test_frozen_limit(self):
        assert acceptance_probability(2.0, 1e-6) == 0.0

    @pytest.mark.parametrize("t", [0.0, -1.0])
    def test_non_positive_temperature(self, t):
        with pytest.raises(NonPositiveTemperature):
            acceptance_probability(1.0, t)


class TestSchedule:
    def test_hyperbolic(self):
        s = AnnealingSchedule("hyperbolic", 100.0)
        assert temperature_at(s, 1) == 100.0
        assert temperature_at(s, 100) == 1.0

    def test_fixed(self):
        assert all(temperature_at(FIXED1, t) == 1.0 for t in (1, 10, 10**6))

    def test_logarithmic(self):
        assert temperature_at(AnnealingSchedule("logarithmic", 2.0), 4) == pytest.approx(2 / math.log(5))

    def test_t_zero_undefined(self):
        with pytest.raises(InvalidIteration):
            temperature_at(FIXED1, 0)

    def test_invalid(self):
        with pytest.raises(NonPositiveTemperature):
            AnnealingSchedule("hyperbolic", 0.0)
        with pytest.raises(ValueError):
            AnnealingSchedule("exponential", 1.0)


class TestChainSpec:
    def test_default_burn_in(self):
        assert ChainSpec(600_000, 0.10).burn_in == 60_000

    @pytest.mark.parametrize("n_iter, frac", [(0, 0.1), (10, 1.0), (10, -0.1)])
    def test_rejects_invalid(self, n_iter, frac):
        with pytest.raises(ValueError):
            ChainSpec(n_iter, frac)


class TestRunChain:
    @pytest.mark.parametrize("kind, t0", [("hyperbolic", 100.0), ("fixed", 0.7), ("logarithmic", 3.0)])
    def test_counts_match_naive_replay(self, kind, t0):
        rng = np.random.default_rng(3)
        J, h = clique_instance(rng, 7)
        g = InteractionGraph.from_dense(J)
        s0 = rng.choice([-1, 1], 7)
        spec = ChainSpec(3000, 0.2, seed=99)
        res = run_chain(s0, g, h, AnnealingSchedule(kind, t0), spec)
        stream = np.random.default_rng(99)
        nodes = stream.integers(0, 7, size=3000, dtype=np.int64)
        uniforms = stream.random(3000)
        counts, final = naive_chain(J, h, s0, nodes, uniforms, t0, kind, spec.burn_in)
        np.testing.assert_array_equal(res.counts, counts)
        np.testing.assert_array_equal(res.final, final)

    def test_zero_field_empty_graph_half(self):
        res = run_chain(np.ones(5), InteractionGraph.empty(5), np.zeros(5), FIXED1,
                        ChainSpec(200_000, 0.1, seed=1))
        np.testing.assert_allclose(res.marginals, 0.5, atol=0.02)

    def test_single_sample(self):
        spec = ChainSpec(10, 0.9, seed=2)
        assert spec.burn_in == 9
        res = run_chain([1, -1], EDGE, np.zeros(2), FIXED1, spec)
        assert res.samples_used == 1
        np.testing.assert_array_equal(res.counts, (res.final == 1).astype(int))

    def test_eight_node_boltzmann(self):
        rng = np.random.default_rng(8)
        J, h = clique_instance(rng, 8)
        _, exact, _, _ = boltzmann(J, h, 1.0)
        res = run_chain(np.ones(8), InteractionGraph.from_dense(J), h, FIXED1,
                        ChainSpec(1_000_000, 0.1, seed=8))
        np.testing.assert_allclose(res.marginals, exact, atol=0.02)

    def test_state_histogram_consistent_with_counts(self):
        rng = np.random.default_rng(5)
        J, h = clique_instance(rng, 6)
        res = run_chain(np.ones(6), InteractionGraph.from_dense(J), h, FIXED1,
                        ChainSpec(50_000, 0.1, seed=5), track_states=True)
        p, _, states, _ = boltzmann(J, h)
        codes = state_codes(states)
        assert res.state_counts.sum() == res.samples_used
        from_hist = (res.state_counts[codes][:, None] * (states == 1)).sum(axis=0)
        np.testing.assert_array_equal(from_hist, res.counts)

    def test_incremental_energy_matches_recompute(self, rng):
        J, h = clique_instance(rng, 10)
        g = InteractionGraph.from_dense(J)
        res = run_chain(rng.choice([-1, 1], 10), g, h, AnnealingSchedule(), ChainSpec(20_000, 0.1, 4))
        exact = hamiltonian(res.final, g, h)
        assert res.final_energy == pytest.approx(exact, rel=1e-6, abs=1e-9)

    def test_trace(self):
        res = run_chain(np.ones(4), InteractionGraph.empty(4), np.ones(4), AnnealingSchedule(),
                        ChainSpec(1000, 0.1, seed=0, trace_stride=100))
        np.testing.assert_array_equal(res.trace_iterations, [0, *range(100, 1001, 100)])
        assert res.trace_energies[0] == res.initial_energy == -4.0

    def test_deterministic(self, rng):
        J, h = clique_instance(rng, 9)
        g = InteractionGraph.from_dense(J)
        a = run_chain(np.ones(9), g, h, AnnealingSchedule(), ChainSpec(30_000, 0.1, 77))
        b = run_chain(np.ones(9), g, h, AnnealingSchedule(), ChainSpec(30_000, 0.1, 77))
        assert a.counts.tobytes() == b.counts.tobytes()
        assert a.trace_energies.tobytes() == b.trace_energies.tobytes()

    def test_starts_from_given_configuration(self):
        s0 = np.array([1, -1, 1, -1])
        res = run_chain(s0, InteractionGraph.empty(4), np.zeros(4), FIXED1, ChainSpec(1, 0.0, 1))
        assert np.sum(res.final != s0) <= 1

    def test_does_not_mutate_input(self):
        s0 = np.array([1, 1], dtype=np.int8)
        run_chain(s0, EDGE, np.array([-5.0, -5.0]), FIXED1, ChainSpec(100, 0.0, 1))
        np.testing.assert_array_equal(s0, [1, 1])

    def test_energy_descends_under_annealing(self, rng):
        J, h = clique_instance(rng, 40)
        g = InteractionGraph.from_dense(J)
        res = run_chain(rng.choice([-1, 1], 40), g, h, AnnealingSchedule(), ChainSpec(50_000, 0.1, 3))
        tr = res.trace_energies
        m = len(tr) // 10
        assert np.median(tr[-m:]) <= np.median(tr[:m])


class TestReplicates:
    def test_identical_seeds_zero_sigma(self, rng):
        J, h = clique_instance(rng, 6)
        g = InteractionGraph.from_dense(J)
        est = run_replicates(np.ones(6), g, h, FIXED1, ChainSpec(5000, 0.1, 0), k=4, seeds=[7] * 4)
        np.testing.assert_array_equal(est.sigma, 0.0)

    def test_two_unit_zero_field(self):
        est = run_replicates([1, 1], InteractionGraph.empty(2), np.zeros(2), FIXED1,
                             ChainSpec(50_000, 0.1, 11), k=4)
        np.testing.assert_allclose(est.p_hat, 0.5, atol=0.02)
        assert est.replicates.shape == (4, 2)
        assert np.all(est.sigma > 0)

    def test_worker_count_does_not_change_results(self, rng):
        J, h = clique_instance(rng, 12)
        g = InteractionGraph.from_dense(J)
        a = run_replicates(np.ones(12), g, h, AnnealingSchedule(), ChainSpec(20_000, 0.1, 5, 1), k=5)
        b = run_replicates(np.ones(12), g, h, AnnealingSchedule(), ChainSpec(20_000, 0.1, 5, 3), k=5)
        assert a.replicates.tobytes() == b.replicates.tobytes()
        assert a.p_hat.tobytes() == b.p_hat.tobytes()

    def test_estimate_invariants(self):
        est = MarginalEstimate.from_replicates("ab", [[0.2, 1.0], [0.4, 1.0]])
        np.testing.assert_allclose(est.p_hat, [0.3, 1.0])
        np.testing.assert_allclose(est.sigma, [0.1, 0.0])

    def test_seed_derivation(self):
        seeds = {replicate_seed(42, r) for r in range(1000)}
        assert len(seeds) == 1000
        assert replicate_seed(42, 3) == replicate_seed(42, 3) != replicate_seed(43, 3)
        assert all(0 <= s < 2**64 for s in seeds)

    def test_resampling_matches_binomial_spread(self):
        p = np.array([0.0, 1.0, 0.5, 0.1])
        est = resample_replicates(p, 20_000, 300, seed=1)
        np.testing.assert_array_equal(est.sigma[:2], 0.0)
        expected = np.sqrt(p * (1 - p) / 300)
        np.testing.assert_allclose(est.sigma, expected, rtol=0.03)
        np.testing.assert_allclose(est.p_hat, p, atol=0.002)


class TestSampleConfigurations:
    def test_degenerate_marginals(self):
        s = sample_configurations(np.array([1.0, 0.0]), 500, seed=1)
        assert np.all(s[:, 0] == 1) and np.all(s[:, 1] == -1)

    def test_half(self):
        s = sample_configurations(np.array([0.5]), 10_000, seed=2)
        assert abs(np.mean(s[:, 0] == 1) - 0.5) <= 0.02

    def test_shape_and_values(self):
        s = sample_configurations(np.full(7, 0.3), 20, seed=3)
        assert s.shape == (20, 7)
        assert set(np.unique(s)) <= {-1, 1}
