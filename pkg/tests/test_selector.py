import math

import numpy as np
import pytest

from leukopipe import selector
from leukopipe.errors import ContractError, FitnessError, ParameterError
from leukopipe.seeding import substream
from leukopipe.selector import (
    ABHCConfig,
    Candidate,
    FitnessSpec,
    SCAConfig,
    WORST_FITNESS,
    abhc_refine,
    abhc_schedules,
    fitness,
    make_mask_objective,
    optimize,
    penalized_score,
    r1_schedule,
    sca_run,
    sca_step,
    sca_update_value,
)
from leukopipe.toydata import make_planted_features


def separable_spec(sparsity_weight=0.0):
    """Class 1 sits far right of class 0 along feature 0; feature 1 is noise."""
    rng = np.random.default_rng(0)
    n = 80
    x0 = np.concatenate([rng.normal(-3.0, 0.3, n // 2), rng.normal(3.0, 0.3, n // 2)])
    x1 = rng.normal(size=n)
    y = np.array([0] * (n // 2) + [1] * (n // 2))
    order = rng.permutation(n)
    x = np.column_stack([x0, x1])[order]
    y = y[order]
    return FitnessSpec(x[:50], y[:50], x[50:], y[50:], sparsity_weight=sparsity_weight)


def sphere_objective(cand: Candidate) -> float:
    return -float(((cand.position - 0.5) ** 2).sum())


class TestSchedules:
    def test_r1_endpoints(self):
        assert r1_schedule(0, 100, 2.0) == 2.0
        assert abs(r1_schedule(100, 100, 2.0)) < 1e-15

    def test_r1_midpoint(self):
        assert abs(r1_schedule(50, 100, 2.0) - 1.0) < 1e-15

    def test_r1_linear_and_nonnegative(self):
        values = [r1_schedule(t, 10, 2.0) for t in range(11)]
        assert all(v >= 0 for v in values)
        diffs = {round(a - b, 12) for a, b in zip(values, values[1:])}
        assert len(diffs) == 1

    def test_r1_bad_total(self):
        with pytest.raises(ParameterError):
            r1_schedule(0, 0, 2.0)

    def test_abhc_endpoints(self):
        cfg = ABHCConfig(iterations=100, shape=2.0, beta_min=0.02, beta_max=0.3)
        n0, b0 = abhc_schedules(0, cfg)
        assert abs(n0 - 1.0) < 1e-15 and abs(b0 - 0.02) < 1e-15
        n1, b1 = abhc_schedules(100, cfg)
        assert abs(n1) < 1e-15 and abs(b1 - 0.3) < 1e-15

    def test_abhc_midpoint_hand_value(self):
        cfg = ABHCConfig(iterations=100, shape=2.0)
        n, _ = abhc_schedules(25, cfg)
        assert abs(n - 0.5) < 1e-15  # 1 - sqrt(25)/sqrt(100)

    def test_abhc_monotonicity(self):
        cfg = ABHCConfig(iterations=50, shape=3.0, beta_min=0.01, beta_max=0.4)
        pairs = [abhc_schedules(t, cfg) for t in range(51)]
        ns = [p[0] for p in pairs]
        bs = [p[1] for p in pairs]
        assert all(a >= b for a, b in zip(ns, ns[1:]))
        assert all(a <= b for a, b in zip(bs, bs[1:]))
        assert all(0.0 <= v <= 1.0 for v in ns + bs)

    def test_abhc_out_of_range(self):
        cfg = ABHCConfig(iterations=10)
        with pytest.raises(ParameterError):
            abhc_schedules(11, cfg)


class TestScaStep:
    def test_hand_sine_branch(self):
        # r2 = pi/2 makes the sine term exactly 1
        value = sca_update_value(0.3, 1.0, math.pi / 2, 1.0, 0.3, 0.8)
        assert abs(value - 0.8) < 1e-15

    def test_hand_cosine_branch(self):
        value = sca_update_value(0.3, 1.0, 0.0, 1.0, 0.7, 0.8)
        assert abs(value - 0.8) < 1e-15

    def test_final_iteration_is_identity(self):
        cfg = SCAConfig(population_size=4, iterations=10, seed=3)
        rng = np.random.default_rng(1)
        pop = [Candidate.from_position(rng.random(6)) for _ in range(4)]
        best = rng.random(6)
        stepped = sca_step(pop, best, 10, cfg)
        for before, after in zip(pop, stepped):
            np.testing.assert_array_equal(before.position, after.position)

    def test_positions_stay_in_unit_box(self):
        cfg = SCAConfig(population_size=8, iterations=5, seed=4)
        rng = np.random.default_rng(2)
        pop = [Candidate.from_position(rng.random(10)) for _ in range(8)]
        for t in range(1, 6):
            pop = sca_step(pop, rng.random(10), t, cfg)
            for cand in pop:
                assert ((cand.position >= 0.0) & (cand.position <= 1.0)).all()
                np.testing.assert_array_equal(cand.mask, cand.position >= 0.5)

    def test_count_and_extent_preserved(self):
        cfg = SCAConfig(population_size=5, iterations=3, seed=5)
        pop = [Candidate.from_position(np.random.default_rng(i).random(7))
               for i in range(5)]
        stepped = sca_step(pop, np.full(7, 0.5), 1, cfg)
        assert len(stepped) == 5
        assert all(c.position.shape == (7,) for c in stepped)

    def test_deterministic_per_candidate_streams(self):
        cfg = SCAConfig(population_size=3, iterations=4, seed=6)
        pop = [Candidate.from_position(np.random.default_rng(i).random(5))
               for i in range(3)]
        best = np.full(5, 0.4)
        a = sca_step(pop, best, 2, cfg)
        b = sca_step(pop, best, 2, cfg)
        for ca, cb in zip(a, b):
            np.testing.assert_array_equal(ca.position, cb.position)


class TestFitness:
    def test_perfect_separability_gives_one(self):
        spec = separable_spec(sparsity_weight=0.0)
        assert fitness(np.array([True, False]), spec) == 1.0

    def test_all_zero_mask_sentinel(self):
        spec = separable_spec()
        assert fitness(np.zeros(2, dtype=bool), spec) == WORST_FITNESS

    def test_penalty_arithmetic(self):
        assert abs(penalized_score(0.95, 4, 20, 0.01) - 0.948) < 1e-12

    def test_sparsity_penalty_applies(self):
        spec = separable_spec(sparsity_weight=0.01)
        full = fitness(np.array([True, True]), spec)
        lean = fitness(np.array([True, False]), spec)
        assert lean > full  # same F1, smaller mask

    def test_single_class_train_split_raises(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(20, 3))
        spec = FitnessSpec(x[:10], np.zeros(10, dtype=int), x[10:],
                           np.array([0, 1] * 5))
        with pytest.raises(FitnessError):
            fitness(np.ones(3, dtype=bool), spec)

    def test_objective_cache_consistent(self):
        spec = separable_spec()
        obj = make_mask_objective(spec)
        cand = Candidate.from_position(np.array([0.9, 0.1]))
        assert obj(cand) == obj(cand) == fitness(cand.mask, spec)


class TestScaRun:
    def test_incumbent_trace_monotone(self):
        cfg = SCAConfig(population_size=6, iterations=20, seed=7)
        res = optimize(sphere_objective, 4, cfg)
        fits = [row.best_fitness for row in res.trace]
        assert all(b >= a for a, b in zip(fits, fits[1:]))
        assert len(fits) == 21

    def test_deterministic_given_seed(self):
        spec = separable_spec(sparsity_weight=0.01)
        cfg = SCAConfig(population_size=5, iterations=8, seed=8)
        a = sca_run(spec, cfg)
        b = sca_run(spec, cfg)
        np.testing.assert_array_equal(a.best.mask, b.best.mask)
        assert [r.best_fitness for r in a.trace] == [r.best_fitness for r in b.trace]

    def test_sphere_quick_convergence(self):
        cfg = SCAConfig(population_size=30, iterations=200, seed=0)
        res = optimize(sphere_objective, 5, cfg)
        assert -res.best.fitness < 1e-2

    def test_selects_informative_feature(self):
        spec = separable_spec(sparsity_weight=0.01)
        cfg = SCAConfig(population_size=6, iterations=10, seed=9)
        res = sca_run(spec, cfg)
        assert res.best.mask[0]


class TestAbhcRefine:
    def test_no_proposals_returns_seed_unchanged(self):
        # shape=inf freezes the flip schedule at zero; beta range collapses to 0
        spec = separable_spec()
        cfg = ABHCConfig(iterations=20, shape=math.inf, beta_min=0.0, beta_max=0.0)
        seed_cand = Candidate.from_position(np.array([0.9, 0.1]))
        seed_cand.fitness = fitness(seed_cand.mask, spec)
        out = abhc_refine(seed_cand, spec, cfg, substream(0, "abhc"))
        np.testing.assert_array_equal(out.mask, seed_cand.mask)
        assert out.fitness == seed_cand.fitness

    def test_fitness_never_decreases(self):
        for seed in range(5):
            x, y, _ = make_planted_features(120, 8, 2, seed)
            spec = FitnessSpec(x[:80], y[:80], x[80:], y[80:], sparsity_weight=0.01)
            obj = make_mask_objective(spec)
            start = Candidate.from_position(substream(seed, "p").random(8))
            start.fitness = obj(start)
            refined = abhc_refine(start, spec,
                                  ABHCConfig(iterations=15), substream(seed, "r"),
                                  objective=obj)
            assert refined.fitness >= start.fitness

    def test_unevaluated_seed_rejected(self):
        spec = separable_spec()
        with pytest.raises(ContractError):
            abhc_refine(Candidate.from_position(np.array([0.9, 0.1])), spec,
                        ABHCConfig(iterations=5), substream(1, "abhc"))

    def test_mask_position_invariant_maintained(self):
        x, y, _ = make_planted_features(100, 6, 2, 0)
        spec = FitnessSpec(x[:70], y[:70], x[70:], y[70:])
        obj = make_mask_objective(spec)
        start = Candidate.from_position(substream(2, "p").random(6))
        start.fitness = obj(start)
        out = abhc_refine(start, spec, ABHCConfig(iterations=10),
                          substream(3, "r"), objective=obj)
        np.testing.assert_array_equal(out.mask, out.position >= 0.5)


class TestConfigs:
    def test_sca_config_validation(self):
        with pytest.raises(ParameterError):
            SCAConfig(population_size=1)
        with pytest.raises(ParameterError):
            SCAConfig(iterations=0)
        with pytest.raises(ParameterError):
            SCAConfig(alpha=0.0)

    def test_abhc_config_validation(self):
        with pytest.raises(ParameterError):
            ABHCConfig(shape=0.0)
        with pytest.raises(ParameterError):
            ABHCConfig(beta_min=0.5, beta_max=0.1)

    def test_fitness_spec_validation(self):
        x = np.ones((4, 3))
        with pytest.raises(Exception):
            FitnessSpec(x, np.zeros(4), np.ones((4, 2)), np.zeros(4))
