import numpy as np
import pytest

from abc_engine import BeeColony, Candidate, ConfigError, RunConfig, onlooker_select, run
from case_dataset import CaseRecorder
from landscape_features import FEATURE_NAMES
from problems import OneMax, SetUnionKnapsack, as_bits, generate_sukp, sukp_union_weight


def config(**kwargs):
    defaults = dict(problem=OneMax(30), max_iter=15, colony_size=8, limit=10, seed=1)
    defaults.update(kwargs)
    return RunConfig(**defaults)


class TestConfig:
    @pytest.mark.parametrize("kwargs", [
        {"colony_size": 1}, {"max_iter": 2}, {"limit": 0}, {"operator_pool": ()},
        {"operator_pool": (0, 5)}, {"eap_variant": "other"},
    ])
    def test_invalid_rejected_before_work(self, kwargs):
        recorder = CaseRecorder()
        with pytest.raises(ConfigError):
            run(config(**kwargs), recorder)
        assert len(recorder) == 0


class TestRun:
    def test_trace_monotone_and_improves(self):
        result = run(config(problem=OneMax(200), max_iter=60, colony_size=20, limit=100))
        assert len(result.trace) == 60
        assert all(a <= b for a, b in zip(result.trace, result.trace[1:]))
        assert result.gbest_fitness >= result.initial_fitness
        assert result.gbest_fitness == result.trace[-1] == result.gbest.sum()

    def test_degenerate_search_space(self):
        result = run(config(problem=OneMax(1), max_iter=3, colony_size=2))
        assert result.gbest_fitness == 1

    def test_deterministic(self):
        first, second = CaseRecorder(), CaseRecorder()
        a = run(config(seed=42), first)
        b = run(config(seed=42), second)
        assert a.trace == b.trace
        assert np.array_equal(a.gbest, b.gbest)
        assert np.array_equal(a.success_counts, b.success_counts)
        assert first.records == second.records

    def test_records_are_strict_improvements(self):
        recorder = CaseRecorder()
        result = run(config(), recorder)
        assert len(recorder) == result.n_records == result.success_counts.sum()
        for case in recorder.records:
            assert case.child_fitness > case.parent_fitness
            assert case.success
            assert len(case.features) == len(FEATURE_NAMES)
            assert np.all(np.isfinite(case.features))
            assert case.phase in (1, 2, 3)

    def test_single_operator_pool(self):
        recorder = CaseRecorder()
        result = run(config(operator_pool=(2,)), recorder)
        assert {case.op for case in recorder.records} == {2}
        assert result.usage_counts[[0, 1, 3]].sum() == 0

    def test_usage_counts_every_candidate(self):
        result = run(config(max_iter=10, colony_size=6))
        # employed + onlooker candidates per iteration
        assert result.usage_counts.sum() == 10 * 2 * 6

    def test_record_failures(self):
        recorder = CaseRecorder()
        result = run(config(max_iter=5, colony_size=4, record_failures=True), recorder)
        assert len(recorder) == 5 * 2 * 4
        assert sum(case.success for case in recorder.records) == result.success_counts.sum()

    def test_sukp_solutions_stay_feasible(self):
        inst = generate_sukp(80, 80, seed=2)
        problem = SetUnionKnapsack(inst)
        recorder = CaseRecorder()
        result = run(config(problem=problem, max_iter=20, colony_size=10), recorder)
        assert sukp_union_weight(result.gbest, inst) <= inst.capacity
        for case in recorder.records:
            assert np.all(np.isfinite(case.features))
            assert case.problem == "sukp"


class TestGreedySelection:
    def setup_method(self):
        self.recorder = CaseRecorder()
        self.colony = BeeColony(config(problem=OneMax(4), colony_size=3), self.recorder)
        self.snapshot, self.population = self.colony.employed_phase()
        self.recorder.records.clear()

    def candidate(self, child, child_fitness):
        c = self.colony.colony
        return Candidate(source=0, op=1, parent=c.foods[0].copy(),
                         parent_fitness=float(c.fitnesses[0]), child=as_bits(child),
                         child_fitness=float(child_fitness), trial=int(c.trials[0]),
                         op_success=0, op_total=0)

    def test_improvement_replaces_and_records(self):
        c = self.colony.colony
        c.trials[0] = 4
        parent_fitness = c.fitnesses[0]
        child = "1111" if parent_fitness < 4 else "1110"
        improved = self.colony.accept(self.candidate(child, parent_fitness + 1),
                                      self.snapshot, self.population)
        assert improved
        assert c.trials[0] == 0
        assert c.foods[0].tolist() == as_bits(child).tolist()
        assert len(self.recorder) == 1 and self.recorder.records[0].op == 1

    def test_equal_fitness_counts_a_trial(self):
        c = self.colony.colony
        before = c.trials[0]
        parent = c.foods[0].copy()
        improved = self.colony.accept(self.candidate("0000", c.fitnesses[0]),
                                      self.snapshot, self.population)
        assert not improved
        assert c.trials[0] == before + 1
        assert np.array_equal(c.foods[0], parent)
        assert len(self.recorder) == 0


class TestScout:
    def test_exhausted_source_reinitialised(self):
        colony = BeeColony(config(limit=3))
        colony.colony.trials[2] = 4
        colony.colony.trials[3] = 3
        colony.scout_phase()
        assert colony.colony.trials[2] == 0
        assert colony.colony.trials[3] == 3


class TestOnlookerSelect:
    def test_all_zero_uniform(self):
        rng = np.random.default_rng(0)
        picks = np.bincount([onlooker_select([0, 0, 0], rng) for _ in range(30000)], minlength=3)
        assert np.allclose(picks / picks.sum(), 1 / 3, atol=0.02)

    def test_single_nonzero(self):
        rng = np.random.default_rng(0)
        assert {onlooker_select([1, 0], rng) for _ in range(1000)} == {0}

    def test_proportional(self):
        rng = np.random.default_rng(0)
        picks = [onlooker_select([1, 3], rng) for _ in range(100000)]
        assert np.mean(picks) == pytest.approx(0.75, abs=0.01)


@pytest.mark.slow
def test_onemax_sanity_over_seeds():
    results = [run(RunConfig(problem=OneMax(100), max_iter=150, colony_size=20, seed=s))
               for s in range(20)]
    for r in results:
        assert all(a <= b for a, b in zip(r.trace, r.trace[1:]))
    solved = sum(r.gbest_fitness >= 90 for r in results)
    assert solved >= 18
