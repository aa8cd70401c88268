import math

import numpy as np
import pytest

from landscape_features import (
    FEATURE_NAMES, INDIVIDUAL_FEATURES, POPULATION_FEATURES, FeatureError, PopulationSnapshot,
    feature_vector, hamming, individual_features, population_features,
)
from problems import as_bits


def snapshot(parents, children=None, fp=None, fc=None, gbest=None, gbest_fitness=None,
             trials=None, trial_max=100):
    parents = np.array([as_bits(p) for p in parents])
    children = parents.copy() if children is None else np.array([as_bits(c) for c in children])
    n = len(parents)
    fp = np.ones(n) if fp is None else np.asarray(fp, dtype=float)
    fc = fp.copy() if fc is None else np.asarray(fc, dtype=float)
    return PopulationSnapshot(
        parents=parents, children=children, parent_fitness=fp, child_fitness=fc,
        gbest=parents[int(np.argmax(fp))] if gbest is None else as_bits(gbest),
        gbest_fitness=float(fp.max()) if gbest_fitness is None else gbest_fitness,
        trials=np.zeros(n, dtype=int) if trials is None else np.asarray(trials),
        trial_max=trial_max,
    )


def brute_force(s, parent, child, f_parent, f_child, trial, op_success, op_total):
    """Loop-by-loop restatement of every feature definition."""
    P = [list(map(int, row)) for row in s.parents]
    C = [list(map(int, row)) for row in s.children]
    Fp = [float(f) for f in s.parent_fitness]
    Fc = [float(f) for f in s.child_fitness]
    N, D = len(P), len(P[0])
    best = list(map(int, s.gbest))
    fstar = float(s.gbest_fitness)

    def ham(a, b):
        return sum(1 for i in range(D) if a[i] != b[i])

    def div(a, b):
        return a / b if b != 0 else 0.0

    pairs = [(i, j) for i in range(N) for j in range(i + 1, N)]
    psd = sum(ham(P[i], P[j]) for i, j in pairs) / len(pairs) / D
    pfd = sum(abs(Fp[i] - Fp[j]) for i, j in pairs) / len(pairs)
    improving = [i for i in range(N) if Fc[i] > Fp[i]]
    pnb = len(improving) / N
    pic = sum(1 for i in range(N) if Fc[i] > fstar) / N
    pai = sum((Fc[i] - Fp[i]) / Fc[i] for i in improving) / N
    pcv = div(max(Fc) - max(Fp), max(Fp))
    pcr = sum(ham(best, P[i]) - ham(best, C[i]) for i in range(N)) / N / D
    mean = sum(Fp) / N
    sigma = math.sqrt(sum((f - mean) ** 2 for f in Fp) / N)
    eap = sigma * sum(abs(max(Fp) - Fc[i]) for i in improving) / N
    evp = eap * pic
    atn = div(sum(int(t) for t in s.trials) / N, s.trial_max)
    members = P + C
    pdd = max(ham(members[i], members[j])
              for i in range(len(members)) for j in range(i + 1, len(members))) / D

    parent = list(map(int, parent))
    child = list(map(int, child))
    fitness = [float(f) for f in s.parent_fitness]
    pbest = P[fitness.index(max(fitness))]
    pworst = P[fitness.index(min(fitness))]
    return [
        psd, pfd, pnb, pic, pai, pcv, pcr, eap, evp, atn, pdd,
        ham(best, parent) / D,
        ham(parent, child) / D,
        div(fstar - f_child, fstar),
        div(f_child - f_parent, f_child),
        ham(pbest, parent) / D,
        ham(pworst, parent) / D,
        div(min(trial, s.trial_max), s.trial_max),
        div(op_success, op_total),
    ]


def random_snapshot(rng):
    n = int(rng.integers(2, 7))
    dims = int(rng.integers(1, 11))
    fp = rng.integers(0, 21, n).astype(float)
    fc = rng.integers(0, 21, n).astype(float)
    return PopulationSnapshot(
        parents=rng.integers(0, 2, (n, dims), dtype=np.uint8),
        children=rng.integers(0, 2, (n, dims), dtype=np.uint8),
        parent_fitness=fp, child_fitness=fc,
        gbest=rng.integers(0, 2, dims, dtype=np.uint8),
        gbest_fitness=float(fp.max() + rng.integers(0, 3)),
        trials=rng.integers(0, 150, n),
        trial_max=100,
    )


def test_matches_brute_force_on_random_snapshots():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        s = random_snapshot(rng)
        i = int(rng.integers(s.size))
        trial = int(rng.integers(0, 150))
        op_total = int(rng.integers(0, 20))
        op_success = int(rng.integers(0, op_total + 1))
        args = (s.parents[i], s.children[i], s.parent_fitness[i], s.child_fitness[i],
                trial, op_success, op_total)
        vector = feature_vector(s, *args)
        expected = brute_force(s, *args)
        np.testing.assert_allclose(vector, expected, rtol=0, atol=1e-9)


class TestHamming:
    def test_identity(self):
        assert hamming(as_bits("0110"), as_bits("0110")) == 0

    def test_complement(self):
        a = as_bits("0110100")
        assert hamming(a, 1 - a) == 7

    def test_count(self):
        assert hamming(as_bits("0110"), as_bits("0101")) == 2

    def test_length_mismatch(self):
        with pytest.raises(FeatureError):
            hamming(as_bits("01"), as_bits("011"))


class TestPopulationFeatures:
    def test_clones_of_equal_fitness(self):
        feats = population_features(snapshot(["000", "011", "101"]))
        assert feats["psd"] == pytest.approx(6 / 9)
        assert feats["pnb"] == feats["pic"] == feats["pai"] == 0

    def test_fitness_spread(self):
        feats = population_features(snapshot(["00", "01", "11"], fp=[1, 3, 5]))
        assert feats["pfd"] == pytest.approx(8 / 3)

    def test_improvement_features(self):
        feats = population_features(
            snapshot(["00", "01", "11"], fp=[4, 3, 6], fc=[5, 2, 7], gbest_fitness=6))
        assert feats["pnb"] == pytest.approx(2 / 3)
        assert feats["pic"] == pytest.approx(1 / 3)
        assert feats["pai"] == pytest.approx((0.2 + 1 / 7) / 3)
        assert feats["pcv"] == pytest.approx(1 / 6)

    def test_eap_variants(self):
        s = snapshot(["00", "01", "11"], fp=[4, 3, 6], fc=[5, 2, 7], gbest_fitness=6)
        sigma = np.std([4, 3, 6])
        gap = abs(6 - 5) + abs(6 - 7)
        assert population_features(s, "literal")["eap"] == pytest.approx(sigma * gap / 3)
        assert population_features(s, "divide")["eap"] == pytest.approx(gap / (sigma * 3))
        with pytest.raises(FeatureError):
            population_features(s, "other")

    def test_flat_fitness_is_finite(self):
        feats = population_features(snapshot(["0", "1"], fp=[0, 0], fc=[0, 0], gbest_fitness=0))
        assert all(np.isfinite(v) for v in feats.values())
        assert feats["pcv"] == 0 and feats["eap"] == 0

    def test_atn_averages_trials(self):
        feats = population_features(snapshot(["0", "1"], trials=[10, 30], trial_max=100))
        assert feats["atn"] == pytest.approx(0.2)

    def test_single_member_rejected(self):
        with pytest.raises(FeatureError):
            population_features(snapshot(["01"]))


class TestIndividualFeatures:
    def setup_method(self):
        self.s = snapshot(["1100", "0000"], fp=[2, 0], gbest="1111", gbest_fitness=10,
                          trial_max=10)

    def features(self, parent="1100", child="1100", fp=8, fc=8, trial=0, sc=0, tc=0):
        return individual_features(as_bits(parent), as_bits(child), fp, fc, self.s, trial, sc, tc)

    def test_distance_to_best(self):
        assert self.features()["idg"] == 0.5

    def test_fitness_ratios(self):
        assert self.features(fc=8)["ifg"] == pytest.approx(0.2)
        assert self.features(fp=8, fc=10)["ifp"] == pytest.approx(0.2)

    def test_counters(self):
        feats = self.features(trial=5, sc=3, tc=4)
        assert feats["idp"] == 0
        assert feats["itn"] == 0.5
        assert feats["osr"] == 0.75

    def test_unused_operator_and_saturated_trials(self):
        feats = self.features(trial=25, sc=0, tc=0)
        assert feats["osr"] == 0
        assert feats["itn"] == 1

    def test_population_extremes(self):
        feats = self.features(parent="0000")
        assert feats["idb"] == 0.5 and feats["idw"] == 0


def test_vector_layout():
    assert FEATURE_NAMES == POPULATION_FEATURES + INDIVIDUAL_FEATURES
    assert len(FEATURE_NAMES) == 19


def test_same_iteration_shares_population_features():
    s = snapshot(["0011", "0101", "1110"], fp=[2, 2, 3], fc=[3, 1, 3],
                 children=["0111", "0100", "1111"], gbest_fitness=3)
    population = population_features(s)
    a = feature_vector(s, s.parents[0], s.children[0], 2, 3, 0, 1, 2, population=population)
    b = feature_vector(s, s.parents[2], as_bits("1010"), 3, 4, 7, 0, 1, population=population)
    assert a[:len(POPULATION_FEATURES)] == b[:len(POPULATION_FEATURES)]
    assert a[len(POPULATION_FEATURES):] != b[len(POPULATION_FEATURES):]
    assert all(np.isfinite(a)) and len(a) == 19
