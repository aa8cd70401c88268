import numpy as np
import pytest

from operators import (
    OPERATORS, OperatorContext, OperatorError, apply_operator, op0_flip, op1_neighbor_mix,
    op2_best_guided, op3_distance_flip,
)
from problems import SetUnionKnapsack, as_bits, generate_sukp, sukp_union_weight


def ctx(parent, neighbor=None, gbest=None, seed=0):
    parent = as_bits(parent)
    return OperatorContext(
        parent=parent,
        neighbor=parent.copy() if neighbor is None else as_bits(neighbor),
        gbest=parent.copy() if gbest is None else as_bits(gbest),
        rng=np.random.default_rng(seed),
    )


def distance(a, b):
    return int(np.count_nonzero(a != b))


def test_flip_single_bit_forced():
    assert op0_flip(ctx("0")).tolist() == [1]


@pytest.mark.parametrize("op_id", sorted(OPERATORS))
def test_every_operator_moves(op_id, rng):
    for _ in range(500):
        dims = int(rng.integers(1, 12))
        c = OperatorContext(parent=rng.integers(0, 2, dims, dtype=np.uint8),
                            neighbor=rng.integers(0, 2, dims, dtype=np.uint8),
                            gbest=rng.integers(0, 2, dims, dtype=np.uint8), rng=rng)
        parent = c.parent.copy()
        child = OPERATORS[op_id](c)
        assert distance(child, parent) >= 1
        assert np.array_equal(c.parent, parent)
        assert set(np.unique(child)) <= {0, 1}


def test_flip_rate():
    c = ctx("0" * 100, seed=7)
    flips = [distance(op0_flip(c), c.parent) for _ in range(10000)]
    assert 0.9 <= np.mean(flips) <= 1.8


def test_neighbor_mix_falls_back_to_flip():
    a = op1_neighbor_mix(ctx("0101", seed=3))
    b = op0_flip(ctx("0101", seed=3))
    assert np.array_equal(a, b)


def test_neighbor_mix_single_differing_bit_is_copied():
    for seed in range(50):
        assert op1_neighbor_mix(ctx("00", neighbor="01", seed=seed)).tolist() == [0, 1]


def test_neighbor_mix_only_copies_from_neighbor():
    c = ctx("0000", neighbor="1111", seed=4)
    for _ in range(200):
        child = op1_neighbor_mix(c)
        assert 1 <= distance(child, c.parent) <= 4


def test_best_guided_falls_back_to_flip():
    assert np.array_equal(op2_best_guided(ctx("1100", seed=5)), op0_flip(ctx("1100", seed=5)))


def test_best_guided_moves_toward_best():
    c = ctx("1100", gbest="0011", seed=6)
    for _ in range(200):
        child = op2_best_guided(c)
        assert distance(child, c.gbest) < distance(c.parent, c.gbest)


def test_best_guided_reproducible():
    assert np.array_equal(op2_best_guided(ctx("1100", gbest="0011", seed=11)),
                          op2_best_guided(ctx("1100", gbest="0011", seed=11)))


def test_distance_flip_identical_neighbor_flips_one():
    c = ctx("101010", seed=8)
    for _ in range(100):
        assert distance(op3_distance_flip(c), c.parent) == 1


def test_distance_flip_step_uniform_on_distance():
    c = ctx("00000000", neighbor="11110000", seed=9)
    steps = np.array([distance(op3_distance_flip(c), c.parent) for _ in range(10000)])
    assert set(np.unique(steps)) <= {1, 2, 3, 4}
    for k in range(1, 5):
        assert np.mean(steps == k) == pytest.approx(0.25, abs=0.03)


def test_dispatch_matches_operator():
    assert np.array_equal(apply_operator(0, ctx("0110", seed=2)), op0_flip(ctx("0110", seed=2)))


@pytest.mark.parametrize("op_id", [4, -1, "0", None])
def test_unknown_operator(op_id):
    with pytest.raises(OperatorError):
        apply_operator(op_id, ctx("01"))


def test_dispatch_repairs_for_sukp(rng):
    problem = SetUnionKnapsack(generate_sukp(50, 50, capacity_ratio=0.2, seed=4))
    for op_id in OPERATORS:
        for _ in range(30):
            c = OperatorContext(parent=np.ones(50, dtype=np.uint8),
                                neighbor=rng.integers(0, 2, 50, dtype=np.uint8),
                                gbest=rng.integers(0, 2, 50, dtype=np.uint8), rng=rng)
            child = apply_operator(op_id, c, problem)
            assert sukp_union_weight(child, problem.instance) <= problem.instance.capacity
