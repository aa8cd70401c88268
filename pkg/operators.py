"""
Operator pool - the four binary neighbourhood operators used by the bee colony.

    0  flip            independent bit flips with rate 1/D (at least one)
    1  neighbor mix    copy differing bits from a random other food source
    2  best guided     copy differing bits from the global best
    3  distance flip   flip k random bits, k scaled by the distance to the neighbor

Operator ids are stable: they are the class labels of the exported datasets.
Operators never modify their inputs and draw randomness only from ctx.rng.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np


class OperatorError(ValueError):
    """Unknown operator id."""


@dataclass(frozen=True)
class OperatorContext:
    """Inputs an operator needs to build one child."""

    parent: np.ndarray
    neighbor: np.ndarray
    gbest: np.ndarray
    rng: np.random.Generator

    @property
    def dims(self):
        return len(self.parent)


def op0_flip(ctx) -> np.ndarray:
    """Flip each bit with probability 1/D, forcing at least one flip."""
    dims = ctx.dims
    mask = ctx.rng.random(dims) < 1.0 / dims
    if not mask.any():
        mask[ctx.rng.integers(dims)] = True
    return ctx.parent ^ mask.astype(np.uint8)


def _mix_toward(ctx, donor) -> np.ndarray:
    """Take each bit where parent and donor differ from the donor with probability 0.5."""
    differ = ctx.parent != donor
    if not differ.any():
        return op0_flip(ctx)
    take = differ & (ctx.rng.random(ctx.dims) < 0.5)
    if not take.any():
        take[ctx.rng.choice(np.flatnonzero(differ))] = True
    child = ctx.parent.copy()
    child[take] = donor[take]
    return child


def op1_neighbor_mix(ctx) -> np.ndarray:
    """Move the parent halfway toward a random neighbour."""
    return _mix_toward(ctx, ctx.neighbor)


def op2_best_guided(ctx) -> np.ndarray:
    """Move the parent halfway toward the best solution so far."""
    return _mix_toward(ctx, ctx.gbest)


def op3_distance_flip(ctx) -> np.ndarray:
    """Flip up to hamming(parent, neighbour) random bits, at least one."""
    distance = int(np.count_nonzero(ctx.parent != ctx.neighbor))
    if distance == 0:
        k = 1
    else:
        u = 1.0 - ctx.rng.random()  # (0, 1]
        k = max(1, math.ceil(u * distance))
    positions = ctx.rng.choice(ctx.dims, size=k, replace=False)
    child = ctx.parent.copy()
    child[positions] ^= 1
    return child


OPERATORS = {
    0: op0_flip,
    1: op1_neighbor_mix,
    2: op2_best_guided,
    3: op3_distance_flip,
}

OPERATOR_NAMES = {
    0: "flip",
    1: "neighbor_mix",
    2: "best_guided",
    3: "distance_flip",
}


def apply_operator(op_id, ctx, problem=None) -> np.ndarray:
    """Dispatch to operator op_id; when a problem is given its repair is applied to the child."""
    try:
        operator = OPERATORS[op_id]
    except (KeyError, TypeError):
        raise OperatorError(f"unknown operator id {op_id!r}; valid ids are "
                            f"{sorted(OPERATORS)}") from None
    child = operator(ctx)
    if problem is not None:
        child = problem.repair(child, ctx.rng)
    return child
