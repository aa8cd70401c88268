"""
Benchmark problems - One-Max and the Set-Union Knapsack Problem (SUKP).

Solutions are binary numpy vectors (dtype uint8) of length D. One-Max counts
1-bits. SUKP selects items, each covering a set of weighted elements; the
weight of the union of covered elements must not exceed the capacity.

SUKP instances are stored as plain text:

    m n capacity
    p_0 ... p_{m-1}
    w_0 ... w_{n-1}
    <m rows of n space-separated 0/1 incidence flags>
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
import logging

import numpy as np

logger = logging.getLogger(__name__)

# Configuration
DEFAULT_DENSITY = 0.1
DEFAULT_CAPACITY_RATIO = 0.5
PROFIT_RANGE = (1, 100)
WEIGHT_RANGE = (1, 100)


class ProblemError(ValueError):
    """Base class for problem-definition errors."""


class InstanceError(ProblemError):
    """Invalid instance data or generation parameters."""


class DimensionError(ProblemError):
    """A solution's length does not match the problem dimension."""


class InfeasibleSolutionError(ProblemError):
    """An infeasible SUKP solution was evaluated without repair."""


class SukpFormatError(ProblemError):
    """Malformed SUKP instance file."""

    def __init__(self, line_no, message):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def as_bits(values) -> np.ndarray:
    """Coerce a sequence of 0/1 values (or a '0101' string) into a bit vector."""
    if isinstance(values, str):
        values = [int(c) for c in values]
    bits = np.asarray(values, dtype=np.uint8)
    if bits.ndim != 1 or np.any(bits > 1):
        raise ProblemError("a bit string must be a flat sequence of 0/1 values")
    return bits


def random_bits(dims, rng) -> np.ndarray:
    """Uniform random bit string of the given length."""
    return rng.integers(0, 2, size=dims, dtype=np.uint8)


# ---------------------------------------------------------------------------
# One-Max
# ---------------------------------------------------------------------------

def onemax_fitness(x) -> float:
    """Number of 1-bits in x."""
    return float(np.count_nonzero(x))


class OneMax:
    """One-Max over D bits; every bit string is feasible."""

    kind = "onemax"

    def __init__(self, dims):
        if dims < 1:
            raise InstanceError(f"One-Max needs at least one dimension, got {dims}")
        self.dims = int(dims)

    def evaluate(self, x) -> float:
        _check_length(x, self.dims)
        return onemax_fitness(x)

    def repair(self, x, rng) -> np.ndarray:
        return x

    def random_solution(self, rng) -> np.ndarray:
        return random_bits(self.dims, rng)

    def describe(self):
        return {"problem": self.kind, "dims": self.dims}


# ---------------------------------------------------------------------------
# Set-Union Knapsack
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SukpInstance:
    """Items x elements incidence with item profits, element weights and a capacity."""

    profits: np.ndarray
    weights: np.ndarray
    capacity: float
    incidence: np.ndarray

    def __post_init__(self):
        profits = np.asarray(self.profits, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        incidence = np.asarray(self.incidence, dtype=bool)
        object.__setattr__(self, "profits", profits)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "incidence", incidence)
        object.__setattr__(self, "capacity", float(self.capacity))
        # float copy for the repair matrix-vector products
        object.__setattr__(self, "_incidence_f", incidence.astype(float))

        if profits.ndim != 1 or len(profits) < 1:
            raise InstanceError("an instance needs at least one item (m >= 1)")
        if weights.ndim != 1 or len(weights) < 1:
            raise InstanceError("an instance needs at least one element (n >= 1)")
        if incidence.shape != (len(profits), len(weights)):
            raise InstanceError(
                f"incidence shape {incidence.shape} does not match "
                f"m={len(profits)} x n={len(weights)}")
        if not self.capacity > 0 or not np.isfinite(self.capacity):
            raise InstanceError(f"capacity must be positive, got {self.capacity}")
        if np.any(profits <= 0) or np.any(weights <= 0):
            raise InstanceError("all profits and weights must be positive")
        empty = np.flatnonzero(~incidence.any(axis=1))
        if len(empty):
            raise InstanceError(f"item {empty[0]} covers no element")

    @property
    def m(self):
        return len(self.profits)

    @property
    def n(self):
        return len(self.weights)

    def __eq__(self, other):
        if not isinstance(other, SukpInstance):
            return NotImplemented
        return (self.capacity == other.capacity
                and np.array_equal(self.profits, other.profits)
                and np.array_equal(self.weights, other.weights)
                and np.array_equal(self.incidence, other.incidence))

    __hash__ = None


def _check_length(x, dims):
    if len(x) != dims:
        raise DimensionError(f"solution has length {len(x)}, problem dimension is {dims}")


def _coverage(x, inst) -> np.ndarray:
    """Per element, how many selected items cover it."""
    return inst.incidence[np.asarray(x, dtype=bool)].sum(axis=0)


def sukp_union_weight(x, inst) -> float:
    """Total weight of the elements covered by at least one selected item."""
    _check_length(x, inst.m)
    covered = _coverage(x, inst) > 0
    return float(inst.weights[covered].sum())


def sukp_fitness(x, inst) -> float:
    """Profit of a feasible selection; infeasible selections must be repaired first."""
    weight = sukp_union_weight(x, inst)
    if weight > inst.capacity:
        raise InfeasibleSolutionError(
            f"union weight {weight:g} exceeds capacity {inst.capacity:g}")
    return float(inst.profits[np.asarray(x, dtype=bool)].sum())


def sukp_repair(x, inst, rng=None) -> np.ndarray:
    """
    Make x feasible: drop the selected item with the lowest profit/marginal-weight
    ratio until the union fits, then greedily add the fitting unselected item
    with the highest ratio until nothing fits. Ties go to the lowest item index.

    The input is never modified; rng is accepted for interface symmetry with the
    operators and does not influence the result.
    """
    _check_length(x, inst.m)
    selected = np.asarray(x, dtype=bool).copy()
    counts = _coverage(selected, inst)
    weight = float(inst.weights[counts > 0].sum())

    while weight > inst.capacity:
        items = np.flatnonzero(selected)
        # weight that disappears if the item leaves: elements only it covers
        marginal = inst._incidence_f[items] @ (inst.weights * (counts == 1))
        with np.errstate(divide="ignore"):
            ratio = np.where(marginal > 0, inst.profits[items] / marginal, np.inf)
        drop = items[np.argmin(ratio)]
        selected[drop] = False
        counts -= inst.incidence[drop]
        weight = float(inst.weights[counts > 0].sum())

    while True:
        items = np.flatnonzero(~selected)
        if not len(items):
            break
        added = inst._incidence_f[items] @ (inst.weights * (counts == 0))
        fits = weight + added <= inst.capacity
        if not fits.any():
            break
        with np.errstate(divide="ignore"):
            ratio = np.where(added > 0, inst.profits[items] / added, np.inf)
        ratio[~fits] = -np.inf
        pick = items[np.argmax(ratio)]
        selected[pick] = True
        counts += inst.incidence[pick]
        weight = float(inst.weights[counts > 0].sum())

    return selected.astype(np.uint8)


class SetUnionKnapsack:
    """SUKP wrapper used by the colony: evaluation always follows repair."""

    kind = "sukp"

    def __init__(self, instance):
        self.instance = instance
        self.dims = instance.m

    def evaluate(self, x) -> float:
        return sukp_fitness(x, self.instance)

    def repair(self, x, rng) -> np.ndarray:
        return sukp_repair(x, self.instance, rng)

    def is_feasible(self, x) -> bool:
        return sukp_union_weight(x, self.instance) <= self.instance.capacity

    def random_solution(self, rng) -> np.ndarray:
        return self.repair(random_bits(self.dims, rng), rng)

    def describe(self):
        inst = self.instance
        return {"problem": self.kind, "items": inst.m, "elements": inst.n,
                "capacity": inst.capacity}


def generate_sukp(m, n, density=DEFAULT_DENSITY, capacity_ratio=DEFAULT_CAPACITY_RATIO,
                  seed=0) -> SukpInstance:
    """Random SUKP instance, fully determined by its arguments."""
    if m < 1 or n < 1:
        raise InstanceError(f"m and n must be >= 1, got m={m}, n={n}")
    if not 0 < density <= 1:
        raise InstanceError(f"density must be in (0, 1], got {density}")
    if not 0 < capacity_ratio < 1:
        raise InstanceError(f"capacity ratio must be in (0, 1), got {capacity_ratio}")

    rng = np.random.default_rng(seed)
    incidence = rng.random((m, n)) < density
    for row in np.flatnonzero(~incidence.any(axis=1)):
        incidence[row, rng.integers(n)] = True
    profits = rng.integers(PROFIT_RANGE[0], PROFIT_RANGE[1] + 1, size=m).astype(float)
    weights = rng.integers(WEIGHT_RANGE[0], WEIGHT_RANGE[1] + 1, size=n).astype(float)
    capacity = capacity_ratio * weights.sum()

    logger.debug("generated SUKP instance m=%d n=%d density=%g ratio=%g seed=%s",
                 m, n, density, capacity_ratio, seed)
    return SukpInstance(profits=profits, weights=weights, capacity=capacity,
                        incidence=incidence)


def _fmt(value):
    return format(float(value), ".17g")


def save_sukp(inst, path):
    """Write an instance in the text format described in the module docstring."""
    lines = [
        f"{inst.m} {inst.n} {_fmt(inst.capacity)}",
        " ".join(_fmt(p) for p in inst.profits),
        " ".join(_fmt(w) for w in inst.weights),
    ]
    lines += [" ".join("1" if flag else "0" for flag in row) for row in inst.incidence]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _parse_numbers(line, line_no, expected, kind=float):
    fields = line.split()
    if len(fields) != expected:
        raise SukpFormatError(line_no, f"expected {expected} values, found {len(fields)}")
    try:
        return [kind(f) for f in fields]
    except ValueError as e:
        raise SukpFormatError(line_no, f"not a number ({e})") from None


def load_sukp(path) -> SukpInstance:
    """Read an instance file; parse errors name the offending line."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()

    def line(no):
        if no > len(lines):
            raise SukpFormatError(no, "unexpected end of file")
        return lines[no - 1]

    header = line(1).split()
    if len(header) != 3:
        raise SukpFormatError(1, "header must be 'm n capacity'")
    try:
        m, n, capacity = int(header[0]), int(header[1]), float(header[2])
    except ValueError as e:
        raise SukpFormatError(1, f"bad header ({e})") from None
    if m < 1 or n < 1:
        raise InstanceError(f"m and n must be >= 1, got m={m}, n={n}")

    profits = _parse_numbers(line(2), 2, m)
    weights = _parse_numbers(line(3), 3, n)
    incidence = np.zeros((m, n), dtype=bool)
    for i in range(m):
        row = _parse_numbers(line(4 + i), 4 + i, n, kind=int)
        if any(v not in (0, 1) for v in row):
            raise SukpFormatError(4 + i, "incidence flags must be 0 or 1")
        incidence[i] = row
    if any(l.strip() for l in lines[3 + m:]):
        raise SukpFormatError(4 + m, "trailing data after the incidence rows")

    return SukpInstance(profits=profits, weights=weights, capacity=capacity,
                        incidence=incidence)
