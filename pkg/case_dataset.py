"""
Case datasets - successful moves as labelled rows.

Each case carries run metadata, the search phase, the 19 landscape features,
the parent/child fitness and the operator label `op`. Datasets are exchanged
as CSV with a fixed header:

    problem,run_id,iteration,phase,<19 features>,parent_fitness,child_fitness,op

Optional columns (`atn_raw` for debugging, `success` when failures were
recorded) are inserted just before `op`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
import logging

import numpy as np
import pandas as pd

from landscape_features import FEATURE_NAMES, FeatureVector
from operators import OPERATOR_NAMES

logger = logging.getLogger(__name__)

N_PHASES = 3
N_OPERATORS = 4

METADATA_COLUMNS = ("problem", "run_id", "iteration", "phase")
FITNESS_COLUMNS = ("parent_fitness", "child_fitness")
LABEL_COLUMN = "op"
CSV_COLUMNS = METADATA_COLUMNS + FEATURE_NAMES + FITNESS_COLUMNS + (LABEL_COLUMN,)
OPTIONAL_COLUMNS = ("atn_raw", "success")

FLOAT_FORMAT = "%.17g"


class DatasetError(ValueError):
    pass


class SchemaError(DatasetError):
    def __init__(self, column, message):
        super().__init__(f"column '{column}': {message}")
        self.column = column


@dataclass(frozen=True)
class CaseRecord:
    problem: str
    run_id: int
    iteration: int
    phase: int
    op: int
    features: FeatureVector
    parent_fitness: float
    child_fitness: float
    success: bool = True
    atn_raw: float = 0.0

    def row(self) -> dict:
        return {
            "problem": self.problem, "run_id": self.run_id,
            "iteration": self.iteration, "phase": self.phase,
            **self.features._asdict(),
            "parent_fitness": self.parent_fitness, "child_fitness": self.child_fitness,
            "atn_raw": self.atn_raw, "success": int(self.success), "op": self.op,
        }


class CaseRecorder:
    """Per-run buffer the colony writes its cases into."""

    def __init__(self):
        self.records = []

    def record(self, case):
        self.records.append(case)

    def __len__(self):
        return len(self.records)


def phase_of(iteration, max_iter) -> int:
    """Equal-thirds phase (1, 2 or 3) of a 0-based iteration."""
    if max_iter < N_PHASES:
        raise DatasetError(f"max_iter must be >= {N_PHASES}, got {max_iter}")
    if not 0 <= iteration < max_iter:
        raise DatasetError(f"iteration {iteration} outside [0, {max_iter})")
    return min(N_PHASES, (N_PHASES * iteration) // max_iter + 1)


def merge_runs(buffers) -> list:
    """Concatenate per-run record lists ordered by run_id, keeping emission order."""
    merged = [case for records in buffers for case in records]
    return sorted(merged, key=lambda case: case.run_id)


def columns_for(include_debug=False, include_success=False):
    extra = []
    if include_debug:
        extra.append("atn_raw")
    if include_success:
        extra.append("success")
    return list(CSV_COLUMNS[:-1]) + extra + [LABEL_COLUMN]


def records_to_frame(records, include_debug=False, include_success=False) -> pd.DataFrame:
    """Records as a DataFrame in export order: (run_id, iteration, emission index)."""
    columns = columns_for(include_debug, include_success)
    frame = pd.DataFrame([case.row() for case in records])
    frame = frame.sort_values(["run_id", "iteration"], kind="stable").reset_index(drop=True)
    return frame[columns]


def export_csv(records, path, include_debug=False, include_success=False):
    """Write records as CSV; floats keep 17 significant digits so the file round-trips."""
    if not records:
        raise DatasetError("refusing to export an empty record set")
    frame = records_to_frame(records, include_debug, include_success)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info("wrote %d cases to %s", len(frame), path)
    return Path(path)


def validate_frame(frame) -> pd.DataFrame:
    """Check the CSV schema and types; raises SchemaError naming the first bad column."""
    actual = list(frame.columns)
    required = list(CSV_COLUMNS[:-1])
    for position, column in enumerate(required):
        if position >= len(actual) or actual[position] != column:
            found = actual[position] if position < len(actual) else "<missing>"
            raise SchemaError(column, f"expected at position {position + 1}, found '{found}'")
    extras = actual[len(required):-1]
    for column in extras:
        if column not in OPTIONAL_COLUMNS:
            raise SchemaError(column, "unexpected column")
    if not actual or actual[-1] != LABEL_COLUMN:
        raise SchemaError(LABEL_COLUMN, "label column must come last")

    for column in ("run_id", "iteration", "phase", LABEL_COLUMN):
        if not pd.api.types.is_integer_dtype(frame[column]):
            raise SchemaError(column, "expected integer values")
    if not frame["phase"].between(1, N_PHASES).all():
        raise SchemaError("phase", f"values must lie in 1..{N_PHASES}")
    if not frame[LABEL_COLUMN].between(0, N_OPERATORS - 1).all():
        raise SchemaError(LABEL_COLUMN, f"values must lie in 0..{N_OPERATORS - 1}")
    numeric = list(FEATURE_NAMES) + list(FITNESS_COLUMNS) + [c for c in extras if c == "atn_raw"]
    for column in numeric:
        values = pd.to_numeric(frame[column], errors="coerce")
        if not np.isfinite(values.to_numpy(dtype=float)).all():
            raise SchemaError(column, "non-numeric or non-finite values")
    return frame


def load_cases(path) -> pd.DataFrame:
    """Read and validate a case CSV into a DataFrame."""
    frame = pd.read_csv(path, float_precision="round_trip", dtype={"problem": str})
    if frame.empty:
        raise DatasetError(f"{path} contains no cases")
    return validate_frame(frame)


def import_csv(path) -> list:
    """Read a case CSV back into CaseRecords."""
    frame = load_cases(path)
    records = []
    for row in frame.itertuples(index=False):
        values = row._asdict()
        records.append(CaseRecord(
            problem=values["problem"],
            run_id=int(values["run_id"]),
            iteration=int(values["iteration"]),
            phase=int(values["phase"]),
            op=int(values["op"]),
            features=FeatureVector(*(float(values[name]) for name in FEATURE_NAMES)),
            parent_fitness=float(values["parent_fitness"]),
            child_fitness=float(values["child_fitness"]),
            success=bool(values.get("success", 1)),
            atn_raw=float(values.get("atn_raw", 0.0)),
        ))
    return records


@dataclass
class SuccessTable:
    """Successful cases per problem, operator and phase."""

    counts: dict = field(default_factory=dict)

    def counts_for(self, problem) -> np.ndarray:
        return self.counts.get(problem, np.zeros((N_OPERATORS, N_PHASES), dtype=int))

    def means_for(self, problem) -> np.ndarray:
        return self.counts_for(problem).mean(axis=1)

    @property
    def total(self) -> int:
        return int(sum(table.sum() for table in self.counts.values()))

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for problem in sorted(self.counts):
            table = self.counts[problem]
            for op in range(N_OPERATORS):
                rows.append({
                    "problem": problem, "op": op,
                    **{f"phase_{k + 1}": int(table[op, k]) for k in range(N_PHASES)},
                    "mean": float(table[op].mean()),
                })
        return pd.DataFrame(rows, columns=["problem", "op"]
                            + [f"phase_{k + 1}" for k in range(N_PHASES)] + ["mean"])

    def to_text(self) -> str:
        """Operator x phase layout with a mean column, one block per problem."""
        lines = [f"{'Problem':<10}{'Operator':<22}{'Phase 1':>9}{'Phase 2':>9}"
                 f"{'Phase 3':>9}{'Mean':>11}", "-" * 70]
        for problem in sorted(self.counts):
            table = self.counts[problem]
            for op in range(N_OPERATORS):
                label = problem if op == 0 else ""
                phases = "".join(f"{int(c):>9}" for c in table[op])
                name = f"OP {op} {OPERATOR_NAMES[op]}"
                lines.append(f"{label:<10}{name:<22}{phases}{table[op].mean():>11,.2f}")
            lines.append("-" * 70)
        return "\n".join(lines)


def success_table(records) -> SuccessTable:
    """Count successful cases per (problem, operator, phase)."""
    counts = {}
    for case in records:
        if not case.success:
            continue
        table = counts.setdefault(case.problem, np.zeros((N_OPERATORS, N_PHASES), dtype=int))
        table[case.op, case.phase - 1] += 1
    return SuccessTable(counts)


def success_table_from_frame(frame) -> SuccessTable:
    """Rebuild a SuccessTable from a success_table.csv frame."""
    counts = {}
    for problem, group in frame.groupby("problem", sort=True):
        table = np.zeros((N_OPERATORS, N_PHASES), dtype=int)
        for row in group.itertuples(index=False):
            table[row.op] = [getattr(row, f"phase_{k + 1}") for k in range(N_PHASES)]
        counts[str(problem)] = table
    return SuccessTable(counts)
