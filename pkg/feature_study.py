#!/usr/bin/env python3
"""
Feature Study - run the bee colony, build case datasets and analyse which
landscape features predict the successful operator.

Subcommands:
    run       seeded colony runs -> cases.csv, success_table.csv, traces.csv, run.log
    gen-sukp  random SUKP instance file
    analyze   per-phase statistics and classifiers -> <out>/<problem>/...
    report    re-render the tables of existing results and write PDF figures

Usage:
    python feature_study.py run --problem onemax --dims 1000 --iters 150 --runs 10 --seed 7 --out results/onemax
    python feature_study.py gen-sukp --items 500 --elements 500 --seed 7 --out sukp_500.txt
    python feature_study.py run --problem sukp --instance sukp_500.txt --seed 7 --out results/sukp
    python feature_study.py analyze results/onemax/cases.csv results/sukp/cases.csv --out analysis
    python feature_study.py report analysis results/onemax

`--config spec.json` loads run settings from a JSON object keyed by
ExperimentSpec field names; explicit flags override the file.

Exit codes: 0 success, 1 invalid arguments or data, 2 I/O failure.
"""

from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
import argparse
import json
import logging
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

import abc_engine
from abc_engine import ConfigError, RunConfig
from case_dataset import (
    CaseRecorder, DatasetError, export_csv, load_cases, merge_runs,
    success_table, success_table_from_frame,
)
from landscape_features import EAP_VARIANTS, FEATURE_NAMES
from predictivity_analysis import (
    DEFAULT_TEST_FRACTION, DEFAULT_TREES, AnalysisError, evaluate, format_accuracy_table,
)
from problems import (
    DEFAULT_CAPACITY_RATIO, DEFAULT_DENSITY, OneMax, SetUnionKnapsack,
    generate_sukp, load_sukp, save_sukp,
)

log = logging.getLogger("feature_study")

# Configuration
PROBLEMS = ("onemax", "sukp")
DEFAULT_DIMS = {"onemax": 1000, "sukp": 500}
DEFAULT_ITERS = {"onemax": 150, "sukp": 500}
DEFAULT_RUNS = 10
DEFAULT_RUN_DIR = Path("./results")
DEFAULT_ANALYSIS_DIR = Path("./analysis")
NOISE_COLUMN = "noise"

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything `run` needs; dims and max_iter default per problem."""

    problem: str = "onemax"
    dims: int = None
    instance: str = None
    runs: int = DEFAULT_RUNS
    max_iter: int = None
    colony_size: int = abc_engine.DEFAULT_COLONY_SIZE
    limit: int = abc_engine.DEFAULT_LIMIT
    seed: int = 0
    out: str = str(DEFAULT_RUN_DIR)
    workers: int = 1
    record_failures: bool = False
    debug_columns: bool = False
    eap_variant: str = "literal"

    @classmethod
    def from_file(cls, path) -> "ExperimentSpec":
        """Load a spec from a JSON object, rejecting unknown keys and wrong types."""
        values = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(values, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        types = {f.name: f.type for f in fields(cls)}
        unknown = sorted(set(values) - set(types))
        if unknown:
            raise ConfigError(f"{path}: unknown keys {', '.join(unknown)}")
        for key, value in values.items():
            if value is not None and not isinstance(value, types[key]):
                raise ConfigError(f"{path}: '{key}' must be of type {types[key].__name__}")
        return cls(**values)

    def resolved(self) -> "ExperimentSpec":
        """Fill problem-dependent defaults for dims and iterations, then validate."""
        spec = self
        if spec.dims is None:
            spec = replace(spec, dims=DEFAULT_DIMS.get(spec.problem))
        if spec.max_iter is None:
            spec = replace(spec, max_iter=DEFAULT_ITERS.get(spec.problem))
        return spec.validate()

    def validate(self) -> "ExperimentSpec":
        if self.problem not in PROBLEMS:
            raise ConfigError(f"problem must be one of {PROBLEMS}, got {self.problem!r}")
        if self.runs < 1:
            raise ConfigError(f"runs must be >= 1, got {self.runs}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.instance is not None and self.problem != "sukp":
            raise ConfigError("an instance file only applies to --problem sukp")
        if self.dims is not None and self.dims < 1:
            raise ConfigError(f"dims must be >= 1, got {self.dims}")
        if self.eap_variant not in EAP_VARIANTS:
            raise ConfigError(f"eap variant must be one of {EAP_VARIANTS}")
        return self

    def run_seeds(self):
        """Seed of every run: seed, seed + 1, ..."""
        return [self.seed + i for i in range(self.runs)]


class StudyArgumentParser(argparse.ArgumentParser):
    """argparse with usage errors mapped to the validation exit code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def positive_int(text):
    """argparse type for integers >= 1."""
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def unit_interval(text):
    """argparse type for fractions strictly inside (0, 1)."""
    value = float(text)
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError(f"must lie strictly between 0 and 1, got {value}")
    return value


# ---------------------------------------------------------------------------
# Logging and output helpers
# ---------------------------------------------------------------------------

def _drop_handlers(logger):
    for handler in list(logger.handlers):
        if getattr(handler, "feature_study", False):
            logger.removeHandler(handler)
            handler.close()


def configure_logging(verbose=False):
    """Bare-text console output on stdout; library modules log through the root logger."""
    root = logging.getLogger()
    _drop_handlers(root)
    handler = logging.StreamHandler(sys.stdout)
    handler.setFormatter(logging.Formatter("%(message)s"))
    handler.feature_study = True
    root.addHandler(handler)
    root.setLevel(logging.DEBUG if verbose else logging.INFO)


def attach_run_log(path):
    """Mirror console output into a run log file."""
    handler = logging.FileHandler(path, mode="w", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(message)s"))
    handler.feature_study = True
    logging.getLogger().addHandler(handler)
    return handler


def detach_run_log(handler):
    logging.getLogger().removeHandler(handler)
    handler.close()


def banner(title):
    """Print a section title between rules."""
    log.info("\n" + "=" * 60)
    log.info(title)
    log.info("=" * 60)


def ensure_writable(directory) -> Path:
    """Create the output directory and prove it accepts files before any computation."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    probe = directory / ".write_test"
    probe.write_text("", encoding="utf-8")
    probe.unlink()
    return directory


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def build_problem(spec):
    """One-Max, a loaded SUKP instance, or a square SUKP instance generated from the seed."""
    if spec.problem == "onemax":
        return OneMax(spec.dims)
    if spec.instance is not None:
        return SetUnionKnapsack(load_sukp(spec.instance))
    return SetUnionKnapsack(generate_sukp(spec.dims, spec.dims, seed=spec.seed))


def run_config(spec, problem, run_id) -> RunConfig:
    """Engine configuration of one run."""
    return RunConfig(problem=problem, max_iter=spec.max_iter, colony_size=spec.colony_size,
                     limit=spec.limit, seed=spec.seed + run_id,
                     record_failures=spec.record_failures, eap_variant=spec.eap_variant,
                     run_id=run_id)


def execute_run(spec, problem, run_id):
    """One seeded run in its own recorder; safe to call in a worker process."""
    recorder = CaseRecorder()
    result = abc_engine.run(run_config(spec, problem, run_id), recorder)
    return result, recorder.records


def execute_runs(spec, problem):
    """All runs of a spec, serially or in a process pool; results come back ordered by run_id."""
    results, buffers = {}, {}
    workers = min(spec.workers, spec.runs)
    if workers == 1:
        for run_id in range(spec.runs):
            results[run_id], buffers[run_id] = execute_run(spec, problem, run_id)
    else:
        log.info(f"Using {workers} parallel workers\n")
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = {executor.submit(execute_run, spec, problem, run_id): run_id
                       for run_id in range(spec.runs)}
            for completed, future in enumerate(as_completed(futures), 1):
                run_id = futures[future]
                results[run_id], buffers[run_id] = future.result()
                log.info(f"Progress: {completed}/{spec.runs} runs")
    ordered = sorted(results)
    return [results[i] for i in ordered], merge_runs(buffers[i] for i in ordered)


def echo_config(spec, problem):
    """Log the resolved configuration and per-run seeds."""
    log.info("Configuration:")
    for key, value in asdict(spec).items():
        log.info(f"  {key}: {value}")
    for key, value in problem.describe().items():
        log.info(f"  instance.{key}: {value}")
    log.info(f"  run_seeds: {' '.join(str(s) for s in spec.run_seeds())}")


def cmd_run(spec):
    """Run the colony, then write cases, success table, traces and the run log."""
    spec = spec.resolved()
    out = ensure_writable(spec.out)
    handler = attach_run_log(out / "run.log")
    try:
        log.info("=== BEE COLONY CASE COLLECTION ===\n")
        problem = build_problem(spec)
        if spec.problem == "sukp" and spec.instance is None:
            save_sukp(problem.instance, out / "instance.txt")
        echo_config(spec, problem)
        # reject a bad colony setup before the first run starts
        run_config(spec, problem, 0).validate()

        log.info(f"\nRunning {spec.runs} runs of {spec.max_iter} iterations...")
        results, records = execute_runs(spec, problem)

        cases_path = export_csv(records, out / "cases.csv", include_debug=spec.debug_columns,
                                include_success=spec.record_failures)
        table = success_table(records)
        table.to_frame().to_csv(out / "success_table.csv", index=False, float_format="%.2f",
                                lineterminator="\n")
        traces = pd.DataFrame([
            {"run_id": r.run_id, "iteration": it, "gbest_fitness": f}
            for r in results for it, f in enumerate(r.trace)
        ])
        traces.to_csv(out / "traces.csv", index=False, lineterminator="\n")

        banner("SUMMARY")
        log.info(f"Runs: {len(results)}")
        log.info(f"Cases recorded: {len(records)}")
        for r in results:
            log.info(f"  run {r.run_id} (seed {r.seed}): initial best {r.initial_fitness:g} "
                     f"-> final best {r.gbest_fitness:g}")
        log.info("\nSuccessful cases per operator and phase:")
        log.info(table.to_text())
        log.info("\nResults saved to:")
        log.info(f"  Cases: {cases_path}")
        log.info(f"  Success table: {out / 'success_table.csv'}")
        log.info(f"  Traces: {out / 'traces.csv'}")
        log.info(f"  Log: {out / 'run.log'}")
    finally:
        detach_run_log(handler)
    return results, records


def spec_from_args(args) -> ExperimentSpec:
    """Defaults < config file < explicit flags."""
    spec = ExperimentSpec.from_file(args.config) if args.config else ExperimentSpec()
    names = {f.name for f in fields(ExperimentSpec)}
    flags = {k: v for k, v in vars(args).items() if k in names and v is not None}
    return replace(spec, **flags)


# ---------------------------------------------------------------------------
# gen-sukp
# ---------------------------------------------------------------------------

def cmd_gen_sukp(args):
    """Generate a random SUKP instance and save it."""
    log.info("=== SUKP INSTANCE GENERATION ===\n")
    inst = generate_sukp(args.items, args.elements, density=args.density,
                         capacity_ratio=args.capacity_ratio, seed=args.seed)
    path = Path(args.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_sukp(inst, path)
    log.info(f"Items: {inst.m}, elements: {inst.n}, capacity: {inst.capacity:g}")
    log.info(f"Incidence density: {inst.incidence.mean():.4f}")
    log.info(f"\nInstance saved to: {path}")
    return inst


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

def load_datasets(paths, run_id=None) -> pd.DataFrame:
    """Load and concatenate case CSVs, optionally keeping a single run."""
    frames = []
    for path in paths:
        frame = load_cases(path)
        log.info(f"  {path}: {len(frame)} cases")
        frames.append(frame)
    frame = pd.concat(frames, ignore_index=True)
    if run_id is not None:
        frame = frame[frame["run_id"] == run_id]
        if frame.empty:
            raise AnalysisError(f"no cases with run_id {run_id}")
    return frame


def add_noise_column(frame, seed):
    rng = np.random.default_rng(seed)
    return frame.assign(**{NOISE_COLUMN: rng.random(len(frame))})


def write_analysis(report, directory) -> Path:
    """Write every table of an analysis report into a directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for k, phase in sorted(report.phases.items()):
        phase.pearson.to_csv(directory / f"pearson_phase{k}.csv", index_label="feature")
        phase.chi2.to_frame().to_csv(directory / f"chi2_phase{k}.csv", index=False)
        for method, ranking in phase.importances.items():
            ranking.to_frame().to_csv(directory / f"importance_{method}_phase{k}.csv", index=False)
    report.accuracy_table().to_csv(directory / "accuracy.csv", index=False)
    report.importance_long().to_csv(directory / "importance_long.csv", index=False)
    report.pearson_long().to_csv(directory / "pearson_long.csv", index=False)
    (directory / "report.txt").write_text(report.to_text(), encoding="utf-8")
    return directory


def cmd_analyze(args):
    """Analyse case datasets, one output directory per problem."""
    log.info("=== FEATURE PREDICTIVITY ANALYSIS ===\n")
    out = ensure_writable(args.out)

    log.info("Loading case datasets...")
    frame = load_datasets(args.datasets, run_id=args.run_id)
    columns = FEATURE_NAMES
    if args.noise_column:
        frame = add_noise_column(frame, args.seed)
        columns = FEATURE_NAMES + (NOISE_COLUMN,)

    reports = {}
    for problem, group in frame.groupby("problem", sort=True):
        log.info(f"\nAnalysing {problem} ({len(group)} cases)...")
        report = evaluate(group, feature_columns=columns, seed=args.seed, trees=args.trees,
                          test_fraction=args.test_fraction, jobs=args.jobs, problem=problem)
        directory = write_analysis(report, out / problem)
        reports[problem] = report

        log.info("\n" + report.to_text())
        if args.noise_column:
            log.info(f"Rank of the '{NOISE_COLUMN}' column (1 = most important, "
                     f"{len(columns)} = least):")
            log.info(report.feature_rank(NOISE_COLUMN).to_string(index=False))
        log.info(f"\nResults saved to: {directory}/")
    return reports


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def plot_pearson_heatmap(matrix, title, path):
    """Save a correlation matrix as a heatmap PDF."""
    fig, ax = plt.subplots(figsize=(10, 8))
    im = ax.imshow(matrix.to_numpy(), cmap='RdBu_r', vmin=-1, vmax=1)

    ax.set_xticks(range(len(matrix.columns)))
    ax.set_xticklabels(matrix.columns, rotation=90, fontsize=8)
    ax.set_yticks(range(len(matrix.index)))
    ax.set_yticklabels(matrix.index, fontsize=8)
    ax.set_title(title, fontsize=14)

    plt.colorbar(im, ax=ax, label='Pearson r')
    plt.tight_layout()
    plt.savefig(path, format='pdf', dpi=150)
    plt.close()


def plot_ranking(ranking, title, path):
    """Save an importance ranking as a horizontal bar chart PDF."""
    ranking = ranking.sort_values("rank", ascending=False)
    fig, ax = plt.subplots(figsize=(8, 6))
    ax.barh(ranking["feature"], ranking["score"], color='steelblue')
    ax.set_xlabel('Normalised importance', fontsize=12)
    ax.set_xlim(0, 1.05)
    ax.set_title(title, fontsize=14)
    plt.tight_layout()
    plt.savefig(path, format='pdf', dpi=150)
    plt.close()


def render_figures(directory, label) -> list:
    """Render heatmaps and ranking charts from the long-format tables in a directory."""
    written = []
    pearson_path = directory / "pearson_long.csv"
    if pearson_path.exists():
        pearson = pd.read_csv(pearson_path)
        for phase, sub in pearson.groupby("phase"):
            names = list(dict.fromkeys(sub["feature_a"]))
            matrix = sub.pivot(index="feature_a", columns="feature_b", values="r")
            matrix = matrix.loc[names, names]
            path = directory / f"pearson_phase{phase}.pdf"
            plot_pearson_heatmap(matrix, f"{label}: feature correlation, phase {phase}", path)
            written.append(path)
    importance_path = directory / "importance_long.csv"
    if importance_path.exists():
        importance = pd.read_csv(importance_path)
        for (phase, method), sub in importance.groupby(["phase", "method"]):
            path = directory / f"importance_{method}_phase{phase}.pdf"
            plot_ranking(sub, f"{label}: {method} ranking, phase {phase}", path)
            written.append(path)
    return written


def result_directories(root):
    """A result directory and its immediate subdirectories."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"{root} is not a directory")
    return [root] + sorted(p for p in root.iterdir() if p.is_dir())


def cmd_report(args):
    """Print stored success and accuracy tables, and render figures unless disabled."""
    log.info("=== RESULT REPORT ===")
    found = False
    for root in args.directories:
        for directory in result_directories(root):
            success_path = directory / "success_table.csv"
            accuracy_path = directory / "accuracy.csv"
            if success_path.exists():
                found = True
                banner(f"SUCCESSFUL CASES ({directory})")
                log.info(success_table_from_frame(pd.read_csv(success_path)).to_text())
            if accuracy_path.exists():
                found = True
                banner(f"CLASSIFIER ACCURACY ({directory})")
                log.info(format_accuracy_table(pd.read_csv(accuracy_path)))
                if not args.no_figures:
                    figures = render_figures(directory, directory.name)
                    log.info(f"\nFigures saved to: {directory}/ ({len(figures)} PDFs)")
    if not found:
        raise DatasetError(f"no success_table.csv or accuracy.csv under {', '.join(args.directories)}")


# ---------------------------------------------------------------------------
# main
# ---------------------------------------------------------------------------

def build_parser():
    parser = StudyArgumentParser(description="Landscape-feature study of a bee colony's operator pool")
    parser.add_argument("--verbose", action="store_true", help="Debug-level progress output")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Collect successful cases from seeded colony runs")
    run.add_argument("--config", type=str, default=None,
                     help="JSON file with ExperimentSpec fields (flags override it)")
    run.add_argument("--problem", choices=PROBLEMS, default=None)
    run.add_argument("--dims", type=positive_int, default=None,
                     help="One-Max length, or items/elements of a generated SUKP instance")
    run.add_argument("--instance", type=str, default=None, help="SUKP instance file")
    run.add_argument("--iters", dest="max_iter", type=positive_int, default=None,
                     help="Iterations per run (default: 150 One-Max, 500 SUKP)")
    run.add_argument("--runs", type=positive_int, default=None,
                     help=f"Number of seeded runs (default: {DEFAULT_RUNS})")
    run.add_argument("--colony-size", type=positive_int, default=None,
                     help=f"Food sources (default: {abc_engine.DEFAULT_COLONY_SIZE})")
    run.add_argument("--limit", type=positive_int, default=None,
                     help=f"Trial limit before scouting (default: {abc_engine.DEFAULT_LIMIT})")
    run.add_argument("--seed", type=int, default=None, help="Seed of run 0; run i uses seed + i")
    run.add_argument("--out", type=str, default=None,
                     help=f"Output directory (default: {DEFAULT_RUN_DIR})")
    run.add_argument("--workers", type=positive_int, default=None,
                     help="Parallel worker processes (default: 1)")
    run.add_argument("--record-failures", action="store_true", default=None,
                     help="Also record unsuccessful candidates (adds a success column)")
    run.add_argument("--debug-columns", action="store_true", default=None,
                     help="Add the un-normalised average trial count (atn_raw)")
    run.add_argument("--eap-variant", choices=EAP_VARIANTS, default=None)
    run.set_defaults(handler=lambda args: cmd_run(spec_from_args(args)))

    gen = commands.add_parser("gen-sukp", help="Generate a random SUKP instance")
    gen.add_argument("--items", type=positive_int, default=DEFAULT_DIMS["sukp"])
    gen.add_argument("--elements", type=positive_int, default=DEFAULT_DIMS["sukp"])
    gen.add_argument("--density", type=float, default=DEFAULT_DENSITY,
                     help=f"Incidence probability in (0, 1] (default: {DEFAULT_DENSITY})")
    gen.add_argument("--capacity-ratio", type=unit_interval, default=DEFAULT_CAPACITY_RATIO,
                     help=f"Capacity as a share of total weight (default: {DEFAULT_CAPACITY_RATIO})")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", type=str, required=True, help="Instance file to write")
    gen.set_defaults(handler=cmd_gen_sukp)

    analyze = commands.add_parser("analyze", help="Rank feature predictivity per phase")
    analyze.add_argument("datasets", nargs="+", help="cases.csv files (problems analysed separately)")
    analyze.add_argument("--out", type=str, default=str(DEFAULT_ANALYSIS_DIR))
    analyze.add_argument("--seed", type=int, default=42)
    analyze.add_argument("--trees", type=positive_int, default=DEFAULT_TREES)
    analyze.add_argument("--test-fraction", type=unit_interval, default=DEFAULT_TEST_FRACTION)
    analyze.add_argument("--jobs", type=int, default=None,
                         help="Parallel jobs for forest training (-1 = all cores)")
    analyze.add_argument("--noise-column", action="store_true",
                         help="Add a uniform-noise feature and report its rank")
    analyze.add_argument("--run-id", type=int, default=None,
                         help="Analyse one run instead of pooling all runs")
    analyze.set_defaults(handler=cmd_analyze)

    report = commands.add_parser("report", help="Print result tables and write PDF figures")
    report.add_argument("directories", nargs="+", help="run or analysis output directories")
    report.add_argument("--no-figures", action="store_true", help="Tables only")
    report.set_defaults(handler=cmd_report)
    return parser


def main(argv=None):
    """Parse arguments, dispatch the subcommand and return the exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)
    try:
        args.handler(args)
    except ValueError as e:
        log.error(f"Error: {e}")
        return EXIT_VALIDATION
    except OSError as e:
        log.error(f"I/O error: {e}")
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
