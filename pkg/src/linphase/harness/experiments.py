"""Experiment drivers: Gaussian success-rate sweep, antenna benchmark, file solve.

Per-trial seeds come from the master seed by a fixed counter scheme,
``SeedSequence(master, spawn_key=key).generate_state(1, uint64)[0]`` with
``key = (m2, trial)`` for the sweep and ``key = (realisation,)`` for the
antenna benchmark. A record therefore depends only on the master seed and
its own key, never on execution order or worker count.

Result tables are deterministic; wall-clock timings go to a separate file.
"""
from __future__ import annotations

import json
import logging
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..coherence import (
    CoherenceError,
    CoherenceStructure,
    MagnitudePhaseData,
    augment_from_phase_data,
    build_augmented_system,
    extract_phase_data,
)
from ..lbfgs import NonFiniteObjectiveError
from ..metrics import DB_FLOOR, SUCCESS_THRESHOLD_DB, deviation_report, epsilon_c, epsilon_m
from ..models import (
    dominant_component,
    far_field_components,
    far_field_cut,
    sample_gaussian_instance,
)
from ..numerics import DimensionError
from ..scenario import build_antenna_instance
from ..solvers import (
    NonconvexSettings,
    SolveReport,
    UnderdeterminedWarning,
    coherent_resolve,
    solve_coherent,
    solve_linear_pc,
    solve_nonconvex,
    spectral_initialize,
)
from .config import ConfigError, ExperimentConfig
from .io import (
    format_db,
    read_coherence_json,
    read_matrix_csv,
    read_measurements_csv,
    read_vector_csv,
    write_table,
    write_vector_csv,
)

log = logging.getLogger(__name__)

TRIAL_HEADER = ("m2", "trial", "seed", "method", "epsilon_c", "epsilon_m", "iterations", "flag")
SUMMARY_HEADER = (
    "m2", "method", "trials", "successes", "rate",
    "m", "n", "q", "ratio_m_n", "ratio_m_unknowns", "flagged",
)
TIMING_HEADER = ("m2", "trial", "method", "wall_time")
ANTENNA_TRIAL_HEADER = ("realization", "seed", "method", "epsilon_c", "epsilon_m", "iterations", "flag")
ANTENNA_SUMMARY_HEADER = (
    "method", "realizations", "median_epsilon_c", "median_epsilon_m",
    "min_epsilon_m", "max_epsilon_m",
)
FF_HEADER = ("method", "theta_deg", "magnitude_db", "phase_deg", "deviation_db")


class NumericalFailure(RuntimeError):
    """A solver could not produce a finite result."""


@dataclass(frozen=True)
class TrialRecord:
    """One (sweep point or realisation, trial, method) result.

    ``m2`` is ``None`` for antenna realisations. ``flag`` is a ``;``-joined
    list of diagnostics (empty when clean).
    """

    m2: int | None
    trial: int
    seed: int
    method: str
    epsilon_c: float
    epsilon_m: float
    iterations: int
    wall_time: float
    flag: str = ""

    @property
    def success(self) -> bool:
        return bool(self.epsilon_c < SUCCESS_THRESHOLD_DB)


def trial_seed(master: int, *key: int) -> int:
    """Integer seed for the work item ``key`` under ``master``."""
    ss = np.random.SeedSequence(master, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


# -- shared method dispatch ----------------------------------------------------------------

@dataclass
class Problem:
    """Everything a method may use; ``blocks``/``pairs`` describe the set layout."""

    A: np.ndarray
    b: np.ndarray
    structure: CoherenceStructure
    blocks: list
    pairs: list
    data: MagnitudePhaseData | None = None
    cache: dict = field(default_factory=dict)

    def phase_data(self) -> MagnitudePhaseData:
        if self.data is None:
            self.data = extract_phase_data(self.b, self.structure)
        return self.data

    def b_blocks(self):
        edges = np.cumsum([blk.shape[0] for blk in self.blocks])[:-1]
        return np.split(self.b, edges)


def _linear(problem: Problem) -> SolveReport:
    if "linear-pc" not in problem.cache:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UnderdeterminedWarning)
            problem.cache["linear-pc"] = solve_linear_pc(problem.A, problem.phase_data(), problem.structure)
    return problem.cache["linear-pc"]


def _linear_flags(rep: SolveReport) -> list:
    flags = []
    if rep.underdetermined:
        flags.append("underdetermined")
    if rep.condition_warning:
        flags.append("ill-conditioned")
    return flags


def run_method(method: str, problem: Problem, settings: NonconvexSettings):
    """Solve ``problem`` with ``method``; returns ``(z, iterations, flags)``."""
    if method == "linear-pc":
        rep = _linear(problem)
        return rep.z, 0, _linear_flags(rep)
    if method == "linear-pc-refined":
        rep = _linear(problem)
        z = coherent_resolve(problem.A, problem.phase_data(), problem.structure, rep.psi)
        flags = _linear_flags(rep)
        if z is None:
            return rep.z, 0, flags + ["refinement-skipped"]
        return z, 0, flags
    if method == "coherent":
        rep = solve_coherent(problem.A, problem.b)
        return rep.z, 0, ["ill-conditioned"] if rep.condition_warning else []
    if method in ("nonconvex-augmented", "nonconvex-incoherent"):
        pairs = problem.pairs if method == "nonconvex-augmented" else []
        A_aug, mags = build_augmented_system(problem.blocks, problem.b_blocks(), pairs)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            z0 = spectral_initialize(A_aug, mags)
        rep = solve_nonconvex(A_aug, mags, z0, settings)
        return rep.z, rep.iterations, [] if rep.converged else ["iteration-limit"]
    raise ConfigError(f"unknown method {method!r}")


def _evaluate(method, problem, settings, reference):
    """Run one method and score ``A z`` against ``reference``.

    Returns ``(z, eps_c, eps_m, iterations, flag, wall_time)``; ``z`` is
    ``None`` and the deviations NaN when the solver failed numerically.
    """
    t0 = time.perf_counter()
    try:
        z, iterations, flags = run_method(method, problem, settings)
        field_ = problem.A @ z
        ec, em = epsilon_c(field_, reference), epsilon_m(field_, reference)
    except (NonFiniteObjectiveError, np.linalg.LinAlgError, CoherenceError) as exc:
        log.warning("%s failed: %s", method, exc)
        z, ec, em = None, float("nan"), float("nan")
        iterations, flags = 0, ["numerical-failure"]
    return z, ec, em, iterations, ";".join(flags), time.perf_counter() - t0


# -- Gaussian sweep ------------------------------------------------------------------------

def gauss_problem(n: int, m1: int, m2: int, seed: int):
    """Random instance with ``m1`` incoherent rows and ``m2`` coherent pairs."""
    inst = sample_gaussian_instance(n, m1 + 2 * m2, seed)
    structure = CoherenceStructure.stacked_sets(m1, m2)
    A = inst.A
    if m1 > 0:
        blocks, pairs = [A[:m1], A[m1:m1 + m2], A[m1 + m2:]], [(1, 2)]
    else:
        blocks, pairs = [A[:m2], A[m2:]], [(0, 1)]
    return inst, Problem(A, inst.b_true, structure, blocks, pairs)


def _gauss_item(args):
    n, m1, m2, trial, master, methods, settings = args
    seed = trial_seed(master, m2, trial)
    inst, problem = gauss_problem(n, m1, m2, seed)
    out = []
    for method in methods:
        _, ec, em, it, flag, wall = _evaluate(method, problem, settings, inst.b_true)
        out.append(TrialRecord(m2, trial, seed, method, ec, em, it, wall, flag))
    return out


@dataclass
class SweepResult:
    records: list
    summary: list  # dict rows keyed by SUMMARY_HEADER

    def rate(self, method: str, m2: int) -> float:
        for row in self.summary:
            if row["method"] == method and row["m2"] == m2:
                return row["rate"]
        raise KeyError((method, m2))


def _map(fn, items, workers: int):
    if workers <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


def summarize_sweep(records, n: int, m1: int) -> list:
    rows = []
    by_key: dict = {}
    for r in records:
        by_key.setdefault((r.m2, r.method), []).append(r)
    for (m2, method), recs in by_key.items():
        m = m1 + 2 * m2
        q = m1 + m2
        successes = sum(r.success for r in recs)
        rows.append({
            "m2": m2, "method": method, "trials": len(recs), "successes": successes,
            "rate": successes / len(recs), "m": m, "n": n, "q": q,
            "ratio_m_n": m / n, "ratio_m_unknowns": m / (n + q - 1),
            "flagged": sum(bool(r.flag) for r in recs),
        })
    return rows


def run_gauss_sweep(config: ExperimentConfig, out_dir=None, workers: int | None = None) -> SweepResult:
    """Success-rate sweep over the number of coherent pairs ``m2``.

    Writes ``trials.csv``, ``summary.csv``, ``timings.csv`` and the
    effective ``config.json`` when ``out_dir`` is given.
    """
    if config.kind != "gauss-sweep":
        raise ConfigError(f"expected a gauss-sweep config, got {config.kind!r}")
    g = config.gauss
    workers = workers or config.effective_workers()
    items = [
        (g.n, g.m1, m2, t, config.seed, tuple(config.methods), config.solver)
        for m2 in g.m2
        for t in range(config.trials)
    ]
    log.info("gauss sweep: %d points x %d trials, %d workers", len(g.m2), config.trials, workers)
    records = [r for chunk in _map(_gauss_item, items, workers) for r in chunk]
    result = SweepResult(records, summarize_sweep(records, g.n, g.m1))
    if out_dir is not None:
        write_sweep_outputs(result, config, out_dir)
    return result


def write_sweep_outputs(result: SweepResult, config: ExperimentConfig, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_table(out / "trials.csv", TRIAL_HEADER, (
        (r.m2, r.trial, r.seed, r.method, format_db(r.epsilon_c), format_db(r.epsilon_m),
         r.iterations, r.flag)
        for r in result.records
    ))
    write_table(out / "summary.csv", SUMMARY_HEADER, (
        (row["m2"], row["method"], row["trials"], row["successes"], f"{row['rate']:.4f}",
         row["m"], row["n"], row["q"], f"{row['ratio_m_n']:.4f}",
         f"{row['ratio_m_unknowns']:.4f}", row["flagged"])
        for row in result.summary
    ))
    write_table(out / "timings.csv", TIMING_HEADER, (
        (r.m2, r.trial, r.method, f"{r.wall_time:.6f}") for r in result.records
    ))
    _write_config(out, config)


def _write_config(out: Path, config: ExperimentConfig) -> None:
    (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")


# -- antenna benchmark ----------------------------------------------------------------------

@dataclass
class AntennaResult:
    records: list
    summary: list
    scenarios: list
    ff_cut: list

    def median(self, method: str, metric: str = "epsilon_m") -> float:
        for row in self.summary:
            if row["method"] == method:
                return row[f"median_{metric}"]
        raise KeyError(method)


def antenna_problem(instance) -> Problem:
    return Problem(instance.A, instance.b_measured, instance.structure,
                   list(instance.blocks), list(instance.pairs))


def _ff_rows(instance, solutions: dict, phi_deg: float, step_deg: float):
    theta = np.arange(-180.0, 180.0 + step_deg / 2, step_deg)
    ref_comps = far_field_components(instance.reference.coefficients, instance.reference, phi_deg, theta)
    comp = dominant_component(ref_comps)
    ref = ref_comps[:, comp]
    patterns = {"reference": ref}
    for method, z in solutions.items():
        patterns[method] = far_field_cut(z, instance.basis, phi_deg, theta, comp)
    rows = []
    ref_n = ref / ref[np.argmax(np.abs(ref))]
    for method, p in patterns.items():
        peak = p[np.argmax(np.abs(p))]
        pn = p / peak if peak != 0 else p
        with np.errstate(divide="ignore"):
            mag_db = 20.0 * np.log10(np.abs(pn))
            dev_db = 20.0 * np.log10(np.abs(pn - ref_n))
        for t, mdb, ph, dev in zip(theta, mag_db, np.angle(pn, deg=True), dev_db):
            rows.append((method, float(t), float(mdb), float(ph), float(dev)))
    return rows


def _antenna_item(args):
    r, master, params, methods, settings, want_ff = args
    seed = trial_seed(master, r)
    inst = build_antenna_instance(params, seed)
    problem = antenna_problem(inst)
    records, solutions = [], {}
    for method in methods:
        z, ec, em, it, flag, wall = _evaluate(method, problem, settings, inst.b_true)
        if z is not None:
            solutions[method] = z
        records.append(TrialRecord(None, r, seed, method, ec, em, it, wall, flag))
        log.info("realisation %d %-22s eps_c %8.2f dB  eps_m %8.2f dB", r, method, ec, em)
    scenario = {"realization": r, "seed": seed, "n": inst.A.shape[1], "m": inst.A.shape[0],
                "q": inst.structure.q, "condition": inst.condition}
    ff = _ff_rows(inst, solutions, params.ff_phi_deg, params.ff_theta_step_deg) if want_ff else []
    return records, scenario, ff


def summarize_antenna(records, methods) -> list:
    rows = []
    for method in methods:
        recs = [r for r in records if r.method == method]
        ec = np.array([r.epsilon_c for r in recs])
        em = np.array([r.epsilon_m for r in recs])
        rows.append({
            "method": method, "realizations": len(recs),
            "median_epsilon_c": float(np.median(ec)), "median_epsilon_m": float(np.median(em)),
            "min_epsilon_m": float(np.min(em)), "max_epsilon_m": float(np.max(em)),
        })
    return rows


def run_antenna_benchmark(config: ExperimentConfig, out_dir=None, workers: int | None = None) -> AntennaResult:
    """Dipole-AUT benchmark over ``config.trials`` seeded realisations.

    Near-field deviations are measured against the noiseless stacked data.
    The far-field cut (first realisation) uses the reference AUT's dominant
    component for every method.
    """
    if config.kind != "antenna":
        raise ConfigError(f"expected an antenna config, got {config.kind!r}")
    workers = workers or config.effective_workers()
    items = [
        (r, config.seed, config.antenna, tuple(config.methods), config.solver, r == 0)
        for r in range(config.trials)
    ]
    log.info("antenna benchmark: %d realisations, %d workers", config.trials, workers)
    outputs = _map(_antenna_item, items, workers)
    records = [rec for recs, _, _ in outputs for rec in recs]
    result = AntennaResult(
        records,
        summarize_antenna(records, config.methods),
        [s for _, s, _ in outputs],
        outputs[0][2],
    )
    if out_dir is not None:
        write_antenna_outputs(result, config, out_dir)
    return result


def write_antenna_outputs(result: AntennaResult, config: ExperimentConfig, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_table(out / "trials.csv", ANTENNA_TRIAL_HEADER, (
        (r.trial, r.seed, r.method, format_db(r.epsilon_c), format_db(r.epsilon_m), r.iterations, r.flag)
        for r in result.records
    ))
    write_table(out / "summary.csv", ANTENNA_SUMMARY_HEADER, (
        (row["method"], row["realizations"], format_db(row["median_epsilon_c"]),
         format_db(row["median_epsilon_m"]), format_db(row["min_epsilon_m"]), format_db(row["max_epsilon_m"]))
        for row in result.summary
    ))
    write_table(out / "scenarios.csv", ("realization", "seed", "n", "m", "q", "condition"), (
        (s["realization"], s["seed"], s["n"], s["m"], s["q"], f"{s['condition']:.6e}")
        for s in result.scenarios
    ))
    write_table(out / "ff_cut.csv", FF_HEADER, (
        (method, f"{t:.4f}", format_db(mdb), f"{ph:.4f}", format_db(dev))
        for method, t, mdb, ph, dev in result.ff_cut
    ))
    write_table(out / "timings.csv", ("realization", "method", "wall_time"), (
        (r.trial, r.method, f"{r.wall_time:.6f}") for r in result.records
    ))
    _write_config(out, config)


# -- solve from files ------------------------------------------------------------------------

SOLVE_METHODS = ("linear-pc", "linear-pc-refined", "nonconvex-augmented", "nonconvex-incoherent")


@dataclass
class SolveOutcome:
    z: np.ndarray
    psi: np.ndarray | None
    iterations: int
    flags: list
    deviation: object = None  # DeviationReport when a reference was given


def solve_instance(
    A,
    data: MagnitudePhaseData,
    structure: CoherenceStructure,
    method: str,
    settings: NonconvexSettings | None = None,
) -> SolveOutcome:
    """In-memory counterpart of :func:`run_solve`.

    The nonconvex-augmented method derives its interferometric rows from the
    coherence groups (see :func:`augment_from_phase_data`).
    """
    settings = settings or NonconvexSettings()
    if method not in SOLVE_METHODS:
        raise ConfigError(f"method {method!r} not available for magnitude data; choose from {SOLVE_METHODS}")
    data.check(structure)
    if method in ("linear-pc", "linear-pc-refined"):
        problem = Problem(np.asarray(A, dtype=np.complex128), np.zeros(structure.m, complex),
                          structure, [], [], data=data)
        z, it, flags = run_method(method, problem, settings)
        return SolveOutcome(z, problem.cache["linear-pc"].psi, it, flags)
    if method == "nonconvex-augmented":
        A_aug, mags = augment_from_phase_data(A, data, structure)
    else:
        A_aug, mags = np.asarray(A, dtype=np.complex128), np.asarray(data.magnitudes)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with np.errstate(over="ignore", invalid="ignore"):
            z0 = spectral_initialize(A_aug, mags)
    if not np.all(np.isfinite(z0)):
        raise NumericalFailure("spectral initialisation overflowed")
    rep = solve_nonconvex(A_aug, mags, z0, settings)
    return SolveOutcome(rep.z, None, rep.iterations, [] if rep.converged else ["iteration-limit"])


def run_solve(
    operator,
    magnitudes,
    coherence,
    method: str = "linear-pc",
    reference=None,
    out_dir=None,
    settings: NonconvexSettings | None = None,
) -> SolveOutcome:
    """Solve an instance stored on disk.

    ``reference`` (optional) is the true complex field at the m samples; the
    deviation of ``A z`` from it is reported. Writes ``solution.csv`` (and
    ``psi.csv`` for linear methods) plus ``report.json`` to ``out_dir``.
    """
    A = read_matrix_csv(operator)
    data = read_measurements_csv(magnitudes)
    structure = read_coherence_json(coherence, A.shape[0])
    if data.m != A.shape[0]:
        raise DimensionError(f"{data.m} measurements for an operator with {A.shape[0]} rows")
    try:
        outcome = solve_instance(A, data, structure, method, settings)
    except CoherenceError as exc:
        raise ConfigError(str(exc)) from exc
    if not np.all(np.isfinite(outcome.z)):
        raise NumericalFailure("solution contains non-finite entries")
    if reference is not None:
        ref = read_vector_csv(reference)
        if ref.shape[0] != A.shape[0]:
            raise DimensionError(f"reference has {ref.shape[0]} entries, expected {A.shape[0]}")
        outcome.deviation = deviation_report(A @ outcome.z, ref)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_vector_csv(out / "solution.csv", outcome.z)
        if outcome.psi is not None:
            write_vector_csv(out / "psi.csv", outcome.psi)
        report = {"method": method, "n": int(A.shape[1]), "m": int(A.shape[0]),
                  "q": structure.q, "iterations": outcome.iterations, "flags": outcome.flags}
        if outcome.deviation is not None:
            report["epsilon_c"] = max(outcome.deviation.epsilon_c, DB_FLOOR)
            report["epsilon_m"] = max(outcome.deviation.epsilon_m, DB_FLOOR)
        (out / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    return outcome
