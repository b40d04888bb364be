"""
.. module:: experiments
   :platform: Python
   :synopsis: One runner per experiment kind, and :func:`run`, which executes a config end to end.

Module `experiments` composes the ensemble, linear-algebra, density-of-states, localization and
local-statistics modules into the runs the CLI exposes. Every runner writes its tables into a
staging directory; :func:`run` adds ``summary.json`` and the manifest, renames the staging
directory onto the target and records the run. A failing run leaves no partial output behind.
"""

import logging
import os
import shutil
import time
from dataclasses import dataclass, replace
from functools import partial
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import polars as pl

from config.directory import results_directory, staging_directory
from config.experiment import ExperimentConfig
from utils.dos import (
    dos_convergence_gap,
    dos_histogram,
    dos_kde,
    dos_moments,
    dos_resolvent,
    dos_upper_bound,
    lids_estimate,
    moments_frame,
    refinement_stability,
    sample_matrices,
    sample_spectra,
    semicircle_moment,
    smoothness_probe,
)
from utils.ensemble import DensitySpec, EnsembleConfig, RngStream, sample_band_matrix
from utils.errors import InsufficientDecayRangeError, InvalidConfigError
from utils.harness.manifest import RunManifest
from utils.harness.parallel import ProcessMapper
from utils.harness.persistence import write_csv, write_json, write_jsonl
from utils.harness.run_registry import REGISTRY_NAME, RunRegistry
from utils.les import Window, block_dvj, intensity_pipeline, minami_gap_check, sample_realizations, stieltjes_intensity, wegner_minami_empirical
from utils.linalg import ComplexShift, check_duhamel, check_resolvent_integral, eigenvalues_banded, green_entry, random_normal_pair, schur_block_inverse
from utils.localization import (
    decay_fit,
    decay_profile,
    decoupling_lower_check,
    decoupling_upper_check,
    high_energy_shift,
    profiles_table,
    reduced_resolvent_decay,
    spectral_averaging_sup,
    volume_difference_decay,
)
from utils.mapping import Mapper
from utils.statistics import combined_stderr, jackknife_mean

logger = logging.getLogger(__name__)

SUMMARY_NAME = "summary.json"
REFINE_HALF_WIDTH = 0.5

ORACLE_STREAM = 2**32 + 1
DUHAMEL_STREAM = 2**32 + 2

EIGEN_TOLERANCE = 1e-10
GREEN_TOLERANCE = 1e-10
SCHUR_TOLERANCE = 1e-10
RESOLVENT_INTEGRAL_TOLERANCE = 1e-6
DUHAMEL_TOLERANCE = 1e-8


@dataclass(frozen=True)
class RunResult:
    directory: str
    files: Tuple[str, ...]
    summary: dict
    manifest: RunManifest
    run_id: Optional[int] = None


Runner = Callable[[ExperimentConfig, Mapper, str], Tuple[List[str], dict]]


def _grid(params: dict) -> np.ndarray:
    return np.linspace(params["E_min"], params["E_max"], params["E_points"])


def oracle_task(master_seed: int, max_order: int, max_L: int, index: int) -> np.ndarray:
    """
    Banded kernels against dense oracles on one random matrix.

    :return: ``[eigen error, green error, schur error, order, L]``; errors are scaled by ``1 + ||H||``,
        the column scale of the inverse and the block scale respectively.
    """
    stream = RngStream(master_seed, index, (ORACLE_STREAM,))
    u = stream.uniforms(6)
    n_half = int(u[0] * ((max_order - 1) // 2 + 1))
    big_l = int(u[1] * (min(max_L, 2 * n_half) + 1))
    H = sample_band_matrix(EnsembleConfig(n_half, big_l, DensitySpec.gaussian(), master_seed), index)
    dense = H.to_dense()
    order = H.order

    oracle = np.linalg.eigvalsh(dense)
    eigen_error = float(np.max(np.abs(eigenvalues_banded(H).eigenvalues - oracle))) / (1.0 + float(np.max(np.abs(oracle))))

    shift = ComplexShift(4.0 * u[2] - 2.0, 0.1 + 0.9 * u[3])
    inverse = np.linalg.inv(dense - shift.z * np.eye(order))
    j = int(u[4] * order) - n_half
    k = int(u[5] * order) - n_half
    reference = inverse[H.position(j), H.position(k)]
    column_scale = float(np.max(np.abs(inverse[:, H.position(k)])))
    green_error = abs(green_entry(H, shift, j, k) - reference) / column_scale

    size = min(3, order)
    P = np.argsort(stream.uniforms(order), kind="stable")[:size]
    block = schur_block_inverse(dense - shift.z * np.eye(order), P)
    expected = inverse[np.ix_(P, P)]
    schur_error = float(np.max(np.abs(block - expected))) / max(1.0, float(np.max(np.abs(expected))))
    return np.array([eigen_error, green_error, schur_error, order, big_l], dtype=float)


def duhamel_task(master_seed: int, size: int, t: float, s: float, index: int) -> np.ndarray:
    A, B = random_normal_pair(RngStream(master_seed, index, (DUHAMEL_STREAM,)), size)
    report = check_duhamel(A, B, t, s)
    return np.array([report.identity_residual, report.slack, float(report.bound_applicable)])


def run_identities(config: ExperimentConfig, mapper: Mapper, out_dir: str) -> Tuple[List[str], dict]:
    params, seed = config.params, config.master_seed
    oracle = np.stack(mapper(partial(oracle_task, seed, params["max_order"], params["max_L"]), params["matrices"]))
    duhamel = np.stack(mapper(partial(duhamel_task, seed, params["pair_size"], params["t"], params["s"]), params["pairs"]))

    small = min(config.ensemble.half_size, 8)
    H = sample_band_matrix(replace(config.ensemble, half_size=small, bandwidth_half=min(config.ensemble.bandwidth_half, 2 * small)), 0)
    integral = check_resolvent_integral(H.to_dense(), params["E"], params["eps"])

    rows = []
    for name, column, tolerance in (("eigen", 0, EIGEN_TOLERANCE), ("green", 1, GREEN_TOLERANCE), ("schur", 2, SCHUR_TOLERANCE)):
        rows += [(name, i, float(v), tolerance, bool(v <= tolerance)) for i, v in enumerate(oracle[:, column])]
    rows.append(("resolvent_integral", 0, integral.residual, RESOLVENT_INTEGRAL_TOLERANCE, integral.residual <= RESOLVENT_INTEGRAL_TOLERANCE))
    for i, (residual, slack, applicable) in enumerate(duhamel):
        rows.append(("duhamel_identity", i, float(residual), DUHAMEL_TOLERANCE, bool(residual <= DUHAMEL_TOLERANCE)))
        if applicable:
            rows.append(("duhamel_bound_slack", i, float(slack), 0.0, bool(slack >= -1e-12)))
    frame = pl.DataFrame(rows, schema=["check", "index", "value", "tolerance", "passed"], orient="row")
    files = [write_csv(frame, os.path.join(out_dir, "identities.csv"))]

    summary = {
        "max_eigen_error": float(oracle[:, 0].max(initial=0.0)),
        "max_green_error": float(oracle[:, 1].max(initial=0.0)),
        "max_schur_error": float(oracle[:, 2].max(initial=0.0)),
        "resolvent_integral_residual": integral.residual,
        "resolvent_integral_tail_bound": integral.tail_bound,
        "max_duhamel_residual": float(duhamel[:, 0].max(initial=0.0)),
        "min_duhamel_slack": float(duhamel[duhamel[:, 2] > 0, 1].min(initial=np.inf)),
        "all_passed": bool(frame["passed"].all()),
    }
    return files, summary


def _refinement_summary(spectra, center: float, step: float) -> dict:
    """
    First-derivative histogram estimates on bins of width ``step`` and ``step / 2`` around ``center``,
    compared where they overlap.
    """
    bins = int(round(2.0 * REFINE_HALF_WIDTH / step))
    if bins < 3:
        raise InvalidConfigError(f"refine_step={step} leaves fewer than three bins in the refinement window")
    lo, hi = center - 0.5 * bins * step, center + 0.5 * bins * step
    coarse = smoothness_probe(dos_histogram(spectra, np.linspace(lo, hi, bins + 1)), 1)
    fine = smoothness_probe(dos_histogram(spectra, np.linspace(lo, hi, 2 * bins + 1)), 1)
    report = refinement_stability(coarse, fine)
    logger.info("Bin refinement %g -> %g at E=%g: max z %.3g over %d points", step, step / 2, center, report.max_z, report.compared_points)
    return {
        "E": center,
        "coarse_step": step,
        "fine_step": step / 2,
        "stable": report.stable,
        "max_z": report.max_z,
        "compared_points": report.compared_points,
    }


def run_dos(config: ExperimentConfig, mapper: Mapper, out_dir: str) -> Tuple[List[str], dict]:
    params, ensemble = config.params, config.ensemble
    if params["refine_step"] < 0:
        raise InvalidConfigError(f"refine_step must be >= 0, got {params['refine_step']}")
    grid = _grid(params)
    spectra = sample_spectra(ensemble, params["samples"], mapper)
    files = []

    histogram = dos_histogram(spectra, (params["E_min"], params["E_max"]), params["bin_rule"])
    files.append(write_csv(histogram.to_frame(), os.path.join(out_dir, "dos_histogram.csv")))
    kde = dos_kde(spectra, grid)
    files.append(write_csv(kde.to_frame(), os.path.join(out_dir, "dos_kde.csv")))

    lids = [lids_estimate(spectra, E) for E in grid]
    lids_frame = pl.DataFrame({"E": grid, "lids": [v for v, _ in lids], "stderr": [e for _, e in lids]})
    files.append(write_csv(lids_frame, os.path.join(out_dir, "lids.csv")))

    moments = dos_moments(spectra, params["p_max"], bandwidth_half=ensemble.bandwidth_half)
    interior = []
    if ensemble.half_size > ensemble.bandwidth_half:
        interior = dos_moments(sample_matrices(ensemble, params["samples"], mapper), params["p_max"], interior=True)
    frame = moments_frame(moments + interior).with_columns(pl.Series("semicircle", [semicircle_moment(m.p) for m in moments + interior]))
    files.append(write_csv(frame, os.path.join(out_dir, "moments.csv")))

    smooth_source = kde
    summary = {
        "samples": params["samples"],
        "histogram_tail_mass": histogram.metadata["tail_mass"],
        "histogram_max": float(np.max(histogram.values)),
        "upper_bound": dos_upper_bound(ensemble.density.sup_norm, ensemble.bandwidth_half),
        "lids_at_0": lids_estimate(spectra, 0.0)[0],
    }
    if params["resolvent_samples"] > 0:
        resolvent = dos_resolvent(ensemble, grid, params["eps_ladder"], params["resolvent_samples"], params["variant"], mapper)
        files.append(write_csv(resolvent.to_frame(), os.path.join(out_dir, "dos_resolvent.csv")))
        files.append(write_json(resolvent.metadata, os.path.join(out_dir, "dos_resolvent_meta.json")))
        summary["resolvent_max"] = float(np.max(resolvent.values))
        smooth_source = resolvent

    derivatives = [smoothness_probe(smooth_source, order) for order in (1, 2, 3)]
    derivative_frame = pl.concat(
        pl.DataFrame({"order": [d.order] * len(d.energy_grid), "E": d.energy_grid, "derivative": d.derivative, "stderr": d.stderr})
        for d in derivatives
    )
    files.append(write_csv(derivative_frame, os.path.join(out_dir, "smoothness.csv")))
    summary["noise_dominated_orders"] = [d.order for d in derivatives if d.noise_dominated]

    if params["refine_step"] > 0:
        summary["refinement"] = _refinement_summary(spectra, params["refine_E"], params["refine_step"])

    if params["compare_N"] > 0:
        samples = params["resolvent_samples"] or params["samples"]
        gap = dos_convergence_gap(ensemble, ensemble.with_half_size(params["compare_N"]), grid, params["eps_ladder"], samples, mapper)
        summary["convergence_gap"] = {"gap": gap.gap, "stderr": gap.stderr, "at_energy": gap.at_energy, "N": gap.N, "N_prime": gap.N_prime}
    return files, summary


def _fit_summary(profile) -> Optional[dict]:
    try:
        fit = decay_fit(profile)
    except InsufficientDecayRangeError as e:
        logger.warning("No decay fit at z=%s: %s", profile.z.z, e)
        return None
    return {"alpha": fit.alpha, "alpha_ci": list(fit.alpha_ci), "log_C": fit.log_C, "r_squared": fit.r_squared, "distances": list(fit.distances_used)}


def run_locmoments(config: ExperimentConfig, mapper: Mapper, out_dir: str) -> Tuple[List[str], dict]:
    params, ensemble = config.params, config.ensemble
    shifts = [ComplexShift(params["E"], params["eps"])]
    if params["high_energy"]:
        shifts.append(ComplexShift(high_energy_shift(ensemble.bandwidth_half), params["eps"]))
    profiles = [
        decay_profile(ensemble, shift, params["s"], params["center"], params["max_distance"], params["samples"], mapper) for shift in shifts
    ]
    files = [write_csv(profiles_table(profiles), os.path.join(out_dir, "profiles.csv"))]
    summary = {"fits": [{"E": p.z.E, "eps": p.z.eps, "fit": _fit_summary(p)} for p in profiles]}

    if params["averaging_E"]:
        grid = [ComplexShift(E, params["averaging_eps"]) for E in params["averaging_E"]]
        averaging = spectral_averaging_sup(ensemble, params["s"], grid, params["samples"], params["center"], mapper)
        files.append(write_csv(averaging.to_frame(), os.path.join(out_dir, "spectral_averaging.csv")))
        summary["spectral_averaging"] = {"max_imaginary": averaging.max_imaginary, "bound": averaging.bound}
    return files, summary


def run_volume_diff(config: ExperimentConfig, mapper: Mapper, out_dir: str) -> Tuple[List[str], dict]:
    params, ensemble = config.params, config.ensemble
    shift = ComplexShift(params["E"], params["eps"])
    M_values = tuple(params["M_values"])
    if ensemble.half_size not in M_values:
        M_values += (ensemble.half_size,)
    report = volume_difference_decay(ensemble, M_values, params["j"], shift, params["s"], params["samples"], mapper)
    files = [write_csv(report.to_frame(), os.path.join(out_dir, "volume_difference.csv"))]
    control = next(r for r in report.rows if r.M == ensemble.half_size)
    summary = {
        "control_difference": control.green_difference,
        "fit": None if report.fit is None else {"slope": report.fit.slope, "slope_ci": list(report.fit.slope_ci), "intercept": report.fit.intercept},
    }

    if params["reduced_N_values"] and ensemble.bandwidth_half >= 1:
        j = params["j"]
        rows = []
        for n in params["reduced_N_values"]:
            moment = reduced_resolvent_decay(ensemble.with_half_size(n), j, j + 1, n, shift, params["reduced_s"], params["samples"], mapper)
            rows.append((n, moment.estimate, moment.stderr, moment.sample_count))
        frame = pl.DataFrame(rows, schema=["N", "estimate", "stderr", "n_samples"], orient="row")
        files.append(write_csv(frame, os.path.join(out_dir, "reduced_resolvent.csv")))
        summary["reduced_estimates"] = [r[1] for r in rows]
    elif params["reduced_N_values"]:
        logger.warning("Reduced-resolvent decay needs L >= 1; skipped")
    return files, summary


def run_les(config: ExperimentConfig, mapper: Mapper, out_dir: str) -> Tuple[List[str], dict]:
    params, ensemble = config.params, config.ensemble
    window = Window.centered(0.0, params["window_length"]) if params["window_length"] > 0 else None
    report = intensity_pipeline(
        ensemble,
        params["N_values"],
        params["E0"],
        window,
        params["samples"],
        params["intensity_samples"],
        params["eps_ladder"],
        mapper=mapper,
    )
    files = [write_csv(report.to_frame(), os.path.join(out_dir, "les_ladder.csv"))]
    for row, stats in zip(report.rows, report.statistics):
        files.append(write_csv(stats.to_frame(), os.path.join(out_dir, f"counts_N{row.N}.csv")))

    largest = ensemble.with_half_size(report.rows[-1].N)
    dvj, totals = block_dvj(largest, params["E0"], report.window, params["alpha"], params["samples"], mapper)
    block_mean, block_stderr = jackknife_mean(totals.astype(float))
    full = report.rows[-1]
    stieltjes, stieltjes_stderr = stieltjes_intensity(largest, params["E0"], params["intensity_samples"], mapper=mapper)
    summary = {
        "intensity": report.intensity,
        "intensity_stderr": report.intensity_stderr,
        "window": [report.window.a, report.window.b],
        "ladder": [{"N": r.N, **r.gof.to_dict()} for r in report.rows],
        "minami_gap": [minami_gap_check(s).holds for s in report.statistics],
        "blocks": {
            "N": full.N,
            "alpha": params["alpha"],
            "block_mean": block_mean,
            "full_mean": full.mean_count,
            "difference": abs(block_mean - full.mean_count),
            "combined_stderr": combined_stderr(block_stderr, full.mean_stderr),
            "negligibility": dvj.negligibility,
            "uniqueness": dvj.uniqueness,
            "dvj_intensity": dvj.intensity,
        },
        "stieltjes_intensity": {"value": stieltjes, "stderr": stieltjes_stderr},
    }

    if params["persist_points"]:
        for row in report.rows:
            realizations = sample_realizations(ensemble.with_half_size(row.N), params["E0"], report.window, params["samples"], mapper)
            files.append(write_jsonl((r.to_record() for r in realizations), os.path.join(out_dir, f"points_N{row.N}.jsonl")))
    return files, summary


def run_wegner_minami(config: ExperimentConfig, mapper: Mapper, out_dir: str) -> Tuple[List[str], dict]:
    params, ensemble = config.params, config.ensemble
    rows = []
    for length in params["lengths"]:
        interval = Window.centered(params["center"], length)
        r = wegner_minami_empirical(ensemble, interval, params["samples"], mapper)
        rows.append(
            {
                "length": length,
                "probability_nonempty": r.probability_nonempty,
                "mean_count": r.mean_count,
                "mean_stderr": r.mean_stderr,
                "wegner_bound": r.wegner_bound,
                "second_factorial": r.factorial_moments[1],
                "second_stderr": r.factorial_stderr[1],
                "minami_bound": r.minami_bound,
                "third_factorial": r.factorial_moments[2],
                "third_stderr": r.factorial_stderr[2],
                "generalized_bound": r.generalized_bounds[2],
                "fitted_constant": r.fitted_constant,
                "wegner_holds": r.wegner_holds(),
                "minami_holds": r.minami_holds(),
                "generalized_holds": r.generalized_holds(),
                "markov_holds": r.markov_holds(),
            }
        )
    frame = pl.DataFrame(rows)
    files = [write_csv(frame, os.path.join(out_dir, "wegner_minami.csv"))]
    flags = ("wegner_holds", "minami_holds", "generalized_holds", "markov_holds")
    return files, {name: bool(frame[name].all()) for name in flags}


def run_decoupling(config: ExperimentConfig, mapper: Mapper, out_dir: str) -> Tuple[List[str], dict]:
    params, density = config.params, config.ensemble.density
    files, lower = [], []
    for s in params["s_values"]:
        report = decoupling_lower_check(density, s, params["eta_grid"], params["beta_grid"])
        files.append(write_csv(report.to_frame(), os.path.join(out_dir, f"lower_s{s:g}.csv")))
        lo, hi = report.c_over_eta_range()
        lower.append({"s": s, "min_ratio": report.min_ratio, "c_over_eta_min": lo, "c_over_eta_max": hi})
    upper = decoupling_upper_check(density, params["upper_s"], params["gamma"] or None)
    files.append(write_csv(upper.to_frame(), os.path.join(out_dir, "upper.csv")))
    return files, {"lower": lower, "upper": {"s": upper.s, "gamma": upper.gamma, "max_ratio": upper.max_ratio, "variation": upper.variation}}


EXPERIMENTS: Dict[str, Runner] = {
    "identities": run_identities,
    "dos": run_dos,
    "locmoments": run_locmoments,
    "volume-diff": run_volume_diff,
    "les": run_les,
    "wegner-minami": run_wegner_minami,
    "decoupling": run_decoupling,
}


def run(config: ExperimentConfig, mapper: Optional[Mapper] = None, register: bool = True) -> RunResult:
    """
    Execute the experiment named by ``config.kind``.

    :param config: Validated experiment config.
    :param mapper: Per-sample mapper; a :class:`ProcessMapper` with ``config.workers`` by default.
    :param register: Record the run in ``runs.db`` next to the output directory.
    :return: Output directory, result files (relative), summary and manifest.
    :raises TaskFailedError: When a worker task fails; nothing is written in that case.
    """
    mapper = mapper or ProcessMapper(config.workers)
    target = results_directory(config.kind, config.out)
    staging = staging_directory(target)
    logger.info("Running %s (seed %d, %d workers) into %s", config.kind, config.master_seed, config.workers, target)
    started = time.perf_counter()
    try:
        files, summary = EXPERIMENTS[config.kind](config, mapper, staging)
        files.append(write_json(summary, os.path.join(staging, SUMMARY_NAME)))
        manifest = RunManifest.build(config.to_dict(), config.master_seed, files, staging, time.perf_counter() - started, config.workers)
        manifest.write(staging)
    except BaseException:
        logger.error("Run %s failed; discarding partial results in %s", config.kind, staging)
        shutil.rmtree(staging, ignore_errors=True)
        raise
    if os.path.isdir(target):
        shutil.rmtree(target)
    os.replace(staging, target)

    run_id = None
    if register:
        registry = RunRegistry(os.path.join(os.path.dirname(target), REGISTRY_NAME))
        run_id = registry.record(config.kind, manifest, os.path.join(target, "manifest.json"))
    logger.info("Finished %s in %.1fs: %d files", config.kind, manifest.wall_clock_seconds, len(manifest.checksums))
    return RunResult(target, tuple(sorted(manifest.checksums)), summary, manifest, run_id)
