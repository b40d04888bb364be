"""
.. module:: acceptance
   :platform: Python
   :synopsis: The acceptance suite: eleven property checks over the whole lab.

Every criterion is a function of the master seed, a sample-count ``scale`` and a mapper. It writes
its tables under ``criterion_XX/`` and returns a :class:`CriterionResult`. ``scale = 1`` runs the
full sample counts; smaller values give quick smoke runs whose statistical thresholds may not hold.
The determinism criterion re-runs the cheap criteria with a different worker count and compares
file checksums.
"""

import logging
import math
import os
import shutil
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
import polars as pl

from config.defaults import param_defaults
from config.directory import staging_directory
from config.experiment import ExperimentConfig
from utils.dos import dos_convergence_gap, dos_histogram, dos_moments, lids_estimate, moments_frame, sample_matrices, sample_spectra
from utils.ensemble import DensitySpec, EnsembleConfig, density_eval
from utils.errors import InsufficientDecayRangeError, InvalidConfigError
from utils.harness.experiments import run_decoupling, run_identities
from utils.harness.manifest import RunManifest
from utils.harness.parallel import ProcessMapper
from utils.harness.persistence import checksums, write_csv, write_json
from utils.les import Window, block_dvj, count_statistics, intensity_pipeline, poisson_gof, sample_realizations, wegner_minami_empirical
from utils.linalg import ComplexShift
from utils.localization import decay_fit, decay_profile, profiles_table, volume_difference_decay
from utils.mapping import Mapper
from utils.statistics import combined_stderr, jackknife_mean

logger = logging.getLogger(__name__)

DETERMINISM_CRITERIA = (1, 2, 7, 10)


@dataclass(frozen=True)
class CriterionResult:
    number: int
    title: str
    passed: bool
    details: dict = field(default_factory=dict)
    files: Tuple[str, ...] = ()


@dataclass(frozen=True)
class AcceptanceReport:
    results: Tuple[CriterionResult, ...]
    directory: str

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def failed(self) -> Tuple[int, ...]:
        return tuple(r.number for r in self.results if not r.passed)

    def to_frame(self) -> pl.DataFrame:
        return pl.DataFrame(
            {
                "criterion": [r.number for r in self.results],
                "title": [r.title for r in self.results],
                "passed": [r.passed for r in self.results],
            }
        )


def scaled(count: int, scale: float, minimum: int) -> int:
    return max(minimum, int(round(count * scale)))


def _gaussian(N: int, L: int, seed: int) -> EnsembleConfig:
    return EnsembleConfig(N, L, DensitySpec.gaussian(), seed)


def _identities_config(seed: int, scale: float) -> ExperimentConfig:
    params = param_defaults("identities")
    params.update(matrices=scaled(200, scale, 20), pairs=scaled(100, scale, 10))
    return ExperimentConfig("identities", _gaussian(8, 2, seed), params)


def criterion_kernels(seed: int, scale: float, mapper: Mapper, out_dir: str) -> CriterionResult:
    files, summary = run_identities(_identities_config(seed, scale), mapper, out_dir)
    passed = summary["max_eigen_error"] <= 1e-10 and summary["max_green_error"] <= 1e-10 and summary["max_schur_error"] <= 1e-10
    details = {k: summary[k] for k in ("max_eigen_error", "max_green_error", "max_schur_error")}
    return CriterionResult(1, "banded kernels match dense oracles", passed, details, tuple(files))


def criterion_identities(seed: int, scale: float, mapper: Mapper, out_dir: str) -> CriterionResult:
    files, summary = run_identities(_identities_config(seed, scale), mapper, out_dir)
    passed = (
        summary["resolvent_integral_residual"] <= 1e-6
        and summary["max_duhamel_residual"] <= 1e-8
        and not summary["min_duhamel_slack"] < -1e-12
    )
    details = {k: summary[k] for k in ("resolvent_integral_residual", "max_duhamel_residual", "min_duhamel_slack")}
    return CriterionResult(2, "resolvent integral and Duhamel identities", passed, details, tuple(files))


def criterion_diagonal_baseline(seed: int, scale: float, mapper: Mapper, out_dir: str) -> CriterionResult:
    config = _gaussian(500, 0, seed)
    spec = config.density
    spectra = sample_spectra(config, scaled(1000, scale, 100), mapper)
    histogram = dos_histogram(spectra, np.linspace(-4.0, 4.0, 81))
    distance = float(np.max(np.abs(histogram.values - density_eval(spec, histogram.energy_grid))))
    lids, lids_stderr = lids_estimate(spectra, 0.0)

    window = Window.centered(0.0, 1.0)
    stats = count_statistics(sample_realizations(config, 0.0, window, scaled(20000, scale, 1000), mapper))
    gof = poisson_gof(stats, density_eval(spec, 0.0))
    files = [
        write_csv(histogram.to_frame(), os.path.join(out_dir, "histogram.csv")),
        write_csv(stats.to_frame(), os.path.join(out_dir, "counts.csv")),
    ]
    passed = distance <= 0.01 and abs(lids - 0.5) <= 3.0 * lids_stderr and gof.tv_distance <= 0.02
    details = {"sup_distance": distance, "lids": lids, "lids_stderr": lids_stderr, "tv_distance": gof.tv_distance}
    return CriterionResult(3, "L=0 analytic baseline", passed, details, tuple(files))


def criterion_wegner_minami(seed: int, scale: float, mapper: Mapper, out_dir: str) -> CriterionResult:
    rows = []
    for big_l in (1, 2):
        for length in (0.005, 0.01, 0.02):
            r = wegner_minami_empirical(_gaussian(50, big_l, seed), Window.centered(0.0, length), scaled(10000, scale, 1000), mapper)
            rows.append(
                {
                    "L": big_l,
                    "length": length,
                    "mean_count": r.mean_count,
                    "wegner_bound": r.wegner_bound,
                    "second_factorial": r.factorial_moments[1],
                    "minami_bound": r.minami_bound,
                    "third_factorial": r.factorial_moments[2],
                    "generalized_bound": r.generalized_bounds[2],
                    "holds": r.wegner_holds() and r.minami_holds() and r.generalized_holds(),
                }
            )
    frame = pl.DataFrame(rows)
    files = (write_csv(frame, os.path.join(out_dir, "wegner_minami.csv")),)
    return CriterionResult(4, "Wegner and Minami bounds", bool(frame["holds"].all()), {"rows": len(rows)}, files)


def criterion_localization(seed: int, scale: float, mapper: Mapper, out_dir: str) -> CriterionResult:
    config = _gaussian(200, 1, seed)
    samples = scaled(10000, scale, 100)
    profiles = [decay_profile(config, ComplexShift(E, 0.0), 0.1, 0, 30, samples, mapper) for E in (0.0, 10.0)]
    files = (write_csv(profiles_table(profiles), os.path.join(out_dir, "profiles.csv")),)
    try:
        center, high = (decay_fit(p) for p in profiles)
    except InsufficientDecayRangeError as e:
        return CriterionResult(5, "fractional-moment decay", False, {"error": str(e)}, files)
    passed = center.decay_detected and center.r_squared >= 0.9 and high.alpha_ci[1] >= center.alpha
    details = {"alpha": center.alpha, "alpha_ci": list(center.alpha_ci), "r_squared": center.r_squared, "alpha_high": high.alpha}
    return CriterionResult(5, "fractional-moment decay", passed, details, files)


def criterion_volume_difference(seed: int, scale: float, mapper: Mapper, out_dir: str) -> CriterionResult:
    report = volume_difference_decay(_gaussian(80, 1, seed), (10, 20, 40, 80), 0, ComplexShift(0.0, 1.0), 0.1, scaled(10000, scale, 100), mapper)
    files = (write_csv(report.to_frame(), os.path.join(out_dir, "volume_difference.csv")),)
    estimates = [r.green_difference for r in report.rows if r.M < 80]
    control = next(r.green_difference for r in report.rows if r.M == 80)
    decreasing = all(b < a for a, b in zip(estimates, estimates[1:]))
    fit_ok = report.fit is not None and report.fit.slope < 0 and report.fit.slope_ci[1] < 0
    details = {"estimates": estimates, "control": control, "slope": None if report.fit is None else report.fit.slope}
    return CriterionResult(6, "finite-volume differences decay", decreasing and fit_ok and control == 0.0, details, files)


def criterion_semicircle_moments(seed: int, scale: float, mapper: Mapper, out_dir: str) -> CriterionResult:
    samples = scaled(400, scale, 100)
    moments = []
    for big_l in (1, 2, 4, 8):
        moments.extend(dos_moments(sample_matrices(_gaussian(400, big_l, seed), samples, mapper), 4, interior=True))
    files = (write_csv(moments_frame(moments), os.path.join(out_dir, "moments.csv")),)
    by_l: Dict[int, Dict[int, object]] = {}
    for m in moments:
        by_l.setdefault(m.L, {})[m.p] = m
    second_ok = all(abs(by_l[big_l][2].value - 1.0) <= 3.0 * by_l[big_l][2].stderr for big_l in by_l)
    odd_ok = all(abs(by_l[big_l][p].value) <= 3.0 * by_l[big_l][p].stderr for big_l in by_l for p in (1, 3))
    fourth = [by_l[big_l][4] for big_l in sorted(by_l)]
    fourth_ok = all(
        abs(b.value - 2.0) <= abs(a.value - 2.0) + 3.0 * combined_stderr(a.stderr, b.stderr) for a, b in zip(fourth, fourth[1:])
    )
    details = {"fourth_moments": [m.value for m in fourth], "second_ok": second_ok, "odd_ok": odd_ok, "fourth_ok": fourth_ok}
    return CriterionResult(7, "interior moments approach the semicircle", second_ok and odd_ok and fourth_ok, details, files)


def criterion_dos_convergence(seed: int, scale: float, mapper: Mapper, out_dir: str) -> CriterionResult:
    grid = np.linspace(-2.0, 2.0, 21)
    samples = scaled(1000, scale, 100)
    first = dos_convergence_gap(_gaussian(100, 1, seed), _gaussian(200, 1, seed), grid, sample_count=samples, mapper=mapper)
    second = dos_convergence_gap(_gaussian(200, 1, seed), _gaussian(400, 1, seed), grid, sample_count=samples, mapper=mapper)
    frame = pl.DataFrame(
        {"N": [first.N, second.N], "N_prime": [first.N_prime, second.N_prime], "gap": [first.gap, second.gap], "stderr": [first.stderr, second.stderr]}
    )
    files = (write_csv(frame, os.path.join(out_dir, "gaps.csv")),)
    passed = second.gap <= first.gap + 3.0 * combined_stderr(first.stderr, second.stderr)
    return CriterionResult(8, "density-of-states convergence", passed, {"gaps": [first.gap, second.gap]}, files)


def criterion_poisson_limit(seed: int, scale: float, mapper: Mapper, out_dir: str) -> CriterionResult:
    config = _gaussian(200, 1, seed)
    realizations = scaled(20000, scale, 1000)
    report = intensity_pipeline(config, (200, 800, 3200), 0.0, None, realizations, scaled(2000, scale, 100), mapper=mapper)
    files = [write_csv(report.to_frame(), os.path.join(out_dir, "ladder.csv"))]
    tv = [r.gof.tv_distance for r in report.rows]
    # sampling noise of a TV distance over a few count cells
    slack = 1.0 / math.sqrt(realizations)
    monotone = all(b <= a + slack for a, b in zip(tv, tv[1:]))
    last = report.rows[-1].gof

    block_row = next(r for r in report.rows if r.N == 800)
    _, totals = block_dvj(config.with_half_size(800), 0.0, report.window, 0.5, realizations, mapper)
    block_mean, block_stderr = jackknife_mean(totals.astype(float))
    block_ok = abs(block_mean - block_row.mean_count) <= 3.0 * combined_stderr(block_stderr, block_row.mean_stderr)

    passed = monotone and tv[-1] <= 0.05 and last.ks_distance <= 0.05 and block_ok
    details = {"tv": tv, "ks_distance": last.ks_distance, "block_mean": block_mean, "full_mean": block_row.mean_count, "intensity": report.intensity}
    return CriterionResult(9, "Poisson limit of local statistics", passed, details, tuple(files))


def criterion_decoupling(seed: int, scale: float, mapper: Mapper, out_dir: str) -> CriterionResult:
    config = ExperimentConfig("decoupling", _gaussian(1, 0, seed), param_defaults("decoupling"))
    files, summary = run_decoupling(config, mapper, out_dir)
    lower_ok = all(0.8 <= row["c_over_eta_min"] and row["c_over_eta_max"] <= 1.2 for row in summary["lower"])
    upper = summary["upper"]
    upper_ok = math.isfinite(upper["max_ratio"]) and upper["variation"] < 2.0
    return CriterionResult(10, "decoupling inequalities", lower_ok and upper_ok, summary, tuple(files))


CRITERIA: Dict[int, Callable[[int, float, Mapper, str], CriterionResult]] = {
    1: criterion_kernels,
    2: criterion_identities,
    3: criterion_diagonal_baseline,
    4: criterion_wegner_minami,
    5: criterion_localization,
    6: criterion_volume_difference,
    7: criterion_semicircle_moments,
    8: criterion_dos_convergence,
    9: criterion_poisson_limit,
    10: criterion_decoupling,
}


def _criterion_dir(root: str, number: int) -> str:
    path = os.path.join(root, f"criterion_{number:02d}")
    os.makedirs(path, exist_ok=True)
    return path


def criterion_determinism(seed: int, scale: float, workers: int, reference: Dict[int, CriterionResult], root: str) -> CriterionResult:
    """
    Re-run ``DETERMINISM_CRITERIA`` with another worker count and compare checksums file by file.
    """
    other = 1 if workers > 1 else 2
    scratch = os.path.join(root, ".determinism")
    mismatches = []
    try:
        for number in DETERMINISM_CRITERIA:
            if number not in reference:
                continue
            first_dir = _criterion_dir(root, number)
            second_dir = _criterion_dir(scratch, number)
            rerun = CRITERIA[number](seed, scale, ProcessMapper(other), second_dir)
            first = checksums(reference[number].files, first_dir)
            second = checksums(rerun.files, second_dir)
            if first != second:
                mismatches.append(number)
    finally:
        shutil.rmtree(scratch, ignore_errors=True)
    details = {"worker_counts": [workers, other], "mismatched_criteria": mismatches}
    return CriterionResult(11, "determinism across worker counts", not mismatches, details)


def run_acceptance(
    seed: int, out_dir: str, workers: int = 1, scale: float = 1.0, only: Optional[Sequence[int]] = None
) -> AcceptanceReport:
    """
    Run the acceptance criteria into ``out_dir`` (replaced on success).

    :param seed: Master seed.
    :param out_dir: Output directory.
    :param workers: Worker processes.
    :param scale: Sample-count multiplier in ``(0, 1]``.
    :param only: Criterion numbers to run; all eleven by default.
    """
    selected = sorted(set(only or range(1, 12)))
    if not 0.0 < scale <= 1.0:
        raise InvalidConfigError(f"scale must lie in (0, 1], got {scale}")
    if any(not 1 <= n <= 11 for n in selected):
        raise InvalidConfigError(f"criteria are numbered 1 to 11, got {selected}")
    mapper = ProcessMapper(workers)
    staging = staging_directory(out_dir)
    started = time.perf_counter()
    results: Dict[int, CriterionResult] = {}
    try:
        for number in selected:
            if number == 11:
                continue
            criterion_started = time.perf_counter()
            result = CRITERIA[number](seed, scale, mapper, _criterion_dir(staging, number))
            results[number] = result
            logger.info(
                "Criterion %d (%s): %s in %.1fs", number, result.title, "PASS" if result.passed else "FAIL", time.perf_counter() - criterion_started
            )
        if 11 in selected:
            results[11] = criterion_determinism(seed, scale, workers, results, staging)
            logger.info("Criterion 11: %s", "PASS" if results[11].passed else "FAIL")

        report = AcceptanceReport(tuple(results[n] for n in sorted(results)), os.path.abspath(out_dir))
        files = [f for r in report.results for f in r.files]
        files.append(write_csv(report.to_frame(), os.path.join(staging, "acceptance.csv")))
        files.append(write_json({str(r.number): r.details for r in report.results}, os.path.join(staging, "acceptance.json")))
        config = {"kind": "all-acceptance", "seed": seed, "scale": scale, "criteria": selected}
        RunManifest.build(config, seed, files, staging, time.perf_counter() - started, workers).write(staging)
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    if os.path.isdir(out_dir):
        shutil.rmtree(out_dir)
    os.replace(staging, out_dir)
    return report
