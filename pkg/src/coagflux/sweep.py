"""Truncation-convergence experiment: solve on a ladder of cutoffs, track
the defining moments, and classify existence vs non-existence.

The classifier watches the moment sum(alpha^(gamma+lam) n) +
sum(alpha^(-lam) n) across cutoff doublings: saturation signals an
existence-regime kernel, steady growth the non-existence regime.
"""

import concurrent.futures
import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .diagnostics import fit_exponent, flux_profile, moment
from .discrete import SourceSpec, TruncatedSystem
from .errors import ParameterError
from .kernels import Regime, classify_regime
from .steady import solve

CLASS_EXISTENCE = Regime.EXISTENCE.value
CLASS_NONEXISTENCE = Regime.NONEXISTENCE.value
CLASS_INCONCLUSIVE = "Inconclusive"

CSV_HEADER = "R_star,converged,residual,moment_def,moment_critical,slope,slope_stderr,flux_plateau,flux_dev"

ROWS_FILENAME = "sweep_rows.csv"
SUMMARY_FILENAME = "sweep_summary.json"


@dataclass(frozen=True)
class SweepThresholds:
    ratio_threshold: float = 1.05
    doublings_required: int = 3

    def __post_init__(self):
        if self.ratio_threshold <= 1.0:
            raise ParameterError("ratio_threshold must exceed 1")
        if self.doublings_required < 1:
            raise ParameterError("doublings_required must be >= 1")

    @property
    def existence_threshold(self):
        return 1.0 + (self.ratio_threshold - 1.0) / 2.0


@dataclass
class SweepConfig:
    kernel: object
    source: SourceSpec
    cutoffs: tuple
    tol: float = 1e-9
    fit_z_lo: float = 16.0
    solver: str = "fixed_point"
    thresholds: SweepThresholds = field(default_factory=SweepThresholds)

    def __post_init__(self):
        cutoffs = tuple(int(c) for c in self.cutoffs)
        if len(cutoffs) < 3:
            raise ParameterError("sweep needs at least 3 cutoffs")
        if any(b <= a for a, b in zip(cutoffs, cutoffs[1:])):
            raise ParameterError("cutoffs must be strictly ascending")
        if cutoffs[0] <= self.source.L_s:
            raise ParameterError("every cutoff must exceed the source support")
        if self.source.is_zero:
            raise ParameterError("sweep needs a nontrivial source")
        if self.tol <= 0.0:
            raise ParameterError("tol must be positive")
        self.cutoffs = cutoffs


@dataclass
class SweepRow:
    r_star: int
    converged: bool
    residual: float
    moment_def: float
    moment_critical: float
    slope: float
    slope_stderr: float
    flux_plateau: float
    flux_dev: float

    def __eq__(self, other):
        if not isinstance(other, SweepRow):
            return NotImplemented
        if (self.r_star, self.converged) != (other.r_star, other.converged):
            return False
        for name in (
            "residual",
            "moment_def",
            "moment_critical",
            "slope",
            "slope_stderr",
            "flux_plateau",
            "flux_dev",
        ):
            a, b = getattr(self, name), getattr(other, name)
            if a != b and not (math.isnan(a) and math.isnan(b)):
                return False
        return True


@dataclass
class SweepReport:
    kernel_name: str
    gamma: float
    lam: float
    rows: list
    classification: str
    analytic_prediction: str
    thresholds: SweepThresholds
    borderline: bool = False

    def __eq__(self, other):
        if not isinstance(other, SweepReport):
            return NotImplemented
        return (
            self.kernel_name == other.kernel_name
            and self.gamma == other.gamma
            and self.lam == other.lam
            and self.rows == other.rows
            and self.classification == other.classification
            and self.analytic_prediction == other.analytic_prediction
            and self.thresholds == other.thresholds
            and self.borderline == other.borderline
        )


def _compute_row(kernel, source, r_star, tol, fit_z_lo, solver):
    system = TruncatedSystem(kernel, source, r_star)
    result = solve(system, method=solver, tol=tol)
    n = result.state
    env = kernel.envelope
    m_def = moment(n, env.gamma + env.lam) + moment(n, -env.lam)
    m_crit = moment(n, (env.gamma + 1.0) / 2.0)
    prof = flux_profile(system, n)
    z_hi = r_star / 4.0
    if z_hi / fit_z_lo >= 8.0:
        fit = fit_exponent(n, fit_z_lo, z_hi)
        slope, stderr = fit.slope, fit.stderr
    else:
        slope, stderr = math.nan, math.nan
    return SweepRow(
        r_star=r_star,
        converged=result.converged,
        residual=result.residual_inf,
        moment_def=m_def,
        moment_critical=m_crit,
        slope=slope,
        slope_stderr=stderr,
        flux_plateau=prof.plateau_value,
        flux_dev=prof.plateau_deviation,
    )


def classify_from_rows(rows, thresholds):
    """Existence / NonExistence / Inconclusive from the moment ratios.

    Looks at the last `doublings_required` cutoff doublings: NonExistence if
    every ratio M(2R)/M(R) >= ratio_threshold, Existence if every ratio stays
    below the half-way mark 1 + (ratio_threshold - 1)/2, otherwise
    Inconclusive.  Any non-converged row in the window is Inconclusive.
    """
    rows = sorted(rows, key=lambda r: r.r_star)
    pairs = []
    for a, b in zip(rows, rows[1:]):
        if b.r_star == 2 * a.r_star:
            pairs.append((a, b))
    need = thresholds.doublings_required
    if len(pairs) < need:
        raise ParameterError(
            f"classification needs {need} successive cutoff doublings, found {len(pairs)}"
        )
    window = pairs[-need:]
    if any((not a.converged) or (not b.converged) for a, b in window):
        return CLASS_INCONCLUSIVE
    ratios = [b.moment_def / a.moment_def for a, b in window]
    if all(r >= thresholds.ratio_threshold for r in ratios):
        return CLASS_NONEXISTENCE
    if all(r <= thresholds.existence_threshold for r in ratios):
        return CLASS_EXISTENCE
    return CLASS_INCONCLUSIVE


def run_sweep(config, jobs=1):
    """One steady solve per cutoff, then classify the kernel's regime."""
    env = config.kernel.envelope
    args = [
        (config.kernel, config.source, r, config.tol, config.fit_z_lo, config.solver)
        for r in config.cutoffs
    ]
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_compute_row_star, args))
    else:
        rows = [_compute_row(*a) for a in args]
    rows.sort(key=lambda r: r.r_star)
    classification = classify_from_rows(rows, config.thresholds)
    analytic = classify_regime(env.gamma, env.lam).value
    return SweepReport(
        kernel_name=getattr(config.kernel, "name", "kernel"),
        gamma=env.gamma,
        lam=env.lam,
        rows=rows,
        classification=classification,
        analytic_prediction=analytic,
        thresholds=config.thresholds,
        borderline=abs(abs(env.exponent_sum) - 1.0) < 1e-12,
    )


def _compute_row_star(args):
    return _compute_row(*args)


def _fmt(x):
    return format(float(x), ".17g")


def persist(report, path):
    """Write the rows CSV and the summary JSON under `path` (a directory)."""
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        rows_path = out / ROWS_FILENAME
        with open(rows_path, "w", newline="", encoding="utf-8") as fh:
            fh.write(CSV_HEADER + "\n")
            writer = csv.writer(fh, lineterminator="\n")
            for r in report.rows:
                writer.writerow(
                    [
                        r.r_star,
                        int(r.converged),
                        _fmt(r.residual),
                        _fmt(r.moment_def),
                        _fmt(r.moment_critical),
                        _fmt(r.slope),
                        _fmt(r.slope_stderr),
                        _fmt(r.flux_plateau),
                        _fmt(r.flux_dev),
                    ]
                )
        summary = {
            "kernel": report.kernel_name,
            "gamma": report.gamma,
            "lambda": report.lam,
            "classification": report.classification,
            "analytic_prediction": report.analytic_prediction,
            "thresholds": {
                "ratio_threshold": report.thresholds.ratio_threshold,
                "doublings_required": report.thresholds.doublings_required,
            },
        }
        with open(out / SUMMARY_FILENAME, "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"writing sweep report under {out}: {exc}") from exc


def load_report(path):
    """Reconstruct a SweepReport written by persist()."""
    out = Path(path)
    try:
        with open(out / SUMMARY_FILENAME, encoding="utf-8") as fh:
            summary = json.load(fh)
        rows = []
        with open(out / ROWS_FILENAME, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if ",".join(header) != CSV_HEADER:
                raise ParameterError(f"unexpected sweep CSV header in {out}")
            for rec in reader:
                rows.append(
                    SweepRow(
                        r_star=int(rec[0]),
                        converged=bool(int(rec[1])),
                        residual=float(rec[2]),
                        moment_def=float(rec[3]),
                        moment_critical=float(rec[4]),
                        slope=float(rec[5]),
                        slope_stderr=float(rec[6]),
                        flux_plateau=float(rec[7]),
                        flux_dev=float(rec[8]),
                    )
                )
    except OSError as exc:
        raise OSError(f"reading sweep report under {out}: {exc}") from exc
    thresholds = SweepThresholds(
        ratio_threshold=summary["thresholds"]["ratio_threshold"],
        doublings_required=summary["thresholds"]["doublings_required"],
    )
    gamma = float(summary["gamma"])
    lam = float(summary["lambda"])
    return SweepReport(
        kernel_name=summary["kernel"],
        gamma=gamma,
        lam=lam,
        rows=rows,
        classification=summary["classification"],
        analytic_prediction=summary["analytic_prediction"],
        thresholds=thresholds,
        borderline=abs(abs(gamma + 2.0 * lam) - 1.0) < 1e-12,
    )
