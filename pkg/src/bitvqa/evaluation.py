"""Comparison protocol: source-aware k-fold cross-validation with the
PCC / RMSE / outlier-ratio metric triplet.

Folds partition the dataset with sizes differing by at most one, and
sequences sharing a source are spread across distinct folds. Per-fold
metrics are averaged arithmetically into the aggregate; a fold where the
Pearson correlation is undefined (zero variance, or fewer than two rows) is
omitted from the PCC average with a warning, never silently reported as 0.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Optional, Sequence

import numpy as np

from .errors import FittingError, PredictionDomainError, UndefinedMetricError
from .features import SubjectiveRecord
from .fitting import Dataset, FitResult, fit
from .models import CoefficientSet, PREDICTORS

DEFAULT_FOLDS = 5
DEFAULT_OUTLIER_THRESHOLD = 0.25


def pcc(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation coefficient."""
    if len(x) != len(y):
        raise UndefinedMetricError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise UndefinedMetricError("PCC needs at least two points")
    ax = np.asarray(x, dtype=float)
    ay = np.asarray(y, dtype=float)
    dx = ax - ax.mean()
    dy = ay - ay.mean()
    sx = float(np.sqrt(np.sum(dx * dx)))
    sy = float(np.sqrt(np.sum(dy * dy)))
    if sx == 0.0 or sy == 0.0:
        raise UndefinedMetricError("PCC undefined: zero variance")
    return float(np.sum(dx * dy) / (sx * sy))


def rmse(x: Sequence[float], y: Sequence[float]) -> float:
    """Root mean square error."""
    if len(x) != len(y):
        raise UndefinedMetricError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) == 0:
        raise UndefinedMetricError("RMSE needs at least one point")
    ax = np.asarray(x, dtype=float)
    ay = np.asarray(y, dtype=float)
    return float(np.sqrt(np.mean((ax - ay) ** 2)))


def outlier_ratio(subjective: Sequence[SubjectiveRecord], predicted: Sequence[float],
                  fallback_threshold: float = DEFAULT_OUTLIER_THRESHOLD) -> float:
    """Fraction of sequences whose absolute error exceeds the per-sequence
    95% CI half-width (strictly), or ``fallback_threshold`` when no CI is
    recorded for that sequence."""
    if len(subjective) != len(predicted):
        raise UndefinedMetricError(f"length mismatch: {len(subjective)} vs {len(predicted)}")
    if not subjective:
        raise UndefinedMetricError("outlier ratio needs at least one point")
    outliers = 0
    for record, value in zip(subjective, predicted):
        threshold = record.ci95_halfwidth if record.ci95_halfwidth is not None else fallback_threshold
        if abs(record.mos - value) > threshold:
            outliers += 1
    return outliers / len(subjective)


@dataclass(frozen=True)
class FoldPlan:
    """Assignment of every sequence to one of k folds."""

    k: int
    assignments: dict[str, int]
    seed: int

    def fold_ids(self, fold: int) -> list[str]:
        return [seq for seq, f in self.assignments.items() if f == fold]

    def to_json_dict(self) -> dict:
        return {"k": self.k, "seed": self.seed, "assignments": dict(sorted(self.assignments.items()))}


def make_folds(dataset: Dataset, k: int = DEFAULT_FOLDS, seed: int = 0) -> FoldPlan:
    """Randomly partition sequences into k balanced folds, spreading
    same-source sequences across distinct folds (least-loaded first)."""
    n = len(dataset)
    if k < 2:
        raise FittingError(f"k must be >= 2, got {k}")
    if k > n:
        raise FittingError(f"k={k} exceeds dataset size {n}")

    rng = np.random.default_rng(seed)
    groups: dict[str, list[str]] = {}
    for row in dataset:
        groups.setdefault(row.subjective.source_id, []).append(row.sequence_id)

    group_names = sorted(groups)
    rng.shuffle(group_names)

    loads = [0] * k
    assignments: dict[str, int] = {}
    for name in group_names:
        members = sorted(groups[name])
        rng.shuffle(members)
        # hand out each k-sized chunk to the currently least-loaded folds,
        # so same-source sequences land in distinct folds until all k are used
        for chunk_start in range(0, len(members), k):
            chunk = members[chunk_start:chunk_start + k]
            order = sorted(range(k), key=lambda f: (loads[f], f))
            for sequence_id, fold in zip(chunk, order):
                assignments[sequence_id] = fold
                loads[fold] += 1

    return FoldPlan(k=k, assignments=assignments, seed=seed)


@dataclass(frozen=True)
class FoldMetrics:
    fold: int
    pcc: Optional[float]
    rmse: float
    outlier_ratio: float
    fitted_coefficients: CoefficientSet

    def to_json_dict(self) -> dict:
        return {
            "fold": self.fold,
            "pcc": self.pcc,
            "rmse": self.rmse,
            "outlier_ratio": self.outlier_ratio,
            "fitted_coefficients": self.fitted_coefficients.to_json_dict(),
        }


@dataclass(frozen=True)
class Residual:
    sequence_id: str
    mos: float
    predicted: float  # NaN when the fitted model errored on this row
    fold: int


@dataclass(frozen=True)
class EvalReport:
    model_id: str
    fold_plan: FoldPlan
    per_fold: tuple[FoldMetrics, ...]
    aggregate_pcc: Optional[float]
    aggregate_rmse: float
    aggregate_outlier_ratio: float
    residuals: tuple[Residual, ...] = field(repr=False)

    def to_json_dict(self) -> dict:
        return {
            "model": self.model_id,
            "k": self.fold_plan.k,
            "seed": self.fold_plan.seed,
            "fold_assignments": dict(sorted(self.fold_plan.assignments.items())),
            "per_fold": [m.to_json_dict() for m in self.per_fold],
            "aggregate": {
                "pcc": self.aggregate_pcc,
                "rmse": self.aggregate_rmse,
                "outlier_ratio": self.aggregate_outlier_ratio,
            },
            "residuals": [
                {
                    "sequence_id": r.sequence_id,
                    "mos": r.mos,
                    "predicted": None if math.isnan(r.predicted) else r.predicted,
                    "fold": r.fold,
                }
                for r in self.residuals
            ],
        }


def _mean(values: list[float]) -> float:
    return sum(values) / len(values)


def cross_validate(model_id: str, dataset: Dataset, k: int = DEFAULT_FOLDS,
                   seed: int = 0, init: Optional[CoefficientSet] = None,
                   fold_plan: Optional[FoldPlan] = None,
                   fallback_threshold: float = DEFAULT_OUTLIER_THRESHOLD,
                   **fit_kwargs) -> EvalReport:
    """Fit on k-1 folds, score on the held-out fold, k times.

    Metrics are computed on held-out rows only; every sequence appears in
    the residual list exactly once. A held-out row whose prediction raises a
    domain error is recorded with NaN and excluded from that fold's metrics
    (with a warning).
    """
    if model_id not in PREDICTORS:
        raise FittingError(f"unknown model id {model_id!r}; known ids: {', '.join(PREDICTORS)}")
    plan = fold_plan if fold_plan is not None else make_folds(dataset, k=k, seed=seed)
    rows_by_id = {row.sequence_id: row for row in dataset}
    if set(plan.assignments) != set(rows_by_id):
        raise FittingError("fold plan does not cover exactly the dataset's sequence ids")

    predictor = PREDICTORS[model_id]
    per_fold: list[FoldMetrics] = []
    residual_rows: list[Residual] = []
    for fold in range(plan.k):
        held_out_ids = sorted(plan.fold_ids(fold))
        train_rows = tuple(row for row in dataset if plan.assignments[row.sequence_id] != fold)
        test_rows = [rows_by_id[sid] for sid in held_out_ids]
        result: FitResult = fit(model_id, Dataset(train_rows), init=init, seed=seed, **fit_kwargs)

        mos_values: list[float] = []
        predicted: list[float] = []
        records: list[SubjectiveRecord] = []
        for row in test_rows:
            try:
                value = predictor(row.features, row.display, result.coefficients).mos
            except (PredictionDomainError, ValueError, ZeroDivisionError, OverflowError):
                warnings.warn(f"{model_id}: prediction failed on held-out row "
                              f"{row.sequence_id!r}; excluded from fold {fold} metrics",
                              stacklevel=2)
                residual_rows.append(Residual(row.sequence_id, row.subjective.mos,
                                              float("nan"), fold))
                continue
            mos_values.append(row.subjective.mos)
            predicted.append(value)
            records.append(row.subjective)
            residual_rows.append(Residual(row.sequence_id, row.subjective.mos, value, fold))

        try:
            fold_pcc: Optional[float] = pcc(mos_values, predicted)
        except UndefinedMetricError as exc:
            warnings.warn(f"{model_id}: PCC omitted for fold {fold}: {exc}", stacklevel=2)
            fold_pcc = None
        per_fold.append(FoldMetrics(
            fold=fold,
            pcc=fold_pcc,
            rmse=rmse(mos_values, predicted),
            outlier_ratio=outlier_ratio(records, predicted, fallback_threshold),
            fitted_coefficients=result.coefficients,
        ))

    pcc_values = [m.pcc for m in per_fold if m.pcc is not None]
    return EvalReport(
        model_id=model_id,
        fold_plan=plan,
        per_fold=tuple(per_fold),
        aggregate_pcc=_mean(pcc_values) if pcc_values else None,
        aggregate_rmse=_mean([m.rmse for m in per_fold]),
        aggregate_outlier_ratio=_mean([m.outlier_ratio for m in per_fold]),
        residuals=tuple(residual_rows),
    )


def compare_models(model_ids: Sequence[str], dataset: Dataset, k: int = DEFAULT_FOLDS,
                   seed: int = 0, inits: Optional[dict[str, CoefficientSet]] = None,
                   **fit_kwargs) -> list[EvalReport]:
    """Cross-validate several models on ONE shared fold plan; reports come
    back ordered by descending aggregate PCC (undefined PCC ranks last)."""
    for model_id in model_ids:
        if model_id not in PREDICTORS:
            raise FittingError(f"unknown model id {model_id!r}; known ids: "
                               f"{', '.join(PREDICTORS)}")
    plan = make_folds(dataset, k=k, seed=seed)
    reports = [
        cross_validate(model_id, dataset, seed=seed,
                       init=None if inits is None else inits.get(model_id),
                       fold_plan=plan, **fit_kwargs)
        for model_id in model_ids
    ]
    reports.sort(key=lambda r: (r.aggregate_pcc is None,
                                -(r.aggregate_pcc if r.aggregate_pcc is not None else 0.0)))
    return reports


def write_comparison_csv(target: Path | str | IO[str], reports: Sequence[EvalReport],
                         comment: str | None = None) -> None:
    """Model/PCC/RMSE/OR summary table (one row per model)."""

    def _write(fh: IO[str]) -> None:
        if comment:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["model", "pcc", "rmse", "outlier_ratio"])
        for report in reports:
            writer.writerow([
                report.model_id,
                "" if report.aggregate_pcc is None else repr(report.aggregate_pcc),
                repr(report.aggregate_rmse),
                repr(report.aggregate_outlier_ratio),
            ])

    if isinstance(target, (str, Path)):
        with open(target, "w", newline="") as fh:
            _write(fh)
    else:
        _write(target)


def write_residuals_csv(target: Path | str | IO[str], reports: Sequence[EvalReport],
                        comment: str | None = None) -> None:
    """Per-sequence scatter data (gnuplot-ready; ``#`` comment header)."""

    def _write(fh: IO[str]) -> None:
        if comment:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["model", "sequence_id", "mos", "predicted", "fold"])
        for report in reports:
            for r in report.residuals:
                writer.writerow([
                    report.model_id, r.sequence_id, repr(r.mos),
                    "" if math.isnan(r.predicted) else repr(r.predicted), r.fold,
                ])

    if isinstance(target, (str, Path)):
        with open(target, "w", newline="") as fh:
            _write(fh)
    else:
        _write(target)


def report_to_json(report: EvalReport, extra: Optional[dict] = None) -> str:
    doc = report.to_json_dict()
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=True)
