"""Coefficient fitting by seeded multi-start Nelder-Mead least squares.

The objective is the sum of squared MOS residuals over the training rows;
rows whose prediction raises a domain error contribute a fixed penalty of
1e6 (recorded as residual 1000.0, so final_sse stays exactly the sum of
squared residuals). Start 0 is always the unperturbed init, which makes the
result provably no worse than the best initial guess; the remaining starts
perturb the init with a seeded uniform jitter. Everything is deterministic
for a fixed seed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import Bounds, minimize

from .errors import FittingError, PredictionDomainError, SchemaError
from .features import DisplayParams, SceneStats, StreamFeatures, SubjectiveRecord
from .models import (
    CoefficientSet,
    PREDICTORS,
    coefficient_names,
    default_coefficients,
)

ERROR_PENALTY = 1e6
ERROR_RESIDUAL = 1000.0  # ERROR_RESIDUAL**2 == ERROR_PENALTY
DEFAULT_BOUND = 1e4
DEFAULT_STARTS = 8
DEFAULT_MAX_ITER = 2000
RELATIVE_TOLERANCE = 1e-8  # objective tolerance; the binding stopping rule
COARSE_X_TOLERANCE = 1e-4  # simplex-size rule stays looser than the f rule
EXACT_FIT_SSE = 1e-12

#: defaults used when dataset CSV display cells are blank
DEFAULT_DISPLAY = DisplayParams(screen_size_inches=42.0, display_width_px=1920,
                                display_height_px=1080, device_type="TV")


@dataclass(frozen=True)
class DatasetRow:
    sequence_id: str
    features: StreamFeatures
    display: DisplayParams
    subjective: SubjectiveRecord


@dataclass(frozen=True)
class Dataset:
    """Labeled rows with unique sequence ids."""

    rows: tuple[DatasetRow, ...]

    def __post_init__(self) -> None:
        seen = set()
        for row in self.rows:
            if row.sequence_id in seen:
                raise FittingError(f"duplicate sequence_id {row.sequence_id!r}")
            seen.add(row.sequence_id)

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def subset(self, sequence_ids: Iterable[str]) -> "Dataset":
        wanted = set(sequence_ids)
        return Dataset(tuple(r for r in self.rows if r.sequence_id in wanted))


@dataclass(frozen=True)
class FitResult:
    coefficients: CoefficientSet
    final_sse: float
    iterations: int
    converged: bool
    per_row_residuals: tuple[float, ...]

    def to_json_dict(self) -> dict:
        doc = self.coefficients.to_json_dict()
        doc["diagnostics"] = {
            "final_sse": self.final_sse,
            "iterations": self.iterations,
            "converged": self.converged,
            "per_row_residuals": list(self.per_row_residuals),
        }
        return doc


def _row_residual(predictor, features, display, coefficients, mos) -> float:
    try:
        predicted = predictor(features, display, coefficients).mos
        if not math.isfinite(predicted):
            return ERROR_RESIDUAL
    except (PredictionDomainError, ValueError, ZeroDivisionError, OverflowError, TypeError):
        return ERROR_RESIDUAL
    return mos - predicted


def residuals(model_id: str, coefficients: CoefficientSet, dataset: Dataset) -> list[float]:
    """Per-row MOS residuals with the error-penalty convention."""
    predictor = _predictor(model_id)
    return [
        _row_residual(predictor, row.features, row.display, coefficients, row.subjective.mos)
        for row in dataset
    ]


def objective(model_id: str, coefficients: CoefficientSet, dataset: Dataset) -> float:
    """Sum of squared residuals; erroring rows add the 1e6 penalty each."""
    return float(sum(r * r for r in residuals(model_id, coefficients, dataset)))


def _predictor(model_id: str):
    try:
        return PREDICTORS[model_id]
    except KeyError:
        raise FittingError(f"unknown model id {model_id!r}; known ids: "
                           f"{', '.join(PREDICTORS)}") from None


def _normalize_bounds(model_id: str, bounds: Optional[Sequence[tuple[float, float]]]) -> list[tuple[float, float]]:
    arity = len(coefficient_names(model_id))
    if bounds is None:
        return [(-DEFAULT_BOUND, DEFAULT_BOUND)] * arity
    bounds = [(float(lo), float(hi)) for lo, hi in bounds]
    if len(bounds) != arity:
        raise FittingError(f"{model_id} needs {arity} bound pairs, got {len(bounds)}")
    for lo, hi in bounds:
        if lo > hi:
            raise FittingError(f"empty bound interval ({lo}, {hi})")
    return bounds


def _fit_vector(predictor, to_coefficients, dataset: Dataset, init: np.ndarray,
                bounds: list[tuple[float, float]], seed: int,
                n_starts: int, max_iter: int) -> tuple[np.ndarray, float, int, bool]:
    """Generic multi-start simplex minimization over one coefficient vector.

    ``to_coefficients`` maps the optimized vector to a full CoefficientSet
    (identity for most models; the Ries per-class fit embeds a 5-vector into
    the 25-slot set).
    """
    prepared = [(row.features, row.display, row.subjective.mos) for row in dataset]

    def sse(vector: np.ndarray) -> float:
        k = to_coefficients(vector)
        total = 0.0
        for features, display, mos in prepared:
            r = _row_residual(predictor, features, display, k, mos)
            total += r * r
        return total

    lower = np.array([b[0] for b in bounds])
    upper = np.array([b[1] for b in bounds])
    rng = np.random.default_rng(seed)
    scale = np.maximum(0.25 * np.abs(init), 0.05)

    starts = [np.clip(init, lower, upper)]
    for _ in range(max(0, n_starts - 1)):
        jitter = rng.uniform(-1.0, 1.0, size=init.shape)
        starts.append(np.clip(init + scale * jitter, lower, upper))

    # scipy's tolerances are absolute; scale them so the 1e-8 RELATIVE
    # objective rule binds while the simplex-size rule never dominates
    xatol = COARSE_X_TOLERANCE * max(1.0, float(np.max(np.abs(init))))

    best_x = np.array(starts[0])
    best_f = math.inf
    iterations = 0
    any_success = False
    for x0 in starts:
        f0 = sse(x0)
        if f0 < best_f:
            best_f, best_x = f0, np.array(x0)
        if best_f <= EXACT_FIT_SSE:  # cannot improve an (essentially) exact fit
            break
        result = minimize(
            sse, x0, method="Nelder-Mead",
            bounds=Bounds(lower, upper),
            options={
                "maxiter": max_iter,
                "xatol": xatol,
                "fatol": RELATIVE_TOLERANCE * max(1.0, min(f0, best_f)),
                "adaptive": len(init) > 6,
            },
        )
        iterations += int(result.nit)
        any_success = any_success or bool(result.success)
        if result.fun < best_f:
            best_f, best_x = float(result.fun), np.array(result.x)
    converged = best_f < ERROR_PENALTY and (any_success or best_f <= EXACT_FIT_SSE)
    return best_x, float(best_f), iterations, converged


def fit(model_id: str, train: Dataset, init: Optional[CoefficientSet] = None,
        bounds: Optional[Sequence[tuple[float, float]]] = None, seed: int = 0,
        n_starts: int = DEFAULT_STARTS, max_iter: int = DEFAULT_MAX_ITER) -> FitResult:
    """Least-squares fit of one model's coefficients to (features, MOS) rows.

    ``init`` defaults to the bundled coefficients for the model. The Ries
    model decomposes exactly by content class (a row only touches its own
    class's coefficients), so each class with training rows is fitted
    independently; classes without rows keep their init values.
    """
    if len(train) == 0:
        raise FittingError("training dataset is empty")
    _predictor(model_id)
    if init is None:
        init = default_coefficients(model_id)
    if init.model_id != model_id:
        raise FittingError(f"init coefficients are for {init.model_id!r}, expected {model_id!r}")
    bound_list = _normalize_bounds(model_id, bounds)

    if model_id == "ries":
        return _fit_ries(train, init, bound_list, seed, n_starts, max_iter)

    best_x, _, iterations, converged = _fit_vector(
        _predictor(model_id), lambda v: CoefficientSet(model_id, tuple(v)), train,
        np.array(init.values, dtype=float), bound_list, seed, n_starts, max_iter)
    coefficients = CoefficientSet(model_id, tuple(best_x))
    row_residuals = residuals(model_id, coefficients, train)
    return FitResult(
        coefficients=coefficients,
        final_sse=float(sum(r * r for r in row_residuals)),
        iterations=iterations,
        converged=converged,
        per_row_residuals=tuple(row_residuals),
    )


def _fit_ries(train: Dataset, init: CoefficientSet,
              bounds: list[tuple[float, float]], seed: int,
              n_starts: int, max_iter: int) -> FitResult:
    values = list(init.values)
    by_class: dict[int, list[DatasetRow]] = {}
    for row in train:
        by_class.setdefault(row.features.content_class or 0, []).append(row)

    predictor = _predictor("ries")
    iterations = 0
    converged = True
    for content_class, rows in sorted(by_class.items()):
        start = content_class * 5

        def embed(vector: np.ndarray, start: int = start) -> CoefficientSet:
            full = list(values)
            full[start:start + 5] = vector.tolist()
            return CoefficientSet("ries", tuple(full))

        best_x, _, nit, ok = _fit_vector(
            predictor, embed, Dataset(tuple(rows)),
            np.array(values[start:start + 5], dtype=float), bounds[start:start + 5],
            seed + content_class, n_starts, max_iter)
        values[start:start + 5] = best_x.tolist()
        iterations += nit
        converged = converged and ok

    coefficients = CoefficientSet("ries", tuple(values))
    row_residuals = residuals("ries", coefficients, train)
    return FitResult(
        coefficients=coefficients,
        final_sse=float(sum(r * r for r in row_residuals)),
        iterations=iterations,
        converged=converged,
        per_row_residuals=tuple(row_residuals),
    )


DATASET_CSV_HEADER = [
    "sequence_id", "source_id", "mos", "ci95", "bitrate_kbps", "framerate_fps",
    "width", "height", "avg_bytes_per_iframe", "avg_qp", "max_qp", "min_qp",
    "iflicker", "skip_ratio", "avg_mv", "kfr", "sad", "content_class",
    "screen_inches", "display_width", "display_height", "device_type",
]


def _cell(row: dict[str, str], name: str) -> str:
    return row[name].strip()


def _parse_row(cells: dict[str, str], line_no: int) -> DatasetRow:
    def required_float(name: str) -> float:
        text = _cell(cells, name)
        if text == "":
            raise SchemaError("required cell is blank", row=line_no, column=name)
        try:
            return float(text)
        except ValueError:
            raise SchemaError(f"not a number: {text!r}", row=line_no, column=name) from None

    def optional_float(name: str) -> Optional[float]:
        text = _cell(cells, name)
        if text == "":
            return None
        try:
            return float(text)
        except ValueError:
            raise SchemaError(f"not a number: {text!r}", row=line_no, column=name) from None

    sequence_id = _cell(cells, "sequence_id")
    source_id = _cell(cells, "source_id")
    if not sequence_id or not source_id:
        raise SchemaError("sequence_id and source_id are required", row=line_no)

    mos = required_float("mos")
    bitrate = required_float("bitrate_kbps")
    framerate = required_float("framerate_fps")
    width = int(required_float("width"))
    height = int(required_float("height"))
    avg_qp = required_float("avg_qp")

    imputed = set()
    avg_bytes = optional_float("avg_bytes_per_iframe")
    if avg_bytes is None:
        avg_bytes = 1.0  # positive placeholder; consumers see the imputed flag
        imputed.add("avg_bytes_per_iframe")
    max_qp = optional_float("max_qp")
    min_qp = optional_float("min_qp")
    skip_ratio = optional_float("skip_ratio")
    if skip_ratio is None:
        skip_ratio = 0.0
        imputed.add("skip_ratio")
    avg_mv = optional_float("avg_mv")
    if avg_mv is None:
        avg_mv = 0.0
        imputed.add("avg_mv")
    kfr = optional_float("kfr")
    if kfr is None:
        kfr = 1.0
        imputed.add("key_frame_rate")
    sad = optional_float("sad")
    if sad is None:
        sad = 0.0
        imputed.add("sad_per_pixel")
    content_class_value = optional_float("content_class")

    scenes: tuple[SceneStats, ...] = ()
    if "avg_bytes_per_iframe" not in imputed:
        scenes = (SceneStats(gop_count=1, avg_iframe_bytes=avg_bytes, weight=16.0),)

    try:
        features = StreamFeatures(
            bitrate_kbps=bitrate,
            framerate_fps=framerate,
            width_px=width,
            height_px=height,
            avg_bytes_per_iframe=avg_bytes,
            avg_qp=avg_qp,
            max_qp=avg_qp if max_qp is None else max_qp,
            min_qp=avg_qp if min_qp is None else min_qp,
            iflicker_count=int(optional_float("iflicker") or 0),
            skip_ratio=skip_ratio,
            avg_mv=avg_mv,
            key_frame_rate=kfr,
            gop_distance=framerate / kfr,
            quant=min(max(avg_qp / 51.0, 0.0), 1.0),
            sad_per_pixel=sad,
            content_class=None if content_class_value is None else int(content_class_value),
            scenes=scenes,
            imputed=frozenset(imputed),
        )
        screen = optional_float("screen_inches")
        display_w = optional_float("display_width")
        display_h = optional_float("display_height")
        device = _cell(cells, "device_type") or DEFAULT_DISPLAY.device_type
        display = DisplayParams(
            screen_size_inches=DEFAULT_DISPLAY.screen_size_inches if screen is None else screen,
            display_width_px=DEFAULT_DISPLAY.display_width_px if display_w is None else int(display_w),
            display_height_px=DEFAULT_DISPLAY.display_height_px if display_h is None else int(display_h),
            device_type=device,
        )
        subjective = SubjectiveRecord(
            sequence_id=sequence_id,
            source_id=source_id,
            mos=mos,
            ci95_halfwidth=optional_float("ci95"),
        )
    except ValueError as exc:
        raise SchemaError(str(exc), row=line_no) from exc
    return DatasetRow(sequence_id, features, display, subjective)


def load_dataset_csv(source: Path | str | IO[str]) -> Dataset:
    """Load the dataset CSV schema (leading ``#`` comment lines allowed)."""
    if isinstance(source, (str, Path)):
        with open(source, newline="") as fh:
            return load_dataset_csv(fh)

    lines = [line for line in source if line.strip() and not line.lstrip().startswith("#")]
    reader = csv.reader(lines)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise SchemaError("dataset CSV is empty (header required)") from None
    if header != DATASET_CSV_HEADER:
        raise SchemaError(
            f"dataset CSV header must be {','.join(DATASET_CSV_HEADER)}", row=1)

    rows = []
    for line_no, cells in enumerate(reader, start=2):
        if len(cells) != len(DATASET_CSV_HEADER):
            raise SchemaError(f"expected {len(DATASET_CSV_HEADER)} cells, got {len(cells)}",
                              row=line_no)
        rows.append(_parse_row(dict(zip(DATASET_CSV_HEADER, cells)), line_no))
    if not rows:
        raise SchemaError("dataset CSV has no data rows")
    try:
        return Dataset(tuple(rows))
    except FittingError as exc:
        raise SchemaError(str(exc)) from exc


def write_dataset_csv(target: Path | str | IO[str], dataset: Dataset,
                      comment: str | None = None) -> None:
    def fmt(value: Optional[float]) -> str:
        return "" if value is None else repr(float(value))

    def _write(fh: IO[str]) -> None:
        if comment:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DATASET_CSV_HEADER)
        for row in dataset:
            f, d, s = row.features, row.display, row.subjective
            writer.writerow([
                row.sequence_id, s.source_id, repr(s.mos), fmt(s.ci95_halfwidth),
                repr(f.bitrate_kbps), repr(f.framerate_fps), f.width_px, f.height_px,
                "" if f.is_imputed("avg_bytes_per_iframe") else repr(f.avg_bytes_per_iframe),
                repr(f.avg_qp), repr(f.max_qp), repr(f.min_qp), f.iflicker_count,
                "" if f.is_imputed("skip_ratio") else repr(f.skip_ratio),
                "" if f.is_imputed("avg_mv") else repr(f.avg_mv),
                "" if f.is_imputed("key_frame_rate") else repr(f.key_frame_rate),
                "" if f.is_imputed("sad_per_pixel") else repr(f.sad_per_pixel),
                "" if f.content_class is None else f.content_class,
                repr(d.screen_size_inches), d.display_width_px, d.display_height_px,
                d.device_type,
            ])

    if isinstance(target, (str, Path)):
        with open(target, "w", newline="") as fh:
            _write(fh)
    else:
        _write(target)
