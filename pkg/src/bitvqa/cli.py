"""Command-line front end: extract, predict, fit, evaluate, compare.

Outputs are written atomically (temp file + rename), embed the run
configuration and seed for provenance, and are byte-identical across reruns
with the same inputs. Failures exit nonzero after printing a one-line JSON
error record to stderr and leave no partial artifacts.
"""

from __future__ import annotations

import json
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import click

from . import __version__
from .bitstream import extract_frames, stream_metadata
from .errors import BitvqaError
from .evaluation import (
    compare_models,
    cross_validate,
    report_to_json,
    write_comparison_csv,
    write_residuals_csv,
)
from .features import write_frame_csv
from .fitting import fit, load_dataset_csv
from .models import (
    PREDICTORS,
    STANDARD_MODEL_IDS,
    CoefficientSet,
    default_coefficients,
    load_coefficients,
)


@dataclass(frozen=True)
class RunConfig:
    """One CLI invocation, embedded into every artifact it writes."""

    command: str
    model_ids: tuple[str, ...] = ()
    dataset: Optional[str] = None
    bitstream: Optional[str] = None
    coefficients: Optional[str] = None
    k: int = 5
    seed: int = 42
    out: Optional[str] = None
    output_format: str = "csv"

    def to_json_dict(self) -> dict:
        return {
            "tool": f"bitvqa {__version__}",
            "command": self.command,
            "models": list(self.model_ids),
            "dataset": self.dataset,
            "bitstream": self.bitstream,
            "coefficients": self.coefficients,
            "folds": self.k,
            "seed": self.seed,
            "format": self.output_format,
        }


def _atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_with(path: Path, writer: Callable) -> None:
    """Run a file-object writer against a temp file, then rename."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fail(exc: Exception) -> None:
    record = {"error": type(exc).__name__, "message": str(exc)}
    for attr in ("row", "column"):
        value = getattr(exc, attr, None)
        if value is not None:
            record[attr] = value
    click.echo(json.dumps(record, sort_keys=True), err=True)
    sys.exit(1)


def _load_init(path: Optional[str], model_id: str) -> CoefficientSet:
    if path is None:
        return default_coefficients(model_id)
    return load_coefficients(path)


def _config_comment(config: RunConfig) -> str:
    return "config: " + json.dumps(config.to_json_dict(), sort_keys=True)


@click.group()
@click.version_option(version=__version__)
def main() -> None:
    """No-reference bitstream video quality toolkit."""


@main.command()
@click.option("--bitstream", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Annex-B .h264/.264 file.")
@click.option("--out", required=True, help="Output prefix; writes <out>.frames.csv and <out>.meta.json.")
def extract(bitstream: str, out: str) -> None:
    """Parse a bytestream into the frame-stats CSV plus a metadata sidecar."""
    config = RunConfig(command="extract", bitstream=bitstream, out=out)
    try:
        data = Path(bitstream).read_bytes()
        frames, _sps = extract_frames(data)
        metadata = stream_metadata(data)
        metadata["config"] = config.to_json_dict()
        _atomic_write_with(Path(f"{out}.frames.csv"),
                           lambda fh: write_frame_csv(fh, frames, comment=_config_comment(config)))
        _atomic_write_text(Path(f"{out}.meta.json"),
                           json.dumps(metadata, indent=2, sort_keys=True) + "\n")
    except (BitvqaError, OSError) as exc:
        _fail(exc)
    click.echo(f"extracted {len(frames)} frames -> {out}.frames.csv")


@main.command()
@click.option("--model", "model_id", required=True, help="Model id.")
@click.option("--dataset", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Dataset CSV (features are taken from its columns).")
@click.option("--coefficients", "coefficients_path", type=click.Path(exists=True, dir_okay=False),
              help="Coefficient JSON; bundled defaults when omitted.")
@click.option("--out", required=True, help="Output file.")
@click.option("--format", "output_format", type=click.Choice(["json", "csv"]), default="json",
              show_default=True)
def predict(model_id: str, dataset: str, coefficients_path: Optional[str], out: str,
            output_format: str) -> None:
    """Predict MOS for every dataset row with fixed coefficients."""
    config = RunConfig(command="predict", model_ids=(model_id,), dataset=dataset,
                       coefficients=coefficients_path, out=out, output_format=output_format)
    try:
        rows = load_dataset_csv(dataset)
        if model_id not in PREDICTORS:
            raise BitvqaError(f"unknown model id {model_id!r}; known ids: {', '.join(PREDICTORS)}")
        coefficients = _load_init(coefficients_path, model_id)
        predictor = PREDICTORS[model_id]
        predictions = [(row.sequence_id, predictor(row.features, row.display, coefficients))
                       for row in rows]
        if output_format == "json":
            doc = {
                "config": config.to_json_dict(),
                "model": model_id,
                "predictions": [
                    {"sequence_id": sid, "mos": p.mos,
                     "native_scale_value": p.native_scale_value, "breakdown": p.breakdown}
                    for sid, p in predictions
                ],
            }
            _atomic_write_text(Path(out), json.dumps(doc, indent=2, sort_keys=True) + "\n")
        else:
            def writer(fh) -> None:
                fh.write(f"# {_config_comment(config)}\n")
                fh.write("sequence_id,mos,native_scale_value\n")
                for sid, p in predictions:
                    fh.write(f"{sid},{p.mos!r},{p.native_scale_value!r}\n")
            _atomic_write_with(Path(out), writer)
    except (BitvqaError, OSError) as exc:
        _fail(exc)
    click.echo(f"wrote {len(predictions)} predictions -> {out}")


@main.command(name="fit")
@click.option("--model", "model_id", required=True, help="Model id.")
@click.option("--dataset", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--coefficients", "coefficients_path", type=click.Path(exists=True, dir_okay=False),
              help="Initial coefficients JSON; bundled defaults when omitted.")
@click.option("--seed", default=42, show_default=True)
@click.option("--out", required=True, help="Output coefficient JSON.")
def fit_command(model_id: str, dataset: str, coefficients_path: Optional[str],
                seed: int, out: str) -> None:
    """Fit a model's coefficients to the dataset by least squares."""
    config = RunConfig(command="fit", model_ids=(model_id,), dataset=dataset,
                       coefficients=coefficients_path, seed=seed, out=out)
    try:
        train = load_dataset_csv(dataset)
        init = _load_init(coefficients_path, model_id)
        result = fit(model_id, train, init=init, seed=seed)
        doc = result.to_json_dict()
        doc["config"] = config.to_json_dict()
        _atomic_write_text(Path(out), json.dumps(doc, indent=2, sort_keys=True) + "\n")
    except (BitvqaError, OSError) as exc:
        _fail(exc)
    click.echo(f"fit {model_id}: sse={result.final_sse:.6g} converged={result.converged} -> {out}")


@main.command()
@click.option("--model", "model_id", required=True, help="Model id.")
@click.option("--dataset", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--coefficients", "coefficients_path", type=click.Path(exists=True, dir_okay=False),
              help="Initial coefficients for each fold's fit.")
@click.option("--folds", "k", default=5, show_default=True)
@click.option("--seed", default=42, show_default=True)
@click.option("--out", required=True, help="Output report file.")
@click.option("--format", "output_format", type=click.Choice(["json", "csv"]), default="json",
              show_default=True)
def evaluate(model_id: str, dataset: str, coefficients_path: Optional[str], k: int,
             seed: int, out: str, output_format: str) -> None:
    """Cross-validate one model (per-fold and aggregate PCC/RMSE/OR)."""
    config = RunConfig(command="evaluate", model_ids=(model_id,), dataset=dataset,
                       coefficients=coefficients_path, k=k, seed=seed, out=out,
                       output_format=output_format)
    try:
        rows = load_dataset_csv(dataset)
        init = _load_init(coefficients_path, model_id)
        report = cross_validate(model_id, rows, k=k, seed=seed, init=init)
        if output_format == "json":
            _atomic_write_text(Path(out),
                               report_to_json(report, extra={"config": config.to_json_dict()}) + "\n")
        else:
            def writer(fh) -> None:
                fh.write(f"# {_config_comment(config)}\n")
                fh.write("fold,pcc,rmse,outlier_ratio\n")
                for m in report.per_fold:
                    cell = "" if m.pcc is None else repr(m.pcc)
                    fh.write(f"{m.fold},{cell},{m.rmse!r},{m.outlier_ratio!r}\n")
                cell = "" if report.aggregate_pcc is None else repr(report.aggregate_pcc)
                fh.write(f"aggregate,{cell},{report.aggregate_rmse!r},"
                         f"{report.aggregate_outlier_ratio!r}\n")
            _atomic_write_with(Path(out), writer)
    except (BitvqaError, OSError) as exc:
        _fail(exc)
    pcc_text = "n/a" if report.aggregate_pcc is None else f"{report.aggregate_pcc:.4f}"
    click.echo(f"{model_id}: pcc={pcc_text} rmse={report.aggregate_rmse:.4f} "
               f"or={report.aggregate_outlier_ratio:.4f} -> {out}")


@main.command()
@click.option("--model", "model_ids", multiple=True,
              help="Model id (repeatable); defaults to the nine standard models.")
@click.option("--dataset", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--folds", "k", default=5, show_default=True)
@click.option("--seed", default=42, show_default=True)
@click.option("--out", required=True,
              help="Output prefix; writes <out>.comparison.csv and <out>.residuals.csv.")
def compare(model_ids: Sequence[str], dataset: str, k: int, seed: int, out: str) -> None:
    """Cross-validate several models on one shared fold plan."""
    ids = tuple(model_ids) if model_ids else STANDARD_MODEL_IDS
    config = RunConfig(command="compare", model_ids=ids, dataset=dataset, k=k, seed=seed, out=out)
    try:
        rows = load_dataset_csv(dataset)
        reports = compare_models(ids, rows, k=k, seed=seed)
        comment = _config_comment(config)
        _atomic_write_with(Path(f"{out}.comparison.csv"),
                           lambda fh: write_comparison_csv(fh, reports, comment=comment))
        _atomic_write_with(Path(f"{out}.residuals.csv"),
                           lambda fh: write_residuals_csv(fh, reports, comment=comment))
    except (BitvqaError, OSError) as exc:
        _fail(exc)
    click.echo(f"compared {len(reports)} models -> {out}.comparison.csv")


if __name__ == "__main__":
    main()
