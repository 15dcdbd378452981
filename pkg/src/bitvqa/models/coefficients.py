"""Per-model coefficient vectors and their JSON interchange format.

Every model's coefficients live in one ordered, validated vector. The JSON
document shape is ``{"model": "<id>", "coefficients": {name: value, ...}}``;
a bundled default file provides starting values for every model (the P.1203
entry carries the recommended Table values, the rest are neutral starting
points for fitting).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import IO, Iterable, Mapping

from ..errors import SchemaError

RIES_CLASS_COUNT = 5

#: coefficient names per model id, in vector order
COEFFICIENT_NAMES: dict[str, tuple[str, ...]] = {
    "g1070": tuple(f"a{i}" for i in range(1, 9)),
    "p1201_1": tuple(f"c{i}" for i in range(1, 5)),
    "p1201_2": tuple(f"c{i}" for i in range(1, 5)),
    "p1203_mode3": ("q1", "q2", "q3", "u1", "u2", "t1", "t2", "t3", "h1", "h2", "h3", "h4"),
    "yamagishi": tuple(f"c{i}" for i in range(1, 8)),
    "ries": tuple(f"c{i}_class{k}" for k in range(RIES_CLASS_COUNT) for i in range(1, 6)),
    "joskowicz": tuple(f"c{i}" for i in range(1, 7)),
    "takagi": ("a1", "a2", "a3", "b1", "b2", "b3", "c1", "c2", "c3", "d1", "d2", "d3", "e"),
    "uves_mode1": tuple(f"n{i}" for i in range(1, 18)),
    # sub-model of uves_mode1 (encoding-quality part only), used for the
    # display-parameter ablation
    "uves_model1_1": tuple(f"n{i}" for i in range(1, 12)),
}

MODEL_IDS = tuple(COEFFICIENT_NAMES)
#: the nine models of the standard comparison (ablation sub-model excluded)
STANDARD_MODEL_IDS = tuple(m for m in MODEL_IDS if m != "uves_model1_1")


def coefficient_names(model_id: str) -> tuple[str, ...]:
    try:
        return COEFFICIENT_NAMES[model_id]
    except KeyError:
        raise SchemaError(f"unknown model id {model_id!r}; known ids: {', '.join(MODEL_IDS)}") from None


@dataclass(frozen=True)
class CoefficientSet:
    """An ordered coefficient vector tagged with its model id."""

    model_id: str
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        names = coefficient_names(self.model_id)
        if len(self.values) != len(names):
            raise SchemaError(
                f"{self.model_id} expects {len(names)} coefficients, got {len(self.values)}")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def __getitem__(self, name: str) -> float:
        names = coefficient_names(self.model_id)
        try:
            return self.values[names.index(name)]
        except ValueError:
            raise KeyError(f"{self.model_id} has no coefficient {name!r}") from None

    def as_dict(self) -> dict[str, float]:
        return dict(zip(coefficient_names(self.model_id), self.values))

    def replace_values(self, values: Iterable[float]) -> "CoefficientSet":
        return CoefficientSet(self.model_id, tuple(values))

    def ries_class_row(self, content_class: int) -> tuple[float, ...]:
        """The (c1..c5) row for one Ries content class."""
        if self.model_id != "ries":
            raise SchemaError(f"ries_class_row only applies to the ries model, not {self.model_id}")
        if content_class not in range(RIES_CLASS_COUNT):
            raise SchemaError(f"content class must be in 0..4, got {content_class}")
        start = content_class * 5
        return self.values[start:start + 5]

    def to_json_dict(self) -> dict:
        return {"model": self.model_id, "coefficients": self.as_dict()}

    @classmethod
    def from_mapping(cls, model_id: str, mapping: Mapping[str, float]) -> "CoefficientSet":
        names = coefficient_names(model_id)
        given = dict(mapping)
        if model_id == "ries" and set(given) == {f"c{i}" for i in range(1, 6)}:
            # compact form: one row broadcast to all five content classes
            given = {f"c{i}_class{k}": float(given[f"c{i}"])
                     for k in range(RIES_CLASS_COUNT) for i in range(1, 6)}
        missing = [n for n in names if n not in given]
        extra = [n for n in given if n not in names]
        if missing or extra:
            parts = []
            if missing:
                parts.append(f"missing {', '.join(missing)}")
            if extra:
                parts.append(f"unexpected {', '.join(extra)}")
            raise SchemaError(f"bad coefficient names for {model_id}: {'; '.join(parts)}")
        return cls(model_id, tuple(float(given[n]) for n in names))

    @classmethod
    def from_json_dict(cls, doc: Mapping) -> "CoefficientSet":
        if "model" not in doc or "coefficients" not in doc:
            raise SchemaError('coefficient JSON must have "model" and "coefficients" keys')
        return cls.from_mapping(str(doc["model"]), doc["coefficients"])


def load_coefficients(source: Path | str | IO[str]) -> CoefficientSet:
    """Load one coefficient set from a JSON file."""
    if isinstance(source, (str, Path)):
        with open(source) as fh:
            return load_coefficients(fh)
    try:
        doc = json.load(source)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"coefficient file is not valid JSON: {exc}") from exc
    return CoefficientSet.from_json_dict(doc)


def save_coefficients(target: Path | str | IO[str], coefficients: CoefficientSet,
                      extra: Mapping | None = None) -> None:
    doc = coefficients.to_json_dict()
    if extra:
        doc.update(extra)
    if isinstance(target, (str, Path)):
        with open(target, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    else:
        json.dump(doc, target, indent=2, sort_keys=True)
        target.write("\n")


@lru_cache(maxsize=1)
def _bundled_defaults() -> dict[str, CoefficientSet]:
    text = resources.files("bitvqa.data").joinpath("default_coefficients.json").read_text()
    docs = json.loads(text)
    return {doc["model"]: CoefficientSet.from_json_dict(doc) for doc in docs}


def default_coefficients(model_id: str) -> CoefficientSet:
    """The bundled default vector for a model (P.1203 carries the
    recommended published values; others are neutral fitting seeds)."""
    coefficient_names(model_id)  # validates the id
    return _bundled_defaults()[model_id]
