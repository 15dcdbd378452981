"""Shared data model and sequence-level feature aggregation.

Per-frame bitstream statistics (:class:`FrameRecord`) are reduced to the
sequence-level :class:`StreamFeatures` that every quality model consumes:
bit rate, frame rate, average/extreme QP, average I-frame size, QP flicker
count, key-frame rate, scene statistics and a quantization-degradation
proxy. All types are plain immutable value objects; all operations are pure
functions, so concurrent use needs no locking.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import IO, Iterable, Optional, Sequence

from .errors import FeatureError, SchemaError

QP_MAX = 51.0
IFLICKER_THRESHOLD = 5.0
SCENE_WEIGHT_MIN = 16.0
SCENE_WEIGHT_OTHER = 1.0


class FrameType(str, Enum):
    I = "I"
    P = "P"
    B = "B"
    UNKNOWN = "unknown"


def _require_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise FeatureError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class FrameRecord:
    """Statistics for one coded picture.

    ``avg_qp`` is the per-picture average of macroblock (or slice) QP.
    ``skip_ratio`` and ``avg_mv_magnitude`` are only available when a full
    analyzer produced them; ``None`` marks them absent.
    """

    index: int
    frame_type: FrameType
    size_bytes: int
    avg_qp: float
    skip_ratio: Optional[float] = None
    avg_mv_magnitude: Optional[float] = None

    def __post_init__(self) -> None:
        if self.index < 0:
            raise FeatureError(f"frame index must be >= 0, got {self.index}")
        if self.size_bytes < 0:
            raise FeatureError(f"size_bytes must be >= 0, got {self.size_bytes}")
        _require_finite("avg_qp", self.avg_qp)
        if not 0.0 <= self.avg_qp <= QP_MAX:
            raise FeatureError(f"avg_qp must be in [0, {QP_MAX:g}], got {self.avg_qp}")
        if self.skip_ratio is not None and not 0.0 <= self.skip_ratio <= 1.0:
            raise FeatureError(f"skip_ratio must be in [0, 1], got {self.skip_ratio}")
        if self.avg_mv_magnitude is not None and self.avg_mv_magnitude < 0.0:
            raise FeatureError(f"avg_mv_magnitude must be >= 0, got {self.avg_mv_magnitude}")


@dataclass(frozen=True)
class SceneStats:
    """One detected scene: its GOP count, average I-frame size and weight.

    Exactly one scene per sequence (the one with the smallest average
    I-frame size) carries weight 16; all others carry weight 1.
    """

    gop_count: int
    avg_iframe_bytes: float
    weight: float

    def __post_init__(self) -> None:
        if self.gop_count <= 0:
            raise FeatureError(f"gop_count must be positive, got {self.gop_count}")
        if not self.avg_iframe_bytes > 0:
            raise FeatureError(f"avg_iframe_bytes must be positive, got {self.avg_iframe_bytes}")
        if self.weight not in (SCENE_WEIGHT_MIN, SCENE_WEIGHT_OTHER):
            raise FeatureError(f"scene weight must be 16 or 1, got {self.weight}")


@dataclass(frozen=True)
class DisplayParams:
    """Playback context: physical screen size, display resolution, device type."""

    screen_size_inches: float
    display_width_px: int
    display_height_px: int
    device_type: str = "TV"

    def __post_init__(self) -> None:
        if not self.screen_size_inches > 0:
            raise FeatureError(f"screen_size_inches must be positive, got {self.screen_size_inches}")
        if self.display_width_px <= 0 or self.display_height_px <= 0:
            raise FeatureError("display resolution must be positive")
        if self.device_type not in ("TV", "handheld"):
            raise FeatureError(f"device_type must be 'TV' or 'handheld', got {self.device_type!r}")

    @property
    def display_pixels(self) -> int:
        return self.display_width_px * self.display_height_px


@dataclass(frozen=True)
class SubjectiveRecord:
    """Subjective label for one sequence (ACR five-point scale)."""

    sequence_id: str
    source_id: str
    mos: float
    ci95_halfwidth: Optional[float] = None

    def __post_init__(self) -> None:
        _require_finite("mos", self.mos)
        if not 1.0 <= self.mos <= 5.0:
            raise FeatureError(f"mos must be in [1, 5], got {self.mos}")
        if self.ci95_halfwidth is not None and self.ci95_halfwidth < 0:
            raise FeatureError(f"ci95_halfwidth must be >= 0, got {self.ci95_halfwidth}")


@dataclass(frozen=True)
class StreamFeatures:
    """Sequence-level aggregates feeding the quality models.

    ``imputed`` names fields that were defaulted rather than measured so
    models depending on them can warn (``skip_ratio``, ``avg_mv``,
    ``sad_per_pixel``, ``avg_bytes_per_iframe``, ``key_frame_rate``).
    """

    bitrate_kbps: float
    framerate_fps: float
    width_px: int
    height_px: int
    avg_bytes_per_iframe: float
    avg_qp: float
    max_qp: float
    min_qp: float
    iflicker_count: int
    skip_ratio: float
    avg_mv: float
    key_frame_rate: float
    gop_distance: float
    quant: float
    sad_per_pixel: float = 0.0
    content_class: Optional[int] = None
    scenes: tuple[SceneStats, ...] = ()
    imputed: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        for name in ("bitrate_kbps", "framerate_fps", "avg_bytes_per_iframe",
                     "key_frame_rate", "gop_distance"):
            value = getattr(self, name)
            _require_finite(name, value)
            if not value > 0:
                raise FeatureError(f"{name} must be positive, got {value}")
        if self.width_px <= 0 or self.height_px <= 0:
            raise FeatureError("video resolution must be positive")
        for name in ("avg_qp", "max_qp", "min_qp"):
            value = getattr(self, name)
            if not 0.0 <= value <= QP_MAX:
                raise FeatureError(f"{name} must be in [0, {QP_MAX:g}], got {value}")
        if not self.min_qp <= self.avg_qp <= self.max_qp:
            raise FeatureError(
                f"QP ordering violated: min {self.min_qp} <= avg {self.avg_qp} <= max {self.max_qp}")
        if self.iflicker_count < 0:
            raise FeatureError("iflicker_count must be >= 0")
        if not 0.0 <= self.skip_ratio <= 1.0:
            raise FeatureError(f"skip_ratio must be in [0, 1], got {self.skip_ratio}")
        if self.avg_mv < 0:
            raise FeatureError(f"avg_mv must be >= 0, got {self.avg_mv}")
        if not 0.0 <= self.quant <= 1.0:
            raise FeatureError(f"quant must be in [0, 1], got {self.quant}")
        if abs(self.key_frame_rate - self.framerate_fps / self.gop_distance) > 1e-9:
            raise FeatureError("key_frame_rate must equal framerate_fps / gop_distance")
        if self.sad_per_pixel < 0:
            raise FeatureError(f"sad_per_pixel must be >= 0, got {self.sad_per_pixel}")
        if self.content_class is not None and self.content_class not in range(5):
            raise FeatureError(f"content_class must be in 0..4, got {self.content_class}")
        if self.scenes:
            heavy = sum(1 for s in self.scenes if s.weight == SCENE_WEIGHT_MIN)
            if heavy != 1:
                raise FeatureError(f"exactly one scene must carry weight 16, found {heavy}")

    @property
    def num_pixels_frame(self) -> int:
        return self.width_px * self.height_px

    def is_imputed(self, field_name: str) -> bool:
        return field_name in self.imputed

    def to_json_dict(self) -> dict:
        return {
            "bitrate_kbps": self.bitrate_kbps,
            "framerate_fps": self.framerate_fps,
            "width_px": self.width_px,
            "height_px": self.height_px,
            "avg_bytes_per_iframe": self.avg_bytes_per_iframe,
            "avg_qp": self.avg_qp,
            "max_qp": self.max_qp,
            "min_qp": self.min_qp,
            "iflicker_count": self.iflicker_count,
            "skip_ratio": self.skip_ratio,
            "avg_mv": self.avg_mv,
            "key_frame_rate": self.key_frame_rate,
            "gop_distance": self.gop_distance,
            "quant": self.quant,
            "sad_per_pixel": self.sad_per_pixel,
            "content_class": self.content_class,
            "scenes": [
                {"gop_count": s.gop_count, "avg_iframe_bytes": s.avg_iframe_bytes, "weight": s.weight}
                for s in self.scenes
            ],
            "imputed": sorted(self.imputed),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "StreamFeatures":
        scenes = tuple(
            SceneStats(int(s["gop_count"]), float(s["avg_iframe_bytes"]), float(s["weight"]))
            for s in doc.get("scenes", [])
        )
        return cls(
            bitrate_kbps=float(doc["bitrate_kbps"]),
            framerate_fps=float(doc["framerate_fps"]),
            width_px=int(doc["width_px"]),
            height_px=int(doc["height_px"]),
            avg_bytes_per_iframe=float(doc["avg_bytes_per_iframe"]),
            avg_qp=float(doc["avg_qp"]),
            max_qp=float(doc["max_qp"]),
            min_qp=float(doc["min_qp"]),
            iflicker_count=int(doc["iflicker_count"]),
            skip_ratio=float(doc["skip_ratio"]),
            avg_mv=float(doc["avg_mv"]),
            key_frame_rate=float(doc["key_frame_rate"]),
            gop_distance=float(doc["gop_distance"]),
            quant=float(doc["quant"]),
            sad_per_pixel=float(doc.get("sad_per_pixel", 0.0)),
            content_class=None if doc.get("content_class") is None else int(doc["content_class"]),
            scenes=scenes,
            imputed=frozenset(doc.get("imputed", ())),
        )


def detect_iflicker(per_picture_avg_qp: Sequence[float], threshold: float = IFLICKER_THRESHOLD) -> int:
    """Count pictures whose average QP jumps above ``threshold`` relative to
    BOTH neighbours (strict inequality). Lists shorter than 3 yield 0."""
    qp = list(per_picture_avg_qp)
    count = 0
    for i in range(1, len(qp) - 1):
        if abs(qp[i] - qp[i - 1]) > threshold and abs(qp[i] - qp[i + 1]) > threshold:
            count += 1
    return count


def _gop_iframe_sizes(frames: Sequence[FrameRecord]) -> list[float]:
    sizes = [float(f.size_bytes) for f in frames if f.frame_type is FrameType.I]
    if not sizes:
        raise FeatureError("at least one I frame is required")
    return sizes


def segment_scenes(
    frames: Sequence[FrameRecord],
    boundaries: Optional[Sequence[int]] = None,
    relative_threshold: float = 0.2,
) -> tuple[SceneStats, ...]:
    """Group GOPs into scenes and weight them.

    Without explicit ``boundaries`` a new scene starts at any GOP whose
    I-frame size deviates from the running mean of the current scene by more
    than ``relative_threshold`` (relative). ``boundaries`` are GOP ordinals
    (strictly increasing, each in ``1..n_gops-1``) where new scenes begin and
    override the heuristic entirely. The scene with the smallest average
    I-frame size gets weight 16 (first on ties), all others weight 1.
    """
    iframe_sizes = _gop_iframe_sizes(frames)
    n_gops = len(iframe_sizes)

    if boundaries is not None:
        cuts = list(boundaries)
        prev = 0
        for b in cuts:
            if b <= prev or b >= n_gops:
                raise FeatureError(f"scene boundary {b} out of range or non-increasing "
                                   f"(must satisfy 0 < b < {n_gops}, strictly increasing)")
            prev = b
        starts = [0] + cuts
    else:
        starts = [0]
        mean = iframe_sizes[0]
        count = 1
        for g in range(1, n_gops):
            size = iframe_sizes[g]
            if abs(size - mean) > relative_threshold * mean:
                starts.append(g)
                mean, count = size, 1
            else:
                count += 1
                mean += (size - mean) / count

    ends = starts[1:] + [n_gops]
    averages = [sum(iframe_sizes[a:b]) / (b - a) for a, b in zip(starts, ends)]
    min_index = averages.index(min(averages))
    return tuple(
        SceneStats(
            gop_count=b - a,
            avg_iframe_bytes=avg,
            weight=SCENE_WEIGHT_MIN if i == min_index else SCENE_WEIGHT_OTHER,
        )
        for i, (a, b, avg) in enumerate(zip(starts, ends, averages))
    )


def aggregate_features(
    frames: Sequence[FrameRecord],
    framerate_fps: float,
    bitrate_kbps: float,
    width_px: int,
    height_px: int,
) -> StreamFeatures:
    """Reduce per-frame records to the sequence-level features.

    ``gop_distance`` is the mean spacing between consecutive I frames (a
    single-I sequence counts as one GOP spanning everything). ``quant`` is
    the mean per-picture average QP over non-I frames normalized by 51,
    falling back to the overall mean when the sequence has no non-I frames.
    ``sad_per_pixel`` cannot be derived from frame records and is imputed 0;
    ``skip_ratio``/``avg_mv`` are imputed 0 when absent from every frame.
    """
    frames = list(frames)
    if not frames:
        raise FeatureError("frame list must not be empty")
    for value, name in ((framerate_fps, "framerate_fps"), (bitrate_kbps, "bitrate_kbps")):
        _require_finite(name, value)
        if not value > 0:
            raise FeatureError(f"{name} must be positive, got {value}")
    for prev, cur in zip(frames, frames[1:]):
        if cur.index <= prev.index:
            raise FeatureError(f"frame indices must be strictly increasing "
                               f"({prev.index} then {cur.index})")

    qps = [f.avg_qp for f in frames]
    avg_qp = sum(qps) / len(qps)

    i_positions = [pos for pos, f in enumerate(frames) if f.frame_type is FrameType.I]
    if not i_positions:
        raise FeatureError("at least one I frame is required to compute avg_bytes_per_iframe")
    i_sizes = [float(frames[pos].size_bytes) for pos in i_positions]
    avg_bytes_per_iframe = sum(i_sizes) / len(i_sizes)

    if len(i_positions) >= 2:
        spacings = [b - a for a, b in zip(i_positions, i_positions[1:])]
        gop_distance = sum(spacings) / len(spacings)
    else:
        gop_distance = float(len(frames))

    non_i_qps = [f.avg_qp for f in frames if f.frame_type is not FrameType.I]
    quant = (sum(non_i_qps) / len(non_i_qps) if non_i_qps else avg_qp) / QP_MAX

    imputed = {"sad_per_pixel"}
    skips = [f.skip_ratio for f in frames if f.skip_ratio is not None]
    if skips:
        skip_ratio = sum(skips) / len(skips)
    else:
        skip_ratio = 0.0
        imputed.add("skip_ratio")
    mvs = [f.avg_mv_magnitude for f in frames if f.avg_mv_magnitude is not None]
    if mvs:
        avg_mv = sum(mvs) / len(mvs)
    else:
        avg_mv = 0.0
        imputed.add("avg_mv")

    return StreamFeatures(
        bitrate_kbps=bitrate_kbps,
        framerate_fps=framerate_fps,
        width_px=width_px,
        height_px=height_px,
        avg_bytes_per_iframe=avg_bytes_per_iframe,
        avg_qp=avg_qp,
        max_qp=max(qps),
        min_qp=min(qps),
        iflicker_count=detect_iflicker(qps),
        skip_ratio=skip_ratio,
        avg_mv=avg_mv,
        key_frame_rate=framerate_fps / gop_distance,
        gop_distance=gop_distance,
        quant=quant,
        sad_per_pixel=0.0,
        content_class=None,
        scenes=segment_scenes(frames),
        imputed=frozenset(imputed),
    )


FRAME_CSV_HEADER = ["index", "frame_type", "size_bytes", "avg_qp", "skip_ratio", "avg_mv"]


def write_frame_csv(target: Path | str | IO[str], frames: Iterable[FrameRecord],
                    comment: str | None = None) -> None:
    """Write the frame-stats CSV (empty cells for absent optionals)."""

    def _write(fh: IO[str]) -> None:
        if comment:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(FRAME_CSV_HEADER)
        for f in frames:
            writer.writerow([
                f.index,
                f.frame_type.value,
                f.size_bytes,
                f.avg_qp,
                "" if f.skip_ratio is None else f.skip_ratio,
                "" if f.avg_mv_magnitude is None else f.avg_mv_magnitude,
            ])

    if isinstance(target, (str, Path)):
        with open(target, "w", newline="") as fh:
            _write(fh)
    else:
        _write(target)


def read_frame_csv(source: Path | str | IO[str]) -> list[FrameRecord]:
    """Load frame records from the frame-stats CSV schema.

    Leading ``#`` comment lines are skipped; the header row is mandatory.
    """
    if isinstance(source, (str, Path)):
        with open(source, newline="") as fh:
            return read_frame_csv(fh)

    rows = [line for line in source if line.strip() and not line.lstrip().startswith("#")]
    reader = csv.reader(rows)
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError("frame-stats CSV is empty (header required)") from None
    if [h.strip() for h in header] != FRAME_CSV_HEADER:
        raise SchemaError(f"frame-stats CSV header must be {','.join(FRAME_CSV_HEADER)}, "
                          f"got {','.join(header)}", row=1)

    frames: list[FrameRecord] = []
    for line_no, row in enumerate(reader, start=2):
        if len(row) != len(FRAME_CSV_HEADER):
            raise SchemaError(f"expected {len(FRAME_CSV_HEADER)} cells, got {len(row)}", row=line_no)
        try:
            frames.append(FrameRecord(
                index=int(row[0]),
                frame_type=FrameType(row[1]),
                size_bytes=int(row[2]),
                avg_qp=float(row[3]),
                skip_ratio=float(row[4]) if row[4] != "" else None,
                avg_mv_magnitude=float(row[5]) if row[5] != "" else None,
            ))
        except SchemaError:
            raise
        except ValueError as exc:
            raise SchemaError(str(exc), row=line_no) from exc
    for prev, cur in zip(frames, frames[1:]):
        if cur.index <= prev.index:
            raise SchemaError("frame indices must be strictly increasing", column="index")
    return frames


def with_overrides(features: StreamFeatures, **changes) -> StreamFeatures:
    """Return a copy with fields replaced (imputed flags untouched unless given)."""
    return replace(features, **changes)


def features_to_json(features: StreamFeatures) -> str:
    return json.dumps(features.to_json_dict(), sort_keys=True)
