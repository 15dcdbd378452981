"""Synthetic feature/dataset generators for recovery and protocol tests.

TRUTH holds hand-picked coefficient vectors per model, chosen so that
predictions over the feature sampler spread across the MOS scale without
saturating the clamps (and never raise domain errors).
"""

import numpy as np

from bitvqa import (
    CoefficientSet,
    Dataset,
    DatasetRow,
    DisplayParams,
    SceneStats,
    StreamFeatures,
    SubjectiveRecord,
)
from bitvqa.models import PREDICTORS, RIES_CLASS_COUNT

RESOLUTIONS = [(640, 360), (960, 540), (1280, 720), (1920, 1080)]
DISPLAYS = [(1280, 720), (1920, 1080), (2560, 1440), (3840, 2160)]
SCREENS = [5.5, 10.1, 42.0, 55.0]
FRAMERATES = [12.0, 15.0, 20.0, 24.0, 25.0, 30.0]

TRUTH = {
    "g1070": (3.8, 3.5, 700.0, 1.2, 8.0, 0.006, 0.9, 0.004),
    "p1201_1": (0.18, 0.1, 1.1, 0.65),
    "p1201_2": (60.0, -0.02, 1.5, 5.0),
    "p1203_mode3": (4.66, -0.07, 4.06, 72.61, 0.32, 30.98, 1.29, 64.65,
                    0.1, 0.92, 0.005, 0.002),
    "yamagishi": (6.0, 0.004, 0.6, 0.0003, 3.8, 900.0, 1.3),
    "ries": tuple(
        value
        for k in range(RIES_CLASS_COUNT)
        for value in (1.0 + 0.2 * k, 0.00015 + 3e-5 * k, -(30.0 + 10.0 * k),
                      0.015 + 0.005 * k, 3.0 + k)
    ),
    "joskowicz": (35.0, 0.6, 150.0, 0.25, 0.3, 0.9),
    "takagi": (-0.002, 0.5, 0.15, -0.01, 1.0, 0.3, -0.02, 0.8, 0.1,
               -0.05, 18.0, 2.5, 1.5),
    "uves_mode1": (-0.28, 0.35, 3.6, 0.1, 1.8, 1.7, 6.0, 0.04, 0.015, 0.4, 0.04,
                   -0.25, 8.0, 5.2, 4.0, 0.55, 1.2),
    "uves_model1_1": (-0.28, 0.35, 3.6, 0.1, 1.8, 1.7, 6.0, 0.04, 0.015, 0.4, 0.04),
}


def truth_coefficients(model_id):
    return CoefficientSet(model_id, TRUTH[model_id])


def random_point(rng):
    """One (StreamFeatures, DisplayParams) draw covering realistic ranges."""
    br = float(10 ** rng.uniform(np.log10(200.0), np.log10(6000.0)))
    fr = float(rng.choice(FRAMERATES))
    width, height = RESOLUTIONS[rng.integers(len(RESOLUTIONS))]
    avg_byte_i = float(10 ** rng.uniform(np.log10(8e3), np.log10(1.5e5)))
    avg_qp = float(rng.uniform(18.0, 44.0))
    spread = float(rng.uniform(0.5, 4.0))
    gop = float(rng.uniform(8.0, 75.0))

    scene_count = int(rng.integers(1, 4))
    sizes = [avg_byte_i * float(rng.uniform(0.6, 1.6)) for _ in range(scene_count)]
    gops = [int(rng.integers(3, 13)) for _ in range(scene_count)]
    min_index = sizes.index(min(sizes))
    scenes = tuple(
        SceneStats(gop_count=g, avg_iframe_bytes=s,
                   weight=16.0 if i == min_index else 1.0)
        for i, (s, g) in enumerate(zip(sizes, gops))
    )

    features = StreamFeatures(
        bitrate_kbps=br,
        framerate_fps=fr,
        width_px=width,
        height_px=height,
        avg_bytes_per_iframe=avg_byte_i,
        avg_qp=avg_qp,
        max_qp=min(avg_qp + spread, 51.0),
        min_qp=max(avg_qp - spread, 0.0),
        iflicker_count=int(rng.integers(0, 5)),
        skip_ratio=float(rng.uniform(0.0, 0.8)),
        avg_mv=float(rng.uniform(0.0, 12.0)),
        key_frame_rate=fr / gop,
        gop_distance=gop,
        quant=float(rng.uniform(0.15, 0.9)),
        sad_per_pixel=float(rng.uniform(0.5, 25.0)),
        content_class=int(rng.integers(0, 5)),
        scenes=scenes,
    )
    display = DisplayParams(
        screen_size_inches=SCREENS[rng.integers(len(SCREENS))],
        display_width_px=DISPLAYS[rng.integers(len(DISPLAYS))][0],
        display_height_px=DISPLAYS[rng.integers(len(DISPLAYS))][1],
        device_type="handheld" if rng.uniform() < 0.5 else "TV",
    )
    return features, display


def make_model_dataset(model_id, n, noise_sigma, seed, source_count=None):
    """Rows labeled by the model's TRUTH coefficients plus Gaussian noise.

    Returns (dataset, truth coefficients, noiseless predictions).
    """
    rng = np.random.default_rng(seed)
    truth = truth_coefficients(model_id)
    predictor = PREDICTORS[model_id]
    rows = []
    noiseless = []
    for i in range(n):
        features, display = random_point(rng)
        clean = predictor(features, display, truth).mos
        noisy = clean + (float(rng.normal(0.0, noise_sigma)) if noise_sigma else 0.0)
        source = f"src{i % source_count}" if source_count else f"src{i}"
        rows.append(DatasetRow(
            sequence_id=f"seq{i:04d}",
            features=features,
            display=display,
            subjective=SubjectiveRecord(
                sequence_id=f"seq{i:04d}",
                source_id=source,
                mos=min(max(noisy, 1.0), 5.0),
            ),
        ))
        noiseless.append(clean)
    return Dataset(tuple(rows)), truth, noiseless


def perturbed(coefficients, rng, relative=0.2):
    """Multiplicative +-`relative` jitter (structural zeros stay zero)."""
    values = tuple(v * (1.0 + float(rng.uniform(-relative, relative)))
                   for v in coefficients.values)
    return CoefficientSet(coefficients.model_id, values)
