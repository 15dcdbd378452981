"""The nine parametric quality predictors.

Each predictor is a pure function (StreamFeatures [, DisplayParams],
CoefficientSet) -> Prediction. The final ``mos`` is always clamped to
[1, 5] after any model-native clamps, in that order; breakdowns expose the
intermediate quantities so fitting diagnostics and tests can see past the
clamps. Printed "log" means log10 throughout, "ln" means the natural log.

Domain violations (log of a non-positive value, zero denominators, a
non-positive power base) raise PredictionDomainError so callers that sweep
coefficient space can absorb them as penalties.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

from ..errors import ImputedFeatureWarning, PredictionDomainError, SchemaError
from ..features import DisplayParams, StreamFeatures
from .coefficients import CoefficientSet, coefficient_names
from .transforms import mos_from_r, r_from_mos

UVES_N1_ANCHOR = 4.0   # the standard's fixed N1 in the Qs combination
UVES_N2_SCALE = 100.0  # the standard's fixed N2
TAKAGI_COMPLEXITY_FLOOR = 1e-6
P1201_1_DEFAULT_CPX = 0.5


@dataclass(frozen=True)
class Prediction:
    """A model output: final MOS, the model's native-scale value before the
    MOS mapping, and named intermediates."""

    mos: float
    native_scale_value: float
    breakdown: dict[str, float] = field(default_factory=dict)


def _clamp(value: float, lo: float, hi: float) -> float:
    return min(max(value, lo), hi)


def _clamp_mos(value: float) -> float:
    return _clamp(value, 1.0, 5.0)


def _check_positive(name: str, value: float) -> None:
    if not (math.isfinite(value) and value > 0):
        raise PredictionDomainError(f"{name} must be positive and finite, got {value}")


def _warn_imputed(f: StreamFeatures, model: str, *fields: str) -> None:
    used = sorted(set(fields) & f.imputed)
    if used:
        warnings.warn(f"{model}: {', '.join(used)} imputed, not measured",
                      ImputedFeatureWarning, stacklevel=3)


def predict_g1070(f: StreamFeatures, k: CoefficientSet) -> Prediction:
    """Videophone opinion model: Gaussian in log frame rate around an
    optimal, bit-rate dependent frame rate."""
    a1, a2, a3, a4, a5, a6, a7, a8 = k.values
    br, fr = f.bitrate_kbps, f.framerate_fps
    _check_positive("bitrate_kbps", br)
    _check_positive("framerate_fps", fr)
    if a3 == 0:
        raise PredictionDomainError("a3 must be nonzero (bit-rate scale)")
    ratio = br / a3
    if ratio <= 0:
        raise PredictionDomainError("br_v/a3 must be positive for the logistic term")
    i_ofr = _clamp(a1 - a2 / (1.0 + ratio ** a4), 0.0, 4.0)
    o_fr = _clamp(a5 + a6 * br, 0.0, 30.0)
    if o_fr <= 0:
        raise PredictionDomainError("optimal frame rate clamped to 0; log undefined")
    d_frv = a7 + a8 * br
    if d_frv == 0:
        raise PredictionDomainError("frame-rate robustness term is zero")
    i_coding = i_ofr * math.exp(-((math.log(fr) - math.log(o_fr)) ** 2) / (2.0 * d_frv * d_frv))
    qv = 1.0 + i_coding
    return Prediction(
        mos=_clamp_mos(qv),
        native_scale_value=qv,
        breakdown={"i_ofr": i_ofr, "o_fr": o_fr, "d_frv": d_frv, "i_coding": i_coding, "qv": qv},
    )


def predict_p1201_1(f: StreamFeatures, k: CoefficientSet) -> Prediction:
    """Lower-resolution streaming model (Mobile TV class).

    The complexity factor is sqrt(br/AvgByteI) capped at 1.0; when the
    average I-frame size was imputed rather than measured the factor falls
    back to its neutral initial value 0.5.
    """
    c1, c2, c3, c4 = k.values
    br, fr = f.bitrate_kbps, f.framerate_fps
    _check_positive("bitrate_kbps", br)
    _check_positive("framerate_fps", fr)
    if f.is_imputed("avg_bytes_per_iframe"):
        warnings.warn("p1201_1: avg_bytes_per_iframe imputed; using cpx_video = 0.5",
                      ImputedFeatureWarning, stacklevel=2)
        cpx = P1201_1_DEFAULT_CPX
    else:
        if f.avg_bytes_per_iframe <= 0:
            raise PredictionDomainError("avg_bytes_per_iframe must be positive")
        cpx = min(math.sqrt(br / f.avg_bytes_per_iframe), 1.0)

    normbr = br * 8.0 * 30.0 / (1000.0 * min(30.0, fr))
    denom = c3 * cpx + c4
    if denom <= 0:
        raise PredictionDomainError("c3*cpx + c4 must be positive (power base and exponent)")
    qcod = 4.0 / (1.0 + (normbr / denom) ** denom)
    if fr < 24.0:
        qv = 5.0 - qcod
    else:
        qv = (5.0 - qcod) * (1.0 + c1 * cpx - c2 * cpx * math.log10(1000.0 / fr))
    return Prediction(
        mos=_clamp_mos(qv),
        native_scale_value=qv,
        breakdown={"qcod": qcod, "normbr": normbr, "cpx_video": cpx, "qv": qv},
    )


def predict_p1201_2(f: StreamFeatures, k: CoefficientSet) -> Prediction:
    """Higher-resolution (IPTV class) model on the 0-100 scale.

    Content complexity combines scene statistics: the scene with the
    smallest average I-frame size is weighted 16, others 1. The 0-100
    output maps to MOS through the standard cubic.
    """
    c1, c2, c3, c4 = k.values
    br, fr = f.bitrate_kbps, f.framerate_fps
    _check_positive("bitrate_kbps", br)
    _check_positive("framerate_fps", fr)
    if not f.scenes:
        raise PredictionDomainError("scene statistics required (none present)")
    pixels = f.num_pixels_frame
    if pixels <= 0:
        raise PredictionDomainError("frame pixel count must be positive")

    weight_sum = sum(s.weight * s.gop_count for s in f.scenes)
    size_sum = sum(s.avg_iframe_bytes * s.weight * s.gop_count for s in f.scenes)
    if size_sum <= 0:
        raise PredictionDomainError("scene I-frame sizes sum to zero")
    cpx = (weight_sum / size_sum) * (pixels * fr / 1000.0)

    bit_per_pixel = br * 1e6 / (pixels * fr)
    qcod = c1 * math.exp(c2 * bit_per_pixel) + c3 * cpx + c4
    qv = 100.0 - qcod
    native = _clamp(qv, 0.0, 100.0)
    return Prediction(
        mos=mos_from_r(native),
        native_scale_value=native,
        breakdown={"qcod": qcod, "bit_per_pixel": bit_per_pixel, "cpx_video": cpx, "qv": qv},
    )


def predict_p1203_mode3(f: StreamFeatures, d: DisplayParams, k: CoefficientSet) -> Prediction:
    """Bitstream-mode streaming video quality: quantization, upscaling and
    temporal degradations combined on the 0-100 scale.

    Clamp order follows the published sequence (MOSq, Dq, Du, Dt, D, then
    the handheld polynomial); ``quant`` is the [0, 1] quantization-
    degradation proxy carried by StreamFeatures.
    """
    q1, q2, q3, u1, u2, t1, t2, t3, h1, h2, h3, h4 = k.values
    fr = f.framerate_fps
    _check_positive("framerate_fps", fr)
    if not 0.0 <= f.quant <= 1.0:
        raise PredictionDomainError(f"quant must be in [0, 1], got {f.quant}")

    mosq_raw = q1 + q2 * math.exp(q3 * f.quant)
    mosq = _clamp(mosq_raw, 1.0, 5.0)
    dq = _clamp(100.0 - r_from_mos(mosq), 0.0, 100.0)

    cod_res = f.num_pixels_frame
    dis_res = d.display_pixels
    scale_factor = max(dis_res / cod_res, 1.0)
    du_arg = u2 * (scale_factor - 1.0) + 1.0
    if du_arg <= 0:
        raise PredictionDomainError("upscaling log argument is non-positive")
    du = _clamp(u1 * math.log10(du_arg), 0.0, 100.0)

    temporal_denominator = t3 + fr
    if temporal_denominator == 0:
        raise PredictionDomainError("t3 + framerate is zero")
    temporal_factor = (t1 - t2 * fr) / temporal_denominator
    dt1 = 100.0 * temporal_factor
    dt2 = dq * temporal_factor
    dt3 = du * temporal_factor
    dt = _clamp(dt1 - dt2 - dt3, 0.0, 100.0) if fr < 24.0 else 0.0

    degradation = _clamp(dq + du + dt, 0.0, 100.0)
    q = 100.0 - degradation
    mos = mosq if (du == 0.0 and dt == 0.0) else mos_from_r(q)
    if d.device_type == "handheld":
        mos = _clamp(h1 + h2 * mos + h3 * mos ** 2 + h4 * mos ** 3, 1.0, 5.0)
    return Prediction(
        mos=_clamp_mos(mos),
        native_scale_value=q,
        breakdown={
            "mosq_raw": mosq_raw, "mosq": mosq, "dq": dq, "du": du,
            "dt1": dt1, "dt2": dt2, "dt3": dt3, "dt": dt,
            "scale_factor": scale_factor, "d": degradation, "q": q, "quant": f.quant,
        },
    )


def predict_yamagishi(f: StreamFeatures, k: CoefficientSet) -> Prediction:
    """Gaussian-in-log-framerate model with a logistic bit-rate ceiling."""
    c1, c2, c3, c4, c5, c6, c7 = k.values
    br, fr = f.bitrate_kbps, f.framerate_fps
    _check_positive("bitrate_kbps", br)
    _check_positive("framerate_fps", fr)
    f_o = c1 + c2 * br
    if f_o <= 0:
        raise PredictionDomainError("optimal frame rate must be positive")
    d_fr = c3 + c4 * br
    if d_fr == 0:
        raise PredictionDomainError("frame-rate robustness term is zero")
    if c6 <= 0:
        raise PredictionDomainError("c6 must be positive (bit-rate scale)")
    v0 = c5 * (1.0 - 1.0 / (1.0 + (br / c6) ** c7))
    v_c = v0 * math.exp(-((math.log(fr) - math.log(f_o)) ** 2) / (2.0 * d_fr * d_fr))
    qv = 1.0 + v_c
    return Prediction(
        mos=_clamp_mos(qv),
        native_scale_value=qv,
        breakdown={"f_o": f_o, "d_fr": d_fr, "v0": v0, "v_c": v_c, "qv": qv},
    )


def predict_ries(f: StreamFeatures, k: CoefficientSet) -> Prediction:
    """Content-class-conditioned rational model in bit rate and frame rate.

    Classification itself is an input; a missing class falls back to class 0
    with a warning.
    """
    br, fr = f.bitrate_kbps, f.framerate_fps
    _check_positive("bitrate_kbps", br)
    _check_positive("framerate_fps", fr)
    content_class = f.content_class
    if content_class is None:
        warnings.warn("ries: content_class absent, defaulting to class 0",
                      ImputedFeatureWarning, stacklevel=2)
        content_class = 0
    c1, c2, c3, c4, c5 = k.ries_class_row(content_class)
    qv = c1 + c2 * br + c3 / br + c4 * fr + c5 / fr
    return Prediction(
        mos=_clamp_mos(qv),
        native_scale_value=qv,
        breakdown={"qv": qv, "content_class": float(content_class)},
    )


def predict_joskowicz(f: StreamFeatures, k: CoefficientSet) -> Prediction:
    """Logistic bit-rate model whose shape parameters follow the clip's
    spatio-temporal activity (SAD per pixel)."""
    c1, c2, c3, c4, c5, c6 = k.values
    br = f.bitrate_kbps
    _check_positive("bitrate_kbps", br)
    sad = f.sad_per_pixel
    if sad < 0:
        raise PredictionDomainError("sad_per_pixel must be >= 0")
    _warn_imputed(f, "joskowicz", "sad_per_pixel")
    try:
        v1 = c1 * sad ** c2 + c3
        v2 = c4 * sad ** c5 + c6
    except (ValueError, ZeroDivisionError) as exc:  # 0**negative, complex powers
        raise PredictionDomainError(f"SAD power term undefined: {exc}") from exc
    if v1 <= 0:
        raise PredictionDomainError("v1 must be positive (bit-rate scale)")
    v_c = 4.0 * (1.0 - 1.0 / (1.0 + (br / v1) ** v2))
    qv = 1.0 + v_c
    return Prediction(
        mos=_clamp_mos(qv),
        native_scale_value=qv,
        breakdown={"v1": v1, "v2": v2, "v_c": v_c, "qv": qv},
    )


def predict_takagi(f: StreamFeatures, k: CoefficientSet) -> Prediction:
    """Resolution/frame-rate aware sigmoid in QP.

    The coding-complexity term QP - e*ln(br) is floored at 1e-6 before the
    logarithms so coefficient sweeps cannot crash on high bit rates; the
    printed mixed log/ln convention is kept (the beta row uses ln for its
    complexity term, everything else log10).
    """
    a1, a2, a3, b1, b2, b3, c1, c2, c3, d1, d2, d3, e = k.values
    br, fr = f.bitrate_kbps, f.framerate_fps
    r = float(f.num_pixels_frame)
    _check_positive("bitrate_kbps", br)
    _check_positive("framerate_fps", fr)
    _check_positive("resolution", r)
    qp = f.avg_qp

    v_c = max(qp - e * math.log(br), TAKAGI_COMPLEXITY_FLOOR)
    log_r = math.log10(r)
    log_fr = math.log10(fr)
    log_vc = math.log10(v_c)
    alpha = a1 * log_r + b1 * log_fr + c1 * log_vc + d1
    beta = a2 * log_r + b2 * log_fr + c2 * math.log(v_c) + d2
    gamma = a3 * log_r + b3 * log_fr + c3 * log_vc + d3
    if gamma == 0:
        raise PredictionDomainError("gamma is zero")
    try:
        denominator = 1.0 / gamma + math.exp(alpha * (qp - beta))
    except OverflowError as exc:
        raise PredictionDomainError("sigmoid exponent overflow") from exc
    if denominator == 0:
        raise PredictionDomainError("sigmoid denominator is zero")
    mos_p = -1.0 / denominator + gamma
    return Prediction(
        mos=_clamp_mos(mos_p),
        native_scale_value=mos_p,
        breakdown={"alpha": alpha, "beta": beta, "gamma": gamma, "v_c": v_c, "mos_p": mos_p},
    )


def _uves_qcod(f: StreamFeatures, values: tuple[float, ...]) -> dict[str, float]:
    """Encoding-quality sub-model shared by Mode 1 and the 1.1 ablation."""
    n1, n2, n3, n4, n5, n6, n7, n8, n9, n10, n11 = values[:11]
    br, fr = f.bitrate_kbps, f.framerate_fps
    _check_positive("bitrate_kbps", br)
    _check_positive("framerate_fps", fr)
    if f.avg_bytes_per_iframe <= 0:
        raise PredictionDomainError("avg_bytes_per_iframe must be positive")

    kfr_imp = n2 * f.key_frame_rate + n3
    qp_fr = (n4 + n5 * (f.avg_qp / 51.0) ** n6 + n7 / fr
             + n8 * f.iflicker_count + n9 * (f.max_qp - f.min_qp))
    cpx = min(math.sqrt(br / f.avg_bytes_per_iframe) + n10 * f.skip_ratio, 1.0)
    mv_imp = n11 * f.avg_mv * (1.0 - fr / 30.0)
    try:
        qcod_raw = kfr_imp * math.exp(n1 * (qp_fr + cpx + mv_imp))
    except OverflowError as exc:
        raise PredictionDomainError("encoding-quality exponent overflow") from exc
    return {
        "kfr_imp": kfr_imp,
        "qp_fr": qp_fr,
        "cpx": cpx,
        "mv_imp": mv_imp,
        "qcod_raw": qcod_raw,
        "qcod": min(max(qcod_raw, 1.0), 5.0),
    }


def predict_uves_model1_1(f: StreamFeatures, k: CoefficientSet) -> Prediction:
    """Encoding-quality sub-model alone (no terminal display parameters)."""
    if k.model_id not in ("uves_model1_1", "uves_mode1"):
        raise SchemaError(f"expected uves coefficients, got {k.model_id}")
    _warn_imputed(f, "uves_model1_1", "skip_ratio", "avg_mv", "avg_bytes_per_iframe",
                  "key_frame_rate")
    parts = _uves_qcod(f, k.values)
    qcod = parts["qcod"]
    return Prediction(mos=_clamp_mos(qcod), native_scale_value=parts["qcod_raw"], breakdown=parts)


def predict_uves_mode1(f: StreamFeatures, d: DisplayParams, k: CoefficientSet) -> Prediction:
    """Full Mode 1: encoding quality folded into display quality.

    Display quality uses the VIDEO's diagonal pixel count over the physical
    screen size (the standard's ppi definition).
    """
    (n1, n2, n3, n4, n5, n6, n7, n8, n9, n10, n11,
     n12, n13, n14, n15, n16, n17) = k.values
    _warn_imputed(f, "uves_mode1", "skip_ratio", "avg_mv", "avg_bytes_per_iframe",
                  "key_frame_rate")
    parts = _uves_qcod(f, k.values)
    qcod = parts["qcod"]

    if d.screen_size_inches == 0:
        raise PredictionDomainError("screen size must be nonzero")
    ppi = math.hypot(f.width_px, f.height_px) / d.screen_size_inches
    if n13 == 0:
        raise PredictionDomainError("n13 must be nonzero (display exponent scale)")
    screen_ref = n15 * d.screen_size_inches ** n16
    if screen_ref <= 0:
        raise PredictionDomainError("display reference ppi must be positive")
    try:
        q_disp_raw = n14 * (1.0 - 1.0 / (1.0 + (ppi / screen_ref) ** n17))
        q_disp = max(1.0, min(5.0, q_disp_raw))
        qd = q_disp - (q_disp - 1.0) / (1.0 + math.exp(n12 * f.avg_qp / n13))
    except OverflowError as exc:
        raise PredictionDomainError("display-quality exponent overflow") from exc

    qs_raw = qd - (5.0 - qcod) * (qd - UVES_N1_ANCHOR) / UVES_N2_SCALE
    breakdown = dict(parts)
    breakdown.update({"ppi": ppi, "q_disp_raw": q_disp_raw, "q_disp": q_disp,
                      "qd": qd, "qs_raw": qs_raw})
    return Prediction(mos=_clamp_mos(qs_raw), native_scale_value=qs_raw, breakdown=breakdown)


#: uniform dispatch: every entry takes (features, display, coefficients)
PREDICTORS: dict[str, Callable[[StreamFeatures, Optional[DisplayParams], CoefficientSet], Prediction]] = {
    "g1070": lambda f, d, k: predict_g1070(f, k),
    "p1201_1": lambda f, d, k: predict_p1201_1(f, k),
    "p1201_2": lambda f, d, k: predict_p1201_2(f, k),
    "p1203_mode3": lambda f, d, k: predict_p1203_mode3(f, _require_display(d), k),
    "yamagishi": lambda f, d, k: predict_yamagishi(f, k),
    "ries": lambda f, d, k: predict_ries(f, k),
    "joskowicz": lambda f, d, k: predict_joskowicz(f, k),
    "takagi": lambda f, d, k: predict_takagi(f, k),
    "uves_mode1": lambda f, d, k: predict_uves_mode1(f, _require_display(d), k),
    "uves_model1_1": lambda f, d, k: predict_uves_model1_1(f, k),
}


def _require_display(d: Optional[DisplayParams]) -> DisplayParams:
    if d is None:
        raise PredictionDomainError("this model requires display parameters")
    return d


def predict(model_id: str, features: StreamFeatures,
            display: Optional[DisplayParams], coefficients: CoefficientSet) -> Prediction:
    """Dispatch to a model by id, validating the coefficient tag."""
    try:
        predictor = PREDICTORS[model_id]
    except KeyError:
        raise SchemaError(f"unknown model id {model_id!r}; known ids: "
                          f"{', '.join(PREDICTORS)}") from None
    if coefficients.model_id != model_id and not (
            model_id == "uves_model1_1" and coefficients.model_id == "uves_mode1"):
        raise SchemaError(f"coefficients are for {coefficients.model_id!r}, "
                          f"model is {model_id!r}")
    coefficient_names(model_id)
    return predictor(features, display, coefficients)
