"""Parametric quality models: coefficient handling, scale transforms and
the nine predictors."""

from .coefficients import (
    COEFFICIENT_NAMES,
    MODEL_IDS,
    RIES_CLASS_COUNT,
    STANDARD_MODEL_IDS,
    CoefficientSet,
    coefficient_names,
    default_coefficients,
    load_coefficients,
    save_coefficients,
)
from .predictors import (
    PREDICTORS,
    Prediction,
    predict,
    predict_g1070,
    predict_joskowicz,
    predict_p1201_1,
    predict_p1201_2,
    predict_p1203_mode3,
    predict_ries,
    predict_takagi,
    predict_uves_mode1,
    predict_uves_model1_1,
    predict_yamagishi,
)
from .transforms import mos_from_r, r_from_mos

__all__ = [
    "COEFFICIENT_NAMES",
    "MODEL_IDS",
    "RIES_CLASS_COUNT",
    "STANDARD_MODEL_IDS",
    "CoefficientSet",
    "coefficient_names",
    "default_coefficients",
    "load_coefficients",
    "save_coefficients",
    "PREDICTORS",
    "Prediction",
    "predict",
    "predict_g1070",
    "predict_joskowicz",
    "predict_p1201_1",
    "predict_p1201_2",
    "predict_p1203_mode3",
    "predict_ries",
    "predict_takagi",
    "predict_uves_mode1",
    "predict_uves_model1_1",
    "predict_yamagishi",
    "mos_from_r",
    "r_from_mos",
]
