"""No-reference bitstream-layer video quality assessment toolkit.

Nine parametric MOS predictors, H.264 Annex-B feature extraction, nonlinear
least-squares coefficient fitting and a source-aware cross-validation
harness with the PCC/RMSE/outlier-ratio metric suite.
"""

__version__ = "0.1.0"

from .bitstream import NalUnit, SpsInfo, extract_frames, parse_sps, read_exp_golomb, split_annexb
from .errors import (
    BitvqaError,
    ExtractionError,
    FeatureError,
    FittingError,
    ImputedFeatureWarning,
    MalformedStreamError,
    PredictionDomainError,
    SchemaError,
    UndefinedMetricError,
    UnsupportedFeatureError,
)
from .evaluation import (
    EvalReport,
    FoldPlan,
    compare_models,
    cross_validate,
    make_folds,
    outlier_ratio,
    pcc,
    rmse,
)
from .features import (
    DisplayParams,
    FrameRecord,
    FrameType,
    SceneStats,
    StreamFeatures,
    SubjectiveRecord,
    aggregate_features,
    detect_iflicker,
    read_frame_csv,
    segment_scenes,
    write_frame_csv,
)
from .fitting import (
    Dataset,
    DatasetRow,
    FitResult,
    fit,
    load_dataset_csv,
    objective,
    write_dataset_csv,
)
from .models import (
    MODEL_IDS,
    STANDARD_MODEL_IDS,
    CoefficientSet,
    Prediction,
    default_coefficients,
    load_coefficients,
    mos_from_r,
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
    r_from_mos,
    save_coefficients,
)
