"""Flame-image soft sensor for the combustion excess air coefficient.

The pipeline: decode frames and grid them into local windows, fit an
ideal-flame statistical model from reference frames, score frames
against it with Gaussian-similarity features, and regress λ with a small
tanh network trained by Levenberg–Marquardt or scaled conjugate
gradient.  A seeded synthetic rig provides end-to-end ground truth.
"""

from .errors import (
    ConfigError,
    ConfigInvalid,
    DataError,
    FlameSenseError,
    NumericalError,
)
from .imaging import (
    Channel,
    ChannelPlane,
    GridSpec,
    RgbImage,
    Window,
    channels_label,
    decode_image,
    extract_channel,
    grid_windows,
    load_image,
    parse_channels,
    window_view,
)
from .flame_model import (
    COV_SUBSETS,
    IDEAL_BAND,
    ChannelStats,
    CovMatrix,
    IdealFlameModel,
    channel_cov,
    channel_mean,
    channel_std,
    fit_ideal_model,
    load_model,
    save_model,
)
from .similarity_features import (
    FeatureMethod,
    FeatureVector,
    GmmWeights,
    compute_features,
    feat_gmm,
    feat_mvn,
    feat_naive_bayes,
    feat_sum_similarity,
    feature_length,
    gmm_weight_grid,
    pdf_uni,
    select_gmm_weights,
)
from .baseline_features import (
    BASELINE_LENGTHS,
    BaselineId,
    compute_baseline,
)
from .dataset import (
    FeatureTable,
    FrameIndex,
    LambdaLog,
    SplitSpec,
    Standardizer,
    SyncedDataset,
    cubic_interp,
    read_feature_table,
    read_frame_index,
    read_lambda_log,
    read_manifest,
    split,
    standardize_apply,
    standardize_fit,
    standardize_invert,
    sync,
    write_feature_table,
    write_frame_index,
    write_lambda_log,
    write_manifest,
)
from .ann import (
    HIDDEN_UNITS,
    MlpModel,
    StopReason,
    TrainConfig,
    TrainReport,
    TrainerId,
    cost,
    forward,
    gradient,
    init_weights,
    predict_batch,
    residual_jacobian,
    train_lm,
    train_scg,
)
from .evaluation import (
    EvalReport,
    mse,
    pearson_r,
    report_table,
    run_experiment,
)
from .synth import (
    RigConfig,
    generate_session,
    ideal_reference_frames,
    lambda_profile,
    reference_lambdas,
    render_frame,
)
from .predictor import (
    Predictor,
    build_predictor,
    load_predictor,
    predict_image,
    save_predictor,
)

__version__ = "0.1.0"
