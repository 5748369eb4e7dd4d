"""Desk-scale exam-image grading: synthetic data, from-scratch CNNs, metrics."""

__version__ = "0.1.0"

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .engine import (
    AdamState,
    EpochStats,
    LabeledImages,
    ParamStore,
    TrainConfig,
    adam_step,
    backprop,
    init_params,
    train,
)
from .errors import (
    BuildError,
    ConfigError,
    DataError,
    ShapeError,
    TeegradeError,
    TrainingDiverged,
)
from .kernels import (
    ConvParams,
    conv2d,
    conv2d_backward,
    cross_entropy_grad,
    cross_entropy_loss,
    linear,
    linear_backward,
    maxpool2d,
    maxpool2d_backward,
    mse_loss,
    mse_loss_grad,
    relu,
    relu_backward,
    resize_bilinear,
    resize_bilinear_backward,
    softmax,
    softmax_backward,
)
from .metrics import (
    GroupedStats,
    IntervalBin,
    MetricsReport,
    accuracy,
    grouped_video_stats,
    icc,
    interval_rmse,
    krippendorff_alpha,
    pearson,
    rmse,
)
from .models import (
    Model,
    ModelSpec,
    VideoPrediction,
    build_model,
    model_spec,
    predict_video,
)
from .synthdata import (
    ExamRecord,
    FrameSet,
    GenConfig,
    checklist_score,
    generate_dataset,
    generate_records,
    load_frames,
    read_manifest,
    read_pgm,
    render_frame,
    simulate_raters,
    split_by_participant,
    write_pgm,
)
from .views import DEFAULT_VIEWS, VIEWS_BY_ID, Criterion, Structure, ViewSpec
