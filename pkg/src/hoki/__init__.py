"""Post-hoc confidence calibration from label switches under random logit noise."""

from .baselines import TemperatureModel, temperature_apply, temperature_fit
from .bounds import BoundQuery, ce_bound, n_for_slack
from .calibrator import (
    CalibrationModel,
    FitDiagnostics,
    estimate_alpha,
    estimate_beta,
    fit,
    fixed_point_residual,
    predict,
    predict_batch,
)
from .core import (
    BinPartition,
    InvalidInputError,
    LabeledLogits,
    Prediction,
    argmax_label,
    bin_index,
    softmax_confidence,
)
from .io import load_dataset, load_model, save_dataset, save_model
from .metrics import BinReport, bin_report, confidence_stddev, ece
from .selection import GridConfig, SelectionResult, enumerate_grid, score_candidate, select_transform
from .synth import SynthConfig, generate, generate_split
from .transform import NoiseSpec, SwitchMatrix, TransformSet, apply, gamma, sample_transforms, switch_matrix

__version__ = "0.1.0"
