"""Dense-CRF stereo matching with unrolled mean-field inference.

A Siamese descriptor network and an inner-product join build a matching
cost volume; a densely connected CRF with Gaussian pairwise kernels,
solved by unrolled mean-field iterations over a permutohedral-lattice
filter, regularizes it. Every stage carries a hand-derived backward
pass, and every approximate component has a brute-force oracle.
"""

from .errors import (
    EmptyMaskError,
    FormatError,
    GenerationError,
    NumericError,
    ParameterError,
    ShapeError,
    StereoCrfError,
    TapeError,
    UnsupportedDimensionError,
)
from .features import KernelWidths, bilateral_features, spatial_features
from .filtering import (
    FilterBank,
    gaussian_filter_backward,
    gaussian_filter_bruteforce,
    gaussian_filter_lattice,
)
from .join import (
    join_backward_left,
    join_backward_right,
    join_forward,
    join_right_reference,
)
from .losses import cross_entropy, entropy_penalty, piecewise_linear
from .meanfield import (
    CrfGradients,
    CrfParams,
    compute_energy,
    init_compatibility,
    meanfield_backward,
    meanfield_forward,
    params_from_text,
    params_to_text,
)
from .metrics import EvalReport, error_rate, evaluate
from .optim import AdagradState, NMResult, adagrad_step, nm_calibrate
from .permutohedral import PermutohedralLattice
from .sgm import (
    SgmConfig,
    argmin_disparity,
    left_right_check,
    median_filter,
    postprocess,
    probabilities_to_cost,
    sgm_aggregate,
    similarity_to_cost,
    subpixel_refine,
)
from .siamese import (
    DescriptorField,
    SiameseNet,
    create_net,
    describe,
    describe_backward,
    describe_forward,
    hinge_pretrain,
    sample_patch_pairs,
)
from .synthetic import StereoSample, make_stereogram
from .training import (
    StereoModel,
    TrainLogRow,
    build_training_mask,
    calibration_objective,
    infer_pair,
    params_from_point,
    train_schedule,
)
from .volume import (
    INVALID_DISPARITY,
    SENTINEL_SCORE,
    CostVolume,
    GradientTape,
    argmax_disparity,
    softmax_backward,
    softmax_over_disparities,
    valid_mask,
)

__version__ = "0.1.0"

__all__ = [
    "AdagradState",
    "CostVolume",
    "CrfGradients",
    "CrfParams",
    "DescriptorField",
    "EmptyMaskError",
    "EvalReport",
    "FilterBank",
    "FormatError",
    "GenerationError",
    "GradientTape",
    "INVALID_DISPARITY",
    "KernelWidths",
    "NMResult",
    "NumericError",
    "ParameterError",
    "PermutohedralLattice",
    "SENTINEL_SCORE",
    "SgmConfig",
    "ShapeError",
    "SiameseNet",
    "StereoCrfError",
    "StereoModel",
    "StereoSample",
    "TapeError",
    "TrainLogRow",
    "UnsupportedDimensionError",
    "argmax_disparity",
    "argmin_disparity",
    "bilateral_features",
    "build_training_mask",
    "calibration_objective",
    "compute_energy",
    "create_net",
    "cross_entropy",
    "describe",
    "describe_backward",
    "describe_forward",
    "entropy_penalty",
    "error_rate",
    "evaluate",
    "gaussian_filter_backward",
    "gaussian_filter_bruteforce",
    "gaussian_filter_lattice",
    "hinge_pretrain",
    "infer_pair",
    "init_compatibility",
    "join_backward_left",
    "join_backward_right",
    "join_forward",
    "join_right_reference",
    "left_right_check",
    "make_stereogram",
    "meanfield_backward",
    "meanfield_forward",
    "median_filter",
    "nm_calibrate",
    "adagrad_step",
    "params_from_point",
    "params_from_text",
    "params_to_text",
    "piecewise_linear",
    "postprocess",
    "probabilities_to_cost",
    "sample_patch_pairs",
    "sgm_aggregate",
    "similarity_to_cost",
    "softmax_backward",
    "softmax_over_disparities",
    "spatial_features",
    "subpixel_refine",
    "train_schedule",
    "valid_mask",
]
