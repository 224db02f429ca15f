"""Depth-sensitive fully-connected CRF refinement for RGB-D semantic
segmentation: score-map refinement by mean-field inference with
position/color/depth Gaussian kernels, plus depth preprocessing,
evaluation metrics, and a random-search parameter tuner."""

from .core import (
    ClassPalette,
    ConsistencyReport,
    DepthImage,
    DimensionMismatchError,
    IGNORE_LABEL,
    LabelMap,
    MarginalField,
    NormalizedDepth,
    RgbImage,
    UnaryField,
    argmax_labels,
    default_palette,
    sunrgbd_palette,
    validate_dimensions,
)
from .depthprep import (
    DepthStats,
    UnfillableDepthError,
    depth_stats,
    fill_invalid,
    normalize_depth_range,
    normalize_depth_to_rgb,
    sample_is_usable,
)
from .inference import (
    Backend,
    BruteForceLimitError,
    InferenceConfig,
    appearance_features,
    meanfield_step,
    run_inference,
    smoothness_features,
)
from .lattice import (
    FeatureMatrix,
    PermutohedralLattice,
    build_lattice,
    gaussian_filter_bruteforce,
    gaussian_filter_lattice,
)
from .metrics import (
    ConfusionMatrix,
    accumulate,
    classwise_iou,
    mean_accuracy,
    mean_iou,
    pixel_accuracy,
)
from .potentials import (
    CrfParams,
    KernelVariant,
    PixelFeature,
    appearance_joint,
    appearance_split,
    pairwise,
    potts,
    smoothness_kernel,
    total_energy,
    unary_from_scores,
)
from .tuner import (
    SearchConfig,
    SearchSpace,
    TrialRecord,
    evaluate_config,
    random_search,
    sample_config,
)

__version__ = "0.1.0"
