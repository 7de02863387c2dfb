"""Attention-filtered preprocessing and evaluation toolkit for multi-person
action detection pipelines: foveal/background-blur/crop filters over frames
and optical-flow stacks, a three-head classification loss with analytic
gradients, segment score voting, temporally contiguous dataset
partitioning, and video-mAP evaluation.
"""

from .avadata import (
    AnnotationRecord,
    ParseError,
    PartitionReport,
    build_partition,
    class_distribution,
    parse_annotations,
    parse_label_map,
)
from .detmetrics import (
    Detection,
    GroundTruth,
    NoGroundTruth,
    average_precision,
    iou,
    mean_ap,
)
from .filters import (
    DEFAULT_FOVEA_LEVELS,
    DEFAULT_FOVEA_SIGMA1,
    DEFAULT_GBB_SIGMA,
    FoveaParams,
    apply_crop,
    apply_fovea,
    apply_gbb,
    apply_to_stack,
    compose_fovea,
    fovea_kernel,
)
from .imgcore import (
    BoundingBox,
    BoxOutsideImage,
    FlowStack,
    Image,
    InvalidNormalizedBox,
    UnsupportedFormat,
    clamp_box,
    denormalize_box,
    read_flow,
    read_flow_stack,
    read_image,
    write_flow,
    write_image,
)
from .multihead_loss import (
    HeadGradients,
    LabelVector,
    LengthMismatch,
    ScoreVector,
    TargetOutOfRange,
    bce_sigmoid,
    generalized_binary_loss,
    generalized_binary_loss_grad,
    single_head_loss,
    softmax_ce,
    sum_of_sigmoids_loss,
)
from .pyramid import (
    GaussianStack,
    LaplacianStack,
    build_gaussian_stack,
    build_laplacian_stack,
    gaussian_blur,
    gaussian_kernel_1d,
    reconstruct,
)
from .voting import (
    DEFAULT_VOTE_THRESHOLD,
    EmptyScoreList,
    HeadSizeMismatch,
    SegmentPrediction,
    SegmentSpec,
    aggregate_votes,
    aggregate_votes_single_label,
    flow_window,
    subsample_indices,
)

__version__ = "0.1.0"
