"""Point-cloud scene mixing, spatial-prior analytics, camera-LiDAR bridging,
a desk-scale semi-supervised trainer, and a synthetic rotating-beam scanner.
"""

from ._backend import BACKEND
from .camera import (
    CalibrationParams,
    Correspondence,
    ImagePlane,
    masked_cosine_loss,
    paint_points,
    paint_points_multi,
    project_points,
)
from .cloud import (
    IGNORE_ID,
    BeamPartition,
    GridPartition,
    PointCloud,
    RangeImage,
    check_labels,
)
from .errors import (
    ConfigError,
    EmptyInputError,
    FormatError,
    ValidationError,
)
from .geometry import (
    assign_areas,
    assign_grid_areas,
    azimuth,
    inclination,
    make_inclination_partition,
    range_view_rasterize,
    scan_range,
)
from .mixing import (
    SCAN_A,
    SCAN_B,
    Box3,
    MixOutput,
    cutmix_area,
    cutout_area,
    grid_mix,
    laser_mix,
    multi_modal_laser_mix,
    point_mixup,
    random_box,
    scene_concat,
)
from .model import (
    EvalResult,
    FeatureScaler,
    ModelParams,
    ProjectionHead,
    PseudoLabels,
    c2l_loss,
    cross_entropy_loss,
    ema_update,
    evaluate,
    featurize,
    forward,
    forward_logits,
    generate_pseudo_labels,
    lkg_loss,
    mean_teacher_loss,
    softmax,
)
from .priors import (
    PriorReport,
    class_area_distribution,
    empirical_conditional_entropy,
    label_entropy_given_areas,
    prior_heatmap,
)
from .simulate import (
    BoxPrim,
    CylinderPrim,
    GroundPlane,
    SceneSpec,
    default_prototypes,
    default_scene_template,
    make_benchmark,
    paint_benchmark,
    simulate_scan,
)
from .train import (
    LossReport,
    LossWeights,
    PrototypeScoreProvider,
    SplitPlan,
    TrainConfig,
    TrainResult,
    run_semi_supervised,
    split_frames,
    total_loss,
)

__version__ = "0.1.0"
