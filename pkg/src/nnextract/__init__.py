"""Neural-network object extraction from grayscale rasters.

A library and CLI that classifies image windows with a small sigmoid
network over raw pixels plus co-occurrence texture statistics, assembles
accepted pixels into objects, disambiguates them with declarative shape
rules, bridges breaks with curve-fit interpolation, and scores results
with overall accuracy and Cohen's kappa.
"""

from .evaluate import (
    AccuracyReport,
    ArealComparison,
    ConfusionMatrix,
    accuracy_report,
    areal_extent,
    confusion_matrix,
    format_report,
    format_report_csv,
    kappa,
    overall_accuracy,
)
from .geometry import (
    CurveModel,
    ObjectRecord,
    bridge_gaps,
    connected_components,
    endpoints,
    fit_curve,
    skeleton,
)
from .mlp import (
    MlpNetwork,
    TrainConfig,
    TrainingDiverged,
    TrainingSet,
    classify,
    forward,
    forward_batch,
    gradient_check,
    init_network,
    train_backprop,
)
from .pipeline import (
    BridgeParams,
    BundleError,
    ExtractionResult,
    LabeledObject,
    ModelBundle,
    PipelineError,
    PipelineParams,
    extract,
    load_bundle,
    save_bundle,
    train_pipeline,
)
from .preprocess import CannyParams, StructuringElement, canny, dilate, erode, opening
from .raster import (
    Mask,
    PgmError,
    Raster,
    Window,
    flatten_window,
    histogram_stretch,
    load_mask,
    load_raster,
    mask_to_raster,
    raster_to_mask,
    save_mask,
    save_raster,
)
from .rules import (
    RuleError,
    RuleSet,
    default_rules_text,
    evaluate_rules,
    explain,
    format_rules,
    parse_rules,
)
from .scene import SceneSpec, generate_scene, harvest_patches, parse_scene_spec
from .som import SomConfig, SomGrid, best_matching_unit, train_som
from .texture import (
    FEATURE_NAMES,
    GlcmMatrix,
    HaralickVector,
    compute_glcm,
    haralick_features,
    haralick_features_array,
)

__version__ = "0.1.0"
