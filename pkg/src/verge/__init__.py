"""Binocular eye-vergence analysis toolkit.

Ingests binocular gaze streams, segments oculomotor events, extracts a
120-feature vector per sliding window, classifies internal thought with a
from-scratch random forest under leave-one-participant-out evaluation, and
runs a real-time mind-alert engine over a one-second frame buffer.
"""
from .annotate import (
    BlurSchedule,
    DeblurEvent,
    LABEL_DELIBERATE,
    LABEL_INTERNAL,
    LABEL_SPONTANEOUS,
    LabeledSegment,
    derive_labels,
    label_windows,
    make_schedule,
)
from .features import (
    FEATURE_MANIFEST,
    FEATURE_SUBSETS,
    DescStats,
    FeatureTable,
    FeatureVector,
    Window,
    desc_stats,
    extract_features,
    featurize,
    generate_windows,
)
from .forest import (
    ForestModel,
    ZeroRModel,
    features_per_split,
    load_model,
    predict,
    save_model,
    train_forest,
    train_zeror,
    tune_depth,
)
from .evaluation import EvalConfig, EvalReport, confusion_matrix, lopo_eval, weighted_f1
from .gaze import (
    GazeSample,
    Recording,
    ScreenConfig,
    one_euro_filter,
    parse_recording,
    prepare_recording,
    resample,
    write_recording,
)
from .oculomotor import (
    Blink,
    Fixation,
    OculomotorEvents,
    Saccade,
    detect_blinks,
    detect_events,
    detect_fixations_idt,
    detect_saccades,
    pair_fixations,
)
from .realtime import AlertEngine, AlertEvent, collect_serve, replay, stream_labels
from .synth import SynthSpec, alternating_plan, generate
from .vergence import (
    EnclosingCircle,
    FixationVergence,
    VergenceSampleStats,
    eye_geometry,
    fixation_vergence,
    focus_displacement,
    min_enclosing_circle,
    pair_stats,
)

__version__ = "0.1.0"
