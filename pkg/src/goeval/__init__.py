"""goeval: evaluate Go game records and predict player attributes.

Pipeline: parse SGF records, replay them on a legal-move board to get per-move
annotations, aggregate colored game sets into feature vectors (patterns,
sente/gote sequences, border distance, captured stones, win/loss statistic),
then train and cross-validate bagged neural networks against a mean-regression
baseline.
"""

__version__ = "0.1.0"

from .board import (
    Board,
    IllegalMoveError,
    AnnotationError,
    MoveAnnotation,
    PatternKey,
    RawPattern,
    annotate_game,
    border_distance,
    canonicalize,
    extract_raw_pattern,
    gridcular_distance,
)
from .crossval import CVReport, LabeledDataset, cross_validate, feature_ablation, kfold_split, rmse
from .features import (
    EvaluationVector,
    FeatureConfig,
    PatternVocabulary,
    PRESETS,
    STRENGTH_CONFIG,
    STYLE_CONFIG,
    annotate_set,
    build_vocabulary,
    border_distance_feature,
    captured_stones_feature,
    evaluate_set,
    pattern_feature,
    sente_gote_feature,
    winloss_feature,
)
from .model import (
    BaggedModel,
    MeanRegressor,
    ScalerParams,
    fit_scaler,
    predict,
    predict_batch,
    train_bagged,
    train_mean,
    train_network,
)
from .records import (
    BLACK,
    WHITE,
    ColoredGameSet,
    GameRecord,
    Outcome,
    ParseError,
    Rank,
    assemble_strength_sets,
    assemble_style_sets,
    parse_rank,
    parse_result,
    parse_sgf,
    rank_to_target,
    serialize_sgf,
)
