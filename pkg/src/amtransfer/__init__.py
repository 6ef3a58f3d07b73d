"""Transfer-learning toolkit for small-data tabular regression.

Five transfer strategies over two base learners (regression trees and a
small feed-forward network), plus a benchmark harness that measures
median MSE improvement and positive-transfer ratio over repeated random
splits.
"""

from .align import AlignmentMap, fit_alignment, fit_sa_dtr, fit_sa_i_dtr, transform_source
from .bench import (
    MODELS,
    CellResult,
    GridCell,
    RunReport,
    Setting,
    SETTINGS,
    build_grid,
    improvement,
    mse,
    run_cell,
    run_grid,
    summarize,
)
from .boost import (
    BoostEnsemble,
    BoostHyperparams,
    WeightedPool,
    adjusted_errors,
    boost_stage,
    fit_tradaboost,
    predict_ensemble,
    source_weight_update,
    weighted_median,
)
from .data import (
    DEFAULT_TASKS,
    Dataset,
    Preprocessor,
    Sample,
    SplitPlan,
    TaskSpec,
    apply_preprocessor,
    fit_preprocessor,
    generate_synthetic,
    load_csv,
    sample_split,
    write_csv,
)
from .nnet import MtlModel, NetModel, TrainConfig, fine_tune, forward, init_net, train, train_mtl
from .transform import (
    GaConfig,
    GaResult,
    ReformedModel,
    TransformParams,
    fit_re_dtr,
    ga_minimize,
    reformed_predict,
)
from .tree import DEFAULT_TREE, TreeHyperparams, TreeModel, fit_tree

__version__ = "0.1.0"
