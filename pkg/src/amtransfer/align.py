"""Feature-space transfer: map source outputs into the target's space.

A source tree f is trained, then a length-6 vector h solves the least
squares problem A h ~= y_t with A = [X_t, f(X_t), 1]. Applying h to
[X_s, y_s, 1] yields transformed source outputs that can be pooled with
target data, either for a plain tree fit or as the source side of the
boosted transfer fit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boost import BoostEnsemble, BoostHyperparams, DEFAULT_BOOST, fit_tradaboost
from .data import Dataset, N_FEATURES
from .errors import EmptyDatasetError, SizeError
from .tree import DEFAULT_TREE, TreeHyperparams, TreeModel, fit_tree, fit_tree_arrays

ALIGN_DIM = N_FEATURES + 2


@dataclass(frozen=True, eq=False)
class AlignmentMap:
    """Fitted output-space map: the 6-vector h and the source model it wraps."""

    h: np.ndarray
    source_model: TreeModel


def design_matrix(source_model: TreeModel, x: np.ndarray) -> np.ndarray:
    """[x, f(x), 1] rows, shape (n, 6)."""
    x = np.asarray(x, dtype=np.float64)
    return np.column_stack([x, source_model.predict_batch(x), np.ones(x.shape[0])])


def solve_alignment(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Least-squares solve by SVD; minimum-norm on rank deficiency.

    Equivalent to the normal-equations solution whenever a has full
    column rank, but does not square the condition number.
    """
    h, *_ = np.linalg.lstsq(a, b, rcond=None)
    return h


def fit_alignment(source: Dataset, target_train: Dataset,
                  tree_hp: TreeHyperparams = DEFAULT_TREE) -> AlignmentMap:
    """Train the source tree and fit h on the target training set."""
    if len(source) == 0:
        raise EmptyDatasetError("source dataset is empty")
    if len(target_train) < ALIGN_DIM:
        raise SizeError(
            f"alignment needs at least {ALIGN_DIM} target training points, "
            f"got {len(target_train)}")
    model = fit_tree(source, hyperparams=tree_hp)
    a = design_matrix(model, target_train.x)
    h = solve_alignment(a, target_train.y)
    return AlignmentMap(h=h, source_model=model)


def transform_source(amap: AlignmentMap, source: Dataset) -> Dataset:
    """Source inputs paired with h-transformed outputs.

    The transformed outputs are regression targets in the target task's
    output space; they need not be physical densities.
    """
    d0 = np.column_stack([source.x, source.y, np.ones(len(source))])
    return Dataset(source.task, source.x, d0 @ amap.h)


def fit_sa_dtr(source: Dataset, target_train: Dataset,
               tree_hp: TreeHyperparams = DEFAULT_TREE) -> TreeModel:
    """One tree on target data pooled with transformed source data, unweighted."""
    amap = fit_alignment(source, target_train, tree_hp)
    moved = transform_source(amap, source)
    x = np.vstack([target_train.x, moved.x])
    y = np.concatenate([target_train.y, moved.y])
    return fit_tree_arrays(x, y, hyperparams=tree_hp)


def fit_sa_i_dtr(source: Dataset, target_train: Dataset,
                 hyperparams: BoostHyperparams = DEFAULT_BOOST,
                 seed: int = 0,
                 tree_hp: TreeHyperparams = DEFAULT_TREE) -> BoostEnsemble:
    """Boosted transfer fit with the source replaced by its transformed version."""
    amap = fit_alignment(source, target_train, tree_hp)
    moved = transform_source(amap, source)
    return fit_tradaboost(moved, target_train, hyperparams, seed, tree_hp)
