"""Instance-transfer boosting for regression over the tree learner.

Source and target samples are pooled with normalized weights. Each
outer stage runs an inner boosting loop that re-weights only the target
samples, scores the stage by K-fold cross-validation with folds drawn
from the target block, then applies a multiplicative source-weight
update before the next stage starts. The returned model is the stage
with the lowest cross-validated error; its prediction is the weighted
median of the stage's trees.

The inner weight update multiplies a target weight by beta^(1 - e)
where e is the sample's residual scaled by the pool's largest residual
and beta = eps / (1 - eps) for the weighted mean error eps, so large-
error target points gain weight whenever eps < 1/2. The source update
uses the same factors on the source block only. Stage-selection folds
never leave the target block: the selected model is the one judged on
the target task.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset
from .errors import EmptyDatasetError, SizeError
from .tree import DEFAULT_TREE, TreeHyperparams, TreeModel, fit_tree_arrays

# Confidence clamp: keeps beta away from 0 and 1 so that beta**(1-e)
# and log(1/beta) stay well-behaved around perfect or useless fits.
BETA_MIN = 1e-10
BETA_MAX = 1.0 - 1e-10

ERROR_LOSSES = ("linear", "square", "exponential")


@dataclass(frozen=True)
class BoostHyperparams:
    """Inner iteration cap, outer stage cap, CV folds, and error loss."""

    n_boost: int = 100
    max_stages: int = 10
    cv_folds: int = 5
    loss: str = "linear"

    def __post_init__(self):
        if self.n_boost < 1 or self.max_stages < 1:
            raise ValueError("n_boost and max_stages must be >= 1")
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be >= 2")
        if self.loss not in ERROR_LOSSES:
            raise ValueError(f"loss must be one of {ERROR_LOSSES}")


DEFAULT_BOOST = BoostHyperparams()


@dataclass(frozen=True, eq=False)
class WeightedPool:
    """Concatenated source-then-target samples with normalized weights."""

    x: np.ndarray
    y: np.ndarray
    w: np.ndarray
    n_source: int
    n_target: int

    def __post_init__(self):
        if self.x.shape[0] != self.n_source + self.n_target:
            raise ValueError("pool size must equal n_source + n_target")
        if self.n_target < 1:
            raise EmptyDatasetError("pool needs at least one target sample")

    @classmethod
    def from_datasets(cls, source: Dataset, target: Dataset) -> "WeightedPool":
        if len(source) == 0 or len(target) == 0:
            raise EmptyDatasetError("source and target datasets must be non-empty")
        n = len(source) + len(target)
        return cls(
            x=np.vstack([source.x, target.x]),
            y=np.concatenate([source.y, target.y]),
            w=np.full(n, 1.0 / n),
            n_source=len(source),
            n_target=len(target),
        )


@dataclass(frozen=True, eq=False)
class BoostEnsemble:
    """Trees with per-tree confidences and the stage's CV error."""

    trees: tuple[TreeModel, ...]
    betas: np.ndarray
    cv_error: float
    hyperparams: BoostHyperparams

    def predict_batch(self, x: np.ndarray) -> np.ndarray:
        preds = np.column_stack([t.predict_batch(x) for t in self.trees])
        conf = np.log(1.0 / self.betas)
        return _weighted_median_rows(preds, conf)

    def __len__(self) -> int:
        return len(self.trees)


# Relative slack on the half-total threshold: a cumulative sum that
# reaches half up to rounding counts as reaching it, so equal-weight
# even-count medians land on the lower middle element deterministically.
_MEDIAN_SLACK = 1e-12


def weighted_median(values, weights) -> float:
    """Smallest value whose cumulative weight reaches half the total."""
    values = np.asarray(values, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    order = np.argsort(values)
    cdf = np.cumsum(weights[order])
    k = int(np.argmax(cdf >= (0.5 - _MEDIAN_SLACK) * cdf[-1]))
    return float(values[order[k]])


def _weighted_median_rows(preds: np.ndarray, conf: np.ndarray) -> np.ndarray:
    order = np.argsort(preds, axis=1)
    cdf = np.cumsum(conf[order], axis=1)
    k = np.argmax(cdf >= (0.5 - _MEDIAN_SLACK) * cdf[:, -1:], axis=1)
    rows = np.arange(preds.shape[0])
    return preds[rows, order[rows, k]]


def predict_ensemble(ensemble: BoostEnsemble, x) -> float:
    """Weighted-median prediction for one input vector."""
    if len(ensemble) == 0:
        raise ValueError("ensemble has no trees")
    x = np.asarray(x, dtype=np.float64)
    return float(ensemble.predict_batch(x[None, :])[0])


def adjusted_errors(pool: WeightedPool, model: TreeModel,
                    loss: str = "linear") -> np.ndarray:
    """Per-sample errors scaled into [0, 1] by the largest pool residual."""
    resid = np.abs(model.predict_batch(pool.x) - pool.y)
    d_max = resid.max()
    if d_max <= 0.0:
        return np.zeros_like(resid)
    e = resid / d_max
    if loss == "square":
        e = e * e
    elif loss == "exponential":
        e = 1.0 - np.exp(-e)
    return e


def _errors_arrays(x, y, model, loss):
    resid = np.abs(model.predict_batch(x) - y)
    d_max = resid.max()
    if d_max <= 0.0:
        return np.zeros_like(resid)
    e = resid / d_max
    if loss == "square":
        e = e * e
    elif loss == "exponential":
        e = 1.0 - np.exp(-e)
    return e


def _clamp_beta(beta: float) -> float:
    return min(max(beta, BETA_MIN), BETA_MAX)


def target_weight_update(w: np.ndarray, e: np.ndarray, beta: float,
                         n_source: int) -> np.ndarray:
    """One inner-loop update: scale target weights by beta^(1-e), renormalize."""
    w = np.asarray(w, dtype=np.float64).copy()
    w[n_source:] *= beta ** (1.0 - np.asarray(e)[n_source:])
    return w / w.sum()


def _run_boosting(x, y, w0, n_source, n_boost, tree_hp, loss):
    """Inner-loop boosting: re-weights target samples only.

    Returns (trees, stored betas, final weights). Stops early on a
    perfect fit (eps == 0) or a weighted error above one half, keeping
    the tree that triggered the stop.
    """
    w = w0 / w0.sum()
    trees: list[TreeModel] = []
    betas: list[float] = []
    for _ in range(n_boost):
        t = fit_tree_arrays(x, y, w, tree_hp)
        trees.append(t)
        e = _errors_arrays(x, y, t, loss)
        eps = float(w @ e)
        if eps <= 0.0 or eps > 0.5:
            betas.append(_clamp_beta(eps / (1.0 - eps) if eps < 1.0 else np.inf))
            break
        beta = eps / (1.0 - eps)  # in (0, 1]; exact fixed point at eps == 1/2
        betas.append(_clamp_beta(beta))
        w = target_weight_update(w, e, beta, n_source)
    return trees, np.array(betas), w


def _target_folds(n_target: int, k: int, seed: int):
    perm = np.random.default_rng(seed).permutation(n_target)
    return np.array_split(perm, k)


def boost_stage(pool: WeightedPool, n_boost: int, cv_folds: int, seed: int,
                tree_hp: TreeHyperparams = DEFAULT_TREE, loss: str = "linear"):
    """One outer stage: boosting on the full pool plus CV scoring.

    The cross-validated error refits the same boosting procedure with
    each target fold held out (source samples always stay in) and
    averages the held-out MSE of the per-fold weighted-median
    ensembles.

    Returns (trees, betas, cv_error, updated pool).
    """
    if pool.n_target < cv_folds:
        raise SizeError(
            f"need at least {cv_folds} target samples for {cv_folds}-fold CV, "
            f"have {pool.n_target}")
    trees, betas, w_new = _run_boosting(
        pool.x, pool.y, pool.w, pool.n_source, n_boost, tree_hp, loss)

    fold_mse = []
    for fold in _target_folds(pool.n_target, cv_folds, seed):
        held = pool.n_source + fold
        keep = np.setdiff1d(np.arange(pool.x.shape[0]), held, assume_unique=False)
        f_trees, f_betas, _ = _run_boosting(
            pool.x[keep], pool.y[keep], pool.w[keep], pool.n_source,
            n_boost, tree_hp, loss)
        stage = BoostEnsemble(tuple(f_trees), f_betas, np.nan,
                              BoostHyperparams(n_boost, 1, cv_folds, loss))
        pred = stage.predict_batch(pool.x[held])
        r = pred - pool.y[held]
        fold_mse.append(float(r @ r) / r.shape[0])
    cv_error = float(np.mean(fold_mse))
    return trees, betas, cv_error, replace(pool, w=w_new)


def source_weight_update(pool: WeightedPool, model: TreeModel,
                         loss: str = "linear") -> WeightedPool:
    """Multiplicative source re-weighting between stages.

    Source weights are scaled by beta^(1-e) with the clamped beta from
    the current fit; target weights only pass through the shared
    renormalization, so target-to-target ratios are unchanged.
    """
    e = adjusted_errors(pool, model, loss)
    eps = float(pool.w @ e)
    beta = _clamp_beta(eps / (1.0 - eps) if eps < 1.0 else np.inf)
    w = pool.w.copy()
    w[:pool.n_source] *= beta ** (1.0 - e[:pool.n_source])
    w /= w.sum()
    return replace(pool, w=w)


def fit_tradaboost(source: Dataset, target_train: Dataset,
                   hyperparams: BoostHyperparams = DEFAULT_BOOST,
                   seed: int = 0,
                   tree_hp: TreeHyperparams = DEFAULT_TREE) -> BoostEnsemble:
    """Full two-level fit; returns the stage with the lowest CV error.

    Runs ``max_stages`` outer stages of (inner boosting, CV scoring,
    source re-weighting); weights flow from each stage into the next.
    Ties on the CV error keep the earliest stage. The fold partition is
    fixed across stages so stage scores are comparable.
    """
    pool = WeightedPool.from_datasets(source, target_train)
    stages = []
    for stage_idx in range(hyperparams.max_stages):
        trees, betas, cv_error, pool = boost_stage(
            pool, hyperparams.n_boost, hyperparams.cv_folds, seed,
            tree_hp, hyperparams.loss)
        stages.append((cv_error, trees, betas))
        if stage_idx < hyperparams.max_stages - 1:
            t = fit_tree_arrays(pool.x, pool.y, pool.w, tree_hp)
            pool = source_weight_update(pool, t, hyperparams.loss)
    best = min(range(len(stages)), key=lambda i: stages[i][0])
    cv_error, trees, betas = stages[best]
    return BoostEnsemble(tuple(trees), betas, cv_error, hyperparams)
