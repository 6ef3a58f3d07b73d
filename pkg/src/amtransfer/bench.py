"""Validation harness: build all models per split, score improvements.

For every iteration of a grid cell, one random split is shared by all
models: baselines train on the target training set alone, the six
transfer models also see the sampled source subset, and everything is
scored on the same held-out target validation points. Tree-family
transfer models are compared against the baseline tree, network-family
against the baseline network:

    improvement = (mse_baseline - mse_model) / mse_baseline

A cell aggregates the per-iteration improvements into their median and
the positive-transfer ratio (fraction of iterations with improvement
above zero).
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import align, boost, nnet, transform
from .data import Dataset, SplitPlan, apply_preprocessor, fit_preprocessor, sample_split
from .errors import ConfigError, DivergenceError
from .tree import DEFAULT_TREE, TreeHyperparams, fit_tree

MODELS = ("dtr", "ann", "i_dtr", "sa_dtr", "sa_i_dtr", "re_dtr", "ft_ann", "mtl_ann")
TREE_TL_MODELS = ("i_dtr", "sa_dtr", "sa_i_dtr", "re_dtr")
NET_TL_MODELS = ("ft_ann", "mtl_ann")
TL_MODELS = TREE_TL_MODELS + NET_TL_MODELS

_U64 = 2**64


@dataclass(frozen=True)
class Setting:
    """One named hyperparameter column for every trainable model."""

    name: str
    boost_rounds: int          # inner boosting iteration cap
    boost_stages: int          # outer stage cap
    cv_folds: int
    lr_source: float
    lr_target: float
    lr_mtl: float
    iters_source: int
    iters_target: int
    iters_mtl: int

    def boost_hyperparams(self) -> boost.BoostHyperparams:
        return boost.BoostHyperparams(self.boost_rounds, self.boost_stages,
                                      self.cv_folds)


SETTINGS = {
    "setting1": Setting("setting1", 100, 10, 5, 0.1, 0.1, 0.1, 10000, 5000, 5000),
    "setting2": Setting("setting2", 50, 10, 3, 0.05, 0.05, 0.05, 10000, 5000, 5000),
}

# Data-size grids: source subset sizes per source task, target training
# sizes, and the fixed validation size.
SOURCE_SIZES = {
    "source1": (17, 21, 25, 29, 33, 37, 41, 45, 49),
    "source2": (17, 21, 25, 29, 32),
}
SIMILARITY_SOURCE_SIZES = {
    "source1": (17, 21, 25, 29, 33),
    "source2": (17, 21, 25, 29, 32),
}
TRAIN_SIZES = (8, 12, 16)
VAL_SIZE = 8


@dataclass(frozen=True)
class GridCell:
    """One benchmark condition: sizes, setting, preprocessing, seeding."""

    source_task: str
    n_s: int
    n_train_t: int
    setting: str = "setting1"
    preprocess: str = "raw"
    iterations: int = 30
    base_seed: int = 42
    n_val_t: int = VAL_SIZE

    def ratio(self) -> float:
        return self.n_train_t / self.n_s


@dataclass(frozen=True, eq=True)
class CellResult:
    """Per-iteration scores and aggregates for one grid cell.

    ``mse`` and ``imp`` map model name to per-iteration lists in which
    None marks a failed iteration (divergence or undefined
    improvement); aggregates skip None entries. ``positive_ratio``
    divides by the planned iteration count, so failures never count as
    positive transfer.
    """

    cell: GridCell
    models: tuple[str, ...]
    mse: dict = field(compare=True)
    imp: dict = field(compare=True)
    median_mse: dict = field(compare=True)
    median_imp: dict = field(compare=True)
    positive_ratio: dict = field(compare=True)
    failures: dict = field(compare=True)


@dataclass(frozen=True, eq=True)
class RunReport:
    """Every cell result of one grid run, in plan order."""

    cells: tuple[CellResult, ...]

    def __len__(self) -> int:
        return len(self.cells)


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from a mix of ints and strings."""
    h = hashlib.sha256()
    for part in parts:
        h.update(repr(part).encode())
        h.update(b"\x1f")
    return int.from_bytes(h.digest()[:8], "little")


def mse(predictions, truths) -> float:
    """Mean squared residual of two equal-length sequences."""
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(truths, dtype=np.float64)
    if p.shape != t.shape or p.ndim != 1 or p.size == 0:
        raise ValueError(f"need equal non-empty 1-d inputs, got {p.shape} vs {t.shape}")
    r = p - t
    return float(r @ r) / p.size


def improvement(mse_base: float, mse_model: float) -> float:
    """Relative MSE reduction against a baseline; positive means transfer helped."""
    if mse_base == 0.0:
        raise ZeroDivisionError("baseline MSE is zero; improvement undefined")
    return (mse_base - mse_model) / mse_base


def _median(values) -> float | None:
    vals = [v for v in values if v is not None]
    if not vals:
        return None
    return float(np.median(vals))


def _resolve_setting(cell: GridCell, setting: Setting | None) -> Setting:
    if setting is not None:
        return setting
    if cell.setting not in SETTINGS:
        raise ConfigError(
            f"unknown setting {cell.setting!r}; pass a Setting object for "
            f"custom hyperparameters")
    return SETTINGS[cell.setting]


def run_cell(cell: GridCell, target: Dataset, source: Dataset,
             setting: Setting | None = None,
             ga_config: transform.GaConfig | None = None,
             tree_hp: TreeHyperparams = DEFAULT_TREE,
             models: tuple[str, ...] = MODELS) -> CellResult:
    """Run every iteration of one cell and aggregate its scores.

    Baselines are always included for the model families present.
    Failed model fits (divergence, degenerate linear algebra) are
    recorded per iteration and excluded from the aggregates; the cell
    itself fails only if some model fails on every iteration while
    others run, which surfaces as an all-None column in the result.
    """
    for m in models:
        if m not in MODELS:
            raise ConfigError(f"unknown model {m!r}")
    if set(models) & set(TREE_TL_MODELS) and "dtr" not in models:
        raise ConfigError("tree-family transfer models need the dtr baseline")
    if set(models) & set(NET_TL_MODELS) and "ann" not in models:
        raise ConfigError("network-family transfer models need the ann baseline")
    st = _resolve_setting(cell, setting)
    if ga_config is None:
        ga_config = transform.GaConfig()

    # Per-domain preprocessing, fitted once per cell on each full
    # dataset; every model in the cell consumes the same transformed
    # inputs. Fitting source and target statistics independently is the
    # point of the preprocessing comparison.
    pre_t = fit_preprocessor(cell.preprocess, target)
    pre_s = fit_preprocessor(cell.preprocess, source)
    target_p = apply_preprocessor(pre_t, target)
    source_p = apply_preprocessor(pre_s, source)

    mse_hist = {m: [] for m in models}
    imp_hist = {m: [] for m in models if m in TL_MODELS}

    for it in range(1, cell.iterations + 1):
        split_seed = (cell.base_seed ^ it) % _U64
        train_t, val_t, source_sub = sample_split(
            target_p, source_p, SplitPlan(cell.n_train_t, cell.n_s, split_seed,
                                          cell.n_val_t))
        preds = _fit_predict_all(cell, it, st, ga_config, tree_hp, models,
                                 train_t, val_t, source_sub)
        for m in models:
            mse_hist[m].append(
                None if preds[m] is None else mse(preds[m], val_t.y))
        for m in imp_hist:
            base = mse_hist["dtr" if m in TREE_TL_MODELS else "ann"][-1]
            this = mse_hist[m][-1]
            if base is None or this is None or base == 0.0:
                imp_hist[m].append(None)
            else:
                imp_hist[m].append(improvement(base, this))

    ratio = {
        m: sum(1 for v in vals if v is not None and v > 0.0) / cell.iterations
        for m, vals in imp_hist.items()
    }
    failures = {m: sum(1 for v in vals if v is None) for m, vals in mse_hist.items()}
    return CellResult(
        cell=cell,
        models=tuple(models),
        mse=mse_hist,
        imp=imp_hist,
        median_mse={m: _median(v) for m, v in mse_hist.items()},
        median_imp={m: _median(v) for m, v in imp_hist.items()},
        positive_ratio=ratio,
        failures=failures,
    )


def _fit_predict_all(cell, it, st, ga_config, tree_hp, models,
                     train_t, val_t, source_sub):
    """Fit each requested model on this iteration's split; None on failure."""
    preds = {}
    caught = (DivergenceError, np.linalg.LinAlgError)

    def attempt(name, fn):
        if name not in models:
            return
        try:
            preds[name] = fn()
        except caught:
            preds[name] = None

    attempt("dtr", lambda: fit_tree(train_t, hyperparams=tree_hp)
            .predict_batch(val_t.x))
    attempt("i_dtr", lambda: boost.fit_tradaboost(
        source_sub, train_t, st.boost_hyperparams(),
        seed=derive_seed(cell.base_seed, it, "i_dtr"), tree_hp=tree_hp)
        .predict_batch(val_t.x))
    attempt("sa_dtr", lambda: align.fit_sa_dtr(source_sub, train_t, tree_hp)
            .predict_batch(val_t.x))
    attempt("sa_i_dtr", lambda: align.fit_sa_i_dtr(
        source_sub, train_t, st.boost_hyperparams(),
        seed=derive_seed(cell.base_seed, it, "sa_i_dtr"), tree_hp=tree_hp)
        .predict_batch(val_t.x))
    attempt("re_dtr", lambda: transform.fit_re_dtr(
        source_sub, train_t,
        replace(ga_config, seed=derive_seed(cell.base_seed, it, "re_dtr")),
        tree_hp=tree_hp)[1].predict_batch(val_t.x))

    if "ann" in models:
        try:
            net, _ = nnet.train(
                nnet.init_net(derive_seed(cell.base_seed, it, "ann")), train_t,
                nnet.TrainConfig(st.lr_source, st.iters_source))
            preds["ann"] = net.forward_batch(val_t.x)
        except caught:
            preds["ann"] = None

    if "ft_ann" in models or "mtl_ann" in models:
        init = nnet.init_net(derive_seed(cell.base_seed, it, "source_net"))
        attempt("mtl_ann", lambda: nnet.train_mtl(
            nnet.MtlModel.from_net(init), source_sub, train_t,
            nnet.TrainConfig(st.lr_mtl, st.iters_mtl)).forward_target(val_t.x))

        def ft():
            source_net, _ = nnet.train(
                init, source_sub, nnet.TrainConfig(st.lr_source, st.iters_source))
            return nnet.fine_tune(
                source_net, train_t,
                nnet.TrainConfig(st.lr_target, st.iters_target)).forward_batch(val_t.x)

        attempt("ft_ann", ft)
    return preds


def _run_cell_job(args):
    cell, target, source, setting, ga_config, tree_hp, models = args
    return run_cell(cell, target, source, setting, ga_config, tree_hp, models)


def run_grid(plan, datasets, workers: int = 1,
             setting: Setting | None = None,
             ga_config: transform.GaConfig | None = None,
             tree_hp: TreeHyperparams = DEFAULT_TREE,
             models: tuple[str, ...] = MODELS) -> RunReport:
    """Execute a list of cells; results are independent of worker count.

    ``datasets`` maps task names to Datasets and must contain "target"
    plus every source task named by the plan. Cells are self-seeded, so
    any parallel schedule produces the identical report.
    """
    plan = list(plan)
    if not plan:
        raise ConfigError("empty grid plan")
    jobs = []
    for cell in plan:
        if cell.source_task not in datasets:
            raise ConfigError(f"no dataset for source task {cell.source_task!r}")
        jobs.append((cell, datasets["target"], datasets[cell.source_task],
                     setting, ga_config, tree_hp, models))
    if workers <= 1:
        results = [_run_cell_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell_job, jobs))
    return RunReport(cells=tuple(results))


def build_grid(kind: str, source_task: str = "source1", setting: str = "setting1",
               preprocess: str = "raw", iterations: int = 30,
               base_seed: int = 42) -> list[GridCell]:
    """Construct the standard cell lists.

    kind "paper": the full data-size grid for the chosen source task
    (9x3 cells for source1, 5x3 for source2). kind "similarity": the
    truncated source-size grid whose cells are size-comparable across
    the two source tasks. kind "preprocessing": the full grid repeated
    for each preprocessing mode. Each cell derives its own base seed
    from (base_seed, cell identity), so adding or removing cells never
    changes another cell's results.
    """
    def cells(sizes, modes):
        out = []
        for mode in modes:
            for n_s in sizes:
                for n_train in TRAIN_SIZES:
                    out.append(GridCell(
                        source_task=source_task, n_s=n_s, n_train_t=n_train,
                        setting=setting, preprocess=mode, iterations=iterations,
                        base_seed=derive_seed(base_seed, source_task, n_s,
                                              n_train, setting, mode)))
        return out

    if kind == "paper":
        return cells(SOURCE_SIZES[source_task], (preprocess,))
    if kind == "similarity":
        return cells(SIMILARITY_SOURCE_SIZES[source_task], (preprocess,))
    if kind == "preprocessing":
        return cells(SOURCE_SIZES[source_task], ("raw", "minmax", "zscore"))
    raise ConfigError(f"unknown grid kind {kind!r}")


SUMMARY_AXES = ("ratio_ntrain_over_ns", "similarity", "preprocessing")


def summarize(report: RunReport, axis: str = "ratio_ntrain_over_ns") -> list[dict]:
    """Plot-ready rows: size ratio plus per-model aggregates per cell.

    Rows are sorted by the grouping columns of the chosen axis, then by
    the ratio x = n_train_t / n_s.
    """
    if axis not in SUMMARY_AXES:
        raise ConfigError(f"unknown axis {axis!r}; pick from {SUMMARY_AXES}")
    if len(report) == 0:
        raise ConfigError("empty report")
    rows = []
    for res in report.cells:
        row = {"x": res.cell.ratio()}
        if axis == "similarity":
            row["source_task"] = res.cell.source_task
        elif axis == "preprocessing":
            row["preprocess"] = res.cell.preprocess
        row["n_train_t"] = res.cell.n_train_t
        row["n_s"] = res.cell.n_s
        for m in res.models:
            if m in res.median_imp:
                row[f"{m}_median_imp"] = res.median_imp[m]
                row[f"{m}_positive_ratio"] = res.positive_ratio[m]
        rows.append(row)
    if axis == "similarity":
        rows.sort(key=lambda r: (r["source_task"], r["x"]))
    elif axis == "preprocessing":
        rows.sort(key=lambda r: (r["preprocess"], r["x"]))
    else:
        rows.sort(key=lambda r: r["x"])
    return rows
