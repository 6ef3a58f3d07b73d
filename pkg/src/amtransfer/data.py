"""Sample/dataset model, CSV ingestion, synthetic data, splits, and input scaling.

A record is one laser-powder-bed-fusion build: four process inputs
(laser power, laser speed, hatch spacing, energy) and the achieved
relative density in percent. Datasets are immutable and safe to share
across workers.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    DegenerateFeatureError,
    EmptyDatasetError,
    ParseError,
    SchemaError,
    SizeError,
)

log = logging.getLogger(__name__)

FEATURE_NAMES = ("laser_power", "laser_speed", "hatch_spacing", "energy")
N_FEATURES = 4

CSV_HEADER = ("laser_power", "laser_speed", "hatch_spacing", "energy", "relative_density")

PREPROCESS_MODES = ("raw", "minmax", "zscore")

# Amplitude of the seeded noise added by the synthetic generator, in
# percentage points of relative density.
SYNTHETIC_NOISE_AMPLITUDE = 0.25


@dataclass(frozen=True)
class Sample:
    """One build record: four process inputs and the relative density (%)."""

    laser_power: float
    laser_speed: float
    hatch_spacing: float
    energy: float
    relative_density: float

    def __post_init__(self):
        values = (self.laser_power, self.laser_speed, self.hatch_spacing,
                  self.energy, self.relative_density)
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"sample fields must be finite, got {values}")
        if not 0.0 < self.relative_density <= 100.0:
            raise ValueError(
                f"relative_density must lie in (0, 100], got {self.relative_density}")

    @property
    def inputs(self) -> tuple[float, float, float, float]:
        return (self.laser_power, self.laser_speed, self.hatch_spacing, self.energy)


@dataclass(frozen=True)
class TaskSpec:
    """A modeling task: printer identity, feature ranges, and nominal data size."""

    name: str
    printer_label: str
    input_ranges: tuple[tuple[float, float], ...]
    nominal_size: int

    def __post_init__(self):
        if len(self.input_ranges) != N_FEATURES:
            raise ConfigError(
                f"task {self.name!r} needs {N_FEATURES} input ranges, "
                f"got {len(self.input_ranges)}")
        for name, (lo, hi) in zip(FEATURE_NAMES, self.input_ranges):
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ConfigError(
                    f"task {self.name!r}: invalid range [{lo}, {hi}] for {name}")


# Default task definitions. The two source printers carry the published
# parameter ranges; the target printer is assigned the source-2 envelope
# because its own ranges are not recoverable from the source material.
SOURCE1 = TaskSpec(
    name="source1",
    printer_label="EOS M270",
    input_ranges=((40.0, 195.0), (120.0, 1530.0), (80.0, 100.0), (17.99, 150.0)),
    nominal_size=49,
)
SOURCE2 = TaskSpec(
    name="source2",
    printer_label="SLM 250 HL",
    input_ranges=((100.0, 375.0), (200.0, 1100.0), (40.0, 120.0), (50.62, 292.0)),
    nominal_size=32,
)
TARGET = TaskSpec(
    name="target",
    printer_label="SLM 125 HL",
    input_ranges=SOURCE2.input_ranges,
    nominal_size=24,
)

DEFAULT_TASKS = {t.name: t for t in (SOURCE1, SOURCE2, TARGET)}


@dataclass(frozen=True, eq=False)
class Dataset:
    """An ordered collection of records for one task.

    Stored as read-only float64 arrays: ``x`` with shape (n, 4) and
    ``y`` with shape (n,). Construction copies the input arrays, so a
    Dataset never aliases caller-owned memory.
    """

    task: TaskSpec
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=np.float64)
        y = np.array(self.y, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != N_FEATURES:
            raise ValueError(f"x must have shape (n, {N_FEATURES}), got {x.shape}")
        if y.shape != (x.shape[0],):
            raise ValueError(f"y must have shape ({x.shape[0]},), got {y.shape}")
        if not (np.isfinite(x).all() and np.isfinite(y).all()):
            raise ValueError("dataset values must be finite")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_samples(cls, task: TaskSpec, samples) -> "Dataset":
        samples = list(samples)
        x = np.array([s.inputs for s in samples], dtype=np.float64).reshape(len(samples), N_FEATURES)
        y = np.array([s.relative_density for s in samples], dtype=np.float64)
        return cls(task, x, y)

    @property
    def samples(self) -> tuple[Sample, ...]:
        """Record view. Only valid when outputs are physical densities."""
        return tuple(Sample(*row, relative_density=yi)
                     for row, yi in zip(self.x.tolist(), self.y.tolist()))

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.intp)
        return Dataset(self.task, self.x[idx], self.y[idx])

    def __len__(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True)
class SplitPlan:
    """Sizes and seed for one train/validation/source draw."""

    n_train_t: int
    n_s: int
    seed: int
    n_val_t: int = 8

    def __post_init__(self):
        if self.n_train_t < 1 or self.n_val_t < 1 or self.n_s < 1:
            raise SizeError(f"split sizes must be positive: {self}")


def split_indices(plan: SplitPlan, n_target: int, n_source: int):
    """Index sets for a split plan; identical plans give identical indices.

    Uses numpy's PCG64 generator seeded with the plan's 64-bit seed.
    """
    if plan.n_train_t + plan.n_val_t > n_target:
        raise SizeError(
            f"plan needs {plan.n_train_t}+{plan.n_val_t} target points, "
            f"dataset has {n_target}")
    if plan.n_s > n_source:
        raise SizeError(f"plan needs {plan.n_s} source points, dataset has {n_source}")
    rng = np.random.default_rng(plan.seed)
    perm_t = rng.permutation(n_target)
    perm_s = rng.permutation(n_source)
    train_idx = perm_t[:plan.n_train_t]
    val_idx = perm_t[plan.n_train_t:plan.n_train_t + plan.n_val_t]
    source_idx = perm_s[:plan.n_s]
    return train_idx, val_idx, source_idx


def sample_split(target: Dataset, source: Dataset, plan: SplitPlan):
    """Draw (train_t, val_t, source_sub) without replacement, reproducibly."""
    train_idx, val_idx, source_idx = split_indices(plan, len(target), len(source))
    return target.subset(train_idx), target.subset(val_idx), source.subset(source_idx)


def load_csv(path, task: TaskSpec) -> Dataset:
    """Load a dataset from the five-column CSV schema.

    The header must read exactly
    ``laser_power,laser_speed,hatch_spacing,energy,relative_density``.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDatasetError(f"{path}: file is empty") from None
        if tuple(h.strip() for h in header) != CSV_HEADER:
            raise SchemaError(
                f"{path}: expected header {','.join(CSV_HEADER)}, "
                f"got {','.join(header)}")
        samples = []
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise SchemaError(
                    f"{path}: row {row_no} has {len(row)} columns, expected "
                    f"{len(CSV_HEADER)}")
            try:
                values = [float(cell) for cell in row]
            except ValueError as exc:
                raise ParseError(f"{path}: row {row_no}: {exc}") from None
            samples.append(Sample(*values))
    if not samples:
        raise EmptyDatasetError(f"{path}: no data rows")
    log.info("loaded %d rows from %s for task %s", len(samples), path, task.name)
    return Dataset.from_samples(task, samples)


def write_csv(dataset: Dataset, path) -> None:
    """Write a dataset in the same five-column schema load_csv reads."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for row, yi in zip(dataset.x, dataset.y):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(yi))])


def _response_affine(x: np.ndarray) -> np.ndarray:
    p, v, h, e = x[:, 0], x[:, 1], x[:, 2], x[:, 3]
    return 88.0 + 6.0 * (p / 400.0) - 3.0 * (v / 1600.0) + 2.0 * (h / 120.0) + 4.0 * (e / 300.0)


def _response_quadratic(x: np.ndarray) -> np.ndarray:
    p, v, h, e = x[:, 0], x[:, 1], x[:, 2], x[:, 3]
    base = 90.0 + 5.0 * (p / 400.0) + 2.0 * (h / 120.0)
    return base - 8.0 * (e / 300.0 - 0.55) ** 2 - 6.0 * (v / 1600.0 - 0.4) ** 2


_RESPONSES = {"affine": _response_affine, "quadratic": _response_quadratic}


def generate_synthetic(task: TaskSpec, n: int, seed: int, response: str = "affine",
                       shift: float = 0.0) -> Dataset:
    """Deterministic synthetic dataset drawn from the task's feature ranges.

    Inputs are uniform per feature range; the output is the chosen
    response surface plus seeded uniform noise of amplitude
    ``SYNTHETIC_NOISE_AMPLITUDE``, clipped into (0, 100]. ``shift`` adds
    a constant offset to the response, which is how "similar" and
    "dissimilar" source fixtures are built.
    """
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    if response not in _RESPONSES:
        raise ConfigError(f"unknown response {response!r}; pick from {sorted(_RESPONSES)}")
    lo = np.array([r[0] for r in task.input_ranges])
    hi = np.array([r[1] for r in task.input_ranges])
    rng = np.random.default_rng(seed)
    x = lo + rng.random((n, N_FEATURES)) * (hi - lo)
    noise = (rng.random(n) * 2.0 - 1.0) * SYNTHETIC_NOISE_AMPLITUDE
    y = _RESPONSES[response](x) + shift + noise
    y = np.clip(y, 0.01, 100.0)
    return Dataset(task, x, y)


@dataclass(frozen=True)
class Preprocessor:
    """Per-feature input scaling; outputs always pass through untouched.

    ``minmax`` maps each feature to [0, 1] by its fitted min/max;
    ``zscore`` centers by the fitted mean and divides by the population
    standard deviation; ``raw`` is the identity.
    """

    mode: str
    fitted_on: str = ""
    low: np.ndarray | None = field(default=None, repr=False)
    high: np.ndarray | None = field(default=None, repr=False)
    mean: np.ndarray | None = field(default=None, repr=False)
    std: np.ndarray | None = field(default=None, repr=False)

    def apply_x(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != N_FEATURES:
            raise ValueError(f"expected (n, {N_FEATURES}) inputs, got {x.shape}")
        if self.mode == "raw":
            return x.copy()
        if self.mode == "minmax":
            return (x - self.low) / (self.high - self.low)
        return (x - self.mean) / self.std

    def inverse_x(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.mode == "raw":
            return x.copy()
        if self.mode == "minmax":
            return x * (self.high - self.low) + self.low
        return x * self.std + self.mean


def fit_preprocessor(mode: str, data: Dataset) -> Preprocessor:
    """Fit scaling statistics on the given dataset's inputs only."""
    if mode not in PREPROCESS_MODES:
        raise ConfigError(f"unknown preprocessing mode {mode!r}")
    if len(data) == 0:
        raise EmptyDatasetError("cannot fit a preprocessor on an empty dataset")
    if mode == "raw":
        return Preprocessor(mode="raw", fitted_on=data.task.name)
    if mode == "minmax":
        low = data.x.min(axis=0)
        high = data.x.max(axis=0)
        flat = np.nonzero(high <= low)[0]
        if flat.size:
            raise DegenerateFeatureError(
                f"constant feature(s) under minmax: "
                f"{[FEATURE_NAMES[i] for i in flat]}")
        return Preprocessor(mode="minmax", fitted_on=data.task.name, low=low, high=high)
    mean = data.x.mean(axis=0)
    std = data.x.std(axis=0)
    flat = np.nonzero(std <= 0.0)[0]
    if flat.size:
        raise DegenerateFeatureError(
            f"constant feature(s) under zscore: {[FEATURE_NAMES[i] for i in flat]}")
    return Preprocessor(mode="zscore", fitted_on=data.task.name, mean=mean, std=std)


def apply_preprocessor(p: Preprocessor, data: Dataset) -> Dataset:
    """Transform a dataset's inputs; outputs are carried over bitwise."""
    return Dataset(data.task, p.apply_x(data.x), data.y)
