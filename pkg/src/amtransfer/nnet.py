"""Small feed-forward regressors: 4-8-16-8-1 with ReLU, MSE loss, Adam.

Parameters live in one flat float64 vector with layer views, which
keeps full-batch training cheap on the tiny datasets this package
targets. Supports per-layer freezing (fine-tuning) and a two-headed
variant that shares the first two layers across a source and a target
task.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, N_FEATURES
from .errors import DivergenceError

LAYER_SHAPES = ((4, 8), (8, 16), (16, 8), (8, 1))
N_LAYERS = len(LAYER_SHAPES)

# flat offsets: [W1, b1, W2, b2, W3, b3, W4, b4]
_OFFSETS = []
_o = 0
for _fi, _fo in LAYER_SHAPES:
    _OFFSETS.append((_o, _o + _fi * _fo, _o + _fi * _fo + _fo))
    _o += _fi * _fo + _fo
N_PARAMS = _o
# shared/frozen cut between layer 2 and layer 3 (fine-tuning and the
# two-headed model use the same cut)
SHARED_CUT = _OFFSETS[1][2]
HEAD_SIZE = N_PARAMS - SHARED_CUT


@dataclass(frozen=True)
class TrainConfig:
    """Learning rate, step count, Adam moments, and an init seed."""

    learning_rate: float
    iterations: int
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


def _layer_views(vec: np.ndarray, base: int = 0):
    views = []
    for (a, b, c), (fi, fo) in zip(_OFFSETS, LAYER_SHAPES):
        views.append((vec[base + a:base + b].reshape(fi, fo), vec[base + b:base + c]))
    return views


class NetModel:
    """Four affine layers with ReLU between them and per-layer freeze flags."""

    def __init__(self, params: np.ndarray,
                 freeze_flags: tuple[bool, bool, bool, bool] = (False,) * N_LAYERS):
        params = np.asarray(params, dtype=np.float64)
        if params.shape != (N_PARAMS,):
            raise ValueError(f"params must have shape ({N_PARAMS},), got {params.shape}")
        self.params = params
        self.freeze_flags = tuple(bool(f) for f in freeze_flags)
        if len(self.freeze_flags) != N_LAYERS:
            raise ValueError(f"need {N_LAYERS} freeze flags")
        self._views = _layer_views(self.params)

    def layer(self, i: int):
        """(weights, biases) views of layer i (0-based)."""
        return self._views[i]

    def copy(self, freeze_flags=None) -> "NetModel":
        return NetModel(self.params.copy(),
                        self.freeze_flags if freeze_flags is None else freeze_flags)

    def trainable_mask(self) -> np.ndarray:
        mask = np.ones(N_PARAMS, dtype=np.float64)
        for i, frozen in enumerate(self.freeze_flags):
            if frozen:
                mask[_OFFSETS[i][0]:_OFFSETS[i][2]] = 0.0
        return mask

    def forward_batch(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        a = x
        for i, (w, b) in enumerate(self._views):
            z = a @ w + b
            a = z if i == N_LAYERS - 1 else np.maximum(z, 0.0)
        return a[:, 0]


def init_net(seed: int) -> NetModel:
    """Fresh network: weights uniform in +-1/sqrt(fan_in), biases zero."""
    rng = np.random.default_rng(seed)
    params = np.zeros(N_PARAMS, dtype=np.float64)
    for (a, b, _), (fi, fo) in zip(_OFFSETS, LAYER_SHAPES):
        bound = 1.0 / np.sqrt(fi)
        params[a:b] = rng.uniform(-bound, bound, fi * fo)
    return NetModel(params)


def forward(net: NetModel, x) -> float:
    """Scalar prediction for one 4-feature input."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (N_FEATURES,):
        raise ValueError(f"expected a {N_FEATURES}-vector, got shape {x.shape}")
    if not np.isfinite(x).all():
        raise ValueError("input vector must be finite")
    return float(net.forward_batch(x[None, :])[0])


def mse_loss(net: NetModel, x: np.ndarray, y: np.ndarray) -> float:
    r = net.forward_batch(x) - y
    return float(r @ r) / y.shape[0]


def _forward_cached(views, x):
    """Forward pass keeping pre-activations and activations for backprop."""
    zs, acts = [], [x]
    a = x
    for i, (w, b) in enumerate(views):
        z = a @ w + b
        zs.append(z)
        a = z if i == N_LAYERS - 1 else np.maximum(z, 0.0)
        acts.append(a)
    return zs, acts


def _backprop(views, grad_views, zs, acts, d_out):
    """Accumulate gradients into grad_views given d(loss)/d(z4) = d_out."""
    d = d_out
    for i in range(N_LAYERS - 1, -1, -1):
        gw, gb = grad_views[i]
        gw += acts[i].T @ d
        gb += d.sum(axis=0)
        if i > 0:
            d = d @ views[i][0].T
            d *= zs[i - 1] > 0.0


class _Adam:
    """Adam with bias correction over one flat parameter vector."""

    def __init__(self, n: int, cfg: TrainConfig):
        self.m = np.zeros(n, dtype=np.float64)
        self.v = np.zeros(n, dtype=np.float64)
        self.t = 0
        self.cfg = cfg

    def step(self, params: np.ndarray, grad: np.ndarray) -> None:
        cfg = self.cfg
        self.t += 1
        self.m = cfg.beta1 * self.m + (1.0 - cfg.beta1) * grad
        self.v = cfg.beta2 * self.v + (1.0 - cfg.beta2) * (grad * grad)
        m_hat = self.m / (1.0 - cfg.beta1 ** self.t)
        v_hat = self.v / (1.0 - cfg.beta2 ** self.t)
        params -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)


def train(net: NetModel, data: Dataset, cfg: TrainConfig):
    """Full-batch MSE training for exactly cfg.iterations Adam steps.

    Frozen layers receive zero gradient and stay bitwise unchanged.
    Returns (trained copy, final loss); the input net is not modified.

    Raises
    ------
    DivergenceError
        If the loss turns non-finite at any step.
    """
    if len(data) == 0:
        raise ValueError("cannot train on an empty dataset")
    out = net.copy()
    _train_inplace(out, data.x, data.y, cfg)
    return out, mse_loss(out, data.x, data.y)


def _train_inplace(net: NetModel, x: np.ndarray, y: np.ndarray, cfg: TrainConfig):
    n = y.shape[0]
    views = net._views
    grad = np.zeros(N_PARAMS, dtype=np.float64)
    grad_views = _layer_views(grad)
    mask = net.trainable_mask() if any(net.freeze_flags) else None
    adam = _Adam(N_PARAMS, cfg)
    # overflow surfaces through the explicit finite check, not warnings
    with np.errstate(over="ignore", invalid="ignore"):
        for it in range(cfg.iterations):
            zs, acts = _forward_cached(views, x)
            r = acts[-1][:, 0] - y
            loss = float(r @ r) / n
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite loss at iteration {it}")
            grad[:] = 0.0
            _backprop(views, grad_views, zs, acts, (2.0 / n) * r[:, None])
            if mask is not None:
                grad *= mask
            adam.step(net.params, grad)


def fine_tune(source_net: NetModel, target_train: Dataset, cfg: TrainConfig) -> NetModel:
    """Copy a trained source net, freeze layers 1-2, adapt layers 3-4.

    The adapted layers start from the source parameters; the frozen
    ones are shared verbatim.
    """
    tuned = source_net.copy(freeze_flags=(True, True, False, False))
    _train_inplace(tuned, target_train.x, target_train.y, cfg)
    return tuned


class MtlModel:
    """Two-headed network: shared layers 1-2, per-task layers 3-4.

    Flat layout: [shared | source head | target head]. Both forward
    paths read the same shared views.
    """

    def __init__(self, params: np.ndarray):
        params = np.asarray(params, dtype=np.float64)
        if params.shape != (SHARED_CUT + 2 * HEAD_SIZE,):
            raise ValueError(
                f"params must have shape ({SHARED_CUT + 2 * HEAD_SIZE},), "
                f"got {params.shape}")
        self.params = params
        self._source_views = self._path_views(0)
        self._target_views = self._path_views(1)

    def _path_views(self, head: int):
        views = _layer_views(self.params)[:2]
        base = SHARED_CUT + head * HEAD_SIZE
        for li in (2, 3):
            a, b, c = _OFFSETS[li]
            fi, fo = LAYER_SHAPES[li]
            views.append((self.params[base + a - SHARED_CUT:base + b - SHARED_CUT]
                          .reshape(fi, fo),
                          self.params[base + b - SHARED_CUT:base + c - SHARED_CUT]))
        return views

    @classmethod
    def from_net(cls, net: NetModel) -> "MtlModel":
        """Both heads start as copies of the net's layers 3-4."""
        head = net.params[SHARED_CUT:]
        return cls(np.concatenate([net.params[:SHARED_CUT], head, head]))

    def copy(self) -> "MtlModel":
        return MtlModel(self.params.copy())

    def _forward(self, views, x):
        a = np.asarray(x, dtype=np.float64)
        for i, (w, b) in enumerate(views):
            z = a @ w + b
            a = z if i == N_LAYERS - 1 else np.maximum(z, 0.0)
        return a[:, 0]

    def forward_source(self, x) -> np.ndarray:
        return self._forward(self._source_views, x)

    def forward_target(self, x) -> np.ndarray:
        return self._forward(self._target_views, x)


def train_mtl(model: MtlModel, source: Dataset, target: Dataset,
              cfg: TrainConfig) -> MtlModel:
    """Joint training on the summed per-task MSE losses.

    Each step computes the source loss through (shared, source head)
    and the target loss through (shared, target head), then takes one
    Adam step on their sum; shared layers accumulate both gradients.
    """
    if len(source) == 0 or len(target) == 0:
        raise ValueError("both datasets must be non-empty")
    out = model.copy()
    n_total = out.params.shape[0]
    grad = np.zeros(n_total, dtype=np.float64)
    shared_grad_views = _layer_views(grad)[:2]

    def head_grad_views(head):
        base = SHARED_CUT + head * HEAD_SIZE
        views = list(shared_grad_views)
        for li in (2, 3):
            a, b, c = _OFFSETS[li]
            fi, fo = LAYER_SHAPES[li]
            views.append((grad[base + a - SHARED_CUT:base + b - SHARED_CUT]
                          .reshape(fi, fo),
                          grad[base + b - SHARED_CUT:base + c - SHARED_CUT]))
        return views

    grad_views_s = head_grad_views(0)
    grad_views_t = head_grad_views(1)
    adam = _Adam(n_total, cfg)
    xs, ys, xt, yt = source.x, source.y, target.x, target.y
    with np.errstate(over="ignore", invalid="ignore"):
        for it in range(cfg.iterations):
            zs_s, acts_s = _forward_cached(out._source_views, xs)
            zs_t, acts_t = _forward_cached(out._target_views, xt)
            rs = acts_s[-1][:, 0] - ys
            rt = acts_t[-1][:, 0] - yt
            loss = float(rs @ rs) / ys.shape[0] + float(rt @ rt) / yt.shape[0]
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite loss at iteration {it}")
            grad[:] = 0.0
            _backprop(out._source_views, grad_views_s, zs_s, acts_s,
                      (2.0 / ys.shape[0]) * rs[:, None])
            _backprop(out._target_views, grad_views_t, zs_t, acts_t,
                      (2.0 / yt.shape[0]) * rt[:, None])
            adam.step(out.params, grad)
    return out


def mtl_loss(model: MtlModel, source: Dataset, target: Dataset) -> float:
    rs = model.forward_source(source.x) - source.y
    rt = model.forward_target(target.x) - target.y
    return float(rs @ rs) / len(source) + float(rt @ rt) / len(target)
