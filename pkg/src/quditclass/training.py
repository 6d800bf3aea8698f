"""Losses, gradients and optimizers for the qudit classifiers.

Every routine works on a batch of parameter vectors at once (one row per
restart); single-vector public functions are thin wrappers.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional, Union

import numpy as np

from .datasets import Dataset
from .model import (
    BasisProbabilities,
    ModelSpec,
    ParameterVector,
    Segments,
    SpecError,
    _as_flat,
    classify_values,
)

__all__ = [
    "SegmentLoss",
    "CrossEntropy",
    "LossKind",
    "SGDConfig",
    "TrainConfig",
    "FitResult",
    "NotApplicableError",
    "default_loss",
    "FIT_MARGIN",
    "segment_loss",
    "cross_entropy_loss",
    "loss_value",
    "gradient",
    "gradient_fd",
    "parameter_shift_gradient",
    "accuracy",
    "fit_multistart",
    "fit_sgd",
    "restart_rng",
]

logger = logging.getLogger(__name__)


class NotApplicableError(ValueError):
    """The two-point parameter-shift rule does not hold for a parameter."""


@dataclass(frozen=True)
class SegmentLoss:
    """Squared distance of misclassified readouts to their correct segment.

    ``margin`` > 0 moves each target boundary that far into the correct
    segment, so points sitting on (or just inside) a boundary still pull.
    ``margin == 0`` is the plain loss.
    """

    margin: float = 0.0


@dataclass(frozen=True)
class CrossEntropy:
    epsilon: float = 1e-12
    use_softmax: bool = False


LossKind = Union[SegmentLoss, CrossEntropy]


# fitting with margin 0 lets every readout collapse onto a threshold
FIT_MARGIN = 0.01


def default_loss(spec: ModelSpec) -> LossKind:
    """Loss used by the optimizers when none is given.

    Segment readouts get ``SegmentLoss(FIT_MARGIN)``; basis-probability
    readouts get plain cross-entropy.
    """
    if isinstance(spec.observable.readout, Segments):
        return SegmentLoss(FIT_MARGIN)
    return CrossEntropy()


@dataclass
class SGDConfig:
    batch_size: int = 8
    epochs: int = 200
    patience: int = 20
    validation_fraction: float = 0.2


@dataclass
class TrainConfig:
    restarts: int = 50
    init_low: float = -math.pi
    init_high: float = math.pi
    learning_rate: float = 0.1
    max_iters: int = 1000
    grad_tol: float = 1e-8
    loss_tol: float = 1e-6
    seed: int = 0
    sgd: Optional[SGDConfig] = None

    def __post_init__(self):
        if isinstance(self.sgd, dict):
            self.sgd = SGDConfig(**self.sgd)
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.sgd is not None and self.sgd.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown TrainConfig fields: {sorted(unknown)}")
        return cls(**data)


@dataclass
class FitResult:
    best_params: ParameterVector
    best_loss: float
    best_restart_index: int
    history: list
    train_accuracy: float
    iterations: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "params": {"s": self.best_params.s.tolist(), "w": self.best_params.w.tolist()},
            "loss": self.best_loss,
            "best_restart_index": self.best_restart_index,
            "train_accuracy": self.train_accuracy,
            "restarts": [
                {"index": i, "final_loss": l, "iterations": (self.iterations[i] if self.iterations else None)}
                for i, l in enumerate(self.history)
            ],
        }


def restart_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent stream for ``(seed, *key)``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


# --- batched core -----------------------------------------------------------

def _readout_values(comp, psi):
    if isinstance(comp.readout, Segments):
        return comp.expectations(psi)
    return np.abs(psi) ** 2


def _check_loss(spec: ModelSpec, loss: LossKind):
    ro = spec.observable.readout
    if isinstance(loss, SegmentLoss) and not isinstance(ro, Segments):
        raise SpecError("segment loss needs a segment readout")
    if isinstance(loss, CrossEntropy) and not isinstance(ro, BasisProbabilities):
        raise SpecError("cross-entropy loss needs a basis-probability readout")


def _segment_residual(comp, f, labels, margin):
    """Signed distance ``<O> - Y`` for points outside their (shrunk) segment."""
    edges = np.concatenate([[-np.inf], comp.thresholds, [np.inf]])
    lo = edges[labels]
    hi = edges[labels + 1]
    below = np.isfinite(lo) & (f < lo + margin)
    above = np.isfinite(hi) & (f >= hi - margin)
    return np.where(below, f - (lo + margin), np.where(above, f - (hi - margin), 0.0))


def _loss_terms(comp, values, labels, loss: LossKind, need_grad=True):
    """Loss per row ``(R,)`` and its derivative w.r.t. the readout values."""
    if isinstance(loss, SegmentLoss):
        resid = _segment_residual(comp, values, labels, loss.margin)
        return (resid**2).sum(axis=-1), (2.0 * resid if need_grad else None)
    n = values.shape[-2]
    if n == 0:
        return np.zeros(values.shape[0]), np.zeros_like(values)
    idx = labels
    if loss.use_softmax:
        z = values - values.max(axis=-1, keepdims=True)
        q = np.exp(z)
        q /= q.sum(axis=-1, keepdims=True)
        pl = np.take_along_axis(q, np.broadcast_to(idx[None, :, None], q.shape[:-1] + (1,)), -1)[..., 0]
        val = -np.log(np.clip(pl, loss.epsilon, 1.0)).mean(axis=-1)
        if not need_grad:
            return val, None
        t = np.zeros_like(q)
        np.put_along_axis(t, np.broadcast_to(idx[None, :, None], q.shape[:-1] + (1,)), 1.0, -1)
        return val, (q - t) / n
    pl = np.take_along_axis(values, np.broadcast_to(idx[None, :, None], values.shape[:-1] + (1,)), -1)[..., 0]
    clipped = np.clip(pl, loss.epsilon, 1.0)
    val = -np.log(clipped).mean(axis=-1)
    if not need_grad:
        return val, None
    g = np.zeros_like(values)
    dpl = np.where(pl > loss.epsilon, -1.0 / (n * clipped), 0.0)
    np.put_along_axis(g, np.broadcast_to(idx[None, :, None], values.shape[:-1] + (1,)), dpl[..., None], -1)
    return val, g


def _batch_loss(comp, theta, x, labels, loss, need_grad=True):
    """Loss ``(R,)``, gradient ``(R, P)`` (or None) and readout values."""
    if x.shape[0] == 0:
        z = np.zeros(theta.shape[0])
        return z, np.zeros_like(theta), None
    if need_grad:
        psi, tape = comp.run(theta, x, keep=True)
    else:
        psi = comp.run(theta, x)
    values = _readout_values(comp, psi)
    val, dval = _loss_terms(comp, values, labels, loss, need_grad)
    if not need_grad:
        return val, None, values
    if isinstance(loss, SegmentLoss):
        a_ops = dval[..., None, None] * comp.obs
    else:
        a_ops = dval  # diagonal operator sum_j dL/dp_j |j><j|
    return val, comp.backward(theta, x, psi, tape, a_ops), values


def _batch_correct(comp, values, labels):
    return classify_values(comp.readout, values) == labels


def _data(dataset):
    if isinstance(dataset, Dataset):
        return dataset.x, dataset.labels
    x, y = dataset
    return np.atleast_2d(np.asarray(x, dtype=float)), np.asarray(y, dtype=int).reshape(-1)


def _setup(spec, theta, dataset):
    comp = spec.compiled
    th = np.atleast_2d(_as_flat(spec, theta)).astype(float)
    x, y = _data(dataset)
    if x.size == 0:
        x = x.reshape(0, spec.k)
    elif x.shape[1] != spec.k:
        raise SpecError(f"data has k={x.shape[1]} features, model expects k={spec.k}")
    if y.size and (y.min() < 0 or y.max() >= spec.classes):
        raise SpecError(f"labels must lie in [0, {spec.classes})")
    return comp, th, x, y


# --- public single-vector API ----------------------------------------------

def loss_value(spec: ModelSpec, theta, dataset, loss: LossKind | None = None) -> float:
    loss = default_loss(spec) if loss is None else loss
    _check_loss(spec, loss)
    comp, th, x, y = _setup(spec, theta, dataset)
    return float(_batch_loss(comp, th[:1], x, y, loss, need_grad=False)[0][0])


def segment_loss(spec: ModelSpec, theta, dataset, margin: float = 0.0) -> float:
    """Sum over misclassified points of ``(<O>_i - Y_i)**2``.

    ``Y_i`` is the boundary of the correct segment nearest to ``<O>_i``.
    """
    return loss_value(spec, theta, dataset, SegmentLoss(margin))


def cross_entropy_loss(spec: ModelSpec, theta, dataset, epsilon: float = 1e-12,
                       use_softmax: bool = False) -> float:
    return loss_value(spec, theta, dataset, CrossEntropy(epsilon, use_softmax))


def gradient(spec: ModelSpec, theta, dataset, loss: LossKind | None = None) -> np.ndarray:
    """Exact gradient (length S+W) by back-propagating through each layer."""
    loss = default_loss(spec) if loss is None else loss
    _check_loss(spec, loss)
    comp, th, x, y = _setup(spec, theta, dataset)
    return _batch_loss(comp, th[:1], x, y, loss)[1][0]


def gradient_fd(spec: ModelSpec, theta, dataset, loss: LossKind | None = None,
                h: float = 1e-5) -> np.ndarray:
    """Central finite differences of the loss, one coordinate at a time."""
    loss = default_loss(spec) if loss is None else loss
    _check_loss(spec, loss)
    comp, th, x, y = _setup(spec, theta, dataset)
    p = th.shape[1]
    shifts = np.vstack([th[0] + h * np.eye(p), th[0] - h * np.eye(p)])
    vals = _batch_loss(comp, shifts, x, y, loss, need_grad=False)[0]
    return (vals[:p] - vals[p:]) / (2 * h)


def _shift_plan(spec: ModelSpec, x: np.ndarray):
    """Per parameter: list of ``(layer index, A (N,d,d), c (N,))`` occurrences.

    A parameter qualifies when every layer it appears in has the form
    ``theta_p * A(x)`` with ``A(x)**2 = c(x)**2 * I``.
    """
    comp = spec.compiled
    names = [f"s[{i}]" for i in range(spec.num_s)] + [f"w[{i}]" for i in range(spec.num_w)]
    plan = {p: [] for p in range(spec.num_params)}
    for li, layer in enumerate(comp.layers):
        _, mats, const, pidx, xidx, _ = layer
        for p in sorted(set(pidx[pidx >= 0].tolist())):
            if np.any(pidx != p):
                raise NotApplicableError(
                    f"parameter {names[p]} shares layer {li} with other terms; "
                    "the two-point shift rule needs a single-parameter exponent"
                )
            xv = np.where(xidx >= 0, x[:, np.maximum(xidx, 0)], 1.0) * const
            a = np.einsum("nt,tij->nij", xv, mats)
            a2 = a @ a
            c2 = np.trace(a2, axis1=-2, axis2=-1).real / spec.d
            dev = np.abs(a2 - c2[:, None, None] * np.eye(spec.d)).max(axis=(-2, -1))
            if np.any(dev > 1e-10 * np.maximum(1.0, c2)):
                raise NotApplicableError(
                    f"parameter {names[p]} multiplies a non-involutory generator in layer {li}"
                )
            plan[p].append((li, a, np.sqrt(np.maximum(c2, 0.0))))
    return plan


def parameter_shift_gradient(spec: ModelSpec, theta, dataset,
                             loss: LossKind | None = None) -> np.ndarray:
    """Gradient from two-point parameter shifts of the readout values.

    For ``exp(i theta c g)`` with ``g**2 = I`` each readout ``f`` obeys
    ``df/dtheta = c * (f(theta + pi/(4c)) - f(theta - pi/(4c)))``.
    """
    loss = default_loss(spec) if loss is None else loss
    _check_loss(spec, loss)
    comp, th, x, y = _setup(spec, theta, dataset)
    th = th[:1]
    plan = _shift_plan(spec, x)
    grad = np.zeros(spec.num_params)
    if x.shape[0] == 0:
        return grad
    values = _readout_values(comp, comp.run(th, x))
    _, dval = _loss_terms(comp, values, y, loss)
    for p, occurrences in plan.items():
        for li, a, c in occurrences:
            safe = np.where(c > 0, c, 1.0)
            # (pi / 4c) * A shifts theta_p by pi/(4c) in this layer only
            delta = (np.pi / (4 * safe))[:, None, None] * a
            plus = _readout_values(comp, comp.run(th, x, extra=(li, delta)))
            minus = _readout_values(comp, comp.run(th, x, extra=(li, -delta)))
            df = (plus - minus) * np.where(c > 0, c, 0.0).reshape((1, -1) + (1,) * (plus.ndim - 2))
            grad[p] += float(np.sum(dval * df))
    return grad


def accuracy(spec: ModelSpec, theta, dataset) -> float:
    comp, th, x, y = _setup(spec, theta, dataset)
    if y.size == 0:
        raise ValueError("empty dataset")
    values = _readout_values(comp, comp.run(th[:1], x))
    return float(np.mean(_batch_correct(comp, values, y)[0]))


# --- optimizers --------------------------------------------------------------

def _initial_points(spec: ModelSpec, config: TrainConfig, restarts=None):
    n = config.restarts if restarts is None else restarts
    return np.stack([
        restart_rng(config.seed, r).uniform(config.init_low, config.init_high, spec.num_params)
        for r in range(n)
    ]) if spec.num_params else np.zeros((n, 0))


def _descend(comp, theta, x, y, loss, config: TrainConfig, stop_on_fit=False):
    """Fixed-step gradient descent on every row of ``theta`` independently.

    Each row stops on its own when its loss or gradient norm falls below
    tolerance, or after ``max_iters`` steps.  With ``stop_on_fit`` the whole
    batch returns as soon as one row classifies every point correctly.

    Returns ``(theta, final_loss, iterations, fitted_row or None)``.
    """
    theta = theta.copy()
    r = theta.shape[0]
    final = np.full(r, np.inf)
    iters = np.zeros(r, dtype=int)
    active = np.arange(r)
    for it in range(config.max_iters + 1):
        val, grad, values = _batch_loss(comp, theta[active], x, y, loss)
        if stop_on_fit and values is not None:
            fit = np.all(_batch_correct(comp, values, y), axis=-1)
            if np.any(fit):
                row = active[np.argmax(fit)]
                final[active] = val
                iters[active] = it
                return theta, final, iters, int(row)
        gnorm = np.linalg.norm(grad, axis=-1)
        done = (val <= config.loss_tol) | (gnorm <= config.grad_tol) | (it == config.max_iters)
        final[active[done]] = val[done]
        iters[active[done]] = it
        keep = ~done
        active, grad = active[keep], grad[keep]
        if active.size == 0:
            break
        theta[active] -= config.learning_rate * grad
    return theta, final, iters, None


def fit_multistart(spec: ModelSpec, dataset, config: TrainConfig | None = None,
                   loss: LossKind | None = None) -> FitResult:
    """Gradient descent from ``config.restarts`` random starts; keep the best.

    Restart ``r`` draws its start from the stream ``(config.seed, r)``; ties in
    the final loss go to the lowest restart index.
    """
    config = TrainConfig() if config is None else config
    loss = default_loss(spec) if loss is None else loss
    _check_loss(spec, loss)
    comp, _, x, y = _setup(spec, np.zeros(spec.num_params), dataset)
    theta0 = _initial_points(spec, config)
    theta, final, iters, _ = _descend(comp, theta0, x, y, loss, config)
    best = int(np.argmin(final))
    params = ParameterVector.from_flat(spec, theta[best])
    acc = accuracy(spec, params, (x, y)) if y.size else 1.0
    return FitResult(params, float(final[best]), best, final.tolist(), acc, iters.tolist())


def any_restart_fits(spec: ModelSpec, dataset, config: TrainConfig,
                     loss: LossKind | None = None) -> bool:
    """True when some restart of :func:`fit_multistart` reaches accuracy 1.

    Stops as soon as one restart classifies every point correctly.
    """
    loss = default_loss(spec) if loss is None else loss
    comp, _, x, y = _setup(spec, np.zeros(spec.num_params), dataset)
    _, _, _, row = _descend(comp, _initial_points(spec, config), x, y, loss, config, stop_on_fit=True)
    return row is not None


def _stratified_holdout(labels, fraction, rng):
    val_idx = []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(idx.size)]
        n_val = int(round(fraction * idx.size))
        val_idx.extend(idx[:n_val].tolist())
    mask = np.zeros(labels.size, dtype=bool)
    mask[val_idx] = True
    return np.flatnonzero(~mask), np.flatnonzero(mask)


def fit_sgd(spec: ModelSpec, dataset, config: TrainConfig,
            loss: LossKind | None = None) -> FitResult:
    """Mini-batch SGD with a stratified validation hold-out and early stopping.

    All restarts are trained side by side on the same mini-batch sequence;
    each one stops after ``patience`` epochs without a lower validation loss
    and keeps the parameters of its best epoch.  The returned restart is the
    one with the lowest best validation loss, which is reported as
    ``best_loss``.
    """
    if config.sgd is None:
        raise ValueError("fit_sgd needs config.sgd")
    sgd = config.sgd
    loss = default_loss(spec) if loss is None else loss
    _check_loss(spec, loss)
    comp, _, x, y = _setup(spec, np.zeros(spec.num_params), dataset)
    split_rng = restart_rng(config.seed, 0, 1)
    fit_idx, val_idx = _stratified_holdout(y, sgd.validation_fraction, split_rng)
    if val_idx.size == 0:
        val_idx = fit_idx
    xf, yf, xv, yv = x[fit_idx], y[fit_idx], x[val_idx], y[val_idx]
    batch = sgd.batch_size
    if xf.shape[0] < batch:
        warnings.warn(
            f"training set ({xf.shape[0]} rows) smaller than batch_size={batch}; using one batch",
            stacklevel=2,
        )
        batch = max(xf.shape[0], 1)

    theta = _initial_points(spec, config)
    r = theta.shape[0]
    best_val = _batch_loss(comp, theta, xv, yv, loss, need_grad=False)[0]
    best_theta = theta.copy()
    stale = np.zeros(r, dtype=int)
    active = np.ones(r, dtype=bool)
    epochs_run = np.zeros(r, dtype=int)
    for epoch in range(sgd.epochs):
        if not active.any():
            break
        order = restart_rng(config.seed, 1, epoch).permutation(xf.shape[0])
        rows = np.flatnonzero(active)
        for start in range(0, xf.shape[0], batch):
            b = order[start:start + batch]
            _, grad, _ = _batch_loss(comp, theta[rows], xf[b], yf[b], loss)
            theta[rows] -= config.learning_rate * grad
        epochs_run[rows] += 1
        val = _batch_loss(comp, theta[rows], xv, yv, loss, need_grad=False)[0]
        better = val < best_val[rows]
        best_val[rows[better]] = val[better]
        best_theta[rows[better]] = theta[rows[better]]
        stale[rows[better]] = 0
        stale[rows[~better]] += 1
        active[rows[stale[rows] > sgd.patience]] = False

    best = int(np.argmin(best_val))
    params = ParameterVector.from_flat(spec, best_theta[best])
    acc = accuracy(spec, params, (x, y))
    return FitResult(params, float(best_val[best]), best, best_val.tolist(), acc, epochs_run.tolist())
