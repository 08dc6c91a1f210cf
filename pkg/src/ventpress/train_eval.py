"""Masked-MAE objective, minibatch BPTT training, evaluation and baselines.

Only inspiratory steps (``u_out == 0``) count toward the metric. Aggregates
over a dataset are breath-weighted: the mean of per-breath masked MAEs.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from typing import List, NamedTuple, Optional

import numpy as np

from .data_model import Dataset
from .lstm import (
    N_FEATURES,
    LstmParams,
    featurize,
    init_params,
    lstm_backward,
    lstm_forward,
)

log = logging.getLogger(__name__)


def _check_triple(pred, actual, u_out):
    pred = np.asarray(pred, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    u_out = np.asarray(u_out)
    if not (pred.shape == actual.shape == u_out.shape):
        raise ValueError(f"length mismatch: pred {pred.shape}, actual {actual.shape}, "
                         f"u_out {u_out.shape}")
    mask = u_out == 0
    if not mask.any():
        raise ValueError("no inspiratory steps")
    return pred, actual, mask


def masked_mae(pred, actual, u_out) -> float:
    """Mean of ``|pred - actual|`` over the steps where ``u_out == 0``."""
    pred, actual, mask = _check_triple(pred, actual, u_out)
    return float(np.mean(np.abs(pred[mask] - actual[mask])))


def masked_mae_grad(pred, actual, u_out) -> np.ndarray:
    """Subgradient of :func:`masked_mae` w.r.t. ``pred``; sign(0) is 0."""
    pred, actual, mask = _check_triple(pred, actual, u_out)
    return np.where(mask, np.sign(pred - actual), 0.0) / mask.sum()


@dataclass(frozen=True)
class ModelConfig:
    hidden_size: int = 64

    def __post_init__(self):
        if self.hidden_size < 1:
            raise ValueError("hidden_size must be at least 1")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    batch_size: int = 256
    learning_rate: float = 1e-3
    grad_clip_norm: float = 1.0
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    val_fraction: float = 0.2
    seed: int = 0
    early_stop_patience: int = 0  # 0 = off

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if not 0 < self.val_fraction < 1:
            raise ValueError("val_fraction must be in (0, 1)")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.grad_clip_norm < 0 or self.early_stop_patience < 0:
            raise ValueError("grad_clip_norm and early_stop_patience must be >= 0")


@dataclass
class TrainReport:
    train_loss: List[float] = field(default_factory=list)
    val_mae: List[float] = field(default_factory=list)
    best_epoch: int = 0
    n_steps: int = 0
    n_skipped: int = 0
    wall_time_s: float = 0.0
    seed: int = 0
    train_ids: List[int] = field(default_factory=list)
    val_ids: List[int] = field(default_factory=list)
    checkpoint: Optional[str] = None

    @property
    def epochs_run(self) -> int:
        return len(self.train_loss)

    def to_json(self) -> str:
        return json.dumps({**asdict(self), "epochs_run": self.epochs_run}, indent=2)

    def summary(self) -> str:
        return (f"epochs run: {self.epochs_run}, optimizer steps: {self.n_steps}, "
                f"best epoch: {self.best_epoch}, "
                f"best val masked MAE: {min(self.val_mae):.6g} cmH2O, "
                f"final train loss: {self.train_loss[-1]:.6g}, "
                f"skipped breaths: {self.n_skipped}, wall time: {self.wall_time_s:.1f} s")


class Sgd:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params: LstmParams, grads: LstmParams):
        for name, arr in params.as_dict().items():
            arr -= self.lr * getattr(grads, name)


class Adam:
    def __init__(self, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {}
        self.v = {}

    def step(self, params: LstmParams, grads: LstmParams):
        self.t += 1
        c1 = 1 - self.beta1 ** self.t
        c2 = 1 - self.beta2 ** self.t
        for name, arr in params.as_dict().items():
            g = getattr(grads, name)
            m = self.m.get(name, 0.0) * self.beta1 + (1 - self.beta1) * g
            v = self.v.get(name, 0.0) * self.beta2 + (1 - self.beta2) * g * g
            self.m[name], self.v[name] = m, v
            arr -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def make_optimizer(tc: TrainConfig):
    if tc.optimizer == "sgd":
        return Sgd(tc.learning_rate)
    return Adam(tc.learning_rate, tc.beta1, tc.beta2, tc.eps)


def clip_global_norm(grads: LstmParams, max_norm: float) -> float:
    """Scale ``grads`` in place to at most ``max_norm``; returns the original norm."""
    norm = float(np.sqrt(sum(np.sum(g * g) for g in grads.as_dict().values())))
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        for g in grads.as_dict().values():
            g *= scale
    return norm


class _Prepared(NamedTuple):
    breath_id: int
    x: np.ndarray
    pressure: np.ndarray
    u_out: np.ndarray


def _prepare(dataset: Dataset) -> List[_Prepared]:
    return [_Prepared(b.breath_id, featurize(b), b.pressure, b.u_out) for b in dataset]


def _length_groups(items: List[_Prepared]):
    """Stack equal-length breaths; groups come in order of first appearance."""
    groups = {}
    for it in items:
        groups.setdefault(len(it.x), []).append(it)
    for group in groups.values():
        xs = np.stack([it.x for it in group], axis=1)
        ps = np.stack([it.pressure for it in group], axis=1)
        mask = np.stack([it.u_out == 0 for it in group], axis=1)
        yield group, xs, ps, mask


def batch_loss_and_grad(params: LstmParams, items: List[_Prepared]) -> tuple:
    """Mean per-breath masked MAE over ``items`` and its parameter gradient.

    Breaths are processed in breath-id order; equal-length breaths share one
    stacked pass, which is the same sum as running them one by one.
    """
    items = sorted(items, key=lambda it: it.breath_id)
    n = len(items)
    total = LstmParams.zeros(params.n_features, params.hidden_size)
    loss = 0.0
    for _, xs, ps, mask in _length_groups(items):
        preds, caches = lstm_forward(params, xs)
        counts = mask.sum(axis=0)
        resid = preds - ps
        loss += float(np.sum(np.sum(np.abs(resid) * mask, axis=0) / counts))
        dpred = np.where(mask, np.sign(resid), 0.0) / counts / n
        g = lstm_backward(params, caches, dpred)
        for name, arr in total.as_dict().items():
            arr += getattr(g, name)
    return loss / n, total


def _per_breath_mae(params: LstmParams, items: List[_Prepared]) -> dict:
    out = {}
    for group, xs, ps, mask in _length_groups(items):
        preds = lstm_forward(params, xs)[0]
        maes = np.sum(np.abs(preds - ps) * mask, axis=0) / mask.sum(axis=0)
        out.update({it.breath_id: float(m) for it, m in zip(group, maes)})
    return out


def split_breaths(dataset: Dataset, val_fraction: float, rng: np.random.Generator) -> tuple:
    """Random train/validation split by breath; returns two id lists."""
    ids = np.array([b.breath_id for b in dataset])
    perm = rng.permutation(len(ids))
    n_val = min(max(1, int(round(val_fraction * len(ids)))), len(ids) - 1)
    return sorted(ids[perm[n_val:]].tolist()), sorted(ids[perm[:n_val]].tolist())


def masked_mean_pressure(dataset: Dataset) -> float:
    vals = [b.pressure[b.u_out == 0] for b in dataset if b.pressure is not None]
    vals = np.concatenate(vals) if vals else np.empty(0)
    if len(vals) == 0:
        raise ValueError("no inspiratory steps")
    return float(vals.mean())


def train(dataset: Dataset, model_cfg: ModelConfig = ModelConfig(),
          tc: TrainConfig = TrainConfig(), progress=None) -> tuple:
    """Fit an LSTM on ``dataset``; returns ``(best_params, report)``.

    The head bias starts at the training split's masked mean pressure, so
    the untrained model already equals the mean-predictor baseline.
    ``progress``, if given, is called as ``progress(epoch, train_loss, val_mae)``.
    """
    if not dataset.has_pressure:
        raise ValueError("training needs a dataset with a pressure column")
    if len(dataset) < 2:
        raise ValueError("training needs at least 2 breaths")
    start = time.perf_counter()
    rng = np.random.default_rng(tc.seed)
    report = TrainReport(seed=tc.seed)

    usable = [b for b in dataset if np.any(b.u_out == 0)]
    report.n_skipped = len(dataset) - len(usable)
    if report.n_skipped:
        log.warning("skipping %d breaths without inspiratory steps", report.n_skipped)
    usable = Dataset(tuple(usable), True)
    if len(usable) < 2:
        raise ValueError("fewer than 2 breaths have inspiratory steps")

    train_ids, val_ids = split_breaths(usable, tc.val_fraction, rng)
    report.train_ids, report.val_ids = train_ids, val_ids
    train_set, val_set = usable.subset(train_ids), usable.subset(val_ids)
    train_items, val_items = _prepare(train_set), _prepare(val_set)

    params = init_params(N_FEATURES, model_cfg.hidden_size, rng)
    params.b_head[...] = masked_mean_pressure(train_set)
    opt = make_optimizer(tc)
    best, best_val, stale = params.copy(), np.inf, 0

    for epoch in range(1, tc.epochs + 1):
        order = rng.permutation(len(train_items))
        losses, weights = [], []
        for lo in range(0, len(order), tc.batch_size):
            batch = [train_items[i] for i in order[lo:lo + tc.batch_size]]
            loss, grads = batch_loss_and_grad(params, batch)
            clip_global_norm(grads, tc.grad_clip_norm)
            opt.step(params, grads)
            report.n_steps += 1
            losses.append(loss)
            weights.append(len(batch))
        report.train_loss.append(float(np.average(losses, weights=weights)))
        val = float(np.mean(list(_per_breath_mae(params, val_items).values())))
        report.val_mae.append(val)
        if progress is not None:
            progress(epoch, report.train_loss[-1], val)
        if val < best_val:
            best, best_val, stale, report.best_epoch = params.copy(), val, 0, epoch
        else:
            stale += 1
            if tc.early_stop_patience and stale >= tc.early_stop_patience:
                break

    report.wall_time_s = time.perf_counter() - start
    return best, report


def fit(dataset: Dataset, model_cfg: ModelConfig = ModelConfig(),
        tc: TrainConfig = TrainConfig(), n_steps: int = 1000) -> tuple:
    """Full-batch optimisation on every breath of ``dataset``, no split.

    Meant for capacity checks; returns ``(params, losses)`` where ``params``
    is the snapshot with the lowest loss seen.
    """
    if not dataset.has_pressure:
        raise ValueError("fitting needs a dataset with a pressure column")
    items = _prepare(dataset)
    rng = np.random.default_rng(tc.seed)
    params = init_params(N_FEATURES, model_cfg.hidden_size, rng)
    params.b_head[...] = masked_mean_pressure(dataset)
    opt = make_optimizer(tc)
    best, best_loss, losses = params.copy(), np.inf, []
    for _ in range(n_steps):
        loss, grads = batch_loss_and_grad(params, items)
        losses.append(loss)
        if loss < best_loss:
            best, best_loss = params.copy(), loss
        clip_global_norm(grads, tc.grad_clip_norm)
        opt.step(params, grads)
    loss = batch_loss_and_grad(params, items)[0]
    if loss < best_loss:
        best = params.copy()
    losses.append(loss)
    return best, losses


@dataclass
class EvalResult:
    """Per-breath rows ``(breath_id, R, C, masked_mae)`` and their mean."""

    rows: list
    aggregate: float

    def by_lung(self) -> dict:
        """Mean masked MAE per (R, C) pair."""
        acc = {}
        for _, r, c, mae in self.rows:
            acc.setdefault((r, c), []).append(mae)
        return {k: float(np.mean(v)) for k, v in sorted(acc.items())}


def _eval_rows(dataset: Dataset, maes: dict) -> EvalResult:
    rows = [(b.breath_id, b.settings.r, b.settings.c, maes[b.breath_id]) for b in dataset]
    return EvalResult(rows, float(np.mean([r[3] for r in rows])))


def _require_scored(dataset: Dataset):
    if len(dataset) == 0:
        raise ValueError("cannot evaluate an empty dataset")
    if not dataset.has_pressure:
        raise ValueError("evaluation needs a dataset with a pressure column")
    for b in dataset:
        if not np.any(b.u_out == 0):
            raise ValueError(f"breath {b.breath_id}: no inspiratory steps")


def evaluate(params: LstmParams, dataset: Dataset) -> EvalResult:
    _require_scored(dataset)
    return _eval_rows(dataset, _per_breath_mae(params, _prepare(dataset)))


class Baseline(NamedTuple):
    constant: float
    result: Optional[EvalResult]


def baseline_mean_predictor(train_set: Dataset,
                            eval_set: Optional[Dataset] = None) -> Baseline:
    """Constant model at the training split's masked mean pressure.

    Scored on ``eval_set`` (breath-weighted, as :func:`evaluate`) if given.
    """
    if not train_set.has_pressure:
        raise ValueError("baseline needs a dataset with a pressure column")
    constant = masked_mean_pressure(train_set)
    if eval_set is None:
        return Baseline(constant, None)
    _require_scored(eval_set)
    maes = {b.breath_id: masked_mae(np.full(len(b), constant), b.pressure, b.u_out)
            for b in eval_set}
    return Baseline(constant, _eval_rows(eval_set, maes))
