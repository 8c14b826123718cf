"""Mini-batch training: Adam with step learning-rate decay, L2 coupling,
validation-based checkpoint selection and early stopping."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .batching import collate, pack_example
from .evaluation import evaluate_packs
from .model import NextItemModel


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    batch_size: int = 100
    lr: float = 0.001
    lr_decay_factor: float = 0.1
    lr_decay_every: int = 3
    l2: float = 1e-5
    max_epochs: int = 10
    patience: int = 3
    seed: int = 1
    l2_exclude: tuple = ()

    def __post_init__(self):
        if self.batch_size < 1 or self.lr <= 0 or not 0 < self.lr_decay_factor <= 1:
            raise ValueError("batch_size, lr and lr_decay_factor must be positive")
        if self.lr_decay_every < 1 or self.max_epochs < 1:
            raise ValueError("lr_decay_every and max_epochs must be >= 1")
        if not 1 <= self.patience <= self.max_epochs:
            raise ValueError("patience must be in [1, max_epochs]")


def effective_lr(cfg: TrainConfig, epoch: int) -> float:
    """Step schedule: lr * factor^(epoch // every), epoch counted from 0."""
    return cfg.lr * cfg.lr_decay_factor ** (epoch // cfg.lr_decay_every)


class Adam:
    """Standard Adam with bias correction; one moment pair per parameter."""

    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise ValueError("duplicate parameter names in optimizer")
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.step_count = 0
        self.m = {p.name: np.zeros_like(p.value) for p in self.params}
        self.v = {p.name: np.zeros_like(p.value) for p in self.params}

    def step(self, lr: float):
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for p in self.params:
            g = p.grad
            if g is None:
                g = np.zeros_like(p.value)
            m = self.m[p.name]
            v = self.v[p.name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.value = p.value - lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def couple_l2(params, l2: float, exclude=()):
    """Apply the L2 penalty as grad += l2 * param, then reject non-finite grads."""
    for p in params:
        if p.grad is None:
            p.grad = np.zeros_like(p.value)
        if l2 and p.name not in exclude:
            p.grad = p.grad + l2 * p.value
        if not np.all(np.isfinite(p.grad)):
            raise TrainingError(f"non-finite gradient in parameter {p.name!r}")


@dataclass
class EpochStats:
    epoch: int
    lr_effective: float
    train_loss: float
    val_p20: float
    val_mrr20: float
    seconds: float

    def line(self):
        return (f"{self.epoch}\t{self.lr_effective:.6g}\t{self.train_loss:.6f}"
                f"\t{self.val_p20:.4f}\t{self.val_mrr20:.4f}\t{self.seconds:.2f}")


@dataclass
class TrainResult:
    model: NextItemModel
    history: list[EpochStats] = field(default_factory=list)
    best_epoch: int = -1
    best_val_mrr20: float = float("-inf")


def _epoch_batches(lengths, batch_size, rng):
    """Shuffled batch composition: a seeded permutation, stably grouped by
    prefix length so every batch pads to a single length, batch order
    reshuffled."""
    perm = rng.permutation(len(lengths))
    by_len: dict[int, list[int]] = {}
    for i in perm:
        by_len.setdefault(int(lengths[i]), []).append(int(i))
    batches = []
    for length in sorted(by_len):
        group = by_len[length]
        for s in range(0, len(group), batch_size):
            batches.append(group[s: s + batch_size])
    order = rng.permutation(len(batches))
    return [batches[i] for i in order]


def train_model(examples, num_items, max_len, global_graph, model_cfg, train_cfg: TrainConfig,
                log=None, epoch_callback=None) -> TrainResult:
    """Fit a model on the train split, tracking P@20 / MRR@20 on the
    validation split and keeping the best-MRR@20 parameters.

    `epoch_callback(stats, model)` may return True to stop early.
    """
    train_examples = [e for e in examples if e.split == "train"]
    valid_examples = [e for e in examples if e.split == "validation"]
    if not train_examples:
        raise TrainingError("no training examples")
    if not valid_examples:
        raise TrainingError("validation split is empty")

    model = NextItemModel(num_items, max_len, model_cfg, seed=train_cfg.seed)
    train_packs = [pack_example(e.prefix, e.label, global_graph, model_cfg.k_hops) for e in train_examples]
    valid_packs = [pack_example(e.prefix, e.label, global_graph, model_cfg.k_hops) for e in valid_examples]
    lengths = np.array([p.length for p in train_packs])
    optimizer = Adam(model.params.trainable())

    result = TrainResult(model)
    best_state = None
    stale_epochs = 0
    for epoch in range(train_cfg.max_epochs):
        t0 = time.perf_counter()
        lr = effective_lr(train_cfg, epoch)
        rng = np.random.default_rng(np.random.SeedSequence([train_cfg.seed, 0xE90C, epoch]))
        loss_sum = 0.0
        for idxs in _epoch_batches(lengths, train_cfg.batch_size, rng):
            batch = collate([train_packs[i] for i in idxs])
            model.params.zero_grads()
            out = model.forward(batch, train_mode=True, rng=rng)
            loss = model.loss(out.probs, batch.labels)
            ad.backward(loss)
            couple_l2(model.params.trainable(), train_cfg.l2, train_cfg.l2_exclude)
            optimizer.step(lr)
            loss_sum += float(loss.value) * len(idxs)
        train_loss = loss_sum / len(train_packs)

        val = evaluate_packs(model, valid_packs, train_cfg.batch_size)
        stats = EpochStats(epoch, lr, train_loss, val.p20, val.mrr20, time.perf_counter() - t0)
        result.history.append(stats)
        if log:
            log(stats.line())

        if val.mrr20 > result.best_val_mrr20:
            result.best_val_mrr20 = val.mrr20
            result.best_epoch = epoch
            best_state = model.state_dict()
            stale_epochs = 0
        else:
            stale_epochs += 1

        if epoch_callback and epoch_callback(stats, model):
            break
        if stale_epochs >= train_cfg.patience:
            break

    if best_state is not None:
        model.load_state_dict(best_state)
    return result
