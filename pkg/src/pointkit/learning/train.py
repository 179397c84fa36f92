"""Mini-batch training and evaluation loops."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from ..data import Database, EventSequence
from ..preprocess import EventSampler, SampleBatch
from .losses import TERMS, LossKind
from .optim import AdamState, adam_step, sgd_step

log = logging.getLogger(__name__)


class FitDivergedError(RuntimeError):
    pass


@dataclass
class FitConfig:
    """Optimiser and regulariser settings.

    ``l1_groups`` and ``nonnegative`` hold parameter names or component
    prefixes (``"exo"``, ``"impact"``, ``"kernel"``, ``"impact.A"``...).
    ``nonnegative=None`` disables projection.
    """

    epochs: int = 10
    batch_size: int = 128
    learning_rate: float = 0.01
    lr_decay_gamma: float = 1.0
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    l1_weight: float = 0.0
    l1_groups: tuple = ("impact",)
    l2_weight: float = 0.0
    nonnegative: Optional[tuple] = None
    memorysize: int = 10
    rng_seed: int = 0
    validation_fraction: float = 0.0
    shuffle: bool = True

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        if not 0 < self.lr_decay_gamma <= 1:
            raise ValueError("lr_decay_gamma must lie in (0, 1]")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError("optimizer must be 'adam' or 'sgd'")
        if self.l1_weight < 0 or self.l2_weight < 0:
            raise ValueError("regulariser weights must be nonnegative")
        if not 0 <= self.validation_fraction < 1:
            raise ValueError("validation_fraction must lie in [0, 1)")
        if self.memorysize < 1:
            raise ValueError("memorysize must be >= 1")
        self.l1_groups = tuple(self.l1_groups)
        if self.nonnegative is not None:
            self.nonnegative = tuple(self.nonnegative)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float  # running mean over the epoch's steps
    train_loss_final: float  # full pass over the training samples after the epoch
    val_loss: Optional[float]
    lr: float
    seconds: float


@dataclass
class FitReport:
    epochs: list = field(default_factory=list)
    train_sequences: list = field(default_factory=list)
    val_sequences: list = field(default_factory=list)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(asdict(r)) + "\n" for r in self.epochs)

    @property
    def train_losses(self):
        return [r.train_loss for r in self.epochs]


def _in_groups(name: str, groups) -> bool:
    return any(name == g or name.startswith(g + ".") for g in groups)


def project_nonnegative(model, groups) -> None:
    """Clip every parameter in ``groups`` at zero (in place). Idempotent."""
    if not groups:
        return
    for name, value in model.params.items():
        if name in model.trainable_names and _in_groups(name, groups):
            np.maximum(value, 0.0, out=value)


def regularization(model, cfg: FitConfig):
    """``(penalty, grads)`` of ``l1 * |theta|_1 + l2 * |theta|_2^2``; sign(0) = 0."""
    penalty = 0.0
    grads = {}
    params = model.params
    for name in model.trainable_names:
        p = params[name]
        g = np.zeros_like(p)
        if cfg.l1_weight and _in_groups(name, cfg.l1_groups):
            penalty += cfg.l1_weight * np.abs(p).sum()
            g += cfg.l1_weight * np.sign(p)
        if cfg.l2_weight:
            penalty += cfg.l2_weight * (p * p).sum()
            g += 2.0 * cfg.l2_weight * p
        grads[name] = g
    return penalty, grads


def _split(db: Database, cfg: FitConfig):
    n = len(db)
    idx = np.arange(n)
    if cfg.validation_fraction == 0 or n < 2:
        return idx, idx[:0]
    perm = np.random.default_rng(cfg.rng_seed).permutation(n)
    n_val = min(n - 1, max(1, int(round(cfg.validation_fraction * n))))
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def _prepare_model(model, db: Database, train_idx):
    exo = model.exogenous
    if getattr(exo, "uses_seq_embedding", True) is False and len(train_idx):
        feats = np.stack([db.sequences[i].seq_feature for i in train_idx])
        exo.params["seq_feature_mean"][...] = feats.mean(axis=0)


def evaluate(model, sampler: EventSampler, kind, batch_size: int = 1024) -> float:
    """Mean per-sample loss over every sample of ``sampler``."""
    kind = LossKind.parse(kind)
    if len(sampler) == 0:
        raise ValueError("no samples")
    total = 0.0
    for batch in sampler.batches(batch_size):
        total += TERMS[kind](model.forward(batch), batch)[0]
    return total / len(sampler)


def fit(model, db: Database, cfg: FitConfig = FitConfig(), loss="mle") -> FitReport:
    """Fit ``model`` in place by mini-batch gradient descent.

    Each step minimises the batch-mean loss plus the regulariser, takes an
    Adam or SGD step, then projects the ``nonnegative`` groups onto ``>= 0``.
    The learning rate is multiplied by ``lr_decay_gamma`` after every epoch.
    """
    kind = LossKind.parse(loss)
    train_idx, val_idx = _split(db, cfg)
    train = EventSampler(db.subset(train_idx), cfg.memorysize, seq_offset=train_idx)
    if len(train) == 0:
        raise ValueError("no samples")
    val = EventSampler(db.subset(val_idx), cfg.memorysize, seq_offset=val_idx) if len(val_idx) else None
    if val is not None and len(val) == 0:
        val = None

    model.memory_size = cfg.memorysize
    _prepare_model(model, db, train_idx)
    project_nonnegative(model, cfg.nonnegative)

    rng = np.random.default_rng(cfg.rng_seed)
    state = AdamState(cfg.beta1, cfg.beta2, cfg.eps)
    params = model.params
    lr = cfg.learning_rate
    report = FitReport(train_sequences=[int(i) for i in train_idx], val_sequences=[int(i) for i in val_idx])

    for epoch in range(1, cfg.epochs + 1):
        start = time.perf_counter()
        running = 0.0
        for batch in train.batches(cfg.batch_size, shuffle=cfg.shuffle, rng=rng):
            n = len(batch)
            fw = model.forward(batch)
            value, d_int, d_cnt = TERMS[kind](fw, batch)
            grads = model.backward(
                fw, None if d_int is None else d_int / n, None if d_cnt is None else d_cnt / n
            )
            penalty, reg = regularization(model, cfg)
            if not np.isfinite(value) or not np.isfinite(penalty):
                raise FitDivergedError(f"non-finite loss at epoch {epoch}: loss={value!r} penalty={penalty!r}")
            for name, g in reg.items():
                grads[name] = grads[name] + g
            if any(not np.all(np.isfinite(g)) for g in grads.values()):
                raise FitDivergedError(f"non-finite gradient at epoch {epoch}")
            if cfg.optimizer == "adam":
                adam_step(state, params, grads, lr)
            else:
                sgd_step(params, grads, lr)
            project_nonnegative(model, cfg.nonnegative)
            model.project_kernel()
            running += value
        record = EpochRecord(
            epoch=epoch,
            train_loss=running / len(train),
            train_loss_final=evaluate(model, train, kind),
            val_loss=None if val is None else evaluate(model, val, kind),
            lr=lr,
            seconds=time.perf_counter() - start,
        )
        if not np.isfinite(record.train_loss_final):
            raise FitDivergedError(f"non-finite training loss after epoch {epoch}")
        report.epochs.append(record)
        log.info("epoch %d train %.6f val %s lr %.3g", epoch, record.train_loss, record.val_loss, lr)
        lr *= cfg.lr_decay_gamma
    return report


def validation(model, db: Database, cfg: Optional[FitConfig] = None, loss="mle") -> float:
    """Average per-event loss of ``model`` on ``db``; parameters are left untouched."""
    memorysize = model.memory_size if cfg is None else cfg.memorysize
    sampler = EventSampler(db, memorysize)
    return evaluate(model, sampler, loss)


def _tail_sample(seq: EventSequence, s: int, memorysize: int, C: int) -> SampleBatch:
    """Pseudo-sample covering ``[t_last, t_stop]`` with the final history window."""
    n = len(seq)
    h_types = np.full(memorysize, C, dtype=np.int64)
    h_times = np.full(memorysize, seq.t_start)
    k = min(n, memorysize)
    if k:
        h_types[-k:] = seq.events[-k:]
        h_times[-k:] = seq.times[-k:]
    prev = seq.times[-1] if n else seq.t_start
    feats = None if seq.seq_feature is None else seq.seq_feature[None, :]
    return SampleBatch(np.array([0]), np.array([seq.t_stop]), np.array([prev]), h_types[None],
                       h_times[None], np.array([s]), feats)


def sequence_log_likelihood(model, seq: EventSequence, seq_index: int = -1) -> float:
    """Full-window log-likelihood ``sum log lambda(t_i) - Lambda(t_start, t_stop)`` (evaluation only)."""
    C = model.num_types
    db = Database.from_sequences([seq], C)
    sampler = EventSampler(db, model.memory_size, seq_offset=np.array([seq_index]))
    ll = 0.0
    if len(sampler):
        ll = -TERMS[LossKind.MLE](model.forward(sampler.all), sampler.all)[0]
    tail = model.forward(_tail_sample(seq, seq_index, model.memory_size, C))
    return ll - float(tail.counts.sum())
