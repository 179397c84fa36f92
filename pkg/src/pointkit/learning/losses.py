"""The three per-event losses.

Each ``*_terms`` function maps a forward pass to ``(loss, d_intensity,
d_counts)``: the batch-summed loss and its adjoints with respect to the
model's ``(B, C)`` intensity and expected-count outputs.
"""
from __future__ import annotations

from enum import Enum

import numpy as np
from scipy.special import log_softmax, softmax


class LossKind(str, Enum):
    MLE = "mle"
    LSE = "lse"
    CE = "ce"

    @classmethod
    def parse(cls, value) -> "LossKind":
        if isinstance(value, LossKind):
            return value
        key = str(value).lower().replace("-", "").replace("_", "")
        aliases = {
            "mle": cls.MLE, "maxloglike": cls.MLE, "loglike": cls.MLE,
            "lse": cls.LSE, "leastsquare": cls.LSE, "leastsquares": cls.LSE,
            "ce": cls.CE, "crossentropy": cls.CE,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown loss {value!r}; choose from mle, lse, ce") from None


class NonPositiveIntensityError(ValueError):
    """The intensity at an observed event is <= 0, so its log is undefined."""


def _onehot(types, C):
    out = np.zeros((len(types), C))
    out[np.arange(len(types)), types] = 1.0
    return out


def mle_terms(fw, batch):
    B, C = fw.intensity.shape
    rows = np.arange(B)
    c = np.asarray(batch.target_types)
    lam = fw.intensity[rows, c]
    bad = ~(lam > 0)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise NonPositiveIntensityError(
            f"non-positive intensity at observed event: sample {i} "
            f"(sequence {int(batch.seq_index[i])}, time {float(batch.target_times[i])!r}, "
            f"type {int(c[i])}, intensity {float(lam[i])!r})"
        )
    loss = -(np.log(lam).sum() - fw.counts.sum())
    d_int = np.zeros((B, C))
    d_int[rows, c] = -1.0 / lam
    return float(loss), d_int, np.ones((B, C))


def lse_terms(fw, batch):
    resid = fw.counts - _onehot(batch.target_types, fw.counts.shape[1])
    return float((resid**2).sum()), None, 2.0 * resid


def ce_terms(fw, batch):
    C = fw.counts.shape[1]
    target = _onehot(batch.target_types, C)
    loss = -(log_softmax(fw.counts, axis=1) * target).sum()
    return float(loss), None, softmax(fw.counts, axis=1) - target


TERMS = {LossKind.MLE: mle_terms, LossKind.LSE: lse_terms, LossKind.CE: ce_terms}


def loss_terms(model, batch, kind):
    """``(loss, grads)`` summed over ``batch``; grads keyed like ``model.params``."""
    fw = model.forward(batch)
    loss, d_int, d_cnt = TERMS[LossKind.parse(kind)](fw, batch)
    return loss, model.backward(fw, d_int, d_cnt)


def _loss(model, batch, kind):
    if len(batch) == 0:
        return 0.0
    fw = model.forward(batch)
    return TERMS[kind](fw, batch)[0]


def loss_mle(model, batch) -> float:
    """``-sum_i (log lambda_{c_i}(t_i) - sum_c int_{t_{i-1}}^{t_i} lambda_c)``."""
    return _loss(model, batch, LossKind.MLE)


def loss_lse(model, batch) -> float:
    """``sum_i || int lambda - onehot(c_i) ||^2``."""
    return _loss(model, batch, LossKind.LSE)


def loss_ce(model, batch) -> float:
    """``-sum_i log softmax(int lambda)[c_i]``."""
    return _loss(model, batch, LossKind.CE)
