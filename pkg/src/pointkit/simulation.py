"""Thinning sampler, Monte-Carlo count prediction, and time-rescaling residuals."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import Database, EventSequence
from .preprocess import EventSampler


class EnvelopeError(RuntimeError):
    """A candidate's intensity exceeded the thinning envelope."""


@dataclass
class SimConfig:
    """Settings for one simulated sequence.

    ``seed_sequence`` supplies past events (times <= ``t_begin``) that
    condition the intensity but are not part of the output. The envelope is
    recomputed at least every ``bound_refresh_width`` time units; ``None``
    picks a width from the kernel's time scale.
    """

    t_begin: float = 0.0
    t_end: float = 100.0
    seed_sequence: Optional[EventSequence] = None
    max_events: int = 1_000_000
    rng_seed: object = 0
    bound_refresh_width: Optional[float] = None
    seq_index: int = -1
    seq_feature: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.t_begin < self.t_end:
            raise ValueError("need t_begin < t_end")
        if self.max_events < 1:
            raise ValueError("max_events must be >= 1")
        if self.bound_refresh_width is not None and not self.bound_refresh_width > 0:
            raise ValueError("bound_refresh_width must be positive")


class _State:
    """Intensity evaluation for a single sequence with a bounded history."""

    def __init__(self, model, seq_index, seq_feature, hist_t, hist_c):
        self.model = model
        self.g = model.outer
        feats = None if seq_feature is None else np.asarray(seq_feature, dtype=np.float64)[None, :]
        self.mu = model.exogenous_values(np.array([seq_index]), feats)[0]
        self.M = model.memory_size
        self.hist_t = list(hist_t)[-self.M:]
        self.hist_c = list(hist_c)[-self.M:]
        if model.impact is not None:
            self.alpha, _ = model.alpha_full()
            self.alpha_pos = np.maximum(self.alpha, 0.0)
            self.alpha_neg = np.minimum(self.alpha, 0.0)

    def _rate(self, x):
        lam = self.g(x)
        return np.maximum(lam, 0.0)

    def intensity(self, t):
        x = self.mu
        if self.model.impact is not None and self.hist_t:
            ht = np.asarray(self.hist_t)
            phi = self.model.kernel.value(t - ht)  # (J, M)
            x = x + np.einsum("cjm,jm->c", self.alpha[:, self.hist_c], phi)
        return self._rate(x)

    def bound(self, t0, t1):
        """Upper bound of the total intensity over ``[t0, t1]``."""
        xu = xl = self.mu
        if self.model.impact is not None and self.hist_t:
            ht = np.asarray(self.hist_t)
            ub = self.model.kernel.upper_bound(t0 - ht, t1 - ht)
            xu = xu + np.einsum("cjm,jm->c", self.alpha_pos[:, self.hist_c], ub)
            xl = xl + np.einsum("cjm,jm->c", self.alpha_neg[:, self.hist_c], ub)
        return float(self._rate(xu if self.g.increasing else xl).sum())

    def push(self, t, c):
        self.hist_t.append(t)
        self.hist_c.append(c)
        if len(self.hist_t) > self.M:
            del self.hist_t[0], self.hist_c[0]


def _default_width(model, cfg):
    if model.impact is None:
        return cfg.t_end - cfg.t_begin
    return 2.0 * model.kernel.characteristic_time()


def simulate(model, cfg: SimConfig) -> EventSequence:
    """Draw one sequence on ``(t_begin, t_end]`` by Ogata thinning."""
    rng = np.random.default_rng(cfg.rng_seed)
    seed = cfg.seed_sequence
    feature = cfg.seq_feature
    hist_t, hist_c = [], []
    if seed is not None:
        keep = seed.times <= cfg.t_begin
        hist_t, hist_c = seed.times[keep].tolist(), seed.events[keep].tolist()
        if feature is None:
            feature = seed.seq_feature
    state = _State(model, cfg.seq_index, feature, hist_t, hist_c)
    width = cfg.bound_refresh_width or _default_width(model, cfg)
    C = model.num_types

    times, events = [], []
    t = cfg.t_begin
    while len(times) < cfg.max_events and t < cfg.t_end:
        w_end = min(t + width, cfg.t_end)
        lam_bar = state.bound(t, w_end)
        if lam_bar <= 0.0:
            if state.bound(t, cfg.t_end) <= 0.0:
                break
            t = w_end
            continue
        cand = t + rng.exponential(1.0 / lam_bar)
        if cand > w_end:
            t = w_end
            continue
        t = cand
        lam = state.intensity(t)
        total = float(lam.sum())
        if total > lam_bar * (1.0 + 1e-9):
            raise EnvelopeError(f"intensity {total!r} exceeds envelope {lam_bar!r} at t={t!r}")
        if rng.random() * lam_bar < total:
            cdf = np.cumsum(lam)
            c = min(int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right")), C - 1)
            times.append(t)
            events.append(c)
            state.push(t, c)

    return EventSequence(
        times=np.array(times), events=np.array(events, dtype=np.int64),
        t_start=cfg.t_begin, t_stop=cfg.t_end, seq_feature=feature,
    )


def replicate_seed(rng_seed, seq_index: int, replicate: int) -> np.random.SeedSequence:
    """Seed of replicate ``replicate`` for sequence ``seq_index`` inside :func:`predict`."""
    return np.random.SeedSequence(rng_seed, spawn_key=(seq_index, replicate))


def predict(model, db: Database, t0: float, t1: float, replicates: int = 100, rng_seed=0,
            return_stderr: bool = False, seq_indices=None):
    """Expected per-type counts on ``[t0, t1]`` for every sequence, by simulation.

    Each sequence is continued from its ``t_stop`` to ``t1`` ``replicates``
    times; the result is the mean count matrix ``(S, C)`` and, optionally,
    its Monte-Carlo standard error.
    """
    if not t1 > t0:
        raise ValueError("need t0 < t1")
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    for s, seq in enumerate(db.sequences):
        if t0 < seq.t_stop:
            raise ValueError(
                f"forecast window starts at {t0!r} before t_stop={seq.t_stop!r} of sequence {db.idx2seq[s]!r}"
            )
    C = model.num_types
    S = len(db)
    if seq_indices is None:
        seq_indices = np.arange(S)
    mean = np.zeros((S, C))
    sq = np.zeros((S, C))
    for s, seq in enumerate(db.sequences):
        for r in range(replicates):
            cfg = SimConfig(t_begin=seq.t_stop, t_end=t1, seed_sequence=seq,
                            rng_seed=replicate_seed(rng_seed, s, r), seq_index=int(seq_indices[s]))
            sim = simulate(model, cfg)
            counts = np.bincount(sim.events[sim.times >= t0], minlength=C).astype(float)
            mean[s] += counts
            sq[s] += counts**2
    mean /= replicates
    if not return_stderr:
        return mean
    var = np.maximum(sq / replicates - mean**2, 0.0)
    if replicates > 1:
        var *= replicates / (replicates - 1)
    return mean, np.sqrt(var / replicates)


def time_rescaling_residuals(model, seq: EventSequence, seq_index: int = -1) -> np.ndarray:
    """``Lambda(t_i) - Lambda(t_{i-1})`` of the total compensator, first gap from ``t_start``.

    Under a correctly specified model these are i.i.d. Exponential(1).
    """
    if len(seq) == 0:
        return np.zeros(0)
    db = Database.from_sequences([seq], model.num_types)
    sampler = EventSampler(db, model.memory_size, seq_offset=np.array([seq_index]))
    return model.expected_counts(sampler.all).sum(axis=1)
