"""Sequence stitching, superposing, aggregation, and history-window sampling."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterator, Optional, Union

import numpy as np
from scipy.special import softmax

from .data import Database, EventSequence

SIMILARITY_EPS = 1e-8


@dataclass(frozen=True)
class SimilarityConfig:
    """How partners are drawn in :func:`stitching` / :func:`superposing`.

    ``method="random"`` draws uniformly. ``method="feature"`` weights partners
    by a Gaussian kernel on the gap between windows times a Gaussian kernel on
    the sequence features. Bandwidths given as ``"auto"`` are half the median
    of the corresponding pairwise distances (floored at 1e-6).
    """

    method: str = "random"
    time_bandwidth: Union[float, str] = "auto"
    feature_bandwidth: Union[float, str] = "auto"
    rng_seed: Optional[int] = 0

    def __post_init__(self):
        if self.method not in ("random", "feature"):
            raise ValueError(f"method must be 'random' or 'feature', got {self.method!r}")
        for name in ("time_bandwidth", "feature_bandwidth"):
            v = getattr(self, name)
            if v != "auto" and not (isinstance(v, (int, float)) and v > 0):
                raise ValueError(f"{name} must be positive or 'auto'")


def _check_pair(db1: Database, db2: Database, cfg: SimilarityConfig):
    if db1.type2idx != db2.type2idx:
        raise ValueError("databases have different event-type vocabularies")
    if len(db2) == 0:
        raise ValueError("second database has no sequences to choose from")
    if cfg.method == "feature":
        for which, db in (("first", db1), ("second", db2)):
            if any(s.seq_feature is None for s in db.sequences):
                raise ValueError(f"feature similarity needs seq_feature on every sequence of the {which} database")


def _auto(v, distances):
    if v != "auto":
        return float(v)
    return max(float(np.median(distances)) / 2.0, 1e-6)


def log_similarity(db1: Database, db2: Database, cfg: SimilarityConfig) -> np.ndarray:
    """``log sim(a, b)`` for every pair, shape ``(len(db1), len(db2))``."""
    stops = np.array([s.t_stop for s in db1.sequences])
    starts = np.array([s.t_start for s in db2.sequences])
    gap = starts[None, :] - stops[:, None]
    fa = np.stack([s.seq_feature for s in db1.sequences])
    fb = np.stack([s.seq_feature for s in db2.sequences])
    fdist = np.linalg.norm(fa[:, None, :] - fb[None, :, :], axis=2)
    h_t = _auto(cfg.time_bandwidth, np.abs(gap))
    h_f = _auto(cfg.feature_bandwidth, fdist)
    return -(gap**2) / (2.0 * h_t**2) - fdist**2 / (2.0 * h_f**2)


def selection_probabilities(db1: Database, db2: Database, cfg: SimilarityConfig, mode: str = "stitch") -> np.ndarray:
    """Row ``a`` is the distribution over partners in ``db2`` for sequence ``a`` of ``db1``.

    Stitching favours similar partners (probability proportional to the
    similarity); superposing favours dissimilar ones (proportional to
    ``max_b sim - sim + eps``).
    """
    _check_pair(db1, db2, cfg)
    n1, n2 = len(db1), len(db2)
    if cfg.method == "random":
        return np.full((n1, n2), 1.0 / n2)
    logsim = log_similarity(db1, db2, cfg)
    if mode == "stitch":
        return softmax(logsim, axis=1)
    if mode == "superpose":
        sim = np.exp(logsim)
        w = sim.max(axis=1, keepdims=True) - sim + SIMILARITY_EPS
        return w / w.sum(axis=1, keepdims=True)
    raise ValueError(f"mode must be 'stitch' or 'superpose', got {mode!r}")


def choose_partners(db1: Database, db2: Database, cfg: SimilarityConfig, mode: str = "stitch") -> np.ndarray:
    """Draw one partner index in ``db2`` for every sequence of ``db1``."""
    probs = selection_probabilities(db1, db2, cfg, mode)
    rng = np.random.default_rng(cfg.rng_seed)
    if cfg.method == "random":
        return rng.integers(0, len(db2), size=len(db1))
    # inverse-CDF per row
    u = rng.random(len(db1))
    cdf = np.cumsum(probs, axis=1)
    idx = (cdf < u[:, None] * cdf[:, -1:]).sum(axis=1)
    return np.minimum(idx, len(db2) - 1)


def stitching(db1: Database, db2: Database, cfg: SimilarityConfig = SimilarityConfig()) -> Database:
    """Append a follower from ``db2`` to every sequence of ``db1``.

    The follower is shifted so its window starts exactly at the leader's
    ``t_stop``; the result covers ``[a.t_start, a.t_stop + len(b.window)]``.
    """
    partners = choose_partners(db1, db2, cfg, "stitch")
    out = []
    for a, j in zip(db1.sequences, partners):
        b = db2.sequences[j]
        shift = a.t_stop - b.t_start
        out.append(replace(
            a,
            times=np.concatenate([a.times, b.times + shift]),
            events=np.concatenate([a.events, b.events]),
            t_stop=a.t_stop + (b.t_stop - b.t_start),
        ))
    return db1.replace_sequences(out)


def _merge(a: EventSequence, b: EventSequence) -> EventSequence:
    times = np.concatenate([a.times, b.times])
    events = np.concatenate([a.events, b.events])
    order = np.argsort(times, kind="stable")
    return replace(a, times=times[order], events=events[order],
                   t_start=min(a.t_start, b.t_start), t_stop=max(a.t_stop, b.t_stop))


def superposing(db1: Database, db2: Database, cfg: SimilarityConfig = SimilarityConfig()) -> Database:
    """Merge every sequence of ``db1`` with a partner from ``db2`` on a shared timeline."""
    partners = choose_partners(db1, db2, cfg, "superpose")
    return db1.replace_sequences([_merge(a, db2.sequences[j]) for a, j in zip(db1.sequences, partners)])


def aggregating(db: Database, bin_width: float) -> list:
    """Per-sequence count matrices of shape ``(n_bins, C)``.

    Bins are ``[t_start + b*w, t_start + (b+1)*w)``; the last one is closed
    on the right so that ``t_stop`` is counted.
    """
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    out = []
    C = db.num_types
    for seq in db.sequences:
        n_bins = max(1, int(np.ceil((seq.t_stop - seq.t_start) / bin_width)))
        counts = np.zeros((n_bins, C), dtype=np.int64)
        if len(seq):
            b = np.floor((seq.times - seq.t_start) / bin_width).astype(np.int64)
            b = np.clip(b, 0, n_bins - 1)
            np.add.at(counts, (b, seq.events), 1)
        out.append(counts)
    return out


# --------------------------------------------------------------------------
# history-window samples
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainingSample:
    """One target event with its left-padded history window.

    Padding slots carry the null type ``C`` and the sequence's ``t_start``.
    """

    target_type: int
    target_time: float
    prev_time: float
    history_types: np.ndarray
    history_times: np.ndarray
    seq_index: int = -1
    seq_feature: Optional[np.ndarray] = None


@dataclass
class SampleBatch:
    """Column-oriented batch of :class:`TrainingSample`."""

    target_types: np.ndarray
    target_times: np.ndarray
    prev_times: np.ndarray
    history_types: np.ndarray  # (B, M)
    history_times: np.ndarray  # (B, M)
    seq_index: np.ndarray
    seq_features: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.target_times)

    def take(self, idx) -> "SampleBatch":
        return SampleBatch(
            self.target_types[idx], self.target_times[idx], self.prev_times[idx],
            self.history_types[idx], self.history_times[idx], self.seq_index[idx],
            None if self.seq_features is None else self.seq_features[idx],
        )

    def __iter__(self) -> Iterator[TrainingSample]:
        for i in range(len(self)):
            yield self.sample(i)

    def sample(self, i: int) -> TrainingSample:
        return TrainingSample(
            int(self.target_types[i]), float(self.target_times[i]), float(self.prev_times[i]),
            self.history_types[i].copy(), self.history_times[i].copy(), int(self.seq_index[i]),
            None if self.seq_features is None else self.seq_features[i].copy(),
        )

    @classmethod
    def from_samples(cls, samples) -> "SampleBatch":
        samples = list(samples)
        if not samples:
            raise ValueError("no samples")
        feats = None
        if all(s.seq_feature is not None for s in samples):
            feats = np.stack([np.asarray(s.seq_feature, dtype=np.float64) for s in samples])
        return cls(
            np.array([s.target_type for s in samples], dtype=np.int64),
            np.array([s.target_time for s in samples], dtype=np.float64),
            np.array([s.prev_time for s in samples], dtype=np.float64),
            np.stack([np.asarray(s.history_types, dtype=np.int64) for s in samples]),
            np.stack([np.asarray(s.history_times, dtype=np.float64) for s in samples]),
            np.array([s.seq_index for s in samples], dtype=np.int64),
            feats,
        )


def _sequence_samples(seq: EventSequence, s: int, memorysize: int, C: int):
    n = len(seq)
    i = np.arange(n)
    idx = i[:, None] - memorysize + np.arange(memorysize)[None, :]
    valid = idx >= 0
    safe = np.where(valid, idx, 0)
    if n:
        h_types = np.where(valid, seq.events[safe], C)
        h_times = np.where(valid, seq.times[safe], seq.t_start)
    else:
        h_types = np.zeros((0, memorysize), dtype=np.int64)
        h_times = np.zeros((0, memorysize))
    prev = np.concatenate([[seq.t_start], seq.times[:-1]])[:n]
    return seq.events, seq.times, prev, h_types, h_times, np.full(n, s, dtype=np.int64)


class EventSampler:
    """All ``sum_s I_s`` samples of a database, precomputed column-wise.

    Sample order is ``(sequence index, event index)``.
    """

    def __init__(self, db: Database, memorysize: int, seq_offset: Optional[np.ndarray] = None):
        if memorysize < 1:
            raise ValueError("memorysize must be >= 1")
        self.memorysize = memorysize
        self.num_types = db.num_types
        C = db.num_types
        parts = [_sequence_samples(seq, s, memorysize, C) for s, seq in enumerate(db.sequences)]
        if parts:
            cols = [np.concatenate([p[k] for p in parts]) for k in range(6)]
        else:
            cols = [np.zeros(0, np.int64), np.zeros(0), np.zeros(0),
                    np.zeros((0, memorysize), np.int64), np.zeros((0, memorysize)), np.zeros(0, np.int64)]
        seq_index = cols[5] if seq_offset is None else np.asarray(seq_offset, dtype=np.int64)[cols[5]]
        feats = None
        if len(db) and db.seq_feature_dim is not None:
            table = np.stack([s.seq_feature for s in db.sequences])
            feats = table[cols[5]]
        self.all = SampleBatch(
            cols[0].astype(np.int64), cols[1].astype(np.float64), cols[2].astype(np.float64),
            cols[3].astype(np.int64), cols[4].astype(np.float64), seq_index, feats,
        )

    def __len__(self) -> int:
        return len(self.all)

    def batches(self, batch_size: int, shuffle: bool = False, rng=None) -> Iterator[SampleBatch]:
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        n = len(self)
        order = np.random.default_rng(rng).permutation(n) if shuffle else np.arange(n)
        for start in range(0, n, batch_size):
            yield self.all.take(order[start:start + batch_size])


def make_samples(db: Database, memorysize: int, batch_size: int, shuffle: bool = False,
                 rng_seed=None) -> Iterator[SampleBatch]:
    """One epoch of batches covering every event of every sequence exactly once."""
    return EventSampler(db, memorysize).batches(batch_size, shuffle, rng_seed)
