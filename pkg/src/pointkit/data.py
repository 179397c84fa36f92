"""In-memory corpus of multivariate event sequences.

A :class:`Database` holds a list of :class:`EventSequence` objects plus the
name <-> index maps for event types and sequences. Event types are dense
integer indices in ``[0, num_types)``; names only live in the maps.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np


def _frozen(a, dtype) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class EventSequence:
    """One observed event sequence on the window ``[t_start, t_stop]``."""

    times: np.ndarray
    events: np.ndarray
    t_start: float
    t_stop: float
    seq_feature: Optional[np.ndarray] = None
    label: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "times", _frozen(self.times, np.float64))
        object.__setattr__(self, "events", _frozen(self.events, np.int64))
        object.__setattr__(self, "t_start", float(self.t_start))
        object.__setattr__(self, "t_stop", float(self.t_stop))
        if self.seq_feature is not None:
            object.__setattr__(self, "seq_feature", _frozen(self.seq_feature, np.float64))

    def __len__(self) -> int:
        return len(self.times)

    def with_feature(self, feature) -> "EventSequence":
        return replace(self, seq_feature=feature)


@dataclass(frozen=True, eq=False)
class Database:
    """Corpus of event sequences with bijective name maps.

    ``event_features``, when present, has shape ``(D_e, num_types)``: column
    ``c`` is the feature vector of event type ``c``.
    """

    num_types: int
    type2idx: dict
    idx2type: dict
    seq2idx: dict
    idx2seq: dict
    sequences: tuple = field(default_factory=tuple)
    event_features: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "num_types", int(self.num_types))
        object.__setattr__(self, "sequences", tuple(self.sequences))
        if self.event_features is not None:
            ef = np.array(self.event_features, dtype=np.float64, copy=True)
            if ef.ndim == 1:
                ef = ef[:, None]
            ef.setflags(write=False)
            object.__setattr__(self, "event_features", ef)

    def __len__(self) -> int:
        return len(self.sequences)

    @property
    def num_events(self) -> int:
        return sum(len(s) for s in self.sequences)

    @property
    def seq_feature_dim(self) -> Optional[int]:
        """Common sequence-feature width, or None if any sequence lacks one."""
        dims = {None if s.seq_feature is None else len(s.seq_feature) for s in self.sequences}
        if len(dims) != 1 or None in dims:
            return None
        return dims.pop()

    @classmethod
    def from_sequences(
        cls,
        sequences: Sequence[EventSequence],
        num_types: int,
        type_names: Optional[Sequence[str]] = None,
        seq_names: Optional[Sequence[str]] = None,
        event_features=None,
    ) -> "Database":
        """Build a database, generating default names where none are given."""
        if type_names is None:
            type_names = [str(c) for c in range(num_types)]
        if seq_names is None:
            seq_names = [str(i) for i in range(len(sequences))]
        type_names = list(type_names)
        seq_names = list(seq_names)
        return cls(
            num_types=num_types,
            type2idx={n: i for i, n in enumerate(type_names)},
            idx2type=dict(enumerate(type_names)),
            seq2idx={n: i for i, n in enumerate(seq_names)},
            idx2seq=dict(enumerate(seq_names)),
            sequences=tuple(sequences),
            event_features=event_features,
        )

    def type_names(self) -> list:
        return [self.idx2type[c] for c in range(self.num_types)]

    def seq_names(self) -> list:
        return [self.idx2seq[i] for i in range(len(self.sequences))]

    def replace_sequences(self, sequences, seq_names=None) -> "Database":
        if seq_names is None:
            if len(sequences) != len(self.sequences):
                raise ValueError("sequence names required when the sequence count changes")
            return replace(self, sequences=tuple(sequences))
        seq_names = list(seq_names)
        return replace(
            self,
            sequences=tuple(sequences),
            seq2idx={n: i for i, n in enumerate(seq_names)},
            idx2seq=dict(enumerate(seq_names)),
        )

    def subset(self, indices) -> "Database":
        """Database holding only the sequences at ``indices`` (in that order)."""
        indices = [int(i) for i in indices]
        return self.replace_sequences(
            [self.sequences[i] for i in indices], [self.idx2seq[i] for i in indices]
        )


def validate_database(db: Database) -> list:
    """Return a description of every violated invariant; empty means valid."""
    problems = []
    C = db.num_types

    if len(db.type2idx) != C:
        problems.append(f"type2idx has {len(db.type2idx)} entries, expected num_types={C}")
    for name, idx in db.type2idx.items():
        if db.idx2type.get(idx) != name:
            problems.append(f"type maps disagree on {name!r} -> {idx}")
    if len(db.idx2type) != len(db.type2idx):
        problems.append("idx2type and type2idx differ in size")

    if len(db.seq2idx) != len(db.sequences):
        problems.append(
            f"seq2idx has {len(db.seq2idx)} entries but there are {len(db.sequences)} sequences"
        )
    for name, idx in db.seq2idx.items():
        if db.idx2seq.get(idx) != name:
            problems.append(f"sequence maps disagree on {name!r} -> {idx}")
    if len(db.idx2seq) != len(db.seq2idx):
        problems.append("idx2seq and seq2idx differ in size")

    if db.event_features is not None:
        ef = db.event_features
        if ef.ndim != 2 or ef.shape[1] != C:
            problems.append(f"event_features has shape {ef.shape}, expected (D_e, {C})")

    for i, seq in enumerate(db.sequences):
        t, e = seq.times, seq.events
        if len(t) != len(e):
            problems.append(f"sequence {i}: times has {len(t)} entries but events has {len(e)}")
            continue
        if seq.t_start > seq.t_stop:
            problems.append(f"sequence {i}: t_start={seq.t_start} exceeds t_stop={seq.t_stop}")
        if len(t) == 0:
            continue
        if not np.all(np.isfinite(t)):
            problems.append(f"sequence {i}: non-finite times")
        if np.any(np.diff(t) < 0):
            problems.append(f"sequence {i}: times are not non-decreasing")
        if t.min() < seq.t_start or t.max() > seq.t_stop:
            problems.append(f"sequence {i}: times fall outside [t_start, t_stop]")
        bad = (e < 0) | (e >= C)
        if np.any(bad):
            problems.append(
                f"sequence {i}: event type index {int(e[bad][0])} outside [0, {C})"
            )
    return problems


def relabel_types(db: Database, keep) -> Database:
    """Keep only the event types in ``keep``, densely re-indexed in ascending order.

    Events of dropped types disappear; surviving events keep their timestamps
    and relative order.
    """
    keep = sorted({int(k) for k in keep})
    if not keep:
        raise ValueError("no types retained")
    if keep[0] < 0 or keep[-1] >= db.num_types:
        raise ValueError(f"type indices must lie in [0, {db.num_types})")

    remap = np.full(db.num_types, -1, dtype=np.int64)
    remap[keep] = np.arange(len(keep))

    sequences = []
    for seq in db.sequences:
        mask = remap[seq.events] >= 0 if len(seq) else np.zeros(0, dtype=bool)
        sequences.append(
            replace(seq, times=seq.times[mask], events=remap[seq.events[mask]])
        )
    names = [db.idx2type[c] for c in keep]
    features = None if db.event_features is None else db.event_features[:, keep]
    return Database(
        num_types=len(keep),
        type2idx={n: i for i, n in enumerate(names)},
        idx2type=dict(enumerate(names)),
        seq2idx=dict(db.seq2idx),
        idx2seq=dict(db.idx2seq),
        sequences=tuple(sequences),
        event_features=features,
    )
