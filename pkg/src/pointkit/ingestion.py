"""CSV loaders for event sequences, sequence features, and event features."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .data import Database, EventSequence

NORMALIZATIONS = ("none", "minmax", "zscore")
FEATURE_KINDS = ("categorical", "numerical")


class IngestionError(ValueError):
    pass


@dataclass(frozen=True)
class ColumnMapping:
    seq_id: str = "id"
    time: str = "time"
    event: str = "event"

    def __post_init__(self):
        names = (self.seq_id, self.time, self.event)
        if not all(names):
            raise ValueError("column names must be nonempty")
        if len(set(names)) != 3:
            raise ValueError(f"column names must be distinct, got {names}")


@dataclass(frozen=True)
class FeatureDomainSpec:
    """Which columns to encode and how.

    ``columns`` maps a column name to ``"categorical"`` or ``"numerical"``.
    ``normalize`` is one of ``"none"``, ``"minmax"``, ``"zscore"``; the
    integers 0/1/2 are accepted as aliases.
    """

    columns: dict = field(default_factory=dict)
    normalize: str = "none"

    def __post_init__(self):
        if not self.columns:
            raise ValueError("feature spec needs at least one column")
        for name, kind in self.columns.items():
            if kind not in FEATURE_KINDS:
                raise ValueError(f"column {name!r}: kind must be one of {FEATURE_KINDS}, got {kind!r}")
        norm = self.normalize
        if isinstance(norm, int) and not isinstance(norm, bool):
            if not 0 <= norm < len(NORMALIZATIONS):
                raise ValueError(f"normalize must be one of {NORMALIZATIONS}")
            object.__setattr__(self, "normalize", NORMALIZATIONS[norm])
        elif norm not in NORMALIZATIONS:
            raise ValueError(f"normalize must be one of {NORMALIZATIONS}, got {norm!r}")


def _read_rows(path, required):
    """Yield ``(row_number, row_dict)``; row numbers count the header as row 1."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise IngestionError(f"{path}: missing column {missing[0]!r}")
        rows = [(n, row) for n, row in enumerate(reader, start=2)]
    return rows


def _parse_float(value, column, row_no):
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise IngestionError(f"row {row_no}: cannot parse {column} value {value!r} as a number") from None
    if not np.isfinite(out):
        raise IngestionError(f"row {row_no}: {column} value {value!r} is not finite")
    return out


def load_sequences_csv(
    path,
    mapping: Optional[ColumnMapping] = None,
    t_start_column: Optional[str] = None,
    t_stop_column: Optional[str] = None,
) -> Database:
    """Load one event sequence per distinct ``seq_id`` value.

    Event types and sequences are indexed in order of first appearance.
    Events are stably sorted by time within each sequence. The observation
    window defaults to the sequence's first and last event times; pass
    ``t_start_column``/``t_stop_column`` to read it from the file instead
    (the minimum/maximum over the sequence's rows is used).
    """
    mapping = mapping or ColumnMapping()
    required = [mapping.seq_id, mapping.time, mapping.event]
    if (t_start_column is None) != (t_stop_column is None):
        raise ValueError("t_start_column and t_stop_column must be given together")
    if t_start_column is not None:
        required += [t_start_column, t_stop_column]
    rows = _read_rows(path, required)
    if not rows:
        raise IngestionError(f"{path}: no events")

    type2idx: dict = {}
    seq2idx: dict = {}
    per_seq: list = []
    windows: list = []
    for row_no, row in rows:
        sid = row[mapping.seq_id]
        t = _parse_float(row[mapping.time], mapping.time, row_no)
        name = row[mapping.event]
        c = type2idx.setdefault(name, len(type2idx))
        s = seq2idx.get(sid)
        if s is None:
            s = seq2idx[sid] = len(seq2idx)
            per_seq.append([])
            windows.append([np.inf, -np.inf])
        per_seq[s].append((t, c))
        if t_start_column is not None:
            lo = _parse_float(row[t_start_column], t_start_column, row_no)
            hi = _parse_float(row[t_stop_column], t_stop_column, row_no)
            windows[s][0] = min(windows[s][0], lo)
            windows[s][1] = max(windows[s][1], hi)

    sequences = []
    for s, pairs in enumerate(per_seq):
        times = np.array([p[0] for p in pairs])
        events = np.array([p[1] for p in pairs], dtype=np.int64)
        order = np.argsort(times, kind="stable")
        times, events = times[order], events[order]
        if t_start_column is None:
            t0, t1 = times[0], times[-1]
        else:
            t0, t1 = windows[s]
            if t0 > times[0] or t1 < times[-1]:
                raise IngestionError(
                    f"sequence {list(seq2idx)[s]!r}: events fall outside the supplied window"
                )
        sequences.append(EventSequence(times=times, events=events, t_start=t0, t_stop=t1))

    return Database(
        num_types=len(type2idx),
        type2idx=type2idx,
        idx2type={i: n for n, i in type2idx.items()},
        seq2idx=seq2idx,
        idx2seq={i: n for n, i in seq2idx.items()},
        sequences=tuple(sequences),
    )


def _encode_features(rows, key_column, index, spec: FeatureDomainSpec, what):
    """Encode feature columns for ``len(index)`` entities keyed by ``key_column``.

    Returns an array of shape ``(n_entities, width)``.
    """
    n = len(index)
    blocks = []
    for column, kind in spec.columns.items():
        if kind == "categorical":
            values: dict = {}
            seen = []
            for row_no, row in rows:
                ent = index.get(row[key_column])
                if ent is None:
                    raise IngestionError(f"row {row_no}: unknown {what} {row[key_column]!r}")
                v = values.setdefault(row[column], len(values))
                seen.append((ent, v))
            block = np.zeros((n, len(values)))
            for ent, v in seen:
                block[ent, v] = 1.0
        else:
            sums = np.zeros(n)
            counts = np.zeros(n)
            for row_no, row in rows:
                ent = index.get(row[key_column])
                if ent is None:
                    raise IngestionError(f"row {row_no}: unknown {what} {row[key_column]!r}")
                sums[ent] += _parse_float(row[column], column, row_no)
                counts[ent] += 1
            # entities without any row get 0
            block = np.divide(sums, counts, out=np.zeros(n), where=counts > 0)[:, None]
        blocks.append(block)
    feats = np.concatenate(blocks, axis=1)
    return _normalize(feats, spec.normalize)


def _normalize(x: np.ndarray, how: str) -> np.ndarray:
    if how == "none" or len(x) == 0:
        return x
    if how == "minmax":
        lo, hi = x.min(axis=0), x.max(axis=0)
        span = hi - lo
        return np.divide(x - lo, span, out=np.zeros_like(x), where=span > 0)
    mean, std = x.mean(axis=0), x.std(axis=0)
    return np.divide(x - mean, std, out=np.zeros_like(x), where=std > 0)


def load_seq_features_csv(path, seq_domain: str, spec: FeatureDomainSpec, db: Database) -> Database:
    """Attach a feature vector to every sequence of ``db``.

    Categorical columns become multi-hot vectors over the column's global
    value set (every value a sequence ever shows is switched on); numerical
    columns are averaged over the sequence's rows.
    """
    if not db.seq2idx:
        raise IngestionError("database has no sequences; load sequences first")
    rows = _read_rows(path, [seq_domain, *spec.columns])
    feats = _encode_features(rows, seq_domain, db.seq2idx, spec, "sequence")
    sequences = [replace(s, seq_feature=feats[i]) for i, s in enumerate(db.sequences)]
    return db.replace_sequences(sequences)


def load_event_features_csv(path, event_domain: str, spec: FeatureDomainSpec, db: Database) -> Database:
    """Attach a ``(D_e, C)`` event-feature matrix to ``db``, column ``c`` for type ``c``."""
    if not db.type2idx:
        raise IngestionError("database has no event types; load sequences first")
    rows = _read_rows(path, [event_domain, *spec.columns])
    feats = _encode_features(rows, event_domain, db.type2idx, spec, "event type")
    return replace(db, event_features=feats.T)


def write_sequences_csv(path, db: Database, columns=("seq_id", "time", "event_name")) -> None:
    """Write ``db`` as one row per event, re-ingestable by :func:`load_sequences_csv`."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for i, seq in enumerate(db.sequences):
            name = db.idx2seq[i]
            for t, c in zip(seq.times, seq.events):
                w.writerow([name, repr(float(t)), db.idx2type[int(c)]])
