import numpy as np
import pytest

from pointkit import Database, EventSequence, relabel_types, validate_database


def make_db(seqs, C, **kw):
    return Database.from_sequences([EventSequence(*s) for s in seqs], C, **kw)


class TestEventSequence:
    def test_arrays_are_read_only(self):
        s = EventSequence([1.0, 2.0], [0, 1], 0.0, 3.0)
        with pytest.raises(ValueError):
            s.times[0] = 5.0
        assert s.events.dtype == np.int64 and len(s) == 2

    def test_with_feature(self):
        s = EventSequence([1.0], [0], 0.0, 1.0).with_feature([1.0, 2.0])
        np.testing.assert_array_equal(s.seq_feature, [1.0, 2.0])

    def test_label_round_trips(self):
        assert EventSequence([], [], 0.0, 1.0, label=3).label == 3


class TestValidate:
    def test_empty_corpus_is_valid(self):
        assert validate_database(make_db([], 3)) == []

    def test_non_monotone_times(self):
        db = make_db([([2.0, 1.0], [0, 1], 0.0, 3.0)], 3)
        problems = validate_database(db)
        assert len(problems) == 1
        assert "sequence 0" in problems[0] and "non-decreasing" in problems[0]

    def test_out_of_range_type(self):
        db = make_db([([1.0], [0], 0.0, 2.0), ([1.0, 1.5], [1, 5], 0.0, 2.0)], 3)
        problems = validate_database(db)
        assert len(problems) == 1
        assert "sequence 1" in problems[0] and "5" in problems[0]

    def test_window_and_maps(self):
        db = make_db([([1.0, 4.0], [0, 0], 0.0, 3.0)], 1)
        assert any("outside" in p for p in validate_database(db))
        bad = Database(2, {"a": 0, "b": 1}, {0: "a", 1: "c"}, {}, {}, ())
        assert validate_database(bad)

    def test_event_feature_columns(self):
        db = make_db([], 3, event_features=np.zeros((2, 2)))
        assert any("event_features" in p for p in validate_database(db))

    def test_empty_sequence_is_legal(self):
        assert validate_database(make_db([([], [], 0.0, 5.0)], 2)) == []


class TestRelabel:
    def test_keep_single_type(self):
        db = make_db([([1.0, 2.0, 3.0], [0, 2, 2], 0.0, 3.0)], 3, type_names=["a", "b", "c"])
        out = relabel_types(db, {2})
        assert out.num_types == 1
        np.testing.assert_array_equal(out.sequences[0].times, [2.0, 3.0])
        np.testing.assert_array_equal(out.sequences[0].events, [0, 0])
        assert out.type2idx == {"c": 0}
        assert validate_database(out) == []

    def test_keep_all_is_identity(self):
        db = make_db([([1.0, 2.0], [1, 0], 0.0, 3.0)], 2)
        out = relabel_types(db, {0, 1})
        np.testing.assert_array_equal(out.sequences[0].events, db.sequences[0].events)
        assert out.type2idx == db.type2idx

    def test_empty_keep(self):
        with pytest.raises(ValueError, match="no types retained"):
            relabel_types(make_db([], 2), set())

    def test_feature_columns_follow(self):
        ef = np.arange(6.0).reshape(2, 3)
        out = relabel_types(make_db([], 3, event_features=ef), {0, 2})
        np.testing.assert_array_equal(out.event_features, ef[:, [0, 2]])

    def test_brute_force_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            C = 4
            n = int(rng.integers(0, 15))
            times = np.sort(rng.uniform(0, 10, n))
            events = rng.integers(0, C, n)
            keep = set(rng.choice(C, size=int(rng.integers(1, C + 1)), replace=False).tolist())
            out = relabel_types(make_db([(times, events, 0.0, 10.0)], C), keep)
            order = sorted(keep)
            exp = [(t, order.index(e)) for t, e in zip(times, events) if e in keep]
            assert list(zip(out.sequences[0].times, out.sequences[0].events)) == exp


class TestDatabase:
    def test_subset_keeps_names(self):
        db = make_db([([1.0], [0], 0, 1), ([2.0], [0], 0, 2), ([3.0], [0], 0, 3)], 1, seq_names=["x", "y", "z"])
        sub = db.subset([2, 0])
        assert sub.seq_names() == ["z", "x"] and sub.sequences[0].t_stop == 3.0
        assert validate_database(sub) == []

    def test_counts(self):
        db = make_db([([1.0, 2.0], [0, 1], 0, 2), ([], [], 0, 1)], 2)
        assert db.num_events == 2 and len(db) == 2 and db.seq_feature_dim is None
