import numpy as np
import pytest

from pointkit import validate_database
from pointkit.cli import demo_data_path
from pointkit.ingestion import (
    ColumnMapping,
    FeatureDomainSpec,
    IngestionError,
    load_event_features_csv,
    load_seq_features_csv,
    load_sequences_csv,
    write_sequences_csv,
)


@pytest.fixture
def write(tmp_path):
    def _write(text, name="events.csv"):
        p = tmp_path / name
        p.write_text(text)
        return p
    return _write


class TestLoadSequences:
    def test_first_appearance_indexing(self, write):
        db = load_sequences_csv(write("id,time,event\nu,25,A\nu,27,B\nu,28,A\n"))
        assert db.num_types == 2 and len(db) == 1
        np.testing.assert_array_equal(db.sequences[0].events, [0, 1, 0])
        assert db.type2idx == {"A": 0, "B": 1}
        assert (db.sequences[0].t_start, db.sequences[0].t_stop) == (25.0, 28.0)

    def test_stable_sort_within_sequence(self, write):
        db = load_sequences_csv(write("id,time,event\nu,3,A\nv,1,A\nu,1,B\nu,1,C\n"))
        s = db.sequences[db.seq2idx["u"]]
        np.testing.assert_array_equal(s.times, [1, 1, 3])
        np.testing.assert_array_equal(s.events, [db.type2idx["B"], db.type2idx["C"], db.type2idx["A"]])

    def test_demo_file(self):
        db = load_sequences_csv(demo_data_path())
        assert validate_database(db) == []
        assert db.num_types == 6 and len(db) == 40

    def test_custom_mapping(self, write):
        db = load_sequences_csv(write("who,when,what\na,1,x\n"), ColumnMapping("who", "when", "what"))
        assert db.num_events == 1

    def test_header_only(self, write):
        with pytest.raises(IngestionError, match="no events"):
            load_sequences_csv(write("id,time,event\n"))

    def test_missing_column(self, write):
        with pytest.raises(IngestionError, match="'event'"):
            load_sequences_csv(write("id,time\nu,1\n"))

    def test_bad_time_names_row(self, write):
        with pytest.raises(IngestionError, match="row 3"):
            load_sequences_csv(write("id,time,event\nu,1,A\nu,abc,A\n"))

    def test_window_columns(self, write):
        db = load_sequences_csv(write("id,time,event,s,e\nu,2,A,0,9\nu,3,A,0,9\n"), t_start_column="s",
                                t_stop_column="e")
        assert (db.sequences[0].t_start, db.sequences[0].t_stop) == (0.0, 9.0)

    def test_mapping_must_be_distinct(self):
        with pytest.raises(ValueError):
            ColumnMapping("id", "id", "event")

    def test_quoted_fields(self, write):
        db = load_sequences_csv(write('id,time,event\n"u,1",1,"A, Inc"\n'))
        assert db.seq_names() == ["u,1"] and db.type_names() == ["A, Inc"]

    def test_deterministic(self):
        a = load_sequences_csv(demo_data_path())
        b = load_sequences_csv(demo_data_path())
        for s, t in zip(a.sequences, b.sequences):
            assert s.times.tobytes() == t.times.tobytes() and s.events.tobytes() == t.events.tobytes()


class TestFeatures:
    CSV = "id,time,event,title,score\nu,1,A,Eng,1\nu,2,B,Eng,2\nu,3,A,Mgr,6\nv,1,A,Sales,3.5\n"

    def test_multi_hot_sequence_features(self, write):
        p = write(self.CSV)
        db = load_seq_features_csv(p, "id", FeatureDomainSpec({"title": "categorical"}), load_sequences_csv(p))
        np.testing.assert_array_equal(db.sequences[0].seq_feature, [1, 1, 0])
        np.testing.assert_array_equal(db.sequences[1].seq_feature, [0, 0, 1])

    def test_numerical_mean(self, write):
        p = write(self.CSV)
        db = load_seq_features_csv(p, "id", FeatureDomainSpec({"score": "numerical"}), load_sequences_csv(p))
        np.testing.assert_allclose([s.seq_feature[0] for s in db.sequences], [3.0, 3.5])

    def test_event_features_columns(self, write):
        p = write(self.CSV)
        db = load_event_features_csv(p, "event", FeatureDomainSpec({"title": "categorical"}), load_sequences_csv(p))
        assert db.event_features.shape == (3, 2)
        np.testing.assert_array_equal(db.event_features[:, db.type2idx["B"]], [1, 0, 0])
        assert validate_database(db) == []

    def test_normalizations(self, write):
        p = write(self.CSV)
        base = load_sequences_csv(p)
        mm = load_seq_features_csv(p, "id", FeatureDomainSpec({"score": "numerical"}, "minmax"), base)
        np.testing.assert_allclose([s.seq_feature[0] for s in mm.sequences], [0.0, 1.0])
        z = load_seq_features_csv(p, "id", FeatureDomainSpec({"score": "numerical"}, 2), base)
        np.testing.assert_allclose([s.seq_feature[0] for s in z.sequences], [-1.0, 1.0])

    def test_features_leave_events_alone(self, write):
        p = write(self.CSV)
        base = load_sequences_csv(p)
        db = load_seq_features_csv(p, "id", FeatureDomainSpec({"title": "categorical"}), base)
        for a, b in zip(base.sequences, db.sequences):
            np.testing.assert_array_equal(a.times, b.times)
            np.testing.assert_array_equal(a.events, b.events)

    def test_unknown_entity(self, write):
        p = write(self.CSV)
        db = load_sequences_csv(write("id,time,event\nu,1,A\n", "small.csv"))
        with pytest.raises(IngestionError, match="row 5"):
            load_seq_features_csv(p, "id", FeatureDomainSpec({"title": "categorical"}), db)
        with pytest.raises(IngestionError, match="row 3"):
            load_event_features_csv(p, "event", FeatureDomainSpec({"title": "categorical"}), db)

    def test_needs_sequences_first(self, write):
        from pointkit import Database
        empty = Database.from_sequences([], 0)
        with pytest.raises(IngestionError):
            load_event_features_csv(write(self.CSV), "event", FeatureDomainSpec({"title": "categorical"}), empty)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            FeatureDomainSpec({})
        with pytest.raises(ValueError):
            FeatureDomainSpec({"a": "ordinal"})
        with pytest.raises(ValueError):
            FeatureDomainSpec({"a": "numerical"}, normalize="l2")


class TestWrite:
    def test_round_trip(self, tmp_path):
        db = load_sequences_csv(demo_data_path())
        out = tmp_path / "copy.csv"
        write_sequences_csv(out, db)
        back = load_sequences_csv(out, ColumnMapping("seq_id", "time", "event_name"))
        assert back.seq_names() == db.seq_names()
        for a, b in zip(db.sequences, back.sequences):
            np.testing.assert_array_equal(a.times, b.times)
            assert [db.idx2type[e] for e in a.events] == [back.idx2type[e] for e in b.events]
