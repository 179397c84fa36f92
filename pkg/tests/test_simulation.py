import numpy as np
import pytest
from scipy import stats

from pointkit import Database, EventSequence, build_model
from pointkit.intensity import ConstantExogenous, HawkesModel
from pointkit.simulation import (
    EnvelopeError,
    SimConfig,
    predict,
    replicate_seed,
    simulate,
    time_rescaling_residuals,
)


def poisson(mu):
    return HawkesModel(len(mu), ConstantExogenous(len(mu), mu=list(mu)))


def hawkes(mu=0.5, alpha=0.5, kernel="exponential", outer="identity", C=1, **kw):
    m = build_model(C, "naive", "basic", kernel, outer, num_basis=1, memory_size=kw.pop("memory_size", 50), **kw)
    m.set_params({"exo.mu": np.full(C, mu), "impact.A": np.full((C, C, 1), alpha)})
    return m


class TestSimulate:
    def test_poisson_count(self):
        counts = [len(simulate(poisson([2.0]), SimConfig(0, 1000, rng_seed=s))) for s in range(3)]
        assert abs(np.mean(counts) - 2000) < 3 * np.sqrt(2000)

    def test_zero_model_is_empty(self):
        m = hawkes(mu=0.0, alpha=0.0)
        seq = simulate(m, SimConfig(0, 100))
        assert len(seq) == 0 and seq.t_stop == 100

    def test_branching_rate(self):
        seq = simulate(hawkes(0.5, 0.5), SimConfig(0, 20000, rng_seed=1))
        assert len(seq) / 20000 == pytest.approx(1.0, rel=0.05)

    @pytest.mark.parametrize("kernel", ["exponential", "rayleigh", "gaussian", "powerlaw", "gate", "multigauss"])
    def test_output_invariants(self, kernel):
        m = build_model(3, "naive", "naive", kernel, "softplus", inner="softplus", num_basis=2, rng=0)
        seq = simulate(m, SimConfig(2.0, 60.0, rng_seed=4))
        assert np.all(np.diff(seq.times) > 0)
        assert np.all((seq.times > 2.0) & (seq.times <= 60.0))
        assert np.all((seq.events >= 0) & (seq.events < 3))

    def test_deterministic(self):
        m = hawkes()
        a = simulate(m, SimConfig(0, 200, rng_seed=9))
        b = simulate(m, SimConfig(0, 200, rng_seed=9))
        assert a.times.tobytes() == b.times.tobytes() and a.events.tobytes() == b.events.tobytes()

    def test_max_events(self):
        assert len(simulate(poisson([5.0]), SimConfig(0, 100, max_events=10))) == 10

    def test_empty_seed_history_matches_fresh_start(self):
        m = hawkes()
        empty = EventSequence([], [], 0.0, 0.0)
        a = simulate(m, SimConfig(0, 100, rng_seed=3))
        b = simulate(m, SimConfig(0, 100, rng_seed=3, seed_sequence=empty))
        np.testing.assert_array_equal(a.times, b.times)

    def test_seed_history_conditions(self):
        m = hawkes(mu=0.01, alpha=0.9, omega=None) if False else hawkes(mu=0.01, alpha=0.9)
        burst = EventSequence(np.linspace(90, 100, 30), np.zeros(30, int), 0.0, 100.0)
        with_hist = np.mean([len(simulate(m, SimConfig(100, 105, seed_sequence=burst, rng_seed=s))) for s in range(20)])
        without = np.mean([len(simulate(m, SimConfig(100, 105, rng_seed=s))) for s in range(20)])
        assert with_hist > without + 1

    def test_envelope_violation_detected(self, monkeypatch):
        m = hawkes()
        monkeypatch.setattr(m.kernel, "upper_bound", lambda t0, t1: np.zeros(np.shape(t0) + (1,)))
        seq0 = EventSequence([0.5], [0], 0.0, 1.0)
        with pytest.raises(EnvelopeError):
            simulate(m, SimConfig(1.0, 50.0, seed_sequence=seq0, rng_seed=0))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SimConfig(5, 5)
        with pytest.raises(ValueError):
            SimConfig(0, 1, max_events=0)
        with pytest.raises(ValueError):
            SimConfig(0, 1, bound_refresh_width=0)


class TestPredict:
    def db(self):
        seqs = [EventSequence([1.0, 2.0], [0, 1], 0.0, 5.0), EventSequence([3.0], [1], 0.0, 4.0)]
        return Database.from_sequences(seqs, 2, seq_names=["a", "b"])

    def test_poisson_mean(self):
        mu = np.array([1.5, 0.5])
        mean, se = predict(poisson(mu), self.db(), 6.0, 10.0, replicates=400, rng_seed=1, return_stderr=True)
        assert np.all(np.abs(mean - mu * 4.0) < 3 * se)

    def test_single_replicate_equals_simulate(self):
        m = hawkes(C=2, alpha=0.3)
        db = self.db()
        got = predict(m, db, 6.0, 12.0, replicates=1, rng_seed=5)
        for s, seq in enumerate(db.sequences):
            sim = simulate(m, SimConfig(seq.t_stop, 12.0, seed_sequence=seq, rng_seed=replicate_seed(5, s, 0),
                                        seq_index=s))
            np.testing.assert_array_equal(got[s], np.bincount(sim.events[sim.times >= 6.0], minlength=2))

    def test_deterministic(self):
        m = hawkes(C=2, alpha=0.3)
        a = predict(m, self.db(), 5.0, 9.0, replicates=20, rng_seed=2)
        b = predict(m, self.db(), 5.0, 9.0, replicates=20, rng_seed=2)
        np.testing.assert_array_equal(a, b)

    def test_precondition_names_sequence(self):
        with pytest.raises(ValueError, match="'a'"):
            predict(poisson([1.0, 1.0]), self.db(), 4.5, 6.0)

    def test_hawkes_against_high_replicate_reference(self):
        m = hawkes(mu=0.3, alpha=0.6, C=1, memory_size=20)
        db = Database.from_sequences([EventSequence([7.0, 8.5, 9.5], [0, 0, 0], 0.0, 10.0)], 1)
        low, se_low = predict(m, db, 10.0, 15.0, replicates=300, rng_seed=1, return_stderr=True)
        high, se_high = predict(m, db, 10.0, 15.0, replicates=10000, rng_seed=2, return_stderr=True)
        assert abs(low[0, 0] - high[0, 0]) < 3 * np.hypot(se_low[0, 0], se_high[0, 0])


class TestResiduals:
    def test_poisson_rate_one_gives_gaps(self):
        seq = EventSequence([0.5, 1.7, 2.0], [0, 0, 0], 0.0, 3.0)
        np.testing.assert_allclose(time_rescaling_residuals(poisson([1.0]), seq), [0.5, 1.2, 0.3])

    def test_empty(self):
        assert len(time_rescaling_residuals(poisson([1.0]), EventSequence([], [], 0, 1))) == 0

    def test_hawkes_ks(self):
        m = hawkes(0.5, 0.4, memory_size=40)
        seq = simulate(m, SimConfig(0, 3000, rng_seed=11))
        r = time_rescaling_residuals(m, seq)
        assert stats.kstest(r, "expon").pvalue > 0.01
