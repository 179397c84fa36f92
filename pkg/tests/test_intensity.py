import itertools
import math

import numpy as np
import pytest

from pointkit import Database, EventSequence, build_model
from pointkit.intensity import (
    Activation,
    ConstantExogenous,
    HawkesModel,
    exo_value,
    expected_counts,
    impact_coeff,
    infectivity_matrix,
    intensity,
    model_param_grad,
)
from pointkit.kernels import ExponentialKernel
from pointkit.learning.losses import TERMS, LossKind
from pointkit.preprocess import EventSampler, SampleBatch, TrainingSample

EXO = ["constant", "naive", "linear", "neural"]
IMPACT = ["basic", "naive", "factorized", "linear", "bilinear"]
KERNEL = ["exponential", "rayleigh", "gaussian", "powerlaw", "gate", "multigauss"]
# kernel parameters kept away from points where the compensator has kinks
KERNEL_PARAMS = {"exponential": {"omega": 1.3, "delta": 0.1}, "gate": {"omega": 0.1, "delta": 1.5}}


def sample(target_time, prev_time, hist_types, hist_times, target_type=0, seq_index=-1, feature=None):
    return TrainingSample(target_type, target_time, prev_time, np.asarray(hist_types), np.asarray(hist_times),
                          seq_index, feature)


def hawkes_1d(mu=0.2, alpha=0.5, omega=1.0, outer="identity"):
    m = build_model(1, "constant", "basic", "exponential", outer, kernel_params={"omega": omega, "delta": 0.0},
                    num_basis=1, memory_size=3)
    m.set_params({"exo.mu": [mu], "impact.A": np.full((1, 1, 1), alpha)})
    return m


def small_corpus(C=3, seed=0):
    rng = np.random.default_rng(seed)
    seqs = []
    for _ in range(3):
        t = np.sort(rng.uniform(0, 8, 8))
        seqs.append(EventSequence(t, rng.integers(0, C, 8), 0.0, 8.0, seq_feature=rng.uniform(0.2, 1.0, 2)))
    return Database.from_sequences(seqs, C)


def finite_difference_check(model, batch, kind, tol=1e-4):
    kind = LossKind.parse(kind)
    fw = model.forward(batch)
    _, d_int, d_cnt = TERMS[kind](fw, batch)
    grads = model.backward(fw, d_int, d_cnt)

    def loss():
        return TERMS[kind](model.forward(batch), batch)[0]

    worst = 0.0
    for name in model.trainable_names:
        p = model.params[name]
        fd = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            orig = p[idx]
            h = 1e-6 * max(1.0, abs(orig))
            p[idx] = orig + h
            up = loss()
            p[idx] = orig - h
            down = loss()
            p[idx] = orig
            fd[idx] = (up - down) / (2 * h)
        scale = max(np.max(np.abs(fd)), 1e-6)
        worst = max(worst, float(np.max(np.abs(fd - grads[name])) / scale))
    assert worst < tol, worst
    return worst


class TestExogenous:
    def test_constant_lookup(self):
        m = HawkesModel(2, ConstantExogenous(2, mu=[0.3, 0.7]))
        assert exo_value(m, 1) == pytest.approx(0.7)

    def test_linear_relu(self):
        m = build_model(2, "linear", None, outer="identity", exo_inner="relu", seq_feature_dim=2)
        m.set_params({"exo.W": [[1.0, -1.0], [-1.0, 0.0]]})
        assert exo_value(m, 0, [2.0, 0.5]) == pytest.approx(1.5)
        assert exo_value(m, 1, [2.0, 0.5]) == 0.0

    def test_linear_feature_width_checked(self):
        m = build_model(2, "linear", None, seq_feature_dim=2)
        with pytest.raises(ValueError):
            exo_value(m, 0, [1.0, 2.0, 3.0])

    @pytest.mark.parametrize("kind", ["linear", "neural"])
    def test_embedding_fallback_for_unknown_sequence(self, kind):
        m = build_model(3, kind, None, num_seqs=4, rng=0)
        vals = [exo_value(m, c, seq_index=s) for c in range(3) for s in (-1, 0, 3, 99)]
        assert np.all(np.isfinite(vals))


class TestImpact:
    def test_basic_lookup_and_pad(self):
        m = build_model(2, "constant", "basic", "multigauss", num_basis=2)
        A = np.zeros((2, 2, 2))
        A[0, 1] = [0.2, 0.1]
        m.set_params({"impact.A": A})
        np.testing.assert_allclose(impact_coeff(m, 0, 1), [0.2, 0.1])
        np.testing.assert_array_equal(impact_coeff(m, 0, 2), [0.0, 0.0])

    def test_factorized_scalar(self):
        m = build_model(1, "constant", "factorized", num_basis=1, latent_dim=1)
        m.set_params({"impact.U": np.full((1, 1, 1), 2.0), "impact.V": np.full((1, 1, 1), 0.3)})
        np.testing.assert_allclose(impact_coeff(m, 0, 0), [0.6])

    @pytest.mark.parametrize("kind", ["linear", "bilinear"])
    def test_feature_free_fallback_is_finite(self, kind):
        m = build_model(3, "constant", kind, num_basis=2, rng=0)
        coeffs = np.array([impact_coeff(m, c, s) for c in range(3) for s in range(4)])
        assert np.all(np.isfinite(coeffs))
        np.testing.assert_array_equal([impact_coeff(m, c, 3) for c in range(3)], 0.0)

    @pytest.mark.parametrize("kind", ["linear", "bilinear"])
    def test_event_features_used(self, kind):
        ef = np.array([[1.0, 0.0], [0.0, 1.0]])
        m = build_model(2, "constant", kind, num_basis=1, event_features=ef)
        assert "impact.type_features" in m.params
        assert "impact.type_features" not in m.trainable_names


class TestIntensity:
    def test_empty_history(self):
        m = hawkes_1d()
        assert intensity(m, sample(1.0, 0.0, [1, 1, 1], [0, 0, 0]), 0) == pytest.approx(0.2)

    def test_one_past_event(self):
        m = hawkes_1d()
        lam = intensity(m, sample(1.0, 0.0, [1, 1, 0], [0.0, 0.0, 0.0]), 0)
        assert lam == pytest.approx(0.2 + 0.5 * math.exp(-1), abs=1e-12)
        assert lam == pytest.approx(0.38394, abs=1e-5)

    def test_relu_clamp(self):
        m = hawkes_1d(mu=-1.0, outer="relu")
        assert intensity(m, sample(1.0, 0.0, [1, 1, 1], [0, 0, 0]), 0) == 0.0

    def test_brute_force_history_sum(self):
        rng = np.random.default_rng(2)
        C, M = 3, 5
        m = build_model(C, "constant", "basic", "multigauss", num_basis=2, memory_size=M, rng=1)
        ht = np.sort(rng.uniform(0, 5, M))
        hc = rng.integers(0, C + 1, M)
        s = sample(6.0, ht[-1], hc, ht)
        mu = m.params["exo.mu"]
        A = m.params["impact.A"]
        expect = mu.copy()
        for tj, cj in zip(ht, hc):
            if cj < C:
                expect += A[:, cj] @ m.kernel.value(np.array(6.0 - tj))
        np.testing.assert_allclose(intensity(m, s), expect, rtol=1e-12)


class TestExpectedCounts:
    def test_poisson(self):
        m = HawkesModel(2, ConstantExogenous(2, mu=[2.0, 0.5]))
        np.testing.assert_allclose(expected_counts(m, sample(3.0, 2.0, [2], [0.0])), [2.0, 0.5])

    def test_one_event_hand_trace(self):
        m = hawkes_1d(mu=0.0)
        got = expected_counts(m, sample(2.0, 1.0, [1, 1, 0], [0.0, 0.0, 0.0]))
        assert got[0] == pytest.approx(0.5 * (math.exp(-1) - math.exp(-2)), abs=1e-12)
        assert got[0] == pytest.approx(0.11627, abs=1e-5)

    @pytest.mark.parametrize("outer", ["identity", "softplus"])
    def test_additive_over_splits(self, outer):
        m = build_model(2, "constant", "basic", "gaussian", outer, memory_size=3, rng=0)
        h = ([0, 1, 0], [0.5, 1.0, 1.5])
        whole = expected_counts(m, sample(4.0, 2.0, *h))
        parts = expected_counts(m, sample(3.1, 2.0, *h)) + expected_counts(m, sample(4.0, 3.1, *h))
        tol = 1e-12 if outer == "identity" else 1e-8
        np.testing.assert_allclose(whole, parts, atol=tol)

    def test_derivative_is_intensity(self):
        m = build_model(2, "constant", "basic", "rayleigh", memory_size=3, rng=0)
        h = ([0, 1, 1], [0.5, 1.0, 1.5])
        t, eps = 2.7, 1e-6
        d = (expected_counts(m, sample(t + eps, 2.0, *h)) - expected_counts(m, sample(t - eps, 2.0, *h))) / (2 * eps)
        np.testing.assert_allclose(d, intensity(m, sample(t, 2.0, *h)), rtol=1e-6)

    def test_prev_after_target(self):
        with pytest.raises(ValueError):
            expected_counts(hawkes_1d(), sample(1.0, 2.0, [1, 1, 1], [0, 0, 0]))

    def test_nonnegative_with_softplus(self):
        m = build_model(3, "linear", "linear", "gate", "softplus", rng=0, memory_size=4)
        b = EventSampler(small_corpus(), 4).all
        assert np.all(m.intensity(b) >= 0) and np.all(m.expected_counts(b) >= 0)


class TestInfectivity:
    def test_zero_and_single_entry(self):
        m = build_model(2, "constant", "basic", "exponential")
        m.set_params({"impact.A": np.zeros((2, 2, 1))})
        np.testing.assert_array_equal(infectivity_matrix(m), 0.0)
        A = np.zeros((2, 2, 1))
        A[0, 1, 0] = 0.5
        m.set_params({"impact.A": A})
        np.testing.assert_allclose(infectivity_matrix(m), [[0, 0.5], [0, 0]])

    def test_gaussian_mass_half(self):
        m = build_model(1, "constant", "basic", "gaussian")
        m.set_params({"impact.A": np.ones((1, 1, 1))})
        assert infectivity_matrix(m)[0, 0] == pytest.approx(0.5)


class TestGradients:
    def test_poisson_closed_form(self):
        mu = 0.7
        seq = EventSequence([0.5, 1.0, 2.5, 4.0], [0, 0, 0, 0], 0.0, 4.0)
        db = Database.from_sequences([seq], 1)
        m = HawkesModel(1, ConstantExogenous(1, mu=[mu]))
        b = EventSampler(db, 1).all
        _, d_int, d_cnt = TERMS[LossKind.MLE](m.forward(b), b)
        g = model_param_grad(m, b, d_int, d_cnt)
        assert g["exo.mu"][0] == pytest.approx(-4 / mu + 4.0)

    def test_zero_adjoints(self):
        m = build_model(3, "neural", "bilinear", "multigauss", "softplus", num_basis=2, rng=0)
        b = EventSampler(small_corpus(), 3).all
        zeros = np.zeros((len(b), 3))
        for g in model_param_grad(m, b, zeros, zeros).values():
            assert not np.any(g)

    @pytest.mark.parametrize("exo,impact", list(itertools.product(EXO, IMPACT)))
    @pytest.mark.parametrize("outer", ["identity", "softplus"])
    def test_mle_all_compositions(self, exo, impact, outer):
        db = small_corpus()
        for kernel in KERNEL:
            for with_features in (False, True):
                m = build_model(3, exo, impact, kernel, outer, inner="softplus" if outer != "identity" else "identity",
                                kernel_params=KERNEL_PARAMS.get(kernel), kernel_trainable=True, num_basis=2,
                                t_max=3.0, memory_size=3, seq_feature_dim=2 if with_features else None,
                                num_seqs=3, event_features=np.full((2, 3), 0.7) + np.eye(2, 3) * 0.2
                                if with_features else None, rng=1)
                for name in m.trainable_names:
                    if not name.startswith("kernel"):
                        p = m.params[name]
                        p[...] = np.abs(p) + 0.05
                finite_difference_check(m, EventSampler(db, 3).all, "mle")

    @pytest.mark.parametrize("outer", ["identity", "relu", "softplus"])
    @pytest.mark.parametrize("loss", ["lse", "ce"])
    def test_other_losses(self, outer, loss):
        m = build_model(3, "linear", "factorized", "powerlaw", outer, kernel_trainable=True, num_basis=1,
                        memory_size=3, num_seqs=3, rng=2)
        finite_difference_check(m, EventSampler(small_corpus(), 3).all, loss)

    def test_flipped_softplus(self):
        m = build_model(3, "naive", "naive", "exponential", {"kind": "softplus", "flipped": True},
                        kernel_params=KERNEL_PARAMS["exponential"], memory_size=3, rng=3)
        assert not m.outer.increasing
        finite_difference_check(m, EventSampler(small_corpus(), 3).all, "mle")


class TestActivation:
    def test_softplus_values(self):
        g = Activation("softplus", beta=2.0)
        np.testing.assert_allclose(g(np.array([0.0])), [math.log(2) / 2])
        assert Activation("softplus", flipped=True)(np.array([5.0]))[0] < 0.01

    def test_validation(self):
        with pytest.raises(ValueError):
            Activation("tanh")
        with pytest.raises(ValueError):
            Activation("softplus", beta=0.0)


class TestModelStructure:
    def test_basis_mismatch(self):
        from pointkit.intensity import make_exogenous, make_impact
        with pytest.raises(ValueError, match="basis"):
            HawkesModel(2, make_exogenous("naive", 2), make_impact("basic", 2, 3), ExponentialKernel())

    def test_set_params_shape(self):
        m = hawkes_1d()
        with pytest.raises(ValueError, match="exo.mu"):
            m.set_params({"exo.mu": [1.0, 2.0]})

    def test_batch_forward_matches_single(self):
        m = build_model(3, "naive", "naive", "gaussian", "softplus", inner="softplus", memory_size=3, rng=0)
        b = EventSampler(small_corpus(), 3).all
        full = m.intensity(b)
        for i in (0, 5, 11):
            np.testing.assert_allclose(intensity(m, b.sample(i)), full[i], rtol=1e-13)
        assert isinstance(b.take([0, 1]), SampleBatch)
