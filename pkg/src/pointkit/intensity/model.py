"""Composed intensity ``lambda_c(t) = g(mu_c + sum_j sum_m alpha_{c c_j m} kappa_m(t - t_j))``.

The history sum runs over the (at most ``memory_size``) events stored in a
training sample. Padding entries carry the null type ``C``; their impact
coefficients are identically zero.

Everything below is vectorised over a batch. Inside the model the
pre-activation at ``P`` evaluation points per sample is written as

    x[b, p, c] = w[b, p] * mu[b, c] + sum_{k, m} alpha_full[c, k, m] * S[b, p, k, m]

where ``S`` aggregates per-basis kernel features ``Phi[b, p, j, m]`` by
source type ``k`` of history slot ``j``. For the intensity at the target,
``w = 1`` and ``Phi = kappa(lag)``; for the exact (identity-activation)
compensator, ``w`` is the interval length and ``Phi`` a difference of
kernel integrals; for nonlinear activations the compensator is a
Gauss-Legendre sum of ``g(x)`` at ``Q`` nodes.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..kernels import KernelBank
from .activation import Activation, IDENTITY
from .components import ExogenousModel, ImpactModel


@dataclass
class _Piece:
    """Cached linear structure for one set of evaluation points."""

    x: np.ndarray  # (B, P, C) pre-activation
    S: Optional[np.ndarray]  # (B, P, K, M) source-aggregated kernel features
    w: np.ndarray  # (B, P) weight on the exogenous term
    kind: str  # "value", "integral" or "nodes"
    lags: tuple = ()  # lag arrays needed for kernel gradients
    qweights: Optional[np.ndarray] = None  # (B, Q) quadrature weights


@dataclass
class ForwardResult:
    intensity: np.ndarray  # (B, C) at the target times
    counts: np.ndarray  # (B, C) integral of lambda over [prev_time, target_time]
    mu: np.ndarray
    exo_cache: object
    alpha_full: Optional[np.ndarray]
    impact_cache: object
    target: _Piece
    comp: _Piece
    batch: object


class HawkesModel:
    """Exogenous model + impact model + kernel bank + outer activation.

    Without an impact model (``impact=None``) the model is a Poisson process
    whose intensity is the exogenous term alone.
    """

    def __init__(
        self,
        num_types: int,
        exogenous: ExogenousModel,
        impact: Optional[ImpactModel] = None,
        kernel: Optional[KernelBank] = None,
        outer: Activation = IDENTITY,
        memory_size: int = 10,
        quad_nodes: int = 16,
    ):
        if (impact is None) != (kernel is None):
            raise ValueError("impact model and kernel bank must be given together")
        if exogenous.num_types != num_types:
            raise ValueError("exogenous model built for a different number of types")
        if impact is not None:
            if impact.num_types != num_types:
                raise ValueError("impact model built for a different number of types")
            if impact.num_basis != kernel.num_basis:
                raise ValueError(
                    f"impact model has {impact.num_basis} basis weights but kernel bank has {kernel.num_basis}"
                )
        if memory_size < 1:
            raise ValueError("memory_size must be >= 1")
        self.num_types = num_types
        self.exogenous = exogenous
        self.impact = impact
        self.kernel = kernel
        self.outer = Activation.from_config(outer)
        self.memory_size = int(memory_size)
        self.quad_nodes = int(quad_nodes)
        self._gl = np.polynomial.legendre.leggauss(self.quad_nodes)

    # ------------------------------------------------------------------
    # parameters
    # ------------------------------------------------------------------

    def _components(self):
        yield "exo", self.exogenous
        if self.impact is not None:
            yield "impact", self.impact
            yield "kernel", self.kernel

    @property
    def params(self) -> dict:
        """All arrays (trainable and frozen) keyed ``"<component>.<name>"``; views, not copies."""
        return {f"{prefix}.{k}": v for prefix, comp in self._components() for k, v in comp.params.items()}

    @property
    def trainable_names(self) -> list:
        return sorted(f"{prefix}.{k}" for prefix, comp in self._components() for k in comp.trainable)

    def set_trainable(self, name: str, flag: bool):
        prefix, key = name.split(".", 1)
        comp = dict(self._components())[prefix]
        if key not in comp.params:
            raise KeyError(name)
        (comp.trainable.add if flag else comp.trainable.discard)(key)

    def set_params(self, values: dict):
        """Overwrite parameter arrays in place (shapes must match)."""
        params = self.params
        for name, value in values.items():
            if name not in params:
                raise KeyError(f"unknown parameter {name!r}")
            value = np.asarray(value, dtype=np.float64)
            if value.shape != params[name].shape:
                raise ValueError(f"parameter {name!r} has shape {params[name].shape}, got {value.shape}")
            params[name][...] = value

    def project_kernel(self):
        if self.kernel is not None and self.kernel.trainable:
            self.kernel.project()

    def copy(self) -> "HawkesModel":
        return copy.deepcopy(self)

    @property
    def num_basis(self) -> int:
        return 0 if self.kernel is None else self.kernel.num_basis

    def config(self) -> dict:
        return {
            "num_types": self.num_types,
            "exogenous": self.exogenous.config(),
            "impact": None if self.impact is None else self.impact.config(),
            "kernel": None if self.kernel is None else self.kernel.config(),
            "outer": self.outer.config(),
            "memory_size": self.memory_size,
            "quad_nodes": self.quad_nodes,
        }

    # ------------------------------------------------------------------
    # building blocks
    # ------------------------------------------------------------------

    def exogenous_values(self, seq_index, seq_features=None) -> np.ndarray:
        mu, _ = self.exogenous.forward(np.atleast_1d(seq_index), seq_features)
        return mu

    def alpha_full(self):
        """Impact coefficients with a zero slab for the padding source: ``(C, C+1, M)``."""
        alpha, cache = self.impact.forward()
        C = self.num_types
        full = np.zeros((C, C + 1, alpha.shape[2]))
        full[:, :C] = alpha
        return full, cache

    def _source_sum(self, phi, hist_types):
        """``S[b,p,k,m] = sum_j [h_bj == k] phi[b,p,j,m]``."""
        B, P, J, M = phi.shape
        K = self.num_types + 1
        onehot = (hist_types[:, :, None] == np.arange(K)).astype(np.float64)  # (B, J, K)
        flat = phi.transpose(0, 2, 1, 3).reshape(B, J, P * M)
        S = np.matmul(onehot.transpose(0, 2, 1), flat)  # (B, K, P*M)
        return S.reshape(B, K, P, M).transpose(0, 2, 1, 3)

    def _preact(self, mu, w, S, alpha_full):
        x = w[:, :, None] * mu[:, None, :]
        if S is not None:
            B, P, K, M = S.shape
            x = x + (S.reshape(B, P, K * M) @ alpha_full.reshape(self.num_types, K * M).T)
        return x

    def _nodes(self, lo, hi):
        xq, wq = self._gl
        half = (hi - lo)[:, None] / 2.0
        nodes = lo[:, None] + half * (xq + 1.0)
        return nodes, half * wq

    # ------------------------------------------------------------------
    # forward / backward
    # ------------------------------------------------------------------

    def forward(self, batch) -> ForwardResult:
        t = np.asarray(batch.target_times, dtype=np.float64)
        tp = np.asarray(batch.prev_times, dtype=np.float64)
        if np.any(tp > t):
            raise ValueError("prev_time exceeds target_time")
        B = len(t)
        mu, exo_cache = self.exogenous.forward(batch.seq_index, batch.seq_features)
        alpha_full = impact_cache = None
        has_hist = self.impact is not None
        if has_hist:
            alpha_full, impact_cache = self.alpha_full()
            H = batch.history_types
            Ht = batch.history_times
            lag_t = t[:, None] - Ht

        ones = np.ones((B, 1))
        S_t = self._source_sum(self.kernel.value(lag_t)[:, None], H) if has_hist else None
        target = _Piece(self._preact(mu, ones, S_t, alpha_full), S_t, ones, "value",
                        (lag_t[:, None],) if has_hist else ())
        lam = self.outer(target.x[:, 0, :])

        if self.outer.kind == "identity":
            w = (t - tp)[:, None]
            S_c = None
            lags = ()
            if has_hist:
                lag_p = tp[:, None] - Ht
                phi = self.kernel.integral(lag_t) - self.kernel.integral(lag_p)
                S_c = self._source_sum(phi[:, None], H)
                lags = (lag_t[:, None], lag_p[:, None])
            comp = _Piece(self._preact(mu, w, S_c, alpha_full), S_c, w, "integral", lags)
            counts = comp.x[:, 0, :]
        else:
            nodes, qw = self._nodes(tp, t)
            w = np.ones_like(nodes)
            S_c = None
            lags = ()
            if has_hist:
                lag_q = nodes[:, :, None] - Ht[:, None, :]
                S_c = self._source_sum(self.kernel.value(lag_q), H)
                lags = (lag_q,)
            comp = _Piece(self._preact(mu, w, S_c, alpha_full), S_c, w, "nodes", lags, qw)
            counts = np.einsum("bq,bqc->bc", qw, self.outer(comp.x))
        return ForwardResult(lam, counts, mu, exo_cache, alpha_full, impact_cache, target, comp, batch)

    def backward(self, fw: ForwardResult, d_intensity=None, d_counts=None) -> dict:
        """Gradients of a scalar loss w.r.t. every trainable parameter.

        ``d_intensity`` and ``d_counts`` are the loss adjoints for
        ``fw.intensity`` and ``fw.counts`` (``(B, C)`` each, or None for zero).
        """
        B, C = fw.intensity.shape
        pieces = []
        if d_intensity is not None:
            G = (d_intensity * self.outer.grad(fw.target.x[:, 0, :]))[:, None, :]
            pieces.append((fw.target, G))
        if d_counts is not None:
            comp = fw.comp
            if comp.kind == "integral":
                G = d_counts[:, None, :]
            else:
                G = d_counts[:, None, :] * comp.qweights[:, :, None] * self.outer.grad(comp.x)
            pieces.append((comp, G))

        d_mu = np.zeros((B, C))
        for piece, G in pieces:
            d_mu += np.einsum("bpc,bp->bc", G, piece.w)
        grads = {f"exo.{k}": v for k, v in self.exogenous.backward(d_mu, fw.exo_cache).items()}

        if self.impact is not None:
            K = C + 1
            M = self.kernel.num_basis
            d_alpha = np.zeros((C, K * M))
            kgrads = {k: np.zeros(M) for k in self.kernel.trainable}
            for piece, G in pieces:
                Gf = G.reshape(-1, C)
                d_alpha += Gf.T @ piece.S.reshape(-1, K * M)
                if kgrads:
                    P = G.shape[1]
                    dS = (Gf @ fw.alpha_full.reshape(C, K * M)).reshape(B, P, K, M)
                    H = fw.batch.history_types
                    J = H.shape[1]
                    idx = np.broadcast_to(H[:, None, :, None], (B, P, J, M))
                    d_phi = np.take_along_axis(dS, idx, axis=2)  # (B, P, J, M)
                    for name, val in self._kernel_feature_grads(piece).items():
                        if name in kgrads:
                            kgrads[name] += np.einsum("bpjm,bpjm->m", d_phi, val)
            d_alpha = d_alpha.reshape(C, K, M)[:, :C]
            grads.update({f"impact.{k}": v for k, v in self.impact.backward(d_alpha, fw.impact_cache).items()})
            grads.update({f"kernel.{k}": v for k, v in kgrads.items()})

        return {k: v for k, v in grads.items() if k in set(self.trainable_names)}

    def _kernel_feature_grads(self, piece: _Piece) -> dict:
        if piece.kind == "integral":
            lag_t, lag_p = piece.lags
            g_t = self.kernel.integral_grad(lag_t)
            g_p = self.kernel.integral_grad(lag_p)
            return {k: g_t[k] - g_p[k] for k in g_t}
        (lag,) = piece.lags
        return self.kernel.value_grad(lag)

    # ------------------------------------------------------------------
    # convenience
    # ------------------------------------------------------------------

    def intensity(self, batch) -> np.ndarray:
        """``lambda_c(t_i)`` for every type: ``(B, C)``."""
        return self.forward(batch).intensity

    def expected_counts(self, batch) -> np.ndarray:
        """``int_{t_{i-1}}^{t_i} lambda_c(s) ds`` for every type: ``(B, C)``."""
        return self.forward(batch).counts

    def infectivity_matrix(self) -> np.ndarray:
        """``(C, C)`` matrix of total impact mass; entry ``(c, c')`` is the effect of ``c'`` on ``c``."""
        C = self.num_types
        if self.impact is None:
            return np.zeros((C, C))
        alpha, _ = self.impact.forward()
        return alpha @ self.kernel.total_mass()
