"""Exogenous-intensity and impact-coefficient families.

Every component owns a dict of named float arrays (``params``) and a set of
names that are trainable; the rest are frozen buffers (fixed features,
reference vectors). ``forward`` returns values plus a cache, ``backward``
maps the upstream gradient back onto ``params``.
"""
from __future__ import annotations

from typing import Optional

import numpy as np

from .activation import Activation, IDENTITY


def gather_rows(table: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Rows of ``table``; indices outside ``[0, len(table))`` get the mean row."""
    idx = np.asarray(idx, dtype=np.int64)
    valid = (idx >= 0) & (idx < len(table))
    out = table[np.where(valid, idx, 0)]
    if not valid.all():
        out[~valid] = table.mean(axis=0)
    return out


def scatter_rows(grad: np.ndarray, idx: np.ndarray, n: int) -> np.ndarray:
    """Adjoint of :func:`gather_rows`."""
    idx = np.asarray(idx, dtype=np.int64)
    valid = (idx >= 0) & (idx < n)
    out = np.zeros((n, grad.shape[1]))
    np.add.at(out, idx[valid], grad[valid])
    if not valid.all():
        out += grad[~valid].sum(axis=0) / n
    return out


class Component:
    kind = "base"

    def __init__(self):
        self.params: dict = {}
        self.trainable: set = set()

    def _add(self, name, value, trainable=True):
        self.params[name] = np.array(value, dtype=np.float64)
        if trainable:
            self.trainable.add(name)

    def config(self) -> dict:
        raise NotImplementedError

    def zero_grads(self) -> dict:
        return {k: np.zeros_like(self.params[k]) for k in self.trainable}


# --------------------------------------------------------------------------
# exogenous intensity mu_c(f_c, f_s)
# --------------------------------------------------------------------------


class ExogenousModel(Component):
    """Base of the exogenous families. ``forward`` returns an array ``(B, C)``."""

    def __init__(self, num_types: int, g: Activation = IDENTITY):
        super().__init__()
        self.num_types = num_types
        self.g = Activation.from_config(g)

    def forward(self, seq_index, seq_features=None):
        raise NotImplementedError

    def backward(self, d_mu, cache) -> dict:
        raise NotImplementedError


class ConstantExogenous(ExogenousModel):
    """``mu_c``, used raw."""

    kind = "constant"

    def __init__(self, num_types, mu=None, rng=None, g: Activation = IDENTITY):
        super().__init__(num_types, g)
        if mu is None:
            rng = np.random.default_rng(rng)
            mu = rng.uniform(0.1, 0.5, num_types) / num_types
        self._add("mu", np.broadcast_to(np.asarray(mu, float), (num_types,)))

    def forward(self, seq_index, seq_features=None):
        B = len(seq_index)
        return np.broadcast_to(self.params["mu"], (B, self.num_types)).copy(), None

    def backward(self, d_mu, cache):
        return {"mu": d_mu.sum(axis=0)}

    def config(self):
        return {"kind": self.kind, "g": self.g.config()}


class NaiveExogenous(ConstantExogenous):
    """``g(mu_c)``."""

    kind = "naive"

    def forward(self, seq_index, seq_features=None):
        B = len(seq_index)
        mu = self.params["mu"]
        return np.broadcast_to(self.g(mu), (B, self.num_types)).copy(), None

    def backward(self, d_mu, cache):
        return {"mu": d_mu.sum(axis=0) * self.g.grad(self.params["mu"])}


class _SeqFeatureMixin:
    """Sequence features either come with the batch or from a learned embedding.

    With ``seq_feature_dim`` set, batches must carry features; batches that do
    not fall back to the frozen ``seq_feature_mean`` buffer. Without it, a
    ``(num_seqs, embed_dim)`` embedding table is learned and sequence indices
    outside the table map to its mean row.
    """

    def _init_seq_features(self, seq_feature_dim, num_seqs, embed_dim, rng):
        self.uses_seq_embedding = seq_feature_dim is None
        if self.uses_seq_embedding:
            self._add("seq_embed", rng.normal(0.0, 0.1, (max(num_seqs, 1), embed_dim)))
            return embed_dim
        self._add("seq_feature_mean", np.zeros(seq_feature_dim), trainable=False)
        return seq_feature_dim

    def _seq_features(self, seq_index, seq_features):
        if self.uses_seq_embedding:
            return gather_rows(self.params["seq_embed"], seq_index)
        D = len(self.params["seq_feature_mean"])
        if seq_features is None:
            return np.broadcast_to(self.params["seq_feature_mean"], (len(seq_index), D)).copy()
        seq_features = np.asarray(seq_features, dtype=np.float64)
        if seq_features.shape[1] != D:
            raise ValueError(f"sequence features have width {seq_features.shape[1]}, model expects {D}")
        return seq_features

    def _seq_feature_grad(self, grads, d_feat, seq_index):
        if self.uses_seq_embedding:
            grads["seq_embed"] = scatter_rows(d_feat, seq_index, len(self.params["seq_embed"]))


class LinearExogenous(_SeqFeatureMixin, ExogenousModel):
    """``g(w_c . f_s)``."""

    kind = "linear"

    def __init__(self, num_types, seq_feature_dim=None, num_seqs=1, embed_dim=4,
                 g: Activation = IDENTITY, rng=None):
        super().__init__(num_types, g)
        rng = np.random.default_rng(rng)
        D = self._init_seq_features(seq_feature_dim, num_seqs, embed_dim, rng)
        self.shape_config = {"seq_feature_dim": seq_feature_dim, "num_seqs": num_seqs, "embed_dim": embed_dim}
        self._add("W", rng.uniform(0.1, 0.5, (num_types, D)) / (num_types * D))

    def forward(self, seq_index, seq_features=None):
        F = self._seq_features(seq_index, seq_features)
        z = F @ self.params["W"].T
        return self.g(z), (F, z, seq_index)

    def backward(self, d_mu, cache):
        F, z, seq_index = cache
        dz = d_mu * self.g.grad(z)
        grads = {"W": dz.T @ F}
        self._seq_feature_grad(grads, dz @ self.params["W"], seq_index)
        return grads

    def config(self):
        return {"kind": self.kind, "g": self.g.config(), **self.shape_config}


class NeuralExogenous(_SeqFeatureMixin, ExogenousModel):
    """One hidden layer on ``[f_c, f_s]``: ``g(u . tanh(V_t f_c + V_s f_s + b1) + b2)``.

    ``f_c`` is a fixed event-feature column when ``event_features`` is given,
    otherwise a learned per-type embedding.
    """

    kind = "neural"

    def __init__(self, num_types, seq_feature_dim=None, num_seqs=1, embed_dim=4, hidden=8,
                 event_features=None, g: Activation = IDENTITY, rng=None):
        super().__init__(num_types, g)
        rng = np.random.default_rng(rng)
        Ds = self._init_seq_features(seq_feature_dim, num_seqs, embed_dim, rng)
        self.uses_type_embedding = event_features is None
        if self.uses_type_embedding:
            self._add("type_embed", rng.normal(0.0, 0.1, (num_types, embed_dim)))
        else:
            ef = np.asarray(event_features, dtype=np.float64)
            if ef.shape[1] != num_types:
                raise ValueError("event_features must have one column per type")
            self._add("type_features", ef.T, trainable=False)
        De = self._type_feats().shape[1]
        self.shape_config = {"seq_feature_dim": seq_feature_dim, "num_seqs": num_seqs, "embed_dim": embed_dim,
                             "hidden": hidden, "event_feature_dim": None if event_features is None else De}
        scale = 1.0 / np.sqrt(De + Ds)
        self._add("V_type", rng.normal(0.0, scale, (hidden, De)))
        self._add("V_seq", rng.normal(0.0, scale, (hidden, Ds)))
        self._add("b1", np.zeros(hidden))
        self._add("u", rng.uniform(0.0, 0.1, hidden) / hidden)
        self._add("b2", np.full(1, 0.3 / num_types))

    def _type_feats(self):
        return self.params["type_embed"] if self.uses_type_embedding else self.params["type_features"]

    def forward(self, seq_index, seq_features=None):
        p = self.params
        F = self._seq_features(seq_index, seq_features)
        Fc = self._type_feats()
        a = (Fc @ p["V_type"].T)[None, :, :] + (F @ p["V_seq"].T)[:, None, :] + p["b1"]
        h = np.tanh(a)
        z = h @ p["u"] + p["b2"][0]
        return self.g(z), (F, Fc, h, z, seq_index)

    def backward(self, d_mu, cache):
        p = self.params
        F, Fc, h, z, seq_index = cache
        dz = d_mu * self.g.grad(z)
        da = dz[:, :, None] * p["u"] * (1.0 - h * h)
        grads = {
            "u": np.einsum("bc,bch->h", dz, h),
            "b2": np.array([dz.sum()]),
            "b1": da.sum(axis=(0, 1)),
            "V_type": np.einsum("bch,cd->hd", da, Fc),
            "V_seq": np.einsum("bch,bd->hd", da, F),
        }
        if self.uses_type_embedding:
            grads["type_embed"] = np.einsum("bch,hd->cd", da, p["V_type"])
        self._seq_feature_grad(grads, np.einsum("bch,hd->bd", da, p["V_seq"]), seq_index)
        return grads

    def config(self):
        return {"kind": self.kind, "g": self.g.config(), **self.shape_config}


EXOGENOUS = {cls.kind: cls for cls in (ConstantExogenous, NaiveExogenous, LinearExogenous, NeuralExogenous)}


# --------------------------------------------------------------------------
# impact coefficients alpha_{c c' m}(f_c, f_c')
# --------------------------------------------------------------------------


class ImpactModel(Component):
    """Base of the impact families. ``forward`` returns ``alpha`` of shape ``(C, C, M)``.

    ``alpha[c, c', m]`` is the weight of basis ``m`` for the influence of a
    past type-``c'`` event on type ``c``.
    """

    def __init__(self, num_types: int, num_basis: int, g: Activation = IDENTITY):
        super().__init__()
        self.num_types = num_types
        self.num_basis = num_basis
        self.g = Activation.from_config(g)

    def forward(self):
        raise NotImplementedError

    def backward(self, d_alpha, cache) -> dict:
        raise NotImplementedError

    def _init_scale(self):
        return 0.1 / (self.num_types * self.num_basis)


class BasicImpact(ImpactModel):
    kind = "basic"

    def __init__(self, num_types, num_basis=1, A=None, g: Activation = IDENTITY, rng=None):
        super().__init__(num_types, num_basis, g)
        if A is None:
            rng = np.random.default_rng(rng)
            A = rng.uniform(0.0, self._init_scale(), (num_types, num_types, num_basis))
        A = np.asarray(A, dtype=np.float64)
        if A.shape != (num_types, num_types, num_basis):
            raise ValueError(f"A must have shape {(num_types, num_types, num_basis)}, got {A.shape}")
        self._add("A", A)

    def forward(self):
        return self.params["A"].copy(), None

    def backward(self, d_alpha, cache):
        return {"A": d_alpha}

    def config(self):
        return {"kind": self.kind, "g": self.g.config()}


class NaiveImpact(BasicImpact):
    kind = "naive"

    def forward(self):
        return self.g(self.params["A"]), None

    def backward(self, d_alpha, cache):
        return {"A": d_alpha * self.g.grad(self.params["A"])}


class FactorizedImpact(ImpactModel):
    """``g(u_{cm} . v_{c'm})`` with latent dimension ``latent_dim``."""

    kind = "factorized"

    def __init__(self, num_types, num_basis=1, latent_dim=2, g: Activation = IDENTITY, rng=None):
        super().__init__(num_types, num_basis, g)
        rng = np.random.default_rng(rng)
        hi = 2.0 * np.sqrt(0.5 * self._init_scale() / latent_dim)
        self._add("U", rng.uniform(0.0, hi, (num_types, num_basis, latent_dim)))
        self._add("V", rng.uniform(0.0, hi, (num_types, num_basis, latent_dim)))

    def forward(self):
        z = np.einsum("cmk,dmk->cdm", self.params["U"], self.params["V"])
        return self.g(z), z

    def backward(self, d_alpha, z):
        dz = d_alpha * self.g.grad(z)
        return {"U": np.einsum("cdm,dmk->cmk", dz, self.params["V"]),
                "V": np.einsum("cdm,cmk->dmk", dz, self.params["U"])}

    def config(self):
        return {"kind": self.kind, "g": self.g.config(), "latent_dim": self.params["U"].shape[2]}


class _TypeFeatureMixin:
    """Per-type features: fixed columns of ``event_features`` or a learned table.

    The learned table has ``C + 1`` rows; the last row belongs to the padding
    type, is held at zero and never receives gradient.
    """

    def _init_type_features(self, event_features, embed_dim, rng):
        C = self.num_types
        self.uses_type_embedding = event_features is None
        if self.uses_type_embedding:
            table = rng.normal(0.0, 0.1, (C + 1, embed_dim))
            table[C] = 0.0
            self._add("type_embed", table)
            return embed_dim
        ef = np.asarray(event_features, dtype=np.float64)
        if ef.ndim != 2 or ef.shape[1] != C:
            raise ValueError(f"event_features must have shape (D_e, {C})")
        self._add("type_features", ef.T, trainable=False)
        return ef.shape[0]

    def _feats(self):
        if self.uses_type_embedding:
            return self.params["type_embed"][: self.num_types]
        return self.params["type_features"]

    def _feat_grad(self, grads, d_feat):
        if self.uses_type_embedding:
            g = np.zeros_like(self.params["type_embed"])
            g[: self.num_types] = d_feat
            grads["type_embed"] = g

    def _feature_config(self):
        return {"event_feature_dim": None if self.uses_type_embedding else self.params["type_features"].shape[1],
                "embed_dim": self.params["type_embed"].shape[1] if self.uses_type_embedding else 4}


class LinearImpact(_TypeFeatureMixin, ImpactModel):
    """``g(w_{cm} . f_{c'})``."""

    kind = "linear"

    def __init__(self, num_types, num_basis=1, event_features=None, embed_dim=4,
                 g: Activation = IDENTITY, rng=None):
        super().__init__(num_types, num_basis, g)
        rng = np.random.default_rng(rng)
        D = self._init_type_features(event_features, embed_dim, rng)
        self._add("W", rng.uniform(0.0, self._init_scale(), (num_types, num_basis, D)))

    def forward(self):
        F = self._feats()
        z = np.einsum("cmk,dk->cdm", self.params["W"], F)
        return self.g(z), (F, z)

    def backward(self, d_alpha, cache):
        F, z = cache
        dz = d_alpha * self.g.grad(z)
        grads = {"W": np.einsum("cdm,dk->cmk", dz, F)}
        self._feat_grad(grads, np.einsum("cdm,cmk->dk", dz, self.params["W"]))
        return grads

    def config(self):
        return {"kind": self.kind, "g": self.g.config(), **self._feature_config()}


class BilinearImpact(_TypeFeatureMixin, ImpactModel):
    """``g(f_c^T W_m f_{c'})``."""

    kind = "bilinear"

    def __init__(self, num_types, num_basis=1, event_features=None, embed_dim=4,
                 g: Activation = IDENTITY, rng=None):
        super().__init__(num_types, num_basis, g)
        rng = np.random.default_rng(rng)
        D = self._init_type_features(event_features, embed_dim, rng)
        self._add("W", rng.uniform(0.0, self._init_scale(), (num_basis, D, D)))

    def forward(self):
        F = self._feats()
        z = np.einsum("ck,mkl,dl->cdm", F, self.params["W"], F)
        return self.g(z), (F, z)

    def backward(self, d_alpha, cache):
        F, z = cache
        W = self.params["W"]
        dz = d_alpha * self.g.grad(z)
        grads = {"W": np.einsum("cdm,ck,dl->mkl", dz, F, F)}
        dF = np.einsum("cdm,mkl,dl->ck", dz, W, F) + np.einsum("cdm,ck,mkl->dl", dz, F, W)
        self._feat_grad(grads, dF)
        return grads

    def config(self):
        return {"kind": self.kind, "g": self.g.config(), **self._feature_config()}


IMPACTS = {cls.kind: cls for cls in (BasicImpact, NaiveImpact, FactorizedImpact, LinearImpact, BilinearImpact)}


def make_exogenous(kind: str, num_types: int, *, g=IDENTITY, seq_feature_dim: Optional[int] = None,
                   num_seqs: int = 1, event_features=None, embed_dim: int = 4, hidden: int = 8,
                   rng=None) -> ExogenousModel:
    kind = kind.lower()
    g = Activation.from_config(g)
    if kind in ("constant", "basic"):
        return ConstantExogenous(num_types, g=g, rng=rng)
    if kind == "naive":
        return NaiveExogenous(num_types, g=g, rng=rng)
    if kind == "linear":
        return LinearExogenous(num_types, seq_feature_dim=seq_feature_dim, num_seqs=num_seqs,
                               embed_dim=embed_dim, g=g, rng=rng)
    if kind == "neural":
        return NeuralExogenous(num_types, seq_feature_dim=seq_feature_dim, num_seqs=num_seqs,
                               embed_dim=embed_dim, hidden=hidden, event_features=event_features,
                               g=g, rng=rng)
    raise ValueError(f"unknown exogenous model {kind!r}; choose from {sorted(EXOGENOUS)}")


def make_impact(kind: str, num_types: int, num_basis: int, *, g=IDENTITY, event_features=None,
                embed_dim: int = 4, latent_dim: int = 2, rng=None) -> ImpactModel:
    kind = kind.lower()
    g = Activation.from_config(g)
    if kind == "basic":
        return BasicImpact(num_types, num_basis, g=g, rng=rng)
    if kind == "naive":
        return NaiveImpact(num_types, num_basis, g=g, rng=rng)
    if kind == "factorized":
        return FactorizedImpact(num_types, num_basis, latent_dim=latent_dim, g=g, rng=rng)
    if kind == "linear":
        return LinearImpact(num_types, num_basis, event_features=event_features, embed_dim=embed_dim, g=g, rng=rng)
    if kind == "bilinear":
        return BilinearImpact(num_types, num_basis, event_features=event_features, embed_dim=embed_dim, g=g, rng=rng)
    raise ValueError(f"unknown impact model {kind!r}; choose from {sorted(IMPACTS)}")
