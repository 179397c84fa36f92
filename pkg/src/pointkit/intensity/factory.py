from __future__ import annotations

from typing import Optional

import numpy as np

from ..kernels import KERNELS, MultiGaussKernel, make_kernel
from .activation import Activation
from .components import make_exogenous, make_impact
from .model import HawkesModel

DEFAULT_KERNEL_PARAMS = {
    "exponential": {"omega": 1.0, "delta": 0.0},
    "rayleigh": {"omega": 1.0},
    "gaussian": {"sigma": 1.0},
    "powerlaw": {"omega": 2.0, "delta": 1.0},
    "gate": {"omega": 0.0, "delta": 1.0},
}


def build_kernel(kind: str, params: Optional[dict] = None, num_basis: int = 4, t_max: float = 10.0,
                 trainable=False):
    kind = kind.lower()
    if kind not in KERNELS:
        raise ValueError(f"unknown kernel {kind!r}; choose from {sorted(KERNELS)}")
    if kind == "multigauss":
        if params:
            return MultiGaussKernel(trainable=trainable, **params)
        return MultiGaussKernel.from_grid(t_max, num_basis, trainable=trainable)
    merged = {**DEFAULT_KERNEL_PARAMS[kind], **(params or {})}
    return make_kernel(kind, trainable=trainable, **merged)


def build_model(
    num_types: int,
    exogenous: str = "naive",
    impact: Optional[str] = "naive",
    kernel: str = "exponential",
    outer="identity",
    *,
    inner="identity",
    exo_inner=None,
    kernel_params: Optional[dict] = None,
    kernel_trainable=False,
    num_basis: int = 4,
    t_max: float = 10.0,
    memory_size: int = 10,
    quad_nodes: int = 16,
    seq_feature_dim: Optional[int] = None,
    num_seqs: int = 1,
    event_features=None,
    embed_dim: int = 4,
    hidden: int = 8,
    latent_dim: int = 2,
    rng=None,
) -> HawkesModel:
    """Assemble a model from component names.

    ``inner`` is the activation used inside the impact model (and the
    exogenous model unless ``exo_inner`` is given). ``impact=None`` gives a
    Poisson model. ``num_basis``/``t_max`` only matter for the multigauss
    kernel when ``kernel_params`` is not supplied.
    """
    rng = np.random.default_rng(rng)
    inner = Activation.from_config(inner)
    exo_inner = inner if exo_inner is None else Activation.from_config(exo_inner)
    exo = make_exogenous(exogenous, num_types, g=exo_inner, seq_feature_dim=seq_feature_dim,
                         num_seqs=num_seqs, event_features=event_features, embed_dim=embed_dim,
                         hidden=hidden, rng=rng)
    imp = bank = None
    if impact is not None:
        bank = build_kernel(kernel, kernel_params, num_basis=num_basis, t_max=t_max, trainable=kernel_trainable)
        imp = make_impact(impact, num_types, bank.num_basis, g=inner, event_features=event_features,
                          embed_dim=embed_dim, latent_dim=latent_dim, rng=rng)
    return HawkesModel(num_types, exo, imp, bank, outer=Activation.from_config(outer),
                       memory_size=memory_size, quad_nodes=quad_nodes)


def model_from_config(cfg: dict, event_features=None) -> HawkesModel:
    """Rebuild a model skeleton from :meth:`HawkesModel.config` (parameters still need loading)."""
    C = cfg["num_types"]
    exo_cfg = dict(cfg["exogenous"])
    ekind = exo_cfg.pop("kind")
    g = Activation.from_config(exo_cfg.pop("g"))
    ef = exo_cfg.pop("event_feature_dim", None)
    exo_ef = None if ef is None else np.zeros((ef, C))
    exo = make_exogenous(ekind, C, g=g, event_features=exo_ef, rng=0, **exo_cfg)
    imp = bank = None
    if cfg.get("impact") is not None:
        kcfg = cfg["kernel"]
        kind = kcfg["kind"]
        M = kcfg["num_basis"]
        cls = KERNELS[kind]
        placeholder = {"centers": np.arange(M, dtype=float), "widths": np.ones(M)} if kind == "multigauss" \
            else {k: np.full(M, v) for k, v in DEFAULT_KERNEL_PARAMS[kind].items()}
        if kind == "powerlaw":
            placeholder["omega"] = np.full(M, 2.0)
        bank = cls(trainable=kcfg.get("trainable", []), **placeholder)
        icfg = dict(cfg["impact"])
        ikind = icfg.pop("kind")
        ig = Activation.from_config(icfg.pop("g"))
        ief = icfg.pop("event_feature_dim", None)
        imp_ef = None if ief is None else np.zeros((ief, C))
        imp = make_impact(ikind, C, M, g=ig, event_features=imp_ef, rng=0, **icfg)
    return HawkesModel(C, exo, imp, bank, outer=Activation.from_config(cfg["outer"]),
                       memory_size=cfg["memory_size"], quad_nodes=cfg["quad_nodes"])
