"""Named model recipes and the model builder used by the command line."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ..data import Database
from ..intensity import build_model


@dataclass(frozen=True)
class Recipe:
    exogenous: str
    impact: Optional[str]
    kernel: str
    outer: str
    loss: str
    inner: str = "identity"  # activation inside the impact model
    exo_inner: str = "identity"
    nonnegative: tuple = ()
    kernel_params: dict = field(default_factory=dict)


PRESETS = {
    "linear-hawkes-exp": Recipe("naive", "naive", "exponential", "identity", "mle",
                                nonnegative=("exo", "impact")),
    "linear-hawkes-multigauss-mle": Recipe("naive", "naive", "multigauss", "identity", "mle",
                                           nonnegative=("exo", "impact")),
    "linear-hawkes-multigauss-lse": Recipe("naive", "naive", "multigauss", "identity", "lse",
                                           nonnegative=("exo", "impact")),
    # softplus inside the components keeps the identity-output intensity positive
    "factorized-pp": Recipe("linear", "factorized", "exponential", "identity", "lse",
                            inner="softplus", exo_inner="softplus"),
    "semi-parametric-hawkes": Recipe("linear", "naive", "multigauss", "identity", "mle",
                                     exo_inner="softplus", nonnegative=("impact",)),
    "self-correcting": Recipe("linear", "linear", "gate", "softplus", "mle"),
    "mutually-correcting": Recipe("linear", "linear", "gaussian", "softplus", "ce"),
}

PRESET_NAMES = tuple(PRESETS)


def get_recipe(preset: Optional[str] = None, **overrides) -> Recipe:
    """Recipe of ``preset`` (or a blank linear Hawkes recipe) with non-None overrides applied."""
    if preset is None:
        base = PRESETS["linear-hawkes-exp"]
    elif preset in PRESETS:
        base = PRESETS[preset]
    else:
        raise ValueError(f"unknown preset {preset!r}; valid presets: {', '.join(PRESET_NAMES)}")
    changes = {k: v for k, v in overrides.items() if v is not None}
    if changes.get("impact") == "none":
        changes["impact"] = None
    return replace(base, **changes)


def gap_quantile(db: Database, q: float = 0.95) -> float:
    """Quantile of within-sequence inter-event gaps (1.0 when there are none)."""
    gaps = np.concatenate([np.diff(s.times) for s in db.sequences] + [np.zeros(0)])
    gaps = gaps[gaps > 0]
    return float(np.quantile(gaps, q)) if len(gaps) else 1.0


def build_from_recipe(recipe: Recipe, db: Database, *, num_basis: int = 4, memory_size: int = 10,
                      embed_dim: int = 4, hidden: int = 8, latent_dim: int = 2, rng=0):
    """Instantiate a model for ``db``.

    Sequence features, when the database has them, feed the linear/neural
    exogenous models; otherwise a per-sequence embedding is learned. The
    same holds for event features and the feature-based impact models. The
    multi-Gaussian grid spans the 95th percentile of inter-event gaps.
    """
    return build_model(
        db.num_types,
        recipe.exogenous,
        recipe.impact,
        recipe.kernel,
        recipe.outer,
        inner=recipe.inner,
        exo_inner=recipe.exo_inner,
        kernel_params=recipe.kernel_params or None,
        num_basis=num_basis,
        t_max=gap_quantile(db),
        memory_size=memory_size,
        seq_feature_dim=db.seq_feature_dim or None,
        num_seqs=len(db),
        event_features=db.event_features,
        embed_dim=embed_dim,
        hidden=hidden,
        latent_dim=latent_dim,
        rng=rng,
    )
