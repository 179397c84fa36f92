from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

ACTIVATIONS = ("identity", "relu", "softplus")


@dataclass(frozen=True)
class Activation:
    """Pointwise nonlinearity used both inside components and on the full intensity.

    ``softplus`` is ``log(1 + exp(beta x)) / beta``. Setting ``flipped``
    switches to the sign-flipped ``log(1 + exp(-beta x)) / beta``, which is
    decreasing in ``x``; it exists only to audit that variant.
    """

    kind: str = "identity"
    beta: float = 1.0
    flipped: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", self.kind.lower())
        if self.kind not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.kind!r}; choose from {ACTIVATIONS}")
        if not self.beta > 0:
            raise ValueError("softplus beta must be positive")

    @property
    def increasing(self) -> bool:
        return not (self.kind == "softplus" and self.flipped)

    @property
    def nonnegative(self) -> bool:
        return self.kind != "identity"

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "identity":
            return x
        if self.kind == "relu":
            return np.maximum(x, 0.0)
        s = -1.0 if self.flipped else 1.0
        return np.logaddexp(0.0, s * self.beta * x) / self.beta

    def grad(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "identity":
            return np.ones_like(x)
        if self.kind == "relu":
            return (x > 0).astype(np.float64)
        if self.flipped:
            return -expit(-self.beta * x)
        return expit(self.beta * x)

    def config(self) -> dict:
        return {"kind": self.kind, "beta": self.beta, "flipped": self.flipped}

    @classmethod
    def from_config(cls, cfg) -> "Activation":
        if isinstance(cfg, Activation):
            return cfg
        if isinstance(cfg, str):
            return cls(cfg)
        return cls(**cfg)


IDENTITY = Activation("identity")
