from __future__ import annotations

import numpy as np

from .activation import ACTIVATIONS, Activation, IDENTITY
from .components import (
    EXOGENOUS,
    IMPACTS,
    BasicImpact,
    BilinearImpact,
    ConstantExogenous,
    ExogenousModel,
    FactorizedImpact,
    ImpactModel,
    LinearExogenous,
    LinearImpact,
    NaiveExogenous,
    NaiveImpact,
    NeuralExogenous,
    make_exogenous,
    make_impact,
)
from .factory import build_kernel, build_model, model_from_config
from .model import ForwardResult, HawkesModel

__all__ = [
    "ACTIVATIONS", "Activation", "IDENTITY", "EXOGENOUS", "IMPACTS", "BasicImpact", "BilinearImpact",
    "ConstantExogenous", "ExogenousModel", "FactorizedImpact", "ImpactModel", "LinearExogenous",
    "LinearImpact", "NaiveExogenous", "NaiveImpact", "NeuralExogenous", "make_exogenous", "make_impact",
    "ForwardResult", "HawkesModel", "build_kernel", "build_model", "model_from_config", "exo_value", "impact_coeff", "intensity", "expected_counts",
    "model_param_grad", "infectivity_matrix",
]


def _as_batch(sample):
    from ..preprocess import SampleBatch, TrainingSample

    if isinstance(sample, TrainingSample):
        return SampleBatch.from_samples([sample])
    return sample


def exo_value(model: HawkesModel, c: int, seq_feature=None, seq_index: int = -1) -> float:
    """Exogenous term of type ``c`` for one sequence."""
    feats = None if seq_feature is None else np.asarray(seq_feature, dtype=np.float64)[None, :]
    return float(model.exogenous_values(np.array([seq_index]), feats)[0, c])


def impact_coeff(model: HawkesModel, c: int, c_src: int) -> np.ndarray:
    """``alpha_{c c' m}`` for ``m = 1..M``; the padding source ``C`` gives zeros."""
    if model.impact is None:
        return np.zeros(0)
    full, _ = model.alpha_full()
    return full[c, c_src].copy()


def intensity(model: HawkesModel, sample, target=None):
    """Intensity at the sample's target time: one type if ``target`` is given, else all."""
    lam = model.intensity(_as_batch(sample))
    if target is None:
        return lam[0] if lam.shape[0] == 1 else lam
    return float(lam[0, target])


def expected_counts(model: HawkesModel, sample) -> np.ndarray:
    counts = model.expected_counts(_as_batch(sample))
    return counts[0] if counts.shape[0] == 1 else counts


def model_param_grad(model: HawkesModel, batch, d_intensity=None, d_counts=None) -> dict:
    """Backward pass for adjoints on the ``(B, C)`` intensity and expected-count outputs."""
    fw = model.forward(_as_batch(batch))
    return model.backward(fw, d_intensity, d_counts)


def infectivity_matrix(model: HawkesModel) -> np.ndarray:
    return model.infectivity_matrix()
