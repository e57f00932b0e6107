"""Forward map from base embeddings ``U0`` to final user embeddings ``U`` and its adjoint.

Every stage is linear in ``U0`` except the FME row normalization, so the
backward pass is a sequence of transposed operator applications:

* SMM: the truncated series in the symmetric modularity matrix is self-adjoint.
* SCA: ``D^{-1} F F^T`` has adjoint ``F F^T D^{-1}``.
* UCE: ``Yhat Yhat^T`` is self-adjoint.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import TrainingConfig
from .encoders import EncoderOperators
from .fme import FmeConfig, FmeTrace, fme_backward, fme_forward


@dataclass
class ForwardCache:
    U: np.ndarray
    S0: np.ndarray
    X0: np.ndarray
    S: np.ndarray
    X: np.ndarray
    fme: FmeTrace | None


def forward(U0: np.ndarray, ops: EncoderOperators, cfg: TrainingConfig) -> ForwardCache:
    if U0.shape[0] != ops.n_users:
        raise ValueError(f"U0 has {U0.shape[0]} rows, operators expect {ops.n_users}")
    gamma, beta = cfg.gamma_eff, cfg.beta_eff
    S0 = np.zeros_like(U0)
    if not cfg.no_smm:
        S0 += gamma * ops.smm_encode(U0, cfg.alpha, cfg.T)
    if not cfg.no_sca and gamma < 1.0:
        S0 += (1.0 - gamma) * ops.sca_encode(U0)
    X0 = np.zeros_like(U0) if cfg.no_uce else ops.uce_encode(U0)
    if cfg.no_fme:
        S, X, trace = S0, X0, None
    else:
        S, X, trace = fme_forward(S0, X0, FmeConfig(cfg.lam, cfg.fme_iterations))
    U = beta * S + (1.0 - beta) * X
    return ForwardCache(U, S0, X0, S, X, trace)


def backward(gU: np.ndarray, cache: ForwardCache, ops: EncoderOperators, cfg: TrainingConfig) -> np.ndarray:
    """Gradient w.r.t. ``U0`` given the gradient w.r.t. ``U``."""
    gamma, beta = cfg.gamma_eff, cfg.beta_eff
    gS = beta * gU
    gX = (1.0 - beta) * gU
    if cache.fme is not None:
        gS, gX = fme_backward(gS, gX, cache.fme, cfg.stop_norm_grad)
    gU0 = np.zeros_like(gU)
    if not cfg.no_smm:
        gU0 += gamma * ops.smm_encode(gS, cfg.alpha, cfg.T)
    if not cfg.no_sca and gamma < 1.0:
        gU0 += (1.0 - gamma) * ops.sca_encode_transpose(gS)
    if not cfg.no_uce:
        gU0 += ops.uce_encode(gX)
    return gU0
