"""Feature mutual exclusion between social and collaborative embeddings."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class FmeConfig:
    lam: float = 0.01
    iterations: int = 1

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lam}")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")


def row_norms(M: np.ndarray) -> np.ndarray:
    return np.sqrt(np.einsum("ij,ij->i", M, M))


def row_normalize(M: np.ndarray) -> np.ndarray:
    """Scale every nonzero row to unit L2 norm; zero rows stay zero."""
    M = np.asarray(M, dtype=np.float64)
    norms = row_norms(M)
    scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
    return M * scale[:, None]


def hsic_simplified(S: np.ndarray, X: np.ndarray) -> float:
    """Linear-kernel HSIC ``||S^T X||_F^2`` (no centering)."""
    if S.shape[0] != X.shape[0]:
        raise ValueError("S and X must have the same number of rows")
    W = S.T @ X
    return float(np.sum(W * W))


def hsic_centered(S: np.ndarray, X: np.ndarray) -> float:
    """Empirical HSIC ``trace(K_s E K_x E) / (n-1)^2`` with linear kernels.

    Builds the n x n Gram matrices, so keep it for diagnostics and tests.
    """
    n = S.shape[0]
    if n < 2:
        raise ValueError("centered HSIC needs at least two rows")
    if X.shape[0] != n:
        raise ValueError("S and X must have the same number of rows")
    E = np.eye(n) - np.full((n, n), 1.0 / n)
    Ks = S @ S.T
    Kx = X @ X.T
    return float(np.trace(Ks @ E @ Kx @ E)) / (n - 1) ** 2


@dataclass
class FmeTrace:
    """Intermediates kept for the backward pass."""

    s_norms: np.ndarray
    x_norms: np.ndarray
    S_hat: np.ndarray
    X_hat: np.ndarray
    lam: float
    iterates: list = field(default_factory=list)  # (S_i, X_i, W_i = X_i^T S_i)


def fme_forward(S0: np.ndarray, X0: np.ndarray, cfg: FmeConfig) -> tuple[np.ndarray, np.ndarray, FmeTrace]:
    s_norms, x_norms = row_norms(S0), row_norms(X0)
    S_hat, X_hat = row_normalize(S0), row_normalize(X0)
    trace = FmeTrace(s_norms, x_norms, S_hat, X_hat, cfg.lam)
    S, X = S_hat, X_hat
    for _ in range(cfg.iterations):
        W = X.T @ S  # d x d; S^T X is its transpose
        trace.iterates.append((S, X, W))
        S, X = S_hat - cfg.lam * (X @ W), X_hat - cfg.lam * (S @ W.T)
    return S, X, trace


def fme_update(S0: np.ndarray, X0: np.ndarray, cfg: FmeConfig) -> tuple[np.ndarray, np.ndarray]:
    """Simultaneous HSIC-penalized refinement of row-normalized ``S0`` and ``X0``.

    ``S <- S_hat - lam X (X^T S)`` and ``X <- X_hat - lam S (S^T X)``, both
    right-hand sides read from the previous iterate.
    """
    S, X, _ = fme_forward(S0, X0, cfg)
    return S, X


def _normalize_backward(g: np.ndarray, unit: np.ndarray, norms: np.ndarray, stop_norm: bool) -> np.ndarray:
    inv = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
    if stop_norm:
        return g * inv[:, None]
    radial = np.einsum("ij,ij->i", unit, g)
    return (g - unit * radial[:, None]) * inv[:, None]


def fme_backward(
    gS: np.ndarray, gX: np.ndarray, trace: FmeTrace, stop_norm_grad: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """Pull gradients w.r.t. the FME outputs back to ``(S0, X0)``."""
    lam = trace.lam
    gS_hat = np.zeros_like(trace.S_hat)
    gX_hat = np.zeros_like(trace.X_hat)
    for S, X, W in reversed(trace.iterates):
        # S_next = S_hat - lam X W ;  X_next = X_hat - lam S W^T ;  W = X^T S
        gS_hat += gS
        gX_hat += gX
        gA = -lam * gS
        gB = -lam * gX
        gW = X.T @ gA + gB.T @ S
        gS, gX = gB @ W + X @ gW, gA @ W.T + S @ gW.T
    gS_hat += gS
    gX_hat += gX
    return (
        _normalize_backward(gS_hat, trace.S_hat, trace.s_norms, stop_norm_grad),
        _normalize_backward(gX_hat, trace.X_hat, trace.x_norms, stop_norm_grad),
    )
