"""Prediction scores, BPR and KL community-detection losses with their gradients."""

from __future__ import annotations

import logging

import numpy as np
from scipy.special import expit

from .graph import MembershipNetwork

logger = logging.getLogger(__name__)


def predict_scores(U: np.ndarray, C: np.ndarray, user: int) -> np.ndarray:
    return C @ U[user]


def _triples(triples) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    t = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    return t[:, 0], t[:, 1], t[:, 2]


def bpr_loss(U: np.ndarray, C: np.ndarray, triples, zeta: float) -> float:
    """``-sum ln sigmoid(y_ik - y_ij) + zeta (||U||^2 + ||C||^2)`` (summed, not averaged)."""
    return bpr_loss_and_grad(U, C, triples, zeta)[0]


def bpr_loss_and_grad(U, C, triples, zeta):
    users, pos, neg = _triples(triples)
    Ub = U[users]
    diff = np.einsum("ij,ij->i", Ub, C[pos] - C[neg])
    # -ln sigmoid(x) = log(1 + exp(-x))
    loss = float(np.sum(np.logaddexp(0.0, -diff)))
    loss += zeta * (float(np.sum(U * U)) + float(np.sum(C * C)))
    coef = -expit(-diff)  # d/dx of -ln sigmoid(x)
    gU = 2.0 * zeta * U
    gC = 2.0 * zeta * C
    np.add.at(gU, users, coef[:, None] * (C[pos] - C[neg]))
    np.add.at(gC, pos, coef[:, None] * Ub)
    np.add.at(gC, neg, -coef[:, None] * Ub)
    return loss, gU, gC


def soft_assignments(U: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Student-t kernel assignments ``q_ik`` (rows sum to one)."""
    w = _kernel(U, C)
    return w / w.sum(axis=1, keepdims=True)


def _kernel(U, C):
    sq = (np.einsum("ij,ij->i", U, U)[:, None] + np.einsum("kj,kj->k", C, C)[None, :]
          - 2.0 * (U @ C.T))
    return 1.0 / (1.0 + np.maximum(sq, 0.0))


def _kl_users(b: MembershipNetwork, users) -> np.ndarray:
    users = np.unique(np.asarray(users, dtype=np.int64))
    keep = b.user_degree[users] > 0
    skipped = int(np.count_nonzero(~keep))
    if skipped:
        logger.warning("KL loss skipped %d user(s) without training memberships", skipped)
    return users[keep]


def kl_loss(U: np.ndarray, C: np.ndarray, b: MembershipNetwork, users) -> float:
    """``sum_i sum_k p_ik log(p_ik / q_ik)`` with ``p`` the row-normalized memberships."""
    return kl_loss_and_grad(U, C, b, users)[0]


def kl_loss_and_grad(U, C, b, users):
    users = _kl_users(b, users)
    gU = np.zeros_like(U)
    gC = np.zeros_like(C)
    if len(users) == 0:
        return 0.0, gU, gC
    Uu = U[users]
    w = _kernel(Uu, C)
    q = w / w.sum(axis=1, keepdims=True)
    P = b.by_user[users]
    P = np.asarray(P.multiply(1.0 / b.user_degree[users][:, None]).todense())
    mask = P > 0
    loss = float(np.sum(P[mask] * (np.log(P[mask]) - np.log(q[mask]))))
    # d loss / d ||u_i - c_k||^2 = w_ik (p_ik - q_ik)
    coef = 2.0 * w * (P - q)
    gUu = coef.sum(axis=1)[:, None] * Uu - coef @ C
    gU[users] = gUu
    gC = coef.sum(axis=0)[:, None] * C - coef.T @ Uu
    return loss, gU, gC


def joint_loss(U, C, b, triples, kl_users, zeta: float, theta: float) -> float:
    return joint_loss_and_grad(U, C, b, triples, kl_users, zeta, theta)[0]


def joint_loss_and_grad(U, C, b, triples, kl_users, zeta, theta):
    """BPR plus ``theta`` times KL; returns ``(loss, parts, dL/dU, dL/dC)``."""
    bpr, gU, gC = bpr_loss_and_grad(U, C, triples, zeta)
    kl = 0.0
    if theta != 0.0:
        kl, kU, kC = kl_loss_and_grad(U, C, b, kl_users)
        gU += theta * kU
        gC += theta * kC
    return bpr + theta * kl, {"bpr": bpr, "kl": kl}, gU, gC
