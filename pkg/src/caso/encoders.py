"""User encoders: modularity propagation, closeness aggregation, collaborative encoding.

Each encoder is a fixed linear map applied to the trainable base embeddings,
so the same functions serve the forward pass and (by symmetry or transposition)
the backward pass.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graph import (
    LinearOperator,
    MembershipNetwork,
    SocialGraph,
    safe_power,
    modularity_operator,
)


class NscMeasure(str, enum.Enum):
    CN = "cn"
    AAI = "aai"
    RAI = "rai"
    SI = "si"
    LHNI = "lhni"

    @classmethod
    def parse(cls, value) -> "NscMeasure":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(
                f"unknown closeness measure {value!r}; expected one of {[m.value for m in cls]}"
            ) from None


def _check_alpha(alpha: float) -> None:
    if alpha < 0:
        raise ValueError(f"alpha must be non-negative, got {alpha}")
    if alpha >= 1.0 / 3.0:
        raise ValueError(f"series divergence risk: alpha={alpha} must be < 1/3")


def smm_encode(M: LinearOperator | None, U0: np.ndarray, alpha: float, T: int) -> np.ndarray:
    """Truncated series ``sum_{t<=T} (alpha/(1-alpha))^t M^t U0``.

    Uses the incremental recurrence so each term costs one operator application.
    ``M=None`` stands for the zero operator (edgeless graph).
    """
    _check_alpha(alpha)
    if T < 0:
        raise ValueError("T must be >= 0")
    U0 = np.asarray(U0, dtype=np.float64)
    G = U0.copy()
    if M is None:
        return G
    coef = alpha / (1.0 - alpha)
    term = U0
    for _ in range(T):
        term = coef * M.apply(term)
        G += term
    return G


def nsc_feature_map(g: SocialGraph, measure: NscMeasure | str) -> LinearOperator:
    """Feature map ``f(A)`` with ``p(u_i, u_j) = f(A)_i . f(A)_j``."""
    measure = NscMeasure.parse(measure)
    A = g.adjacency
    d = g.degree
    if measure is NscMeasure.CN:
        F = A
    elif measure is NscMeasure.AAI:
        # 1/log(1) is infinite and log(0) undefined: such intermediaries are skipped
        logd = np.log(np.where(d > 1, d, 1.0))
        F = A @ sp.diags(safe_power(logd, -0.5))
    elif measure is NscMeasure.RAI:
        F = A @ sp.diags(safe_power(d, -0.5))
    elif measure is NscMeasure.SI:
        F = sp.diags(safe_power(d, -0.5)) @ A
    else:
        F = sp.diags(safe_power(d, -1.0)) @ A
    return LinearOperator(F)


def sca_encode(g: SocialGraph, fa: LinearOperator, U0: np.ndarray) -> np.ndarray:
    """``D^{-1} f(A) f(A)^T U0`` evaluated right to left."""
    W = fa.apply_transpose(U0)
    return safe_power(g.degree, -1.0)[:, None] * fa.apply(W)


def build_yhat(b: MembershipNetwork) -> LinearOperator:
    """Normalized, bias-corrected incidence ``Y/sqrt(delta sigma^T) - sqrt(delta) sqrt(sigma)^T/|Y|``.

    Empty users and empty communities get all-zero rows and columns.
    """
    if b.n_memberships == 0:
        raise ValueError("empty membership network")
    du = safe_power(b.user_degree, -0.5)
    dc = safe_power(b.community_size, -0.5)
    Y_norm = sp.diags(du) @ b.by_user @ sp.diags(dc)
    return LinearOperator(
        Y_norm,
        [(-1.0 / b.n_memberships, np.sqrt(b.user_degree), np.sqrt(b.community_size))],
    )


def uce_encode(yhat: LinearOperator, U0: np.ndarray) -> np.ndarray:
    """``Yhat Yhat^T U0``."""
    return yhat.apply(yhat.apply_transpose(U0))


@dataclass(frozen=True)
class EncoderOperators:
    """Everything the encoders need, built once per training split."""

    smm: LinearOperator | None
    fa: LinearOperator
    inv_degree: np.ndarray
    yhat: LinearOperator
    measure: NscMeasure
    n_users: int
    n_communities: int

    def smm_encode(self, U0, alpha, T):
        return smm_encode(self.smm, U0, alpha, T)

    def sca_encode(self, U0):
        return self.inv_degree[:, None] * self.fa.apply(self.fa.apply_transpose(U0))

    def sca_encode_transpose(self, V):
        return self.fa.apply(self.fa.apply_transpose(self.inv_degree[:, None] * V))

    def uce_encode(self, U0):
        return uce_encode(self.yhat, U0)


def build_operators(
    g: SocialGraph, b_train: MembershipNetwork, measure: NscMeasure | str = NscMeasure.RAI
) -> EncoderOperators:
    if g.n_users != b_train.n_users:
        raise ValueError(f"graph has {g.n_users} users, membership network {b_train.n_users}")
    measure = NscMeasure.parse(measure)
    return EncoderOperators(
        smm=modularity_operator(g) if g.n_edges > 0 else None,
        fa=nsc_feature_map(g, measure),
        inv_degree=safe_power(g.degree, -1.0),
        yhat=build_yhat(b_train),
        measure=measure,
        n_users=g.n_users,
        n_communities=b_train.n_communities,
    )
