"""Intra- vs inter-community structure diagnostics (AC, ACN, ACC, modularity).

All sums run over ordered user pairs.  Instead of enumerating pairs, each
numerator is written as a quadratic form in the incidence matrix ``Y`` and the
per-user membership count vector ``delta = Y 1``:

* intra sums ``sum_k y_k^T W y_k``  = ``<Y, W Y>``
* all community pairs ``sum_{k,l} y_k^T W y_l`` = ``delta^T W delta``

with the ``i == j`` diagonal terms removed explicitly.  This is exact and costs
a few sparse products.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .graph import MembershipNetwork, SocialGraph, modularity_operator, standard_modularity_operator


@dataclass(frozen=True)
class StructureReport:
    ac_intra: float
    ac_inter: float
    acn_intra: float
    acn_inter: float
    acc_intra: float
    acc_inter: float
    modularity_std: float
    modularity_norm: float

    def as_dict(self) -> dict:
        return asdict(self)


def _denominators(b: MembershipNetwork) -> tuple[float, float]:
    sigma = b.community_size
    intra = float(np.sum(sigma * (sigma - 1)))
    total = float(np.sum(sigma))
    inter = total * total - float(np.sum(sigma * sigma))
    if intra <= 0:
        raise ValueError("no intra pairs")
    return intra, inter


def _ratio(num: float, den: float) -> float:
    # a single community leaves no inter pairs; report 0 rather than nan
    return num / den if den > 0 else 0.0


def _check(g: SocialGraph, b: MembershipNetwork) -> None:
    if g.n_users != b.n_users:
        raise ValueError(f"graph has {g.n_users} users, membership network {b.n_users}")


def _pair_sums(apply_w, b: MembershipNetwork, diag: np.ndarray) -> tuple[float, float]:
    """Intra and inter ordered-pair sums of a symmetric ``W`` with ``i != j``.

    ``apply_w(V)`` computes ``W @ V``; ``diag`` is the diagonal of ``W``.
    """
    Y = b.by_user
    delta = b.user_degree
    intra_all = float(Y.multiply(apply_w(Y)).sum())
    every = float(delta @ apply_w(delta))
    # i == j terms: one per (i, k) for intra, delta_i (delta_i - 1) per user for inter
    intra = intra_all - float(diag @ delta)
    inter = every - intra_all - float(diag @ (delta * (delta - 1)))
    return intra, inter


def average_connectivity(g: SocialGraph, b: MembershipNetwork) -> tuple[float, float]:
    _check(g, b)
    den_intra, den_inter = _denominators(b)
    intra, inter = _pair_sums(lambda V: g.adjacency @ V, b, np.zeros(g.n_users))
    return intra / den_intra, _ratio(inter, den_inter)


def average_common_neighbors(g: SocialGraph, b: MembershipNetwork) -> tuple[float, float]:
    _check(g, b)
    den_intra, den_inter = _denominators(b)
    A = g.adjacency
    intra, inter = _pair_sums(lambda V: A @ (A @ V), b, g.degree)
    return intra / den_intra, _ratio(inter, den_inter)


def average_common_communities(b: MembershipNetwork) -> tuple[float, float]:
    den_intra, den_inter = _denominators(b)
    Y, YT = b.by_user, b.by_community
    intra, inter = _pair_sums(lambda V: Y @ (YT @ V), b, b.user_degree)
    # intra excludes the community under which the pair is enumerated
    intra -= den_intra
    return intra / den_intra, _ratio(inter, den_inter)


def modularity_score(g: SocialGraph, b: MembershipNetwork, normalized: bool = True) -> float:
    """``trace(Y^T M Y)`` for the (normalized) modularity matrix ``M``."""
    _check(g, b)
    if b.n_memberships == 0 or g.n_edges == 0:
        return 0.0
    op = modularity_operator(g) if normalized else standard_modularity_operator(g)
    Y = b.by_user
    value = float(Y.multiply(op.sparse_part @ Y).sum())
    for c, a, v in op.low_rank_parts:
        value += c * float(np.asarray(Y.T @ a) @ np.asarray(Y.T @ v))
    return value


def structure_report(g: SocialGraph, b: MembershipNetwork) -> StructureReport:
    ac = average_connectivity(g, b)
    acn = average_common_neighbors(g, b)
    acc = average_common_communities(b)
    return StructureReport(
        ac[0], ac[1], acn[0], acn[1], acc[0], acc[1],
        modularity_score(g, b, normalized=False),
        modularity_score(g, b, normalized=True),
    )
