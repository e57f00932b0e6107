"""Membership splits, full-candidate ranking and Recall/NDCG@K."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import MembershipNetwork


@dataclass(frozen=True)
class SplitResult:
    train: MembershipNetwork
    validation: MembershipNetwork
    test: MembershipNetwork


@dataclass
class RankingMetrics:
    recall_at: dict = field(default_factory=dict)
    ndcg_at: dict = field(default_factory=dict)
    n_evaluated_users: int = 0

    def items(self) -> list[tuple[str, float]]:
        out = []
        for k in sorted(self.recall_at):
            out.append((f"recall@{k}", self.recall_at[k]))
            out.append((f"ndcg@{k}", self.ndcg_at[k]))
        return out


def _subnetwork(b: MembershipNetwork, pairs: np.ndarray) -> MembershipNetwork:
    return MembershipNetwork.from_pairs(pairs, b.n_users, b.n_communities)


def split_memberships(b: MembershipNetwork, train_frac: float = 0.8, valid_frac: float = 0.125,
                      seed: int = 0) -> SplitResult:
    """Bernoulli split of each membership into train / validation / test.

    A membership lands in train with probability ``train_frac * (1 - valid_frac)``,
    in validation with ``train_frac * valid_frac`` and in test otherwise.
    """
    if not 0.0 < train_frac <= 1.0:
        raise ValueError(f"train_frac must lie in (0, 1], got {train_frac}")
    if not 0.0 <= valid_frac < 1.0:
        raise ValueError(f"valid_frac must lie in [0, 1), got {valid_frac}")
    pairs = b.pairs()
    u = np.random.default_rng(seed).random(len(pairs))
    p_train = train_frac * (1.0 - valid_frac)
    in_train = u < p_train
    in_valid = (u >= p_train) & (u < train_frac)
    in_test = u >= train_frac
    return SplitResult(
        _subnetwork(b, pairs[in_train]),
        _subnetwork(b, pairs[in_valid]),
        _subnetwork(b, pairs[in_test]),
    )


def rank_candidates(scores: np.ndarray, exclude) -> np.ndarray:
    """Community indices outside ``exclude`` by descending score, ties by ascending index."""
    scores = np.asarray(scores, dtype=np.float64)
    mask = np.ones(len(scores), dtype=bool)
    mask[np.fromiter(exclude, dtype=np.int64)] = False
    cand = np.flatnonzero(mask)
    order = np.argsort(-scores[cand], kind="stable")
    return cand[order]


def recall_at_k(ranked, test_set, k: int) -> float:
    test = set(int(t) for t in test_set)
    if not test:
        raise ValueError("empty test set")
    hits = sum(1 for c in list(ranked)[:k] if int(c) in test)
    return hits / len(test)


def ndcg_at_k(ranked, test_set, k: int) -> float:
    test = set(int(t) for t in test_set)
    if not test:
        raise ValueError("empty test set")
    dcg = sum(1.0 / math.log2(r + 2) for r, c in enumerate(list(ranked)[:k]) if int(c) in test)
    idcg = sum(1.0 / math.log2(r + 2) for r in range(min(k, len(test))))
    return dcg / idcg


def _metrics_from_hits(hits: np.ndarray, n_test: np.ndarray, ks) -> RankingMetrics:
    # hits: users x max_k boolean matrix of relevance at each rank
    out = RankingMetrics(n_evaluated_users=int(len(n_test)))
    discounts = 1.0 / np.log2(np.arange(2, hits.shape[1] + 2))
    for k in ks:
        h = hits[:, :k]
        recall = h.sum(axis=1) / n_test
        dcg = (h * discounts[:k]).sum(axis=1)
        ideal = np.cumsum(discounts[:k])[np.minimum(n_test, k) - 1]
        out.recall_at[k] = float(recall.mean())
        out.ndcg_at[k] = float((dcg / ideal).mean())
    return out


def ranking_metrics(U: np.ndarray, C: np.ndarray, target: MembershipNetwork,
                    exclude: MembershipNetwork | list, ks=(3, 5), chunk: int = 4096) -> RankingMetrics:
    """Average Recall/NDCG@K over users with a nonempty ``target`` set.

    ``exclude`` holds the memberships removed from each user's candidate list
    (a network or a list of networks whose memberships are unioned).
    """
    ks = sorted(set(int(k) for k in ks))
    users = np.flatnonzero(target.user_degree > 0)
    if len(users) == 0:
        raise ValueError("no users to evaluate")
    excl = exclude if isinstance(exclude, (list, tuple)) else [exclude]
    max_k = min(max(ks), C.shape[0])
    hits = []
    for start in range(0, len(users), chunk):
        block = users[start:start + chunk]
        scores = U[block] @ C.T
        for net in excl:
            rows = net.by_user[block].tocoo()
            scores[rows.row, rows.col] = -np.inf
        # stable ordering: descending score, ascending index on ties
        order = np.argsort(-scores, axis=1, kind="stable")[:, :max_k]
        top = np.take_along_axis(scores, order, axis=1)
        rel = np.asarray(target.by_user[block].todense()) > 0
        hits.append(np.take_along_axis(rel, order, axis=1) & np.isfinite(top))
    hits = np.concatenate(hits, axis=0)
    if max_k < max(ks):
        hits = np.pad(hits, ((0, 0), (0, max(ks) - max_k)))
    return _metrics_from_hits(hits.astype(np.float64), target.user_degree[users].astype(np.int64), ks)


def evaluate(U: np.ndarray, C: np.ndarray, split: SplitResult, ks=(3, 5)) -> RankingMetrics:
    """Test-set metrics; training and validation memberships are not candidates."""
    return ranking_metrics(U, C, split.test, [split.train, split.validation], ks)


def validation_metrics(U, C, split: SplitResult, ks=(5,)) -> RankingMetrics:
    return ranking_metrics(U, C, split.validation, [split.train], ks)


def fold_splits(b: MembershipNetwork, folds: int, valid_frac: float = 0.125, seed: int = 0):
    """Yield a :class:`SplitResult` per fold; folds partition the memberships."""
    if folds < 2:
        raise ValueError("folds must be >= 2")
    pairs = b.pairs()
    rng = np.random.default_rng(seed)
    assignment = rng.permutation(len(pairs)) % folds
    for f in range(folds):
        rest = pairs[assignment != f]
        in_valid = rng.random(len(rest)) < valid_frac
        yield SplitResult(
            _subnetwork(b, rest[~in_valid]),
            _subnetwork(b, rest[in_valid]),
            _subnetwork(b, pairs[assignment == f]),
        )
