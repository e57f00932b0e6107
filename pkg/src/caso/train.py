"""Joint BPR + KL training of the base user embeddings and community embeddings."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .config import TrainingConfig
from .encoders import EncoderOperators, build_operators
from .evaluation import SplitResult, validation_metrics
from .graph import MembershipNetwork, SocialGraph
from .losses import bpr_loss_and_grad, joint_loss_and_grad, kl_loss_and_grad
from .pipeline import backward, forward

logger = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


class Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for k, p in params.items():
            g = grads[k]
            if k not in self.m:
                self.m[k] = np.zeros_like(p)
                self.v[k] = np.zeros_like(p)
            m, v = self.m[k], self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


@dataclass
class ModelState:
    user_base: np.ndarray
    community_emb: np.ndarray
    optimizer: Adam
    step: int = 0

    def snapshot(self) -> "ModelState":
        opt = Adam(self.optimizer.lr, self.optimizer.beta1, self.optimizer.beta2, self.optimizer.eps)
        opt.m = {k: v.copy() for k, v in self.optimizer.m.items()}
        opt.v = {k: v.copy() for k, v in self.optimizer.v.items()}
        opt.t = self.optimizer.t
        return ModelState(self.user_base.copy(), self.community_emb.copy(), opt, self.step)


def init_state(n_users: int, n_communities: int, cfg: TrainingConfig, rng: np.random.Generator) -> ModelState:
    scale = 1.0 / np.sqrt(cfg.dim)
    U0 = rng.normal(0.0, scale, size=(n_users, cfg.dim))
    C = rng.normal(0.0, scale, size=(n_communities, cfg.dim))
    return ModelState(U0, C, Adam(cfg.learning_rate))


def sample_negatives(b_train: MembershipNetwork, user: int, rng: np.random.Generator) -> int:
    """One community drawn uniformly from those ``user`` has not joined."""
    return int(sample_negatives_batch(b_train, np.array([user]), rng)[0])


def sample_negatives_batch(b_train: MembershipNetwork, users: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n_c = b_train.n_communities
    if np.any(b_train.user_degree[users] >= n_c):
        raise ValueError("no negatives: a user has joined every community")
    Y = b_train.by_user
    out = rng.integers(0, n_c, size=len(users))
    todo = np.flatnonzero(np.asarray(Y[users, out]).ravel() > 0)
    while len(todo):
        sparse_users = b_train.user_degree[users[todo]] * 2 < n_c
        # dense users: draw straight from their complement
        for j in todo[~sparse_users]:
            allowed = np.setdiff1d(np.arange(n_c), b_train.communities_of(users[j]), assume_unique=True)
            out[j] = allowed[rng.integers(len(allowed))]
        todo = todo[sparse_users]
        if not len(todo):
            break
        out[todo] = rng.integers(0, n_c, size=len(todo))
        todo = todo[np.asarray(Y[users[todo], out[todo]]).ravel() > 0]
    return out


def epoch_triples(b_train: MembershipNetwork, rng: np.random.Generator) -> np.ndarray:
    """One (user, positive, negative) triple per training membership, shuffled."""
    pairs = b_train.pairs()
    pairs = pairs[rng.permutation(len(pairs))]
    neg = sample_negatives_batch(b_train, pairs[:, 0], rng)
    return np.column_stack([pairs, neg])


def loss_and_grads(U0, C, ops: EncoderOperators, cfg: TrainingConfig, b_train, triples, kl_users=None):
    """Joint loss on one batch and its gradients w.r.t. ``U0`` and ``C``.

    ``kl_users`` defaults to the users appearing in ``triples``.
    """
    cache = forward(U0, ops, cfg)
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    if kl_users is None:
        kl_users = triples[:, 0]
    loss, parts, gU, gC = joint_loss_and_grad(
        cache.U, C, b_train, triples, kl_users, cfg.zeta, cfg.theta_eff
    )
    return loss, parts, backward(gU, cache, ops, cfg), gC, cache


@dataclass
class FitResult:
    state: ModelState
    user_emb: np.ndarray
    best_epoch: int
    best_valid_ndcg: float
    log: list = field(default_factory=list)


def _valid_ndcg(U, C, split) -> float:
    if split is None or split.validation.n_memberships == 0:
        return float("nan")
    return validation_metrics(U, C, split, ks=(5,)).ndcg_at[5]


def fit(g: SocialGraph, b_train: MembershipNetwork, b_valid: MembershipNetwork | None,
        cfg: TrainingConfig, ops: EncoderOperators | None = None) -> FitResult:
    """Train with Adam and early stopping on validation NDCG@5.

    Each log entry holds ``epoch, loss, bpr, kl, valid_ndcg5``; epoch 0 is the
    untrained model.
    """
    rng = np.random.default_rng(cfg.seed)
    ops = ops if ops is not None else build_operators(g, b_train, cfg.measure)
    state = init_state(g.n_users, b_train.n_communities, cfg, rng)
    split = None
    if b_valid is not None:
        empty = MembershipNetwork.from_pairs([], b_train.n_users, b_train.n_communities)
        split = SplitResult(b_train, b_valid, empty)
    use_valid = split is not None and b_valid.n_memberships > 0

    U = forward(state.user_base, ops, cfg).U
    best = (_valid_ndcg(U, state.community_emb, split), 0, state.snapshot(), U)
    log = [{"epoch": 0, "loss": float("nan"), "bpr": float("nan"), "kl": float("nan"),
            "valid_ndcg5": best[0]}]
    stale = 0
    for epoch in range(1, cfg.max_epochs + 1):
        triples = epoch_triples(b_train, rng)
        if cfg.recompute == "per-step":
            loss, bpr, kl = _epoch_per_step(state, ops, cfg, b_train, triples)
        else:
            loss, bpr, kl = _epoch_per_epoch(state, ops, cfg, b_train, triples)
        U = forward(state.user_base, ops, cfg).U
        score = _valid_ndcg(U, state.community_emb, split)
        log.append({"epoch": epoch, "loss": loss, "bpr": bpr, "kl": kl, "valid_ndcg5": score})
        if not use_valid:
            best = (score, epoch, state, U)
            continue
        if score > best[0]:
            best = (score, epoch, state.snapshot(), U)
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                logger.info("early stop at epoch %d (best %d)", epoch, best[1])
                break
    score, epoch, best_state, best_U = best
    if not use_valid:
        best_state = best_state.snapshot()
    return FitResult(best_state, best_U, epoch, score, log)


def _check_finite(loss: float, epoch_step: int) -> None:
    if not np.isfinite(loss):
        raise TrainingError(f"non-finite loss {loss} at optimizer step {epoch_step}")


def _epoch_per_step(state, ops, cfg, b_train, triples):
    total = bpr_sum = kl_sum = 0.0
    for start in range(0, len(triples), cfg.batch_size):
        batch = triples[start:start + cfg.batch_size]
        loss, parts, gU0, gC, _ = loss_and_grads(
            state.user_base, state.community_emb, ops, cfg, b_train, batch
        )
        _check_finite(loss, state.step)
        state.optimizer.step({"U0": state.user_base, "C": state.community_emb}, {"U0": gU0, "C": gC})
        state.step += 1
        total += loss
        bpr_sum += parts["bpr"]
        kl_sum += parts["kl"]
    return total, bpr_sum, kl_sum


def epoch_loss_and_grads(U0, C, ops, cfg, b_train, triples):
    """Whole-epoch objective at fixed parameters, accumulated over mini-batches.

    BPR terms are summed over all batches, the L2 penalty counted once and the
    KL term taken over every user with training memberships.
    """
    cache = forward(U0, ops, cfg)
    U = cache.U
    gU = 2.0 * cfg.zeta * U
    gC = 2.0 * cfg.zeta * C
    bpr = cfg.zeta * (float(np.sum(U * U)) + float(np.sum(C * C)))
    for start in range(0, len(triples), cfg.batch_size):
        b_loss, bU, bC = bpr_loss_and_grad(U, C, triples[start:start + cfg.batch_size], 0.0)
        bpr += b_loss
        gU += bU
        gC += bC
    kl = 0.0
    theta = cfg.theta_eff
    if theta:
        kl, kU, kC = kl_loss_and_grad(U, C, b_train, np.flatnonzero(b_train.user_degree > 0))
        gU += theta * kU
        gC += theta * kC
    return bpr + theta * kl, {"bpr": bpr, "kl": kl}, backward(gU, cache, ops, cfg), gC


def _epoch_per_epoch(state, ops, cfg, b_train, triples):
    loss, parts, gU0, gC = epoch_loss_and_grads(
        state.user_base, state.community_emb, ops, cfg, b_train, triples
    )
    _check_finite(loss, state.step)
    state.optimizer.step({"U0": state.user_base, "C": state.community_emb}, {"U0": gU0, "C": gC})
    state.step += 1
    return loss, parts["bpr"], parts["kl"]
