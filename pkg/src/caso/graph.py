"""Social graph, membership network and the sparse-plus-low-rank operator."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)

DENSIFY_LIMIT = 64


def _index_tokens(tokens: Iterable[Hashable], index: dict) -> None:
    for tok in tokens:
        if tok not in index:
            index[tok] = len(index)


def safe_power(x: np.ndarray, p: float) -> np.ndarray:
    # x**p on positive entries, 0 elsewhere
    out = np.zeros(x.shape, dtype=np.float64)
    mask = x > 0
    out[mask] = np.asarray(x[mask], dtype=np.float64) ** p
    return out


class LinearOperator:
    """``sparse_part + sum(c * a b^T)`` applied lazily to dense blocks.

    The low-rank corrections are stored as ``(c, a, b)`` triples with ``a`` of
    length ``rows`` and ``b`` of length ``cols``.  Nothing of size rows x cols
    is ever formed except through :meth:`densify`, which is meant for tests.
    """

    def __init__(self, sparse_part, low_rank_parts=(), shape=None):
        self.sparse_part = sp.csr_matrix(sparse_part, dtype=np.float64)
        self.low_rank_parts = [
            (float(c), np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64))
            for c, a, b in low_rank_parts
        ]
        self.shape = tuple(shape) if shape is not None else self.sparse_part.shape
        if self.sparse_part.shape != self.shape:
            raise ValueError(f"sparse part has shape {self.sparse_part.shape}, expected {self.shape}")
        for _, a, b in self.low_rank_parts:
            if a.shape != (self.shape[0],) or b.shape != (self.shape[1],):
                raise ValueError("low-rank vectors do not match operator shape")

    def apply(self, V: np.ndarray) -> np.ndarray:
        V = np.asarray(V, dtype=np.float64)
        if V.shape[0] != self.shape[1]:
            raise ValueError(f"cannot apply {self.shape} operator to input with {V.shape[0]} rows")
        out = np.asarray(self.sparse_part @ V)
        for c, a, b in self.low_rank_parts:
            out = out + c * np.multiply.outer(a, b @ V)
        return out

    def apply_transpose(self, W: np.ndarray) -> np.ndarray:
        return self.T.apply(W)

    @property
    def T(self) -> "LinearOperator":
        return LinearOperator(
            self.sparse_part.T,
            [(c, b, a) for c, a, b in self.low_rank_parts],
            shape=(self.shape[1], self.shape[0]),
        )

    def densify(self, limit: int = DENSIFY_LIMIT) -> np.ndarray:
        if max(self.shape) > limit:
            raise ValueError(f"refusing to densify a {self.shape} operator (limit {limit})")
        dense = self.sparse_part.toarray()
        for c, a, b in self.low_rank_parts:
            dense += c * np.outer(a, b)
        return dense

    def __repr__(self) -> str:
        return (f"LinearOperator(shape={self.shape}, nnz={self.sparse_part.nnz}, "
                f"rank_corrections={len(self.low_rank_parts)})")


@dataclass(frozen=True)
class SocialGraph:
    """Undirected, unweighted user graph in CSR form.

    ``n_edges`` counts each undirected edge once.
    """

    adjacency: sp.csr_matrix
    degree: np.ndarray
    n_edges: int
    tokens: tuple = ()
    n_self_loops_dropped: int = 0
    index: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def n_users(self) -> int:
        return self.adjacency.shape[0]

    @classmethod
    def from_adjacency(cls, adjacency, tokens: Sequence | None = None) -> "SocialGraph":
        A = sp.csr_matrix(adjacency, dtype=np.float64)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError("adjacency must be square")
        A.setdiag(0)
        A.eliminate_zeros()
        A.data[:] = 1.0
        if (A != A.T).nnz:
            raise ValueError("adjacency must be symmetric")
        A.sort_indices()
        degree = np.diff(A.indptr).astype(np.float64)
        tokens = tuple(range(n)) if tokens is None else tuple(tokens)
        return cls(A, degree, int(A.nnz // 2), tokens, 0, {t: i for i, t in enumerate(tokens)})

    def neighbors(self, i: int) -> np.ndarray:
        return self.adjacency.indices[self.adjacency.indptr[i]:self.adjacency.indptr[i + 1]]


def build_social_graph(edge_pairs: Iterable[tuple], users: Iterable[Hashable] = ()) -> SocialGraph:
    """Build a graph from token pairs.

    Tokens are mapped to indices in order of first appearance, with ``users``
    (if given) registered before any edge endpoint.  Duplicate pairs and both
    orientations collapse to one undirected edge; self-loops are dropped.
    """
    edge_pairs = list(edge_pairs)
    if not edge_pairs:
        raise ValueError("empty graph")
    index: dict = {}
    _index_tokens(users, index)
    rows, cols = [], []
    loops = 0
    for u, v in edge_pairs:
        _index_tokens((u, v), index)
        if u == v:
            loops += 1
            continue
        rows.append(index[u])
        cols.append(index[v])
    if loops:
        logger.warning("dropped %d self-loop pair(s)", loops)
    n = len(index)
    r = np.array(rows + cols, dtype=np.int64)
    c = np.array(cols + rows, dtype=np.int64)
    A = sp.csr_matrix((np.ones(len(r)), (r, c)), shape=(n, n))
    A.sum_duplicates()
    A.data[:] = 1.0
    A.sort_indices()
    degree = np.diff(A.indptr).astype(np.float64)
    tokens = tuple(sorted(index, key=index.__getitem__))
    return SocialGraph(A, degree, int(A.nnz // 2), tokens, loops, index)


@dataclass(frozen=True)
class MembershipNetwork:
    """Bipartite user-community incidence ``Y`` with user- and community-major views."""

    by_user: sp.csr_matrix
    by_community: sp.csr_matrix
    user_degree: np.ndarray
    community_size: np.ndarray

    @property
    def n_users(self) -> int:
        return self.by_user.shape[0]

    @property
    def n_communities(self) -> int:
        return self.by_user.shape[1]

    @property
    def n_memberships(self) -> int:
        return int(self.by_user.nnz)

    @classmethod
    def from_pairs(cls, pairs, n_users: int, n_communities: int) -> "MembershipNetwork":
        pairs = np.asarray(list(pairs), dtype=np.int64).reshape(-1, 2)
        Y = sp.csr_matrix(
            (np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n_users, n_communities)
        )
        Y.sum_duplicates()
        Y.data[:] = 1.0
        Y.sort_indices()
        by_comm = sp.csr_matrix(Y.T)
        by_comm.sort_indices()
        return cls(
            Y,
            by_comm,
            np.diff(Y.indptr).astype(np.float64),
            np.diff(by_comm.indptr).astype(np.float64),
        )

    def communities_of(self, i: int) -> np.ndarray:
        return self.by_user.indices[self.by_user.indptr[i]:self.by_user.indptr[i + 1]]

    def members_of(self, k: int) -> np.ndarray:
        return self.by_community.indices[self.by_community.indptr[k]:self.by_community.indptr[k + 1]]

    def pairs(self) -> np.ndarray:
        coo = self.by_user.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return np.stack([coo.row[order], coo.col[order]], axis=1).astype(np.int64)


def build_membership_network(
    membership_pairs: Iterable[tuple], user_index: dict, community_index: dict | None = None
) -> tuple[MembershipNetwork, dict]:
    """Map token pairs onto ``user_index`` and a community index built by first appearance.

    Unknown users are appended to ``user_index`` in place.  Returns the network
    and the community index.
    """
    community_index = {} if community_index is None else community_index
    idx = []
    for u, c in membership_pairs:
        _index_tokens((u,), user_index)
        _index_tokens((c,), community_index)
        idx.append((user_index[u], community_index[c]))
    return MembershipNetwork.from_pairs(idx, len(user_index), len(community_index)), community_index


def normalized_adjacency(g: SocialGraph) -> LinearOperator:
    """``D^{-1/2} A D^{-1/2}``; rows of isolated users are zero."""
    s = sp.diags(safe_power(g.degree, -0.5))
    return LinearOperator(s @ g.adjacency @ s)


def transition_matrix(g: SocialGraph) -> LinearOperator:
    return LinearOperator(sp.diags(safe_power(g.degree, -1.0)) @ g.adjacency)


def modularity_operator(g: SocialGraph) -> LinearOperator:
    """Normalized modularity matrix ``Ã - sqrt(d) sqrt(d)^T / |E|``."""
    if g.n_edges < 1:
        raise ValueError("modularity operator needs at least one edge")
    sq = np.sqrt(g.degree)
    A_norm = normalized_adjacency(g).sparse_part
    return LinearOperator(A_norm, [(-1.0 / g.n_edges, sq, sq)])


def standard_modularity_operator(g: SocialGraph) -> LinearOperator:
    """Unnormalized ``A - d d^T / |E|``."""
    if g.n_edges < 1:
        raise ValueError("modularity operator needs at least one edge")
    return LinearOperator(g.adjacency, [(-1.0 / g.n_edges, g.degree, g.degree)])
