"""Edge-list / membership file I/O and the planted-partition generator."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import MembershipNetwork, SocialGraph, build_membership_network, build_social_graph


def _read_pairs(path, what: str) -> list[tuple[str, str]]:
    path = Path(path)
    pairs = []
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.decode("ascii").rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected two tokens per {what} line, got {len(parts)}")
            pairs.append((parts[0], parts[1]))
    if not pairs:
        raise ValueError(f"{path}: empty {what} file")
    return pairs


def load_edge_list(path) -> list[tuple[str, str]]:
    """Whitespace-separated ``user user`` pairs; ``#`` lines are comments."""
    return _read_pairs(path, "edge")


def load_memberships(path) -> list[tuple[str, str]]:
    """Whitespace-separated ``user community`` pairs; ``#`` lines are comments."""
    return _read_pairs(path, "membership")


def write_pairs(path, pairs, header: str | None = None) -> None:
    with open(path, "w", newline="\n") as fh:
        if header:
            fh.write(f"# {header}\n")
        for a, b in pairs:
            fh.write(f"{a} {b}\n")


@dataclass(frozen=True)
class DatasetBundle:
    graph: SocialGraph
    memberships: MembershipNetwork
    user_tokens: tuple
    community_tokens: tuple
    provenance: dict

    @property
    def content_hash(self) -> str:
        return self.provenance["hash"]

    def stats(self) -> dict:
        return {
            "users": self.graph.n_users,
            "edges": self.graph.n_edges,
            "communities": self.memberships.n_communities,
            "memberships": self.memberships.n_memberships,
        }


def _hash_pairs(edges, memberships) -> str:
    h = hashlib.sha256()
    for tag, pairs in (("E", edges), ("Y", memberships)):
        h.update(tag.encode())
        for a, b in pairs:
            h.update(f"{a}\t{b}\n".encode())
    return h.hexdigest()


def bundle_from_pairs(edges, memberships, users=(), sources=()) -> DatasetBundle:
    """Assemble graph and memberships over one shared user index.

    Users that only appear in ``memberships`` become isolated graph nodes.
    """
    edges = list(edges)
    memberships = list(memberships)
    order = dict.fromkeys(users)
    for u, v in edges:
        order.setdefault(u)
        order.setdefault(v)
    for u, _ in memberships:
        order.setdefault(u)
    graph = build_social_graph(edges, order)
    user_index = dict(graph.index)
    net, comm_index = build_membership_network(memberships, user_index)
    tokens = tuple(sorted(comm_index, key=comm_index.__getitem__))
    provenance = {"sources": [str(s) for s in sources], "hash": _hash_pairs(edges, memberships)}
    return DatasetBundle(graph, net, graph.tokens, tokens, provenance)


def load_bundle(graph_path, memberships_path) -> DatasetBundle:
    return bundle_from_pairs(
        load_edge_list(graph_path), load_memberships(memberships_path),
        sources=(graph_path, memberships_path),
    )


@dataclass(frozen=True)
class SynthSpec:
    n_users: int = 400
    n_blocks: int = 4
    p_in: float = 0.3
    p_out: float = 0.01
    memberships_per_user: int = 1
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p_out < self.p_in <= 1.0:
            raise ValueError("need 0 <= p_out < p_in <= 1")
        if self.n_blocks < 1 or self.n_users < self.n_blocks:
            raise ValueError("need at least one user per block")
        if not 1 <= self.memberships_per_user <= self.n_blocks:
            raise ValueError("memberships_per_user must lie in [1, n_blocks]")


def block_labels(params: SynthSpec) -> np.ndarray:
    # equal blocks; the first n % B blocks take one extra user
    return np.repeat(np.arange(params.n_blocks), [len(b) for b in np.array_split(np.arange(params.n_users), params.n_blocks)])


def generate_planted_partition(params: SynthSpec) -> DatasetBundle:
    """Planted-partition graph whose blocks double as ground-truth communities.

    Each user also joins ``memberships_per_user - 1`` further communities drawn
    uniformly from the blocks other than its own.
    """
    rng = np.random.default_rng(params.seed)
    labels = block_labels(params)
    n = params.n_users
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(labels[iu] == labels[ju], params.p_in, params.p_out)
    keep = rng.random(len(iu)) < prob
    users = [f"u{i}" for i in range(n)]
    edges = [(users[i], users[j]) for i, j in zip(iu[keep], ju[keep])]
    memberships = []
    for i in range(n):
        comms = [labels[i]]
        if params.memberships_per_user > 1:
            others = np.delete(np.arange(params.n_blocks), labels[i])
            comms += list(rng.choice(others, size=params.memberships_per_user - 1, replace=False))
        memberships.extend((users[i], f"c{k}") for k in comms)
    if not edges:
        raise ValueError("generated graph has no edges; raise p_in or n_users")
    return bundle_from_pairs(edges, memberships, users=users, sources=(f"synth:{params}",))
