import numpy as np
import pytest
import scipy.sparse as sp

from caso.graph import MembershipNetwork, SocialGraph, modularity_operator, standard_modularity_operator
from caso.structure import (
    average_common_communities,
    average_common_neighbors,
    average_connectivity,
    modularity_score,
    structure_report,
)

from conftest import random_graph, random_memberships


def enumerate_pairs(g, b):
    """Exhaustive ordered-pair oracle for AC, ACN and ACC.

    Summands skip ``i == j``; denominators are the ordered-pair counts
    ``sigma_k (sigma_k - 1)`` and ``sigma_k sigma_l``, so a user shared by two
    communities still counts once in the inter denominator.
    """
    A = g.adjacency.toarray().astype(bool)
    Y = b.by_user.toarray().astype(bool)
    nb = [set(np.flatnonzero(A[i])) for i in range(g.n_users)]
    cm = [set(np.flatnonzero(Y[i])) for i in range(g.n_users)]
    members = [np.flatnonzero(Y[:, k]) for k in range(Y.shape[1])]
    sums = {"intra": np.zeros(3), "inter": np.zeros(3)}
    counts = {"intra": 0, "inter": 0}
    for k, mk in enumerate(members):
        for l, ml in enumerate(members):
            kind = "intra" if k == l else "inter"
            for i in mk:
                for j in ml:
                    if kind == "inter":
                        counts[kind] += 1
                    if i == j:
                        continue
                    if kind == "intra":
                        counts[kind] += 1
                    shared = len(cm[i] & cm[j]) - (1 if kind == "intra" else 0)
                    sums[kind] += [A[i, j], len(nb[i] & nb[j]), shared]
    intra = sums["intra"] / counts["intra"]
    inter = sums["inter"] / counts["inter"] if counts["inter"] else np.zeros(3)
    return intra, inter


def net(pairs, n, c):
    return MembershipNetwork.from_pairs(pairs, n, c)


class TestAgainstEnumeration:
    def test_hand_graph_overlapping(self):
        edges = [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (3, 5)]
        A = np.zeros((6, 6))
        for i, j in edges:
            A[i, j] = A[j, i] = 1
        g = SocialGraph.from_adjacency(A)
        b = net([(0, 0), (1, 0), (2, 0), (3, 0), (2, 1), (3, 1), (4, 1), (5, 1)], 6, 2)
        intra, inter = enumerate_pairs(g, b)
        np.testing.assert_allclose(average_connectivity(g, b), [intra[0], inter[0]], atol=1e-14)
        np.testing.assert_allclose(average_common_neighbors(g, b), [intra[1], inter[1]], atol=1e-14)
        np.testing.assert_allclose(average_common_communities(b), [intra[2], inter[2]], atol=1e-14)

    @pytest.mark.parametrize("seed", range(8))
    def test_random(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(5, 14))
        g = random_graph(rng, n, rng.uniform(0.2, 0.6))
        b = random_memberships(rng, n, int(rng.integers(2, 5)), p=0.45)
        if np.all(b.community_size < 2):
            pytest.skip("no intra pairs drawn")
        intra, inter = enumerate_pairs(g, b)
        rep = structure_report(g, b)
        np.testing.assert_allclose([rep.ac_intra, rep.acn_intra, rep.acc_intra], intra, atol=1e-12)
        np.testing.assert_allclose([rep.ac_inter, rep.acn_inter, rep.acc_inter], inter, atol=1e-12)


class TestKnownValues:
    def test_two_cliques(self):
        A = np.kron(np.eye(2), np.ones((4, 4)))
        g = SocialGraph.from_adjacency(A)
        b = net([(i, i // 4) for i in range(8)], 8, 2)
        assert average_connectivity(g, b) == (1.0, 0.0)
        assert average_common_communities(b) == (0.0, 0.0)

    def test_star_leaves(self):
        A = np.zeros((5, 5))
        A[0, 1:] = A[1:, 0] = 1
        g = SocialGraph.from_adjacency(A)
        b = net([(i, 0) for i in range(1, 5)], 5, 1)
        acn_intra, acn_inter = average_common_neighbors(g, b)
        assert acn_intra == 1.0
        assert acn_inter == 0.0  # a single community has no inter pairs

    def test_no_intra_pairs(self):
        g = SocialGraph.from_adjacency(np.ones((3, 3)))
        b = net([(0, 0), (1, 1), (2, 2)], 3, 3)
        for fn in (lambda: average_connectivity(g, b), lambda: average_common_neighbors(g, b),
                   lambda: average_common_communities(b)):
            with pytest.raises(ValueError, match="no intra pairs"):
                fn()

    def test_permutation_invariance(self, rng):
        g = random_graph(rng, 12, 0.35)
        b = random_memberships(rng, 12, 3)
        perm = rng.permutation(12)
        P = sp.csr_matrix((np.ones(12), (np.arange(12), perm)), shape=(12, 12))
        g2 = SocialGraph.from_adjacency(P @ g.adjacency @ P.T)
        b2 = MembershipNetwork.from_pairs(np.argwhere((P @ b.by_user).toarray()), 12, 3)
        r1, r2 = structure_report(g, b).as_dict(), structure_report(g2, b2).as_dict()
        for k in r1:
            assert r1[k] == pytest.approx(r2[k], abs=1e-10)

    def test_report_invariants(self, rng):
        for _ in range(10):
            g = random_graph(rng, 15, 0.3)
            b = random_memberships(rng, 15, 4)
            r = structure_report(g, b)
            vals = [r.ac_intra, r.ac_inter, r.acn_intra, r.acn_inter, r.acc_intra, r.acc_inter]
            assert min(vals) >= 0
            assert r.ac_intra <= 1 and r.ac_inter <= 1


class TestModularityScore:
    def test_empty_memberships(self, rng):
        g = random_graph(rng, 6, 0.5)
        assert modularity_score(g, net([], 6, 2)) == 0.0

    @pytest.mark.parametrize("normalized", [True, False])
    def test_dense_trace_oracle(self, rng, normalized):
        for _ in range(10):
            n = int(rng.integers(4, 30))
            g = random_graph(rng, n, 0.3)
            if g.n_edges == 0:
                continue
            b = random_memberships(rng, n, 4)
            M = (modularity_operator(g) if normalized else standard_modularity_operator(g)).densify()
            Y = b.by_user.toarray()
            assert modularity_score(g, b, normalized) == pytest.approx(np.trace(Y.T @ M @ Y), abs=1e-9)

    def test_single_community_sums_operator(self, rng):
        g = random_graph(rng, 9, 0.4)
        b = net([(i, 0) for i in range(9)], 9, 1)
        M = modularity_operator(g).densify()
        assert modularity_score(g, b) == pytest.approx(M.sum(), abs=1e-10)
        # with |E| counted once: sum(A) - (sum d)^2 / |E| = 2|E| - 4|E|
        assert modularity_score(g, b, normalized=False) == pytest.approx(-2.0 * g.n_edges, abs=1e-9)

    @pytest.mark.parametrize("normalized", [True, False])
    def test_planted_split_beats_scrambled(self, normalized):
        A = np.kron(np.eye(2), np.ones((4, 4)))
        A[3, 4] = A[4, 3] = 1
        g = SocialGraph.from_adjacency(A)
        planted = net([(i, i // 4) for i in range(8)], 8, 2)
        scrambled = net([(i, i % 2) for i in range(8)], 8, 2)
        assert modularity_score(g, planted, normalized) > modularity_score(g, scrambled, normalized)
