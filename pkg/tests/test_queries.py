import numpy as np
import pytest

from vgaeplus.errors import ValidationError
from vgaeplus.graph import NodeSplit
from vgaeplus.queries import (
    FAMILIES,
    MODES,
    _assemble,
    gen_link_queries,
    gen_neighborhood,
    gen_node_queries,
    gen_single_neighbor,
    generate,
    load_suite,
    save_suite,
)

from conftest import six_node_graph

# Node 4 of the walkthrough (index 3) is the only test node; node 2 (index 1)
# is held in validation so the negative pool is exactly {3, 6} (indices 2, 5).
SIX_NODE_SPLIT = NodeSplit(train=(0, 2, 4, 5), validation=(1,), test=(3,), seed=0)


def _pairs(q):
    return {(q.node_map[u], q.node_map[v]): a for u, v, a in q.target_links}


def _labels(q):
    return {q.node_map[u] for u, _ in q.target_labels}


class TestSixNodeWalkthroughs:
    g = six_node_graph()

    def test_neighborhood(self):
        suite = gen_neighborhood(self.g, SIX_NODE_SPLIT, "semi_inductive", seed=0)
        (q,) = suite.queries
        assert _pairs(q) == {(3, 0): 1, (3, 4): 1, (3, 2): 0, (3, 5): 0}
        assert _labels(q) == {0, 2, 4, 5}

    def test_joint_link(self):
        (q,) = gen_link_queries(self.g, SIX_NODE_SPLIT, "semi_inductive", joint=True, seed=0).queries
        assert _pairs(q) == {(3, 0): 1, (3, 4): 1, (3, 2): 0, (3, 5): 0}
        assert q.target_labels == []

    def test_joint_node(self):
        (q,) = gen_node_queries(self.g, SIX_NODE_SPLIT, "semi_inductive", joint=True, seed=0).queries
        assert q.target_links == []
        assert _labels(q) == {0, 2, 4, 5}

    def test_single_neighbor(self):
        for seed in range(8):
            (q,) = gen_single_neighbor(self.g, SIX_NODE_SPLIT, "semi_inductive", seed).queries
            pairs = _pairs(q)
            (pos,) = [v for (_, v), a in pairs.items() if a == 1]
            (neg,) = [v for (_, v), a in pairs.items() if a == 0]
            assert pos in (0, 4) and neg in (2, 5)
            assert _labels(q) == {3}

    def test_single_neighbor_evidence_over_all_six_nodes(self):
        q = _assemble(self.g, list(range(6)), [(4, 3), (2, 3)], [3])
        values = [a for _, _, a in q.evidence_links]
        assert values.count(1) == 6
        assert {(3, 4), (2, 3)}.isdisjoint({tuple(sorted((u, v))) for u, v, _ in q.evidence_links})

    def test_ground_truth_link_count(self):
        assert self.g.n_links == 7

    def test_single_node_evidence_keeps_all_seven_links(self):
        q = _assemble(self.g, list(range(6)), [], [3])
        positives = {tuple(sorted((u, v))) for u, v, a in q.evidence_links if a == 1}
        assert positives == {(0, 1), (0, 2), (0, 3), (1, 2), (2, 5), (0, 4), (3, 4)}
        assert q.target_links == [] and q.target_labels == [(3, int(self.g.class_index[3]))]


class TestSuiteContracts:
    @pytest.mark.parametrize("family", FAMILIES)
    @pytest.mark.parametrize("mode", MODES)
    def test_generated_queries(self, sbm, family, mode):
        g, split = sbm
        suite = generate(g, split, family, mode, seed=2)
        assert suite.family == family and suite.mode == mode
        assert len(suite) + len(suite.skipped) == min(100, len(split.test))
        pool = set(split.test) if mode == "inductive" else set(split.train) | set(split.test)
        n_pos = n_neg = 0
        for q, u in zip(suite.queries, suite.target_nodes):
            q.validate()
            assert q.node_map[0] == u and u in split.test
            assert set(q.node_map[1:]) <= pool
            assert len(q.evidence_features) == q.n
            for a, b, val in q.target_links:
                assert g.adjacency[q.node_map[a], q.node_map[b]] == val
            for a, b, val in q.evidence_links:
                assert g.adjacency[q.node_map[a], q.node_map[b]] == val
            n_pos += sum(a for _, _, a in q.target_links)
            n_neg += sum(1 - a for _, _, a in q.target_links)
            if family.startswith("single") and family != "single_node":
                assert len(q.target_links) == 2
            if family in ("neighborhood", "joint_link"):
                deg = int(g.adjacency[u, sorted(pool - {u})].sum())
                assert sum(a for _, _, a in q.target_links) == deg
                if u not in suite.short_negatives:
                    assert len(q.target_links) == 2 * deg
            if family in ("single_node", "joint_node"):
                assert q.target_links == []
            if family in ("single_link", "joint_link"):
                assert q.target_labels == []
        if family not in ("single_node", "joint_node") and not suite.short_negatives:
            assert n_pos == n_neg

    def test_seed_determinism(self, sbm):
        g, split = sbm
        a = gen_single_neighbor(g, split, "semi_inductive", 5)
        b = gen_single_neighbor(g, split, "semi_inductive", 5)
        assert [q.to_json() for q in a.queries] == [q.to_json() for q in b.queries]

    def test_isolated_target_is_skipped(self):
        g = six_node_graph()
        split = NodeSplit(train=(0, 1, 2), validation=(), test=(3, 4, 5), seed=0)
        # within test nodes only, node index 5 has no neighbour
        suite = gen_single_neighbor(g, split, "inductive", 0, n_target=3)
        assert (5, "no positive neighbour in pool") in suite.skipped

    def test_unknown_family_and_mode(self, sbm):
        g, split = sbm
        with pytest.raises(ValidationError):
            generate(g, split, "triangles", "inductive", 0)
        with pytest.raises(ValidationError):
            generate(g, split, "neighborhood", "transductive", 0)

    def test_suite_file_round_trip(self, tmp_path, sbm):
        g, split = sbm
        suite = gen_neighborhood(g, split, "inductive", 1)
        save_suite(suite, tmp_path / "s.json")
        back = load_suite(tmp_path / "s.json")
        assert back.family == "neighborhood" and back.mode == "inductive"
        assert [q.to_json() for q in back.queries] == [q.to_json() for q in suite.queries]
        assert back.ground_truth(0) == suite.ground_truth(0)

    def test_short_negative_pool_is_flagged(self):
        # a hub adjacent to everything but one node
        n = 12
        a = np.zeros((n, n))
        a[0, 1:-1] = 1
        from vgaeplus.graph import Graph, preprocess

        g = preprocess(Graph(a, np.zeros((n, 1)), np.eye(n)[:, :2] * 0))
        split = NodeSplit(train=tuple(range(1, n)), validation=(), test=(0,), seed=0)
        suite = gen_neighborhood(g, split, "semi_inductive", 0)
        assert suite.short_negatives == [0]
        assert sum(1 - v for _, _, v in suite.queries[0].target_links) == 1
