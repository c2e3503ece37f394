import numpy as np
import pytest

from spinhtm.backends import IdealBackend
from spinhtm.errors import (EmptyPool, IndexOutOfRange, LengthMismatch,
                            NotOutputNode)
from spinhtm.node import (HtmNode, compose_spatial_input, infer_node,
                          spatial_similarity)


def make_node(dim=4, thr=0.7, mgs=10, output=False, classes=0):
    return HtmNode(input_dim=dim, matching_threshold=thr, max_group_size=mgs,
                   is_output=output, n_classes=classes)


class TestSimilarity:
    def test_self_similarity_is_one(self):
        v = np.array([1, 0, 1, 0], dtype=float)
        assert spatial_similarity(v, v) == pytest.approx(1.0)

    def test_orthogonal_is_zero(self):
        assert spatial_similarity(np.array([1., 0, 0, 0]),
                                  np.array([0., 1, 0, 0])) == 0.0

    def test_hand_computed_cosine(self):
        s = spatial_similarity(np.array([1., 1, 0, 0]),
                               np.array([1., 0, 0, 0]))
        assert s == pytest.approx(1 / np.sqrt(2), abs=1e-12)

    def test_zero_vector_rule(self):
        z = np.zeros(4)
        assert spatial_similarity(z, np.ones(4)) == 0.0
        assert spatial_similarity(z, z) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            spatial_similarity(np.ones(3), np.ones(4))


class TestSpatialPool:
    def test_first_pattern_always_added(self):
        node = make_node()
        idx = node.spatial_pool_update(np.array([0., 1, 0, 1]))
        assert idx == 0
        assert node.n_coincidences == 1
        assert node.counts[0] == 1

    def test_exact_repeat_matches(self):
        node = make_node(thr=0.99)
        p = np.array([1., 0, 1, 0])
        assert node.spatial_pool_update(p) == 0
        assert node.spatial_pool_update(p.copy()) == 0
        assert node.n_coincidences == 1
        assert node.counts[0] == 2

    def test_match_at_threshold_boundary(self):
        # cosine((1,1,0,0), (1,0,0,0)) = 0.7071 >= 0.7 -> matched
        node = make_node(thr=0.7)
        node.spatial_pool_update(np.array([1., 0, 0, 0]))
        idx = node.spatial_pool_update(np.array([1., 1, 0, 0]))
        assert idx == 0
        assert node.n_coincidences == 1
        assert node.counts[0] == 2

    def test_distinct_pattern_appended(self):
        node = make_node(thr=0.8)
        node.spatial_pool_update(np.array([1., 0, 0, 0]))
        idx = node.spatial_pool_update(np.array([1., 1, 0, 0]))  # 0.707 < 0.8
        assert idx == 1
        assert node.n_coincidences == 2

    def test_tie_goes_to_lowest_index(self):
        node = make_node(thr=0.5)
        node._append(np.array([1., 0, 0, 0]), 1.0)
        node._append(np.array([0., 1, 0, 0]), 1.0)
        # equidistant from both stored patterns
        idx = node.spatial_pool_update(np.array([1., 1, 0, 0]))
        assert idx == 0

    def test_zero_pattern_matches_stored_zero(self):
        node = make_node(thr=0.7)
        assert node.spatial_pool_update(np.zeros(4)) == 0
        assert node.spatial_pool_update(np.zeros(4)) == 0
        assert node.n_coincidences == 1
        assert node.counts[0] == 2

    def test_growth_beyond_initial_capacity(self):
        node = HtmNode(input_dim=80, matching_threshold=1.0)
        rng = np.random.default_rng(0)
        for i in range(70):
            v = np.zeros(80)
            v[i] = 1.0
            node.spatial_pool_update(v)
        assert node.n_coincidences == 70


class TestTransitions:
    def test_direct_counts(self):
        node = make_node(thr=1.0)
        node._append(np.array([1., 0, 0, 0]), 1.0)
        node._append(np.array([0., 1, 0, 0]), 1.0)
        node.tac_update(0, 1)
        node.tac_update(1, 0)
        assert node.transitions.tolist() == [[0, 1], [1, 0]]

    def test_self_transition(self):
        node = make_node(thr=1.0)
        node._append(np.ones(4), 2.0)
        node.tac_update(0, 0)
        assert node.transitions[0, 0] == 1

    def test_sequence_boundary_not_counted(self):
        node = make_node(thr=0.99)
        a = np.array([1., 0, 0, 0])
        b = np.array([0., 1, 0, 0])
        node.begin_sequence()
        node.observe(a)
        node.observe(b)
        node.begin_sequence()
        node.observe(a)
        assert node.transitions[0, 1] == 1
        assert node.transitions[1, 0] == 0  # boundary crossing uncounted

    def test_index_validation(self):
        node = make_node()
        node._append(np.ones(4), 2.0)
        with pytest.raises(IndexOutOfRange):
            node.tac_update(0, 3)


class TestTemporalPool:
    def test_singleton_pool(self):
        node = make_node(thr=1.0)
        node._append(np.ones(4), 2.0)
        assert node.temporal_pool() == [[0]]

    def test_worked_greedy_example(self):
        # counts (5,3,2), transitions [[0,4,1],[2,0,3],[1,1,0]], size cap 2:
        # seed c0 (0.5*4 max), extend with c1, close; c2 left alone
        node = make_node(thr=1.0, mgs=2)
        for i in range(3):
            v = np.zeros(4)
            v[i] = 1.0
            node._append(v, 1.0)
        node._counts[:3] = [5, 3, 2]
        node._transitions[:3, :3] = [[0, 4, 1], [2, 0, 3], [1, 1, 0]]
        assert node.temporal_pool() == [[0, 1], [2]]

    def test_all_zero_transitions_all_singletons(self):
        node = make_node(thr=1.0)
        for i in range(3):
            v = np.zeros(4)
            v[i] = 1.0
            node._append(v, 1.0)
        assert node.temporal_pool() == [[0], [1], [2]]

    def test_partition_property(self):
        rng = np.random.default_rng(1)
        node = HtmNode(input_dim=6, matching_threshold=1.0, max_group_size=4)
        for i in range(24):
            v = rng.integers(0, 2, size=6).astype(float)
            v[i % 6] = 1.0
            node._append(v, float(np.linalg.norm(v)))
        node._counts[:24] = rng.integers(1, 9, size=24)
        node._transitions[:24, :24] = rng.integers(0, 4, size=(24, 24))
        groups = node.temporal_pool()
        flat = sorted(i for g in groups for i in g)
        assert flat == list(range(24))
        assert all(len(g) <= 4 for g in groups)

    def test_empty_pool_raises(self):
        with pytest.raises(EmptyPool):
            make_node().temporal_pool()


class TestInferenceMatrix:
    def test_single_group_degenerate(self):
        node = make_node(thr=1.0)
        node._append(np.ones(4), 2.0)
        node.finalize()
        assert node.inference_matrix.tolist() == [[1.0]]

    def test_hand_built_pcg(self):
        # counts (6,2,2), groups {0,1},{2}: column 0 -> (0.75, 0.25, 0),
        # column 1 -> (0, 0, 1)
        node = make_node(thr=1.0, mgs=2)
        for i in range(3):
            v = np.zeros(4)
            v[i] = 1.0
            node._append(v, 1.0)
        node._counts[:3] = [6, 2, 2]
        node.groups = [[0, 1], [2]]
        matrix = node.build_pcg()
        expected = np.array([[0.75, 0.0], [0.25, 0.0], [0.0, 1.0]])
        assert np.allclose(matrix, expected, atol=1 / 62)

    def test_entry_zero_outside_group(self):
        node = make_node(thr=1.0, mgs=1)
        for i in range(2):
            v = np.zeros(4)
            v[i] = 1.0
            node._append(v, 1.0)
        node.groups = [[0], [1]]
        matrix = node.build_pcg()
        assert matrix[1, 0] == 0.0
        assert matrix[0, 1] == 0.0

    def test_columns_sum_to_one_within_quantization(self):
        rng = np.random.default_rng(2)
        node = HtmNode(input_dim=8, matching_threshold=1.0, max_group_size=5)
        for i in range(40):
            v = rng.integers(0, 2, size=8).astype(float)
            v[i % 8] = 1.0
            node._append(v, float(np.linalg.norm(v)))
        node._counts[:40] = rng.integers(1, 20, size=40)
        node._transitions[:40, :40] = rng.integers(0, 3, size=(40, 40))
        node.finalize()
        sums = node.inference_matrix.sum(axis=0)
        slack = node.n_coincidences * 2.0 ** -node.weight_bits
        assert ((np.abs(sums - 1.0) <= slack) | (sums == 0.0)).all()


class TestOutputNode:
    def test_update_counts(self):
        node = make_node(output=True, classes=2, thr=1.0)
        node._append(np.array([1., 0, 0, 0]), 1.0)
        node._append(np.array([0., 1, 0, 0]), 1.0)
        node.update_pcw(0, 1)
        assert node.class_counts.tolist() == [[0, 1], [0, 0]]
        node.update_pcw(0, 1)
        assert node.class_counts[0, 1] == 2

    def test_finalize_normalizes_columns(self):
        node = make_node(output=True, classes=2, thr=1.0)
        for i in range(3):
            v = np.zeros(4)
            v[i] = 1.0
            node._append(v, 1.0)
        node._class_counts[:3] = [[2, 0], [0, 0], [1, 1]]
        node.finalize()
        expected = np.array([[2 / 3, 0.0], [0.0, 0.0], [1 / 3, 1.0]])
        assert np.allclose(node.inference_matrix, expected, atol=1 / 31)

    def test_non_output_rejects_pcw(self):
        node = make_node()
        node._append(np.ones(4), 2.0)
        with pytest.raises(NotOutputNode):
            node.update_pcw(0, 0)


class TestCompose:
    def test_one_hot_concatenation(self):
        from spinhtm.node import NodeOutput

        outs = [NodeOutput(y=np.zeros(1), group_density=np.zeros(2), winner=1,
                           dom=1.0, has_evidence=True),
                NodeOutput(y=np.zeros(1), group_density=np.zeros(3), winner=0,
                           dom=1.0, has_evidence=True)]
        x = compose_spatial_input([2, 3], outs)
        assert x.tolist() == [0, 1, 1, 0, 0]

    def test_single_child(self):
        from spinhtm.node import NodeOutput

        out = NodeOutput(y=np.zeros(1), group_density=np.zeros(4), winner=3,
                         dom=1.0, has_evidence=True)
        assert compose_spatial_input([4], [out]).tolist() == [0, 0, 0, 1]

    def test_four_children_same_winner(self):
        from spinhtm.node import NodeOutput

        outs = [NodeOutput(y=np.zeros(1), group_density=np.zeros(3), winner=0,
                           dom=1.0, has_evidence=True) for _ in range(4)]
        assert compose_spatial_input([3] * 4, outs).tolist() == [1, 0, 0] * 4

    def test_silent_child_contributes_zero_block(self):
        from spinhtm.node import NodeOutput

        outs = [NodeOutput(y=np.zeros(1), group_density=np.zeros(2), winner=0,
                           dom=0.0, has_evidence=False),
                NodeOutput(y=np.zeros(1), group_density=np.zeros(2), winner=1,
                           dom=1.0, has_evidence=True)]
        assert compose_spatial_input([2, 2], outs).tolist() == [0, 0, 0, 1]

    def test_arity_checked(self):
        from spinhtm.errors import ArityMismatch

        with pytest.raises(ArityMismatch):
            compose_spatial_input([2, 2], [])


def trained_toy_node():
    """Pool {(1,0,0),(1,1,0)}, singleton groups, known counts."""
    node = HtmNode(input_dim=3, matching_threshold=0.99, max_group_size=1)
    node.begin_sequence()
    node.observe(np.array([1., 0, 0]))
    node.observe(np.array([1., 1, 0]))
    node.finalize()
    return node


class TestDensities:
    def test_hand_dot_products(self):
        node = trained_toy_node()
        y = node.compute_spatial_density(np.array([1., 1, 0]), IdealBackend())
        assert y.tolist() == [1.0, 2.0]

    def test_zero_input_zero_density(self):
        node = trained_toy_node()
        y = node.compute_spatial_density(np.zeros(3), IdealBackend())
        assert not y.any()

    def test_orthonormal_one_hot(self):
        node = HtmNode(input_dim=3, matching_threshold=0.99, max_group_size=1)
        node.begin_sequence()
        for i in range(3):
            v = np.zeros(3)
            v[i] = 1.0
            node.observe(v)
        node.finalize()
        y = node.compute_spatial_density(np.array([0., 1, 0]), IdealBackend())
        assert y.tolist() == [0.0, 1.0, 0.0]

    def test_group_density_selector(self):
        node = trained_toy_node()
        dens = node.compute_group_density(np.array([0.0, 1.0]), IdealBackend())
        # singleton groups: density j = P(c_j in its group) * y_j = y_j
        assert dens.tolist() == [0.0, 1.0]

    def test_group_density_hand_arithmetic(self):
        node = make_node(dim=4, thr=1.0, mgs=2)
        for i in range(3):
            v = np.zeros(4)
            v[i] = 1.0
            node._append(v, 1.0)
        node.groups = [[0, 1], [2]]
        node.inference_matrix = np.array([[0.75, 0.0], [0.25, 0.0], [0.0, 1.0]])
        node.trained = True
        dens = node.compute_group_density(np.array([0.5, 0.5, 0.0]),
                                          IdealBackend())
        assert np.allclose(dens, [0.5, 0.0])

    def test_all_zero_density_all_zero_groups(self):
        node = trained_toy_node()
        dens = node.compute_group_density(np.zeros(2), IdealBackend())
        assert not dens.any()

    def test_length_mismatch(self):
        node = trained_toy_node()
        with pytest.raises(LengthMismatch):
            node.compute_spatial_density(np.ones(5), IdealBackend())
        with pytest.raises(LengthMismatch):
            node.compute_group_density(np.ones(9), IdealBackend())


class TestInferNode:
    def test_end_to_end_composition(self):
        node = trained_toy_node()
        out = infer_node(node, np.array([1., 1, 0]), IdealBackend())
        assert out.y.tolist() == [1.0, 2.0]
        assert out.winner == 1
        assert out.dom == pytest.approx(out.group_density[1])
        assert out.has_evidence

    def test_single_group_node_always_wins_zero(self):
        node = HtmNode(input_dim=3, matching_threshold=0.0, max_group_size=9)
        node.begin_sequence()
        node.observe(np.array([1., 0, 0]))
        node.observe(np.array([1., 1, 0]))
        node.finalize()
        assert node.n_groups == 1
        out = infer_node(node, np.array([0., 1, 1]), IdealBackend())
        assert out.winner == 0

    def test_exact_tie_lowest_group_wins(self):
        node = trained_toy_node()
        node.inference_matrix = np.array([[1.0, 0.0], [0.0, 0.5]])
        # y = (1, 2) -> densities (1, 1): tie, group 0 wins
        out = infer_node(node, np.array([1., 1, 0]), IdealBackend())
        assert out.group_density.tolist() == [1.0, 1.0]
        assert out.winner == 0

    def test_replay_training_frame_lands_in_its_group(self):
        node = HtmNode(input_dim=4, matching_threshold=0.95, max_group_size=2)
        frames = [np.array([1., 1, 0, 0]), np.array([0., 0, 1, 1]),
                  np.array([1., 0, 1, 0])]
        node.begin_sequence()
        observed = [node.observe(f) for f in frames]
        node.finalize()
        for frame, idx in zip(frames, observed):
            out = infer_node(node, frame, IdealBackend())
            containing = next(g for g, members in enumerate(node.groups)
                              if idx in members)
            assert out.winner == containing
