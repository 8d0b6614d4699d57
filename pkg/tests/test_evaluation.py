import numpy as np
import pytest

from expclr.evaluation import (LinearProbe, fit_linear_probe, knn_accuracy,
                               probe_accuracy)


class TestFitLinearProbe:
    def test_separable_clusters_reach_perfect_training_accuracy(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(40, 2)) * 0.3 + np.array([3.0, 0.0])
        b = rng.normal(size=(40, 2)) * 0.3 + np.array([-3.0, 0.0])
        e = np.vstack([a, b])
        y = np.array([0] * 40 + [1] * 40)
        probe = fit_linear_probe(e, y, seed=0)
        assert probe_accuracy(probe, e, y) == 1.0

    def test_random_labels_score_at_chance(self):
        # labels independent of the embeddings: held-out accuracy ~ 1/C
        rng = np.random.default_rng(1)
        e = rng.normal(size=(2000, 8))
        y = rng.integers(0, 4, size=2000)
        probe = fit_linear_probe(e[:1000], y[:1000], seed=0)
        acc = probe_accuracy(probe, e[1000:], y[1000:])
        assert abs(acc - 0.25) < 0.05

    def test_duplicate_rows_get_identical_predictions(self):
        rng = np.random.default_rng(2)
        e = rng.normal(size=(10, 3))
        e[5] = e[0]
        y = np.array([0, 1] * 5)
        probe = fit_linear_probe(e, y, seed=3)
        pred = probe.predict(e)
        assert pred[5] == pred[0]

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            fit_linear_probe(np.zeros((5, 2)), np.zeros(5, dtype=int))

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        e = rng.normal(size=(30, 4))
        y = rng.integers(0, 3, size=30)
        p1 = fit_linear_probe(e, y, seed=7)
        p2 = fit_linear_probe(e, y, seed=7)
        assert np.array_equal(p1.weight, p2.weight)
        assert np.array_equal(p1.bias, p2.bias)


class TestProbeAccuracy:
    def test_perfect_probe(self):
        e = np.eye(3)
        probe = LinearProbe(weight=np.eye(3), bias=np.zeros(3))
        assert probe_accuracy(probe, e, [0, 1, 2]) == 1.0

    def test_all_zero_probe_ties_to_class_zero(self):
        probe = LinearProbe(weight=np.zeros((2, 2)), bias=np.zeros(2))
        e = np.random.default_rng(4).normal(size=(10, 2))
        y = np.array([0, 1] * 5)
        assert probe_accuracy(probe, e, y) == 0.5

    def test_hand_built_two_thirds(self):
        probe = LinearProbe(weight=np.array([[1.0, -1.0]]), bias=np.zeros(2))
        # scores: class0 = x, class1 = -x; predicts 0 iff x >= 0
        e = np.array([[1.0], [-1.0], [2.0]])
        y = np.array([0, 1, 1])  # last point misclassified
        assert probe_accuracy(probe, e, y) == pytest.approx(2.0 / 3.0)

    def test_relabeling_invariance(self):
        rng = np.random.default_rng(5)
        e = rng.normal(size=(50, 3))
        y = rng.integers(0, 3, size=50)
        probe = fit_linear_probe(e, y, seed=0)
        acc = probe_accuracy(probe, e, y)
        perm = np.array([2, 0, 1])
        permuted_probe = LinearProbe(weight=probe.weight[:, perm], bias=probe.bias[perm])
        inv = np.argsort(perm)
        assert probe_accuracy(permuted_probe, e, inv[y]) == pytest.approx(acc)


class TestKnnAccuracy:
    def test_exact_match_inherits_label(self):
        e_train = np.array([[0.0, 0.0], [5.0, 5.0]])
        y_train = np.array([0, 1])
        assert knn_accuracy(e_train, y_train, np.array([[5.0, 5.0]]), [1]) == 1.0

    def test_equidistant_tie_goes_to_lower_index(self):
        e_train = np.array([[-1.0], [1.0]])
        y_train = np.array([1, 0])
        # test point 0.0 is equidistant; index 0 wins, label 1
        assert knn_accuracy(e_train, y_train, np.array([[0.0]]), [1]) == 1.0
        assert knn_accuracy(e_train, y_train, np.array([[0.0]]), [0]) == 0.0

    def test_four_point_hand_instance(self):
        e_train = np.array([[0.0], [1.0], [10.0], [11.0]])
        y_train = np.array([0, 0, 1, 1])
        e_test = np.array([[0.2], [9.4], [5.4], [12.0]])
        # nearest train indices by |distance|: 0, 2, 1, 3 -> labels 0, 1, 0, 1
        assert knn_accuracy(e_train, y_train, e_test, [0, 1, 1, 1]) == pytest.approx(0.75)

    def test_rigid_motion_invariance(self):
        rng = np.random.default_rng(6)
        e_train = rng.normal(size=(20, 2))
        e_test = rng.normal(size=(10, 2))
        y_train = rng.integers(0, 2, size=20)
        y_test = rng.integers(0, 2, size=10)
        base = knn_accuracy(e_train, y_train, e_test, y_test)
        theta = 0.83
        rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        shift = np.array([4.2, -1.1])
        moved = knn_accuracy(e_train @ rot.T + shift, y_train,
                             e_test @ rot.T + shift, y_test)
        assert moved == base

    def test_one_hot_embeddings_are_perfect(self):
        y = np.array([0, 1, 2, 1, 0])
        e = np.eye(3)[y]
        assert knn_accuracy(e, y, e, y) == 1.0
        probe = fit_linear_probe(e, y, seed=0)
        assert probe_accuracy(probe, e, y) == 1.0

    def test_majority_vote_with_k3(self):
        e_train = np.array([[0.0], [0.1], [0.2], [5.0]])
        y_train = np.array([0, 1, 1, 0])
        assert knn_accuracy(e_train, y_train, np.array([[0.05]]), [1], k=3) == 1.0

    def test_empty_training_set_rejected(self):
        with pytest.raises(ValueError):
            knn_accuracy(np.zeros((0, 2)), [], np.zeros((1, 2)), [0])

    def test_k_bounds_validated(self):
        with pytest.raises(ValueError):
            knn_accuracy(np.zeros((2, 1)), [0, 1], np.zeros((1, 1)), [0], k=3)
