import numpy as np
import pytest

from expclr.diffcore import lse_mean
from expclr.geometry import (DistanceMatrix, SimilaritySpec,
                             pairwise_distances, similarity_matrix)
from expclr.losses import (LinearMap, MarginSpec, bin_pseudo_labels,
                           binned_pair_loss, expclr_loss, mse_decode_loss,
                           pair_loss, quad_loss, softmax_weights)


def two_point_distances(d12: float) -> DistanceMatrix:
    # 1-D embeddings realizing an arbitrary raw two-point distance
    return pairwise_distances(np.array([[0.0], [d12]]))


def sim2(s12: float) -> np.ndarray:
    return np.array([[1.0, s12], [s12, 1.0]])


def finite_diff_embedding_grad(loss_of_e, e, eps=1e-6):
    num = np.zeros_like(e)
    for i in range(e.shape[0]):
        for j in range(e.shape[1]):
            up, down = e.copy(), e.copy()
            up[i, j] += eps
            down[i, j] -= eps
            num[i, j] = (loss_of_e(up) - loss_of_e(down)) / (2 * eps)
    return num


def max_rel_err(analytic, numeric):
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float(np.max(np.abs(analytic - numeric) / denom))


class TestPairLoss:
    def test_all_similar_reduces_to_mean_square_distance(self):
        rng = np.random.default_rng(0)
        dm = pairwise_distances(rng.normal(size=(5, 3)))
        sim = np.ones((5, 5))
        out = pair_loss(dm, sim, delta=1.0)
        assert out.value == pytest.approx(np.mean(dm.values**2))
        # and coincides with the quadratic loss there
        assert out.value == pytest.approx(quad_loss(dm, sim, 1.0).value)

    def test_dissimilar_pair_exactly_at_margin(self):
        out = pair_loss(two_point_distances(1.0), sim2(0.0), delta=1.0)
        assert out.value == 0.0

    def test_hand_evaluated_mixed_pair(self):
        # per-pair term 0.5 * 0.09 + max(0, 0.25 - 0.09) = 0.205, twice, / 4
        out = pair_loss(two_point_distances(0.3), sim2(0.5), delta=1.0)
        assert out.value == pytest.approx(0.1025)
        assert out.components[0, 1] == pytest.approx(0.205)


class TestQuadLoss:
    def test_zero_at_exact_margin_profile(self):
        rng = np.random.default_rng(1)
        f = rng.normal(size=(6, 2))
        sim = similarity_matrix(f, SimilaritySpec(kind="linear"))
        delta = 0.7
        # embeddings = delta/maxdist * features realize D = (1-s) * delta
        from scipy.spatial.distance import cdist
        e = f * (delta / cdist(f, f).max())
        out = quad_loss(pairwise_distances(e), sim, delta)
        assert out.value < 1e-28

    def test_hand_evaluated_pair(self):
        out = quad_loss(two_point_distances(1.0), sim2(0.25), delta=1.0)
        assert out.value == pytest.approx(0.03125)

    def test_coincides_with_pair_loss_at_binary_margin_profile(self):
        # with 0/1 similarities and D = (1-s) * delta both losses vanish
        labels = np.array([0, 0, 1, 1])
        sim = (labels[:, None] == labels[None, :]).astype(float)
        delta = 0.8
        e = np.array([[0.0], [0.0], [delta], [delta]])
        dm = pairwise_distances(e)
        assert np.allclose(dm.values, (1 - sim) * delta)
        assert quad_loss(dm, sim, delta).value == pytest.approx(0.0, abs=1e-30)
        assert pair_loss(dm, sim, delta).value == pytest.approx(0.0, abs=1e-30)

    def test_continuous_gradient_across_the_pair_loss_kink(self):
        # per-pair derivative at s=0.5, delta=1: quad is continuous across
        # D=0.5 while the pair loss jumps from -0.5 to +0.5 there
        s, delta, kink, h = 0.5, 1.0, 0.5, 1e-7

        def pair_term(d):
            return s * d**2 + max(0.0, (1 - s) ** 2 * delta**2 - d**2)

        def quad_term(d):
            return ((1 - s) * delta - d) ** 2

        for term, gap_expected in ((quad_term, 0.0), (pair_term, 1.0)):
            left = (term(kink) - term(kink - h)) / h
            right = (term(kink + h) - term(kink)) / h
            assert right - left == pytest.approx(gap_expected, abs=1e-6)


class TestExpclrLoss:
    def test_equal_components_return_the_component(self):
        # all off-diagonal residuals 0.25 -> but diagonal contributes 0, so
        # use a matrix where every pair has the same residual including the
        # diagonal: only possible via all-equal components = 0
        dm = pairwise_distances(np.array([[0.0], [1.0]]))
        sim = sim2(0.0)
        out = expclr_loss(dm, sim, MarginSpec(delta=1.0, tau=0.37))
        assert np.allclose(out.components, 0.0)
        assert out.value == pytest.approx(0.0, abs=1e-12)

    def test_hand_evaluated_log_mean_exp(self):
        # components {0, 0, 0.0625, 0.0625}: s=0.5, delta=1, D=0.75
        out = expclr_loss(two_point_distances(0.75), sim2(0.5), MarginSpec(1.0, 1.0))
        assert np.allclose(np.sort(out.components.ravel()), [0, 0, 0.0625, 0.0625])
        assert out.value == pytest.approx(0.0317382017978302, abs=1e-12)

    def test_small_tau_approaches_max_component(self):
        out = expclr_loss(two_point_distances(0.75), sim2(0.5), MarginSpec(1.0, 1e-3))
        assert abs(out.value - 0.0625) < 1e-3

    def test_sandwiched_between_quad_and_max(self):
        rng = np.random.default_rng(2)
        e = rng.normal(size=(6, 3))
        f = rng.normal(size=(6, 2))
        sim = similarity_matrix(f, SimilaritySpec(kind="quadratic"))
        dm = pairwise_distances(e, normalize=True)
        quad = quad_loss(dm, sim, 1.0)
        for tau in (1e-3, 0.1, 1.0, 10.0, 1e3):
            val = expclr_loss(dm, sim, MarginSpec(1.0, tau)).value
            assert quad.value - 1e-10 <= val <= quad.components.max() + 1e-10

    def test_monotone_limits_on_tau_grids(self):
        rng = np.random.default_rng(3)
        dm = pairwise_distances(rng.normal(size=(5, 3)), normalize=True)
        sim = similarity_matrix(rng.normal(size=(5, 2)), SimilaritySpec(kind="linear"))
        quad = quad_loss(dm, sim, 1.0)
        top = quad.components.max()
        # (a) deviation from the max vanishes monotonically as tau drops
        devs = [abs(expclr_loss(dm, sim, MarginSpec(1.0, t)).value - top)
                for t in (1.0, 0.1, 0.01, 0.001)]
        assert all(b <= a + 1e-12 for a, b in zip(devs, devs[1:]))
        assert devs[-1] < 1e-2
        # (b) deviation from the quadratic loss is O(1/tau)
        prods = [abs(expclr_loss(dm, sim, MarginSpec(1.0, t)).value - quad.value) * t
                 for t in (10.0, 100.0, 1000.0)]
        for p in prods[1:]:
            assert p <= 1.2 * prods[0] + 1e-12


class TestSoftmaxWeights:
    def test_uniform_components(self):
        w = softmax_weights(np.full((3, 3), 2.5), tau=0.7)
        assert np.allclose(w, 1.0 / 9.0)

    def test_dominant_component_takes_all(self):
        c = np.zeros((2, 2))
        c[0, 1] = 20.0  # dominates by 20 * tau at tau = 1
        w = softmax_weights(c, tau=1.0)
        assert w[0, 1] >= 1.0 - 1e-8

    def test_sum_to_one_and_shift_invariance(self):
        rng = np.random.default_rng(4)
        c = rng.normal(size=(4, 4))
        w = softmax_weights(c, tau=0.3)
        assert abs(w.sum() - 1.0) < 1e-12
        assert np.allclose(w, softmax_weights(c + 123.456, tau=0.3))

    def test_weights_are_the_component_gradient_of_the_loss(self):
        # d lse_mean / d L_nm == softmax weight, checked by finite differences
        rng = np.random.default_rng(5)
        c = rng.normal(size=(3, 3))
        tau = 0.6
        w = softmax_weights(c, tau)
        eps = 1e-6
        for n in range(3):
            for m in range(3):
                up, down = c.copy(), c.copy()
                up[n, m] += eps
                down[n, m] -= eps
                numeric = (lse_mean(up, tau) - lse_mean(down, tau)) / (2 * eps)
                assert numeric == pytest.approx(w[n, m], abs=1e-8)


class TestMseDecodeLoss:
    def test_exact_decoding_gives_zero(self):
        rng = np.random.default_rng(6)
        e = rng.normal(size=(5, 3))
        m = LinearMap(weight=rng.normal(size=(2, 3)), bias=rng.normal(size=2))
        out, _ = mse_decode_loss(e, m(e), m)
        assert out.value == pytest.approx(0.0, abs=1e-28)

    def test_scalar_hand_value(self):
        m = LinearMap(weight=np.array([[1.0]]), bias=np.zeros(1))
        out, _ = mse_decode_loss(np.array([[0.0], [1.0]]), np.array([[0.0], [2.0]]), m)
        assert out.value == pytest.approx(0.5)

    def test_rescaling_cancels(self):
        rng = np.random.default_rng(7)
        e = rng.normal(size=(6, 3))
        f = rng.normal(size=(6, 2))
        m = LinearMap(weight=rng.normal(size=(2, 3)), bias=rng.normal(size=2))
        base, _ = mse_decode_loss(e, f, m)
        for c in (0.1, 0.5, 2.0, 10.0):
            scaled, _ = mse_decode_loss(e / c, f, LinearMap(m.weight * c, m.bias))
            assert scaled.value == pytest.approx(base.value, rel=1e-12)

    def test_shape_mismatch_rejected(self):
        m = LinearMap(weight=np.zeros((2, 4)), bias=np.zeros(2))
        with pytest.raises(ValueError):
            mse_decode_loss(np.zeros((3, 3)), np.zeros((3, 2)), m)


class TestBinnedPairLoss:
    def test_degenerate_features_single_bin(self):
        rng = np.random.default_rng(8)
        dm = pairwise_distances(rng.normal(size=(4, 2)))
        f = np.ones((4, 3))
        out = binned_pair_loss(dm, f, bins=3, delta=1.0)
        assert out.value == pytest.approx(np.mean(dm.values**2))

    def test_two_bins_at_margin(self):
        out = binned_pair_loss(two_point_distances(1.0), np.array([[0.0], [10.0]]),
                               bins=2, delta=1.0)
        assert out.value == 0.0

    def test_hand_binning(self):
        labels = bin_pseudo_labels(np.array([[0.0], [1.0], [10.0]]), bins=2)
        assert labels[0] == labels[1]
        assert labels[0] != labels[2]

    def test_bin_count_validated(self):
        with pytest.raises(ValueError):
            bin_pseudo_labels(np.zeros((3, 1)), bins=1)


class TestEmbeddingGradients:
    """Analytic d(loss)/d(embeddings) vs central differences, including the
    chain through the mu-normalized distances."""

    @pytest.mark.parametrize("normalize", [False, True])
    @pytest.mark.parametrize("kind", ["pair", "quad", "expclr", "binned"])
    def test_losses_match_finite_differences(self, kind, normalize):
        rng = np.random.default_rng(hash((kind, normalize)) % 2**32)
        n, e_dim = 5, 3
        e = rng.normal(size=(n, e_dim))
        f = rng.normal(size=(n, 2))
        sim = similarity_matrix(f, SimilaritySpec(kind="quadratic"))
        spec = MarginSpec(delta=0.8, tau=0.5)

        def evaluate(emb):
            dm = pairwise_distances(emb, normalize=normalize)
            if kind == "pair":
                return pair_loss(dm, sim, spec.delta)
            if kind == "quad":
                return quad_loss(dm, sim, spec.delta)
            if kind == "expclr":
                return expclr_loss(dm, sim, spec)
            return binned_pair_loss(dm, f, 3, spec.delta)

        analytic = evaluate(e).grad_embeddings
        numeric = finite_diff_embedding_grad(lambda emb: evaluate(emb).value, e)
        assert max_rel_err(analytic, numeric) < 1e-5

    def test_mse_decode_gradients_match(self):
        rng = np.random.default_rng(9)
        e = rng.normal(size=(4, 3))
        f = rng.normal(size=(4, 2))
        m = LinearMap(weight=rng.normal(size=(2, 3)), bias=rng.normal(size=2))
        out, grad_m = mse_decode_loss(e, f, m)
        numeric_e = finite_diff_embedding_grad(
            lambda emb: mse_decode_loss(emb, f, m)[0].value, e)
        assert max_rel_err(out.grad_embeddings, numeric_e) < 1e-6
        numeric_w = finite_diff_embedding_grad(
            lambda w: mse_decode_loss(e, f, LinearMap(w, m.bias))[0].value, m.weight)
        assert max_rel_err(grad_m.weight, numeric_w) < 1e-6

    def test_hand_built_matrix_reports_no_embedding_gradient(self):
        dm = DistanceMatrix.from_values(np.array([[0.0, 1.0], [1.0, 0.0]]))
        out = quad_loss(dm, sim2(0.5), 1.0)
        assert out.grad_embeddings is None
