import math

import numpy as np
import pytest

from lader.losses import LossBatch, combined_loss, inbatch_nll, triplet_loss

LOSSES = {"inbatch": inbatch_nll, "triplet": triplet_loss, "combined": combined_loss}


def random_batch(rng, b=None, dim=None, alpha=5.0, beta=0.9):
    b = b or int(rng.integers(1, 9))
    dim = dim or int(rng.integers(4, 33))
    return LossBatch(q_embs=rng.standard_normal((b, dim)),
                     pos_embs=rng.standard_normal((b, dim)),
                     neg_embs=rng.standard_normal((b, dim)),
                     alpha=alpha, beta=beta)


def finite_diff(loss_fn, batch, step=1e-4):
    """Central finite differences of the loss against every embedding entry."""
    grads = {}
    for name in ("q_embs", "pos_embs", "neg_embs"):
        base = getattr(batch, name)
        grad = np.zeros_like(base)
        for i in range(base.shape[0]):
            for j in range(base.shape[1]):
                for sign in (+1, -1):
                    bumped = base.copy()
                    bumped[i, j] += sign * step
                    kwargs = {"q_embs": batch.q_embs, "pos_embs": batch.pos_embs,
                              "neg_embs": batch.neg_embs,
                              "alpha": batch.alpha, "beta": batch.beta}
                    kwargs[name] = bumped
                    loss, _ = loss_fn(LossBatch(**kwargs))
                    grad[i, j] += sign * loss
        grads[name] = grad / (2 * step)
    return grads


def near_hinge(batch, tol=1e-6):
    dp = np.linalg.norm(batch.q_embs - batch.pos_embs, axis=1)
    dn = np.linalg.norm(batch.q_embs - batch.neg_embs, axis=1)
    return bool((np.abs(dp - dn + batch.alpha) < tol).any())


def max_rel_error(analytic, numeric):
    worst = 0.0
    for name in ("q_embs", "pos_embs", "neg_embs"):
        a, n = analytic[name], numeric[name]
        denom = np.maximum(np.abs(n), 1e-3)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def grads_as_dict(grads):
    return {"q_embs": grads.q, "pos_embs": grads.pos, "neg_embs": grads.neg}


class TestInBatch:
    def test_neg_equals_pos_gives_ln2(self):
        """B=1 with identical pos/neg: two equal candidates, loss = ln 2."""
        v = np.array([[0.3, -0.7, 1.1]])
        batch = LossBatch(q_embs=np.array([[1.0, 0.5, -0.2]]), pos_embs=v, neg_embs=v.copy())
        loss, _ = inbatch_nll(batch)
        assert loss == pytest.approx(math.log(2.0), abs=1e-12)

    def test_uniform_scores_give_ln_2b(self):
        """All inner products equal: softmax is uniform over 2B docs."""
        b, dim = 4, 6
        batch = LossBatch(q_embs=np.zeros((b, dim)),
                          pos_embs=np.ones((b, dim)), neg_embs=np.ones((b, dim)))
        loss, _ = inbatch_nll(batch)
        assert loss == pytest.approx(math.log(2 * b), abs=1e-12)

    def test_non_negative(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            loss, _ = inbatch_nll(random_batch(rng))
            assert loss >= 0.0

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(1)
        batch = random_batch(rng, b=4, dim=8)
        loss, grads = inbatch_nll(batch)
        numeric = finite_diff(inbatch_nll, batch)
        assert max_rel_error(grads_as_dict(grads), numeric) <= 1e-4


class TestTriplet:
    @staticmethod
    def batch_with_distances(dist_pos, dist_neg, alpha=5.0):
        return LossBatch(q_embs=np.array([[0.0, 0.0]]),
                         pos_embs=np.array([[dist_pos, 0.0]]),
                         neg_embs=np.array([[dist_neg, 0.0]]),
                         alpha=alpha)

    def test_equal_distances_give_margin(self):
        v = np.array([[1.0, 2.0]])
        batch = LossBatch(q_embs=np.array([[0.0, 0.0]]), pos_embs=v,
                          neg_embs=v.copy(), alpha=5.0)
        loss, _ = triplet_loss(batch)
        assert loss == pytest.approx(5.0, abs=1e-12)

    def test_inactive_hinge(self):
        loss, grads = triplet_loss(self.batch_with_distances(1.0, 7.0))
        assert loss == 0.0
        assert not grads.q.any()

    def test_active_hinge_hand_value(self):
        loss, _ = triplet_loss(self.batch_with_distances(1.0, 3.0))
        assert loss == pytest.approx(3.0, abs=1e-12)

    def test_non_negative(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            loss, _ = triplet_loss(random_batch(rng))
            assert loss >= 0.0

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(3)
        batch = random_batch(rng, b=4, dim=8)
        assert not near_hinge(batch)
        _, grads = triplet_loss(batch)
        numeric = finite_diff(triplet_loss, batch)
        assert max_rel_error(grads_as_dict(grads), numeric) <= 1e-4


class TestCombined:
    def test_beta_one_is_inbatch(self):
        rng = np.random.default_rng(4)
        batch = random_batch(rng, b=3, dim=6, beta=1.0)
        assert combined_loss(batch)[0] == pytest.approx(inbatch_nll(batch)[0], abs=1e-15)

    def test_beta_zero_is_triplet(self):
        rng = np.random.default_rng(5)
        batch = random_batch(rng, b=3, dim=6, beta=0.0)
        assert combined_loss(batch)[0] == pytest.approx(triplet_loss(batch)[0], abs=1e-15)

    def test_recomposition(self):
        rng = np.random.default_rng(6)
        batch = random_batch(rng, b=5, dim=10, beta=0.9)
        loss, _ = combined_loss(batch)
        expected = 0.9 * inbatch_nll(batch)[0] + 0.1 * triplet_loss(batch)[0]
        assert loss == pytest.approx(expected, abs=1e-12)

    def test_beta_out_of_range(self):
        rng = np.random.default_rng(7)
        with pytest.raises(ValueError):
            combined_loss(random_batch(rng, b=2, dim=4, beta=1.5))


class TestBatchValidation:
    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            LossBatch(q_embs=np.zeros((2, 4)), pos_embs=np.zeros((2, 4)),
                      neg_embs=np.zeros((3, 4)))

    def test_non_finite(self):
        bad = np.zeros((2, 4))
        bad[0, 0] = np.inf
        with pytest.raises(ValueError):
            LossBatch(q_embs=bad, pos_embs=np.zeros((2, 4)), neg_embs=np.zeros((2, 4)))

    def test_empty_batch(self):
        with pytest.raises(ValueError):
            LossBatch(q_embs=np.zeros((0, 4)), pos_embs=np.zeros((0, 4)),
                      neg_embs=np.zeros((0, 4)))


class TestPermutationEquivariance:
    def test_mean_loss_invariant_under_row_permutation(self):
        rng = np.random.default_rng(8)
        batch = random_batch(rng, b=6, dim=8)
        perm = rng.permutation(6)
        permuted = LossBatch(q_embs=batch.q_embs[perm], pos_embs=batch.pos_embs[perm],
                             neg_embs=batch.neg_embs[perm],
                             alpha=batch.alpha, beta=batch.beta)
        for fn in LOSSES.values():
            assert fn(batch)[0] == pytest.approx(fn(permuted)[0], rel=1e-12)

    def test_gradients_permute_with_rows(self):
        rng = np.random.default_rng(9)
        batch = random_batch(rng, b=5, dim=6)
        perm = rng.permutation(5)
        permuted = LossBatch(q_embs=batch.q_embs[perm], pos_embs=batch.pos_embs[perm],
                             neg_embs=batch.neg_embs[perm],
                             alpha=batch.alpha, beta=batch.beta)
        _, g = triplet_loss(batch)
        _, gp = triplet_loss(permuted)
        np.testing.assert_allclose(gp.q, g.q[perm], atol=1e-12)
