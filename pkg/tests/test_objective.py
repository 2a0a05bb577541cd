import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from monotraj import net, objective
from monotraj.errors import ContractError
from monotraj.objective import SubjectBatch

from conftest import central_difference, max_rel_error

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def _random_batch(rng, d, visit_counts):
    n = int(sum(visit_counts))
    ages = np.concatenate([60.0 + np.cumsum(rng.uniform(0.5, 2.0, size=k)) for k in visit_counts])
    labels = np.concatenate([np.sort(rng.integers(0, 2, size=k)) for k in visit_counts]).astype(float)
    offsets = np.concatenate([[0], np.cumsum(visit_counts)]).astype(np.intp)
    return SubjectBatch(rng.normal(size=(n, d)), labels, ages, offsets)


class TestBce:
    def test_zero_logit(self):
        loss, grad = objective.bce_loss([0.0], [1])
        assert loss == pytest.approx(np.log(2.0), abs=1e-15)
        assert grad.tolist() == [-0.5]

    def test_large_logit_is_stable(self):
        with np.errstate(over="raise", invalid="raise"):
            loss, grad = objective.bce_loss([40.0], [1])
            big, _ = objective.bce_loss([-800.0], [1])
        assert 0.0 <= loss < 1e-17
        assert big == pytest.approx(800.0)

    def test_two_visits(self):
        loss, grad = objective.bce_loss([0.0, 0.0], [0, 1])
        assert loss == pytest.approx(np.log(2.0))
        np.testing.assert_allclose(grad, [0.25, -0.25])

    def test_gradient_matches_fd(self):
        rng = np.random.default_rng(0)
        z, y = rng.normal(size=7) * 3, rng.integers(0, 2, size=7)
        _, grad = objective.bce_loss(z, y)
        numeric = central_difference(lambda v: objective.bce_loss(v, y)[0], z)
        assert max_rel_error(grad, numeric) < 1e-8

    def test_empty(self):
        with pytest.raises(ContractError):
            objective.bce_loss([], [])


class TestCosineTerm:
    def test_parallel(self):
        w = np.array([1.0, 2.0, -1.0])
        t = objective.cosine_term(w, np.zeros(3), 0.5 * w)
        assert t.value == pytest.approx(1.0, abs=1e-15)
        assert abs(t.grad_w @ w) < 1e-12

    def test_antiparallel(self):
        w = np.array([0.3, -0.4])
        assert objective.cosine_term(w, w, -w).value == pytest.approx(-1.0, abs=1e-15)

    def test_orthogonal_fd(self):
        w, g1, g2 = np.array([1.0, 0.0]), np.zeros(2), np.array([0.0, 1.0])
        t = objective.cosine_term(w, g1, g2)
        assert t.value == 0.0
        packed = np.concatenate([w, g1, g2])

        def f(v):
            return objective.cosine_term(v[:2], v[2:4], v[4:]).value

        numeric = central_difference(f, packed)
        analytic = np.concatenate([t.grad_w, t.grad_g1, t.grad_g2])
        assert max_rel_error(analytic, numeric) < 1e-6

    def test_degenerate_pair(self):
        g = np.array([1.0, 2.0])
        t = objective.cosine_term(np.ones(2), g, g.copy())
        assert t.degenerate and t.value == 0.0
        assert not np.any(t.grad_w) and not np.any(t.grad_g1)

    def test_zero_w_rejected(self):
        with pytest.raises(ContractError):
            objective.cosine_term(np.zeros(2), np.zeros(2), np.ones(2))

    @settings(max_examples=200, deadline=None)
    @given(arrays(np.float64, 4, elements=finite), arrays(np.float64, 4, elements=finite),
           arrays(np.float64, 4, elements=finite), st.floats(1e-3, 1e3))
    def test_antisymmetry_and_scale(self, w, g1, g2, c):
        if np.linalg.norm(w) < 1e-3 or np.linalg.norm(g2 - g1) < 1e-6:
            return
        t = objective.cosine_term(w, g1, g2).value
        assert -1.0 - 1e-12 <= t <= 1.0 + 1e-12
        assert objective.cosine_term(w, g2, g1).value == pytest.approx(-t, abs=1e-12)
        assert objective.cosine_term(c * w, g1, g2).value == pytest.approx(t, abs=1e-12)

    def test_random_gradients_match_fd(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            v = rng.normal(size=15)

            def f(x):
                return objective.cosine_term(x[:5], x[5:10], x[10:]).value

            t = objective.cosine_term(v[:5], v[5:10], v[10:])
            analytic = np.concatenate([t.grad_w, t.grad_g1, t.grad_g2])
            assert max_rel_error(analytic, central_difference(f, v)) < 1e-7


class TestSubjectRegularizers:
    w = np.array([1.0, 0.5])

    def test_single_visit(self):
        r = objective.neighbor_reg(np.ones((1, 2)), self.w)
        assert r.value == 0.0 and r.grad_embeddings.shape == (1, 2)
        assert objective.complete_reg(np.ones((1, 2)), [70.0], self.w).value == 0.0

    def test_neighbor_parallel(self):
        G = np.array([0.0, 1.0, 3.0])[:, None] * self.w
        assert objective.neighbor_reg(G, self.w).value == pytest.approx(-2.0)

    def test_neighbor_orthogonal(self):
        G = np.array([[0.0, 0.0], [-0.5, 1.0]])
        assert objective.neighbor_reg(G, self.w).value == pytest.approx(0.0, abs=1e-15)

    def test_complete_single_pair(self):
        G = np.array([[0.0, 0.0], self.w])
        assert objective.complete_reg(G, [70.0, 72.0], self.w).value == pytest.approx(-2.0)

    def test_complete_three_visits(self):
        G = np.array([0.0, 1.0, 2.0])[:, None] * self.w
        assert objective.complete_reg(G, [70.0, 71.0, 73.0], self.w).value == pytest.approx(-6.0)

    def test_identical_embeddings(self):
        r = objective.complete_reg(np.ones((4, 2)), [1.0, 2.0, 3.0, 4.0], self.w)
        assert r.value == 0.0 and r.n_degenerate == 6

    def test_nonincreasing_ages(self):
        with pytest.raises(ContractError):
            objective.complete_reg(np.ones((2, 2)), [70.0, 70.0], self.w)

    def test_mean1_weighting(self):
        G = np.array([0.0, 1.0, 2.0])[:, None] * self.w
        r = objective.complete_reg(G, [70.0, 71.0, 73.0], self.w, weighting="mean1")
        assert r.value == pytest.approx(-3.0)

    @pytest.mark.parametrize("K", [2, 3, 5, 8])
    def test_bounds(self, K):
        rng = np.random.default_rng(K)
        ages = np.arange(K, dtype=float)
        for _ in range(100):
            G, w = rng.normal(size=(K, 3)), rng.normal(size=3)
            assert abs(objective.neighbor_reg(G, w).value) <= K - 1 + 1e-12
            unit = objective.complete_reg(G, ages, w, weighting="unit").value
            assert abs(unit) <= K * (K - 1) / 2 + 1e-12

    def test_subject_gradients_match_fd(self):
        rng = np.random.default_rng(11)
        ages = np.array([70.0, 70.7, 72.1, 75.0])
        G, w = rng.normal(size=(4, 3)), rng.normal(size=3)
        for fn in (lambda g, v: objective.neighbor_reg(g, v), lambda g, v: objective.complete_reg(g, ages, v)):
            r = fn(G, w)
            packed = np.concatenate([G.ravel(), w])
            numeric = central_difference(lambda x: fn(x[:12].reshape(4, 3), x[12:]).value, packed)
            assert max_rel_error(np.concatenate([r.grad_embeddings.ravel(), r.grad_w]), numeric) < 1e-7


class TestBatchRegularizer:
    @pytest.mark.parametrize("mode", ["neighbor", "complete"])
    @pytest.mark.parametrize("weighting", ["years", "mean1", "unit"])
    def test_vectorized_matches_loop(self, mode, weighting):
        rng = np.random.default_rng(7)
        counts = [1, 3, 2, 4, 1, 5]
        batch = _random_batch(rng, 2, counts)
        G, w = rng.normal(size=(sum(counts), 4)), rng.normal(size=4)
        G[2] = G[1]  # one degenerate pair
        value, grad_g, grad_w, n_deg = objective.batch_regularizer(
            G, w, batch.pairs(mode, weighting), batch.n_subjects
        )
        ref_value, ref_g, ref_w, ref_deg = 0.0, np.zeros_like(G), np.zeros_like(w), 0
        for start, stop in zip(batch.offsets[:-1], batch.offsets[1:]):
            if mode == "neighbor":
                r = objective.neighbor_reg(G[start:stop], w)
            else:
                r = objective.complete_reg(G[start:stop], batch.ages[start:stop], w, weighting=weighting)
            ref_value += r.value
            ref_g[start:stop] += r.grad_embeddings
            ref_w += r.grad_w
            ref_deg += r.n_degenerate
        M = batch.n_subjects
        assert value == pytest.approx(ref_value / M, abs=1e-12)
        np.testing.assert_allclose(grad_g, ref_g / M, atol=1e-12)
        np.testing.assert_allclose(grad_w, ref_w / M, atol=1e-12)
        assert n_deg == ref_deg == 1


class TestTotalLoss:
    def _setup(self, seed, counts, d=3, hidden=(5, 4)):
        rng = np.random.default_rng(seed)
        batch = _random_batch(rng, d, counts)
        params = net.init_params([d, *hidden, 1], seed, activation="tanh")
        for b in params.biases:
            b[...] = rng.normal(size=b.shape) * 0.2
        return batch, params

    def test_gamma_zero_identity(self):
        batch, params = self._setup(0, [2, 3])
        tr = net.forward(params, batch.features)
        br, g = objective.total_loss(batch, tr, params.w, 0.0)
        assert br.total == br.l_cls
        assert br.l_reg != 0.0  # still reported
        assert g.embedding_grads is None and g.w_grad is None

    def test_single_visit_subjects(self):
        batch, params = self._setup(1, [1, 1, 1])
        br, _ = objective.total_loss(batch, net.forward(params, batch.features), params.w, 1.0)
        assert br.l_reg == 0.0 and br.total == br.l_cls

    def test_two_subject_recomputation(self):
        # hand-built embeddings, no network involved
        G = np.array([[0.0, 0.0], [1.0, 1.0], [1.0, 3.0], [2.0, 0.0], [1.0, 1.0]])
        w, b = np.array([1.0, -0.5]), 0.25
        logits = G @ w + b
        trace = net.ForwardTrace((G,), (G,), (G,), logits)
        batch = SubjectBatch(
            np.zeros((5, 1)), np.array([0.0, 0.0, 1.0, 0.0, 1.0]),
            np.array([70.0, 71.0, 73.0, 60.0, 62.5]), np.array([0, 3, 5]),
        )
        gamma = 0.3
        br, _ = objective.total_loss(batch, trace, w, gamma, mode="complete")

        def cos(a, c):
            return float(w @ (c - a) / (np.linalg.norm(w) * np.linalg.norm(c - a)))

        bce = np.mean([np.log1p(np.exp(z)) - y * z for z, y in zip(logits, batch.labels)])
        l1 = -(1.0 * cos(G[0], G[1]) + 3.0 * cos(G[0], G[2]) + 2.0 * cos(G[1], G[2]))
        l2 = -2.5 * cos(G[3], G[4])
        expected = bce + gamma * (l1 + l2) / 2
        assert abs(br.total - expected) <= 1e-12

    @pytest.mark.parametrize("mode", ["neighbor", "complete"])
    @pytest.mark.parametrize("gamma", [0.0, 2e-4, 1.0])
    def test_gradient_matches_fd(self, mode, gamma):
        batch, params = self._setup(5, [3, 1, 4, 2])
        _, grads = objective.loss_and_gradient(params, batch, gamma, mode)

        def f(vec):
            return objective.loss_and_gradient(params.with_flat(vec), batch, gamma, mode)[0].total

        numeric = central_difference(f, params.flat())
        assert max_rel_error(grads.flat(), numeric) <= 1e-5

    def test_empty_batch(self):
        batch = SubjectBatch(np.zeros((0, 2)), np.zeros(0), np.zeros(0), np.array([0]))
        tr = net.ForwardTrace((), (), (np.zeros((0, 2)),), np.zeros(0))
        with pytest.raises(ContractError):
            objective.total_loss(batch, tr, np.ones(2), 1.0)
