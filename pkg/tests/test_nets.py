import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from doorverse.errors import CompatibilityError, DegenerateInputError, ShapeError
from doorverse.nets import (CVAE, Adam, LossWeights, MLP, PointEncoder, Tensor,
                            check_registered_ops, cvae_loss, grad_check, kl_loss,
                            load_checkpoint, matrix_to_rot6d, point_encode,
                            rot6d_to_matrix, rot6d_to_matrix_t, save_checkpoint)
from doorverse.nets import autodiff as ad


class TestGradients:
    def test_all_registered_ops_within_tolerance(self):
        results = check_registered_ops(seed=3)
        assert results, "registry must not be empty"
        worst = max(results.values())
        assert worst < 1e-3, f"worst op gradient error {worst}"

    def test_linear_map_gradient_is_exact(self):
        rng = np.random.default_rng(0)
        w = Tensor(rng.standard_normal((4, 2)))
        err = grad_check(lambda xs: ad.matmul(xs[0], w), [Tensor(rng.standard_normal((3, 4)))])
        assert err < 1e-6

    def test_three_layer_tanh_mlp(self):
        rng = np.random.default_rng(1)
        mlp = MLP([5, 8, 8, 2], rng, activation="tanh")
        x = Tensor(rng.standard_normal((4, 5)))
        err = grad_check(lambda xs: mlp(xs[0]), [x])
        assert err < 1e-3

    def test_kl_loss_gradient(self):
        rng = np.random.default_rng(2)
        err = grad_check(lambda xs: kl_loss(xs[0], xs[1]),
                         [Tensor(rng.standard_normal(8)), Tensor(rng.standard_normal(8) * 0.5)])
        assert err < 1e-3

    def test_gram_schmidt_gradient(self):
        rng = np.random.default_rng(3)
        err = grad_check(lambda xs: rot6d_to_matrix_t(xs[0]),
                         [Tensor(rng.standard_normal((3, 6)))])
        assert err < 1e-3


class TestRot6D:
    def test_identity(self):
        assert np.allclose(rot6d_to_matrix([1, 0, 0, 0, 1, 0]), np.eye(3))

    def test_scale_invariance(self):
        assert np.allclose(rot6d_to_matrix([2, 0, 0, 0, 3, 0]), np.eye(3))

    def test_orthonormality_over_random_inputs(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            rot = rot6d_to_matrix(rng.standard_normal(6))
            assert np.abs(rot.T @ rot - np.eye(3)).max() < 1e-5
            assert abs(np.linalg.det(rot) - 1.0) < 1e-5

    def test_degenerate_inputs_rejected(self):
        with pytest.raises(DegenerateInputError):
            rot6d_to_matrix([0, 0, 0, 0, 1, 0])
        with pytest.raises(DegenerateInputError):
            rot6d_to_matrix([1, 0, 0, 2, 0, 0])

    def test_matrix_roundtrip(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            rot = rot6d_to_matrix(rng.standard_normal(6))
            assert np.abs(rot6d_to_matrix(matrix_to_rot6d(rot)) - rot).max() < 1e-9

    def test_tensor_version_matches_numpy(self):
        rng = np.random.default_rng(2)
        v = rng.standard_normal((8, 6))
        batched = rot6d_to_matrix_t(Tensor(v)).data
        for i in range(8):
            assert np.abs(batched[i] - rot6d_to_matrix(v[i])).max() < 1e-6


class TestKL:
    def test_standard_normal_is_zero(self):
        assert kl_loss(Tensor(np.zeros(32)), Tensor(np.zeros(32))).item() == pytest.approx(0.0)

    def test_unit_mean_single_dim(self):
        val = kl_loss(Tensor(np.array([1.0])), Tensor(np.array([0.0]))).item()
        assert val == pytest.approx(0.5)

    @given(st.integers(0, 10_000))
    @settings(max_examples=25)
    def test_non_negative_everywhere(self, seed):
        rng = np.random.default_rng(seed)
        val = kl_loss(Tensor(rng.standard_normal(16) * 3),
                      Tensor(rng.standard_normal(16) * 5)).item()
        assert val >= -1e-6

    def test_extreme_logvar_clamped(self):
        val = kl_loss(Tensor(np.zeros(4)), Tensor(np.full(4, 1e6))).item()
        assert np.isfinite(val)


class TestCVAELoss:
    def _setup(self, seed=0):
        rng = np.random.default_rng(seed)
        cvae = CVAE(cond_dim=8, rng=rng, latent_dim=4, hidden=16)
        acts = rng.standard_normal((6, 9)).astype(np.float32)
        mats = np.stack([rot6d_to_matrix(a[3:]) for a in acts]).astype(np.float32)
        cond = rng.standard_normal((6, 8)).astype(np.float32)
        return cvae, acts, mats, cond

    def test_forced_ground_truth_gives_zero(self):
        rng = np.random.default_rng(0)

        class Perfect(CVAE):
            def encode(self, action, cond):
                z = Tensor(np.zeros((action.data.shape[0], self.latent_dim), np.float32))
                return z, Tensor(np.zeros_like(z.data))

            def decode(self, z, cond):
                return Tensor(self._forced)

        cvae = Perfect(cond_dim=8, rng=rng, latent_dim=4, hidden=16)
        acts = rng.standard_normal((5, 9)).astype(np.float32)
        # force exact rot6d of an orthonormal frame so matrix loss is exactly zero
        for i in range(5):
            acts[i, 3:] = matrix_to_rot6d(rot6d_to_matrix(acts[i, 3:]))
        mats = np.stack([rot6d_to_matrix(a[3:]) for a in acts]).astype(np.float32)
        cvae._forced = acts
        cond = rng.standard_normal((5, 8)).astype(np.float32)
        total, comps = cvae_loss(acts, mats, cond, cvae, LossWeights(), np.random.default_rng(0))
        assert total.item() == pytest.approx(0.0, abs=1e-10)
        assert comps["kl"] == pytest.approx(0.0, abs=1e-12)

    def test_zero_kl_weight_drops_kl_component(self):
        cvae, acts, mats, cond = self._setup()
        t0, c0 = cvae_loss(acts, mats, cond, cvae, LossWeights(kl=0.0), np.random.default_rng(7))
        assert t0.item() == pytest.approx(c0["pos"] + c0["rot"], rel=1e-6)

    def test_pos_weight_scales_linearly(self):
        cvae, acts, mats, cond = self._setup()
        _, c1 = cvae_loss(acts, mats, cond, cvae, LossWeights(pos=1.0), np.random.default_rng(7))
        t2, c2 = cvae_loss(acts, mats, cond, cvae, LossWeights(pos=2.0), np.random.default_rng(7))
        assert c2["pos"] == pytest.approx(c1["pos"], rel=1e-6)
        expected = 0.1 * c2["kl"] + 2.0 * c2["pos"] + 1.0 * c2["rot"]
        assert t2.item() == pytest.approx(expected, rel=1e-5)

    def test_seeded_sampling_deterministic(self):
        cvae, acts, mats, cond = self._setup()
        t1, _ = cvae_loss(acts, mats, cond, cvae, LossWeights(), np.random.default_rng(5))
        t2, _ = cvae_loss(acts, mats, cond, cvae, LossWeights(), np.random.default_rng(5))
        assert t1.item() == t2.item()


class TestPointEncoder:
    def test_permutation_equivariance_and_invariant_global(self):
        rng = np.random.default_rng(0)
        enc = PointEncoder(rng, n_points=128)
        cloud = rng.standard_normal((128, 3)).astype(np.float32)
        per, glob = point_encode(cloud, enc)
        perm = rng.permutation(128)
        per2, glob2 = point_encode(cloud[perm], enc)
        assert np.array_equal(glob, glob2)
        assert np.array_equal(per[perm], per2)

    def test_zero_weights_zero_features(self):
        rng = np.random.default_rng(0)
        enc = PointEncoder(rng, n_points=64)
        for t in enc.parameters():
            t.data = np.zeros_like(t.data)
        per, glob = point_encode(np.ones((64, 3), np.float32), enc)
        assert np.all(per == 0.0) and np.all(glob == 0.0)

    def test_duplicated_multiset_same_global(self):
        rng = np.random.default_rng(1)
        enc128 = PointEncoder(rng, n_points=128)
        enc64 = PointEncoder(rng, n_points=64)
        for src, dst in zip(enc128.parameters(), enc64.parameters()):
            dst.data = src.data.copy()
        cloud = rng.standard_normal((64, 3)).astype(np.float32)
        doubled = np.concatenate([cloud, cloud])
        _, g1 = point_encode(cloud, enc64)
        _, g2 = point_encode(doubled, enc128)
        assert np.array_equal(g1, g2)

    def test_wrong_point_count_rejected(self):
        rng = np.random.default_rng(0)
        enc = PointEncoder(rng, n_points=64)
        with pytest.raises(ShapeError):
            point_encode(np.ones((65, 3), np.float32), enc)

    def test_forward_determinism(self):
        rng = np.random.default_rng(5)
        enc = PointEncoder(rng, n_points=32)
        cloud = rng.standard_normal((32, 3)).astype(np.float32)
        a = point_encode(cloud, enc)
        b = point_encode(cloud, enc)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


class TestAdam:
    def test_convex_quadratic_reduction(self):
        x = Tensor(np.array([3.0, -2.0]))
        opt = Adam([x], lr=0.05)
        scale = Tensor(np.array([1.0, 5.0]))
        first = None
        for _ in range(200):
            loss = ad.tsum(x * x * scale)
            if first is None:
                first = loss.item()
            loss.backward()
            opt.step()
        final = ad.tsum(x * x * scale).item()
        assert final <= 0.01 * first


class TestCheckpoint:
    def test_roundtrip(self, tmp_path):
        arrays = {"w": np.arange(6, dtype=np.float32).reshape(2, 3), "b": np.ones(3, np.float32)}
        path = tmp_path / "net.ckpt"
        save_checkpoint(path, arrays, config_hash="abc123", seed=7, meta={"role": "test"})
        back, header = load_checkpoint(path, expect_config_hash="abc123")
        assert np.array_equal(back["w"], arrays["w"]) and np.array_equal(back["b"], arrays["b"])
        assert header["seed"] == 7

    def test_hash_mismatch_refused(self, tmp_path):
        path = tmp_path / "net.ckpt"
        save_checkpoint(path, {"w": np.zeros(2, np.float32)}, config_hash="abc", seed=0)
        with pytest.raises(CompatibilityError):
            load_checkpoint(path, expect_config_hash="different")
