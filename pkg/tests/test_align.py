import numpy as np
import pytest

from amtransfer import align, boost, data, tree
from amtransfer.errors import SizeError

TARGET = data.DEFAULT_TASKS["target"]


def normal_equations_solve(a, b):
    """Independent oracle: brute-force (A^T A)^-1 A^T b."""
    return np.linalg.solve(a.T @ a, a.T @ b)


class TestSolve:
    def test_matches_normal_equations_on_100_random_fixtures(self):
        rng = np.random.default_rng(31)
        for _ in range(100):
            n = int(rng.integers(6, 30))
            a = rng.random((n, 6)) * 10 - 5
            b = rng.random(n) * 4
            h = align.solve_alignment(a, b)
            want = normal_equations_solve(a, b)
            assert np.allclose(h, want, rtol=1e-8, atol=1e-10)

    def test_residual_orthogonal_to_columns(self):
        rng = np.random.default_rng(32)
        for _ in range(50):
            a = rng.random((12, 6))
            b = rng.random(12)
            h = align.solve_alignment(a, b)
            resid = b - a @ h
            scale = max(1.0, float(np.abs(b).max()))
            assert np.abs(a.T @ resid).max() < 1e-8 * scale

    def test_rank_deficient_uses_minimum_norm(self):
        a = np.zeros((8, 6))
        a[:, 0] = np.arange(8.0)
        a[:, 1] = np.arange(8.0) * 2  # duplicate direction
        b = np.arange(8.0)
        h = align.solve_alignment(a, b)
        assert np.allclose(a @ h, b, atol=1e-10)
        # minimum-norm solution spreads weight across the tied columns
        assert np.linalg.norm(h) <= np.linalg.norm(np.array([1, 0, 0, 0, 0, 0.0])) + 1e-12


class TestFitAlignment:
    def test_exact_fit_gives_selector_vector(self, source40, target24):
        model = tree.fit_tree(source40)
        xt = target24.x[:12]
        yt = model.predict_batch(xt)  # target outputs equal source predictions
        tgt = data.Dataset(TARGET, xt, yt)
        amap = align.fit_alignment(source40, tgt)
        want = np.zeros(6)
        want[4] = 1.0
        assert np.allclose(amap.h, want, atol=1e-8)

    def test_smallest_paper_split_is_solvable(self, source40, target24):
        amap = align.fit_alignment(source40, target24.subset(range(8)))
        assert amap.h.shape == (6,)
        assert np.isfinite(amap.h).all()

    def test_too_small_target_rejected(self, source40, target24):
        with pytest.raises(SizeError):
            align.fit_alignment(source40, target24.subset(range(5)))

    def test_matches_pseudoinverse_oracle_on_datasets(self, source40, target24):
        amap = align.fit_alignment(source40, target24)
        a = align.design_matrix(amap.source_model, target24.x)
        want = normal_equations_solve(a, target24.y)
        assert np.allclose(amap.h, want, rtol=1e-8, atol=1e-10)


class TestTransformSource:
    def test_selector_vector_returns_original_outputs(self, source40):
        model = tree.fit_tree(source40)
        h = np.zeros(6)
        h[4] = 1.0
        amap = align.AlignmentMap(h=h, source_model=model)
        moved = align.transform_source(amap, source40)
        assert np.array_equal(moved.y, source40.y)
        assert np.array_equal(moved.x, source40.x)

    def test_zero_vector_gives_zero_outputs(self, source40):
        amap = align.AlignmentMap(h=np.zeros(6),
                                  source_model=tree.fit_tree(source40))
        moved = align.transform_source(amap, source40)
        assert np.array_equal(moved.y, np.zeros(len(source40)))

    def test_matches_rowwise_dot_product_oracle(self, source40):
        rng = np.random.default_rng(33)
        h = rng.random(6)
        amap = align.AlignmentMap(h=h, source_model=tree.fit_tree(source40))
        moved = align.transform_source(amap, source40)
        for i in range(len(source40)):
            row = np.concatenate([source40.x[i], [source40.y[i], 1.0]])
            want = sum(float(a) * float(b) for a, b in zip(row, h))
            assert moved.y[i] == pytest.approx(want, rel=1e-12)

    def test_shape_contract(self, source40):
        amap = align.AlignmentMap(h=np.ones(6), source_model=tree.fit_tree(source40))
        moved = align.transform_source(amap, source40)
        assert moved.x.shape == (len(source40), 4)
        assert moved.y.shape == (len(source40),)


class TestSaDtr:
    def test_selector_case_equals_pooled_raw_fit(self, source40, target24):
        # target outputs exactly equal the source model's predictions:
        # the fitted map is the selector and the training pool matches
        # {target} + {raw source}
        model = tree.fit_tree(source40)
        xt = target24.x[:12]
        tgt = data.Dataset(TARGET, xt, model.predict_batch(xt))
        sa = align.fit_sa_dtr(source40, tgt)
        pooled = tree.fit_tree_arrays(
            np.vstack([tgt.x, source40.x]),
            np.concatenate([tgt.y, source40.y]))
        probe = data.generate_synthetic(TARGET, 64, seed=9).x
        assert np.allclose(sa.predict_batch(probe), pooled.predict_batch(probe),
                           atol=1e-9)

    def test_training_pool_interpolated_at_full_depth(self, source40, target24):
        tgt = target24.subset(range(10))
        sa = align.fit_sa_dtr(source40, tgt)
        assert np.allclose(sa.predict_batch(tgt.x), tgt.y, atol=1e-9)

    @pytest.mark.slow
    def test_ideal_source_beats_baseline_often(self):
        wins = 0
        for k in range(50):
            full_t = data.generate_synthetic(TARGET, 24, seed=2000 + k)
            full_s = data.generate_synthetic(TARGET, 40, seed=6000 + k)
            train, val, sub = data.sample_split(
                full_t, full_s, data.SplitPlan(8, 36, seed=k))
            sa = align.fit_sa_dtr(sub, train)
            mse_sa = float(np.mean((sa.predict_batch(val.x) - val.y) ** 2))
            base = tree.fit_tree(train)
            mse_b = float(np.mean((base.predict_batch(val.x) - val.y) ** 2))
            wins += mse_sa <= mse_b
        assert wins >= 35, f"aligned fit won only {wins}/50"


class TestSaIDtr:
    def test_identity_alignment_behaves_like_plain_boosting(self, source40, target24):
        # exact-fit construction makes the transformed source equal the
        # raw source up to float noise; equal seeds then give the same
        # ensemble predictions
        model = tree.fit_tree(source40)
        xt = target24.x[:12]
        tgt = data.Dataset(TARGET, xt, model.predict_batch(xt))
        hp = boost.BoostHyperparams(20, 2, 3)
        a = align.fit_sa_i_dtr(source40, tgt, hp, seed=5)
        b = boost.fit_tradaboost(source40, tgt, hp, seed=5)
        probe = data.generate_synthetic(TARGET, 32, seed=10).x
        assert np.allclose(a.predict_batch(probe), b.predict_batch(probe),
                           atol=1e-6)

    def test_degenerate_hyperparams_single_tree(self, source40, target24):
        ens = align.fit_sa_i_dtr(source40, target24,
                                 boost.BoostHyperparams(1, 1, 5), seed=1)
        assert len(ens) == 1

    def test_default_hyperparams_are_setting1(self):
        hp = boost.DEFAULT_BOOST
        assert (hp.n_boost, hp.max_stages, hp.cv_folds) == (100, 10, 5)
