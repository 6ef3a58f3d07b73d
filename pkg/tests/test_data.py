import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from amtransfer import data
from amtransfer.errors import (
    ConfigError,
    DegenerateFeatureError,
    EmptyDatasetError,
    ParseError,
    SchemaError,
    SizeError,
)

TARGET = data.DEFAULT_TASKS["target"]
SOURCE1 = data.DEFAULT_TASKS["source1"]


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n")


HEADER = "laser_power,laser_speed,hatch_spacing,energy,relative_density"


class TestLoadCsv:
    def test_loads_target_sized_file(self, tmp_path):
        ds = data.generate_synthetic(TARGET, 24, seed=3)
        path = tmp_path / "target.csv"
        data.write_csv(ds, path)
        loaded = data.load_csv(path, TARGET)
        assert len(loaded) == 24
        assert np.array_equal(loaded.x, ds.x)
        assert np.array_equal(loaded.y, ds.y)

    def test_order_is_stable_across_loads(self, tmp_path):
        ds = data.generate_synthetic(TARGET, 10, seed=4)
        path = tmp_path / "t.csv"
        data.write_csv(ds, path)
        a = data.load_csv(path, TARGET)
        b = data.load_csv(path, TARGET)
        assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)

    def test_header_only_is_empty_dataset_error(self, tmp_path):
        path = tmp_path / "empty.csv"
        write_lines(path, [HEADER])
        with pytest.raises(EmptyDatasetError):
            data.load_csv(path, TARGET)

    def test_bad_cell_names_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        write_lines(path, [HEADER,
                           "150,800,90,100,98.5",
                           "abc,800,90,100,98.5"])
        with pytest.raises(ParseError, match="row 2"):
            data.load_csv(path, TARGET)

    def test_wrong_header_is_schema_error(self, tmp_path):
        path = tmp_path / "s.csv"
        write_lines(path, ["a,b,c,d,e", "1,2,3,4,5"])
        with pytest.raises(SchemaError):
            data.load_csv(path, TARGET)

    def test_missing_column_is_schema_error(self, tmp_path):
        path = tmp_path / "s.csv"
        write_lines(path, [HEADER, "150,800,90,100"])
        with pytest.raises(SchemaError, match="row 1"):
            data.load_csv(path, TARGET)


class TestGenerateSynthetic:
    def test_deterministic(self):
        a = data.generate_synthetic(SOURCE1, 49, seed=7, response="affine")
        b = data.generate_synthetic(SOURCE1, 49, seed=7, response="affine")
        assert np.array_equal(a.x, b.x)
        assert np.array_equal(a.y, b.y)

    def test_inputs_within_task_ranges(self):
        ds = data.generate_synthetic(SOURCE1, 200, seed=8)
        for j, (lo, hi) in enumerate(SOURCE1.input_ranges):
            assert ds.x[:, j].min() >= lo
            assert ds.x[:, j].max() <= hi

    def test_single_sample(self):
        ds = data.generate_synthetic(TARGET, 1, seed=9)
        assert len(ds) == 1

    def test_outputs_in_density_range(self):
        ds = data.generate_synthetic(SOURCE1, 500, seed=10)
        assert (ds.y > 0).all() and (ds.y <= 100).all()

    def test_bad_n_rejected(self):
        with pytest.raises(ConfigError):
            data.generate_synthetic(TARGET, 0, seed=1)

    def test_unknown_response_rejected(self):
        with pytest.raises(ConfigError):
            data.generate_synthetic(TARGET, 5, seed=1, response="cubic")

    def test_shift_moves_outputs(self):
        a = data.generate_synthetic(TARGET, 30, seed=3)
        b = data.generate_synthetic(TARGET, 30, seed=3, shift=1.5)
        assert np.allclose(b.y - a.y, 1.5)


class TestSampleSplit:
    def test_sixteen_eight_partitions_whole_target(self, target24, source40):
        plan = data.SplitPlan(n_train_t=16, n_s=10, seed=5)
        train, val, _ = data.sample_split(target24, source40, plan)
        seen = np.vstack([train.x, val.x])
        assert len(train) == 16 and len(val) == 8
        assert np.array_equal(np.sort(seen, axis=0), np.sort(target24.x, axis=0))

    def test_full_source_draw_is_permutation(self, target24, source40):
        plan = data.SplitPlan(n_train_t=8, n_s=40, seed=6)
        _, _, sub = data.sample_split(target24, source40, plan)
        assert np.array_equal(np.sort(sub.y), np.sort(source40.y))

    def test_same_plan_same_indices(self):
        plan = data.SplitPlan(n_train_t=12, n_s=20, seed=123456789)
        a = data.split_indices(plan, 24, 40)
        b = data.split_indices(plan, 24, 40)
        for u, v in zip(a, b):
            assert np.array_equal(u, v)

    def test_different_seeds_differ(self):
        a = data.split_indices(data.SplitPlan(12, 20, seed=1), 24, 40)
        b = data.split_indices(data.SplitPlan(12, 20, seed=2), 24, 40)
        assert not all(np.array_equal(u, v) for u, v in zip(a, b))

    def test_oversized_plan_rejected(self, target24, source40):
        with pytest.raises(SizeError):
            data.sample_split(target24, source40, data.SplitPlan(20, 10, seed=1))
        with pytest.raises(SizeError):
            data.sample_split(target24, source40, data.SplitPlan(8, 41, seed=1))

    def test_disjointness_over_1000_plans(self):
        # train and validation index sets never overlap
        rng = np.random.default_rng(0)
        for _ in range(1000):
            n_train = int(rng.integers(1, 17))
            plan = data.SplitPlan(n_train, 1, seed=int(rng.integers(0, 2**63)))
            train_idx, val_idx, _ = data.split_indices(plan, 24, 10)
            assert not set(train_idx.tolist()) & set(val_idx.tolist())
            assert len(set(train_idx.tolist())) == n_train


class TestPreprocessor:
    def two_point_dataset(self):
        x = np.array([[40.0, 120.0, 80.0, 17.99],
                      [195.0, 1530.0, 100.0, 150.0]])
        return data.Dataset(TARGET, x, np.array([95.0, 96.0]))

    def test_minmax_maps_endpoints(self):
        p = data.fit_preprocessor("minmax", self.two_point_dataset())
        out = p.apply_x(self.two_point_dataset().x)
        assert np.allclose(out[0], 0.0) and np.allclose(out[1], 1.0)

    def test_minmax_midpoint(self):
        x = np.zeros((2, 4))
        x[1] = 10.0
        ds = data.Dataset(TARGET, x, np.array([1.0, 2.0]))
        p = data.fit_preprocessor("minmax", ds)
        mid = p.apply_x(np.full((1, 4), 5.0))
        assert np.allclose(mid, 0.5)

    def test_zscore_unit_example(self):
        # mean 100, population std 10 -> 110 maps to 1.0
        col = np.array([90.0, 100.0, 110.0])
        x = np.tile(col[:, None], (1, 4))
        ds = data.Dataset(TARGET, x, np.array([1.0, 2.0, 3.0]))
        p = data.fit_preprocessor("zscore", ds)
        out = p.apply_x(np.full((1, 4), 110.0))
        assert np.allclose(out, (110.0 - 100.0) / col.std())

    def test_constant_column_degenerate(self):
        x = np.ones((3, 4))
        ds = data.Dataset(TARGET, x, np.array([1.0, 2.0, 3.0]))
        for mode in ("minmax", "zscore"):
            with pytest.raises(DegenerateFeatureError):
                data.fit_preprocessor(mode, ds)

    def test_raw_is_identity(self, target24):
        p = data.fit_preprocessor("raw", target24)
        out = data.apply_preprocessor(p, target24)
        assert np.array_equal(out.x, target24.x)

    def test_minmax_bounds_own_fit_set(self, target24):
        p = data.fit_preprocessor("minmax", target24)
        out = data.apply_preprocessor(p, target24)
        assert out.x.min() >= 0.0 and out.x.max() <= 1.0

    def test_outputs_bitwise_untouched(self, target24):
        for mode in ("raw", "minmax", "zscore"):
            p = data.fit_preprocessor(mode, target24)
            out = data.apply_preprocessor(p, target24)
            assert np.array_equal(out.y, target24.y)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32), st.sampled_from(["raw", "minmax", "zscore"]))
    def test_round_trip(self, seed, mode):
        ds = data.generate_synthetic(TARGET, 12, seed=seed)
        p = data.fit_preprocessor(mode, ds)
        back = p.inverse_x(p.apply_x(ds.x))
        assert np.allclose(back, ds.x, rtol=1e-12, atol=1e-9)


class TestTypes:
    def test_sample_validates_density(self):
        with pytest.raises(ValueError):
            data.Sample(1.0, 2.0, 3.0, 4.0, 0.0)
        with pytest.raises(ValueError):
            data.Sample(1.0, 2.0, 3.0, 4.0, 101.0)
        with pytest.raises(ValueError):
            data.Sample(np.inf, 2.0, 3.0, 4.0, 99.0)

    def test_taskspec_validates_ranges(self):
        with pytest.raises(ConfigError):
            data.TaskSpec("bad", "p", ((1.0, 1.0),) * 4, 5)

    def test_nominal_sizes(self):
        assert data.DEFAULT_TASKS["source1"].nominal_size == 49
        assert data.DEFAULT_TASKS["source2"].nominal_size == 32
        assert data.DEFAULT_TASKS["target"].nominal_size == 24

    def test_dataset_arrays_read_only(self, target24):
        with pytest.raises(ValueError):
            target24.x[0, 0] = 1.0

    def test_samples_view_round_trips(self):
        ds = data.generate_synthetic(TARGET, 5, seed=77)
        again = data.Dataset.from_samples(TARGET, ds.samples)
        assert np.array_equal(again.x, ds.x)
        assert np.array_equal(again.y, ds.y)
