"""Grid geometry, dataset validation, quadrature, differentiation, IO."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fkwc import (
    DataError,
    DepthSpec,
    FunctionalDataset,
    Grid,
    center_by_deepest,
    differentiate,
    inner_product,
    l2_norm,
    load_csv,
    load_json,
    save_csv,
    save_json,
)


def curve_arrays(m=11, n=1):
    return st.lists(
        st.lists(st.floats(-50, 50, allow_nan=False), min_size=m, max_size=m),
        min_size=n,
        max_size=n,
    ).map(lambda rows: np.array(rows))


class TestGrid:
    def test_regular(self):
        g = Grid.regular(5)
        assert g.m == 5
        assert g.step == 0.25
        np.testing.assert_allclose(g.points, [0, 0.25, 0.5, 0.75, 1.0])

    def test_too_small(self):
        with pytest.raises(DataError):
            Grid.regular(2)

    def test_not_equispaced(self):
        with pytest.raises(DataError):
            Grid(np.array([0.0, 0.3, 1.0]))

    def test_bad_endpoints(self):
        with pytest.raises(DataError):
            Grid(np.array([0.1, 0.5, 1.0]))

    def test_weights_sum_to_one(self, grid101):
        assert abs(grid101.trapezoid_weights.sum() - 1.0) < 1e-12


class TestInnerProduct:
    def test_constant_one(self, grid101):
        one = np.ones(grid101.m)
        assert inner_product(one, one, grid101) == pytest.approx(1.0, abs=1e-12)

    def test_linear_times_one_is_half(self, grid101):
        t = grid101.points
        assert inner_product(t, np.ones_like(t), grid101) == pytest.approx(0.5, abs=1e-12)

    def test_fourier_orthogonality(self):
        g = Grid.regular(201)
        t = g.points
        val = inner_product(np.sin(2 * np.pi * t), np.cos(2 * np.pi * t), g)
        assert abs(val) < 1e-8

    def test_grid_mismatch(self, grid101, grid21):
        with pytest.raises(DataError):
            inner_product(np.ones(grid21.m), np.ones(grid21.m), grid101)

    @given(curve_arrays(m=11, n=2))
    @settings(max_examples=50, deadline=None)
    def test_symmetry_exact(self, pair):
        g = Grid.regular(11)
        assert inner_product(pair[0], pair[1], g) == inner_product(pair[1], pair[0], g)

    @given(curve_arrays(m=11, n=2), st.floats(-5, 5), st.floats(-5, 5))
    @settings(max_examples=50, deadline=None)
    def test_bilinearity(self, pair, a, b):
        g = Grid.regular(11)
        f, h = pair
        lhs = inner_product(a * f + b * h, f, g)
        rhs = a * inner_product(f, f, g) + b * inner_product(h, f, g)
        assert lhs == pytest.approx(rhs, abs=1e-8 * (1 + abs(rhs)))


class TestNorm:
    def test_zero(self, grid101):
        assert l2_norm(np.zeros(grid101.m), grid101) == 0.0

    def test_constant(self, grid101):
        assert l2_norm(-3.0 * np.ones(grid101.m), grid101) == pytest.approx(3.0, abs=1e-12)

    def test_unit_sine(self):
        g = Grid.regular(201)
        f = np.sqrt(2.0) * np.sin(2 * np.pi * g.points)
        assert l2_norm(f, g) == pytest.approx(1.0, abs=1e-6)

    @given(curve_arrays(m=11, n=2))
    @settings(max_examples=50, deadline=None)
    def test_triangle_inequality(self, pair):
        g = Grid.regular(11)
        f, h = pair
        assert l2_norm(f + h, g) <= l2_norm(f, g) + l2_norm(h, g) + 1e-12


class TestDifferentiate:
    def test_constant(self, grid101):
        d = differentiate(np.full(grid101.m, 7.0), grid101)
        np.testing.assert_allclose(d, 0.0, atol=1e-10)

    def test_linear(self, grid101):
        d = differentiate(grid101.points, grid101)
        np.testing.assert_allclose(d, 1.0, atol=1e-10)

    def test_quadratic_exact_everywhere(self, grid101):
        t = grid101.points
        d = differentiate(t * t, grid101)
        np.testing.assert_allclose(d, 2 * t, atol=1e-10)

    @given(curve_arrays(m=11, n=2), st.floats(-4, 4), st.floats(-4, 4))
    @settings(max_examples=50, deadline=None)
    def test_linearity(self, pair, a, b):
        g = Grid.regular(11)
        f, h = pair
        lhs = differentiate(a * f + b * h, g)
        rhs = a * differentiate(f, g) + b * differentiate(h, g)
        np.testing.assert_allclose(lhs, rhs, atol=1e-9 * (1 + np.abs(rhs).max()))


class TestDataset:
    def test_group_label_gap_rejected(self, grid21):
        with pytest.raises(DataError):
            FunctionalDataset(grid21, np.zeros((2, grid21.m)), [1, 3])

    def test_labels_must_start_at_one(self, grid21):
        with pytest.raises(DataError):
            FunctionalDataset(grid21, np.zeros((2, grid21.m)), [0, 1])

    def test_derivative_shape_checked(self, grid21):
        with pytest.raises(DataError):
            FunctionalDataset(
                grid21, np.zeros((2, grid21.m)), [1, 2], derivatives=np.zeros((3, grid21.m))
            )

    def test_group_sizes(self, two_group_dataset):
        assert two_group_dataset.n_groups == 2
        np.testing.assert_array_equal(two_group_dataset.group_sizes, [15, 15])

    def test_subset_relabels(self, grid21):
        ds = FunctionalDataset(grid21, np.random.default_rng(0).normal(size=(9, grid21.m)),
                               [1, 1, 1, 2, 2, 2, 3, 3, 3])
        sub = ds.subset([3, 1])
        assert sub.n_curves == 6
        np.testing.assert_array_equal(sub.groups, [2, 2, 2, 1, 1, 1])


class TestCsvJson:
    def test_small_example(self, tmp_path):
        path = tmp_path / "tiny.csv"
        path.write_text("group,0,0.5,1\n1,1.0,2.0,3.0\n2,4.0,5.0,6.0\n")
        ds = load_csv(path)
        assert ds.n_curves == 2
        assert ds.n_groups == 2
        assert ds.grid.m == 3

    def test_header_grid_not_equispaced_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("group,0,0.4,1\n1,1,2,3\n2,1,2,3\n")
        with pytest.raises(DataError):
            load_csv(path)

    def test_non_numeric_cell_names_row_and_column(self, tmp_path):
        path = tmp_path / "cell.csv"
        path.write_text("group,0,0.5,1\n1,1.0,oops,3.0\n2,1,2,3\n")
        with pytest.raises(DataError, match=r"row 2, column 3"):
            load_csv(path)

    def test_ragged_row_rejected(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("group,0,0.5,1\n1,1.0,2.0\n2,1,2,3\n")
        with pytest.raises(DataError, match=r"row 2"):
            load_csv(path)

    def test_roundtrip_exact(self, tmp_path, two_group_dataset):
        ds = two_group_dataset.with_finite_difference_derivatives()
        cpath = tmp_path / "data.csv"
        dpath = tmp_path / "deriv.csv"
        save_csv(ds, cpath, derivatives_path=dpath)
        back = load_csv(cpath, derivatives_path=dpath)
        np.testing.assert_array_equal(back.curves, ds.curves)
        np.testing.assert_array_equal(back.derivatives, ds.derivatives)
        np.testing.assert_array_equal(back.groups, ds.groups)
        np.testing.assert_array_equal(back.grid.points, ds.grid.points)

    def test_json_roundtrip(self, tmp_path, two_group_dataset):
        path = tmp_path / "data.json"
        save_json(two_group_dataset, path)
        back = load_json(path)
        np.testing.assert_array_equal(back.curves, two_group_dataset.curves)
        assert back.derivatives is None


class TestCenterByDeepest:
    def test_single_curve_group_becomes_zero(self, grid21):
        rng = np.random.default_rng(3)
        ds = FunctionalDataset(
            grid21, np.vstack([rng.normal(size=grid21.m), rng.normal(size=(3, grid21.m))]),
            [1, 2, 2, 2],
        )
        out = center_by_deepest(ds, DepthSpec(kind="mbd"))
        np.testing.assert_array_equal(out.curves[0], np.zeros(grid21.m))

    def test_ordered_constants_mbd_subtracts_middle(self, grid21):
        curves = np.vstack([np.full(grid21.m, v) for v in (0.0, 1.0, 2.0)])
        ds = FunctionalDataset(grid21, curves, [1, 1, 1])
        out = center_by_deepest(ds, DepthSpec(kind="mbd"))
        np.testing.assert_allclose(out.curves, curves - 1.0)

    def test_double_centering_ltr_leaves_zero_curve_per_group(self, two_group_dataset):
        spec = DepthSpec(kind="ltr")
        once = center_by_deepest(two_group_dataset, spec)
        twice = center_by_deepest(once, spec)
        for j in (1, 2):
            rows = twice.curves[twice.group_indices(j)]
            assert np.any(np.all(rows == 0.0, axis=1))

    def test_depth_tie_breaks_to_lowest_index(self, grid21):
        f = np.sin(2 * np.pi * grid21.points)
        ds = FunctionalDataset(grid21, np.vstack([f, -f]), [1, 1])
        out = center_by_deepest(ds, DepthSpec(kind="ltr"))
        np.testing.assert_allclose(out.curves[0], 0.0)
        np.testing.assert_allclose(out.curves[1], -2 * f)

    def test_derivative_channel_recomputed(self, grid21):
        rng = np.random.default_rng(8)
        ds = FunctionalDataset(
            grid21, rng.normal(size=(4, grid21.m)), [1, 1, 2, 2]
        ).with_finite_difference_derivatives()
        out = center_by_deepest(ds, DepthSpec(kind="mbd"))
        np.testing.assert_allclose(
            out.derivatives, differentiate(out.curves, grid21), atol=1e-10
        )
