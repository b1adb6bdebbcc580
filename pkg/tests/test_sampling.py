import numpy as np
import pytest

from conftest import retry_once
from regionboot.errors import ConfigError, InvalidParameterError
from regionboot.regions import HalfSpace, Slab, SphericalShell, exact_bootstrap_prob
from regionboot.sampling import (
    MultiscaleCounts,
    ScaleGrid,
    complement_counts,
    counts_from_csv,
    counts_to_csv,
    default_scale_grid,
    sample_counts,
)


class TestScaleGrid:
    def test_default_endpoints(self, grid):
        np.testing.assert_allclose(np.sqrt(grid.sigma2[0]), 1.0 / 3.0, rtol=1e-12)
        np.testing.assert_allclose(np.sqrt(grid.sigma2[12]), 3.0, rtol=1e-12)

    def test_log_midpoint(self, grid):
        np.testing.assert_allclose(np.sqrt(grid.sigma2[6]), 1.0, rtol=1e-12)

    def test_two_step_offset(self, grid):
        diffs = np.asarray(grid.tau2) - np.asarray(grid.sigma2)
        np.testing.assert_allclose(diffs, 1.0, rtol=1e-12)

    def test_validation(self):
        with pytest.raises(InvalidParameterError):
            ScaleGrid(sigma2=(1.0,), tau2=None, replicates=(10,))
        with pytest.raises(InvalidParameterError):
            ScaleGrid(sigma2=(1.0, 0.5), tau2=None, replicates=(10, 10))
        with pytest.raises(InvalidParameterError):
            ScaleGrid(sigma2=(0.5, 1.0), tau2=(1.5, 0.9), replicates=(10, 10))


class TestSampleCounts:
    def test_bit_exact_reproducibility(self, shell, shell_y, grid):
        a = sample_counts(shell, shell_y, grid, seed=99, target="H0")
        b = sample_counts(shell, shell_y, grid, seed=99, target="H0")
        assert a == b

    def test_count_invariants(self, shell_h0_counts):
        c = shell_h0_counts
        for i in range(c.n_scales):
            assert 0 <= c.e[i] <= min(c.c[i], c.d[i])
            assert c.c[i] + c.d[i] - c.e[i] <= c.b[i]

    def test_half_space_boundary_symmetry(self, grid):
        hs = HalfSpace(m=1)
        counts = sample_counts(hs, np.zeros(2), grid, seed=3, target="H0")
        for i in range(counts.n_scales):
            bi = counts.b[i]
            tol = 4.0 * np.sqrt(0.25 / bi)
            assert abs(counts.c[i] / bi - 0.5) < tol

    def test_one_step_matches_closed_forms(self, shell, shell_y):
        def check(seed):
            grid = default_scale_grid(two_step=False)
            counts = sample_counts(shell, shell_y, grid, seed=seed, target="H0")
            for i in range(counts.n_scales):
                p = exact_bootstrap_prob(shell, shell_y, counts.sigma2[i])
                se = np.sqrt(p * (1 - p) / counts.b[i])
                assert abs(counts.c[i] / counts.b[i] - p) < 4.0 * se

        retry_once(check, seeds=(17, 18))

    def test_shell_h1_frequency_at_unit_scale(self, shell, shell_y):
        def check(seed):
            grid = default_scale_grid(two_step=False, b=10**5)
            counts = sample_counts(shell, shell_y, grid, seed=seed, target="H0")
            i = int(np.argmin(np.abs(np.asarray(counts.sigma2) - 1.0)))
            se = np.sqrt(0.32 * 0.68 / counts.b[i])
            assert abs(counts.c[i] / counts.b[i] - 0.320) < 4.0 * se

        retry_once(check, seeds=(21, 22))

    def test_partition_additivity(self, shell, shell_y, grid):
        parts = [
            np.asarray(sample_counts(shell, shell_y, grid, seed=7, target=t).c)
            for t in ("H0", "H1", "H2")
        ]
        np.testing.assert_array_equal(sum(parts), np.asarray(grid.replicates))

    def test_h0prime_is_union(self, shell, shell_y, grid):
        c0 = np.asarray(sample_counts(shell, shell_y, grid, seed=7, target="H0").c)
        c2 = np.asarray(sample_counts(shell, shell_y, grid, seed=7, target="H2").c)
        cp = np.asarray(sample_counts(shell, shell_y, grid, seed=7, target="H0p").c)
        np.testing.assert_array_equal(cp, c0 + c2)

    def test_degenerate_first_step(self):
        # with sigma^2 ~ 0 the first step stays at y, so E ~ 1{y in H0} * D
        slab = Slab(m=1, d=1.0)
        grid = ScaleGrid(
            sigma2=(1e-6, 2e-6), tau2=(1.0 + 1e-6, 1.0 + 2e-6), replicates=(20000, 20000)
        )
        inside = sample_counts(slab, np.array([0.0, -0.5]), grid, seed=31, target="H0")
        assert inside.c == inside.b  # Y* never leaves
        np.testing.assert_array_equal(inside.e, inside.d)
        outside = sample_counts(slab, np.array([0.0, 2.5]), grid, seed=31, target="H0")
        assert all(v == 0 for v in outside.e)

    def test_bad_target(self, shell, shell_y, grid):
        with pytest.raises(ConfigError):
            sample_counts(shell, shell_y, grid, seed=1, target="H3")


class TestComplementCounts:
    def test_complement_identities(self, shell_h0_counts):
        comp = complement_counts(shell_h0_counts)
        b = np.asarray(shell_h0_counts.b)
        np.testing.assert_array_equal(np.asarray(comp.c), b - np.asarray(shell_h0_counts.c))
        np.testing.assert_array_equal(
            np.asarray(comp.e),
            b - np.asarray(shell_h0_counts.c) - np.asarray(shell_h0_counts.d)
            + np.asarray(shell_h0_counts.e),
        )
        # complement counts satisfy the same consistency invariants
        MultiscaleCounts(**comp.__dict__)


class TestCsv:
    def test_round_trip(self, shell_h0_counts):
        text = counts_to_csv(shell_h0_counts)
        assert text.splitlines()[1] == "scale_index,sigma2,tau2,B,C,D,E"
        assert counts_from_csv(text) == shell_h0_counts

    def test_round_trip_one_step(self, shell, shell_y):
        grid = default_scale_grid(two_step=False, b=500)
        counts = sample_counts(shell, shell_y, grid, seed=5, target="H1")
        assert counts_from_csv(counts_to_csv(counts)) == counts
