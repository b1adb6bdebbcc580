import numpy as np
import pytest

from regionboot.distributions import std_normal_cdf, std_normal_quantile
from regionboot.errors import (
    ConfigError,
    DimensionMismatchError,
    InvalidParameterError,
    UnsupportedOracleError,
)
from regionboot.regions import (
    Cone2D,
    HalfSpace,
    Slab,
    SphericalShell,
    classify,
    exact_bootstrap_prob,
    exact_one_sided_shell,
    exact_p_shell,
    exact_p_slab,
    label_points,
    region_from_dict,
    region_to_dict,
    shell_critical_constants,
    slab_critical_constant,
)

CONE = Cone2D(half_angle=np.pi / 10, orientation=np.pi / 10)


class TestClassify:
    def test_slab_interior(self):
        assert classify(Slab(m=3, d=1.0), [0, 0, 0, -0.5]) == "H0"

    def test_shell_paper_point(self, shell):
        y = np.zeros(4)
        y[0] = 5.9
        assert classify(shell, y) == "H0"

    def test_shell_sides(self, shell):
        assert classify(shell, [7.0, 0, 0, 0]) == "H1"
        assert classify(shell, [1.0, 0, 0, 0]) == "H2"

    def test_half_space(self):
        hs = HalfSpace(m=2, offset=0.0)
        assert classify(hs, [0, 0, -0.1]) == "H0"
        assert classify(hs, [0, 0, 0.1]) == "H1"
        assert classify(hs, [0, 0, 0.0]) == "H0"  # closed boundary

    def test_cone_three_wedges(self):
        assert classify(CONE, [1.0, 0.1]) == "H0"
        assert classify(CONE, [1.0, 1.5]) == "H1"
        assert classify(CONE, [1.0, -0.5]) == "H2"
        assert classify(CONE, [0.0, 0.0]) == "H0"  # vertex

    def test_dimension_mismatch(self, shell):
        with pytest.raises(DimensionMismatchError):
            classify(shell, [1.0, 2.0])

    def test_partition_is_exhaustive_and_exclusive(self, shell):
        rng = np.random.default_rng(5)
        for region in (shell, Slab(m=3, d=1.0), CONE, HalfSpace(m=3)):
            pts = rng.uniform(-8, 8, size=(10**4, region.ambient_dim))
            labels = label_points(region, pts)
            assert labels.min() >= 0 and labels.max() <= 2
            if isinstance(region, HalfSpace):
                assert set(np.unique(labels)) <= {0, 1}


class TestExactBootstrapProb:
    def test_paper_slab(self):
        p = exact_bootstrap_prob(Slab(m=3, d=1.0), [0, 0, 0, -0.1], 1.0)
        np.testing.assert_allclose(p, 0.356, atol=5e-4)

    def test_paper_shell(self, shell, shell_y):
        np.testing.assert_allclose(
            exact_bootstrap_prob(shell, shell_y, 1.0), 0.320, atol=5e-4
        )

    def test_half_space_boundary(self):
        for s2 in (0.3, 1.0, 4.0):
            assert exact_bootstrap_prob(HalfSpace(m=1), [0.0, 0.0], s2) == 0.5

    def test_labels_sum_to_one(self, shell, shell_y):
        rng = np.random.default_rng(8)
        regions = [shell, Slab(m=3, d=1.0), HalfSpace(m=3)]
        for region in regions:
            for _ in range(5):
                y = rng.uniform(-3, 7, region.ambient_dim)
                s2 = float(rng.uniform(0.2, 6.0))
                total = sum(
                    exact_bootstrap_prob(region, y, s2, label=lab)
                    for lab in ("H0", "H1", "H2")
                )
                np.testing.assert_allclose(total, 1.0, atol=1e-9)

    def test_cone_unsupported(self):
        with pytest.raises(UnsupportedOracleError):
            exact_bootstrap_prob(CONE, [1.0, 0.0], 1.0)


class TestSlabCriticalConstant:
    def test_touches_observation_at_its_p_value(self):
        # at alpha = p(y), the nearer rejection boundary sits at y itself
        y_last, d = -0.1, 1.0
        alpha = exact_p_slab(y_last, d)
        np.testing.assert_allclose(slab_critical_constant(alpha, d), y_last, atol=1e-9)

    def test_round_trip(self):
        # the level map is strictly decreasing and hits 1 at c = -d/2, so
        # levels in (0,1) correspond to c > -d/2
        for c0 in (-0.3, 0.0, 0.7, 2.0):
            alpha = float(std_normal_cdf(-c0) + std_normal_cdf(-1.0 - c0))
            np.testing.assert_allclose(
                slab_critical_constant(alpha, 1.0), c0, atol=1e-9
            )

    def test_wide_slab_limit(self):
        # second term vanishes: c -> Phi^{-1}(1 - alpha)
        c = slab_critical_constant(0.05, 50.0)
        np.testing.assert_allclose(c, std_normal_quantile(0.95), atol=1e-9)

    def test_domain(self):
        with pytest.raises(InvalidParameterError):
            slab_critical_constant(0.0, 1.0)


class TestExactPSlab:
    def test_paper_value(self):
        np.testing.assert_allclose(exact_p_slab(-0.1, 1.0), 0.724, atol=5e-4)

    def test_branch_agreement_at_center(self):
        # both branches evaluate to Phi(d/2) + Phi(-d/2) = 1 at the center
        d = 1.3
        center = exact_p_slab(-d / 2, d)
        np.testing.assert_allclose(center, 1.0, atol=1e-12)
        eps = 1e-9
        np.testing.assert_allclose(exact_p_slab(-d / 2 + eps, d), center, atol=1e-8)
        np.testing.assert_allclose(exact_p_slab(-d / 2 - eps, d), center, atol=1e-8)

    def test_mirror_symmetry(self):
        np.testing.assert_allclose(exact_p_slab(-0.9, 1.0), exact_p_slab(-0.1, 1.0))

    def test_nonincreasing_away_from_center(self):
        d = 1.0
        offsets = np.linspace(0, 3, 40)
        vals = [exact_p_slab(-d / 2 + t, d) for t in offsets]
        assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))
        assert max(vals) <= 1.0


class TestShellOracles:
    def test_critical_constants_paper(self):
        c1, c2 = shell_critical_constants(0.05, 6.0, 5.0, 4)
        np.testing.assert_allclose(c1, 1.331, atol=5e-4)
        np.testing.assert_allclose(c2, 1.903, atol=5e-4)

    def test_level_equations_hold(self):
        from regionboot.distributions import noncentral_chisq_cdf

        alpha = 0.05
        c1, c2 = shell_critical_constants(alpha, 6.0, 5.0, 4)
        t1, t2 = 5.0 - c1, 6.0 + c2
        for a in (6.0, 5.0):
            level = noncentral_chisq_cdf(t1**2, 4, a**2) + 1.0 - noncentral_chisq_cdf(
                t2**2, 4, a**2
            )
            np.testing.assert_allclose(level, alpha, atol=1e-10)

    def test_exact_p_paper(self):
        np.testing.assert_allclose(exact_p_shell(5.9, 6.0, 5.0, 4), 0.907, atol=5e-4)

    def test_boundary_consistency(self):
        # at alpha = p(||y||), one rejection threshold touches ||y||
        p = exact_p_shell(5.9, 6.0, 5.0, 4)
        c1, c2 = shell_critical_constants(p, 6.0, 5.0, 4)
        touch = min(abs(5.0 - c1 - 5.9), abs(6.0 + c2 - 5.9))
        assert touch < 1e-5

    def test_inner_outer_solver_consistency(self):
        # at ||y|| = a2 the inner threshold touches, i.e. c1(alpha) = 0
        p = exact_p_shell(5.0, 6.0, 5.0, 4)
        c1, _ = shell_critical_constants(p, 6.0, 5.0, 4)
        assert abs(c1) < 1e-5

    def test_one_sided_paper_values(self):
        np.testing.assert_allclose(exact_one_sided_shell(5.9, 6.0, 4, "outer"), 0.362, atol=5e-4)
        np.testing.assert_allclose(exact_one_sided_shell(5.9, 5.0, 4, "inner"), 0.267, atol=5e-4)

    def test_one_sided_at_boundary(self):
        from regionboot.distributions import noncentral_chisq_cdf

        v = exact_one_sided_shell(6.0, 6.0, 4, "outer")
        np.testing.assert_allclose(v, noncentral_chisq_cdf(36.0, 4, 36.0), atol=1e-12)

    def test_side_validation(self):
        with pytest.raises(ConfigError):
            exact_one_sided_shell(5.9, 6.0, 4, "both")


class TestSerialization:
    def test_round_trip(self, shell):
        for region in (shell, Slab(m=2, d=0.7), HalfSpace(m=4, offset=0.2), CONE):
            data = region_to_dict(region)
            assert data["kind"] in ("half_space", "slab", "spherical_shell", "cone2d")
            assert region_from_dict(data) == region

    def test_bad_kind(self):
        with pytest.raises(ConfigError):
            region_from_dict({"kind": "torus"})

    def test_bad_fields(self):
        with pytest.raises(ConfigError):
            region_from_dict({"kind": "slab", "m": 3, "d": -1.0})
