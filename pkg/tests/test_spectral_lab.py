"""
Tests for the radial modes, hemisphere counts, strip solver and flat torus tables.
"""

import numpy as np
import pytest
from scipy import integrate

from clifford_gluing.core.errors import EquivarianceViolationError, InvalidArgumentError, NoRootError
from clifford_gluing.services import spectral_lab as spectral
from clifford_gluing.services import weierstrass_tower as tower


class TestRadialModes:
    """Closed-form separated solutions on the tower hemisphere."""

    def test_mode_validation(self):
        with pytest.raises(InvalidArgumentError):
            spectral.RadialMode(1)
        with pytest.raises(InvalidArgumentError):
            spectral.RadialMode(2, lam=1.0, kind="u_0prime")
        with pytest.raises(InvalidArgumentError):
            spectral.RadialMode(3, lam=1.0, kind="u_km1prime")

    def test_values_at_the_equator(self):
        assert spectral.radial_eigenfunction(spectral.RadialMode(2, 0, 0.0), 1.0) == pytest.approx(0.0)
        assert spectral.radial_eigenfunction(spectral.RadialMode(3, 2, 2.0), 1.0) == pytest.approx(2.0)
        assert spectral.radial_eigenfunction(spectral.RadialMode(2, kind="u_0prime"), 1.0) == pytest.approx(1.0)

    def test_vectorized(self):
        r = np.linspace(0.1, 1.0, 5)
        values = spectral.radial_eigenfunction(spectral.RadialMode(2, 2, 2.0), r)
        assert values.shape == r.shape

    def test_rejects_nonpositive_radius(self):
        with pytest.raises(InvalidArgumentError):
            spectral.radial_eigenfunction(spectral.RadialMode(2), 0.0)

    def test_derivative_at_equator(self):
        mode = spectral.RadialMode(2, 0, 0.0)
        # u_0 = -(r^2 - 1)/(r^2 + 1) has derivative -1 at r = 1
        assert spectral.radial_derivative(mode, 1.0) == pytest.approx(-1.0, abs=1e-6)
        assert spectral.radial_derivative(mode, 0.5) == pytest.approx(-4 * 0.5 / (1.25**2), abs=1e-6)

    def test_potential(self):
        assert spectral.cylinder_potential(2, 0.0) == pytest.approx(2.0)
        assert spectral.cylinder_potential(3, -20.0) == pytest.approx(0.0, abs=1e-12)

    def test_factorization(self):
        report = spectral.factorization_check(2, seed=1)
        assert report["passed"], report
        assert set(report["modes"]) == {0, 2, 4, 6, 8}
        assert report["worst"] <= report["bound"]
        assert report["worst"] >= max(report["modes"].values())


class TestRoots:
    """Roots of the annulus eigenvalue conditions."""

    def test_monotonicity(self):
        certificate = spectral.monotonicity_certificate(-3.0)
        assert certificate["strictly_monotone"]
        assert certificate["even_defect"] <= 1e-15
        with pytest.raises(InvalidArgumentError):
            spectral.monotonicity_certificate(0.0)

    @pytest.mark.parametrize("k", [2, 3, 4])
    def test_dirichlet_root_is_k_minus_one(self, k):
        assert spectral.dirichlet_root(k, 1e-3) == pytest.approx(k - 1, abs=1e-8)

    def test_neumann_root(self):
        result = spectral.neumann_negative_root(2, 1e-3)
        assert result["root"] == pytest.approx(1.0, abs=1e-2)
        assert result["limit"] == 1
        assert result["sign_changes"] == 1
        assert result["solver_agreement"] <= 1e-8

    def test_neumann_root_near_limit_for_small_eps(self):
        result = spectral.neumann_negative_root(3, 1e-2)
        assert result["root"] == pytest.approx(result["limit"], abs=1e-6)

    def test_neumann_root_approaches_limit_monotonically(self):
        gaps = [abs(spectral.neumann_negative_root(2, np.exp(-t))["root"] - 1.0) for t in (5.0, 10.0, 20.0)]
        assert gaps[0] > 1e-6
        assert all(later <= earlier + 1e-9 for earlier, later in zip(gaps, gaps[1:]))
        assert gaps[-1] <= 1e-8

    def test_neumann_without_root(self):
        with pytest.raises(NoRootError):
            spectral.neumann_negative_root(2, 0.9)

    def test_eps_range(self):
        with pytest.raises(InvalidArgumentError):
            spectral.neumann_negative_root(2, 1.0)
        with pytest.raises(InvalidArgumentError):
            spectral.dirichlet_root(2, 0.0)


class TestHemisphere:
    """Nullity and index of the hemisphere for k = 2."""

    def test_counts_k2(self):
        counts = spectral.hemisphere_counts(2, 1e-3)
        assert counts.dirichlet == {"nullity": 1, "negative": 0}
        assert counts.neumann == {"nullity": 0, "negative": 1}
        assert counts.negative_modes("neumann") == [0]
        assert counts.skipped == []

    def test_to_dict(self):
        payload = spectral.hemisphere_counts(2, 1e-3, l_max=4).to_dict()
        assert [mode["ell"] for mode in payload["modes"]] == [0, 2, 4]
        assert payload["k"] == 2

    def test_stability(self):
        assert spectral.hemisphere_stability(2, 1e-3)["stable"]

    def test_eps_range(self):
        with pytest.raises(InvalidArgumentError):
            spectral.hemisphere_counts(2, 2.0)

    def test_eta_factor_at_pole(self):
        conformal, potential = spectral.eta_factor(3, 0.0)
        assert conformal == pytest.approx(4 / 9)

    def test_eta_factor_k2_potential_is_constant(self):
        w = np.array([0.0, 0.3 + 0.1j, -0.5j, 0.7])
        _, potential = spectral.eta_factor(2, w)
        np.testing.assert_allclose(potential, 2.0)

    @pytest.mark.parametrize("k", [2, 3])
    def test_eta_factor_matches_round_metric(self, k):
        w = np.array([0.1, 0.2 + 0.3j, -0.4 + 0.1j, 0.5j])
        conformal, _ = spectral.eta_factor(k, w)
        product = conformal * k * k * tower.tower_metric_density(k, w)
        np.testing.assert_allclose(product, 4 / (1 + np.abs(w) ** 2) ** 2, rtol=1e-12)

    def test_potential_sup_k2(self):
        assert spectral.potential_sup(2) == pytest.approx(2.0)


class TestStrip:
    """Dirichlet Poisson problem on the strip."""

    def test_green_function(self):
        X, Y = 2.0, 0.5
        x = np.linspace(0.0, X * np.pi, 7)
        G = spectral.strip_green(1, X, Y, x[:, None], x[None, :])
        np.testing.assert_allclose(G, G.T, atol=1e-15)
        np.testing.assert_allclose(G[0], 0.0, atol=1e-15)
        np.testing.assert_allclose(G[:, -1], 0.0, atol=1e-15)
        assert np.all(G[1:-1, 1:-1] < 0)

    def test_green_closed_form(self):
        X, Y, n, x, xp = 1.5, 0.5, 2, 1.0, 3.0
        c = n / Y
        expected = -np.sinh(c * x) * np.sinh(c * (X * np.pi - xp)) / (c * np.sinh(c * X * np.pi))
        assert spectral.strip_green(n, X, Y, x, xp) == pytest.approx(expected, rel=1e-12)

    def test_green_survives_wide_strips(self):
        value = spectral.strip_green(1, 100.0, 0.01, 150.0, 150.0)
        assert np.isfinite(value)
        assert value == pytest.approx(-0.005, rel=1e-9)

    def test_green_validation(self):
        with pytest.raises(InvalidArgumentError):
            spectral.strip_green(0, 2.0, 0.5, 1.0, 1.0)
        with pytest.raises(InvalidArgumentError):
            spectral.strip_green(1, 2.0, 0.5, 7.0, 1.0)

    def test_problem_needs_wide_strip(self):
        with pytest.raises(InvalidArgumentError):
            spectral.StripProblem(0.5, 0.5, spectral.bump_forcing(0.5, 0.5, 0.2))

    def test_even_forcing_rejected(self):
        problem = spectral.StripProblem(4.0, 0.5, lambda x, y: np.cos(y / 0.5) * np.ones_like(x))
        with pytest.raises(EquivarianceViolationError):
            spectral.strip_solve(problem)

    def test_bump_forcing_is_odd(self):
        problem = spectral.StripProblem(4.0, 0.5, spectral.bump_forcing(0.5, 2 * np.pi, 3.0, modes=(1, 3)))
        assert spectral.check_equivariance(problem) <= 1e-10

    def test_agrees_with_finite_differences(self):
        Y = 0.5
        problem = spectral.StripProblem(4.0, Y, spectral.bump_forcing(Y, 2 * np.pi, 3.0))
        assert spectral.strip_oracle_agreement(problem) <= 1e-3

    def test_solution_vanishes_on_boundary(self):
        problem = spectral.StripProblem(4.0, 0.5, spectral.bump_forcing(0.5, 2 * np.pi, 3.0))
        y, values = spectral.strip_solve(problem).grid()
        np.testing.assert_allclose(values[[0, -1]], 0.0, atol=1e-12)
        np.testing.assert_allclose(values[:, 0], 0.0, atol=1e-12)

    def test_decay_rate(self):
        Y, X = 0.5, 8.0
        center, half_width = X * np.pi / 2, 2.0
        problem = spectral.StripProblem(X, Y, spectral.bump_forcing(Y, center, half_width))
        rate = spectral.strip_decay_rate(spectral.strip_solve(problem), center - half_width)
        assert rate == pytest.approx(1 / Y, rel=5e-2)

    @pytest.mark.parametrize("n", [1, 3])
    def test_green_function_inverts_the_mode_operator(self, n):
        X, Y, center, half_width, x_prime = 2.0, 0.5, 3.0, 1.0, 2.7
        c = n / Y

        def v(x):
            t = (x - center) / half_width
            return np.exp(-1.0 / (1.0 - t * t)) if abs(t) < 1 else 0.0

        def operator_v(x):
            t = (x - center) / half_width
            value = v(x)
            if value == 0.0:
                return 0.0
            q = 1.0 - t * t
            g1 = -2.0 * t / q**2
            g2 = -2.0 / q**2 - 8.0 * t * t / q**3
            return value * (g1 * g1 + g2) / half_width**2 - c * c * value

        def integrand(x):
            return spectral.strip_green(n, X, Y, x, x_prime) * operator_v(x)

        lo, hi = center - half_width, center + half_width
        total = sum(
            integrate.quad(integrand, a, b, epsabs=1e-13, epsrel=1e-12, limit=200)[0]
            for a, b in ((lo, x_prime), (x_prime, hi))
        )
        assert total == pytest.approx(v(x_prime), abs=1e-6)

    def test_solution_is_odd_under_both_reflections(self):
        Y = 0.5
        problem = spectral.StripProblem(4.0, Y, spectral.bump_forcing(Y, 2 * np.pi, 3.0, modes=(1, 2, 5)))
        solution = spectral.strip_solve(problem)
        y = np.linspace(0.05, Y * np.pi - 0.05, 9)
        scale = np.max(np.abs(solution.at(y)))
        np.testing.assert_allclose(solution.at(-y), -solution.at(y), atol=1e-10 * scale)
        np.testing.assert_allclose(solution.at(2 * Y * np.pi - y), -solution.at(y), atol=1e-10 * scale)

    def test_doubling_the_mode_cutoff(self):
        Y, center, half_width = 0.5, 2 * np.pi, 3.0
        bump = spectral.bump_forcing(Y, center, half_width)

        def forcing(x, y):
            # all odd modes in y, geometrically decaying
            return bump(x, y) * np.exp(np.cos(2 * np.asarray(y) / Y))

        problem = spectral.StripProblem(4.0, Y, forcing)
        y = np.linspace(0.0, Y * np.pi, 33)
        coarse = spectral.strip_solve(problem, modes=16).at(y)
        fine = spectral.strip_solve(problem, modes=32).at(y)
        assert np.max(np.abs(fine - coarse)) <= 1e-8

    def test_constants_do_not_grow(self):
        assert spectral.sup_norm_constants(0.5)["relative_spread"] <= 1e-2


class TestFlatTorus:
    """Kernel of Delta + 4 and the symmetric eigenvalue tables."""

    def test_eigenvalue_lists(self):
        assert spectral.eigenvalue_list("square_dirichlet", 10) == [2, 5, 8, 10]
        assert spectral.eigenvalue_list("half_square_dirichlet", 20) == [5, 8, 13, 17, 20]
        assert spectral.eigenvalue_list("eighth_rectangle_dirichlet", 20) == [17, 20]
        assert spectral.eigenvalue_list("rectangular_torus", 20) == [0, 2, 8, 10, 16, 18]

    def test_four_is_never_an_eigenvalue(self):
        for family in spectral.EIGENVALUE_FAMILIES:
            assert 4 not in spectral.eigenvalue_list(family)

    def test_unknown_family(self):
        with pytest.raises(KeyError):
            spectral.eigenvalue_list("disc")

    def test_rectangle_gap(self):
        report = spectral.rectangle_dirichlet_counts(np.pi, np.pi, n=60)
        assert report["gap_to_target"] > 0.5
        assert min(abs(value - 2.0) for value in report["eigenvalues"]) <= 1e-2

    def test_kernel_report(self):
        report = spectral.flat_torus_kernel_report(2, resolution=16)
        assert report["passed"]
        assert set(report["kernel_residuals"]) == {"sin*sin", "sin*cos", "cos*sin", "cos*cos"}
        assert all(report["excludes_4"].values())

    def test_kernel_report_needs_k2(self):
        with pytest.raises(InvalidArgumentError):
            spectral.flat_torus_kernel_report(3)
