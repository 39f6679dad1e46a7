"""
Tests for fundamental forms, curvature estimates and the discrete Jacobi operator.
"""

import numpy as np
import pytest

from clifford_gluing.core.errors import (
    EquivarianceViolationError,
    GraphOverlapError,
    InsufficientSamplesError,
    InvalidArgumentError,
    NearSingularError,
)
from clifford_gluing.schemas.surface import InitialSurfaceSpec
from clifford_gluing.services import curvature_engine as curvature
from clifford_gluing.services import spherical_geometry as sphere
from clifford_gluing.services import surface_mesh
from clifford_gluing.services import weierstrass_tower as tower


@pytest.fixture(scope="module")
def torus():
    return surface_mesh.clifford_torus_mesh(12)


def _grid(lo, hi, n=5):
    u, v = np.meshgrid(np.linspace(lo, hi, n), np.linspace(lo + 0.3, hi + 0.3, n), indexing="ij")
    return u, v


class TestReferencePatches:
    """Closed-form curvatures of standard surfaces in S^3 and R^3."""

    def test_clifford_torus(self):
        forms = curvature.forms_at(curvature.clifford_torus_patch(), *_grid(0.0, 3.0))
        np.testing.assert_allclose(forms.H, 0.0, atol=1e-5)
        np.testing.assert_allclose(forms.norm_sq_a, 2.0, atol=1e-5)
        np.testing.assert_allclose(np.einsum("...i,...i->...", forms.normal, forms.normal), 1.0, atol=1e-12)

    def test_great_sphere_is_totally_geodesic(self):
        forms = curvature.forms_at(curvature.great_sphere_patch(), *_grid(-0.8, 0.8))
        np.testing.assert_allclose(forms.H, 0.0, atol=1e-5)
        np.testing.assert_allclose(forms.norm_sq_a, 0.0, atol=1e-5)

    @pytest.mark.parametrize("rho", [0.4, 1.0, 1.3])
    def test_distance_sphere(self, rho):
        forms = curvature.forms_at(curvature.distance_sphere_patch(rho), *_grid(-0.8, 0.8))
        cot = 1.0 / np.tan(rho)
        np.testing.assert_allclose(np.abs(forms.H), 2.0 * cot, rtol=1e-5)
        np.testing.assert_allclose(forms.norm_sq_a, 2.0 * cot**2, rtol=1e-5, atol=1e-6)

    def test_tower_is_minimal(self):
        u, v = _grid(-0.4, 0.2)
        forms = curvature.forms_at(curvature.euclidean_tower_patch(2), u, v)
        assert np.max(np.abs(forms.H)) <= 1e-6 * np.max(np.sqrt(forms.norm_sq_a))
        assert np.all(forms.norm_sq_a > 0)

    def test_unknown_ambient(self):
        with pytest.raises(InvalidArgumentError):
            curvature.ParametrizedPatch(lambda u, v: u, ambient="hyperbolic")


class TestVariations:
    """Orientation and first variation of area."""

    def test_orientation_flip(self):
        u, v = _grid(-0.5, 0.5)
        result = curvature.orientation_flip_check(curvature.distance_sphere_patch(1.0), u, v)
        assert result["H_sum"] <= 1e-8
        assert result["norm_sq_difference"] <= 1e-8

    def test_flip_negates_normal(self):
        patch = curvature.distance_sphere_patch(0.7)
        u, v = _grid(-0.5, 0.5, 3)
        plus = curvature.forms_at(patch, u, v)
        minus = curvature.forms_at(patch.flipped(), u, v)
        np.testing.assert_allclose(plus.normal, -minus.normal, atol=1e-12)

    def test_first_variation_matches_mean_curvature(self):
        result = curvature.first_variation_check(curvature.distance_sphere_patch(1.0), (-0.5, 0.5), (0.0, 1.0))
        assert abs(result["predicted"]) > 1e-3
        assert result["relative_error"] <= 5e-2

    def test_scaling_needs_two_values(self):
        with pytest.raises(InsufficientSamplesError):
            curvature.mean_curvature_scaling(InitialSurfaceSpec.M(2, 1, 1, 1), m_list=(4, 4))

    @pytest.mark.slow
    def test_scaling_exponent_with_shared_rule(self):
        result = curvature.mean_curvature_scaling(InitialSurfaceSpec.M(2, 4, 1, 1, 0), m_list=(4, 8, 16))
        assert result["straightening"] == "uniform"
        assert result["exponent"] <= 0.6
        ratios = result["ratio_sqrt_m"]
        assert max(ratios) <= 2.0 * ratios[0]


class TestDiscreteJacobi:
    """L = Delta + |A|^2 + 2 on the regular Clifford torus mesh."""

    def test_constant_function(self, torus):
        L = curvature.DiscreteJacobi.from_mesh(torus, 2.0)
        assert L.n == torus.n_vertices
        np.testing.assert_allclose(curvature.jacobi_apply(L, np.ones(L.n)), 4.0, atol=1e-10)

    def test_weighted_matrix_is_symmetric(self, torus):
        W = curvature.DiscreteJacobi.from_mesh(torus, 2.0).weighted_matrix()
        assert abs(W - W.T).max() <= 1e-12

    def test_killing_fields_are_in_the_kernel(self, torus):
        L = curvature.DiscreteJacobi.from_mesh(torus, 2.0)
        x = torus.vertices
        for f in (x[:, 0] * x[:, 2], x[:, 0] * x[:, 3], x[:, 1] * x[:, 2], x[:, 1] * x[:, 3]):
            np.testing.assert_allclose(L.apply(f), 0.0, atol=1e-10)

    def test_solve_without_group_is_singular(self, torus, rng):
        L = curvature.DiscreteJacobi.from_mesh(torus, 2.0)
        with pytest.raises(NearSingularError):
            curvature.jacobi_solve(L, rng.standard_normal(L.n))

    def test_zero_forcing(self, torus):
        L = curvature.DiscreteJacobi.from_mesh(torus, 2.0)
        np.testing.assert_array_equal(curvature.jacobi_solve(L, np.zeros(L.n)), 0.0)

    def test_solve_on_invariant_functions(self, torus):
        group = [sphere.rotate_c1(0.0), sphere.rotate_c1(np.pi)]
        L = curvature.DiscreteJacobi.from_mesh(torus, 2.0, group=group)
        v = np.arctan2(torus.vertices[:, 3], torus.vertices[:, 2])
        f = np.cos(2 * v)
        np.testing.assert_allclose(L.project(f), f, atol=1e-12)
        u = curvature.jacobi_solve(L, f)
        eigenvalue = 4.0 - 8.0 * np.cos(np.pi / 12) ** 2
        np.testing.assert_allclose(u, f / eigenvalue, atol=1e-9)

    def test_forcing_without_odd_part(self, torus):
        group = [sphere.rotate_c1(0.0), sphere.rotate_c1(np.pi)]
        L = curvature.DiscreteJacobi.from_mesh(torus, 2.0, group=group)
        v = np.arctan2(torus.vertices[:, 3], torus.vertices[:, 2])
        np.testing.assert_allclose(curvature.jacobi_solve(L, np.cos(v)), 0.0)

    def test_group_must_permute_vertices(self, torus):
        with pytest.raises(EquivarianceViolationError):
            curvature.DiscreteJacobi.from_mesh(torus, 2.0, group=[sphere.rotate_c1(0.1)])

    def test_group_action_commutes_with_operator(self, torus, rng):
        odd_half_turn = sphere.SphereIsometry(sphere.rotate_c1(np.pi).matrix, -1, "half-turn")
        group = [sphere.identity(), odd_half_turn, sphere.swap()]
        L = curvature.DiscreteJacobi.from_mesh(torus, 2.0, group=group)
        u = rng.standard_normal(L.n)
        for index in range(len(group)):
            np.testing.assert_allclose(L.apply(L.apply_group(index, u)), L.apply_group(index, L.apply(u)), atol=1e-10)
        np.testing.assert_allclose(L.apply_group(1, np.ones(L.n)), -1.0)

    def test_euclidean_ambient_has_no_constant(self):
        vertices, triangles = tower.tower_mesh(2, radial=8, angular=5)
        mesh = surface_mesh.SurfaceMesh(np.hstack([vertices, np.zeros((len(vertices), 1))]), triangles)
        norm_sq_a = np.linspace(0.0, 2.0, mesh.n_vertices)
        flat = curvature.DiscreteJacobi.from_mesh(mesh, norm_sq_a, ambient="euclidean")
        curved = curvature.DiscreteJacobi.from_mesh(mesh, norm_sq_a)
        np.testing.assert_array_equal(flat.potential, norm_sq_a)
        np.testing.assert_allclose(flat.apply(np.ones(mesh.n_vertices)), norm_sq_a, atol=1e-8)
        np.testing.assert_allclose(curved.potential - flat.potential, 2.0)

    def test_large_step_overlaps(self, torus, monkeypatch):
        vertices = torus.vertices.copy()
        vertices[:, :2] *= np.cos(0.6) / np.cos(np.pi / 4)
        vertices[:, 2:] *= np.sin(0.6) / np.sin(np.pi / 4)
        mesh = surface_mesh.SurfaceMesh(vertices, torus.triangles)
        L = curvature.DiscreteJacobi.from_mesh(mesh, 2.0)
        monkeypatch.setattr(curvature, "jacobi_solve", lambda L, f: np.full(L.n, 10.0))
        with pytest.raises(GraphOverlapError):
            curvature.perturb_to_minimal(mesh, L)

    def test_perturbation_of_minimal_mesh_stops(self, torus):
        L = curvature.DiscreteJacobi.from_mesh(torus, 2.0)
        result = curvature.perturb_to_minimal(torus, L, tol=1e-8)
        assert result.converged
        assert result.iterations == 0
        assert result.to_dict()["sup_u"] == 0.0


class TestAssembledSurface:
    """Curvature on the small assembled surface."""

    def test_vertex_curvatures_are_finite(self, small_surface):
        H, norm_sq = curvature.vertex_curvatures(small_surface)
        assert H.shape == norm_sq.shape == (small_surface.mesh.n_vertices,)
        assert np.all(np.isfinite(H))
        assert np.all(norm_sq >= -1e-8)

    def test_toral_estimate_keys(self, small_surface):
        report = curvature.verify_toral_estimates(small_surface, samples=8)
        assert set(report) == {"C1", "C2"}
        assert {"sup_weighted_A", "sup_weighted_H", "fitted_rate"} <= set(report["C1"])

    @pytest.mark.slow
    def test_jacobi_solve_on_odd_subspace(self, small_surface, rng):
        L = curvature.jacobi_operator(small_surface)
        f = L.project(rng.standard_normal(L.n))
        u = curvature.jacobi_solve(L, f)
        assert np.linalg.norm(L.apply(u) - f) <= 1e-6 * np.linalg.norm(f)
