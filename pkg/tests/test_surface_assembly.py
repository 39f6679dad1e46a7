"""
Tests for assembled initial surfaces.

The small M(2,1,1,1,0) surface is shared across the module (see conftest); larger
surfaces are marked slow.
"""

import numpy as np
import pytest

from clifford_gluing.core.errors import InvalidArgumentError, InvariantUndefinedError, MTooSmallError
from clifford_gluing.schemas.surface import InitialSurfaceSpec
from clifford_gluing.services import spherical_geometry as sphere
from clifford_gluing.services import surface_assembly as assembly
from clifford_gluing.services import surface_mesh
from clifford_gluing.services import weierstrass_tower as tower


class TestPlacements:
    """Towers, positioning rotations and straightening regimes."""

    def test_m_has_two_towers(self):
        spots = assembly.tower_placements(InitialSurfaceSpec.M(2, 3, 1, 2, 0))
        assert [spot.name for spot in spots] == ["C1", "C2"]
        assert [spot.m_c for spot in spots] == [6, 12]
        assert spots[0].axis.same_as(sphere.circle_c1())
        assert spots[1].axis.same_as(sphere.circle_c2())

    def test_n_has_extra_towers(self):
        spots = assembly.tower_placements(InitialSurfaceSpec.N(3, 1, 1, 2, 1))
        assert len(spots) == 2 + 6
        assert [spot.k for spot in spots[2:]] == [2] * 6
        assert [spot.m_c for spot in spots[2:4]] == [12, 6]

    def test_extra_towers_run_along_c_prime(self):
        k = 2
        spots = assembly.tower_placements(InitialSurfaceSpec.N(k, 1, 1, 1, 1))
        circles = [sphere.circle_c_prime(j, k) for j in range(1, 2 * k + 1)]
        for spot in spots[2:]:
            assert any(spot.axis.same_as(circle) for circle in circles)

    def test_faithful_regime(self):
        regime, a, x_seam, transverse = assembly.plan_straightening(2, 44, 88, np.pi / 4)
        assert regime == "faithful"
        assert a == pytest.approx(tower.straightening_radius(44))
        assert x_seam == pytest.approx(88 * np.pi / 4)
        assert transverse == 88.0

    def test_compressed_regime(self):
        regime, a, x_seam, transverse = assembly.plan_straightening(2, 1, 2, np.pi / 4, strict=False)
        onset = tower.onset_radius(2)
        assert regime == "compressed"
        assert a == pytest.approx(onset + 1.0)
        assert x_seam == pytest.approx(onset + 3.0)
        assert transverse == pytest.approx(x_seam / (np.pi / 4))

    def test_desk_scale_regimes_keep_band_before_seam(self):
        for m, m_c in ((4, 8), (8, 16), (16, 32)):
            regime, a, x_seam, _ = assembly.plan_straightening(2, m, m_c, np.pi / 4, strict=False)
            assert regime in ("faithful", "clamped", "compressed")
            assert tower.onset_radius(2) < a < x_seam

    def test_uniform_rule_is_shared_across_m(self):
        plans = [assembly.plan_straightening(2, m, 2 * m, np.pi / 4, uniform=True) for m in (4, 8, 16)]
        assert {plan[0] for plan in plans} == {"uniform"}
        for m, (_, a, x_seam, _) in zip((4, 8, 16), plans, strict=True):
            assert a >= tower.straightening_radius(m)
            assert tower.onset_radius(2) < a < x_seam - 1.0

    def test_uniform_rule_keeps_compressed_short_towers(self):
        regime, *_ = assembly.plan_straightening(2, 1, 2, np.pi / 4, uniform=True)
        assert regime == "compressed"

    def test_strict_refuses_desk_scale(self):
        with pytest.raises(MTooSmallError):
            assembly.plan_straightening(2, 1, 2, np.pi / 4, strict=True)


class TestSmallSurface:
    """M(2,1,1,1,0): genus 5."""

    def test_genus(self, small_surface):
        assert assembly.genus(small_surface) == 5
        assert small_surface.spec.expected_genus() == 5

    def test_mesh_is_closed_and_on_sphere(self, small_surface):
        report = surface_mesh.audit(small_surface.mesh)
        assert report.closed_surface
        assert report.consistently_oriented
        assert sphere.on_sphere(small_surface.mesh.vertices, tol=1e-10)

    def test_tags_and_report(self, small_surface):
        mesh = small_surface.mesh
        assert set(mesh.tags) >= {"placement", "axis_distance", "x_local"}
        assert np.all(mesh.tags["axis_distance"] >= 0)
        assert small_surface.report["euler_characteristic"] == -8
        assert small_surface.report["vertices"] == mesh.n_vertices

    def test_chart_data_reproduces_vertices(self, small_surface):
        points = small_surface.chart_points(
            small_surface.vertex_placement,
            small_surface.vertex_element,
            small_surface.vertex_wing,
            small_surface.vertex_param,
        )
        assert np.max(np.abs(points - small_surface.mesh.vertices)) <= 1e-6

    def test_invariant_under_g(self, small_surface):
        spec = small_surface.spec
        group = assembly.surface_group(spec)
        assert len(group) == sphere.expected_group_order(2, 1, "G")
        residuals = assembly.symmetry_residuals(small_surface.mesh, group)
        assert residuals.shape == (len(group),)
        assert residuals.max() <= 2.0 * small_surface.mesh.h

    def test_negative_control_is_not_in_group(self, small_surface):
        control = assembly.negative_control(small_surface.spec)
        assert not any(g.is_close(control) for g in assembly.surface_group(small_surface.spec))

    def test_embedded(self, small_surface):
        report = assembly.embeddedness_check(small_surface.mesh)
        assert report.embedded
        assert report.candidates > 0

    def test_scaffold_on_surface(self, small_surface):
        assert assembly.scaffold_residual(small_surface) <= 2.0 * small_surface.mesh.h

    def test_region_tags(self, small_surface):
        regions = assembly.region_decomposition(small_surface)
        counts = regions.counts()
        assert counts["S[C1]"] > 0
        assert counts["S[C2]"] > 0
        assert np.all(regions.tower < len(small_surface.placements))

    def test_alignment_undefined_for_odd_m(self, small_surface):
        with pytest.raises(InvariantUndefinedError):
            assembly.alignment_invariant(small_surface)

    def test_resolution_floor(self):
        with pytest.raises(InvalidArgumentError):
            assembly.assemble(InitialSurfaceSpec.M(2, 1, 1, 1, 0), 8)


class TestCongruence:
    """Isometries between sigma = 0 and sigma = 1 surfaces."""

    def test_tabulated_isometries(self):
        assert assembly.congruence_isometry(InitialSurfaceSpec.M(2, 1, 1, 1, 0)).is_close(sphere.rotate_c2(np.pi / 2))
        assert assembly.congruence_isometry(InitialSurfaceSpec.M(2, 2, 2, 1, 0)).is_close(
            sphere.hopf_shift(np.pi / 4)
        )

    def test_even_m_odd_n_not_congruent(self):
        with pytest.raises(InvariantUndefinedError):
            assembly.congruence_isometry(InitialSurfaceSpec.M(2, 2, 1, 1, 0))

    def test_n_not_tabulated(self):
        with pytest.raises(InvariantUndefinedError):
            assembly.congruence_isometry(InitialSurfaceSpec.N(2, 1, 1, 1, 1))

    def test_hausdorff(self):
        a = np.array([[0.0, 0.0], [1.0, 0.0]])
        b = np.array([[0.0, 0.0], [1.0, 0.5]])
        assert assembly.hausdorff(a, b) == pytest.approx(0.5)

    @pytest.mark.slow
    def test_sigma_surfaces_congruent(self):
        result = assembly.congruence_residual(InitialSurfaceSpec.M(2, 1, 1, 1, 0), 16)
        assert result["residual"] <= 2.0 * result["h"]


@pytest.mark.slow
class TestGenusMatrix:
    """Genus of larger initial surfaces."""

    @pytest.mark.parametrize(
        "label,expected",
        [
            ("M(2,2,1,1,0)", 9),
            ("M(3,1,1,1,0)", 13),
            ("M(2,1,1,2,1)", 7),
            ("N(2,1,1,1,1,0,0)", 25),
            ("N(2,1,2,1,1,0,0)", 33),
            ("M(3,2,1,2,0)", 37),
            ("N(3,1,1,1,1,0,0)", 61),
        ],
    )
    def test_genus(self, label, expected):
        spec = InitialSurfaceSpec.parse(label)
        assert spec.expected_genus() == expected
        assert assembly.genus(assembly.assemble(spec, 16)) == expected

    def test_n_invariant_under_g_prime(self):
        spec = InitialSurfaceSpec.N(2, 1, 1, 1, 1)
        surface = assembly.assemble(spec, 16)
        group = assembly.surface_group(spec)
        assert len(group) == 32
        assert assembly.symmetry_invariance(surface.mesh, group) <= 2.0 * surface.mesh.h
