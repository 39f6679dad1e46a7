"""
Tests for mesh audits, orientation, the cotangent Laplacian and mesh export.
"""

import numpy as np
import pytest

from clifford_gluing.core.errors import InvalidArgumentError, NonWatertightError
from clifford_gluing.services import surface_mesh


@pytest.fixture(scope="module")
def torus():
    return surface_mesh.clifford_torus_mesh(12)


class TestAudit:
    """Half-edge audit and genus."""

    def test_clifford_torus_is_closed_genus_one(self, torus):
        report = surface_mesh.audit(torus)
        assert report.closed_surface
        assert report.consistently_oriented
        assert report.euler_characteristic == 0
        assert report.boundary_edges == 0
        assert report.nonmanifold_edges == 0
        assert surface_mesh.genus(torus) == 1

    def test_counts(self, torus):
        assert torus.n_vertices == 144
        assert torus.n_triangles == 288
        assert len(torus.edges()) == 3 * 144

    def test_hole_is_not_watertight(self, torus):
        holed = surface_mesh.SurfaceMesh(torus.vertices, torus.triangles[1:])
        report = surface_mesh.audit(holed)
        assert not report.watertight
        assert report.boundary_edges == 3
        with pytest.raises(NonWatertightError):
            surface_mesh.genus(holed)

    def test_two_components(self, torus):
        n = torus.n_vertices
        doubled = surface_mesh.SurfaceMesh(
            np.concatenate([torus.vertices, torus.vertices]),
            np.concatenate([torus.triangles, torus.triangles + n]),
        )
        assert surface_mesh.audit(doubled).n_components == 2
        with pytest.raises(NonWatertightError, match="components"):
            surface_mesh.genus(doubled)

    def test_shape_validation(self):
        with pytest.raises(InvalidArgumentError):
            surface_mesh.SurfaceMesh(np.zeros((4, 3)), np.zeros((1, 3)))
        with pytest.raises(InvalidArgumentError):
            surface_mesh.SurfaceMesh(np.zeros((4, 4)), np.zeros((1, 4)))

    def test_small_torus_rejected(self):
        with pytest.raises(InvalidArgumentError):
            surface_mesh.clifford_torus_mesh(2)


class TestOrientation:
    """Consistent orientation and normals."""

    def test_scrambled_orientation_is_repaired(self, torus):
        scrambled = torus.triangles.copy()
        scrambled[::3] = scrambled[::3, ::-1]
        assert not surface_mesh.audit(surface_mesh.SurfaceMesh(torus.vertices, scrambled)).consistently_oriented
        repaired, orientable = surface_mesh.orient_consistently(scrambled)
        assert orientable
        assert surface_mesh.audit(surface_mesh.SurfaceMesh(torus.vertices, repaired)).consistently_oriented

    def test_vertex_normals_are_tangent_unit_vectors(self, torus):
        normals = surface_mesh.vertex_normals(torus)
        np.testing.assert_allclose(np.linalg.norm(normals, axis=1), 1.0, atol=1e-12)
        np.testing.assert_allclose(np.einsum("ij,ij->i", normals, torus.vertices), 0.0, atol=1e-12)

    def test_flip_reverses_normals(self, torus):
        np.testing.assert_allclose(
            surface_mesh.vertex_normals(torus.flipped()), -surface_mesh.vertex_normals(torus), atol=1e-12
        )

    def test_orient_towards(self, torus):
        anchor = torus.vertices[0]
        direction = surface_mesh.vertex_normals(torus)[0]
        assert surface_mesh.orient_towards(torus, anchor, direction) is torus
        flipped = surface_mesh.orient_towards(torus, anchor, -direction)
        np.testing.assert_array_equal(flipped.triangles, torus.triangles[:, ::-1])


class TestCotanLaplacian:
    """Cotangent weights on the regular torus grid."""

    def test_rows_sum_to_zero(self, torus):
        stiffness, areas = surface_mesh.cotan_weights(torus.vertices, torus.triangles)
        np.testing.assert_allclose(np.asarray(stiffness.sum(axis=1)).ravel(), 0.0, atol=1e-12)
        assert np.all(areas > 0)
        assert abs(stiffness - stiffness.T).max() <= 1e-14

    def test_coordinate_functions_are_eigenfunctions(self, torus):
        stiffness, areas = surface_mesh.cotan_weights(torus.vertices, torus.triangles)
        f = np.sqrt(2.0) * torus.vertices[:, 0]
        laplacian = -(stiffness @ f) / areas
        np.testing.assert_allclose(laplacian, -2.0 * f, atol=1e-10)

    def test_torus_is_discretely_minimal(self, torus):
        H = surface_mesh.mean_curvature_discrete(torus)
        assert np.max(np.abs(H)) <= 1e-10


class TestGeometryQueries:
    """Closest points and distances to a mesh."""

    def test_closest_point_regions(self):
        a, b, c = np.array([0.0, 0.0]), np.array([1.0, 0.0]), np.array([0.0, 1.0])
        points = np.array([[1.0, 1.0], [0.2, 0.2], [-1.0, -1.0], [2.0, -0.5]])
        closest = surface_mesh.closest_point_on_triangles(points, a, b, c)
        np.testing.assert_allclose(closest, [[0.5, 0.5], [0.2, 0.2], [0.0, 0.0], [1.0, 0.0]], atol=1e-15)

    def test_vertices_have_zero_distance(self, torus):
        distances = surface_mesh.distance_to_mesh(torus.vertices[::7], torus)
        np.testing.assert_allclose(distances, 0.0, atol=1e-14)


class TestExport:
    """OBJ and PLY export."""

    def test_stereographic_rejects_pole(self):
        with pytest.raises(InvalidArgumentError):
            surface_mesh.stereographic(np.array([[0.0, 0.0, 0.0, -1.0]]))

    def test_stereographic_fixes_equator(self):
        points = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]])
        projected = surface_mesh.stereographic(points, [0.0, 0.0, 0.0, 1.0])
        np.testing.assert_allclose(np.linalg.norm(projected, axis=1), 1.0)

    def test_obj(self, torus, tmp_path):
        path = surface_mesh.export_obj(torus, tmp_path / "sub" / "torus.obj")
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# clifford-gluing surface")
        assert sum(line.startswith("v ") for line in lines) == torus.n_vertices
        assert sum(line.startswith("# r4 ") for line in lines) == torus.n_vertices
        assert sum(line.startswith("f ") for line in lines) == torus.n_triangles
        assert "# surface: clifford-torus" in lines

    def test_euclidean_obj(self, tmp_path):
        vertices = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        path = surface_mesh.export_euclidean_obj(vertices, np.array([[0, 1, 2]]), tmp_path / "t.obj", {"k": 2})
        lines = path.read_text().splitlines()
        assert lines[:2] == ["# clifford-gluing tower", "# k: 2"]
        assert lines[-1] == "f 1 2 3"

    def test_euclidean_obj_needs_three_columns(self, torus, tmp_path):
        with pytest.raises(InvalidArgumentError):
            surface_mesh.export_euclidean_obj(torus.vertices, torus.triangles, tmp_path / "bad.obj")

    def test_ply(self, torus, tmp_path):
        scalars = {"H": np.zeros(torus.n_vertices), "A2": np.full(torus.n_vertices, 2.0)}
        path = surface_mesh.export_ply(torus, tmp_path / "torus.ply", scalars)
        data = path.read_bytes()
        header, body = data.split(b"end_header\n", 1)
        assert header.startswith(b"ply\nformat binary_little_endian 1.0")
        assert f"element vertex {torus.n_vertices}".encode() in header
        assert b"property float A2" in header
        assert len(body) == torus.n_vertices * 4 * 6 + torus.n_triangles * (1 + 3 * 4)

    def test_ply_scalar_length(self, torus, tmp_path):
        with pytest.raises(InvalidArgumentError):
            surface_mesh.export_ply(torus, tmp_path / "bad.ply", {"H": np.zeros(3)})
