"""
Triangle meshes on the three-sphere.

Provides:
- SurfaceMesh container with per-vertex tags
- Half-edge audit: watertightness, orientability, connectivity, Euler characteristic
- Consistent orientation by a breadth-first sweep of the dual graph
- Sphere normals (4D cross product) and the discrete Laplacian of the position
- OBJ export via stereographic projection and binary PLY export of raw R^4 data
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import breadth_first_order, connected_components
from scipy.spatial import cKDTree

from clifford_gluing.core.config import settings
from clifford_gluing.core.errors import InvalidArgumentError, NonWatertightError

logger = logging.getLogger("clifford_gluing.mesh")


@dataclass(eq=False)
class SurfaceMesh:
    """
    Vertices in R^4 (on S^3) and oriented triangles.

    Attributes:
        vertices: (n, 4) float array
        triangles: (f, 3) int array, counterclockwise with respect to the normal
        tags: per-vertex arrays keyed by name (tower id, distance to axis, toral id, ...)
        metadata: free-form description of how the mesh was produced
    """

    vertices: np.ndarray
    triangles: np.ndarray
    tags: dict[str, np.ndarray] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.triangles = np.asarray(self.triangles, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 4:
            raise InvalidArgumentError("mesh vertices must be an (n, 4) array")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise InvalidArgumentError("mesh triangles must be an (f, 3) array")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def edges(self) -> np.ndarray:
        """Unique undirected edges, sorted pairs."""
        return unique_edges(self.triangles)[0]

    @property
    def h(self) -> float:
        """Median edge length; the mesh spacing used by residual thresholds."""
        e = self.edges()
        return float(np.median(np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)))

    def edge_lengths(self) -> np.ndarray:
        e = self.edges()
        return np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)

    def flipped(self) -> SurfaceMesh:
        return SurfaceMesh(self.vertices, self.triangles[:, ::-1].copy(), dict(self.tags), dict(self.metadata))

    def triangle_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        a = p[:, 1] - p[:, 0]
        b = p[:, 2] - p[:, 0]
        aa = np.einsum("ij,ij->i", a, a)
        bb = np.einsum("ij,ij->i", b, b)
        ab = np.einsum("ij,ij->i", a, b)
        return 0.5 * np.sqrt(np.maximum(aa * bb - ab**2, 0.0))


# =============================================================================
# Combinatorics
# =============================================================================


def unique_edges(triangles: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Returns:
        (edges, counts, inverse): sorted unique edges, how many triangles use each,
        and for every half-edge (3 per triangle, row-major) the index of its edge.
    """
    half = np.stack([triangles, np.roll(triangles, -1, axis=1)], axis=-1).reshape(-1, 2)
    key = np.sort(half, axis=1)
    edges, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    return edges, counts, inverse.ravel()


@dataclass(frozen=True)
class MeshAudit:
    watertight: bool
    orientable: bool
    consistently_oriented: bool
    n_components: int
    euler_characteristic: int
    boundary_edges: int
    nonmanifold_edges: int
    min_angle_deg: float

    @property
    def closed_surface(self) -> bool:
        return self.watertight and self.orientable and self.n_components == 1

    def to_dict(self) -> dict:
        return {
            "watertight": self.watertight,
            "orientable": self.orientable,
            "consistently_oriented": self.consistently_oriented,
            "n_components": self.n_components,
            "euler_characteristic": self.euler_characteristic,
            "boundary_edges": self.boundary_edges,
            "nonmanifold_edges": self.nonmanifold_edges,
            "min_angle_deg": self.min_angle_deg,
        }


def _dual_graph(triangles: np.ndarray) -> tuple[sparse.csr_matrix, np.ndarray, np.ndarray, np.ndarray]:
    """
    Adjacency of triangles across manifold edges.

    Returns:
        (graph, first, second, agree): the CSR dual graph, the triangle pairs and
        whether each pair traverses its shared edge in opposite directions.
    """
    f = len(triangles)
    half = np.stack([triangles, np.roll(triangles, -1, axis=1)], axis=-1).reshape(-1, 2)
    _, counts, inverse = unique_edges(triangles)
    owner = np.repeat(np.arange(f), 3)
    manifold = counts[inverse] == 2
    order = np.argsort(inverse[manifold], kind="stable")
    idx = np.flatnonzero(manifold)[order]
    first, second = idx[0::2], idx[1::2]
    agree = half[first, 0] == half[second, 1]
    t1, t2 = owner[first], owner[second]
    data = np.ones(2 * len(t1))
    graph = sparse.csr_matrix((data, (np.concatenate([t1, t2]), np.concatenate([t2, t1]))), shape=(f, f))
    return graph, t1, t2, agree


def orient_consistently(triangles: np.ndarray) -> tuple[np.ndarray, bool]:
    """
    Flip triangles so neighbours traverse shared edges oppositely.

    Sweeps every component breadth-first from its lowest triangle. Returns the new
    triangles and whether a consistent orientation exists.
    """
    triangles = np.asarray(triangles, dtype=np.int64)
    f = len(triangles)
    graph, t1, t2, agree = _dual_graph(triangles)
    # sign needed on t2 relative to t1
    relation = {}
    for a, b, ok in zip(t1.tolist(), t2.tolist(), agree.tolist(), strict=True):
        relation[(a, b)] = 1 if ok else -1
        relation[(b, a)] = relation[(a, b)]
    sign = np.zeros(f, dtype=np.int8)
    n_comp, labels = connected_components(graph, directed=False)
    for comp in range(n_comp):
        root = int(np.flatnonzero(labels == comp)[0])
        order, pred = breadth_first_order(graph, root, directed=False, return_predecessors=True)
        sign[root] = 1
        for node in order[1:]:
            parent = pred[node]
            sign[node] = sign[parent] * relation[(int(parent), int(node))]
    expected = np.where(agree, 1, -1)
    orientable = bool(np.all(sign[t1] * sign[t2] == expected))
    out = triangles.copy()
    out[sign < 0] = out[sign < 0][:, ::-1]
    return out, orientable


def _min_angle(mesh: SurfaceMesh) -> float:
    p = mesh.vertices[mesh.triangles]
    angles = []
    for i in range(3):
        a = p[:, (i + 1) % 3] - p[:, i]
        b = p[:, (i + 2) % 3] - p[:, i]
        na = np.linalg.norm(a, axis=1)
        nb = np.linalg.norm(b, axis=1)
        ok = (na > 0) & (nb > 0)
        cos = np.einsum("ij,ij->i", a[ok], b[ok]) / (na[ok] * nb[ok])
        angles.append(np.degrees(np.arccos(np.clip(cos, -1.0, 1.0))))
    joined = np.concatenate(angles)
    return float(joined.min()) if joined.size else 0.0


def audit(mesh: SurfaceMesh) -> MeshAudit:
    """Half-edge audit of a triangle mesh."""
    edges, counts, _ = unique_edges(mesh.triangles)
    graph, t1, t2, agree = _dual_graph(mesh.triangles)
    _, orientable = orient_consistently(mesh.triangles)
    used = np.unique(mesh.triangles)
    vertex_graph = sparse.csr_matrix(
        (np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(mesh.n_vertices, mesh.n_vertices)
    )
    n_comp, labels = connected_components(vertex_graph, directed=False)
    # isolated vertices count as components only if referenced
    n_comp = len(np.unique(labels[used]))
    chi = len(used) - len(edges) + mesh.n_triangles
    report = MeshAudit(
        watertight=bool(np.all(counts == 2)),
        orientable=orientable,
        consistently_oriented=bool(np.all(agree)),
        n_components=int(n_comp),
        euler_characteristic=int(chi),
        boundary_edges=int(np.sum(counts == 1)),
        nonmanifold_edges=int(np.sum(counts > 2)),
        min_angle_deg=_min_angle(mesh),
    )
    logger.debug("Mesh audit: %s", report.to_dict())
    return report


def genus(mesh: SurfaceMesh) -> int:
    """
    Genus of a closed connected orientable mesh, (2 - chi)/2.

    Raises:
        NonWatertightError: If an edge is not shared by exactly two triangles or the
            mesh is disconnected.
    """
    report = audit(mesh)
    if not report.watertight:
        raise NonWatertightError(
            f"mesh has {report.boundary_edges} boundary and {report.nonmanifold_edges} non-manifold edges"
        )
    if report.n_components != 1:
        raise NonWatertightError(f"mesh has {report.n_components} connected components")
    if not report.orientable:
        raise NonWatertightError("mesh is not orientable")
    return (2 - report.euler_characteristic) // 2


# =============================================================================
# Normals and the position Laplacian
# =============================================================================


def sphere_cross(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """nu_l = det[e_l, p, a, b]: the vector orthogonal to p, a, b completing a positive frame."""
    stacked = np.stack([p, a, b], axis=-2)
    out = np.empty(p.shape)
    for l in range(4):
        cols = [c for c in range(4) if c != l]
        out[..., l] = (-1) ** l * np.linalg.det(stacked[..., cols])
    return out


def triangle_normals(mesh: SurfaceMesh, unit: bool = True) -> np.ndarray:
    """Sphere normals of the triangles; unnormalized length is proportional to area."""
    p = mesh.vertices[mesh.triangles]
    centroid = p.mean(axis=1)
    centroid /= np.linalg.norm(centroid, axis=1, keepdims=True)
    nu = sphere_cross(centroid, p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    if unit:
        norm = np.linalg.norm(nu, axis=1, keepdims=True)
        nu = nu / np.where(norm > 0, norm, 1.0)
    return nu


def vertex_normals(mesh: SurfaceMesh) -> np.ndarray:
    """Area-weighted vertex normals, projected to the tangent space of S^3 and normalized."""
    nu = triangle_normals(mesh, unit=False)
    acc = np.zeros_like(mesh.vertices)
    for i in range(3):
        np.add.at(acc, mesh.triangles[:, i], nu)
    acc -= np.einsum("ij,ij->i", acc, mesh.vertices)[:, None] * mesh.vertices
    norm = np.linalg.norm(acc, axis=1, keepdims=True)
    return acc / np.where(norm > 0, norm, 1.0)


def orient_towards(mesh: SurfaceMesh, anchor: np.ndarray, direction: np.ndarray) -> SurfaceMesh:
    """Flip the whole mesh if its normal at the vertex nearest `anchor` points away from `direction`."""
    _, idx = cKDTree(mesh.vertices).query(np.asarray(anchor, dtype=float))
    nu = vertex_normals(mesh)[idx]
    if float(nu @ np.asarray(direction, dtype=float)) < 0:
        logger.debug("Flipping mesh orientation at anchor vertex %d", idx)
        return mesh.flipped()
    return mesh


def cotan_weights(vertices: np.ndarray, triangles: np.ndarray) -> tuple[sparse.csr_matrix, np.ndarray]:
    """
    Cotangent stiffness matrix and mixed-Voronoi vertex areas from chordal edge lengths.

    Returns:
        (C, areas): C is symmetric with zero row sums and C u = sum_j w_ij (u_i - u_j).
    """
    n = len(vertices)
    p = vertices[triangles]
    rows, cols, vals = [], [], []
    areas = np.zeros(n)
    tri_area = np.zeros(len(triangles))
    cots = np.zeros((len(triangles), 3))
    for i in range(3):
        a = p[:, (i + 1) % 3] - p[:, i]
        b = p[:, (i + 2) % 3] - p[:, i]
        dot = np.einsum("ij,ij->i", a, b)
        cross = np.sqrt(np.maximum(np.einsum("ij,ij->i", a, a) * np.einsum("ij,ij->i", b, b) - dot**2, 0.0))
        tri_area = 0.5 * cross
        cots[:, i] = dot / np.where(cross > 0, cross, np.inf)
    for i in range(3):
        j, l = (i + 1) % 3, (i + 2) % 3
        # cot at corner i weights the opposite edge (j, l)
        w = 0.5 * cots[:, i]
        rows += [triangles[:, j], triangles[:, l]]
        cols += [triangles[:, l], triangles[:, j]]
        vals += [w, w]
    weights = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    stiffness = sparse.diags(np.asarray(weights.sum(axis=1)).ravel()) - weights
    # mixed Voronoi areas
    sq = np.stack([np.sum((p[:, (i + 2) % 3] - p[:, (i + 1) % 3]) ** 2, axis=1) for i in range(3)], axis=1)
    obtuse = cots < 0
    any_obtuse = obtuse.any(axis=1)
    for i in range(3):
        j, l = (i + 1) % 3, (i + 2) % 3
        voronoi = (sq[:, j] * cots[:, j] + sq[:, l] * cots[:, l]) / 8.0
        share = np.where(any_obtuse, np.where(obtuse[:, i], tri_area / 2.0, tri_area / 4.0), voronoi)
        np.add.at(areas, triangles[:, i], share)
    return stiffness.tocsr(), areas


def mean_curvature_discrete(mesh: SurfaceMesh, normals: np.ndarray | None = None) -> np.ndarray:
    """H_i = <(Delta x)_i, nu_i> from the cotangent Laplacian of the position."""
    stiffness, areas = cotan_weights(mesh.vertices, mesh.triangles)
    normals = vertex_normals(mesh) if normals is None else normals
    lap = -(stiffness @ mesh.vertices) / np.where(areas > 0, areas, np.inf)[:, None]
    return np.einsum("ij,ij->i", lap, normals)


# =============================================================================
# Export
# =============================================================================


def _pole_frame(pole: np.ndarray) -> np.ndarray:
    basis, _ = np.linalg.qr(np.column_stack([pole, np.eye(4)]))
    return basis[:, 1:4]


def stereographic(points: np.ndarray, pole=None) -> np.ndarray:
    """Stereographic projection from `pole` onto the hyperplane orthogonal to it."""
    pole = np.asarray(settings.STEREO_POLE if pole is None else pole, dtype=float)
    pole = pole / np.linalg.norm(pole)
    height = points @ pole
    tangent = points - height[:, None] * pole
    denom = 1.0 - height
    if np.any(denom < 1e-12):
        raise InvalidArgumentError("a vertex coincides with the projection pole")
    return (tangent @ _pole_frame(pole)) / denom[:, None]


def export_obj(mesh: SurfaceMesh, path: str | Path, pole=None) -> Path:
    """Write an OBJ of the stereographic image; raw R^4 coordinates go in comment lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    projected = stereographic(mesh.vertices, pole)
    with path.open("w") as fh:
        fh.write("# clifford-gluing surface, stereographic projection\n")
        for key, value in mesh.metadata.items():
            fh.write(f"# {key}: {value}\n")
        for raw, v in zip(mesh.vertices, projected, strict=True):
            fh.write("# r4 {:.12g} {:.12g} {:.12g} {:.12g}\n".format(*raw))
            fh.write("v {:.12g} {:.12g} {:.12g}\n".format(*v))
        for tri in mesh.triangles + 1:
            fh.write(f"f {tri[0]} {tri[1]} {tri[2]}\n")
    logger.info("Wrote OBJ with %d vertices and %d faces to %s", mesh.n_vertices, mesh.n_triangles, path)
    return path


def export_euclidean_obj(
    vertices: np.ndarray, triangles: np.ndarray, path: str | Path, metadata: dict | None = None
) -> Path:
    """Write an OBJ of a mesh that already lives in R^3 (the Euclidean towers)."""
    vertices = np.asarray(vertices, dtype=float)
    if vertices.ndim != 2 or vertices.shape[1] != 3:
        raise InvalidArgumentError("Euclidean OBJ export needs (n, 3) vertices")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        fh.write("# clifford-gluing tower\n")
        for key, value in (metadata or {}).items():
            fh.write(f"# {key}: {value}\n")
        for v in vertices:
            fh.write("v {:.12g} {:.12g} {:.12g}\n".format(*v))
        for tri in np.asarray(triangles) + 1:
            fh.write(f"f {tri[0]} {tri[1]} {tri[2]}\n")
    logger.info("Wrote OBJ with %d vertices and %d faces to %s", len(vertices), len(triangles), path)
    return path


def export_ply(mesh: SurfaceMesh, path: str | Path, scalars: dict[str, np.ndarray] | None = None) -> Path:
    """Write a binary little-endian PLY with the four R^4 coordinates and optional per-vertex scalars."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    scalars = scalars or {}
    fields = [("x1", "<f4"), ("y1", "<f4"), ("x2", "<f4"), ("y2", "<f4")]
    fields += [(name, "<f4") for name in scalars]
    vertex = np.empty(mesh.n_vertices, dtype=fields)
    for i, name in enumerate(("x1", "y1", "x2", "y2")):
        vertex[name] = mesh.vertices[:, i]
    for name, values in scalars.items():
        if len(values) != mesh.n_vertices:
            raise InvalidArgumentError(f"scalar field {name} has the wrong length")
        vertex[name] = values
    face = np.empty(mesh.n_triangles, dtype=[("n", "u1"), ("v", "<i4", (3,))])
    face["n"] = 3
    face["v"] = mesh.triangles
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {mesh.n_vertices}"]
    header += [f"property float {name}" for name, _ in fields]
    header += [f"element face {mesh.n_triangles}", "property list uchar int vertex_indices", "end_header"]
    with path.open("wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(vertex.tobytes())
        fh.write(face.tobytes())
    logger.info("Wrote PLY with %d vertices and %d faces to %s", mesh.n_vertices, mesh.n_triangles, path)
    return path


def clifford_torus_mesh(n: int) -> SurfaceMesh:
    """Regular n x n triangulation of the Clifford torus (cos u, sin u, cos v, sin v)/sqrt 2."""
    if n < 3:
        raise InvalidArgumentError("torus mesh needs n >= 3")
    t = 2 * np.pi * np.arange(n) / n
    u, v = np.meshgrid(t, t, indexing="ij")
    vertices = np.stack([np.cos(u), np.sin(u), np.cos(v), np.sin(v)], axis=-1).reshape(-1, 4) / np.sqrt(2.0)
    idx = np.arange(n * n).reshape(n, n)
    a = idx
    b = np.roll(idx, -1, axis=0)
    c = np.roll(np.roll(idx, -1, axis=0), -1, axis=1)
    d = np.roll(idx, -1, axis=1)
    triangles = np.concatenate(
        [np.stack([a, b, c], axis=-1).reshape(-1, 3), np.stack([a, c, d], axis=-1).reshape(-1, 3)]
    )
    return SurfaceMesh(vertices, triangles, metadata={"surface": "clifford-torus", "n": n})


def closest_point_on_triangles(p: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """
    Closest points on triangles (a, b, c) to points p, by Voronoi-region tests.

    Only dot products are used, so the routine works in any dimension.
    """
    ab, ac, ap = b - a, c - a, p - a
    d1 = np.einsum("...i,...i->...", ab, ap)
    d2 = np.einsum("...i,...i->...", ac, ap)
    bp = p - b
    d3 = np.einsum("...i,...i->...", ab, bp)
    d4 = np.einsum("...i,...i->...", ac, bp)
    cp = p - c
    d5 = np.einsum("...i,...i->...", ab, cp)
    d6 = np.einsum("...i,...i->...", ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = va + vb + vc
        v_in = np.where(denom != 0, vb / denom, 0.0)
        w_in = np.where(denom != 0, vc / denom, 0.0)
        out = a + v_in[..., None] * ab + w_in[..., None] * ac
        # edge bc
        on_bc = (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)
        t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        out = np.where(on_bc[..., None], b + np.nan_to_num(t)[..., None] * (c - b), out)
        # edge ac
        on_ac = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
        t = d2 / (d2 - d6)
        out = np.where(on_ac[..., None], a + np.nan_to_num(t)[..., None] * ac, out)
        # edge ab
        on_ab = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
        t = d1 / (d1 - d3)
        out = np.where(on_ab[..., None], a + np.nan_to_num(t)[..., None] * ab, out)
    out = np.where(((d6 >= 0) & (d5 <= d6))[..., None], c, out)
    out = np.where(((d3 >= 0) & (d4 <= d3))[..., None], b, out)
    out = np.where(((d1 <= 0) & (d2 <= 0))[..., None], a, out)
    return out


def distance_to_mesh(points: np.ndarray, mesh: SurfaceMesh, candidates: int = 12) -> np.ndarray:
    """Chordal distance from each point to the nearest of its candidate triangles (by centroid)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    tri = mesh.vertices[mesh.triangles]
    candidates = min(candidates, mesh.n_triangles)
    _, idx = cKDTree(tri.mean(axis=1)).query(points, k=candidates)
    idx = idx.reshape(len(points), -1)
    p = np.repeat(points[:, None, :], idx.shape[1], axis=1)
    t = tri[idx]
    closest = closest_point_on_triangles(p, t[..., 0, :], t[..., 1, :], t[..., 2, :])
    return np.min(np.linalg.norm(closest - p, axis=-1), axis=1)
