"""
Initial surfaces M and N as watertight triangle meshes on S^3.

Each intersection circle C gets a truncated tower with straightened wings, scaled by
1/m_C, mapped by Phi and positioned by a rotation R[C]. A tower is meshed as the orbit
of one fundamental block under its reflection group; block sides lying on mirror
planes and axis lines are glued by index, and the truncation seams between towers are
glued through an exact integer lattice on the seam circles. No vertex is ever welded
by distance.

Provides:
- assemble(): the mesh plus per-vertex chart data for analytic re-evaluation
- genus, symmetry residuals, region decomposition, embeddedness, alignment
- congruence isometries between sigma = 0 and sigma = 1 surfaces
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import reduce

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from clifford_gluing.core.config import settings
from clifford_gluing.core.errors import (
    InvalidArgumentError,
    InvariantUndefinedError,
    MTooSmallError,
    NonWatertightError,
    SeamMismatchError,
)
from clifford_gluing.schemas.surface import InitialSurfaceSpec, RegionTag
from clifford_gluing.services import spherical_geometry as sphere
from clifford_gluing.services import surface_mesh
from clifford_gluing.services import weierstrass_tower as tower
from clifford_gluing.services.surface_mesh import SurfaceMesh

logger = logging.getLogger("clifford_gluing.assembly")

# seam-key rounding residual above which the lattice is considered broken
_SEAM_TOL = 0.01
_LEVEL_SCALE = 1e6


# =============================================================================
# Tower placements
# =============================================================================


@dataclass(frozen=True, eq=False)
class TowerPlacement:
    """
    One tower of an initial surface.

    Attributes:
        name: label of the intersection circle
        k: number of tori through the circle (k_C)
        m_c: periods wrapped around the circle
        r_trunc: truncation radius in S^3
        position: the rotation R[C] applied after Phi
        axis: the intersection circle, R[C] C1
        regime: faithful, clamped or compressed straightening
        a: straightening radius in tower units
        x_seam: truncation radius in tower units
        transverse: scale dividing the horizontal tower coordinates before Phi
    """

    name: str
    k: int
    m_c: int
    r_trunc: float
    position: sphere.SphereIsometry
    axis: sphere.GreatCircle
    regime: str
    a: float
    x_seam: float
    transverse: float

    def to_sphere(self, points: np.ndarray) -> np.ndarray:
        scaled = np.asarray(points) * np.array([1.0 / self.transverse, 1.0 / self.transverse, 1.0 / self.m_c])
        return self.position.apply(sphere.phi(scaled))

    def evaluate(self, elements: np.ndarray, wing, param) -> np.ndarray:
        """Surface points from chart data: tower-group rows (rot, flip, zsign, shift), chart kind, parameter."""
        local = tower.chart_points(self.k, param, wing, a=self.a)
        return self.to_sphere(apply_elements(self.k, np.asarray(elements), local))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "k_C": self.k,
            "m_C": self.m_c,
            "r_trunc": self.r_trunc,
            "regime": self.regime,
            "a": self.a,
            "x_seam": self.x_seam,
            "transverse_scale": self.transverse,
        }


def plan_straightening(
    k_c: int, m: int, m_c: int, r_trunc: float, strict: bool | None = None, uniform: bool = False
) -> tuple:
    """
    Choose the straightening radius for a tower.

    Faithful when a_m = m pi/4 - 10 clears the onset radius with room for the cutoff
    band before the seam. Otherwise, unless strict, the band is clamped between the
    onset and the seam, or for very short towers the transverse scale is compressed
    so the seam sits at R_k + 3.

    With uniform, any tower with room for the band uses a = max(a_m, clamped a), so a
    sweep over m never switches rules between its members.

    Returns:
        (regime, a, x_seam, transverse)

    Raises:
        MTooSmallError: In strict mode when a_m does not clear the onset radius.
    """
    strict = settings.ASSEMBLY_STRICT if strict is None else strict
    onset = tower.onset_radius(k_c)
    a_m = tower.straightening_radius(m)
    x_seam = m_c * r_trunc
    clamped = max(onset + 0.5, 0.5 * (onset + x_seam) - 0.5)
    if uniform and x_seam >= onset + 2.5:
        return "uniform", min(max(a_m, clamped), x_seam - 1.5), x_seam, float(m_c)
    if a_m > onset and a_m + 1.0 < x_seam:
        return "faithful", a_m, x_seam, float(m_c)
    if strict:
        raise MTooSmallError(f"a_m={a_m:.3f} does not clear onset radius R_{k_c}={onset:.3f}")
    if x_seam >= onset + 2.5:
        return "clamped", clamped, x_seam, float(m_c)
    x_seam = onset + 3.0
    return "compressed", onset + 1.0, x_seam, x_seam / r_trunc


def _placement(name, k_c, m, m_c, r_trunc, position, strict, uniform=False) -> TowerPlacement:
    regime, a, x_seam, transverse = plan_straightening(k_c, m, m_c, r_trunc, strict, uniform)
    if regime not in ("faithful", "uniform"):
        logger.warning(
            "Tower %s (k_C=%d, m_C=%d) uses %s straightening: a=%.3f, seam at %.3f", name, k_c, m_c, regime, a, x_seam
        )
    axis = sphere.GreatCircle(position.matrix @ sphere.circle_c1().e1, position.matrix @ sphere.circle_c1().e2, name)
    return TowerPlacement(name, k_c, m_c, r_trunc, position, axis, regime, a, x_seam, transverse)


def tower_placements(
    spec: InitialSurfaceSpec, strict: bool | None = None, uniform: bool = False
) -> list[TowerPlacement]:
    """The towers of M or N with their positioning rotations and truncation radii."""
    k, m = spec.k, spec.m
    if spec.variant == "M":
        second = sphere.rotate_c2(np.pi / k).power(spec.sigma).compose(sphere.swap())
        return [
            _placement("C1", k, m, k * m * spec.n1, sphere.QUARTER, sphere.identity(), strict, uniform),
            _placement("C2", k, m, k * m * spec.n2, sphere.QUARTER, second, strict, uniform),
        ]
    r_axis = sphere.QUARTER - np.pi / (4 * k)
    placements = [
        _placement("C1", k, m, 2 * k * m * spec.n, r_axis, sphere.identity(), strict, uniform),
        _placement("C2", k, m, 2 * k * m * spec.n, r_axis, sphere.swap(), strict, uniform),
    ]
    for j in range(2 * k):
        n_prime, sigma_prime = (spec.n1p, spec.sigma1p) if j % 2 == 0 else (spec.nm1p, spec.sigmam1p)
        m_c = 2 * k * m * n_prime
        # half a period along the axis
        shift = sphere.hopf_shift(np.pi / m_c).power(sigma_prime)
        position = sphere.rotate_c1(j * np.pi / k).compose(shift).compose(sphere.positioning_rotation())
        placements.append(_placement(f"C'_{j + 1}", 2, m, m_c, np.pi / (4 * k), position, strict, uniform))
    return placements


# =============================================================================
# Fundamental block
# =============================================================================


@dataclass(frozen=True, eq=False)
class FundamentalBlock:
    """
    Structured grid over one fundamental piece of a straightened tower.

    Rows i run from the mirror segment (i = 0) through the core to the interface at the
    onset radius (i = core_rows) and along the wing to the seam (last row). Columns j
    run over heights z_j = (pi/2) j/J from the x-axis line (j = 0) to the top plane.

    Attributes:
        param: chart parameter per grid point (w in the core, q in the wing)
        wing: True where the wing chart is used
        points: normalized straightened tower points, shape (I+1, J+1, 3)
    """

    k: int
    J: int
    core_rows: int
    a: float
    onset: float
    x_seam: float
    param: np.ndarray
    wing: np.ndarray
    points: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.points.shape[0], self.points.shape[1]


def build_block(k: int, J: int, spacing: float, a: float, x_seam: float) -> FundamentalBlock:
    """
    Mesh the fundamental piece: a Coons patch in w for the core, a graph grid for the wing.

    The core patch interpolates the real segment [0, 1], the ray to omega_1, the unit
    arc and the interface curve obtained by wing inversion at the onset radius, so its
    last row coincides with the first wing row.
    """
    onset = tower.onset_radius(k)
    z = np.linspace(0.0, np.pi / 2, J + 1)
    omega1 = tower.roots_of_minus_one(k)[0]
    interface = omega1 + tower.invert_wing(k, np.full(z.shape, onset / k), z / k)
    interface[0] = abs(interface[0]) * omega1
    beta = float(np.angle(interface[-1]))
    interface[-1] = np.exp(1j * beta)

    core_rows = max(2, math.ceil(onset / spacing))
    xi = np.linspace(0.0, 1.0, core_rows + 1)[:, None]
    eta = (z / (np.pi / 2))[None, :]
    w = (
        (1 - eta) * xi * interface[0]
        + eta * np.exp(1j * xi * beta)
        + (1 - xi) * eta
        + xi * interface[None, :]
        - ((1 - xi) * eta + xi * (1 - eta) * interface[0] + xi * eta * interface[-1])
    )
    radius = np.abs(w)
    w = np.where(radius > 1.0, w / np.where(radius > 0, radius, 1.0), w)
    core_points = tower.chart_points(k, w, False)
    core_points[:, 0, 1:] = 0.0
    core_points[:, -1, 2] = np.pi / 2

    wing_rows = max(2, math.ceil((x_seam - onset) / spacing))
    x = np.linspace(onset, x_seam, wing_rows + 1)[1:]
    xx, zz = np.meshgrid(x, z, indexing="ij")
    delta = tower.invert_wing(k, xx / k, zz / k)
    q = tower.wing_chart_parameter(k, delta)
    wing_points = tower.chart_points(k, q, True, a=a)
    wing_points[..., 0] = xx
    wing_points[..., 2] = zz
    wing_points[:, 0, 1] = 0.0

    param = np.concatenate([w, q])
    wing = np.concatenate([np.zeros(w.shape, dtype=bool), np.ones(q.shape, dtype=bool)])
    points = np.concatenate([core_points, wing_points])
    return FundamentalBlock(k, J, core_rows, a, onset, x_seam, param, wing, points)


def _grid_triangles(rows: int, cols: int) -> np.ndarray:
    idx = np.arange(rows * cols).reshape(rows, cols)
    a, b, c, d = idx[:-1, :-1], idx[1:, :-1], idx[1:, 1:], idx[:-1, 1:]
    return np.concatenate([np.stack([a, b, c], -1).reshape(-1, 3), np.stack([a, c, d], -1).reshape(-1, 3)])


def _element_arrays(group: tower.TowerGroup) -> np.ndarray:
    return np.array([[g.rot, g.flip, g.zsign, g.shift] for g in group.elements], dtype=np.int64)


def apply_elements(k: int, elements: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Apply tower-group elements given as rows (rot, flip, zsign, shift), one per point."""
    rot, flip, zsign, shift = (elements[..., i] for i in range(4))
    x, y, z = points[..., 0], points[..., 1], points[..., 2]
    y = np.where(flip == 1, -y, y)
    angle = rot * np.pi / k
    c, s = np.cos(angle), np.sin(angle)
    return np.stack([c * x - s * y, s * x + c * y, zsign * z + shift * np.pi], axis=-1)


# =============================================================================
# Assembly
# =============================================================================


@dataclass(eq=False)
class AssembledSurface:
    """
    An assembled initial surface.

    Per-vertex chart data (placement, group element, chart kind, parameter) allows the
    surface to be re-evaluated analytically around every vertex.
    """

    spec: InitialSurfaceSpec
    mesh: SurfaceMesh
    placements: list[TowerPlacement]
    blocks: list[FundamentalBlock]
    groups: list[tower.TowerGroup]
    vertex_placement: np.ndarray
    vertex_element: np.ndarray
    vertex_wing: np.ndarray
    vertex_param: np.ndarray
    vertex_x: np.ndarray
    vertex_wing_label: np.ndarray
    toral_component: np.ndarray
    lattice: int
    resolution: int
    report: dict = field(default_factory=dict)

    def chart_points(self, placement, element, wing, param) -> np.ndarray:
        """Evaluate the surface from chart data arrays (all of the same shape)."""
        placement = np.asarray(placement)
        param = np.asarray(param, dtype=complex)
        wing = np.broadcast_to(np.asarray(wing, dtype=bool), param.shape)
        element = np.broadcast_to(np.asarray(element), param.shape)
        placement = np.broadcast_to(placement, param.shape)
        out = np.empty(param.shape + (4,))
        for p, (spot, group) in enumerate(zip(self.placements, self.groups, strict=True)):
            mask = placement == p
            if not np.any(mask):
                continue
            out[mask] = spot.evaluate(_element_arrays(group)[element[mask]], wing[mask], param[mask])
        return out


def _z_lattice(placements: list[TowerPlacement], resolution: int) -> tuple[int, int]:
    n_z0 = max(2, resolution // 4)
    lcm = reduce(math.lcm, [p.m_c for p in placements])
    return n_z0, lcm


def _seam_keys(points: np.ndarray, lattice: int) -> np.ndarray:
    z1, z2 = sphere.to_complex(points)
    level = np.rint(np.abs(z2) ** 2 * _LEVEL_SCALE).astype(np.int64)
    a1 = np.angle(z1) * lattice / (2 * np.pi)
    a2 = np.angle(z2) * lattice / (2 * np.pi)
    i1, i2 = np.rint(a1), np.rint(a2)
    worst = float(max(np.max(np.abs(a1 - i1)), np.max(np.abs(a2 - i2))))
    if worst > _SEAM_TOL:
        raise SeamMismatchError(f"seam vertex off the angular lattice by {worst:.3g} lattice units")
    i1 = np.mod(i1.astype(np.int64), lattice)
    i2 = np.mod(i2.astype(np.int64), lattice)
    return (level * lattice + i1) * lattice + i2


def assemble(
    spec: InitialSurfaceSpec, resolution: int | None = None, strict: bool | None = None, uniform: bool = False
) -> AssembledSurface:
    """
    Build the initial surface described by `spec` as a watertight oriented mesh.

    Args:
        spec: M or N data
        resolution: mesh resolution (>= 16); the finest tower gets resolution/4
            height intervals per quarter period
        strict: refuse desk-scale straightening instead of clamping it
        uniform: straighten every tower by the uniform rule of `plan_straightening`

    Raises:
        MTooSmallError: In strict mode when a_m does not exceed the onset radius.
        SeamMismatchError: If the stitched mesh is not watertight.
    """
    resolution = resolution or settings.MESH_RESOLUTION
    if resolution < 16:
        raise InvalidArgumentError("mesh resolution must be at least 16")
    placements = tower_placements(spec, strict, uniform)
    n_z0, lcm = _z_lattice(placements, resolution)
    lattice = 4 * n_z0 * lcm
    logger.info("Assembling %s at resolution %d (%d towers, lattice %d)", spec.label, resolution, len(placements), lattice)

    blocks, groups = [], []
    positions, triangles, pairs = [], [], []
    v_place, v_elem, v_wing, v_param, v_x, v_label = [], [], [], [], [], []
    seam_ids, seam_points, seam_place = [], [], []
    max_rot = 2 * max(p.k for p in placements)
    offset = 0
    for p, spot in enumerate(placements):
        J = n_z0 * lcm // spot.m_c
        block = build_block(spot.k, J, (np.pi / 2) / J, spot.a, spot.x_seam)
        group = tower.tower_group(spot.k, spot.m_c)
        elements = _element_arrays(group)
        rows, cols = block.shape
        nb = rows * cols
        ng = len(group)
        blocks.append(block)
        groups.append(group)

        flat = block.points.reshape(-1, 3)
        moved = apply_elements(spot.k, np.repeat(elements, nb, axis=0), np.tile(flat, (ng, 1)))
        positions.append(spot.to_sphere(moved))

        base = _grid_triangles(rows, cols)
        det = np.where(elements[:, 1] == 1, -1, 1) * elements[:, 2]
        for e in range(ng):
            tris = base if det[e] > 0 else base[:, ::-1]
            triangles.append(tris + offset + e * nb)

        local = np.arange(nb).reshape(rows, cols)
        sides = ((local[0, :], group.mirror_plane), (local[:, 0], group.x_axis_turn), (local[:, -1], group.top_plane))
        for side, generator in sides:
            neighbour = np.array([group.index[group.multiply(g, generator)] for g in group.elements])
            src = offset + np.arange(ng)[:, None] * nb + side[None, :]
            dst = offset + neighbour[:, None] * nb + side[None, :]
            pairs.append(np.stack([src.ravel(), dst.ravel()], axis=1))

        seam_local = local[-1, :]
        seam_global = (offset + np.arange(ng)[:, None] * nb + seam_local[None, :]).ravel()
        seam_ids.append(seam_global)
        seam_place.append(np.full(seam_global.size, p))

        v_place.append(np.full(ng * nb, p))
        v_elem.append(np.repeat(np.arange(ng), nb))
        v_wing.append(np.tile(block.wing.ravel(), ng))
        v_param.append(np.tile(block.param.ravel(), ng))
        v_x.append(np.tile(block.points[..., 0].ravel(), ng))
        v_label.append(p * max_rot + np.repeat(elements[:, 0] % (2 * spot.k), nb))
        logger.debug("Tower %s: block %dx%d, %d replicas, regime %s", spot.name, rows, cols, ng, spot.regime)
        offset += ng * nb

    points = np.concatenate(positions)
    seam_ids = np.concatenate(seam_ids)
    seam_place = np.concatenate(seam_place)
    keys = _seam_keys(points[seam_ids], lattice)
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]
    starts = np.flatnonzero(np.r_[True, sorted_keys[1:] != sorted_keys[:-1]])
    group_of = np.cumsum(np.r_[True, sorted_keys[1:] != sorted_keys[:-1]]) - 1
    place_sorted = seam_place[order]
    lo = np.minimum.reduceat(place_sorted, starts)
    hi = np.maximum.reduceat(place_sorted, starts)
    if np.any(lo == hi):
        raise SeamMismatchError(f"{int(np.sum(lo == hi))} seam vertices have no partner on a neighbouring tower")
    head = seam_ids[order][starts][group_of]
    pairs.append(np.stack([head, seam_ids[order]], axis=1))

    # toral components: wing labels joined at seams
    labels = np.concatenate(v_label)
    n_labels = len(placements) * max_rot
    link = sparse.coo_matrix(
        (np.ones(len(order)), (labels[head], labels[seam_ids[order]])), shape=(n_labels, n_labels)
    )
    _, toral_of_label = connected_components(link, directed=False)

    pairs = np.concatenate(pairs)
    total = len(points)
    graph = sparse.coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(total, total))
    _, merged = connected_components(graph, directed=False)
    _, first = np.unique(merged, return_index=True)
    tris = merged[np.concatenate(triangles)]
    collapsed = (tris[:, 0] == tris[:, 1]) | (tris[:, 1] == tris[:, 2]) | (tris[:, 0] == tris[:, 2])
    if np.any(collapsed):
        logger.debug("Dropping %d collapsed triangles", int(collapsed.sum()))
        tris = tris[~collapsed]

    tris, orientable = surface_mesh.orient_consistently(tris)
    mesh = SurfaceMesh(points[first], tris, metadata={"surface": spec.label, "resolution": resolution})
    check = surface_mesh.audit(mesh)
    if not check.watertight:
        raise SeamMismatchError(
            f"stitched mesh is not watertight ({check.boundary_edges} boundary, {check.nonmanifold_edges} non-manifold)"
        )
    if not orientable:
        raise NonWatertightError("stitched mesh is not orientable")
    mesh = surface_mesh.orient_towards(mesh, np.array([1.0, 0.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0, 0.0]))

    v_place = np.concatenate(v_place)[first]
    v_x = np.concatenate(v_x)[first]
    label_first = labels[first]
    distance = np.empty(len(first))
    for p, spot in enumerate(placements):
        mask = v_place == p
        distance[mask] = sphere.distance_to_circle(mesh.vertices[mask], spot.axis)
    mesh.tags.update({"placement": v_place, "axis_distance": distance, "x_local": v_x})

    surface = AssembledSurface(
        spec=spec,
        mesh=mesh,
        placements=placements,
        blocks=blocks,
        groups=groups,
        vertex_placement=v_place,
        vertex_element=np.concatenate(v_elem)[first],
        vertex_wing=np.concatenate(v_wing)[first],
        vertex_param=np.concatenate(v_param)[first],
        vertex_x=v_x,
        vertex_wing_label=label_first,
        toral_component=toral_of_label,
        lattice=lattice,
        resolution=resolution,
    )
    surface.report = {
        "surface": spec.label,
        "resolution": resolution,
        "vertices": mesh.n_vertices,
        "triangles": mesh.n_triangles,
        "h": mesh.h,
        "euler_characteristic": check.euler_characteristic,
        "min_angle_deg": check.min_angle_deg,
        "towers": [p.to_dict() for p in placements],
    }
    logger.info(
        "Assembled %s: %d vertices, %d triangles, chi=%d",
        spec.label,
        mesh.n_vertices,
        mesh.n_triangles,
        check.euler_characteristic,
    )
    return surface


def genus(mesh: SurfaceMesh | AssembledSurface) -> int:
    """Genus from the Euler characteristic; see surface_mesh.genus."""
    if isinstance(mesh, AssembledSurface):
        mesh = mesh.mesh
    return surface_mesh.genus(mesh)


# =============================================================================
# Symmetry
# =============================================================================


def symmetry_residuals(mesh: SurfaceMesh, group: list[sphere.SphereIsometry]) -> np.ndarray:
    """One-sided Hausdorff distance from g(vertices) to the vertices, per group element."""
    index = cKDTree(mesh.vertices)
    out = np.empty(len(group))
    for i, g in enumerate(group):
        distances, _ = index.query(g.apply(mesh.vertices))
        out[i] = float(np.max(distances))
    return out


def symmetry_invariance(mesh: SurfaceMesh, group: list[sphere.SphereIsometry]) -> float:
    return float(np.max(symmetry_residuals(mesh, group)))


def surface_group(spec: InitialSurfaceSpec) -> list[sphere.SphereIsometry]:
    """G_{k,m} for M, G'_{k,m} for N."""
    return sphere.build_symmetry_group(spec.k, spec.m, "G" if spec.variant == "M" else "G'")


def negative_control(spec: InitialSurfaceSpec) -> sphere.SphereIsometry:
    """R^{pi/2km} about C1, which is not a symmetry of the surface."""
    return sphere.rotate_c1(np.pi / (2 * spec.k * spec.m))


# =============================================================================
# Regions
# =============================================================================


@dataclass(frozen=True, eq=False)
class RegionDecomposition:
    """
    Tower regions S[C] and toral regions S[T] as per-vertex indices into `tags` (-1 for none).
    """

    tags: list[RegionTag]
    tower: np.ndarray
    torus: np.ndarray
    b: float

    def covers(self) -> bool:
        return bool(np.all((self.tower >= 0) | (self.torus >= 0)))

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for i, tag in enumerate(self.tags):
            index = self.tower if tag.kind == "tower" else self.torus
            out[tag.id] = int(np.sum(index == i))
        return out


def region_decomposition(surface: AssembledSurface, b: float | None = None) -> RegionDecomposition:
    """
    Tag vertices by tower region {d(p, C) < a/m_C} and toral region (wing beyond b).

    The constant b is clamped to [R_k, a - 1/2] per tower so that tower and toral
    regions overlap in an annulus.
    """
    b = settings.REGION_B if b is None else b
    mesh = surface.mesh
    tags: list[RegionTag] = []
    tower_idx = np.full(mesh.n_vertices, -1)
    inside_count = np.zeros(mesh.n_vertices, dtype=int)
    for p, spot in enumerate(surface.placements):
        tags.append(RegionTag(kind="tower", id=f"S[{spot.name}]", m_c=spot.m_c, k_c=spot.k))
        inside = sphere.distance_to_circle(mesh.vertices, spot.axis) < spot.a / spot.transverse
        tower_idx[inside] = p
        inside_count += inside
    if np.any(inside_count > 1):
        logger.error("Tower regions overlap at %d vertices", int(np.sum(inside_count > 1)))

    used = np.unique(surface.vertex_wing_label[surface.vertex_wing])
    components = np.unique(surface.toral_component[used])
    torus_tag = {}
    for c in components:
        torus_tag[int(c)] = len(tags)
        tags.append(RegionTag(kind="torus", id=f"S[T{len(torus_tag) - 1}]"))
    torus_idx = np.full(mesh.n_vertices, -1)
    for p, spot in enumerate(surface.placements):
        b_eff = min(max(b, surface.blocks[p].onset), spot.a - 0.5)
        mask = (surface.vertex_placement == p) & surface.vertex_wing & (surface.vertex_x > b_eff)
        comp = surface.toral_component[surface.vertex_wing_label[mask]]
        torus_idx[mask] = [torus_tag[int(c)] for c in comp]
    decomposition = RegionDecomposition(tags, tower_idx, torus_idx, b)
    if not decomposition.covers():
        logger.warning("Region decomposition leaves %d vertices untagged", int(np.sum((tower_idx < 0) & (torus_idx < 0))))
    return decomposition


# =============================================================================
# Embeddedness
# =============================================================================


@dataclass(frozen=True)
class EmbeddednessReport:
    pairs: list[tuple[int, int]]
    degenerate: list[int]
    candidates: int

    @property
    def embedded(self) -> bool:
        return not self.pairs


def _tangent_coordinates(points: np.ndarray, base: np.ndarray) -> np.ndarray:
    """First three coordinates after the Householder reflection sending base to -+e4."""
    sign = np.where(base[:, 3] >= 0, 1.0, -1.0)
    v = base.copy()
    v[:, 3] += sign
    vv = np.einsum("ij,ij->i", v, v)
    proj = np.einsum("pij,pj->pi", points, v)
    moved = points - 2.0 * (proj / vv[:, None])[..., None] * v[:, None, :]
    return moved[..., :3]


def _triangles_overlap(t1: np.ndarray, t2: np.ndarray, tol: float) -> np.ndarray:
    """Separating-axis test for pairs of triangles in R^3; shape (P, 3, 3) each."""
    e1 = np.roll(t1, -1, axis=1) - t1
    e2 = np.roll(t2, -1, axis=1) - t2
    n1 = np.cross(e1[:, 0], e1[:, 1])
    n2 = np.cross(e2[:, 0], e2[:, 1])
    axes = [n1, n2]
    axes += [np.cross(e1[:, i], e2[:, j]) for i in range(3) for j in range(3)]
    axes += [np.cross(n1, e1[:, i]) for i in range(3)]
    axes += [np.cross(n2, e2[:, j]) for j in range(3)]
    separated = np.zeros(len(t1), dtype=bool)
    for axis in axes:
        length = np.linalg.norm(axis, axis=1)
        usable = length > 1e-14
        unit = axis / np.where(usable, length, 1.0)[:, None]
        p1 = np.einsum("pij,pj->pi", t1, unit)
        p2 = np.einsum("pij,pj->pi", t2, unit)
        gap = (p1.max(axis=1) < p2.min(axis=1) + tol) | (p2.max(axis=1) < p1.min(axis=1) + tol)
        separated |= usable & gap
    return ~separated


def embeddedness_check(mesh: SurfaceMesh, chunk: int = 200_000) -> EmbeddednessReport:
    """
    Find non-adjacent intersecting triangle pairs.

    Broad phase: centroid pairs closer than twice the largest centroid-to-vertex radius.
    Narrow phase: exact separating-axis test after projecting both triangles to the
    tangent space of S^3 at their common midpoint. Degenerate triangles are reported
    separately and never crash the test.
    """
    tri = mesh.vertices[mesh.triangles]
    centroid = tri.mean(axis=1)
    radius = np.max(np.linalg.norm(tri - centroid[:, None, :], axis=-1))
    areas = mesh.triangle_areas()
    h = mesh.h if mesh.n_triangles else 1.0
    degenerate = np.flatnonzero(areas <= 1e-10 * h * h)
    if degenerate.size:
        logger.warning("Embeddedness check: %d degenerate triangles", degenerate.size)
    candidates = cKDTree(centroid).query_pairs(2.0 * radius, output_type="ndarray")
    if candidates.size:
        shared = (mesh.triangles[candidates[:, 0]][:, :, None] == mesh.triangles[candidates[:, 1]][:, None, :]).any(
            axis=(1, 2)
        )
        candidates = candidates[~shared]
    hits = []
    tol = 1e-10 * h
    for start in range(0, len(candidates), chunk):
        part = candidates[start : start + chunk]
        base = centroid[part[:, 0]] + centroid[part[:, 1]]
        base /= np.linalg.norm(base, axis=1, keepdims=True)
        t1 = _tangent_coordinates(tri[part[:, 0]], base)
        t2 = _tangent_coordinates(tri[part[:, 1]], base)
        hits.append(part[_triangles_overlap(t1, t2, tol)])
    found = np.concatenate(hits) if hits else np.empty((0, 2), dtype=int)
    logger.info("Embeddedness check: %d candidate pairs, %d intersecting", len(candidates), len(found))
    return EmbeddednessReport([tuple(map(int, p)) for p in found], degenerate.tolist(), int(len(candidates)))


# =============================================================================
# Alignment and congruence
# =============================================================================


def alignment_values(surface: AssembledSurface) -> list[dict]:
    """
    Normal signs at both ends of every scaffold arc from C1 to C2.

    The normal at a 2km-th root of unity on C1 or C2 is positive if it points in the
    positive direction of that circle.
    """
    spec = surface.spec
    k, m = spec.k, spec.m
    mesh = surface.mesh
    normals = surface_mesh.vertex_normals(mesh)
    index = cKDTree(mesh.vertices)
    rows = []
    for j in range(2 * k * m):
        phi1 = j * np.pi / (k * m)
        for ell in range(k):
            phi2 = phi1 + ell * np.pi / k
            p = sphere.from_complex(np.exp(1j * phi1), 0.0)
            q = sphere.from_complex(0.0, np.exp(1j * phi2))
            tp = sphere.from_complex(1j * np.exp(1j * phi1), 0.0)
            tq = sphere.from_complex(0.0, 1j * np.exp(1j * phi2))
            (dp, ip), (dq, iq) = index.query(p), index.query(q)
            if max(dp, dq) > 1e-9:
                raise SeamMismatchError("scaffold arc endpoints are not mesh vertices")
            sp = int(np.sign(normals[ip] @ tp))
            sq = int(np.sign(normals[iq] @ tq))
            rows.append({"phi1": phi1, "phi2": phi2, "c1_sign": sp, "c2_sign": sq, "aligned": sp == sq})
    return rows


def alignment_invariant(surface: AssembledSurface) -> str:
    """
    "aligned" or "antialigned" for M with m even and n1, n2 odd.

    Raises:
        InvariantUndefinedError: Outside that parity regime.
        SeamMismatchError: If different scaffold arcs disagree.
    """
    spec = surface.spec
    if spec.variant != "M" or spec.m % 2 or spec.n1 % 2 == 0 or spec.n2 % 2 == 0:
        raise InvariantUndefinedError(f"alignment is defined for M with m even and n1, n2 odd, not {spec.label}")
    values = {row["aligned"] for row in alignment_values(surface)}
    if len(values) != 1:
        raise SeamMismatchError("alignment differs between scaffold arcs")
    return "aligned" if values.pop() else "antialigned"


def congruence_isometry(spec: InitialSurfaceSpec) -> sphere.SphereIsometry:
    """
    An isometry carrying M(k, m, n1, n2, 0) to M(k, m, n1, n2, 1).

    Raises:
        InvariantUndefinedError: For N data, or when m is even and n1, n2 are odd
            (the two surfaces are then not congruent).
    """
    if spec.variant != "M":
        raise InvariantUndefinedError("congruence isometries are tabulated for M only")
    k, m, n1, n2 = spec.k, spec.m, spec.n1, spec.n2
    if (m * n1) % 2 == 1:
        return sphere.rotate_c2(np.pi / k)
    if n1 % 2 == 0:
        return sphere.hopf_shift(np.pi / (k * m))
    if n2 % 2 == 0:
        return sphere.rotate_c2(np.pi / k).compose(sphere.hopf_shift(np.pi / (k * m)))
    raise InvariantUndefinedError(f"{spec.label}: sigma = 0 and sigma = 1 surfaces are not congruent")


def hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric Hausdorff distance between two vertex sets."""
    d_ab, _ = cKDTree(b).query(a)
    d_ba, _ = cKDTree(a).query(b)
    return float(max(d_ab.max(), d_ba.max()))


def congruence_residual(spec: InitialSurfaceSpec, resolution: int | None = None) -> dict:
    """Hausdorff distance between g M(..., 0) and M(..., 1) for the tabulated isometry g."""
    iso = congruence_isometry(spec)
    zero = assemble(spec.model_copy(update={"sigma": 0}), resolution)
    one = assemble(spec.model_copy(update={"sigma": 1}), resolution)
    residual = hausdorff(iso.apply(zero.mesh.vertices), one.mesh.vertices)
    logger.info("Congruence residual for %s: %.3e (h=%.3e)", spec.label, residual, one.mesh.h)
    return {"residual": residual, "h": one.mesh.h, "isometry": iso.label}


def scaffold_residual(surface: AssembledSurface, per_circle: int = 256) -> float:
    """Largest distance from dense scaffold samples to the mesh."""
    kind = "C" if surface.spec.variant == "M" else "C'"
    scaffold = sphere.build_scaffolding(surface.spec.k, surface.spec.m, kind)
    samples = scaffold.sample(per_circle)
    return float(np.max(surface_mesh.distance_to_mesh(samples, surface.mesh)))
