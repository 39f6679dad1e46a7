"""
Geometry of the round 3-sphere.

S^3 is the unit sphere of R^4 = C^2 with coordinates (x1, y1, x2, y2) <-> (z1, z2).
Great circles are stored as orthonormal 2-frames, rotations about a circle act on the
totally orthogonal 2-plane, and Clifford tori are the sets equidistant (pi/4) from a
pair of totally orthogonal circles.

Provides:
- Named circles C1, C2, C_{phi1,phi2}, C'_j and C''_psi
- Rotations about circles and finite symmetry groups with parity bookkeeping
- The toral coordinate map Phi and its pullback metric
- The configurations W_k, W'_k and the scaffoldings C_{k,m}, C'_{k,m}, C_min
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable
from dataclasses import dataclass, field

import numpy as np

from clifford_gluing.core.config import settings
from clifford_gluing.core.errors import ClosureOverflowError, InvalidArgumentError
from clifford_gluing.services import weierstrass_tower as tower

logger = logging.getLogger("clifford_gluing.sphere")

QUARTER = np.pi / 4
_UNIT_TOL = 1e-12


# =============================================================================
# Points
# =============================================================================


def from_complex(z1, z2) -> np.ndarray:
    """Stack complex coordinates into R^4 points (x1, y1, x2, y2)."""
    z1 = np.asarray(z1, dtype=complex)
    z2 = np.asarray(z2, dtype=complex)
    z1, z2 = np.broadcast_arrays(z1, z2)
    return np.stack([z1.real, z1.imag, z2.real, z2.imag], axis=-1)


def to_complex(points) -> tuple[np.ndarray, np.ndarray]:
    points = np.asarray(points, dtype=float)
    return points[..., 0] + 1j * points[..., 1], points[..., 2] + 1j * points[..., 3]


def on_sphere(points, tol: float = _UNIT_TOL) -> bool:
    return bool(np.all(np.abs(np.linalg.norm(np.asarray(points), axis=-1) - 1.0) <= tol))


def geodesic_distance(p, q) -> np.ndarray:
    dots = np.clip(np.sum(np.asarray(p) * np.asarray(q), axis=-1), -1.0, 1.0)
    return np.arccos(dots)


def _complex_matrix(a: complex, b: complex, c: complex, d: complex) -> np.ndarray:
    """Real 4x4 matrix of the C-linear map (z1, z2) -> (a z1 + b z2, c z1 + d z2)."""

    def block(u: complex) -> np.ndarray:
        return np.array([[u.real, -u.imag], [u.imag, u.real]])

    return np.block([[block(a), block(b)], [block(c), block(d)]])


CONJUGATION = np.diag([1.0, -1.0, 1.0, -1.0])


# =============================================================================
# Great circles and Clifford tori
# =============================================================================


@dataclass(frozen=True, eq=False)
class GreatCircle:
    """
    Oriented great circle spanned by the orthonormal frame (e1, e2).

    Attributes:
        e1: first frame vector, the point at parameter 0
        e2: second frame vector, the point at parameter pi/2
        name: label used in reports
    """

    e1: np.ndarray
    e2: np.ndarray
    name: str = ""

    def __post_init__(self):
        e1 = np.asarray(self.e1, dtype=float)
        e2 = np.asarray(self.e2, dtype=float)
        if abs(np.dot(e1, e2)) > 1e-10 or abs(np.linalg.norm(e1) - 1) > 1e-10 or abs(np.linalg.norm(e2) - 1) > 1e-10:
            raise InvalidArgumentError(f"frame of circle {self.name or '?'} is not orthonormal")
        object.__setattr__(self, "e1", e1)
        object.__setattr__(self, "e2", e2)

    @property
    def projector(self) -> np.ndarray:
        return np.outer(self.e1, self.e1) + np.outer(self.e2, self.e2)

    def point(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.cos(t)[..., None] * self.e1 + np.sin(t)[..., None] * self.e2

    def tangent(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return -np.sin(t)[..., None] * self.e1 + np.cos(t)[..., None] * self.e2

    def sample(self, n: int) -> np.ndarray:
        return self.point(np.linspace(0.0, 2 * np.pi, n, endpoint=False))

    def orthogonal(self) -> GreatCircle:
        """
        The totally orthogonal circle, oriented so that (e1, e2, a, b) is positively oriented.
        """
        basis, _ = np.linalg.qr(np.column_stack([self.e1, self.e2, np.eye(4)]))
        complement = basis[:, 2:4].copy()
        frame = np.column_stack([self.e1, self.e2, complement])
        if np.linalg.det(frame) < 0:
            complement = complement[:, ::-1]
        return GreatCircle(complement[:, 0], complement[:, 1], f"{self.name}^perp" if self.name else "")

    def same_as(self, other: GreatCircle, tol: float = 1e-9) -> bool:
        """Equality as point sets, independent of the frame gauge."""
        return bool(np.max(np.abs(self.projector - other.projector)) < tol)

    def parameter_of(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return np.arctan2(points @ self.e2, points @ self.e1)

    def to_dict(self) -> dict:
        return {"name": self.name, "e1": self.e1.tolist(), "e2": self.e2.tolist()}


def distance_to_circle(points, circle: GreatCircle) -> np.ndarray:
    """Spherical distance arccos |P_C p| from points to a great circle."""
    points = np.asarray(points, dtype=float)
    along = np.hypot(points @ circle.e1, points @ circle.e2)
    return np.arccos(np.clip(along, 0.0, 1.0))


def circle_c1() -> GreatCircle:
    return GreatCircle(np.array([1.0, 0, 0, 0]), np.array([0, 1.0, 0, 0]), "C1")


def circle_c2() -> GreatCircle:
    return GreatCircle(np.array([0, 0, 1.0, 0]), np.array([0, 0, 0, 1.0]), "C2")


def circle_c_phi(phi1: float, phi2: float) -> GreatCircle:
    """C_{phi1,phi2} = {(e^{i phi1} cos r, e^{i phi2} sin r)}."""
    return GreatCircle(
        from_complex(np.exp(1j * phi1), 0.0),
        from_complex(0.0, np.exp(1j * phi2)),
        f"C_{{{phi1:.6g},{phi2:.6g}}}",
    )


def circle_c_prime(j: float, k: int) -> GreatCircle:
    """C'_j = {e^{iz}(1, e^{i(j-1)pi/k})/sqrt 2}, j in Z/2, oriented by increasing z."""
    phase = np.exp(1j * (j - 1) * np.pi / k)
    base = np.array([1.0, phase]) / math.sqrt(2)
    return GreatCircle(from_complex(base[0], base[1]), from_complex(1j * base[0], 1j * base[1]), f"C'_{j:g}")


def circle_c_double_prime(psi: float) -> GreatCircle:
    """C''_psi = {(e^{iz}, e^{i(psi - z)})/sqrt 2}, oriented by increasing z."""
    half = np.exp(0.5j * psi) / math.sqrt(2)
    return GreatCircle(from_complex(half, half), from_complex(1j * half, -1j * half), f"C''_{psi:.6g}")


@dataclass(frozen=True, eq=False)
class CliffordTorus:
    """
    The Clifford torus T[C], equidistant from C and its orthogonal circle.

    Attributes:
        axis: the circle C
        companion: the totally orthogonal circle C^perp
        name: label used in reports
    """

    axis: GreatCircle
    companion: GreatCircle
    name: str = ""

    def sample(self, n_axis: int, n_companion: int | None = None) -> np.ndarray:
        n_companion = n_companion or n_axis
        s = np.linspace(0.0, 2 * np.pi, n_axis, endpoint=False)
        t = np.linspace(0.0, 2 * np.pi, n_companion, endpoint=False)
        s, t = np.meshgrid(s, t, indexing="ij")
        points = math.cos(QUARTER) * self.axis.point(s) + math.sin(QUARTER) * self.companion.point(t)
        return points.reshape(-1, 4)

    def distance(self, points) -> np.ndarray:
        return np.abs(distance_to_circle(points, self.axis) - QUARTER)

    def level(self, points) -> np.ndarray:
        """|P_C p|^2 - 1/2: zero on the torus, positive on the side of the axis."""
        points = np.asarray(points, dtype=float)
        return (points @ self.axis.e1) ** 2 + (points @ self.axis.e2) ** 2 - 0.5

    def normal(self, points) -> np.ndarray:
        """Unit normal in T S^3 pointing towards the axis."""
        points = np.asarray(points, dtype=float)
        gradient = 2 * points @ self.axis.projector - points
        gradient = gradient - np.sum(gradient * points, axis=-1, keepdims=True) * points
        return gradient / np.linalg.norm(gradient, axis=-1, keepdims=True)

    def same_as(self, other: CliffordTorus) -> bool:
        return self.axis.same_as(other.axis) or self.axis.same_as(other.companion)

    def to_dict(self) -> dict:
        return {"name": self.name, "axis": self.axis.to_dict(), "companion": self.companion.to_dict()}


def clifford_torus_of(circle: GreatCircle, name: str = "") -> CliffordTorus:
    return CliffordTorus(circle, circle.orthogonal(), name or f"T[{circle.name}]")


# =============================================================================
# Isometries and finite groups
# =============================================================================


@dataclass(frozen=True, eq=False)
class SphereIsometry:
    """
    An element of O(4) together with its parity on a chosen surface.

    Attributes:
        matrix: 4x4 orthogonal matrix
        parity: +1 if the surface's sides are preserved, -1 if exchanged
        label: human readable name
    """

    matrix: np.ndarray
    parity: int = 1
    label: str = ""

    def apply(self, points) -> np.ndarray:
        return np.asarray(points) @ self.matrix.T

    def compose(self, other: SphereIsometry) -> SphereIsometry:
        """Return self o other."""
        label = f"{self.label}*{other.label}" if self.label and other.label else ""
        return SphereIsometry(self.matrix @ other.matrix, self.parity * other.parity, label)

    def inverse(self) -> SphereIsometry:
        return SphereIsometry(self.matrix.T, self.parity, f"{self.label}^-1" if self.label else "")

    def power(self, n: int) -> SphereIsometry:
        base = self if n >= 0 else self.inverse()
        result = identity()
        for _ in range(abs(n)):
            result = result.compose(base)
        return result

    def orthogonality_defect(self) -> float:
        return float(np.max(np.abs(self.matrix.T @ self.matrix - np.eye(4))))

    def is_close(self, other: SphereIsometry, tol: float = 1e-9) -> bool:
        return bool(np.max(np.abs(self.matrix - other.matrix)) < tol)

    def key(self) -> tuple:
        return tuple((np.round(self.matrix, 9) + 0.0).ravel().tolist())


def identity() -> SphereIsometry:
    return SphereIsometry(np.eye(4), 1, "I")


def rotation_about_circle(circle: GreatCircle, angle: float, parity: int = 1) -> SphereIsometry:
    """
    R_C^angle: identity on span(C), rotation by angle on the orthogonal 2-plane.

    The rotation turns C^perp along its own orientation (see GreatCircle.orthogonal).
    """
    perp = circle.orthogonal()
    a, b = perp.e1, perp.e2
    matrix = (
        circle.projector
        + math.cos(angle) * (np.outer(a, a) + np.outer(b, b))
        + math.sin(angle) * (np.outer(b, a) - np.outer(a, b))
    )
    return SphereIsometry(matrix, parity, f"R[{circle.name}]^{angle:.6g}")


def rotate_c1(angle: float) -> SphereIsometry:
    """R_{C1}^angle: z2 -> e^{i angle} z2."""
    return SphereIsometry(_complex_matrix(1, 0, 0, np.exp(1j * angle)), 1, f"R[C1]^{angle:.6g}")


def rotate_c2(angle: float) -> SphereIsometry:
    """R_{C2}^angle: z1 -> e^{i angle} z1."""
    return SphereIsometry(_complex_matrix(np.exp(1j * angle), 0, 0, 1), 1, f"R[C2]^{angle:.6g}")


def hopf_shift(angle: float) -> SphereIsometry:
    """R_{C1}^angle R_{C2}^angle: multiplication by e^{i angle}."""
    return SphereIsometry(_complex_matrix(np.exp(1j * angle), 0, 0, np.exp(1j * angle)), 1, f"H^{angle:.6g}")


def conjugation() -> SphereIsometry:
    """R^pi about C_{0,0}; reverses the sides of every surface built here."""
    return SphereIsometry(CONJUGATION.copy(), -1, "R[C_00]^pi")


def swap() -> SphereIsometry:
    """R^pi about C'_1: (z1, z2) -> (z2, z1)."""
    return SphereIsometry(_complex_matrix(0, 1, 1, 0), 1, "R[C'_1]^pi")


def positioning_rotation() -> SphereIsometry:
    """
    R^{pi/4} about C_{0,0} composed with R^{pi/4} about C_{pi/2,pi/2}.

    Sends C1 to C'_1, preserves T, and sends T' to the image of the plane
    theta = pi/2 under Phi, so a two-winged tower along C1 lands along C'_1.
    """
    first = rotation_about_circle(circle_c_phi(0.0, 0.0), QUARTER)
    second = rotation_about_circle(circle_c_phi(np.pi / 2, np.pi / 2), QUARTER)
    return SphereIsometry(first.matrix @ second.matrix, 1, "R_pos")


def group_closure(generators: Iterable[SphereIsometry], bound: int | None = None) -> list[SphereIsometry]:
    """
    Enumerate the finite group generated by the given isometries.

    Elements are deduplicated by matrix entries rounded to 1e-9; parity is carried
    along and must agree whenever the same matrix is reached twice.

    Raises:
        ClosureOverflowError: If more than `bound` elements are produced.
        InvalidArgumentError: If the parities are inconsistent with the matrices.
    """
    bound = bound or settings.GROUP_ENUMERATION_BOUND
    generators = list(generators)
    start = identity()
    elements = {start.key(): start}
    frontier = [start]
    while frontier:
        next_frontier = []
        for g in frontier:
            for gen in generators:
                h = gen.compose(g)
                key = h.key()
                seen = elements.get(key)
                if seen is None:
                    elements[key] = SphereIsometry(h.matrix, h.parity, "")
                    next_frontier.append(elements[key])
                    if len(elements) > bound:
                        raise ClosureOverflowError(f"group closure exceeded {bound} elements")
                elif seen.parity != h.parity:
                    raise InvalidArgumentError("parity is not a homomorphism on these generators")
        frontier = next_frontier
    return list(elements.values())


def group_generators(k: int, m: int, kind: str) -> list[SphereIsometry]:
    if kind == "G":
        return [conjugation(), hopf_shift(2 * np.pi / (k * m)), rotate_c1(2 * np.pi / k)]
    if kind == "G'":
        return group_generators(k, 2 * m, "G") + [swap()]
    if kind == "G_min":
        return [conjugation(), rotation_about_circle(circle_c_phi(0.0, np.pi / 2), np.pi, parity=-1)]
    raise InvalidArgumentError(f"unknown group kind {kind!r}")


def build_symmetry_group(k: int, m: int, kind: str = "G") -> list[SphereIsometry]:
    """
    Closure of the generators of G_{k,m}, G'_{k,m} or G_min.

    Args:
        k: number of tori through C1 and C2
        m: scaffolding refinement
        kind: "G", "G'" or "G_min"

    Returns:
        Group elements with parity flags; the identity comes first.
    """
    if kind != "G_min" and (k < 2 or m < 1):
        raise InvalidArgumentError("symmetry groups need k >= 2 and m >= 1")
    group = group_closure(group_generators(k, m, kind))
    logger.info("Symmetry group %s for k=%d m=%d has %d elements", kind, k, m, len(group))
    return group


def expected_group_order(k: int, m: int, kind: str) -> int:
    if kind == "G":
        return 2 * k * k * m
    if kind == "G'":
        return 8 * k * k * m
    if kind == "G_min":
        return 4
    raise InvalidArgumentError(f"unknown group kind {kind!r}")


def orbit_stabilizer(group: list[SphereIsometry], circle: GreatCircle) -> tuple[int, int]:
    """Orbit size and stabilizer size of a circle; their product is the group order."""
    orbit: list[np.ndarray] = []
    stabilizer = 0
    for g in group:
        image = g.matrix @ circle.projector @ g.matrix.T
        if np.max(np.abs(image - circle.projector)) < 1e-9:
            stabilizer += 1
        if not any(np.max(np.abs(image - seen)) < 1e-9 for seen in orbit):
            orbit.append(image)
    return len(orbit), stabilizer


# =============================================================================
# The map Phi
# =============================================================================


def phi(points) -> np.ndarray:
    """
    Phi(r cos theta, r sin theta, z) = e^{iz}(cos r, e^{i theta} sin r).

    Evaluated in Cartesian form, (x + iy) sin(r)/r, so the axis needs no special case.
    """
    points = np.asarray(points, dtype=float)
    x, y, z = points[..., 0], points[..., 1], points[..., 2]
    r = np.hypot(x, y)
    phase = np.exp(1j * z)
    return from_complex(phase * np.cos(r), phase * (x + 1j * y) * np.sinc(r / np.pi))


def phi_cylindrical(r, theta, z) -> np.ndarray:
    r, theta, z = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float), np.asarray(z, float))
    phase = np.exp(1j * z)
    return from_complex(phase * np.cos(r), phase * np.exp(1j * theta) * np.sin(r))


def phi_pullback_metric(p, chart: str = "cylindrical") -> np.ndarray:
    """
    Pullback of the round metric by Phi: dr^2 + sin^2 r dtheta^2 + 2 sin^2 r dtheta dz + dz^2.

    Args:
        p: point(s) in the chosen chart, (r, theta, z) or (x, y, z)
        chart: "cylindrical" or "cartesian"; the Cartesian form is regular on the axis

    Returns:
        Symmetric 3x3 matrix (or a stack of them).
    """
    p = np.asarray(p, dtype=float)
    if chart == "cylindrical":
        s2 = np.sin(p[..., 0]) ** 2
        g = np.zeros(p.shape[:-1] + (3, 3))
        g[..., 0, 0] = 1.0
        g[..., 1, 1] = s2
        g[..., 1, 2] = s2
        g[..., 2, 1] = s2
        g[..., 2, 2] = 1.0
        return g
    if chart != "cartesian":
        raise InvalidArgumentError(f"unknown chart {chart!r}")
    x, y = p[..., 0], p[..., 1]
    r = np.hypot(x, y)
    q = np.sinc(r / np.pi) ** 2
    small = r < 1e-3
    safe_r = np.where(small, 1.0, r)
    # (sin^2 r - r^2) / r^4 with its Taylor expansion near the axis
    c1 = np.where(small, -1.0 / 3.0 + 2.0 * r**2 / 45.0, (q - 1.0) / safe_r**2)
    u = np.stack([-y, x, np.zeros_like(x)], axis=-1)
    ez = np.zeros_like(u)
    ez[..., 2] = 1.0
    return (
        np.eye(3)
        + c1[..., None, None] * u[..., :, None] * u[..., None, :]
        + q[..., None, None] * (u[..., :, None] * ez[..., None, :] + ez[..., :, None] * u[..., None, :])
    )


def gram_matrix_fd(p, h: float = 1e-4, chart: str = "cylindrical") -> np.ndarray:
    """Gram matrix of central-difference derivatives of Phi in the given chart."""
    p = np.asarray(p, dtype=float)
    embed = (lambda q: phi_cylindrical(q[..., 0], q[..., 1], q[..., 2])) if chart == "cylindrical" else phi
    columns = []
    for axis in range(3):
        step = np.zeros(3)
        step[axis] = h
        columns.append((embed(p + step) - embed(p - step)) / (2 * h))
    jac = np.stack(columns, axis=-1)
    return np.swapaxes(jac, -1, -2) @ jac


def intertwine_check(c: float, samples: int = 200, seed: int | None = None) -> dict[str, float]:
    """
    Residuals of Phi o (Euclidean symmetry) against (sphere symmetry) o Phi.

    Compares rotation about the z-axis with R_{C1}, rotation by pi about the x-axis
    with R^pi_{C_00}, and vertical translation with R_{C1} R_{C2}.
    """
    rng = np.random.default_rng(settings.SEED if seed is None else seed)
    r = rng.uniform(0.1, 0.7, samples)
    theta = rng.uniform(0, 2 * np.pi, samples)
    z = rng.uniform(-np.pi, np.pi, samples)
    points = np.stack([r * np.cos(theta), r * np.sin(theta), z], axis=-1)
    base = phi(points)
    pairs = {
        "rotation": (tower.rotation_about_z(c), rotate_c1(c)),
        "x_axis_turn": (tower.rotation_about_x_axis(), conjugation()),
        "translation": (tower.screw(0.0, c), hopf_shift(c)),
    }
    return {
        name: float(np.max(np.abs(phi(euclid.apply(points)) - sphere.apply(base))))
        for name, (euclid, sphere) in pairs.items()
    }


# =============================================================================
# Configurations
# =============================================================================


@dataclass(frozen=True, eq=False)
class IntersectionCircle:
    circle: GreatCircle
    multiplicity: int


@dataclass(frozen=True, eq=False)
class Configuration:
    """
    A union of Clifford tori and the circles along which they meet.

    Attributes:
        kind: "W" or "W'"
        k: number of tori through C1 and C2
        tori: T_1..T_k, followed by T' for W'
        intersection_circles: circles with the number of tori meeting there
    """

    kind: str
    k: int
    tori: list[CliffordTorus]
    intersection_circles: list[IntersectionCircle] = field(default_factory=list)

    def distance(self, points) -> np.ndarray:
        return np.min(np.stack([t.distance(points) for t in self.tori]), axis=0)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "k": self.k,
            "tori": [t.to_dict() for t in self.tori],
            "intersection_circles": [
                {"circle": c.circle.to_dict(), "multiplicity": c.multiplicity} for c in self.intersection_circles
            ],
        }


def torus_t(j: int, k: int) -> CliffordTorus:
    """T_j = R_{C1}^{(j-1)pi/k} T = T[C'_{j+k/2}]."""
    return clifford_torus_of(circle_c_prime(j + k / 2, k), f"T_{j}")


def torus_t_prime() -> CliffordTorus:
    return clifford_torus_of(circle_c1(), "T'")


def build_configuration(k: int, kind: str = "W") -> Configuration:
    """
    The configuration W_k of k tori through C1 and C2, or W'_k = W_k with T' added.
    """
    if k < 2:
        raise InvalidArgumentError("configurations need k >= 2")
    if kind not in ("W", "W'"):
        raise InvalidArgumentError(f"unknown configuration kind {kind!r}")
    tori = [torus_t(j, k) for j in range(1, k + 1)]
    circles = [IntersectionCircle(circle_c1(), k), IntersectionCircle(circle_c2(), k)]
    if kind == "W'":
        tori.append(torus_t_prime())
        circles += [IntersectionCircle(circle_c_prime(j, k), 2) for j in range(1, 2 * k + 1)]
    logger.info("Configuration %s_%d: %d tori, %d intersection circles", kind, k, len(tori), len(circles))
    return Configuration(kind, k, tori, circles)


def torus_angle(a: CliffordTorus, b: CliffordTorus, point) -> float:
    """Angle in [0, pi/2] between two tori at a common point."""
    cos = abs(float(np.dot(a.normal(point), b.normal(point))))
    return float(np.arccos(min(cos, 1.0)))


def circle_chirality(circle: GreatCircle, torus: CliffordTorus, angle: float = 0.7, samples: int = 24) -> str:
    """
    "right" if H^+ about the circle preserves the torus, "left" if H^- does.

    H^+_D consists of the common rotations R_D^a R_{D^perp}^a, H^-_D of R_D^a R_{D^perp}^{-a}.
    """
    if np.max(torus.distance(circle.sample(samples))) > 1e-9:
        raise InvalidArgumentError(f"{circle.name} does not lie on {torus.name}")
    points = torus.sample(samples)
    perp = circle.orthogonal()
    for label, sign in (("right", 1), ("left", -1)):
        move = rotation_about_circle(circle, angle).compose(rotation_about_circle(perp, sign * angle))
        if np.max(torus.distance(move.apply(points))) < 1e-9:
            return label
    raise InvalidArgumentError(f"{circle.name} is not a ruling circle of {torus.name}")


def torus_intersection(a: CliffordTorus, b: CliffordTorus, n: int = 200) -> np.ndarray:
    """
    Points of a ∩ b found by sign changes of b's level function along grid lines of a.
    """
    grid = a.sample(n).reshape(n, n, 4)
    values = b.level(grid)
    found = []
    for axis in (0, 1):
        nxt = np.roll(values, -1, axis=axis)
        nxt_points = np.roll(grid, -1, axis=axis)
        crossing = (values == 0) | (values * nxt < 0)
        t = np.where(crossing, values / np.where(values == nxt, 1.0, values - nxt), 0.0)
        points = grid + t[..., None] * (nxt_points - grid)
        found.append(points[crossing])
    points = np.concatenate(found)
    return points / np.linalg.norm(points, axis=-1, keepdims=True)


def configsym_extra_symmetry_check(samples: int = 64) -> dict[str, float]:
    """
    R^{pi/2} about C'_1 preserves W'_2 but not W_2 (it exchanges T_1 and T').
    """
    rotation = rotation_about_circle(circle_c_prime(1, 2), np.pi / 2)
    w2 = build_configuration(2, "W")
    w2p = build_configuration(2, "W'")
    points_w2p = np.concatenate([t.sample(samples) for t in w2p.tori])
    points_w2 = np.concatenate([t.sample(samples) for t in w2.tori])
    return {
        "W'_2": float(np.max(w2p.distance(rotation.apply(points_w2p)))),
        "W_2": float(np.max(w2.distance(rotation.apply(points_w2)))),
    }


def symcomp_residuals(k: int, trials: int = 20, seed: int | None = None) -> dict[str, float]:
    """Maximum matrix residual of the four composition identities over random data."""
    rng = np.random.default_rng(settings.SEED if seed is None else seed)
    worst = {"c_phi": 0.0, "c_prime": 0.0, "c_double_prime": 0.0, "c00_c_prime": 0.0}

    def r_pi(circle: GreatCircle) -> np.ndarray:
        return rotation_about_circle(circle, np.pi).matrix

    for _ in range(trials):
        p1, p2, q1, q2 = rng.uniform(-np.pi, np.pi, 4)
        lhs = r_pi(circle_c_phi(p1, p2)) @ r_pi(circle_c_phi(q1, q2))
        rhs = rotate_c1(2 * (p2 - q2)).matrix @ rotate_c2(2 * (p1 - q1)).matrix
        worst["c_phi"] = max(worst["c_phi"], float(np.max(np.abs(lhs - rhs))))

        j, ell = rng.integers(-2 * k, 2 * k, 2) / 2.0
        lhs = r_pi(circle_c_prime(j, k)) @ r_pi(circle_c_prime(ell, k))
        rhs = rotate_c1(np.pi * (j - ell) / k).matrix @ rotate_c2(np.pi * (ell - j) / k).matrix
        worst["c_prime"] = max(worst["c_prime"], float(np.max(np.abs(lhs - rhs))))

        psi1, psi2 = rng.uniform(-np.pi, np.pi, 2)
        lhs = r_pi(circle_c_double_prime(psi1)) @ r_pi(circle_c_double_prime(psi2))
        rhs = hopf_shift(psi1 - psi2).matrix
        worst["c_double_prime"] = max(worst["c_double_prime"], float(np.max(np.abs(lhs - rhs))))

    lhs = r_pi(circle_c_phi(0.0, 0.0)) @ r_pi(circle_c_prime(1, k))
    worst["c00_c_prime"] = float(np.max(np.abs(lhs - r_pi(circle_c_double_prime(0.0)))))
    return worst


# =============================================================================
# Scaffoldings
# =============================================================================


@dataclass(frozen=True, eq=False)
class Scaffolding:
    kind: str
    circles: list[GreatCircle]

    def sample(self, per_circle: int) -> np.ndarray:
        return np.concatenate([c.sample(per_circle) for c in self.circles])

    def to_dict(self) -> dict:
        return {"kind": self.kind, "circles": [c.to_dict() for c in self.circles]}


def _dedupe(circles: list[GreatCircle]) -> list[GreatCircle]:
    unique: list[GreatCircle] = []
    for circle in circles:
        if not any(circle.same_as(other) for other in unique):
            unique.append(circle)
    return unique


def _c_km(k: int, m: int) -> list[GreatCircle]:
    return [
        circle_c_phi(j * np.pi / (k * m), j * np.pi / (k * m) + ell * np.pi / k)
        for j in range(k * m)
        for ell in range(k)
    ]


def expected_scaffold_size(k: int, m: int, kind: str) -> int:
    if kind == "C":
        return k * k * m
    if kind == "C'":
        return 2 * k * k * m + 2 * k * m
    if kind == "C_min":
        return 3
    raise InvalidArgumentError(f"unknown scaffolding kind {kind!r}")


def build_scaffolding(k: int, m: int, kind: str = "C") -> Scaffolding:
    """
    The scaffoldings C_{k,m}, C'_{k,m} or C_min (C_{0,0}, C_{0,pi/2}, C1).

    Raises:
        InvalidArgumentError: On bad data.
        ClosureOverflowError: If the distinct circle count disagrees with the closed form.
    """
    if k < 2 or m < 1:
        raise InvalidArgumentError("scaffoldings need k >= 2 and m >= 1")
    if kind == "C":
        circles = _c_km(k, m)
    elif kind == "C'":
        circles = _c_km(k, 2 * m) + [circle_c_double_prime(j * np.pi / (k * m)) for j in range(2 * k * m)]
    elif kind == "C_min":
        circles = [circle_c_phi(0.0, 0.0), circle_c_phi(0.0, np.pi / 2), circle_c1()]
    else:
        raise InvalidArgumentError(f"unknown scaffolding kind {kind!r}")
    circles = _dedupe(circles)
    expected = expected_scaffold_size(k, m, kind)
    if len(circles) != expected:
        raise ClosureOverflowError(f"scaffolding {kind} has {len(circles)} circles, expected {expected}")
    return Scaffolding(kind, circles)


def scaffold_incidence(scaffold: Scaffolding, target: GreatCircle, tol: float = 1e-9) -> dict[int, int]:
    """
    Where the scaffold circles meet a target circle.

    Returns:
        Map from the meeting point, as an index of the target's parameter in units of
        2pi/4096, to the number of scaffold circles through it.
    """
    counts: dict[int, int] = {}
    for circle in scaffold.circles:
        # a great circle meets another in 0, 2 or all points; meeting points solve a 2x2 system
        basis = np.column_stack([circle.e1, circle.e2])
        gram = basis.T @ target.projector @ basis
        values, vectors = np.linalg.eigh(gram)
        if values[-1] < 1 - tol:
            continue
        if values[0] > 1 - tol:
            continue
        point = basis @ vectors[:, -1]
        for sign in (1, -1):
            angle = float(target.parameter_of(sign * point)) % (2 * np.pi)
            key = int(round(angle * 4096 / (2 * np.pi))) % 4096
            counts[key] = counts.get(key, 0) + 1
    return counts


def scaffold_in_configuration_residual(scaffold: Scaffolding, configuration: Configuration, n: int = 64) -> float:
    """Largest distance from sampled scaffold points to the configuration."""
    return float(np.max(configuration.distance(scaffold.sample(n))))
