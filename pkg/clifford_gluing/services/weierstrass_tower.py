"""
Karcher-Scherk towers from their Weierstrass data.

Provides:
- Closed-form Weierstrass map of the unit disc onto one period of the tower
- Holomorphic integrands, metric density and second fundamental form
- Wing inversion by complex Newton and the exponential decay fit
- The straightened-wing map and the exact reflection group of the tower

Coordinates come in two flavours. The raw chart is the surface produced by the
Weierstrass integrals (slab |z| <= pi/2k). The normalized tower is that surface
scaled by k and rotated by pi/2k about the z-axis, so its horizontal lines sit at
z in pi*Z and its wings leave along the directions j*pi/k.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.spatial import cKDTree

from clifford_gluing.core.config import settings
from clifford_gluing.core.errors import (
    ClosureOverflowError,
    InsufficientSamplesError,
    InvalidArgumentError,
    MTooSmallError,
    NewtonDivergenceError,
    SingularParameterError,
)

logger = logging.getLogger("clifford_gluing.tower")

# Distance to a puncture below which a parameter counts as singular
_SINGULAR_TOL = 1e-14
_DISC_TOL = 1e-9


# =============================================================================
# Cutoff functions
# =============================================================================


def _bump_exp(s: np.ndarray) -> np.ndarray:
    out = np.zeros_like(s, dtype=float)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def cutoff_template(t) -> np.ndarray:
    """Smooth nondecreasing Psi: 0 on (-inf,-1], 1 on [1,inf), Psi - 1/2 odd."""
    t = np.asarray(t, dtype=float)
    left = _bump_exp(1.0 + t)
    right = _bump_exp(1.0 - t)
    return left / (left + right)


def cutoff(a: float, b: float, t):
    """
    Cutoff psi[a,b] = Psi o L with L affine, L(a) = -3 and L(b) = 3.

    Equals 0 near a and 1 near b; psi[a,b] + psi[b,a] = 1 everywhere.

    Raises:
        InvalidArgumentError: If a == b.
    """
    if a == b:
        raise InvalidArgumentError("cutoff needs a != b")
    t_arr = np.asarray(t, dtype=float)
    value = cutoff_template(-3.0 + 6.0 * (t_arr - a) / (b - a))
    if np.ndim(t) == 0:
        return float(value)
    return value


# =============================================================================
# Weierstrass data
# =============================================================================


def _check_k(k: int) -> None:
    if int(k) != k or k < 2:
        raise InvalidArgumentError(f"tower order k must be an integer >= 2, got {k}")


@lru_cache(maxsize=32)
def roots_of_minus_one(k: int) -> np.ndarray:
    """The 2k-th roots of -1, omega_j = exp(i pi (2j-1)/2k) for j = 1..2k."""
    _check_k(k)
    j = np.arange(1, 2 * k + 1)
    return np.exp(1j * np.pi * (2 * j - 1) / (2 * k))


@lru_cache(maxsize=32)
def _coefficients(k: int) -> np.ndarray:
    """
    Partial-fraction weights of the three integrands.

    Each coordinate is Re sum_j c_j Log(1 - w/omega_j); row 0 is x, row 1 is y, row 2 is z.
    """
    omega = roots_of_minus_one(k)
    signs = (-1.0) ** np.arange(2 * k)
    return np.stack(
        [
            -omega.real / k + 0j,
            omega.imag / k + 0j,
            -1j * signs / k,
        ]
    )


def _as_parameter(k: int, w) -> np.ndarray:
    _check_k(k)
    w = np.asarray(w, dtype=complex)
    if np.any(np.abs(w) > 1.0 + _DISC_TOL):
        raise InvalidArgumentError("Weierstrass parameter must lie in the closed unit disc")
    gaps = np.abs(w[..., None] - roots_of_minus_one(k))
    if np.any(gaps < _SINGULAR_TOL):
        raise SingularParameterError("Weierstrass parameter at a root of -1")
    return w


def _log_terms(k: int, w: np.ndarray, delta: np.ndarray | None = None) -> np.ndarray:
    """Log(1 - w/omega_j) for every root; with delta = w - omega_1 the first term is taken exactly."""
    omega = roots_of_minus_one(k)
    terms = np.log(1.0 - w[..., None] / omega)
    if delta is not None:
        terms[..., 0] = np.log(-delta / omega[0])
    return terms


def _raw_map(k: int, w: np.ndarray, delta: np.ndarray | None = None) -> np.ndarray:
    terms = _log_terms(k, w, delta)
    return np.real(np.einsum("cj,...j->...c", _coefficients(k), terms))


def weierstrass_map(k: int, w):
    """
    Raw tower point (x, y, z) for a parameter in the punctured closed unit disc.

    The arg terms use the principal branch, which vanishes at w = 0 and is
    continuous on the closed disc away from the punctures.

    Raises:
        SingularParameterError: If w is a root of -1.
    """
    w = _as_parameter(k, w)
    return _raw_map(k, w)


def weierstrass_differential(k: int, w) -> np.ndarray:
    """Holomorphic integrands of dx, dy, dz at w (last axis indexes the coordinate)."""
    w = _as_parameter(k, w)
    denom = 1.0 + w ** (2 * k)
    return np.stack(
        [
            (1.0 - w ** (2 * k - 2)) / denom,
            1j * (1.0 + w ** (2 * k - 2)) / denom,
            2.0 * w ** (k - 1) / denom,
        ],
        axis=-1,
    )


def _differential_derivative(k: int, w: np.ndarray) -> np.ndarray:
    diff = w[..., None] - roots_of_minus_one(k)
    return np.einsum("cj,...j->...c", -_coefficients(k), 1.0 / diff**2)


def tower_metric_density(k: int, w):
    """Conformal factor of the induced metric with respect to |dw|^2."""
    w = _as_parameter(k, w)
    r = np.abs(w)
    value = ((r ** (2 * k - 2) + 1.0) / np.abs(w ** (2 * k) + 1.0)) ** 2
    return float(value) if np.ndim(value) == 0 else value


def second_form_tower(k: int, w, V):
    """
    Second fundamental form A(V, V) = 2(k-1) Re[V^2 w^(k-2) / (w^(2k) + 1)].

    This is the product of dg/g for the Gauss map w^(k-1) with the height differential.
    """
    w = _as_parameter(k, w)
    V = np.asarray(V, dtype=complex)
    value = 2.0 * (k - 1) * np.real(V**2 * w ** (k - 2) / (w ** (2 * k) + 1.0))
    return float(value) if np.ndim(value) == 0 else value


# =============================================================================
# Normalization and jets
# =============================================================================


@lru_cache(maxsize=32)
def _normalizing_matrix(k: int) -> np.ndarray:
    angle = np.pi / (2 * k)
    c, s = math.cos(angle), math.sin(angle)
    return k * np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def normalize(k: int, points: np.ndarray) -> np.ndarray:
    """Scale by k and rotate by pi/2k about the z-axis."""
    return np.asarray(points) @ _normalizing_matrix(k).T


def tower_point(k: int, w) -> np.ndarray:
    return normalize(k, weierstrass_map(k, w))


def tower_jet(k: int, u, v) -> tuple[np.ndarray, ...]:
    """
    Exact first and second derivatives of the normalized tower in the chart w = u + iv.

    Returns:
        (f, f_u, f_v, f_uu, f_uv, f_vv), each with a trailing axis of length 3.
    """
    w = _as_parameter(k, np.asarray(u) + 1j * np.asarray(v))
    first = weierstrass_differential(k, w)
    second = _differential_derivative(k, w)
    raw = (
        _raw_map(k, w),
        first.real,
        -first.imag,
        second.real,
        -second.imag,
        -second.real,
    )
    return tuple(normalize(k, part) for part in raw)


# =============================================================================
# Euclidean symmetries
# =============================================================================


@dataclass(frozen=True, eq=False)
class EuclideanSymmetry:
    """
    A rigid motion of R^3 with its parity on the tower normal.

    Attributes:
        kind: rotation-about-line, reflection-through-plane, screw/translation or composite
        matrix: 3x3 orthogonal linear part
        offset: translation applied after the linear part
        parity: +1 if the tower normal is preserved, -1 if the sides are exchanged
    """

    kind: str
    matrix: np.ndarray
    offset: np.ndarray = field(default_factory=lambda: np.zeros(3))
    parity: int = 1

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points) @ self.matrix.T + self.offset

    def compose(self, other: EuclideanSymmetry) -> EuclideanSymmetry:
        """Return self o other."""
        return EuclideanSymmetry(
            kind="composite",
            matrix=self.matrix @ other.matrix,
            offset=self.matrix @ other.offset + self.offset,
            parity=self.parity * other.parity,
        )

    def is_close(self, other: EuclideanSymmetry, tol: float = 1e-9) -> bool:
        return bool(
            np.max(np.abs(self.matrix - other.matrix)) < tol and np.max(np.abs(self.offset - other.offset)) < tol
        )


def _rotation_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_about_z(angle: float) -> EuclideanSymmetry:
    return EuclideanSymmetry("rotation-about-line", _rotation_z(angle), np.zeros(3), 1)


def rotation_about_x_axis() -> EuclideanSymmetry:
    """Rotation by pi about the x-axis, a line on the tower; exchanges the sides."""
    return EuclideanSymmetry("rotation-about-line", np.diag([1.0, -1.0, -1.0]), np.zeros(3), -1)


def reflection_vertical_plane(angle: float) -> EuclideanSymmetry:
    """Reflection through the vertical plane containing the direction at the given angle."""
    c, s = math.cos(2 * angle), math.sin(2 * angle)
    matrix = np.array([[c, s, 0.0], [s, -c, 0.0], [0.0, 0.0, 1.0]])
    return EuclideanSymmetry("reflection-through-plane", matrix, np.zeros(3), 1)


def reflection_horizontal_plane(height: float) -> EuclideanSymmetry:
    return EuclideanSymmetry("reflection-through-plane", np.diag([1.0, 1.0, -1.0]), np.array([0.0, 0.0, 2 * height]), 1)


def screw(angle: float, shift: float) -> EuclideanSymmetry:
    return EuclideanSymmetry("screw/translation", _rotation_z(angle), np.array([0.0, 0.0, shift]), 1)


# =============================================================================
# Exact reflection group of the normalized tower
# =============================================================================


@dataclass(frozen=True)
class TowerGroupElement:
    """
    (x, y, z) -> (Rot(rot*pi/k) F^flip (x, y), zsign*z + shift*pi), F the reflection y -> -y.

    rot is taken mod 2k and shift mod 2*periods, so the group acts on the tower
    closed up after `periods` vertical periods.
    """

    rot: int
    flip: int
    zsign: int
    shift: int

    @property
    def parity(self) -> int:
        # the tower normal at (0,0,n*pi) is (-1)^n e_z
        return self.zsign * (-1) ** (self.shift % 2)


class TowerGroup:
    """
    The group generated by the three mirror edges of the fundamental piece.

    Generators: reflection through the vertical plane at angle pi/2k, rotation by pi
    about the x-axis, reflection through the plane z = pi/2. Closing the tower after
    `periods` periods makes the group finite of order 8*k*periods.
    """

    def __init__(self, k: int, periods: int):
        _check_k(k)
        if periods < 1:
            raise InvalidArgumentError("periods must be positive")
        self.k = k
        self.periods = periods
        self.mirror_plane = TowerGroupElement(1, 1, 1, 0)
        self.x_axis_turn = TowerGroupElement(0, 1, -1, 0)
        self.top_plane = TowerGroupElement(0, 0, -1, 1)
        self.generators = (self.mirror_plane, self.x_axis_turn, self.top_plane)
        self.elements = self._enumerate()
        self.index = {element: i for i, element in enumerate(self.elements)}

    def _reduce(self, rot: int, flip: int, zsign: int, shift: int) -> TowerGroupElement:
        return TowerGroupElement(rot % (2 * self.k), flip % 2, zsign, shift % (2 * self.periods))

    def multiply(self, g: TowerGroupElement, h: TowerGroupElement) -> TowerGroupElement:
        """Return g o h."""
        sign = -1 if g.flip else 1
        return self._reduce(g.rot + sign * h.rot, g.flip + h.flip, g.zsign * h.zsign, g.zsign * h.shift + g.shift)

    def _enumerate(self) -> list[TowerGroupElement]:
        identity = TowerGroupElement(0, 0, 1, 0)
        seen = {identity}
        order = [identity]
        frontier = [identity]
        bound = settings.GROUP_ENUMERATION_BOUND
        while frontier:
            next_frontier = []
            for g in frontier:
                for gen in self.generators:
                    h = self.multiply(g, gen)
                    if h not in seen:
                        seen.add(h)
                        order.append(h)
                        next_frontier.append(h)
                        if len(order) > bound:
                            raise ClosureOverflowError(f"tower group exceeded {bound} elements")
            frontier = next_frontier
        expected = 8 * self.k * self.periods
        if len(order) != expected:
            raise ClosureOverflowError(f"tower group has {len(order)} elements, expected {expected}")
        return order

    def __len__(self) -> int:
        return len(self.elements)

    def __contains__(self, element: TowerGroupElement) -> bool:
        return self._reduce(element.rot, element.flip, element.zsign, element.shift) in self.index

    def apply(self, g: TowerGroupElement, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        x, y, z = points[..., 0], points[..., 1], points[..., 2]
        if g.flip:
            y = -y
        angle = g.rot * np.pi / self.k
        c, s = math.cos(angle), math.sin(angle)
        return np.stack([c * x - s * y, s * x + c * y, g.zsign * z + g.shift * np.pi], axis=-1)

    def symmetry(self, g: TowerGroupElement) -> EuclideanSymmetry:
        linear = _rotation_z(g.rot * np.pi / self.k) @ np.diag([1.0, -1.0 if g.flip else 1.0, float(g.zsign)])
        return EuclideanSymmetry("composite", linear, np.array([0.0, 0.0, g.shift * np.pi]), g.parity)


@lru_cache(maxsize=64)
def tower_group(k: int, periods: int) -> TowerGroup:
    group = TowerGroup(k, periods)
    logger.info("Tower group for k=%d over %d periods has %d elements", k, periods, len(group))
    return group


# =============================================================================
# Sampled fundamental piece
# =============================================================================


@dataclass(frozen=True, eq=False)
class TowerPatch:
    """
    Samples of the fundamental sector D = {r e^{i theta}: 0 <= r <= 1, 0 <= theta <= pi/2k} minus omega_1.

    Attributes:
        k: tower order
        normalized: whether points are in normalized tower units
        w: sampled parameters (flattened)
        points: tower points matching w
        generators: mirror generators tiling the full tower from this piece
    """

    k: int
    normalized: bool
    w: np.ndarray
    points: np.ndarray
    generators: tuple[EuclideanSymmetry, ...]


def sector_samples(k: int, radial: int, angular: int) -> np.ndarray:
    """Tensor grid of D refined geometrically towards omega_1; the puncture itself is removed."""
    s = np.linspace(0.0, 1.0, radial)
    t = np.linspace(0.0, 1.0, angular)
    r = np.sin(0.5 * np.pi * s)
    theta = (np.pi / (2 * k)) * np.sin(0.5 * np.pi * t)
    w = (r[:, None] * np.exp(1j * theta[None, :])).ravel()
    keep = np.abs(w - roots_of_minus_one(k)[0]) > 1e-12
    return w[keep]


def build_tower_patch(
    k: int, normalization: bool = True, radial: int | None = None, angular: int | None = None
) -> TowerPatch:
    """
    Sample the image of the fundamental sector and return it with its tiling generators.

    With normalization the patch lies in the wedge 0 <= theta <= pi/2k and the slab
    0 <= z <= pi/2, and its straight edge is the x-axis.
    """
    _check_k(k)
    radial = radial or settings.TOWER_RESOLUTION
    angular = angular or settings.TOWER_ANGULAR_RESOLUTION
    w = sector_samples(k, radial, angular)
    points = _raw_map(k, w)
    if normalization:
        points = normalize(k, points)
        generators = (
            reflection_vertical_plane(np.pi / (2 * k)),
            rotation_about_x_axis(),
            reflection_horizontal_plane(np.pi / 2),
        )
    else:
        # raw chart: mirror plane theta = 0, straight line at angle -pi/2k, top plane z = pi/2k
        back = np.pi / (2 * k)
        turn = EuclideanSymmetry(
            "rotation-about-line",
            _rotation_z(-back) @ np.diag([1.0, -1.0, -1.0]) @ _rotation_z(back),
            np.zeros(3),
            -1,
        )
        generators = (
            reflection_vertical_plane(0.0),
            turn,
            reflection_horizontal_plane(np.pi / (2 * k)),
        )
    return TowerPatch(k=k, normalized=normalization, w=w, points=points, generators=generators)


def tile_tower(patch: TowerPatch, periods: int = 1) -> np.ndarray:
    """Full normalized tower samples over `periods` periods, as the orbit of the patch."""
    if not patch.normalized:
        raise InvalidArgumentError("tiling works in normalized units")
    group = tower_group(patch.k, periods)
    return np.concatenate([group.apply(g, patch.points) for g in group.elements])


def tower_mesh(
    k: int,
    periods: int = 1,
    radial: int | None = None,
    angular: int | None = None,
    m: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Triangulate the normalized tower over `periods` periods.

    The fundamental sector is meshed on its (r, theta) grid with the puncture omega_1
    dropped, then tiled by the tower group. Copies produced by orientation-reversing
    elements have their triangles reversed so the normal is continuous. With `m` the
    wings are straightened beyond a_m.

    Returns:
        (vertices, triangles): (n, 3) float and (f, 3) int arrays
    """
    _check_k(k)
    radial = radial or settings.TOWER_RESOLUTION
    angular = angular or settings.TOWER_ANGULAR_RESOLUTION
    if radial < 3 or angular < 2:
        raise InvalidArgumentError("tower mesh needs radial >= 3 and angular >= 2")
    r = np.sin(0.5 * np.pi * np.linspace(0.0, 1.0, radial))
    theta = (np.pi / (2 * k)) * np.sin(0.5 * np.pi * np.linspace(0.0, 1.0, angular))
    w = (r[:, None] * np.exp(1j * theta[None, :])).ravel()
    idx = np.arange(radial * angular).reshape(radial, angular)
    a, b = idx[:-1, :-1].ravel(), idx[1:, :-1].ravel()
    c, d = idx[1:, 1:].ravel(), idx[:-1, 1:].ravel()
    triangles = np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, d], 1)])

    # the r = 0 row collapses to one vertex, the corner is omega_1
    remap = np.arange(len(w))
    remap[idx[0]] = idx[0, 0]
    triangles = remap[triangles]
    corner = idx[-1, -1]
    ordered = np.sort(triangles, axis=1)
    keep = (ordered[:, 0] != ordered[:, 1]) & (ordered[:, 1] != ordered[:, 2])
    keep &= ~np.any(triangles == corner, axis=1)
    triangles = triangles[keep]
    used = np.unique(triangles)
    compact = np.full(len(w), -1)
    compact[used] = np.arange(len(used))
    piece = normalize(k, _raw_map(k, w[used]))
    triangles = compact[triangles]

    group = tower_group(k, periods)
    vertices, faces = [], []
    for g in group.elements:
        det = (-1 if g.flip else 1) * g.zsign
        tris = triangles if det * g.parity > 0 else triangles[:, ::-1]
        faces.append(tris + len(piece) * len(vertices))
        vertices.append(group.apply(g, piece))
    vertices = np.concatenate(vertices)
    faces = np.concatenate(faces)

    # mirror edges are shared exactly up to roundoff
    _, first, inverse = np.unique(np.round(vertices, 9) + 0.0, axis=0, return_index=True, return_inverse=True)
    vertices = vertices[first]
    faces = inverse.reshape(-1)[faces]
    if m is not None:
        vertices = straightened_tower_map(k, m, vertices)
    logger.info("Tower mesh for k=%d: %d vertices, %d triangles", k, len(vertices), len(faces))
    return vertices, faces


def point_set_residual(points: np.ndarray, image: np.ndarray, period: float | None = None) -> float:
    """
    One-sided Hausdorff distance from `image` to `points`.

    With a vertical period, both sets are compared modulo translation by it.
    """
    base = np.asarray(points, dtype=float)
    moved = np.asarray(image, dtype=float)
    if period is not None:
        base = base.copy()
        moved = moved.copy()
        base[:, 2] = np.mod(base[:, 2], period)
        moved[:, 2] = np.mod(moved[:, 2], period)
        # points on the cut are duplicated on the other side
        low = base[base[:, 2] < 1e-9] + np.array([0.0, 0.0, period])
        high = base[base[:, 2] > period - 1e-9] - np.array([0.0, 0.0, period])
        base = np.concatenate([base, low, high])
    distances, _ = cKDTree(base).query(moved)
    return float(np.max(distances))


def dual_tower_check(k: int, radial: int = 24, angular: int = 12) -> dict[str, float]:
    """
    Compare the half-period translate of the tower with its rotation by pi/k.

    Returns residuals for the dual identity and for the reflection through z = 0,
    which is not a symmetry (large residual expected).
    """
    patch = build_tower_patch(k, True, radial, angular)
    samples = tile_tower(patch, periods=1)
    period = 2 * np.pi
    translated = samples + np.array([0.0, 0.0, np.pi])
    rotated = samples @ _rotation_z(np.pi / k).T
    mirrored = samples * np.array([1.0, 1.0, -1.0])
    finite = np.all(np.abs(samples) < 50.0, axis=1)
    return {
        "dual": point_set_residual(rotated[finite], translated[finite], period),
        "z_reflection": point_set_residual(samples[finite], mirrored[finite], period),
    }


# =============================================================================
# Wings
# =============================================================================


@lru_cache(maxsize=32)
def wing_constant(k: int) -> float:
    """
    c = lim (k s(w) + ln|w - omega_1|) as w -> omega_1, with the singular term removed.
    """
    omega = roots_of_minus_one(k)
    rest = omega[1:]
    weights = np.real(np.conj(omega[0]) * rest)
    return float(-np.sum(weights * np.log(np.abs(omega[0] - rest))))


def _wing_frame(k: int) -> tuple[float, float]:
    angle = np.pi / (2 * k)
    return math.cos(angle), math.sin(angle)


def _wing_coordinates(k: int, delta: np.ndarray) -> np.ndarray:
    """(s, t, z) of the raw tower at w = omega_1 + delta."""
    omega1 = roots_of_minus_one(k)[0]
    point = _raw_map(k, omega1 + delta, delta)
    c, s = _wing_frame(k)
    return np.stack(
        [
            c * point[..., 0] - s * point[..., 1],
            s * point[..., 0] + c * point[..., 1],
            point[..., 2],
        ],
        axis=-1,
    )


def _wing_jacobian(k: int, delta: np.ndarray) -> np.ndarray:
    """Real 2x2 Jacobian of (s, z) with respect to (Re delta, Im delta)."""
    omega1 = roots_of_minus_one(k)[0]
    diff = (omega1 + delta)[..., None] - roots_of_minus_one(k)
    diff[..., 0] = delta
    phi = np.einsum("cj,...j->...c", _coefficients(k), 1.0 / diff)
    c, s = _wing_frame(k)
    phi_s = c * phi[..., 0] - s * phi[..., 1]
    phi_z = phi[..., 2]
    jac = np.empty(delta.shape + (2, 2))
    jac[..., 0, 0] = phi_s.real
    jac[..., 0, 1] = -phi_s.imag
    jac[..., 1, 0] = phi_z.real
    jac[..., 1, 1] = -phi_z.imag
    return jac


def invert_wing(k: int, s, z, tol: float | None = None, max_iter: int | None = None) -> np.ndarray:
    """
    Solve (s(w), z(w)) = (s, z) near omega_1 in the raw chart; returns delta = w - omega_1.

    Starts from g(s + iz) = omega_1 (1 - exp(-k (s - iz) + c)) and runs damped Newton
    (step halving while the residual grows).

    Raises:
        NewtonDivergenceError: If any sample fails to converge or meets a singular
            Jacobian; carries the last iterate.
    """
    _check_k(k)
    tol = tol or settings.NEWTON_TOL
    max_iter = max_iter or settings.NEWTON_MAX_ITER
    s_arr, z_arr = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(z, dtype=float))
    shape = s_arr.shape
    omega1 = roots_of_minus_one(k)[0]
    target = np.stack([s_arr.ravel(), z_arr.ravel()], axis=-1)
    delta = np.array(-omega1 * np.exp(-k * (target[:, 0] - 1j * target[:, 1]) + wing_constant(k)), dtype=complex)

    def residual(d, goal):
        return _wing_coordinates(k, d)[..., [0, 2]] - goal

    res = residual(delta, target)
    norm = np.linalg.norm(res, axis=-1)
    scale = np.maximum(1.0, np.abs(target).max(axis=-1))
    for _ in range(max_iter):
        active = norm > tol * scale
        if not np.any(active):
            break
        goal = target[active]
        current = delta[active]
        current_norm = norm[active]
        try:
            step = np.linalg.solve(_wing_jacobian(k, current), -res[active][..., None])[..., 0]
        except np.linalg.LinAlgError as exc:
            raise NewtonDivergenceError(
                "singular wing Jacobian", last_iterate=(omega1 + delta).reshape(shape)
            ) from exc
        step = step[..., 0] + 1j * step[..., 1]
        factor = np.ones(current.shape)
        trial = current + step
        trial_res = residual(trial, goal)
        trial_norm = np.linalg.norm(trial_res, axis=-1)
        for _halving in range(8):
            worse = ~np.isfinite(trial_norm) | (trial_norm > current_norm)
            if not np.any(worse):
                break
            factor[worse] *= 0.5
            trial[worse] = current[worse] + factor[worse] * step[worse]
            retry = residual(trial[worse], goal[worse])
            trial_res[worse] = retry
            trial_norm[worse] = np.linalg.norm(retry, axis=-1)
        delta[active] = trial
        res[active] = trial_res
        norm[active] = trial_norm
    failed = ~(norm <= tol * scale)
    if np.any(failed):
        logger.error("Wing inversion failed at %d of %d samples for k=%d", int(failed.sum()), failed.size, k)
        raise NewtonDivergenceError(
            "wing Newton inversion did not converge", last_iterate=(omega1 + delta).reshape(shape)
        )
    return delta.reshape(shape)


def _in_sector(k: int, delta: np.ndarray) -> np.ndarray:
    w = roots_of_minus_one(k)[0] + delta
    angle = np.angle(w)
    return (np.abs(w) <= 1.0 + _DISC_TOL) & (angle >= -_DISC_TOL) & (angle <= np.pi / (2 * k) + _DISC_TOL)


@lru_cache(maxsize=32)
def onset_radius(k: int) -> float:
    """
    Wing onset radius R_k in normalized units.

    Smallest grid radius beyond which Newton from the g-initializer converges for
    every height in a quarter period, lands in the fundamental sector, and the
    graph height is nonnegative with a nonincreasing envelope.
    """
    _check_k(k)
    radii = np.arange(0.25, 12.0 + 1e-9, 0.25)
    heights = np.linspace(0.0, np.pi / 2, 17)
    good = np.zeros(radii.size, dtype=bool)
    envelope = np.full(radii.size, np.inf)
    for i, x in enumerate(radii):
        try:
            delta = invert_wing(k, np.full(heights.shape, x / k), heights / k)
        except NewtonDivergenceError:
            continue
        t = _wing_coordinates(k, delta)[..., 1]
        good[i] = bool(np.all(_in_sector(k, delta)) and np.all(t >= -1e-12))
        envelope[i] = float(np.max(np.abs(t)))
    ok = good.copy()
    ok[1:] &= envelope[1:] <= envelope[:-1] * (1 + 1e-9)
    # smallest radius from which every larger grid radius is fine
    bad = np.flatnonzero(~ok)
    start = 0 if bad.size == 0 else bad[-1] + 1
    if start >= radii.size:
        raise NewtonDivergenceError(f"no wing onset found for k={k}")
    radius = float(radii[start])
    logger.info("Wing onset radius for k=%d: R_k=%.2f", k, radius)
    return radius


def wing_height(k: int, s, z):
    """
    Graph height t of the raw tower over the asymptotic half-plane of the omega_1 wing.

    Args:
        k: tower order
        s: distance coordinate along the wing, raw units, beyond the onset R_k / k
        z: height, raw units

    Raises:
        NewtonDivergenceError: Below the onset radius or if the inversion fails.
    """
    s_arr = np.asarray(s, dtype=float)
    s_min = onset_radius(k) / k
    if np.any(s_arr < s_min - 1e-12):
        raise NewtonDivergenceError(f"wing coordinate below onset radius {s_min:.4f}")
    delta = invert_wing(k, s_arr, z)
    value = _wing_coordinates(k, delta)[..., 1]
    return float(value) if np.ndim(value) == 0 else value


def wing_graph(k: int, x, z):
    """W_k(x, z): the wing graph in normalized tower units over the plane y = 0."""
    value = k * np.asarray(wing_height(k, np.asarray(x, dtype=float) / k, np.asarray(z, dtype=float) / k))
    return float(value) if np.ndim(value) == 0 else value


def wing_decay_fit(k: int, s_range: tuple[float, float] | None = None, samples: int = 21) -> float:
    """
    Least-squares slope of log max_z |t(s, z)| against s over the given range (raw units).

    Raises:
        InsufficientSamplesError: With fewer than three usable sample radii.
    """
    s_min = onset_radius(k) / k
    lo, hi = s_range if s_range is not None else (s_min, s_min + 5.0)
    if samples < 3 or hi <= lo:
        raise InsufficientSamplesError("wing decay fit needs at least three distinct radii")
    s_values = np.linspace(lo, hi, samples)
    heights = np.linspace(0.0, np.pi / (2 * k), 9)[1:]
    envelope = np.array([np.max(np.abs(wing_height(k, np.full(heights.shape, s), heights))) for s in s_values])
    usable = envelope > 0
    if usable.sum() < 3:
        raise InsufficientSamplesError("wing heights vanished below floating point resolution")
    slope, _ = np.polyfit(s_values[usable], np.log(envelope[usable]), 1)
    logger.info("Wing decay slope for k=%d over [%.2f, %.2f]: %.4f", k, lo, hi, slope)
    return float(slope)


# =============================================================================
# Straightened wings
# =============================================================================


def straightening_radius(m: int) -> float:
    """a_m = m pi/4 - 10."""
    return m * np.pi / 4 - 10.0


def straighten_height(x, height, a: float):
    """Multiply a wing graph height by psi[a+1, a](x)."""
    return cutoff(a + 1.0, a, x) * np.asarray(height)


def straightened_tower_map(k: int, m: int, points, a: float | None = None) -> np.ndarray:
    """
    Straighten the wings of normalized tower points beyond the radius a (default a_m).

    Each point is rotated into the wedge |theta| <= pi/2k around its nearest wing
    direction, its height above that wing's plane is multiplied by psi[a+1, a] of the
    distance coordinate, and it is rotated back. The result commutes with every
    symmetry of the tower.

    Raises:
        MTooSmallError: If the radius does not clear the onset radius R_k.
    """
    radius = straightening_radius(m) if a is None else a
    if radius <= onset_radius(k):
        raise MTooSmallError(f"straightening radius {radius:.3f} does not exceed onset radius {onset_radius(k):.3f}")
    pts = np.asarray(points, dtype=float)
    theta = np.arctan2(pts[..., 1], pts[..., 0])
    sector = np.round(theta * k / np.pi)
    back = -sector * np.pi / k
    c, s = np.cos(back), np.sin(back)
    x_local = c * pts[..., 0] - s * pts[..., 1]
    y_local = s * pts[..., 0] + c * pts[..., 1]
    y_local = np.where(x_local >= radius, straighten_height(x_local, y_local, radius), y_local)
    return np.stack([c * x_local + s * y_local, -s * x_local + c * y_local, pts[..., 2]], axis=-1)


# =============================================================================
# Analytic charts of the fundamental piece
# =============================================================================


def wing_chart_parameter(k: int, delta) -> np.ndarray:
    """Wing chart q = Log(-delta/omega_1); near omega_1 the tower is evaluated from q without cancellation."""
    return np.log(-np.asarray(delta, dtype=complex) / roots_of_minus_one(k)[0])


def chart_points(k: int, param, wing, a: float | None = None) -> np.ndarray:
    """
    Normalized tower points of the fundamental piece from its two analytic charts.

    The core chart is w itself; the wing chart is q with w = omega_1 (1 - e^q). No disc
    check is made, so finite-difference stencils may step slightly outside D. With a
    straightening radius, the height above the x-axis wing plane is multiplied by
    psi[a+1, a] of the distance coordinate.
    """
    _check_k(k)
    param = np.asarray(param, dtype=complex)
    wing = np.broadcast_to(np.asarray(wing, dtype=bool), param.shape)
    raw = np.empty(param.shape + (3,))
    core = ~wing
    if np.any(core):
        raw[core] = _raw_map(k, param[core])
    if np.any(wing):
        q = param[wing]
        omega1 = roots_of_minus_one(k)[0]
        delta = -omega1 * np.exp(q)
        raw[wing] = _raw_map(k, omega1 + delta, delta)
    points = normalize(k, raw)
    if a is not None:
        points[..., 1] = points[..., 1] * cutoff_template(-3.0 + 6.0 * (points[..., 0] - a - 1.0) / -1.0)
    return points
