"""
Fundamental forms, curvature estimates and the discrete Jacobi operator.

Provides:
- forms_at(): first and second fundamental forms of parametrized patches in R^3 or S^3
- Checks of the tower and toral region estimates on assembled surfaces
- Fitted scaling of sup |H| over m
- DiscreteJacobi: cotangent Laplacian plus potential, with the parity-twisted group action
- An experimental Newton iteration toward a nearby minimal surface
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import LinearOperator, onenormest, splu
from scipy.spatial import cKDTree

from clifford_gluing.core.config import settings
from clifford_gluing.core.errors import (
    DegenerateParametrizationError,
    EquivarianceViolationError,
    GraphOverlapError,
    InsufficientSamplesError,
    InvalidArgumentError,
    NearSingularError,
)
from clifford_gluing.schemas.surface import InitialSurfaceSpec
from clifford_gluing.services import spherical_geometry as sphere
from clifford_gluing.services import surface_assembly as assembly
from clifford_gluing.services import surface_mesh
from clifford_gluing.services import weierstrass_tower as tower
from clifford_gluing.services.surface_mesh import SurfaceMesh

logger = logging.getLogger("clifford_gluing.curvature")

_EPS = np.finfo(float).eps
_FIRST_STEP = _EPS ** (1 / 3)
_SECOND_STEP = _EPS ** (1 / 4)


# =============================================================================
# Fundamental forms
# =============================================================================


@dataclass(frozen=True, eq=False)
class FundamentalForms:
    """
    Forms at a batch of samples.

    Attributes:
        g: first fundamental form, shape (..., 2, 2)
        A: nu-directed second fundamental form, shape (..., 2, 2)
        H: trace of g^-1 A
        norm_sq_a: trace of (g^-1 A)^2
        normal: unit normal, tangent to S^3 for the sphere ambient
    """

    g: np.ndarray
    A: np.ndarray
    H: np.ndarray
    norm_sq_a: np.ndarray
    normal: np.ndarray


@dataclass(frozen=True, eq=False)
class ParametrizedPatch:
    """
    A map (u, v) -> points of R^3 or S^3, vectorized over arrays of u and v.

    `jet`, when given, returns exact (f, f_u, f_v, f_uu, f_uv, f_vv); otherwise central
    differences are used with steps proportional to `scale`.
    """

    point: Callable[[np.ndarray, np.ndarray], np.ndarray]
    ambient: str = "sphere"
    jet: Callable | None = None
    scale: float | np.ndarray = 1.0
    orientation: int | np.ndarray = 1
    name: str = ""

    def __post_init__(self):
        if self.ambient not in ("sphere", "euclidean"):
            raise InvalidArgumentError(f"unknown ambient {self.ambient!r}")

    def flipped(self) -> ParametrizedPatch:
        return ParametrizedPatch(
            self.point, self.ambient, self.jet, self.scale, -np.asarray(self.orientation), self.name
        )


def _fd_jet(patch: ParametrizedPatch, u: np.ndarray, v: np.ndarray, factor: float = 1.0) -> tuple[np.ndarray, ...]:
    scale = np.asarray(patch.scale, dtype=float) * factor
    h1 = _FIRST_STEP * scale
    h2 = _SECOND_STEP * scale
    P = patch.point
    f = P(u, v)
    h1e = np.asarray(h1)[..., None]
    h2e = np.asarray(h2)[..., None]
    fu = (P(u + h1, v) - P(u - h1, v)) / (2 * h1e)
    fv = (P(u, v + h1) - P(u, v - h1)) / (2 * h1e)
    fuu = (P(u + h2, v) - 2 * f + P(u - h2, v)) / h2e**2
    fvv = (P(u, v + h2) - 2 * f + P(u, v - h2)) / h2e**2
    fuv = (P(u + h2, v + h2) - P(u + h2, v - h2) - P(u - h2, v + h2) + P(u - h2, v - h2)) / (4 * h2e**2)
    return f, fu, fv, fuu, fuv, fvv


def _forms_from_jet(jet: tuple[np.ndarray, ...], ambient: str, orientation) -> FundamentalForms:
    f, fu, fv, fuu, fuv, fvv = jet

    def dot(a, b):
        return np.einsum("...i,...i->...", a, b)

    E, F, G = dot(fu, fu), dot(fu, fv), dot(fv, fv)
    det = E * G - F * F
    if np.any(det <= 1e-14 * np.maximum(E * G, 1e-300)):
        raise DegenerateParametrizationError("first fundamental form is near-singular")
    if ambient == "euclidean":
        nu = np.cross(fu, fv)
    else:
        nu = surface_mesh.sphere_cross(f, fu, fv)
    nu = nu / np.linalg.norm(nu, axis=-1, keepdims=True)
    nu = nu * np.asarray(orientation)[..., None]
    L, M, N = dot(fuu, nu), dot(fuv, nu), dot(fvv, nu)
    g = np.stack([np.stack([E, F], -1), np.stack([F, G], -1)], -2)
    A = np.stack([np.stack([L, M], -1), np.stack([M, N], -1)], -2)
    inv = np.stack([np.stack([G, -F], -1), np.stack([-F, E], -1)], -2) / det[..., None, None]
    S = inv @ A
    H = np.trace(S, axis1=-2, axis2=-1)
    norm_sq = np.einsum("...ij,...ji->...", S, S)
    return FundamentalForms(g, A, H, norm_sq, nu)


def forms_at(patch: ParametrizedPatch, u, v) -> FundamentalForms:
    """
    Fundamental forms of a patch at parameters (u, v).

    In S^3 the normal is nu_l = det[e_l, f, f_u, f_v], which is tangent to the sphere,
    so pairing second derivatives with it extracts their tangential normal component.
    Finite differences are repeated at half the step; where |A|^2 changes by more than
    10% the Richardson combination of both jets is used instead.

    Raises:
        DegenerateParametrizationError: If g is near-singular at any sample.
    """
    u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    if patch.jet is not None:
        return _forms_from_jet(patch.jet(u, v), patch.ambient, patch.orientation)
    coarse = _fd_jet(patch, u, v)
    forms = _forms_from_jet(coarse, patch.ambient, patch.orientation)
    fine = _fd_jet(patch, u, v, 0.5)
    refined = _forms_from_jet(fine, patch.ambient, patch.orientation)
    scale = np.maximum(np.abs(refined.norm_sq_a), 1e-8)
    unstable = np.abs(forms.norm_sq_a - refined.norm_sq_a) > 0.1 * scale
    if not np.any(unstable):
        return refined
    logger.debug("Richardson extrapolation at %d of %d samples", int(unstable.sum()), unstable.size)
    blended = tuple((4 * b - a) / 3 for a, b in zip(coarse, fine, strict=True))
    extrapolated = _forms_from_jet(blended, patch.ambient, patch.orientation)
    pick = unstable

    def choose(a, b):
        mask = pick.reshape(pick.shape + (1,) * (a.ndim - pick.ndim))
        return np.where(mask, a, b)

    return FundamentalForms(
        choose(extrapolated.g, refined.g),
        choose(extrapolated.A, refined.A),
        choose(extrapolated.H, refined.H),
        choose(extrapolated.norm_sq_a, refined.norm_sq_a),
        choose(extrapolated.normal, refined.normal),
    )


# =============================================================================
# Reference patches
# =============================================================================


def clifford_torus_patch() -> ParametrizedPatch:
    def point(u, v):
        return np.stack([np.cos(u), np.sin(u), np.cos(v), np.sin(v)], axis=-1) / np.sqrt(2.0)

    return ParametrizedPatch(point, "sphere", name="clifford-torus")


def great_sphere_patch() -> ParametrizedPatch:
    def point(u, v):
        return np.stack([np.cos(u) * np.cos(v), np.cos(u) * np.sin(v), np.sin(u), np.zeros_like(u)], axis=-1)

    return ParametrizedPatch(point, "sphere", name="great-sphere")


def distance_sphere_patch(rho: float) -> ParametrizedPatch:
    """The sphere at distance rho from (1, 0, 0, 0); its mean curvature is -+2 cot rho."""

    def point(u, v):
        s = np.sin(rho)
        return np.stack(
            [np.full_like(u, np.cos(rho)), s * np.cos(u) * np.cos(v), s * np.cos(u) * np.sin(v), s * np.sin(u)],
            axis=-1,
        )

    return ParametrizedPatch(point, "sphere", name=f"distance-sphere-{rho:g}")


def euclidean_tower_patch(k: int) -> ParametrizedPatch:
    """The normalized tower in the chart w = u + iv with its exact jet."""
    return ParametrizedPatch(
        point=lambda u, v: tower.tower_point(k, u + 1j * v),
        ambient="euclidean",
        jet=lambda u, v: tower.tower_jet(k, u, v),
        name=f"tower-{k}",
    )


def placement_patch(
    placement: assembly.TowerPlacement, element: np.ndarray, wing, scale=1.0, orientation=1
) -> ParametrizedPatch:
    """One replica of a tower's fundamental piece as it sits in S^3."""
    rows = np.asarray(element)

    def point(u, v):
        param = np.asarray(u) + 1j * np.asarray(v)
        return placement.evaluate(np.broadcast_to(rows, param.shape + (4,)), np.broadcast_to(wing, param.shape), param)

    return ParametrizedPatch(point, "sphere", scale=scale, orientation=orientation, name=placement.name)


def _chart_scale(k: int, wing: np.ndarray, param: np.ndarray) -> np.ndarray:
    gap = np.abs(param - tower.roots_of_minus_one(k)[0])
    return np.where(wing, 1.0, np.clip(gap, 1e-3, 1.0))


def vertex_curvatures(surface: assembly.AssembledSurface) -> tuple[np.ndarray, np.ndarray]:
    """
    Analytic (H, |A|^2) at every mesh vertex from its chart, with nu matching the mesh normal.
    """
    mesh = surface.mesh
    normals = surface_mesh.vertex_normals(mesh)
    H = np.empty(mesh.n_vertices)
    norm_sq = np.empty(mesh.n_vertices)
    for p, (spot, group) in enumerate(zip(surface.placements, surface.groups, strict=True)):
        mask = surface.vertex_placement == p
        if not np.any(mask):
            continue
        rows = assembly._element_arrays(group)[surface.vertex_element[mask]]
        wing = surface.vertex_wing[mask]
        param = surface.vertex_param[mask]

        def point(u, v, rows=rows, wing=wing, spot=spot):
            return spot.evaluate(rows, wing, np.asarray(u) + 1j * np.asarray(v))

        patch = ParametrizedPatch(point, "sphere", scale=_chart_scale(spot.k, wing, param))
        forms = forms_at(patch, param.real, param.imag)
        sign = np.sign(np.einsum("ij,ij->i", forms.normal, normals[mask]))
        H[mask] = forms.H * np.where(sign == 0, 1.0, sign)
        norm_sq[mask] = forms.norm_sq_a
    return H, norm_sq


# =============================================================================
# Estimate checks
# =============================================================================


def _wing_samples(block_k: int, lo: float, hi: float, n_x: int, n_z: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x = np.linspace(lo, hi, n_x)
    z = np.linspace(0.0, np.pi / 2, n_z + 2)[1:-1]
    xx, zz = np.meshgrid(x, z, indexing="ij")
    q = tower.wing_chart_parameter(block_k, tower.invert_wing(block_k, xx / block_k, zz / block_k))
    return xx, zz, q


def verify_toral_estimates(surface: assembly.AssembledSurface, b: float | None = None, samples: int = 24) -> dict:
    """
    Weighted deviation of the toral regions from the Clifford torus.

    For every tower, the wing from b to the seam is sampled in the identity replica.
    With d the spherical distance to the region boundary x = b, reports
    sup ||A|^2 - 2| e^{m_C d}/m_C and sup |H| e^{m_C d}/m_C, the exponential rate of
    ||A|^2 - 2| fitted between b and the straightening radius, and the deviation
    beyond the cutoff band (where the wing is an exact torus annulus).
    """
    b = settings.REGION_B if b is None else b
    identity = np.array([0, 0, 1, 0])
    out = {}
    for spot, block in zip(surface.placements, surface.blocks, strict=True):
        b_eff = min(max(b, block.onset), spot.a - 0.5)
        xx, _, q = _wing_samples(spot.k, b_eff, spot.x_seam, samples, 6)
        forms = forms_at(placement_patch(spot, identity, True), q.real, q.imag)
        d = (xx - b_eff) / spot.transverse
        deviation = np.abs(forms.norm_sq_a - 2.0)
        weight = np.exp(spot.m_c * d) / spot.m_c
        before = xx[:, 0] <= spot.a
        envelope = deviation.max(axis=1)
        usable = before & (envelope > 1e-12)
        if usable.sum() >= 3:
            slope, _ = np.polyfit(d[usable, 0], np.log(envelope[usable]), 1)
            rate = float(-slope)
        else:
            rate = float("nan")
        beyond = xx[:, 0] >= spot.a + 1.0
        out[spot.name] = {
            "m_C": spot.m_c,
            "b": b_eff,
            "sup_weighted_A": float(np.max(deviation[before] * weight[before])) if before.any() else 0.0,
            "sup_weighted_H": float(np.max(np.abs(forms.H[before]) * weight[before])) if before.any() else 0.0,
            "fitted_rate": rate,
            "interior_deviation": float(deviation[beyond].max()) if beyond.any() else float("nan"),
        }
        logger.info("Toral estimates on %s: %s", spot.name, out[spot.name])
    return out


def verify_tower_estimates(surface: assembly.AssembledSurface) -> dict:
    """
    Compare the tower regions with the rescaled Euclidean tower.

    At the core grid of each tower, reports relative sup differences between lambda^2 g
    and the tower metric, and between |A|^2 / lambda^2 and the tower's |A|^2.
    """
    identity = np.array([0, 0, 1, 0])
    out = {}
    for spot, block in zip(surface.placements, surface.blocks, strict=True):
        w = block.param[: block.core_rows + 1].ravel()
        w = w[np.abs(w - tower.roots_of_minus_one(spot.k)[0]) > 1e-3]
        scale = _chart_scale(spot.k, np.zeros(w.shape, dtype=bool), w)
        sphere_forms = forms_at(placement_patch(spot, identity, False, scale=scale), w.real, w.imag)
        flat = forms_at(euclidean_tower_patch(spot.k), w.real, w.imag)
        lam = spot.transverse
        metric = np.max(np.abs(lam**2 * sphere_forms.g - flat.g)) / np.max(np.abs(flat.g))
        second = np.max(np.abs(sphere_forms.norm_sq_a / lam**2 - flat.norm_sq_a)) / np.max(flat.norm_sq_a)
        out[spot.name] = {"m_C": spot.m_c, "metric": float(metric), "second_form": float(second)}
    logger.info("Tower estimates: %s", out)
    return out


def sup_mean_curvature(spec: InitialSurfaceSpec, J: int = 8, uniform: bool = False) -> float:
    """sup |H| over the core and wing grid of every tower's identity replica."""
    identity = np.array([0, 0, 1, 0])
    best = 0.0
    for spot in assembly.tower_placements(spec, uniform=uniform):
        block = assembly.build_block(spot.k, J, (np.pi / 2) / J, spot.a, spot.x_seam)
        param = block.param.ravel()
        wing = block.wing.ravel()
        scale = _chart_scale(spot.k, wing, param)
        patch = placement_patch(spot, identity, wing, scale=scale)
        forms = forms_at(patch, param.real, param.imag)
        best = max(best, float(np.max(np.abs(forms.H))))
    return best


def mean_curvature_scaling(spec: InitialSurfaceSpec, m_list=(4, 8, 16)) -> dict:
    """
    Fit sup |H| ~ m^p over the given m values with the other data fixed.

    Every member of the sweep uses the uniform straightening rule; the radii a are reported.

    Raises:
        InsufficientSamplesError: With fewer than two distinct m values.
    """
    m_values = sorted(set(int(m) for m in m_list))
    if len(m_values) < 2:
        raise InsufficientSamplesError("the scaling fit needs at least two values of m")
    specs = [spec.model_copy(update={"m": m}) for m in m_values]
    sups = np.array([sup_mean_curvature(item, uniform=True) for item in specs])
    radii = [[spot.a for spot in assembly.tower_placements(item, uniform=True)] for item in specs]
    p, _ = np.polyfit(np.log(m_values), np.log(sups), 1)
    ratios = sups / np.sqrt(m_values)
    logger.info("sup|H| over m=%s: %s, fitted exponent %.3f", m_values, sups.tolist(), p)
    return {
        "m": m_values,
        "sup_H": sups.tolist(),
        "exponent": float(p),
        "ratio_sqrt_m": ratios.tolist(),
        "straightening": "uniform",
        "a": radii,
    }


def first_variation_check(
    patch: ParametrizedPatch,
    u_range: tuple[float, float],
    v_range: tuple[float, float],
    n: int = 81,
    t: float = 1e-4,
) -> dict:
    """
    Compare d/dt Area(f + t phi nu) at t = 0 with -int H phi dA for a bump phi.

    The bump is supported inside the sampled rectangle; in S^3 the variation follows
    the geodesic cos(t phi) f + sin(t phi) nu.
    """
    u = np.linspace(*u_range, n)
    v = np.linspace(*v_range, n)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    forms = forms_at(patch, uu, vv)
    f = patch.point(uu, vv)
    cu, cv = np.mean(u_range), np.mean(v_range)
    ru, rv = 0.45 * (u_range[1] - u_range[0]), 0.45 * (v_range[1] - v_range[0])
    rho2 = ((uu - cu) / ru) ** 2 + ((vv - cv) / rv) ** 2
    bump = np.where(rho2 < 1, np.exp(-1.0 / np.maximum(1 - rho2, 1e-300)), 0.0)
    du, dv = u[1] - u[0], v[1] - v[0]

    def area(points):
        pu = np.gradient(points, du, axis=0)
        pv = np.gradient(points, dv, axis=1)
        E = np.einsum("...i,...i->...", pu, pu)
        F = np.einsum("...i,...i->...", pu, pv)
        G = np.einsum("...i,...i->...", pv, pv)
        return float(np.sum(np.sqrt(np.maximum(E * G - F * F, 0.0))) * du * dv)

    def moved(s):
        if patch.ambient == "sphere":
            return np.cos(s * bump)[..., None] * f + np.sin(s * bump)[..., None] * forms.normal
        return f + (s * bump)[..., None] * forms.normal

    derivative = (area(moved(t)) - area(moved(-t))) / (2 * t)
    element = np.sqrt(np.linalg.det(forms.g))
    predicted = float(-np.sum(forms.H * bump * element) * du * dv)
    error = abs(derivative - predicted) / max(abs(predicted), 1e-12)
    return {"dA_dt": float(derivative), "predicted": predicted, "relative_error": float(error)}


def orientation_flip_check(patch: ParametrizedPatch, u, v) -> dict:
    """Flipping nu flips H and A and leaves |A|^2 unchanged."""
    plus = forms_at(patch, u, v)
    minus = forms_at(patch.flipped(), u, v)
    return {
        "H_sum": float(np.max(np.abs(plus.H + minus.H))),
        "norm_sq_difference": float(np.max(np.abs(plus.norm_sq_a - minus.norm_sq_a))),
    }


# =============================================================================
# Discrete Jacobi operator
# =============================================================================


@dataclass(eq=False)
class DiscreteJacobi:
    """
    L = Delta_mesh + V with V = |A|^2 + 2 in S^3 (|A|^2 in R^3).

    Delta_mesh u = -C u / areas with C the cotangent stiffness matrix, so L is symmetric
    for the area-weighted inner product. With a group, `permutations[g][i]` is the vertex
    g^-1(v_i), and (g u)_i = parity(g) u[permutations[g][i]].
    """

    stiffness: sparse.csr_matrix
    areas: np.ndarray
    potential: np.ndarray
    permutations: list[np.ndarray] = field(default_factory=list)
    parities: np.ndarray = field(default_factory=lambda: np.ones(0, dtype=int))
    ambient: str = "sphere"

    @classmethod
    def from_mesh(
        cls,
        mesh: SurfaceMesh,
        norm_sq_a,
        ambient: str = "sphere",
        group: list[sphere.SphereIsometry] | None = None,
        tol: float = 1e-8,
    ) -> DiscreteJacobi:
        """
        Raises:
            EquivarianceViolationError: If a group element does not permute the vertices.
        """
        stiffness, areas = surface_mesh.cotan_weights(mesh.vertices, mesh.triangles)
        constant = 2.0 if ambient == "sphere" else 0.0
        potential = np.broadcast_to(np.asarray(norm_sq_a, dtype=float), areas.shape) + constant
        perms, parities = [], []
        if group:
            index = cKDTree(mesh.vertices)
            for g in group:
                distances, perm = index.query(g.inverse().apply(mesh.vertices))
                if np.max(distances) > tol:
                    logger.error("Group element %s moves a vertex off the mesh by %.3e", g.label, np.max(distances))
                    raise EquivarianceViolationError("mesh vertices are not permuted by the group")
                perms.append(perm)
                parities.append(g.parity)
        return cls(stiffness, areas, np.array(potential), perms, np.array(parities, dtype=int), ambient)

    @property
    def n(self) -> int:
        return len(self.areas)

    def apply(self, u: np.ndarray) -> np.ndarray:
        return -(self.stiffness @ u) / self.areas + self.potential * u

    def weighted_matrix(self) -> sparse.csr_matrix:
        """areas * L, a symmetric matrix."""
        return (-self.stiffness + sparse.diags(self.areas * self.potential)).tocsr()

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(np.sum(self.areas * u * v))

    def apply_group(self, index: int, u: np.ndarray) -> np.ndarray:
        return self.parities[index] * np.asarray(u)[self.permutations[index]]

    def projector(self) -> sparse.csr_matrix:
        """Average of the parity-twisted group action; identity without a group."""
        if not self.permutations:
            return sparse.identity(self.n, format="csr")
        rows = np.tile(np.arange(self.n), len(self.permutations))
        cols = np.concatenate(self.permutations)
        vals = np.repeat(self.parities.astype(float), self.n) / len(self.permutations)
        return sparse.csr_matrix((vals, (rows, cols)), shape=(self.n, self.n))

    def project(self, u: np.ndarray) -> np.ndarray:
        return self.projector() @ u

    def odd_basis(self) -> sparse.csc_matrix:
        """Columns spanning the G-odd functions: one per orbit not forced to vanish."""
        P = self.projector().tocsc()
        if not self.permutations:
            return P
        reps = np.unique(np.min(np.stack(self.permutations), axis=0))
        basis = P[:, reps]
        norms = np.sqrt(np.asarray(basis.multiply(basis).sum(axis=0)).ravel())
        return basis[:, np.flatnonzero(norms > 1e-12)].tocsc()


def jacobi_apply(L: DiscreteJacobi, u: np.ndarray) -> np.ndarray:
    return L.apply(np.asarray(u, dtype=float))


def _condition_estimate(matrix: sparse.csc_matrix, lu) -> float:
    n = matrix.shape[0]
    inverse = LinearOperator(
        (n, n), matvec=lu.solve, rmatvec=lambda x: lu.solve(x, trans="T"), dtype=float
    )
    if n < 4:
        return float(np.linalg.cond(matrix.toarray()))
    return float(onenormest(matrix) * onenormest(inverse))


def jacobi_solve(L: DiscreteJacobi, f: np.ndarray, condition_limit: float | None = None) -> np.ndarray:
    """
    Solve L u = f on the G-odd subspace.

    The forcing is projected first. A forcing with no odd part returns zero with a
    warning. The projected system is reduced to orbit representatives and solved by
    sparse LU.

    Raises:
        NearSingularError: If the reduced system is singular or its condition estimate
            exceeds CONDITION_LIMIT.
    """
    limit = condition_limit or settings.CONDITION_LIMIT
    f = np.asarray(f, dtype=float)
    if not np.any(f):
        return np.zeros_like(f)
    odd = L.project(f)
    if np.linalg.norm(odd) <= 1e-12 * np.linalg.norm(f):
        logger.warning("Forcing has no G-odd part; returning zero")
        return np.zeros_like(f)
    B = L.odd_basis()
    K = (B.T @ L.weighted_matrix() @ B).tocsc()
    rhs = B.T @ (L.areas * odd)
    try:
        lu = splu(K)
    except RuntimeError as exc:
        logger.error("Jacobi operator is singular on the odd subspace")
        raise NearSingularError("Jacobi operator is singular on the odd subspace") from exc
    condition = _condition_estimate(K, lu)
    if not np.isfinite(condition) or condition > limit:
        logger.error("Jacobi condition estimate %.3e exceeds %.1e", condition, limit)
        raise NearSingularError(f"condition estimate {condition:.3e} exceeds {limit:.1e}")
    x = lu.solve(np.asarray(rhs, dtype=float))
    logger.debug("Jacobi solve on %d odd unknowns, condition %.3e", K.shape[0], condition)
    return np.asarray(B @ x).ravel()


def jacobi_operator(surface: assembly.AssembledSurface, with_group: bool = True) -> DiscreteJacobi:
    """The discrete Jacobi operator of an assembled surface with analytic |A|^2 at the vertices."""
    _, norm_sq = vertex_curvatures(surface)
    group = assembly.surface_group(surface.spec) if with_group else None
    return DiscreteJacobi.from_mesh(surface.mesh, norm_sq, "sphere", group)


# =============================================================================
# Perturbation toward minimality
# =============================================================================


@dataclass(frozen=True, eq=False)
class PerturbationResult:
    u: np.ndarray
    history: list[float]
    converged: bool
    iterations: int

    def to_dict(self) -> dict:
        return {
            "sup_H": self.history,
            "converged": self.converged,
            "iterations": self.iterations,
            "sup_u": float(np.max(np.abs(self.u))) if self.u.size else 0.0,
        }


def _injectivity_bound(mesh: SurfaceMesh) -> np.ndarray:
    edges = mesh.edges()
    lengths = np.linalg.norm(mesh.vertices[edges[:, 0]] - mesh.vertices[edges[:, 1]], axis=1)
    bound = np.full(mesh.n_vertices, np.inf)
    np.minimum.at(bound, edges[:, 0], lengths)
    np.minimum.at(bound, edges[:, 1], lengths)
    return 0.5 * bound


def _deformed_mean_curvature(mesh: SurfaceMesh, normals: np.ndarray, u: np.ndarray) -> np.ndarray:
    moved = np.cos(u)[:, None] * mesh.vertices + np.sin(u)[:, None] * normals
    deformed = SurfaceMesh(moved, mesh.triangles)
    return surface_mesh.mean_curvature_discrete(deformed)


def perturb_to_minimal(
    mesh: SurfaceMesh,
    L: DiscreteJacobi,
    max_iters: int = 10,
    tol: float = 1e-12,
    max_halvings: int = 5,
) -> PerturbationResult:
    """
    Newton iteration u <- u - L^-1 H[u] for the normal graph exp_x(u nu).

    H[u] is the discrete mean curvature of the deformed mesh. Steps are halved up to
    `max_halvings` times while sup |H| grows. Success means sup |H| dropped at least
    five-fold; failing that is reported, not raised.

    Raises:
        GraphOverlapError: If |u| exceeds half the shortest incident edge at a vertex.
    """
    normals = surface_mesh.vertex_normals(mesh)
    bound = _injectivity_bound(mesh)
    u = np.zeros(mesh.n_vertices)
    H = _deformed_mean_curvature(mesh, normals, u)
    history = [float(np.max(np.abs(H)))]
    iterations = 0
    for _ in range(max_iters):
        if history[-1] <= tol:
            break
        step = -jacobi_solve(L, H)
        factor = 1.0
        for _halving in range(max_halvings + 1):
            trial = u + factor * step
            if np.any(np.abs(trial) > bound):
                logger.error("Normal graph exceeds the injectivity bound")
                raise GraphOverlapError("normal graph offset exceeds the local injectivity bound")
            trial_H = _deformed_mean_curvature(mesh, normals, trial)
            if np.max(np.abs(trial_H)) <= history[-1]:
                break
            factor *= 0.5
        u, H = trial, trial_H
        history.append(float(np.max(np.abs(H))))
        iterations += 1
        logger.info("Perturbation iteration %d: sup|H| = %.3e", iterations, history[-1])
    converged = history[-1] <= tol or history[-1] * 5 <= history[0]
    if not converged:
        logger.warning("Perturbation reduced sup|H| only from %.3e to %.3e", history[0], history[-1])
    return PerturbationResult(u, history, converged, iterations)
