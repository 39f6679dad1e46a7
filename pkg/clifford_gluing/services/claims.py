"""
Registry of verifiable claims.

Each claim is a callable registered under a dotted id together with the statement it
checks (its anchor) and the suites it belongs to. Running a claim produces one
VerificationReport row; library errors become failed rows carrying the error and its
exit code instead of escaping the suite.

Suites:
- acceptance: the gating acceptance matrix
- quick: fast smoke checks
- extended: further geometric checks of assembled surfaces
"""

import logging
import time
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from clifford_gluing.core.config import RunConfig
from clifford_gluing.core.errors import CliffordGluingError
from clifford_gluing.schemas.report import VerificationReport
from clifford_gluing.schemas.surface import InitialSurfaceSpec
from clifford_gluing.services import curvature_engine as curvature
from clifford_gluing.services import spectral_lab as spectral
from clifford_gluing.services import spherical_geometry as sphere
from clifford_gluing.services import surface_assembly as assembly
from clifford_gluing.services import surface_mesh
from clifford_gluing.services import weierstrass_tower as tower

logger = logging.getLogger("clifford_gluing.claims")

SUITES = ("acceptance", "quick", "extended")


@dataclass
class Outcome:
    measured: Any
    expected: Any
    passed: bool
    details: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Claim:
    claim_id: str
    anchor: str
    check: Callable[[RunConfig], Outcome]
    suites: tuple[str, ...]
    gating: bool = True
    slow: bool = False


class ClaimRegistry:
    def __init__(self):
        self._claims: dict[str, Claim] = {}

    def register(self, claim_id: str, anchor: str, suites=("acceptance",), gating: bool = True, slow: bool = False):
        """
        Decorator to register a check under a claim id.

        Args:
            claim_id: Dotted identifier, unique in the registry
            anchor: The statement the check is tied to, or "plumbing"
            suites: Suites the claim runs in
            gating: False for experimental claims that never fail a suite
            slow: True for checks that take minutes
        """

        def decorator(func: Callable[[RunConfig], Outcome]):
            if claim_id in self._claims:
                raise ValueError(f"claim {claim_id!r} registered twice")
            unknown = set(suites) - set(SUITES)
            if unknown:
                raise ValueError(f"unknown suites {sorted(unknown)}")
            self._claims[claim_id] = Claim(claim_id, anchor, func, tuple(suites), gating, slow)
            return func

        return decorator

    def get(self, claim_id: str) -> Claim:
        try:
            return self._claims[claim_id]
        except KeyError:
            raise KeyError(f"unknown claim {claim_id!r}") from None

    def get_claims(self) -> dict[str, Claim]:
        return self._claims

    def suite(self, name: str) -> list[Claim]:
        if name not in SUITES:
            raise ValueError(f"unknown suite {name!r}")
        return [claim for claim in self._claims.values() if name in claim.suites]

    def anchors(self) -> dict[str, str]:
        return {claim_id: claim.anchor for claim_id, claim in sorted(self._claims.items())}

    def run(self, claim_id: str, config: RunConfig | None = None) -> VerificationReport:
        """Run one claim and wrap its outcome in a report row."""
        claim = self.get(claim_id)
        config = config or RunConfig()
        start = time.perf_counter()
        try:
            outcome = claim.check(config)
        except CliffordGluingError as exc:
            logger.error("Claim %s raised %s: %s", claim_id, type(exc).__name__, exc)
            outcome = Outcome(
                None, None, False, {"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}
            )
        except Exception as exc:
            logger.exception("Claim %s failed with an internal error", claim_id)
            details = {"error": type(exc).__name__, "message": str(exc), "exit_code": CliffordGluingError.exit_code}
            outcome = Outcome(None, None, False, details)
        runtime = time.perf_counter() - start
        logger.info("Claim %s: %s in %.2fs", claim_id, "pass" if outcome.passed else "FAIL", runtime)
        return VerificationReport(
            claim_id=claim.claim_id,
            anchor=claim.anchor,
            measured=outcome.measured,
            expected=outcome.expected,
            passed=bool(outcome.passed),
            gating=claim.gating,
            runtime=runtime,
            details=outcome.details,
        )


claim_registry = ClaimRegistry()


# =============================================================================
# Initial surfaces
# =============================================================================

GENUS_MATRIX = (
    "M(2,1,1,1,0)",
    "M(2,2,1,1,0)",
    "M(3,1,1,1,0)",
    "M(3,2,1,2,0)",
    "M(2,1,1,2,1)",
    "N(2,1,1,1,1,0,0)",
    "N(2,1,2,1,1,0,0)",
    "N(3,1,1,1,1,0,0)",
)


def _genus_rows(labels, resolution: int) -> dict[str, dict]:
    rows = {}
    for label in labels:
        spec = InitialSurfaceSpec.parse(label)
        surface = assembly.assemble(spec, resolution)
        rows[label] = {"measured": assembly.genus(surface), "expected": spec.expected_genus()}
    return rows


@claim_registry.register(
    "initial_surface.genus",
    "genus k(k-1)m(n1+n2)+1 for M and 2k^2 m(n'_1+n'_-1)+4kmn(k-1)+1 for N",
)
def genus_matrix(config: RunConfig) -> Outcome:
    rows = _genus_rows(GENUS_MATRIX, config.resolution)
    passed = all(row["measured"] == row["expected"] for row in rows.values())
    measured = {label: row["measured"] for label, row in rows.items()}
    expected = {label: row["expected"] for label, row in rows.items()}
    return Outcome(measured, expected, passed)


@claim_registry.register("initial_surface.genus_small", "genus of M(2,1,1,1,0) is 5", suites=("quick",))
def genus_small(config: RunConfig) -> Outcome:
    row = _genus_rows(GENUS_MATRIX[:1], config.resolution)[GENUS_MATRIX[0]]
    return Outcome(row["measured"], row["expected"], row["measured"] == row["expected"])


@claim_registry.register(
    "symmetry.suite",
    "G_{k,m} and G'_{k,m} preserve the initial surfaces; G_min has order 4; circle rotations compose",
)
def symmetry_suite(config: RunConfig) -> Outcome:
    details: dict = {}
    passed = True
    for label in ("M(2,1,1,1,0)", "N(2,1,1,1,1,0,0)"):
        spec = InitialSurfaceSpec.parse(label)
        surface = assembly.assemble(spec, config.resolution)
        group = assembly.surface_group(spec)
        residual = assembly.symmetry_invariance(surface.mesh, group)
        bound = config.hausdorff_factor * surface.mesh.h
        control = assembly.symmetry_invariance(surface.mesh, [assembly.negative_control(spec)])
        details[label] = {"order": len(group), "residual": residual, "bound": bound, "negative_control": control}
        passed &= residual <= bound
    g_min = sphere.build_symmetry_group(2, 1, "G_min")
    symcomp = sphere.symcomp_residuals(2, seed=config.seed)
    details["G_min_order"] = len(g_min)
    details["composition"] = symcomp
    passed &= len(g_min) == 4 and max(symcomp.values()) <= 1e-12
    worst = max(details[label]["residual"] for label in ("M(2,1,1,1,0)", "N(2,1,1,1,1,0,0)"))
    return Outcome(worst, "<= 2h", passed, details)


@claim_registry.register(
    "initial_surface.scaffold", "the scaffolding circles lie on the initial surface", suites=("extended",)
)
def scaffold_on_surface(config: RunConfig) -> Outcome:
    surface = assembly.assemble(InitialSurfaceSpec.M(2, 4, 1, 1, 0), config.resolution)
    residual = assembly.scaffold_residual(surface)
    bound = config.hausdorff_factor * surface.mesh.h
    return Outcome(residual, bound, residual <= bound)


@claim_registry.register(
    "initial_surface.embedded", "initial surfaces are embedded", suites=("extended",)
)
def embedded(config: RunConfig) -> Outcome:
    surface = assembly.assemble(InitialSurfaceSpec.M(2, 1, 1, 1, 0), config.resolution)
    report = assembly.embeddedness_check(surface.mesh)
    return Outcome(len(report.pairs), 0, report.embedded, {"candidates": report.candidates})


@claim_registry.register(
    "initial_surface.regions",
    "tower and toral regions cover the initial surface",
    suites=("extended",),
)
def regions_cover(config: RunConfig) -> Outcome:
    surface = assembly.assemble(InitialSurfaceSpec.M(2, 4, 1, 1, 0), config.resolution)
    regions = assembly.region_decomposition(surface, config.region_b)
    return Outcome(regions.counts(), "every vertex tagged", regions.covers())


@claim_registry.register(
    "initial_surface.congruence",
    "M(k,m,n1,n2,0) and M(k,m,n1,n2,1) are congruent unless m is even and n1, n2 are odd",
    suites=("extended",),
)
def sigma_congruence(config: RunConfig) -> Outcome:
    result = assembly.congruence_residual(InitialSurfaceSpec.M(2, 1, 1, 1, 0), config.resolution)
    bound = config.hausdorff_factor * result["h"]
    return Outcome(result["residual"], bound, result["residual"] <= bound, result)


ESTIMATE_M = (8, 16)


def _estimate_surfaces(config: RunConfig) -> dict[int, assembly.AssembledSurface]:
    """M(2,m,1,1,0) for the estimate sweep, all straightened by the same rule."""
    return {
        m: assembly.assemble(InitialSurfaceSpec.M(2, m, 1, 1, 0), config.resolution, uniform=True)
        for m in ESTIMATE_M
    }


@claim_registry.register(
    "initial_surface.toral_estimates",
    "toral regions deviate from the Clifford torus by O(e^{-m_C d})",
    suites=("extended",),
    slow=True,
)
def toral_estimates(config: RunConfig) -> Outcome:
    surfaces = _estimate_surfaces(config)
    rows = {m: curvature.verify_toral_estimates(surface, config.region_b) for m, surface in surfaces.items()}
    first = rows[ESTIMATE_M[0]]
    interior = [row["interior_deviation"] for row in first.values() if np.isfinite(row["interior_deviation"])]
    worst_interior = max(interior) if interior else 0.0
    rates = [row["fitted_rate"] / row["m_C"] for row in first.values() if np.isfinite(row["fitted_rate"])]
    worst_rate = min(rates) if rates else float("nan")
    sups = {
        m: max(max(row["sup_weighted_A"], row["sup_weighted_H"]) for row in table.values())
        for m, table in rows.items()
    }
    growth = sups[ESTIMATE_M[-1]] / max(sups[ESTIMATE_M[0]], 1e-300)
    passed = worst_interior <= 1e-4 and bool(rates) and worst_rate >= 0.8 and growth <= 2.0
    details = {
        "per_m": rows,
        "interior_deviation": worst_interior,
        "rate_over_m_C": worst_rate,
        "weighted_sup": sups,
        "weighted_sup_growth": growth,
    }
    return Outcome(
        {"interior": worst_interior, "rate_over_m_C": worst_rate, "growth": growth},
        {"interior": 1e-4, "rate_over_m_C": 0.8, "growth": 2.0},
        passed,
        details,
    )


@claim_registry.register(
    "initial_surface.tower_estimates",
    "tower regions are close to rescaled Karcher-Scherk towers, within C m^{-1/2} for C stable in m",
    suites=("extended",),
    slow=True,
)
def tower_estimates(config: RunConfig) -> Outcome:
    surfaces = _estimate_surfaces(config)
    rows = {m: curvature.verify_tower_estimates(surface) for m, surface in surfaces.items()}
    constants = {
        m: np.sqrt(m) * max(max(row["metric"], row["second_form"]) for row in table.values())
        for m, table in rows.items()
    }
    growth = constants[ESTIMATE_M[-1]] / max(constants[ESTIMATE_M[0]], 1e-300)
    return Outcome(growth, 2.0, growth <= 2.0, {"per_m": rows, "constants": constants})


# =============================================================================
# Towers and the map Phi
# =============================================================================


@claim_registry.register("tower.minimality", "the Karcher-Scherk tower is minimal")
def tower_minimality(config: RunConfig) -> Outcome:
    details = {}
    for k in (2, 3, 4):
        w = tower.sector_samples(k, config.tower_resolution, max(8, config.tower_resolution // 2))
        w = w[(np.abs(w - tower.roots_of_minus_one(k)[0]) > 1e-3) & (np.abs(w) < 1.0 - 1e-9)]
        forms = curvature.forms_at(curvature.euclidean_tower_patch(k), w.real, w.imag)
        relative = np.abs(forms.H) / np.maximum(np.sqrt(forms.norm_sq_a), 1e-8)
        details[k] = float(np.max(relative))
    worst = max(details.values())
    return Outcome(worst, 1e-6, worst <= 1e-6, {"per_k": details})


@claim_registry.register("tower.wing_decay", "wings decay like e^{-k s}")
def wing_decay(config: RunConfig) -> Outcome:
    slopes = {k: tower.wing_decay_fit(k) for k in (2, 3)}
    passed = all(-1.2 * k <= slope <= -0.8 * k and slope <= -1 for k, slope in slopes.items())
    return Outcome(slopes, "[-1.2k, -0.8k]", passed)


@claim_registry.register(
    "sphere.pullback_identity",
    "Phi pulls the round metric back to dr^2 + sin^2 r dtheta^2 + 2 sin^2 r dtheta dz + dz^2",
    suites=("acceptance", "quick"),
)
def pullback_identity(config: RunConfig) -> Outcome:
    rng = np.random.default_rng(config.seed)
    n = 100
    cylindrical = np.stack([rng.uniform(0.05, 1.5, n), rng.uniform(0, 2 * np.pi, n), rng.uniform(-np.pi, np.pi, n)], -1)
    cartesian = np.stack([rng.uniform(-1, 1, n), rng.uniform(-1, 1, n), rng.uniform(-np.pi, np.pi, n)], -1)
    residuals = {
        "cylindrical": float(
            np.max(np.abs(sphere.phi_pullback_metric(cylindrical) - sphere.gram_matrix_fd(cylindrical)))
        ),
        "cartesian": float(
            np.max(
                np.abs(
                    sphere.phi_pullback_metric(cartesian, "cartesian") - sphere.gram_matrix_fd(cartesian, chart="cartesian")
                )
            )
        ),
    }
    worst = max(residuals.values())
    return Outcome(worst, 1e-6, worst <= 1e-6, residuals)


# =============================================================================
# Curvature and the Jacobi operator
# =============================================================================


@claim_registry.register(
    "clifford_torus.constants",
    "the Clifford torus has H = 0, |A|^2 = 2 and Jacobi operator Delta + 4",
    suites=("acceptance", "quick"),
)
def clifford_constants(config: RunConfig) -> Outcome:
    u, v = np.meshgrid(np.linspace(0, 2 * np.pi, 17), np.linspace(0, 2 * np.pi, 17), indexing="ij")
    forms = curvature.forms_at(curvature.clifford_torus_patch(), u, v)
    mesh = surface_mesh.clifford_torus_mesh(32)
    jacobi = curvature.DiscreteJacobi.from_mesh(mesh, 2.0)
    constant = curvature.jacobi_apply(jacobi, np.ones(mesh.n_vertices))
    details = {
        "sup_H": float(np.max(np.abs(forms.H))),
        "sup_A_defect": float(np.max(np.abs(forms.norm_sq_a - 2.0))),
        "constant_defect": float(np.max(np.abs(constant - 4.0))),
    }
    passed = details["sup_H"] <= 1e-6 and details["sup_A_defect"] <= 1e-6 and details["constant_defect"] <= 1e-10
    return Outcome(details, {"H": 0.0, "A2": 2.0, "L1": 4.0}, passed)


@claim_registry.register(
    "curvature.scaling",
    "sup |H| on the initial surfaces grows at most like m^{1/2}",
    slow=True,
)
def curvature_scaling(config: RunConfig) -> Outcome:
    result = curvature.mean_curvature_scaling(InitialSurfaceSpec.M(2, 4, 1, 1, 0), config.m_list)
    ratios = result["ratio_sqrt_m"]
    bounded = max(ratios) <= 2.0 * ratios[0]
    return Outcome(result["exponent"], 0.6, result["exponent"] <= 0.6 and bounded, result)


@claim_registry.register(
    "jacobi.solve",
    "the Jacobi operator is invertible on G-odd functions",
)
def jacobi_solve(config: RunConfig) -> Outcome:
    surface = assembly.assemble(InitialSurfaceSpec.M(2, 4, 1, 1, 0), config.resolution)
    jacobi = curvature.jacobi_operator(surface)
    rng = np.random.default_rng(config.seed)
    target = jacobi.project(rng.standard_normal(jacobi.n))
    recovered = curvature.jacobi_solve(jacobi, jacobi.apply(target))
    error = float(np.max(np.abs(recovered - target)) / np.max(np.abs(target)))
    details = {"unknowns": int(jacobi.odd_basis().shape[1]), "vertices": jacobi.n}
    return Outcome(error, 1e-6, error <= 1e-6, details)


@claim_registry.register(
    "perturb.experimental",
    "a small G-odd normal graph over the initial surface is minimal",
    gating=False,
    slow=True,
)
def perturb_experimental(config: RunConfig) -> Outcome:
    surface = assembly.assemble(InitialSurfaceSpec.M(2, 8, 1, 1, 0), config.resolution)
    jacobi = curvature.jacobi_operator(surface)
    result = curvature.perturb_to_minimal(surface.mesh, jacobi, max_iters=config.perturb_iters)
    reduction = result.history[0] / max(result.history[-1], 1e-300)
    return Outcome(reduction, 5.0, result.converged, result.to_dict())


# =============================================================================
# Spectral checks
# =============================================================================


@claim_registry.register(
    "hemisphere.counts",
    "on a tower hemisphere Dirichlet -L has nullity 1 and no negative eigenvalue, Neumann -L nullity 0 and one",
)
def hemisphere_counts(config: RunConfig) -> Outcome:
    details: dict = {}
    passed = True
    for k in (2, 3, 4):
        for eps in (1e-2, 1e-3):
            result = spectral.hemisphere_stability(k, eps)
            counts = result["eps"]
            row = {"dirichlet": counts["dirichlet"], "neumann": counts["neumann"], "stable": result["stable"]}
            details[f"k={k},eps={eps:g}"] = row
            passed &= (
                counts["dirichlet"] == {"nullity": 1, "negative": 0}
                and counts["neumann"] == {"nullity": 0, "negative": 1}
                and result["stable"]
            )
        root = spectral.neumann_negative_root(k, float(np.exp(-20.0)))
        details[f"k={k},root"] = root["root"]
        passed &= abs(root["root"] - (k - 1)) <= 1e-3
    return Outcome(details, "Dirichlet (1, 0), Neumann (0, 1)", passed)


@claim_registry.register(
    "hemisphere.quick", "Dirichlet and Neumann counts for k = 2", suites=("quick",)
)
def hemisphere_quick(config: RunConfig) -> Outcome:
    counts = spectral.hemisphere_counts(2, config.eps)
    measured = {"dirichlet": counts.dirichlet, "neumann": counts.neumann}
    passed = counts.dirichlet == {"nullity": 1, "negative": 0} and counts.neumann == {"nullity": 0, "negative": 1}
    return Outcome(measured, "Dirichlet (1, 0), Neumann (0, 1)", passed)


@claim_registry.register(
    "strip.solver",
    "the Dirichlet Poisson solution on the strip is bounded independently of X and decays like e^{(x-A)/Y}",
)
def strip_solver(config: RunConfig) -> Outcome:
    Y = 0.5
    oracle_problem = spectral.StripProblem(4.0, Y, spectral.bump_forcing(Y, 2 * np.pi, 3.0))
    agreement = spectral.strip_oracle_agreement(oracle_problem)
    X = 8.0
    center, half_width = X * np.pi / 2, 2.0
    decay_problem = spectral.StripProblem(X, Y, spectral.bump_forcing(Y, center, half_width, modes=(1, 3)))
    rate = spectral.strip_decay_rate(spectral.strip_solve(decay_problem), center - half_width)
    constants = spectral.sup_norm_constants(Y)
    details = {"oracle": agreement, "decay_rate": rate, "constants": constants}
    passed = agreement <= 1e-3 and rate >= 1 / Y - 0.1 and constants["relative_spread"] <= 0.1
    return Outcome(details, {"oracle": 1e-3, "decay_rate": 1 / Y - 0.1, "spread": 0.1}, passed)


@claim_registry.register(
    "flat_torus.kernel",
    "Delta + 4 has kernel on the Clifford torus, none modulo the imposed symmetries",
    suites=("acceptance", "quick"),
)
def flat_torus_kernel(config: RunConfig) -> Outcome:
    report = spectral.flat_torus_kernel_report(2)
    return Outcome(max(report["kernel_residuals"].values()), 1e-12, report["passed"], report)
