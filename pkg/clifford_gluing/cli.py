"""
Command-line surface of the toolkit.

Supports:
- tower: mesh one period of a Karcher-Scherk tower and check it
- surface: assemble an initial surface M(...) or N(...), export it and check it
- spectral: hemisphere counts, strip solver, flat torus kernel, root finding
- verify: run a suite of claims or single claims
- perturb: experimental Newton perturbation towards a minimal surface
- export: write OBJ/PLY meshes of an initial surface

Every command writes a JSON report to the output directory. Exit codes: 0 when all
gating rows pass, 1 when any fails, 2 on invalid input, 3 on internal or numerical errors.
"""

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from clifford_gluing.core.config import RunConfig, settings
from clifford_gluing.core.errors import CliffordGluingError
from clifford_gluing.core.log import configure_logging
from clifford_gluing.schemas.report import RunReport, VerificationReport
from clifford_gluing.schemas.surface import InitialSurfaceSpec
from clifford_gluing.services import curvature_engine as curvature
from clifford_gluing.services import spectral_lab as spectral
from clifford_gluing.services import surface_assembly as assembly
from clifford_gluing.services import surface_mesh
from clifford_gluing.services import weierstrass_tower as tower
from clifford_gluing.services.claims import SUITES, claim_registry

logger = logging.getLogger("clifford_gluing.cli")

# ANSI Colors for terminal output
CYAN = "\033[96m"
GREEN = "\033[92m"
YELLOW = "\033[93m"
RED = "\033[91m"
RESET = "\033[0m"
BOLD = "\033[1m"

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INVALID = 2
EXIT_INTERNAL = 3


def _anchor(claim_id: str) -> str:
    return claim_registry.get(claim_id).anchor


def _row(claim_id: str, measured, expected, passed: bool, anchor: str | None = None, **details) -> VerificationReport:
    return VerificationReport(
        claim_id=claim_id,
        anchor=anchor or _anchor(claim_id),
        measured=measured,
        expected=expected,
        passed=bool(passed),
        details=details,
    )


# =============================================================================
# tower
# =============================================================================


def cmd_tower(args: argparse.Namespace, config: RunConfig) -> RunReport:
    k, m = args.k, args.m
    res = config.tower_resolution
    subject = f"k={k}" if m is None else f"k={k},m={m}"
    report = RunReport(command="tower", subject=subject, seed=config.seed)

    vertices, triangles = tower.tower_mesh(k, periods=1, radial=res, angular=max(8, res // 2), m=m)
    stem = f"tower_k{k}" if m is None else f"tower_k{k}_m{m}"
    mesh_path = surface_mesh.export_euclidean_obj(
        vertices, triangles, Path(config.out_dir) / f"{stem}.obj", {"k": k, "m": m, "resolution": res}
    )

    w = tower.sector_samples(k, res, max(8, res // 2))
    w = w[(np.abs(w - tower.roots_of_minus_one(k)[0]) > 1e-3) & (np.abs(w) < 1.0 - 1e-9)]
    forms = curvature.forms_at(curvature.euclidean_tower_patch(k), w.real, w.imag)
    relative = float(np.max(np.abs(forms.H) / np.maximum(np.sqrt(forms.norm_sq_a), 1e-8)))
    report.add(_row("tower.minimality", relative, 1e-6, relative <= 1e-6, samples=len(w)))

    slope = tower.wing_decay_fit(k)
    report.add(_row("tower.wing_decay", slope, [-1.2 * k, -0.8 * k], -1.2 * k <= slope <= -0.8 * k))

    group = tower.tower_group(k, 1)
    period = 2 * np.pi
    residuals = {
        name: tower.point_set_residual(vertices, group.apply(g, vertices), period)
        for name, g in zip(("mirror_plane", "x_axis_turn", "top_plane"), group.generators, strict=True)
    }
    worst = max(residuals.values())
    report.add(
        _row(
            "tower.symmetry",
            worst,
            1e-9,
            worst <= 1e-9,
            anchor="the tower is invariant under its three mirror symmetries",
            per_generator=residuals,
            dual=tower.dual_tower_check(k)["dual"],
        )
    )

    report.data = {
        "mesh": str(mesh_path),
        "vertices": len(vertices),
        "triangles": len(triangles),
        "group_order": len(group),
        "onset_radius": tower.onset_radius(k),
        "wing_constant": tower.wing_constant(k),
    }
    if m is not None:
        report.data["a_m"] = tower.straightening_radius(m)
    return report


# =============================================================================
# surface / export / perturb
# =============================================================================


def _spec_from_args(args: argparse.Namespace) -> InitialSurfaceSpec:
    if args.variant == "M":
        return InitialSurfaceSpec.M(args.k, args.m, args.n1, args.n2, args.sigma)
    return InitialSurfaceSpec.N(args.k, args.m, args.n, args.np1, args.npm1, args.sigma1p, args.sigmam1p)


def _export_surface(surface: assembly.AssembledSurface, out_dir: str, pole=None) -> dict[str, str]:
    H, norm_sq = curvature.vertex_curvatures(surface)
    stem = surface.spec.label.replace("(", "_").replace(")", "").replace(",", "_")
    out = Path(out_dir)
    obj = surface_mesh.export_obj(surface.mesh, out / f"{stem}.obj", pole)
    ply = surface_mesh.export_ply(surface.mesh, out / f"{stem}.ply", {"H": H, "A2": norm_sq})
    return {"obj": str(obj), "ply": str(ply)}


def cmd_surface(args: argparse.Namespace, config: RunConfig) -> RunReport:
    spec = _spec_from_args(args)
    report = RunReport(command="surface", subject=spec.label, seed=config.seed)
    surface = assembly.assemble(spec, config.resolution)
    mesh = surface.mesh
    bound = config.hausdorff_factor * mesh.h

    measured_genus = assembly.genus(surface)
    report.add(_row("initial_surface.genus", measured_genus, spec.expected_genus(), measured_genus == spec.expected_genus()))

    group = assembly.surface_group(spec)
    residual = assembly.symmetry_invariance(mesh, group)
    control = assembly.symmetry_invariance(mesh, [assembly.negative_control(spec)])
    report.add(
        _row("symmetry.suite", residual, bound, residual <= bound, order=len(group), negative_control=control)
    )

    scaffold = assembly.scaffold_residual(surface)
    report.add(_row("initial_surface.scaffold", scaffold, bound, scaffold <= bound))

    embedded = assembly.embeddedness_check(mesh)
    report.add(
        _row("initial_surface.embedded", len(embedded.pairs), 0, embedded.embedded, candidates=embedded.candidates)
    )

    regions = assembly.region_decomposition(surface, config.region_b)
    report.add(_row("initial_surface.regions", regions.counts(), "every vertex tagged", regions.covers()))

    report.data = {
        "files": _export_surface(surface, config.out_dir),
        "vertices": mesh.n_vertices,
        "triangles": mesh.n_triangles,
        "h": mesh.h,
        "placements": [spot.to_dict() for spot in surface.placements],
        "assembly": surface.report,
    }
    return report


def cmd_export(args: argparse.Namespace, config: RunConfig) -> RunReport:
    spec = InitialSurfaceSpec.parse(args.label)
    surface = assembly.assemble(spec, config.resolution)
    report = RunReport(command="export", subject=spec.label, seed=config.seed)
    report.data = {
        "files": _export_surface(surface, config.out_dir, args.pole),
        "vertices": surface.mesh.n_vertices,
        "triangles": surface.mesh.n_triangles,
    }
    return report


def cmd_perturb(args: argparse.Namespace, config: RunConfig) -> RunReport:
    spec = InitialSurfaceSpec.parse(args.label)
    surface = assembly.assemble(spec, config.resolution)
    report = RunReport(command="perturb", subject=spec.label, seed=config.seed)
    jacobi = curvature.jacobi_operator(surface)
    result = curvature.perturb_to_minimal(surface.mesh, jacobi, max_iters=config.perturb_iters)
    reduction = result.history[0] / max(result.history[-1], 1e-300)
    row = _row("perturb.experimental", reduction, 5.0, result.converged, **result.to_dict())
    row.gating = False
    report.add(row)
    return report


# =============================================================================
# spectral
# =============================================================================


def cmd_spectral(args: argparse.Namespace, config: RunConfig) -> RunReport:
    problem = args.problem
    report = RunReport(command="spectral", subject=problem, seed=config.seed)
    if problem == "hemisphere":
        counts = spectral.hemisphere_counts(args.k, config.eps)
        passed = counts.dirichlet == {"nullity": 1, "negative": 0} and counts.neumann == {"nullity": 0, "negative": 1}
        measured = {"dirichlet": counts.dirichlet, "neumann": counts.neumann}
        report.add(_row("hemisphere.counts", measured, "Dirichlet (1, 0), Neumann (0, 1)", passed))
        report.data = counts.to_dict()
    elif problem == "root":
        root = spectral.neumann_negative_root(args.k, config.eps)
        agreement = root["solver_agreement"] <= 1e-8 and root["sign_changes"] == 1
        report.add(
            _row(
                "hemisphere.neumann_root",
                root["root"],
                root["limit"],
                agreement,
                anchor="lambda coth(lambda ln eps) = (k-1) tanh((k-1) ln eps) has one positive root",
                **root,
            )
        )
        dirichlet = spectral.dirichlet_root(args.k, config.eps)
        report.add(
            _row(
                "hemisphere.dirichlet_root",
                dirichlet,
                args.k - 1,
                abs(dirichlet - (args.k - 1)) <= 1e-8,
                anchor="lambda tanh(lambda ln eps) = (k-1) tanh((k-1) ln eps) has the root k - 1",
            )
        )
    elif problem == "strip":
        X, Y = config.strip_x, config.strip_y
        center, half_width = X * np.pi / 2, min(2.0, X * np.pi / 4)
        strip = spectral.StripProblem(X, Y, spectral.bump_forcing(Y, center, half_width, modes=(1, 3)))
        agreement = spectral.strip_oracle_agreement(strip)
        report.add(
            _row(
                "strip.oracle",
                agreement,
                1e-3,
                agreement <= 1e-3,
                anchor="the Green's function solution matches a finite-difference solve",
            )
        )
        rate = spectral.strip_decay_rate(spectral.strip_solve(strip), center - half_width)
        report.add(_row("strip.solver", rate, 1 / Y - 0.1, rate >= 1 / Y - 0.1))
        report.data = {"X": X, "Y": Y, "equivariance": spectral.check_equivariance(strip, seed=config.seed)}
    elif problem == "flat-torus":
        result = spectral.flat_torus_kernel_report(args.k)
        report.add(_row("flat_torus.kernel", max(result["kernel_residuals"].values()), 1e-12, result["passed"]))
        report.data = result
    elif problem == "factorization":
        result = spectral.factorization_check(args.k, seed=config.seed)
        report.add(
            _row(
                "hemisphere.factorization",
                result["worst"],
                result["bound"],
                result["passed"],
                anchor="the Jacobi operator on a tower end factors through explicit radial eigenfunctions",
            )
        )
        report.data = result
    return report


# =============================================================================
# verify
# =============================================================================


def cmd_verify(args: argparse.Namespace, config: RunConfig) -> RunReport:
    if args.claim:
        claims = [claim_registry.get(claim_id) for claim_id in args.claim]
        subject = ",".join(args.claim)
    else:
        claims = claim_registry.suite(args.suite)
        subject = args.suite
    if args.skip_slow:
        claims = [claim for claim in claims if not claim.slow]
    report = RunReport(command="verify", subject=subject, seed=config.seed)
    for claim in claims:
        report.add(claim_registry.run(claim.claim_id, config))
    return report


COMMANDS = {
    "tower": cmd_tower,
    "surface": cmd_surface,
    "spectral": cmd_spectral,
    "verify": cmd_verify,
    "perturb": cmd_perturb,
    "export": cmd_export,
}


# =============================================================================
# Entry point
# =============================================================================


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clifford-gluing", description="Desingularized Clifford tori toolkit")
    parser.add_argument("--config", help="key=value run configuration file")
    parser.add_argument("--seed", type=int, help="Seed for randomized sampling")
    parser.add_argument("--out", dest="out_dir", help="Output directory for meshes and reports")
    parser.add_argument("--log-level", default=None, help="Logging level (default from LOG_LEVEL)")
    parser.add_argument("--timing", action="store_true", help="Include runtimes in JSON reports")
    parser.add_argument("--list-claims", action="store_true", help="Print the claim-to-anchor map and exit")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("tower", help="Mesh and check a Karcher-Scherk tower")
    p.add_argument("--k", type=int, required=True, help="Tower order, k >= 2")
    p.add_argument("--m", type=int, help="Straighten the wings beyond a_m")
    p.add_argument("--res", dest="tower_resolution", type=int, help="Radial samples of the fundamental piece")

    p = sub.add_parser("surface", help="Assemble and check an initial surface")
    p.add_argument("variant", choices=["M", "N"])
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n1", type=int, default=1)
    p.add_argument("--n2", type=int, default=1)
    p.add_argument("--sigma", type=int, default=0)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--np1", type=int, default=1, help="n'_1")
    p.add_argument("--npm1", type=int, default=1, help="n'_-1")
    p.add_argument("--sigma1p", type=int, default=0, help="sigma'_1")
    p.add_argument("--sigmam1p", type=int, default=0, help="sigma'_-1")
    p.add_argument("--res", dest="resolution", type=int, help="Mesh resolution")

    p = sub.add_parser("spectral", help="Spectral model problems")
    p.add_argument("problem", choices=["hemisphere", "strip", "flat-torus", "root", "factorization"])
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--eps", type=float)
    p.add_argument("--X", dest="strip_x", type=float)
    p.add_argument("--Y", dest="strip_y", type=float)

    p = sub.add_parser("verify", help="Run verification claims")
    p.add_argument("--suite", choices=SUITES, default="acceptance")
    p.add_argument("--claim", action="append", help="Run only this claim id (repeatable)")
    p.add_argument("--skip-slow", action="store_true", help="Leave out claims marked slow")
    p.add_argument("--res", dest="resolution", type=int, help="Mesh resolution")

    p = sub.add_parser("perturb", help="Experimental perturbation to a minimal surface")
    p.add_argument("label", nargs="?", default="M(2,8,1,1,0)")
    p.add_argument("--iters", dest="perturb_iters", type=int)
    p.add_argument("--res", dest="resolution", type=int, help="Mesh resolution")

    p = sub.add_parser("export", help="Write OBJ and PLY meshes of an initial surface")
    p.add_argument("label", help='Surface data, e.g. "M(2,1,1,1,0)"')
    p.add_argument("--pole", type=float, nargs=4, help="Stereographic projection pole in R^4")
    p.add_argument("--res", dest="resolution", type=int, help="Mesh resolution")
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    """Config file values overridden by whichever flags were given."""
    keys = ("seed", "out_dir", "resolution", "tower_resolution", "eps", "strip_x", "strip_y", "perturb_iters")
    overrides = {key: getattr(args, key, None) for key in keys}
    if overrides["seed"] is None and args.config is None:
        overrides["seed"] = settings.SEED
    return RunConfig.from_file(args.config, **overrides)


def print_claims() -> None:
    print(f"{BOLD}Registered claims{RESET}")
    for claim_id, anchor in claim_registry.anchors().items():
        claim = claim_registry.get(claim_id)
        suites = ",".join(claim.suites)
        print(f"  {CYAN}{claim_id}{RESET} [{suites}] {anchor}")


def print_report(report: RunReport, path: Path) -> None:
    print(f"{BOLD}{report.command} {report.subject}{RESET}")
    for row in report.rows:
        if row.passed:
            status = f"{GREEN}PASS{RESET}"
        elif not row.gating:
            status = f"{YELLOW}WARN{RESET}"
        else:
            status = f"{RED}FAIL{RESET}"
        print(f"  {status} {row.claim_id}: measured={row.measured} expected={row.expected}")
    print(f"Report written to {path}")


def write_report(report: RunReport, config: RunConfig, include_timing: bool) -> Path:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = report.command if not report.subject else f"{report.command}_{report.subject}"
    safe = "".join(ch if ch.isalnum() or ch in "-_=." else "_" for ch in stem)
    path = out / f"{safe}.json"
    path.write_text(report.to_json(include_timing=include_timing), encoding="utf-8")
    return path


def main(argv: list[str] | None = None) -> int:
    """Main entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)

    if args.list_claims:
        print_claims()
        return EXIT_OK
    if args.command is None:
        parser.print_help()
        return EXIT_INVALID

    try:
        config = load_config(args)
        report = COMMANDS[args.command](args, config)
        path = write_report(report, config, args.timing)
    except CliffordGluingError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        print(f"{RED}{type(exc).__name__}: {exc}{RESET}", file=sys.stderr)
        return exc.exit_code
    except (ValidationError, KeyError, FileNotFoundError) as exc:
        print(f"{RED}Invalid input: {exc}{RESET}", file=sys.stderr)
        return EXIT_INVALID
    except Exception:
        logger.exception("Internal error in %s", args.command)
        return EXIT_INTERNAL

    print_report(report, path)
    if report.error_code is not None:
        return report.error_code
    return EXIT_OK if report.passed else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
