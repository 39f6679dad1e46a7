"""
Spectral checks for the linearized problem on towers and tori.

Provides:
- Radial modes u_lambda, u_0', u_(k-1)' of the cylindrical Jacobi operator and the A+- factorization
- Dirichlet and Neumann eigenvalue counts on a tower hemisphere by Pruefer-angle shooting
- The conformal factor and potential of the hemisphere metric
- A Poisson solver on the flat strip with its Green's function and a finite-difference oracle
- Kernel and eigenvalue tables for the flat tori of the k = 2 configurations
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy import fft, optimize, sparse
from scipy.integrate import solve_ivp
from scipy.linalg import solve_banded
from scipy.sparse.linalg import eigsh

from clifford_gluing.core.config import settings
from clifford_gluing.core.errors import (
    EquivarianceViolationError,
    InvalidArgumentError,
    NoRootError,
)
from clifford_gluing.services import surface_mesh

logger = logging.getLogger("clifford_gluing.spectral")

RadialKind = Literal["u_lambda", "u_0prime", "u_km1prime"]


# =============================================================================
# Radial modes on the punctured hemisphere
# =============================================================================


@dataclass(frozen=True)
class RadialMode:
    """
    A radial factor of a separated solution v(r) e^{i ell theta}.

    `lam` is the exponent lambda of u_lambda; the primed kinds are the second solutions
    at lambda = 0 and lambda = k - 1.
    """

    k: int
    ell: int = 0
    lam: float = 0.0
    kind: RadialKind = "u_lambda"

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 2:
            raise InvalidArgumentError(f"k must be an integer >= 2, got {self.k}")
        if self.kind == "u_0prime" and self.lam != 0:
            raise InvalidArgumentError("u_0' belongs to lambda = 0")
        if self.kind == "u_km1prime" and abs(self.lam) != self.k - 1:
            raise InvalidArgumentError("u_(k-1)' belongs to lambda = k - 1")


def _profile(k: int, r: np.ndarray) -> np.ndarray:
    """(r^{2k-2} - 1) / (r^{2k-2} + 1), which is tanh((k-1) ln r)."""
    return np.tanh((k - 1) * np.log(r))


def radial_eigenfunction(mode: RadialMode, r):
    """
    Closed-form radial factor on (0, 1].

    u_lambda = (lambda - (k-1) p) r^lambda with p = (r^{2k-2}-1)/(r^{2k-2}+1),
    u_0' = 1 - (k-1) p ln r, and
    u_(k-1)' = r^{k-1} (r^{2k-2} - r^{2-2k} + 4(k-1) ln r) / (r^{2k-2} + 1).

    Raises:
        InvalidArgumentError: If r <= 0 (or r = 0 for the singular primed kinds).
    """
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0):
        raise InvalidArgumentError("radial modes are evaluated on (0, 1]")
    k = mode.k
    p = _profile(k, r_arr)
    if mode.kind == "u_lambda":
        value = (mode.lam - (k - 1) * p) * r_arr**mode.lam
    elif mode.kind == "u_0prime":
        value = 1.0 - (k - 1) * p * np.log(r_arr)
    else:
        q = r_arr ** (2 * k - 2)
        value = r_arr ** (k - 1) * (q - 1.0 / q + 4 * (k - 1) * np.log(r_arr)) / (q + 1.0)
    return float(value) if np.ndim(r) == 0 else value


def radial_derivative(mode: RadialMode, r, h: float = 1e-6):
    """d/dr of a radial factor by central differences (one-sided at r = 1)."""
    r_arr = np.asarray(r, dtype=float)
    hi = np.minimum(r_arr + h, 1.0)
    lo = hi - 2 * h
    value = (radial_eigenfunction(mode, hi) - radial_eigenfunction(mode, lo)) / (2 * h)
    if np.any(hi < r_arr + h):
        # second-order one-sided stencil at the equator
        f0 = radial_eigenfunction(mode, r_arr)
        f1 = radial_eigenfunction(mode, r_arr - h)
        f2 = radial_eigenfunction(mode, r_arr - 2 * h)
        value = np.where(hi < r_arr + h, (3 * f0 - 4 * f1 + f2) / (2 * h), value)
    return float(value) if np.ndim(r) == 0 else value


def cylinder_potential(k: int, s) -> np.ndarray:
    """8(k-1)^2 r^{2k-2} / (r^{2k-2}+1)^2 in the log coordinate s = ln r."""
    return 2.0 * (k - 1) ** 2 / np.cosh((k - 1) * np.asarray(s, dtype=float)) ** 2


def _d1(values: np.ndarray, h: float) -> np.ndarray:
    out = np.full_like(values, np.nan)
    out[2:-2] = (-values[4:] + 8 * values[3:-1] - 8 * values[1:-3] + values[:-4]) / (12 * h)
    return out


def _d2(values: np.ndarray, h: float) -> np.ndarray:
    out = np.full_like(values, np.nan)
    out[2:-2] = (-values[4:] + 16 * values[3:-1] - 30 * values[2:-2] + 16 * values[1:-3] - values[:-4]) / (12 * h * h)
    return out


def factorization_check(
    k: int,
    ells=None,
    n: int = 10_000,
    r_min: float = 1e-2,
    tests: int = 10,
    seed: int | None = None,
) -> dict:
    """
    Finite-difference checks of L_cyl = A_- A_+ + (k-1)^2 + d_theta^2 with A_+- = r d_r +- (k-1) p.

    In the log coordinate s = ln r on [ln r_min, 0) with spacing h, reports:
    - the residual of L_cyl (u_|ell| e^{i ell theta}) for every ell (ell = 0 is the kernel mode u_0),
    - the residual of A_- r^lambda = u_lambda,
    - the largest defect of (A_- A_+ - (r d_r)^2 + (k-1)^2) phi = V phi over random smooth phi.
    Each is compared with 5 h^2, relative to the sup of the function involved.
    """
    if k < 2:
        raise InvalidArgumentError("k must be >= 2")
    ells = list(range(0, 4 * k + 1, k)) if ells is None else [int(e) for e in ells]
    s = np.linspace(np.log(r_min), 0.0, n)[:-1]
    h = float(s[1] - s[0])
    r = np.exp(s)
    V = cylinder_potential(k, s)
    a = (k - 1) * np.tanh((k - 1) * s)
    inner = slice(4, -4)
    out: dict = {"h": h, "bound": 5 * h * h, "modes": {}}
    for ell in ells:
        lam = abs(ell)
        u = radial_eigenfunction(RadialMode(k, ell, lam), r)
        residual = _d2(u, h) + V * u - ell**2 * u
        scale = max(float(np.max(np.abs(u[inner]))), 1.0)
        out["modes"][ell] = float(np.max(np.abs(residual[inner])) / scale)
    lam = 1.5
    power = r**lam
    lowered = _d1(power, h) - a * power
    exact = radial_eigenfunction(RadialMode(k, 0, lam), r)
    out["lowering"] = float(np.max(np.abs(lowered - exact)[inner]))
    rng = np.random.default_rng(settings.SEED if seed is None else seed)
    defect = 0.0
    for _ in range(tests):
        freq = rng.uniform(0.5, 3.0, size=3)
        phase = rng.uniform(0, 2 * np.pi, size=3)
        phi = np.sum(np.sin(np.outer(s, freq) + phase), axis=1)
        raised = _d1(phi, h) + a * phi
        product = _d1(raised, h) - a * raised
        operator = product - _d2(phi, h) + (k - 1) ** 2 * phi
        defect = max(defect, float(np.nanmax(np.abs(operator - V * phi)[inner])))
    out["potential_identity"] = defect
    out["worst"] = max([*out["modes"].values(), out["lowering"], defect])
    out["passed"] = bool(out["worst"] <= out["bound"])
    logger.info("Factorization check k=%d: %s", k, out)
    return out


# =============================================================================
# Roots of the annulus eigenvalue conditions
# =============================================================================


def monotonicity_certificate(c: float, x_max: float = 50.0, n: int = 20_001) -> dict:
    """
    Check on a dense grid that x tanh(c x) is even and strictly monotone on [0, x_max].

    Raises:
        InvalidArgumentError: If c == 0.
    """
    if c == 0:
        raise InvalidArgumentError("the certificate needs c != 0")
    x = np.linspace(0.0, x_max, n)
    f = x * np.tanh(c * x)
    g = -x * np.tanh(-c * x)
    steps = np.diff(f)
    monotone = bool(np.all(steps > 0) or np.all(steps < 0))
    return {"c": c, "even_defect": float(np.max(np.abs(f - g))), "strictly_monotone": monotone}


def _neumann_function(k: int, log_eps: float):
    rhs = (k - 1) * np.tanh((k - 1) * log_eps)

    def f(lam):
        lam = np.asarray(lam, dtype=float)
        return lam / np.tanh(lam * log_eps) - rhs

    return f


def neumann_negative_root(k: int, eps: float, tol: float = 1e-10) -> dict:
    """
    The unique lambda* > 0 with lambda coth(lambda ln eps) = (k-1) tanh((k-1) ln eps).

    The left side decreases from 1/ln eps to -infinity, so a root exists exactly when
    (k-1) tanh((k-1) ln eps) < 1/ln eps. Bisection is cross-checked by a secant solve,
    and uniqueness by counting sign changes over (0, 10k].

    Raises:
        InvalidArgumentError: If eps is not in (0, 1).
        NoRootError: If eps is too large for the equation to have a positive root.
    """
    if not 0 < eps < 1:
        raise InvalidArgumentError("eps must lie in (0, 1)")
    log_eps = float(np.log(eps))
    f = _neumann_function(k, log_eps)
    lo, hi = 1e-12, 10.0 * k
    if not f(lo) > 0 > f(hi):
        logger.error("No Neumann root for k=%d, eps=%.3e", k, eps)
        raise NoRootError(f"no positive root for k={k}, eps={eps:g}")
    root = optimize.brentq(f, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps)
    secant = float(optimize.newton(f, x0=k - 1.0, x1=k - 0.5, tol=tol, maxiter=200))
    grid = np.linspace(lo, hi, 20_001)
    sign_changes = int(np.count_nonzero(np.diff(np.sign(f(grid))) != 0))
    return {
        "k": k,
        "eps": eps,
        "root": float(root),
        "secant_root": secant,
        "solver_agreement": abs(root - secant),
        "sign_changes": sign_changes,
        "limit": k - 1,
    }


def dirichlet_root(k: int, eps: float, tol: float = 1e-10) -> float:
    """
    The nonnegative root of lambda tanh(lambda ln eps) = (k-1) tanh((k-1) ln eps).

    x tanh(c x) is strictly monotone on [0, inf), so the root is always k - 1; this
    recovers it numerically.
    """
    if not 0 < eps < 1:
        raise InvalidArgumentError("eps must lie in (0, 1)")
    log_eps = float(np.log(eps))
    rhs = (k - 1) * np.tanh((k - 1) * log_eps)
    return float(optimize.brentq(lambda lam: lam * np.tanh(lam * log_eps) - rhs, 0.0, 10.0 * k, xtol=tol))


# =============================================================================
# Hemisphere counts
# =============================================================================


@dataclass(frozen=True)
class ModeCount:
    ell: int
    dirichlet_negative: int
    neumann_negative: int
    dirichlet_null: bool
    neumann_null: bool
    theta_annulus: float
    theta_regular: float

    def to_dict(self) -> dict:
        return {
            "ell": self.ell,
            "dirichlet_negative": self.dirichlet_negative,
            "neumann_negative": self.neumann_negative,
            "dirichlet_null": self.dirichlet_null,
            "neumann_null": self.neumann_null,
            "theta_annulus": self.theta_annulus,
            "theta_regular": self.theta_regular,
        }


@dataclass
class HemisphereCounts:
    k: int
    eps: float
    modes: list[ModeCount] = field(default_factory=list)
    skipped: list[int] = field(default_factory=list)

    @property
    def dirichlet(self) -> dict:
        return {
            "nullity": sum(m.dirichlet_null for m in self.modes),
            "negative": sum(m.dirichlet_negative for m in self.modes),
        }

    @property
    def neumann(self) -> dict:
        return {
            "nullity": sum(m.neumann_null for m in self.modes),
            "negative": sum(m.neumann_negative for m in self.modes),
        }

    def negative_modes(self, condition: str = "neumann") -> list[int]:
        attr = f"{condition}_negative"
        return [m.ell for m in self.modes if getattr(m, attr) > 0]

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "eps": self.eps,
            "dirichlet": self.dirichlet,
            "neumann": self.neumann,
            "modes": [m.to_dict() for m in self.modes],
            "skipped": self.skipped,
        }


def _pruefer_angle(k: int, ell: int, s0: float, theta0: float, rtol: float) -> float:
    """
    Integrate theta' = cos^2 theta + (V - ell^2) sin^2 theta from s0 to 0.

    theta is the Pruefer angle of the zero-eigenvalue solution, tan theta = u / u_s; it
    passes through multiples of pi exactly at the zeros of u.
    """

    def rhs(s, theta):
        return np.cos(theta) ** 2 + (cylinder_potential(k, s) - ell * ell) * np.sin(theta) ** 2

    sol = solve_ivp(rhs, (s0, 0.0), [theta0], method="RK45", rtol=rtol, atol=rtol * 1e-2)
    if not sol.success:
        raise RuntimeError(sol.message)
    return float(sol.y[0, -1])


def hemisphere_counts(
    k: int,
    eps: float | None = None,
    l_max: int | None = None,
    null_tol: float = 1e-2,
) -> HemisphereCounts:
    """
    Nullity and negative-eigenvalue counts of -L on a hemisphere of the tower.

    Each Fourier mode ell in kZ, 0 <= ell <= l_max, separates into a Sturm-Liouville
    problem on s = ln r. Since a positive weight does not change the sign of
    eigenvalues, counts are taken for u'' + (V - ell^2) u with V = 2(k-1)^2 sech^2((k-1)s).

    Negative counts use the annulus (ln eps, 0) with a Dirichlet cap: started at the
    cap, the Pruefer angle at the equator exceeds n pi (Dirichlet) or pi/2 + n pi
    (Neumann) once per negative eigenvalue. Nullity uses the solution regular at the
    pole, started at the cap with the flat asymptotics u ~ r^ell (u ~ 1 when ell = 0),
    and is declared when its equator angle is within `null_tol` of the boundary
    condition. Modes ell and -ell share a radial problem and are counted once.
    """
    eps = settings.HEMISPHERE_EPS if eps is None else eps
    if not 0 < eps < 1:
        raise InvalidArgumentError("eps must lie in (0, 1)")
    l_max = 8 * k if l_max is None else l_max
    s0 = float(np.log(eps))
    rtol = settings.SHOOTING_RTOL
    report = HemisphereCounts(k, eps)
    for ell in range(0, l_max + 1, k):
        try:
            theta_cap = _pruefer_angle(k, ell, s0, 0.0, rtol)
            theta_pole = _pruefer_angle(k, ell, s0, float(np.arctan2(1.0, ell)), rtol)
        except RuntimeError as exc:
            logger.warning("Shooting failed for k=%d ell=%d: %s; mode skipped", k, ell, exc)
            report.skipped.append(ell)
            continue
        dirichlet_negative = int(np.floor(theta_cap / np.pi - 1e-12))
        neumann_negative = max(0, int(np.floor((theta_cap - np.pi / 2) / np.pi - 1e-12)) + 1)
        wrapped = np.mod(theta_pole, np.pi)
        dirichlet_null = bool(min(wrapped, np.pi - wrapped) < null_tol)
        neumann_null = bool(abs(wrapped - np.pi / 2) < null_tol)
        report.modes.append(
            ModeCount(ell, dirichlet_negative, neumann_negative, dirichlet_null, neumann_null, theta_cap, theta_pole)
        )
    logger.info("Hemisphere counts k=%d eps=%.1e: Dirichlet %s, Neumann %s", k, eps, report.dirichlet, report.neumann)
    return report


def hemisphere_stability(k: int, eps: float | None = None) -> dict:
    """Counts at eps and eps/2; they must agree."""
    eps = settings.HEMISPHERE_EPS if eps is None else eps
    coarse = hemisphere_counts(k, eps)
    fine = hemisphere_counts(k, eps / 2)
    stable = coarse.dirichlet == fine.dirichlet and coarse.neumann == fine.neumann
    return {"eps": coarse.to_dict(), "eps_half": fine.to_dict(), "stable": stable}


def eta_factor(k: int, w) -> tuple[np.ndarray, np.ndarray]:
    """
    Conformal factor e^{2 phi} of the hemisphere metric over the tower metric, and the
    potential e^{-2 phi} |A|^2, both at the tower chart parameter w.

    Returns:
        (conformal, potential) with the shape of w.
    """
    w = np.asarray(w, dtype=complex)
    r2 = np.abs(w) ** 2
    q = np.abs(w) ** (2 * k - 2)
    conformal = 4 * np.abs(w ** (2 * k) + 1) ** 2 / (k * k * (r2 + 1) ** 2 * (q + 1) ** 2)
    potential = 2.0 * (k - 1) ** 2 * np.abs(w) ** (2 * k - 4) * ((r2 + 1) / (q + 1)) ** 2
    return conformal, potential


def potential_sup(k: int) -> float:
    """
    sup of the potential over the whole tower.

    The potential depends on t = |w| only and is invariant under t -> 1/t, so the
    sup over [0, 1] is the global one.
    """

    def neg(t):
        return -float(eta_factor(k, t)[1])

    best = optimize.minimize_scalar(neg, bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-12})
    return max(-best.fun, -neg(0.0), -neg(1.0))


# =============================================================================
# Poisson equation on the strip
# =============================================================================


def _log_sinh(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        return t + np.log1p(-np.exp(-2 * t)) - np.log(2.0)


def strip_green(n: int, X: float, Y: float, x, x_prime):
    """
    Dirichlet Green's function of d^2/dx^2 - n^2/Y^2 on [0, X pi].

    G(x, x') = -Y / (n sinh(n X pi / Y)) sinh(n min / Y) sinh(n (X pi - max) / Y),
    assembled in log space so that n X pi / Y may reach 1e4.

    Raises:
        InvalidArgumentError: If n < 1 or x, x' leave [0, X pi].
    """
    if n < 1:
        raise InvalidArgumentError("mode index n must be >= 1")
    length = X * np.pi
    x = np.asarray(x, dtype=float)
    x_prime = np.asarray(x_prime, dtype=float)
    if np.any((x < -1e-12) | (x > length + 1e-12)) or np.any((x_prime < -1e-12) | (x_prime > length + 1e-12)):
        raise InvalidArgumentError("strip coordinates must lie in [0, X pi]")
    lo = np.clip(np.minimum(x, x_prime), 0.0, length)
    hi = np.clip(np.maximum(x, x_prime), 0.0, length)
    c = n / Y
    log_value = _log_sinh(c * lo) + _log_sinh(c * (length - hi)) - _log_sinh(c * length)
    value = -np.exp(log_value) / c
    return float(value) if value.ndim == 0 else value


@dataclass(frozen=True, eq=False)
class StripProblem:
    """
    Delta u = f on T_X = (0, X pi) x R with u = 0 on the boundary.

    `forcing(x, y)` must be odd under reflection through y = 0 and y = Y pi.
    """

    X: float
    Y: float
    forcing: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def __post_init__(self):
        if not self.X > self.Y > 0:
            raise InvalidArgumentError(f"need X > Y > 0, got X={self.X}, Y={self.Y}")

    @property
    def width(self) -> float:
        return self.X * np.pi

    @property
    def period(self) -> float:
        return self.Y * np.pi


def check_equivariance(problem: StripProblem, samples: int = 256, seed: int | None = None, tol: float = 1e-10) -> float:
    """
    Largest violation of oddness under the two reflections at random points.

    Raises:
        EquivarianceViolationError: If the violation exceeds tol times sup |f|.
    """
    rng = np.random.default_rng(settings.SEED if seed is None else seed)
    x = rng.uniform(0, problem.width, samples)
    y = rng.uniform(-problem.period, 2 * problem.period, samples)
    f = problem.forcing(x, y)
    scale = max(float(np.max(np.abs(f))), 1.0)
    bottom = np.abs(problem.forcing(x, -y) + f)
    top = np.abs(problem.forcing(x, 2 * problem.period - y) + f)
    violation = float(max(bottom.max(), top.max()))
    if violation > tol * scale:
        logger.error("Strip forcing is not odd under the reflections (defect %.3e)", violation)
        raise EquivarianceViolationError(f"forcing is not K_Y-odd: defect {violation:.3e}")
    return violation


@dataclass(frozen=True, eq=False)
class StripSolution:
    """Sine coefficients u_n(x) on an x grid; u(x, y) = sum_n u_n(x) sin(n y / Y)."""

    problem: StripProblem
    x: np.ndarray
    coefficients: np.ndarray  # shape (modes, len(x))

    @property
    def modes(self) -> int:
        return self.coefficients.shape[0]

    def at(self, y) -> np.ndarray:
        """u on the x grid at heights y; shape (len(x), len(y))."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        n = np.arange(1, self.modes + 1)
        basis = np.sin(np.outer(n, y) / self.problem.Y)
        return self.coefficients.T @ basis

    def grid(self, ny: int = 64) -> tuple[np.ndarray, np.ndarray]:
        y = np.linspace(0.0, self.problem.period, ny + 1)
        return y, self.at(y)


def _sine_coefficients(problem: StripProblem, x: np.ndarray, modes: int) -> np.ndarray:
    """f_n(x) with f(x, y) = sum_n f_n(x) sin(n y / Y), from a DST-I on 2*modes samples."""
    ny = 2 * modes
    y = problem.period * np.arange(1, ny) / ny
    values = problem.forcing(x[:, None], y[None, :])
    coefficients = 2.0 * fft.idst(values, type=1, axis=1)
    return coefficients[:, :modes].T


def strip_solve(problem: StripProblem, nx: int | None = None, modes: int | None = None) -> StripSolution:
    """
    Solve Delta u = f with Dirichlet data on the strip.

    The forcing is expanded in sin(n y / Y); each coefficient solves
    u_n'' - n^2/Y^2 u_n = f_n and is obtained by trapezoidal convolution with the
    Green's function. Where the decay length Y/n drops below the grid spacing the
    Green's operator is replaced by its local limit -(Y/n)^2.

    Raises:
        EquivarianceViolationError: If the forcing is not odd under both reflections.
    """
    check_equivariance(problem)
    modes = settings.STRIP_MODE_CUTOFF if modes is None else modes
    if nx is None:
        nx = int(np.ceil(problem.width / min(0.02, problem.Y / 8))) + 1
    x = np.linspace(0.0, problem.width, nx)
    dx = x[1] - x[0]
    weights = np.full(nx, dx)
    weights[[0, -1]] = dx / 2
    forcing = _sine_coefficients(problem, x, modes)
    scale = max(float(np.max(np.abs(forcing))), 1e-300)
    coefficients = np.zeros_like(forcing)
    for index in range(modes):
        n = index + 1
        f_n = forcing[index]
        if np.max(np.abs(f_n)) <= 1e-15 * scale:
            continue
        if n * dx / problem.Y > 0.5:
            coefficients[index] = -((problem.Y / n) ** 2) * f_n
            coefficients[index][[0, -1]] = 0.0
            continue
        G = strip_green(n, problem.X, problem.Y, x[:, None], x[None, :])
        coefficients[index] = G @ (weights * f_n)
    logger.debug("Strip solve X=%g Y=%g on %d points with %d modes", problem.X, problem.Y, nx, modes)
    return StripSolution(problem, x, coefficients)


def strip_fd_oracle(problem: StripProblem, nx: int | None = None, ny: int = 128) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Independent 5-point finite-difference Dirichlet solve on one period [0, Y pi].

    The discrete y-Laplacian is diagonalized by a DST-I; every transformed row is a
    tridiagonal solve in x.

    Returns:
        (x, y, u) with u of shape (len(x), len(y)).
    """
    if nx is None:
        nx = int(np.ceil(problem.width / min(0.02, problem.Y / 8))) + 1
    x = np.linspace(0.0, problem.width, nx)
    y = np.linspace(0.0, problem.period, ny + 1)
    dx, dy = x[1] - x[0], y[1] - y[0]
    values = problem.forcing(x[1:-1, None], y[None, 1:-1])
    transformed = fft.dst(values, type=1, axis=1)
    j = np.arange(1, ny)
    eig_y = -4.0 / dy**2 * np.sin(j * np.pi / (2 * ny)) ** 2
    m = nx - 2
    solved = np.empty_like(transformed)
    for col, lam in enumerate(eig_y):
        banded = np.zeros((3, m))
        banded[0, 1:] = 1.0 / dx**2
        banded[1, :] = -2.0 / dx**2 + lam
        banded[2, :-1] = 1.0 / dx**2
        solved[:, col] = solve_banded((1, 1), banded, transformed[:, col])
    u = np.zeros((nx, ny + 1))
    u[1:-1, 1:-1] = fft.idst(solved, type=1, axis=1)
    return x, y, u


def strip_oracle_agreement(problem: StripProblem, ny: int = 128) -> float:
    """Relative sup difference between strip_solve and the finite-difference oracle."""
    solution = strip_solve(problem)
    x, y, reference = strip_fd_oracle(problem, nx=len(solution.x), ny=ny)
    values = solution.at(y)
    return float(np.max(np.abs(values - reference)) / max(np.max(np.abs(reference)), 1e-300))


def strip_decay_rate(solution: StripSolution, support_start: float, start: float = 1.0) -> float:
    """Fitted exponential growth rate of sup_y |u| on [start, support_start - 1]."""
    y, values = solution.grid()
    envelope = np.max(np.abs(values), axis=1)
    mask = (solution.x >= start) & (solution.x <= support_start - 1.0) & (envelope > 0)
    if mask.sum() < 3:
        raise InvalidArgumentError("not enough samples left of the forcing support")
    slope, _ = np.polyfit(solution.x[mask], np.log(envelope[mask]), 1)
    return float(slope)


def bump_forcing(Y: float, center: float, half_width: float, modes: tuple[int, ...] = (1,)) -> Callable:
    """A K_Y-odd forcing supported in [center - half_width, center + half_width] x R."""

    def forcing(x, y):
        t = (np.asarray(x, dtype=float) - center) / half_width
        inside = np.abs(t) < 1
        bump = np.where(inside, np.exp(-1.0 / np.where(inside, 1 - t * t, 1.0)), 0.0)
        wave = sum(np.sin(n * np.asarray(y, dtype=float) / Y) for n in modes)
        return bump * wave

    return forcing


def sup_norm_constants(Y: float, widths=(4.0, 8.0, 16.0), half_width: float = 2.0) -> dict:
    """||u|| / ||f|| for a fixed bump forcing as the strip widens; the constant must not grow with X."""
    constants = {}
    for X in widths:
        center = X * np.pi / 2
        problem = StripProblem(X, Y, bump_forcing(Y, center, half_width, modes=(1, 3)))
        solution = strip_solve(problem)
        y, u = solution.grid()
        f = problem.forcing(solution.x[:, None], y[None, :])
        constants[X] = float(np.max(np.abs(u)) / np.max(np.abs(f)))
    values = np.array(list(constants.values()))
    spread = float((values.max() - values.min()) / values.min())
    logger.info("Strip sup-norm constants for Y=%g: %s", Y, constants)
    return {"constants": constants, "relative_spread": spread}


# =============================================================================
# Flat tori for k = 2
# =============================================================================

_KERNEL_BASIS = {
    "sin*sin": (np.sin, np.sin),
    "sin*cos": (np.sin, np.cos),
    "cos*sin": (np.cos, np.sin),
    "cos*cos": (np.cos, np.cos),
}

# label -> (coefficients (a, b) of a j1^2 + b j2^2, smallest j1, smallest j2)
EIGENVALUE_FAMILIES = {
    "square_dirichlet": ((1, 1), 1, 1),
    "half_square_dirichlet": ((1, 4), 1, 1),
    "eighth_rectangle_dirichlet": ((16, 1), 1, 1),
    "rectangular_torus": ((8, 2), 0, 0),
}


def eigenvalue_list(family: str, cutoff: float = 100.0) -> list[int]:
    (a, b), lo1, lo2 = EIGENVALUE_FAMILIES[family]
    values = {
        a * j1 * j1 + b * j2 * j2
        for j1 in range(lo1, int(np.sqrt(cutoff / a)) + 2)
        for j2 in range(lo2, int(np.sqrt(cutoff / b)) + 2)
    }
    return sorted(v for v in values if v <= cutoff)


def rectangle_dirichlet_counts(
    width: float, height: float, n: int = 120, target: float = 4.0, count: int = 6
) -> dict:
    """
    Finite-difference Dirichlet eigenvalues of a flat rectangle nearest to `target`.

    Shift-invert Lanczos around the target; the gap to the target is the quantity
    that matters for the kernel of Delta + 4.
    """
    nx = n
    ny = max(8, int(round(n * height / width)))
    hx, hy = width / nx, height / ny

    def second_difference(m: int, h: float) -> sparse.csr_matrix:
        return sparse.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(m - 1, m - 1)) / h**2

    laplacian = sparse.kronsum(second_difference(ny, hy), second_difference(nx, hx), format="csc")
    values = eigsh(-laplacian, k=count, sigma=target, which="LM", return_eigenvectors=False)
    values = np.sort(values)
    return {
        "width": width,
        "height": height,
        "eigenvalues": values.tolist(),
        "gap_to_target": float(np.min(np.abs(values - target))),
    }


def flat_torus_kernel_report(k: int = 2, resolution: int = 32, cutoff: float = 100.0) -> dict:
    """
    Kernel of Delta + 4 on the Clifford torus and the symmetric eigenvalue tables.

    The four products sin/cos(u) x sin/cos(v) are checked against the cotangent
    Laplacian of a regular torus mesh, which reproduces -4 on them exactly. Each closed
    eigenvalue list is then certified to miss 4, and the Dirichlet rectangles are
    cross-checked by finite differences.

    Raises:
        InvalidArgumentError: Unless k == 2.
    """
    if k != 2:
        raise InvalidArgumentError("the flat torus kernel report covers k = 2 only")
    mesh = surface_mesh.clifford_torus_mesh(resolution)
    stiffness, areas = surface_mesh.cotan_weights(mesh.vertices, mesh.triangles)
    z1 = mesh.vertices[:, 0] + 1j * mesh.vertices[:, 1]
    z2 = mesh.vertices[:, 2] + 1j * mesh.vertices[:, 3]
    u, v = np.angle(z1), np.angle(z2)
    residuals = {}
    for name, (fu, fv) in _KERNEL_BASIS.items():
        values = fu(u) * fv(v)
        applied = -(stiffness @ values) / areas + 4.0 * values
        residuals[name] = float(np.max(np.abs(applied)))
    lists = {family: eigenvalue_list(family, cutoff) for family in EIGENVALUE_FAMILIES}
    excludes = {family: 4 not in values for family, values in lists.items()}
    rectangles = {
        "square_dirichlet": rectangle_dirichlet_counts(np.pi, np.pi),
        "half_square_dirichlet": rectangle_dirichlet_counts(np.pi, np.pi / 2),
        "eighth_rectangle_dirichlet": rectangle_dirichlet_counts(np.pi, np.pi / 4),
    }
    report = {
        "kernel_residuals": residuals,
        "eigenvalue_lists": lists,
        "excludes_4": excludes,
        "finite_difference": rectangles,
        "passed": max(residuals.values()) <= 1e-12 and all(excludes.values()),
    }
    logger.info("Flat torus kernel report: residual %.2e, excludes 4: %s", max(residuals.values()), excludes)
    return report
