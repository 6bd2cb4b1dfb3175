"""Constrained-descent solvers for the normalized ground states, the
continuation in the perturbation strength, and the nonattainment probe.

Two iterations share the same machinery:

* below the mass-critical power the ground state is an interior local
  minimizer inside the seminorm ball of radius r0, found by mass-projected
  Armijo descent that must never leave the ball;

* at and above it (including no perturbation) the ground state is the
  minimum over the constraint manifold of the fiber maximum, found by
  alternating an exact fiber projection (dilation to the unique maximum)
  with one tangential descent step.  The projection step is what turns the
  min-max level into a plain minimization.

Every accepted step preserves the mass exactly and never increases the
energy; iterates are nonnegative up to the modulus replacement applied each
outer cycle.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .extremals import cutoff_test_pair, fit_bubble_scale
from .fiber import BranchUnavailable, ManifoldClass, classify, project_to_pohozaev
from .functionals import energy, fiber_coefficients, gradient, pohozaev
from .params import (
    ParamError,
    ProblemParams,
    compute_thresholds,
    derive_exponents,
    h_profile,
)
from .spectral import (
    AliasingRisk,
    Field,
    Grid,
    dilate,
    mass_sq,
    project_mass,
    refine_field,
    seminorm_sq,
)

__all__ = [
    "SolverConfig",
    "GroundStateResult",
    "ContinuationResult",
    "ProbeLevel",
    "ProbeReport",
    "LeftConfinementRegion",
    "CollapseDetected",
    "gaussian_init",
    "bubble_init",
    "suggest_box_subcritical",
    "transfer_field",
    "local_minimize_subcritical",
    "minmax_groundstate",
    "continuation_mu",
    "nonexistence_probe",
]


class LeftConfinementRegion(RuntimeError):
    """The descent iterate escaped the seminorm ball it must stay inside."""


class CollapseDetected(RuntimeError):
    """The min-max iterate fell into the trivial small-seminorm region."""


@dataclass(frozen=True)
class SolverConfig:
    step: float = 0.5
    armijo_shrink: float = 0.5
    armijo_slope: float = 1e-4
    grad_tol: float = 1e-7
    pohozaev_tol: float = 1e-6
    max_iters: int = 50_000
    seed: int = 0

    def __post_init__(self):
        if self.step <= 0.0:
            raise ParamError(f"step must be > 0, got {self.step}")
        if not (0.0 < self.armijo_shrink < 1.0):
            raise ParamError(f"armijo_shrink must lie in (0,1), got {self.armijo_shrink}")
        if not (0.0 < self.armijo_slope <= 0.5):
            raise ParamError(f"armijo_slope must lie in (0,0.5], got {self.armijo_slope}")
        if self.grad_tol <= 0.0 or self.pohozaev_tol <= 0.0:
            raise ParamError("tolerances must be > 0")
        if self.max_iters < 1:
            raise ParamError("max_iters must be >= 1")


@dataclass(frozen=True)
class GroundStateResult:
    field: Field
    energy: float
    lam: float
    pohozaev_residual: float
    seminorm_sq: float
    iterations: int
    converged: bool
    classification: ManifoldClass
    grad_norm: float
    message: str = ""


@dataclass(frozen=True)
class ContinuationResult:
    rows: tuple  # ((mu, m, seminorm_sq, lam, converged), ...)
    grids: tuple


@dataclass(frozen=True)
class ProbeLevel:
    grid_signature: str
    energy: float
    lam: float
    eps_fit: float
    fit_error: float
    sobolev_proxy: float
    converged: bool


@dataclass(frozen=True)
class ProbeReport:
    levels: tuple
    verdict: str


def _l2(u_vals: np.ndarray, grid: Grid) -> float:
    return math.sqrt(float(np.sum(u_vals**2)) * grid.cell_volume)


def gaussian_init(grid: Grid, a: float, width: float | None = None) -> Field:
    if width is None:
        width = grid.half_length / 10.0
    r2 = sum(x**2 for x in grid.coords())
    return project_mass(Field(grid, np.exp(-r2 / (2.0 * width**2))), a)


def bubble_init(params: ProblemParams, grid: Grid, eps_fraction: float = 1.0 / 50.0) -> Field:
    eps = max(grid.half_length * eps_fraction, 4.0 * grid.spacing)
    _, v = cutoff_test_pair(grid, eps, 0.45 * grid.half_length, params.a, params.n, params.s)
    return v


def suggest_box_subcritical(
    params: ProblemParams,
    c_gns: float,
    s_sob: float,
    m: int = 4096,
    width_factor: float = 6.0,
) -> Grid:
    """Box sized from the a-priori width of the subcritical minimizer.

    The envelope minimum pins the seminorm scale A* = t_min^2, and a
    mass-a^2 profile with that seminorm has spatial width
    (a^2/A*)^(1/(2s)); the box takes width_factor times that, so the core
    always spans m/(2 width_factor) grid points regardless of parameters.
    """
    prof = h_profile(params, c_gns, s_sob)
    if prof.t_min <= 0.0:
        raise ParamError("no interior envelope minimum: width estimate undefined")
    width = (params.mass / prof.t_min**2) ** (1.0 / (2.0 * params.s))
    return Grid(dim=params.n, m=m, half_length=width_factor * width)


def transfer_field(u: Field, grid: Grid) -> Field:
    """Move a field to another box with the same point count via the
    mass-preserving unitary rescaling u'(x) = r^(-N/2) u(x/r); on matching
    relative node layouts this is a pure value scaling."""
    if grid.m != u.grid.m or grid.dim != u.grid.dim:
        raise ParamError("transfer requires identical point counts")
    r = grid.half_length / u.grid.half_length
    return Field(grid, u.values * r ** (-0.5 * grid.dim))


def _measure(u: Field, params: ProblemParams, grad_norm: float, iters: int,
             converged: bool, message: str = "") -> GroundStateResult:
    coeffs = fiber_coefficients(u, params)
    e = energy(u, params)
    p = pohozaev(u, params)
    _, _, lam = gradient(u, params)
    cls = classify(coeffs, params, tol=1e-4)
    if converged:
        a_sq = coeffs.a_coef
        converged = abs(p) < 1e-6 * params.s * a_sq or abs(p) < 1e-12
    return GroundStateResult(
        field=u,
        energy=e.total,
        lam=lam,
        pohozaev_residual=p,
        seminorm_sq=coeffs.a_coef,
        iterations=iters,
        converged=converged,
        classification=cls,
        grad_norm=grad_norm,
        message=message,
    )


def local_minimize_subcritical(
    params: ProblemParams,
    grid: Grid,
    config: SolverConfig,
    c_gns: float,
    s_sob: float,
    init: Field | None = None,
) -> GroundStateResult:
    """Interior local minimizer inside the seminorm ball of radius r0.

    Mass-projected Armijo gradient descent from a gaussian seed pre-dilated
    so the initial seminorm is r0/2.  The iterate must stay inside the
    ball; leaving it aborts with diagnostics.  The smallness condition is
    checked but only warned about (it is sufficient, not necessary).
    """
    d = derive_exponents(params)
    if params.q >= d.p_bar:
        raise ParamError(f"subcritical solver needs q < {d.p_bar:.6g}, got {params.q}")
    rep = compute_thresholds(params, c_gns, s_sob)
    if rep.smallness_verdict != "subcritical-bound-ok":
        warnings.warn(
            f"smallness condition violated ({rep.x_value:.3g} >= {rep.alpha:.3g}); "
            "proceeding anyway",
            stacklevel=2,
        )
    prof = h_profile(params, c_gns, s_sob)
    r0 = prof.r0
    u = init if init is not None else gaussian_init(grid, params.a)
    u = project_mass(u, params.a)
    a_now = seminorm_sq(u, params.s)
    target = (0.5 * r0) ** 2
    if a_now > target:
        u = dilate(u, math.log(target / a_now) / (2.0 * params.s))
        u = project_mass(u, params.a)

    e_now = energy(u, params).total
    tau = config.step
    it = 0
    grad_norm = math.inf
    message = ""
    while it < config.max_iters:
        it += 1
        _, tan, lam = gradient(u, params)
        grad_norm = _l2(tan.values, grid)
        if grad_norm < config.grad_tol * (1.0 + abs(lam) * params.a):
            message = "converged"
            break
        accepted = False
        step = tau
        for _ in range(60):
            trial_vals = u.values - step * tan.values
            try:
                trial = project_mass(Field(grid, trial_vals), params.a)
            except Exception:
                step *= config.armijo_shrink
                continue
            e_t = energy(trial, params).total
            if e_t <= e_now - config.armijo_slope * step * grad_norm**2:
                semi = math.sqrt(seminorm_sq(trial, params.s))
                if semi >= r0:
                    raise LeftConfinementRegion(
                        f"left the confinement ball: seminorm {semi:.6g} >= r0 {r0:.6g} "
                        f"at iteration {it} (energy {e_t:.6g})"
                    )
                assert e_t <= e_now
                u, e_now = trial, e_t
                tau = min(step * 1.5, 1e6)
                accepted = True
                break
            step *= config.armijo_shrink
        if not accepted:
            message = "stalled line search"
            break
    else:
        message = "max iterations"

    # land exactly on the manifold branch carrying the local minimum
    try:
        u_proj = project_to_pohozaev(u, params, which="local_min", tail_tol=0.05)
        u_proj = project_mass(u_proj, params.a)
        if math.sqrt(seminorm_sq(u_proj, params.s)) < r0:
            u = u_proj
    except (BranchUnavailable, AliasingRisk):
        pass
    converged = message == "converged"
    _, tan, lam = gradient(u, params)
    grad_norm = _l2(tan.values, grid)
    converged = converged and grad_norm < config.grad_tol * (1.0 + abs(lam) * params.a) * 10.0
    return _measure(u, params, grad_norm, it, converged, message)


def _fiber_maximize(u: Field, params: ProblemParams) -> Field:
    # relaxed tail guard: solver states carry algebraic tails and the small
    # projection dilations wrap them almost exactly onto their periodization
    return project_to_pohozaev(u, params, which="max", tail_tol=0.05)


def minmax_groundstate(
    params: ProblemParams,
    grid: Grid,
    config: SolverConfig,
    init: Field | None = None,
    s_sob: float | None = None,
    c_gns: float | None = None,
    final_projection: bool = True,
) -> GroundStateResult:
    """Ground state at or above the mass-critical power (or with no
    perturbation): minimize the energy over the constraint manifold by
    alternating the exact fiber-maximum projection with one tangential
    Armijo descent step; nonnegativity is restored by modulus replacement
    each outer cycle.
    """
    d = derive_exponents(params)
    if params.q < d.p_bar and params.mu > 0.0:
        raise ParamError(
            f"min-max solver needs q >= {d.p_bar:.6g} (or mu = 0), got q={params.q}"
        )
    if params.mu > 0.0 and params.q == d.p_bar and c_gns is not None:
        rep = compute_thresholds(params, c_gns, s_sob if s_sob else 1.0)
        if "violated" in rep.smallness_verdict:
            warnings.warn(
                "mass-critical smallness condition violated; proceeding anyway",
                stacklevel=2,
            )
    k_collapse = 1e-3 * s_sob ** (params.n / (2.0 * params.s)) if s_sob else 0.0

    def lift(v: Field):
        v = project_mass(v, params.a)
        v = _fiber_maximize(v, params)
        return v, energy(v, params).total

    u = init if init is not None else bubble_init(params, grid)
    restarted = False
    while True:
        try:
            u, e_now = lift(u)
            break
        except (BranchUnavailable, AliasingRisk) as exc:
            if restarted:
                raise CollapseDetected(f"initial lift failed twice: {exc}")
            u = bubble_init(params, grid, eps_fraction=1.0 / 200.0)
            restarted = True

    tau = config.step
    it = 0
    grad_norm = math.inf
    message = ""
    while it < config.max_iters:
        it += 1
        if float(np.min(u.values)) < 0.0:
            w = Field(grid, np.abs(u.values))
            try:
                u, e_now = lift(w)
            except (BranchUnavailable, AliasingRisk):
                pass
        _, tan, lam = gradient(u, params)
        grad_norm = _l2(tan.values, grid)
        if grad_norm < config.grad_tol * (1.0 + abs(lam) * params.a):
            message = "converged"
            break
        a_now = seminorm_sq(u, params.s)
        if k_collapse > 0.0 and a_now < k_collapse:
            if restarted:
                message = "collapse detected"
                break
            u = bubble_init(params, grid, eps_fraction=1.0 / 200.0)
            u, e_now = lift(u)
            restarted = True
            continue
        accepted = False
        step = tau
        for _ in range(60):
            try:
                trial, e_t = lift(Field(grid, u.values - step * tan.values))
            except (BranchUnavailable, AliasingRisk, ValueError):
                step *= config.armijo_shrink
                continue
            if e_t <= e_now - config.armijo_slope * step * grad_norm**2:
                assert e_t <= e_now
                u, e_now = trial, e_t
                tau = min(step * 1.5, 1e6)
                accepted = True
                break
            step *= config.armijo_shrink
        if not accepted:
            message = "stalled line search"
            break
    else:
        message = "max iterations"

    if final_projection:
        try:
            u = _fiber_maximize(u, params)
            u = Field(grid, np.abs(u.values))
            u = project_mass(u, params.a)
        except (BranchUnavailable, AliasingRisk):
            pass
    converged = message == "converged"
    _, tan, lam = gradient(u, params)
    grad_norm = _l2(tan.values, grid)
    return _measure(u, params, grad_norm, it, converged, message)


def continuation_mu(
    params: ProblemParams,
    mu_schedule,
    grid: Grid,
    config: SolverConfig,
    c_gns: float,
    s_sob: float,
    adapt_box: bool | None = None,
) -> ContinuationResult:
    """Solve along a strictly decreasing positive schedule of perturbation
    strengths, warm-starting each row from the previous solution.

    Below the mass-critical power the minimizer spreads as the perturbation
    vanishes, so each row re-sizes its box from the envelope width estimate
    (the warm start moves between boxes by the exact unitary rescaling);
    at and above it the state concentrates and a fixed box is kept.
    Failed rows are recorded and the next row restarts cold.
    """
    mus = [float(m) for m in mu_schedule]
    if not mus or any(m <= 0.0 for m in mus):
        raise ParamError("schedule must be positive")
    if any(b >= a for a, b in zip(mus, mus[1:])):
        raise ParamError("schedule must be strictly decreasing")
    d = derive_exponents(params)
    subcritical = params.q < d.p_bar
    if adapt_box is None:
        adapt_box = subcritical
    rows = []
    grids = []
    prev: Field | None = None
    for mu in mus:
        p_k = replace(params, mu=mu)
        if subcritical:
            g_k = suggest_box_subcritical(p_k, c_gns, s_sob, m=grid.m) if adapt_box else grid
            init = transfer_field(prev, g_k) if prev is not None else None
            try:
                res = local_minimize_subcritical(p_k, g_k, config, c_gns, s_sob, init=init)
            except LeftConfinementRegion:
                rows.append((mu, math.nan, math.nan, math.nan, False))
                grids.append(g_k.signature())
                prev = None
                continue
        else:
            g_k = grid
            res = minmax_groundstate(
                p_k, g_k, config, init=prev, s_sob=s_sob, c_gns=c_gns
            )
        rows.append((mu, res.energy, res.seminorm_sq, res.lam, res.converged))
        grids.append(g_k.signature())
        prev = res.field if res.converged else None
    return ContinuationResult(rows=tuple(rows), grids=tuple(grids))


def nonexistence_probe(
    params: ProblemParams,
    config: SolverConfig,
    level_grids,
    sobolev_estimates,
) -> ProbeReport:
    """Refinement study in the window 2s < N <= 4s with no perturbation.

    Each level runs the min-max solver (warm-started from the previous
    level, converged to a tighter tolerance) and records the energy, the
    multiplier of the raw converged iterate, and the best-fit concentration
    scale.  The expected signature of nonattainment is a concentration
    scale shrinking with resolution and a multiplier driven toward zero
    while the energy hugs the critical level from above; the verdict is
    qualitative, never an existence claim.
    """
    if params.mu != 0.0:
        raise ParamError("probe requires mu = 0")
    if not (2.0 * params.s < params.n <= 4.0 * params.s):
        raise ParamError(
            f"probe requires 2s < N <= 4s, got N={params.n}, s={params.s}"
        )
    grids = list(level_grids)
    sobs = list(sobolev_estimates)
    if len(grids) != len(sobs):
        raise ParamError("need one embedding-constant estimate per level")
    levels = []
    prev: Field | None = None
    tol = config.grad_tol
    for grid, s_sob in zip(grids, sobs):
        cfg = replace(config, grad_tol=tol)
        init = None
        if prev is not None:
            init = project_mass(refine_field(prev, grid.m), params.a)
        res = minmax_groundstate(
            params, grid, cfg, init=init, s_sob=s_sob, final_projection=False
        )
        eps_fit, fit_err = fit_bubble_scale(res.field, params.n, params.s)
        levels.append(
            ProbeLevel(
                grid_signature=grid.signature(),
                energy=res.energy,
                lam=res.lam,
                eps_fit=eps_fit,
                fit_error=fit_err,
                sobolev_proxy=s_sob,
                converged=res.converged,
            )
        )
        prev = res.field
        tol /= 3.0
    eps_seq = [lv.eps_fit for lv in levels]
    lam_seq = [abs(lv.lam) for lv in levels]
    shrinking = all(b < a for a, b in zip(eps_seq, eps_seq[1:]))
    vanishing = all(b < a for a, b in zip(lam_seq, lam_seq[1:]))
    verdict = (
        "consistent with nonattainment: concentration scale shrinking and "
        "multiplier driven toward zero"
        if (shrinking and vanishing)
        else "inconclusive: see level trajectories"
    )
    return ProbeReport(levels=tuple(levels), verdict=verdict)
