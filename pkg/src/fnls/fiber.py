"""Closed-form analysis of the energy along the dilation fiber.

All operations act on coefficient triples (A, B, C), so the 1D geometry is
exact and decoupled from any grid; field-backed entry points are thin
adapters.  With y = e^(st), stationarity of the fiber energy reads
A = mu gamma y^(q gamma - 2) B + y^(2* - 2) C =: g(y), and the shape of g
(decreasing-then-increasing below the mass-critical power, strictly
increasing at or above it) gives certified brackets for every root.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .functionals import FiberCoefficients, fiber_coefficients
from .params import ProblemParams, derive_exponents
from .spectral import DegenerateInput, Field, dilate

__all__ = [
    "BranchUnavailable",
    "FiberCriticalPoints",
    "ManifoldClass",
    "fiber_eval",
    "critical_points",
    "classify",
    "project_to_pohozaev",
    "T_CAP_FACTOR",
]

# search range cap: |t| <= T_CAP_FACTOR / s (exceedance is reported, not clamped)
T_CAP_FACTOR = 50.0


class BranchUnavailable(RuntimeError):
    """The requested fiber branch does not exist in this regime."""


@dataclass(frozen=True)
class FiberCriticalPoints:
    """Critical points (t, curvature sign) ordered by t, plus fiber zeros."""

    points: tuple          # ((t, sign), ...) with sign in {+1, -1, 0}
    zeros: tuple           # ordered t with fiber energy = 0 (subcritical only)
    count: int
    capped: bool = False   # True when a root search hit the |t| cap


@dataclass(frozen=True)
class ManifoldClass:
    tag: str               # "P_plus" | "P_zero" | "P_minus" | "off_manifold"
    pohozaev_value: float
    second_derivative_value: float


def fiber_eval(coeffs: FiberCoefficients, params: ProblemParams, t):
    """(psi, psi', psi'') of the fiber energy at t (scalar or array).

    psi(t)  = e^(2st) A/2 - mu e^(q gamma s t) B/q - e^(2* s t) C/2*
    psi'(t) = s (e^(2st) A - mu gamma e^(q gamma s t) B - e^(2* s t) C),
    which equals the Pohozaev value of the dilated field.
    """
    a, b, c = coeffs.a_coef, coeffs.b_coef, coeffs.c_coef
    if a <= 0.0:
        raise DegenerateInput("fiber needs a positive seminorm coefficient")
    if b < 0.0 or c < 0.0:
        raise ValueError("fiber coefficients must be nonnegative")
    d = derive_exponents(params)
    s, mu, q = params.s, params.mu, params.q
    g, ts, gam = d.q_gamma, d.two_star, d.gamma_qs
    t = np.asarray(t, dtype=float)
    e2 = np.exp(2.0 * s * t)
    eg = np.exp(g * s * t)
    ec = np.exp(ts * s * t)
    psi = 0.5 * e2 * a - (mu / q) * eg * b - (1.0 / ts) * ec * c
    dpsi = s * (e2 * a - mu * gam * eg * b - ec * c)
    d2psi = s**2 * (2.0 * e2 * a - mu * q * gam**2 * eg * b - ts * ec * c)
    if psi.ndim == 0:
        return float(psi), float(dpsi), float(d2psi)
    return psi, dpsi, d2psi


def _dpsi_of_t(coeffs, params):
    def f(t):
        return fiber_eval(coeffs, params, t)[1]

    return f


def _psi_of_t(coeffs, params):
    def f(t):
        return fiber_eval(coeffs, params, t)[0]

    return f


def _sign_of_curvature(coeffs, params, t, band: float) -> int:
    d2 = fiber_eval(coeffs, params, t)[2]
    scale = params.s**2 * coeffs.a_coef * math.exp(2.0 * params.s * t)
    if abs(d2) <= band * scale:
        return 0
    return 1 if d2 > 0.0 else -1


def critical_points(
    coeffs: FiberCoefficients, params: ProblemParams, zero_band: float = 1e-10
) -> FiberCriticalPoints:
    """Solve psi' = 0 with certified brackets and curvature signs.

    Below the mass-critical power the stationarity curve g(y) dips to a
    unique interior minimum, so there are at most two roots (a fiber local
    minimum then the global maximum) and exactly two fiber zeros between
    and beyond them; at or above it g is strictly increasing and the unique
    root is the fiber maximum.
    """
    a, b, c = coeffs.a_coef, coeffs.b_coef, coeffs.c_coef
    if a <= 0.0:
        raise DegenerateInput("fiber needs a positive seminorm coefficient")
    if b <= 0.0 and c <= 0.0:
        raise DegenerateInput("no critical point at positive level: B = C = 0")
    d = derive_exponents(params)
    s, mu, q = params.s, params.mu, params.q
    g, ts = d.q_gamma, d.two_star
    gam = d.gamma_qs
    t_cap = T_CAP_FACTOR / s
    dpsi = _dpsi_of_t(coeffs, params)
    psi = _psi_of_t(coeffs, params)
    subcritical_shape = (g < 2.0) and (mu > 0.0) and (b > 0.0)

    if not subcritical_shape:
        # g(y) strictly increasing (q >= mass-critical, or no perturbation
        # term): unique root, a strict fiber maximum.
        if g == 2.0 and b > 0.0 and mu > 0.0:
            # stationarity: (A - mu gamma B) = y^(2*-2) C
            head = a - mu * gam * b
            if head <= 0.0:
                raise BranchUnavailable(
                    "no critical point at positive level: perturbation term "
                    "dominates the kinetic coefficient"
                )
            if c <= 0.0:
                raise BranchUnavailable("no critical point: vanishing top-power term")
            t_u = math.log(head / c) / ((ts - 2.0) * s)
        elif mu == 0.0 or b == 0.0:
            if c <= 0.0:
                raise BranchUnavailable("no critical point: vanishing top-power term")
            t_u = math.log(a / c) / ((ts - 2.0) * s)
        else:
            lo, hi = 0.0, 0.0
            while dpsi(lo) <= 0.0:
                lo -= 1.0
                if lo < -t_cap:
                    return FiberCriticalPoints(points=(), zeros=(), count=0, capped=True)
            while dpsi(hi) >= 0.0:
                hi += 1.0
                if hi > t_cap:
                    return FiberCriticalPoints(points=(), zeros=(), count=0, capped=True)
            t_u = brentq(dpsi, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=200)
        sign = _sign_of_curvature(coeffs, params, t_u, zero_band)
        return FiberCriticalPoints(points=((t_u, sign),), zeros=(), count=1)

    # subcritical shape: locate the interior minimum of
    # g(y) = mu gamma y^(g-2) B + y^(2*-2) C in y = e^(st)
    if c > 0.0:
        y_star = (mu * gam * (2.0 - g) * b / ((ts - 2.0) * c)) ** (1.0 / (ts - g))
    else:
        # no top-power term: g decreasing, single root = fiber minimum
        y_root = (mu * gam * b / a) ** (1.0 / (g - 2.0))
        t_min = math.log(y_root) / s
        sign = _sign_of_curvature(coeffs, params, t_min, zero_band)
        return FiberCriticalPoints(points=((t_min, sign),), zeros=(), count=1)

    def g_of_y(y):
        return mu * gam * y ** (g - 2.0) * b + y ** (ts - 2.0) * c

    t_star = math.log(y_star) / s
    if g_of_y(y_star) >= a:
        # the curve never dips below A: no stationary point at positive level
        return FiberCriticalPoints(points=(), zeros=(), count=0)
    capped = False
    lo = t_star
    while dpsi(lo) > 0.0:
        lo -= 1.0
        if lo < -t_cap:
            capped = True
            break
    hi = t_star
    while dpsi(hi) > 0.0:
        hi += 1.0
        if hi > t_cap:
            capped = True
            break
    if capped:
        return FiberCriticalPoints(points=(), zeros=(), count=0, capped=True)
    t_lo = brentq(dpsi, lo, t_star, xtol=1e-14, rtol=1e-15, maxiter=200)
    t_hi = brentq(dpsi, t_star, hi, xtol=1e-14, rtol=1e-15, maxiter=200)
    pts = (
        (t_lo, _sign_of_curvature(coeffs, params, t_lo, zero_band)),
        (t_hi, _sign_of_curvature(coeffs, params, t_hi, zero_band)),
    )
    # fiber zeros: one between the two stationary points, one beyond the max
    zeros = ()
    if psi(t_lo) < 0.0 < psi(t_hi):
        c_u = brentq(psi, t_lo, t_hi, xtol=1e-14, rtol=1e-15, maxiter=200)
        hi2 = t_hi
        while psi(hi2) > 0.0 and hi2 <= t_cap:
            hi2 += 1.0
        d_u = brentq(psi, t_hi, hi2, xtol=1e-14, rtol=1e-15, maxiter=200)
        zeros = (c_u, d_u)
    return FiberCriticalPoints(points=pts, zeros=zeros, count=2, capped=False)


def classify(
    coeffs: FiberCoefficients, params: ProblemParams, tol: float = 1e-4
) -> ManifoldClass:
    """Locate the triple relative to the constraint manifold split.

    off_manifold when |psi'(0)| > tol * s * A; otherwise the tag follows
    the sign of psi''(0) with the same relative band (against s^2 A) for
    the degenerate class.
    """
    if tol <= 0.0:
        raise ValueError(f"tol must be > 0, got {tol}")
    psi0, dpsi0, d2psi0 = fiber_eval(coeffs, params, 0.0)
    scale_p = params.s * coeffs.a_coef
    if abs(dpsi0) > tol * scale_p:
        return ManifoldClass(
            tag="off_manifold", pohozaev_value=dpsi0, second_derivative_value=d2psi0
        )
    scale_c = params.s**2 * coeffs.a_coef
    if abs(d2psi0) <= tol * scale_c:
        tag = "P_zero"
    elif d2psi0 > 0.0:
        tag = "P_plus"
    else:
        tag = "P_minus"
    return ManifoldClass(tag=tag, pohozaev_value=dpsi0, second_derivative_value=d2psi0)


def project_to_pohozaev(
    u: Field, params: ProblemParams, which: str = "max", tail_tol: float = 1e-10
) -> Field:
    """Dilate a field onto the constraint manifold along its fiber.

    which = "max" lands on the fiber maximum branch (always present);
    which = "local_min" exists only below the mass-critical power under the
    smallness threshold and raises BranchUnavailable otherwise.

    The coefficient model locates the root; the dilation parameter is then
    Newton-polished against the Pohozaev value of the actually dilated
    field, because the discrete seminorm follows the e^(2st) law only up to
    a lattice-quadrature defect while the converged states must satisfy the
    discrete identity itself.  tail_tol is passed through to the dilation
    guard.
    """
    if which not in ("max", "local_min"):
        raise ValueError(f"which must be 'max' or 'local_min', got {which}")
    from .functionals import pohozaev  # local import to avoid cycle at module load

    d = derive_exponents(params)
    coeffs = fiber_coefficients(u, params)
    cps = critical_points(coeffs, params)
    if which == "local_min":
        if params.q >= d.p_bar:
            raise BranchUnavailable(
                "branch unavailable: no fiber local minimum at or above the "
                "mass-critical power"
            )
        minima = [t for (t, sign) in cps.points if sign > 0]
        if not minima:
            raise BranchUnavailable("branch unavailable: fiber has no local minimum")
        t = minima[0]
    else:
        maxima = [t for (t, sign) in cps.points if sign < 0]
        if not maxima:
            raise BranchUnavailable("branch unavailable: fiber maximum not found")
        t = maxima[-1]
    v = dilate(u, t, tail_tol=tail_tol)
    tol = 1e-13 * params.s * coeffs.a_coef
    for _ in range(8):
        p_actual = pohozaev(v, params)
        if abs(p_actual) <= tol:
            break
        slope = fiber_eval(coeffs, params, t)[2]
        if slope == 0.0:
            break
        t_new = t - p_actual / slope
        if not math.isfinite(t_new):
            break
        t, v = t_new, dilate(u, t_new, tail_tol=tail_tol)
    return v
