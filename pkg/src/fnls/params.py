"""Problem parameters, derived exponents, and closed-form scalar thresholds.

Everything in this module is exact scalar arithmetic on the defining data
(N, s, q, mu, a) plus the two best constants (Gagliardo-Nirenberg and
Sobolev) that are estimated numerically elsewhere and passed in.  Threshold
formulas are evaluated in log space so that extreme fractional orders do
not overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.optimize import brentq

__all__ = [
    "ParamError",
    "ThresholdViolation",
    "NoPerturbation",
    "ProblemParams",
    "DerivedExponents",
    "ThresholdReport",
    "HProfile",
    "VarthetaMinimum",
    "critical_exponent",
    "l2_critical_exponent",
    "interpolation_exponent",
    "derive_exponents",
    "regime_classify",
    "threshold_gap_factor",
    "compute_thresholds",
    "EnergyEnvelope",
    "make_envelope",
    "h_profile",
    "vartheta_minimum",
    "REGIMES",
]


class ParamError(ValueError):
    """Invalid problem parameters (the violated constraint is named)."""


class ThresholdViolation(RuntimeError):
    """A smallness condition required by the requested operation fails."""


class NoPerturbation(RuntimeError):
    """The operation is degenerate at mu = 0."""


def critical_exponent(n: int, s: float) -> float:
    """Largest admissible power 2N/(N-2s); requires N > 2s."""
    if n <= 2 * s:
        raise ParamError(f"need N > 2s, got N={n}, s={s}")
    return 2.0 * n / (n - 2.0 * s)


def l2_critical_exponent(n: int, s: float) -> float:
    """Mass-critical power 2 + 4s/N."""
    return 2.0 + 4.0 * s / n


def interpolation_exponent(n: int, s: float, q: float) -> float:
    """Interpolation weight N(q-2)/(2qs).

    Defined for any q > 0 so tests can evaluate the boundary values q = 2
    (weight 0) and q = 2N/(N-2s) (weight 1) directly, outside the open
    interval enforced by ProblemParams.
    """
    return n * (q - 2.0) / (2.0 * q * s)


@dataclass(frozen=True)
class ProblemParams:
    """One instance of the constrained problem: dimension, fractional order,
    perturbation power and strength, and square-root mass."""

    n: int
    s: float
    q: float
    mu: float
    a: float

    def __post_init__(self):
        if self.n not in (1, 2, 3):
            raise ParamError(f"n must be 1, 2 or 3, got {self.n}")
        if not (0.0 < self.s < 1.0):
            raise ParamError(f"s must lie in (0,1), got {self.s}")
        if self.n <= 2.0 * self.s:
            raise ParamError(f"need N > 2s, got N={self.n}, s={self.s}")
        two_star = critical_exponent(self.n, self.s)
        if not (2.0 < self.q < two_star):
            raise ParamError(
                f"q must lie in (2, {two_star:.6g}) for N={self.n}, s={self.s}; got {self.q}"
            )
        if self.mu < 0.0:
            raise ParamError(f"mu must be >= 0, got {self.mu}")
        if self.a <= 0.0:
            raise ParamError(f"a must be > 0, got {self.a}")

    @property
    def mass(self) -> float:
        return self.a**2

    def x_value(self) -> float:
        """The smallness combination mu * a^(q(1-gamma))."""
        d = derive_exponents(self)
        return self.mu * self.a ** (self.q * (1.0 - d.gamma_qs))


@dataclass(frozen=True)
class DerivedExponents:
    two_star: float
    p_bar: float
    gamma_qs: float
    q_gamma: float


def derive_exponents(params: ProblemParams) -> DerivedExponents:
    """All exponents determined by (N, s, q)."""
    two_star = critical_exponent(params.n, params.s)
    p_bar = l2_critical_exponent(params.n, params.s)
    gamma = interpolation_exponent(params.n, params.s, params.q)
    return DerivedExponents(
        two_star=two_star, p_bar=p_bar, gamma_qs=gamma, q_gamma=params.q * gamma
    )


REGIMES = (
    "N > 4s",
    "N = 4s",
    "(q/(q-1))2s < N < 4s",
    "N = (q/(q-1))2s",
    "2s < N < (q/(q-1))2s",
)

_REGIME_RTOL = 1e-12


def regime_classify(n: int, s: float, q: float) -> str:
    """Which of the five dimension windows (N vs 4s and (q/(q-1))2s) holds.

    The two equality cases are detected with relative tolerance 1e-12 so
    that exactly representable coincidences (e.g. N = 1, s = 0.25) land on
    the equality branch; the five cases partition (2s, infinity).
    """
    if n <= 2 * s:
        raise ParamError(f"need N > 2s, got N={n}, s={s}")
    if q <= 1.0:
        raise ParamError(f"regime split needs q > 1, got {q}")
    inner = (q / (q - 1.0)) * 2.0 * s  # always in (2s, 4s) for q > 2
    if abs(n - 4.0 * s) <= _REGIME_RTOL * max(n, 4.0 * s):
        return "N = 4s"
    if n > 4.0 * s:
        return "N > 4s"
    if abs(n - inner) <= _REGIME_RTOL * max(n, inner):
        return "N = (q/(q-1))2s"
    if n > inner:
        return "(q/(q-1))2s < N < 4s"
    return "2s < N < (q/(q-1))2s"


def threshold_gap_factor(x: float, two_star: float) -> float:
    """(x/2)^(2*-2) * (2*/2)^(2-x), the factor comparing the degenerate
    second-derivative bound against the envelope threshold.

    Strictly increasing on (0, 2] with value 1 at x = 2, so it is <= 1 on
    the admissible range and the degenerate manifold stays empty below the
    envelope threshold.
    """
    if x <= 0.0:
        raise ParamError(f"need x > 0, got {x}")
    return math.exp((two_star - 2.0) * math.log(x / 2.0) + (2.0 - x) * math.log(two_star / 2.0))


@dataclass(frozen=True)
class ThresholdReport:
    c_prime: float
    c_double_prime: float
    alpha: float
    critical_bound: float
    supercritical_bound: float
    x_value: float
    smallness_verdict: str
    regime: str

    def as_dict(self) -> dict:
        return {
            "c_prime": self.c_prime,
            "c_double_prime": self.c_double_prime,
            "alpha": self.alpha,
            "critical_bound": self.critical_bound,
            "supercritical_bound": self.supercritical_bound,
            "x_value": self.x_value,
            "smallness_verdict": self.smallness_verdict,
            "regime": self.regime,
        }


def _log_c_prime(n: int, s: float, q: float, log_cq: float, log_s_sob: float) -> float:
    two_star = critical_exponent(n, s)
    g = q * interpolation_exponent(n, s, q)
    bracket = (
        math.log(2.0 - g)
        + math.log(two_star)
        - math.log(2.0 * (two_star - g))
        + (two_star / 2.0) * log_s_sob
    )
    return (
        math.log(q)
        + math.log(two_star - 2.0)
        - math.log(2.0)
        - log_cq
        - math.log(two_star - g)
        + ((2.0 - g) / (two_star - 2.0)) * bracket
    )


def _log_c_double_prime(n: int, s: float, q: float, log_cq: float, log_s_sob: float) -> float:
    # Exact inversion of "minimum of the coercivity gap stays above
    # -(s/N) S^(N/2s)" as a bound on mu a^(q(1-gamma)).
    two_star = critical_exponent(n, s)
    gamma = interpolation_exponent(n, s, q)
    g = q * gamma
    return (
        math.log(2.0 * two_star)
        - math.log(two_star - g)
        - log_cq
        + ((2.0 - g) / 2.0)
        * (math.log(q * s) - math.log(n * (2.0 - g)) + (n / (2.0 * s)) * log_s_sob)
        + (g / 2.0) * (math.log(s) - math.log(n * gamma))
    )


def compute_thresholds(params: ProblemParams, c_gns: float, s_sob: float) -> ThresholdReport:
    """Evaluate every scalar threshold and classify the instance.

    c_gns is the interpolation-inequality constant on the norm (not its
    q-th power); s_sob is the sharp embedding constant estimate.
    """
    if c_gns <= 0.0:
        raise ParamError(f"c_gns must be > 0, got {c_gns}")
    if s_sob <= 0.0:
        raise ParamError(f"s_sob must be > 0, got {s_sob}")
    n, s, q = params.n, params.s, params.q
    d = derive_exponents(params)
    log_cq = q * math.log(c_gns)
    log_s = math.log(s_sob)

    c_prime = math.exp(_log_c_prime(n, s, q, log_cq, log_s))
    c_dp = math.exp(_log_c_double_prime(n, s, q, log_cq, log_s))
    alpha = min(c_prime, c_dp)

    p_bar = d.p_bar
    log_cpbar = p_bar * math.log(c_gns)
    critical_bound = math.exp(math.log(p_bar) - math.log(2.0) - log_cpbar)
    supercritical_bound = math.exp(
        (n / (4.0 * s)) * q * (1.0 - d.gamma_qs) * log_s - math.log(d.gamma_qs)
    )

    x = params.x_value()
    regime = regime_classify(n, s, q)
    if q < p_bar:
        verdict = "subcritical-bound-ok" if x < alpha else "subcritical-bound-violated"
    elif q == p_bar:
        xc = params.mu * params.a ** (4.0 * s / n)
        verdict = "critical-bound-ok" if xc < critical_bound else "critical-bound-violated"
    else:
        if regime in ("N > 4s", "N = (q/(q-1))2s"):
            verdict = (
                "supercritical-bound-ok"
                if x < supercritical_bound
                else "supercritical-bound-violated"
            )
        else:
            verdict = "supercritical-unconditional"
    return ThresholdReport(
        c_prime=c_prime,
        c_double_prime=c_dp,
        alpha=alpha,
        critical_bound=critical_bound,
        supercritical_bound=supercritical_bound,
        x_value=x,
        smallness_verdict=verdict,
        regime=regime,
    )


class EnergyEnvelope:
    """The radial lower envelope t -> t^2/2 - kq t^(q gamma) - kc t^(2*)
    of the constrained energy along the seminorm radius, with kq, kc built
    from the instance and the two best constants."""

    def __init__(self, params: ProblemParams, c_gns: float, s_sob: float):
        d = derive_exponents(params)
        self.two_star = d.two_star
        self.q_gamma = d.q_gamma
        self.gamma = d.gamma_qs
        self.q = params.q
        x = params.x_value()
        self.kq = (x / params.q) * c_gns**params.q
        self.kc = (1.0 / d.two_star) * s_sob ** (-d.two_star / 2.0)
        # same coefficients with derivative weights
        self.kq_d = x * self.gamma * c_gns**params.q
        self.kc_d = s_sob ** (-d.two_star / 2.0)

    def value(self, t):
        return 0.5 * t**2 - self.kq * t**self.q_gamma - self.kc * t**self.two_star

    def derivative(self, t):
        g, ts = self.q_gamma, self.two_star
        return t - g * self.kq * t ** (g - 1.0) - ts * self.kc * t ** (ts - 1.0)


def make_envelope(params: ProblemParams, c_gns: float, s_sob: float) -> EnergyEnvelope:
    return EnergyEnvelope(params, c_gns, s_sob)


@dataclass(frozen=True)
class HProfile:
    r0: float
    r1: float
    t_min: float
    t_max: float
    h_min: float
    h_max: float


_ROOT_XTOL = 1e-14


def _bracketed_root(f, lo: float, hi: float) -> float:
    return brentq(f, lo, hi, xtol=_ROOT_XTOL, rtol=1e-15, maxiter=200)


def h_profile(params: ProblemParams, c_gns: float, s_sob: float) -> HProfile:
    """Zeros and critical points of the energy lower envelope.

    Requires a subcritical power and the smallness condition under which
    the envelope has a positivity window (r0, r1); raises
    ThresholdViolation otherwise.  At mu = 0 the window degenerates to
    (0, r1) and the minimum sits at level 0.
    """
    d = derive_exponents(params)
    if params.q >= d.p_bar:
        raise ParamError(f"envelope profile needs q < {d.p_bar:.6g}, got q={params.q}")
    rep = compute_thresholds(params, c_gns, s_sob)
    if params.x_value() >= rep.c_prime:
        raise ThresholdViolation(
            f"threshold violated: mu*a^(q(1-gamma)) = {rep.x_value:.6g} >= {rep.c_prime:.6g}"
        )
    env = make_envelope(params, c_gns, s_sob)
    ts, g = env.two_star, env.q_gamma

    # closed-form right zero and scale of the mu = 0 envelope
    r1_mu0 = ((ts / 2.0) * s_sob ** (ts / 2.0)) ** (1.0 / (ts - 2.0))
    if params.mu == 0.0:
        return HProfile(r0=0.0, r1=r1_mu0, t_min=0.0, t_max=0.0, h_min=0.0, h_max=0.0)
    # t_max of the reduced shape phi(t) = t^(2-g)/2 - kc t^(2*-g),
    # separating the two envelope zeros.
    t_phi = (((2.0 - g) * ts) / (2.0 * (ts - g)) * s_sob ** (ts / 2.0)) ** (1.0 / (ts - 2.0))
    # t_psi separates the two critical points (peak of t^(2-g) - kc_d t^(2*-g))
    t_psi = ((2.0 - g) / ((ts - g) * env.kc_d)) ** (1.0 / (ts - 2.0))

    h = env.value
    dh = env.derivative
    assert h(t_phi) > 0.0, "positivity window missing below threshold"
    lo = t_phi
    while h(lo) > 0.0:
        lo /= 2.0
    r0 = _bracketed_root(h, lo, t_phi)
    hi = t_phi
    while h(hi) > 0.0:
        hi *= 2.0
    r1 = _bracketed_root(h, t_phi, hi)

    assert dh(t_psi) > 0.0
    lo = t_psi
    while dh(lo) > 0.0:
        lo /= 2.0
    t_min = _bracketed_root(dh, lo, t_psi)
    hi = t_psi
    while dh(hi) > 0.0:
        hi *= 2.0
    t_max = _bracketed_root(dh, t_psi, hi)
    return HProfile(
        r0=r0, r1=r1, t_min=t_min, t_max=t_max, h_min=h(t_min), h_max=h(t_max)
    )


@dataclass(frozen=True)
class VarthetaMinimum:
    t_bar: float
    value: float
    gap_bound: float
    above_gap: bool


def vartheta_minimum(params: ProblemParams, c_gns: float, s_sob: float) -> VarthetaMinimum:
    """Unique minimizer of the coercivity-gap function
    (s/N) t^2 - (mu/q)(1 - q gamma/2*) C^q a^(q(1-gamma)) t^(q gamma)
    and whether its (negative) minimum stays above -(s/N) S^(N/2s).

    The above-gap flag is equivalent to mu a^(q(1-gamma)) < c_double_prime.
    """
    d = derive_exponents(params)
    if params.q >= d.p_bar:
        raise ParamError(f"gap function needs q < {d.p_bar:.6g}, got q={params.q}")
    if params.mu == 0.0:
        raise NoPerturbation("no perturbation: gap function is nonnegative at mu = 0")
    n, s, q = params.n, params.s, params.q
    g = d.q_gamma
    acoef = s / n
    bcoef = (params.x_value() / q) * (1.0 - g / d.two_star) * c_gns**q
    t_bar = (g * bcoef / (2.0 * acoef)) ** (1.0 / (2.0 - g))
    value = -bcoef * (1.0 - g / 2.0) * t_bar**g
    gap_bound = (s / n) * s_sob ** (n / (2.0 * s))
    return VarthetaMinimum(
        t_bar=t_bar, value=value, gap_bound=gap_bound, above_gap=(value > -gap_bound)
    )
