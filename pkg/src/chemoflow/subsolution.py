"""Explicit blow-up subsolutions for the mass-function system, with the full
parameter pipeline and a sampling certificate.

The subsolution pair is, up to a decaying prefactor exp(-theta*t),

    Phi(s, t) = l * y^(1-alpha) * s                     for s <= 1/y(t)
    Phi(s, t) = l * alpha^-alpha * (s - (1-alpha)/y)^alpha   beyond the kink

(and the same shape with beta for the second species), driven by the ODE
y' = kappa * y^(1+delta), which reaches infinity at T = y0^-delta / (kappa
delta).  The construction is C^1 across the kink s = 1/y(t) and satisfies
the two mass-system differential inequalities on three regions (inner,
middle, outer) once the amplitude l, the split point s_star, the decay rate
theta and the initial slope scale y0 clear a chain of explicit thresholds.

The threshold chain drives y0 to astronomically large values (beyond float
range for typical inputs), so y0, theta and every derived quantity are kept
in natural-log form and the certificate evaluates the operators in signed
log arithmetic, normalizing each sample's residual by its largest term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from chemoflow.model_core import ModelParams, SensitivityFamily, unit_sphere_area

__all__ = [
    "Exponents",
    "SubsolutionParams",
    "SubsolutionEval",
    "Region",
    "CertificateSampling",
    "Certificate",
    "InfeasibleExponentsError",
    "ParameterBuildError",
    "select_exponents",
    "margin_pair",
    "build_params",
    "power_ode_solution",
    "y_of_t",
    "log_y_of_t",
    "eval_subsolution",
    "kink_values",
    "initial_thresholds",
    "predicted_central_lower_bound",
    "certify",
]

_E = math.e


class InfeasibleExponentsError(ValueError):
    """Raised when (n, p, q) violates the blow-up hypotheses."""


class ParameterBuildError(ValueError):
    """Raised when the threshold chain degenerates numerically."""


# ---------------------------------------------------------------------------
# exponent selection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Exponents:
    """The three profile exponents with their feasibility margins.

    Requires delta in (0, 2/n), alpha in (0, 1 - 2/n), beta in (0, 1) and
    strictly positive margins

        margin1 = (1-alpha) q + alpha - beta - delta
        margin2 = (1-alpha)(q-p) + alpha - beta - 2/n
    """

    delta: float
    alpha: float
    beta: float
    n: int
    p: float
    q: float

    def __post_init__(self):
        n = self.n
        if not (0 < self.delta < 2.0 / n):
            raise ValueError(f"delta must lie in (0, {2.0 / n}), got {self.delta}")
        if not (0 < self.alpha < 1.0 - 2.0 / n):
            raise ValueError(f"alpha must lie in (0, {1.0 - 2.0 / n}), got {self.alpha}")
        if not (0 < self.beta < 1):
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        m1, m2 = self.margins
        if m1 <= 0 or m2 <= 0:
            raise ValueError(f"feasibility margins must be positive, got ({m1}, {m2})")

    @property
    def margins(self) -> tuple[float, float]:
        return margin_pair(self.n, self.p, self.q, self.delta, self.alpha, self.beta)


def margin_pair(n, p, q, delta, alpha, beta) -> tuple[float, float]:
    """The two feasibility margins at a candidate (delta, alpha, beta)."""
    m1 = (1.0 - alpha) * q + alpha - beta - delta
    m2 = (1.0 - alpha) * (q - p) + alpha - beta - 2.0 / n
    return m1, m2


def select_exponents(n: int, p: float, q: float) -> Exponents:
    """Pick (delta, alpha, beta) = (eps, 1 - 2/n - eps, eps), halving eps from
    1/8 until both margins are positive.

    The margins converge to (2/n)(q - (1 - n/2)) and (2/n)((q-p) - (2 - n/2))
    as eps -> 0, so feasibility requires the strict regime inequalities; those
    are checked up front so the failure names the violated hypothesis.  The
    first (largest) feasible eps is returned: every further halving buys a
    vanishing margin improvement at the cost of a doubly-exponential blowup
    of the downstream threshold constants.
    """
    if n < 3:
        raise InfeasibleExponentsError(f"blow-up construction requires n >= 3, got n = {n}")
    violated = []
    if not (q - p > 2.0 - n / 2.0):
        violated.append(f"q - p > 2 - n/2 (got q - p = {q - p} <= {2.0 - n / 2.0})")
    if not (q > 1.0 - n / 2.0):
        violated.append(f"q > 1 - n/2 (got q = {q} <= {1.0 - n / 2.0})")
    if violated:
        raise InfeasibleExponentsError("requires " + " and ".join(violated))

    eps = 1.0 / 8.0
    for _ in range(200):
        in_range = eps < 2.0 / n and eps < 1.0 - 2.0 / n
        if in_range:
            alpha = 1.0 - 2.0 / n - eps
            m1, m2 = margin_pair(n, p, q, eps, alpha, eps)
            if m1 > 0 and m2 > 0:
                return Exponents(delta=eps, alpha=alpha, beta=eps, n=n, p=p, q=q)
        eps *= 0.5
    raise InfeasibleExponentsError(
        f"no feasible (delta, alpha, beta) found for n={n}, p={p}, q={q}"
    )


# ---------------------------------------------------------------------------
# parameter pipeline
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SubsolutionParams:
    """Complete parameter tuple of the construction.

    Large quantities additionally carry their natural logs (``log_*``); the
    plain float view may be ``inf`` when the value exceeds double range.
    """

    model: ModelParams
    exponents: Exponents
    mu_hi: float  # larger of the two initial spatial means
    mu_lo: float  # smaller of the two initial spatial means
    l: float
    y_star: float
    log_y_star: float
    s_star: float
    log_s_star: float
    theta_star: float
    log_theta_star: float
    theta: float
    log_theta: float
    kappa: float
    y0: float
    log_y0: float
    T: float
    c1: float
    c2: float
    c3: float
    c4: float
    log_D_max: float
    log_S_max: float
    bracket_max_at_endpoint: bool

    @property
    def kink_log(self) -> float:
        """log of the initial kink location 1/y0."""
        return -self.log_y0


def _log_power(base_log: float, exponent: float) -> float:
    return exponent * base_log


def build_params(
    model: ModelParams,
    mu_hi: float,
    mu_lo: float,
    exponents: Exponents,
    family: SensitivityFamily | None = None,
) -> SubsolutionParams:
    """Derive the full tuple (l, y_star, s_star, theta_star, theta, kappa, y0, T).

    ``mu_hi`` / ``mu_lo`` are the larger / smaller of the two initial means;
    mu_hi enters adversarially (thresholds grow with it), mu_lo sets the
    amplitude l.  All thresholds are solved in closed form; s_star takes the
    minimum of its seven explicit upper bounds, halved for margin and capped
    at R^n / 2; theta = 2 * theta_star; y0 doubles the max of its three lower
    bounds, which makes T < 1/theta automatic with ratio 2^-delta.
    """
    if family is None:
        family = SensitivityFamily(model)
    if model.kS <= 0:
        raise ParameterBuildError("blow-up construction requires kS > 0")
    if not (mu_hi >= mu_lo > 0):
        raise ParameterBuildError(f"need mu_hi >= mu_lo > 0, got ({mu_hi}, {mu_lo})")

    n = model.n
    R = model.R
    p, q = model.p, model.q
    delta, alpha, beta = exponents.delta, exponents.alpha, exponents.beta
    m1, m2 = exponents.margins

    kD = family.kD_power_upper
    kS = family.kS_power_lower

    Rn = R**n
    log_Rn = n * math.log(R)
    l = mu_lo * Rn / (n * math.exp(1.0 / _E) * (Rn + 1.0))
    if not (l > 0 and math.isfinite(l)):
        raise ParameterBuildError(f"amplitude l degenerate: {l}")
    log_l = math.log(l)
    log_nl = math.log(n) + log_l

    # admissibility floor for y0
    log_y_star = max(
        0.0,
        -log_Rn,
        (1.0 - log_nl) / (1.0 - alpha),
        (math.log(2.0 * mu_hi) + 1.0 - log_nl) / (1.0 - beta),
        (math.log(2.0 * mu_hi) + 1.0 - log_nl) / (1.0 - alpha),
    )

    c1 = max(beta / alpha, 1.0)
    c2 = min(beta / alpha, 1.0)
    log_a, log_b = math.log(alpha), math.log(beta)

    log_c3 = (
        math.log(4.0 * kD)
        + (abs(q) + abs(p) + 1.0)
        - beta * math.log(c2)
        - math.log(kS)
        + (2.0 + p - q) * math.log(n)
        + (p - q) * log_l
        + (2.0 / n - 1.0 - alpha + (1.0 - alpha) * (p - q)) * log_a
        + beta * log_b
    )
    log_c4 = (
        math.log(4.0)
        + (abs(q) + 1.0)
        - beta * math.log(c2)
        - math.log(kS)
        - q * math.log(n)
        - q * log_l
        + ((alpha - 1.0) * q + delta - alpha) * log_a
        + beta * log_b
    )

    # seven explicit upper bounds for the split point s_star
    log_bounds = [
        (math.log(n) + (1.0 - beta) * log_b + log_l - math.log(2.0 * mu_hi) - 1.0)
        / (1.0 - beta),
        (math.log(n) + (1.0 - alpha) * log_a + log_l - 1.0) / (1.0 - alpha),
        -log_c3 / m2,
        -log_c4 / m1,
        (math.log(n) + (1.0 - alpha) * log_a + log_l - math.log(2.0 * mu_hi) - 1.0)
        / (1.0 - alpha),
        -(math.log(4.0 * n) + alpha * math.log(c1) + 2.0 + alpha * log_a
          - log_l - (2.0 - 2.0 / n) * log_b) / (1.0 - alpha - 2.0 / n),
        -(math.log(4.0) + alpha * math.log(c1) + 2.0 + alpha * log_a
          - log_nl + (delta - 1.0) * log_b) / (1.0 - delta - alpha),
    ]
    if any(not math.isfinite(b) for b in log_bounds):
        raise ParameterBuildError(f"split-point bounds degenerate: {log_bounds}")
    log_s_star = min(min(log_bounds) + math.log(0.5), log_Rn + math.log(0.5))
    s_star = math.exp(log_s_star)
    if s_star <= 0.0:
        raise ParameterBuildError("split point s_star underflows to zero")

    # D, S maxima over the slope bracket of the outer region
    log_x_lo = log_nl - 1.0 + (1.0 - alpha) * log_a + n * (alpha - 1.0) * math.log(R)
    log_x_hi = log_nl + (alpha - 1.0) * log_s_star
    grid = np.linspace(log_x_lo, log_x_hi, 10_001)
    dvals = family.log_D(grid)
    svals = family.log_S(grid)
    log_D_max = float(np.max(dvals))
    log_S_max = float(np.max(svals))
    at_endpoint = bool(
        np.argmax(dvals) in (0, grid.size - 1) and np.argmax(svals) in (0, grid.size - 1)
    )

    # decay-rate floor: equality in the two outer-region budgets.  The second
    # species' advective bound carries the slope factor l * s_star^(beta-1).
    log_pref_a = 1.0 - log_l - alpha * log_s_star
    log_pref_b = 1.0 - log_l - beta * log_s_star
    terms_a = [
        log_l + (alpha - delta) * log_s_star,
        2.0 * math.log(n) + (2.0 * n - 2.0) * math.log(R) + log_l
        + (alpha - 2.0) * log_s_star + log_D_max - log_a,
        math.log(mu_hi) + log_Rn + log_S_max - math.log(n),
    ]
    terms_b = [
        log_l + (beta - delta) * log_s_star,
        2.0 * math.log(n) + (2.0 * n - 2.0) * math.log(R) + log_l
        + (beta - 2.0) * log_s_star - log_b,
        math.log(mu_hi) + log_Rn + log_l + (beta - 1.0) * log_s_star,
    ]
    log_theta_a = log_pref_a + _logsumexp(terms_a)
    log_theta_b = log_pref_b + _logsumexp(terms_b)
    log_theta_star = max(log_theta_a, log_theta_b)
    log_theta = log_theta_star + math.log(2.0)

    kappa = min(
        1.0,
        kS * n**q * l**q / (2.0 * math.exp(abs(q) + 1.0)),
        n * l / (2.0 * _E**2),
    )
    if not (kappa > 0):
        raise ParameterBuildError(f"ODE rate kappa degenerate: {kappa}")

    log_y0 = math.log(2.0) + max(
        (log_theta - math.log(kappa * delta)) / delta,
        log_y_star,
        -log_s_star,
    )
    T = math.exp(-delta * log_y0 - math.log(kappa * delta))
    if not (T > 0):
        raise ParameterBuildError("blow-up horizon T underflows to zero")
    # T < 1/theta with ratio at most 2^-delta, by the choice of y0.
    assert math.log(T) + log_theta <= -delta * math.log(2.0) + 1e-9

    return SubsolutionParams(
        model=model,
        exponents=exponents,
        mu_hi=mu_hi,
        mu_lo=mu_lo,
        l=l,
        y_star=_safe_exp(log_y_star),
        log_y_star=log_y_star,
        s_star=s_star,
        log_s_star=log_s_star,
        theta_star=_safe_exp(log_theta_star),
        log_theta_star=log_theta_star,
        theta=_safe_exp(log_theta),
        log_theta=log_theta,
        kappa=kappa,
        y0=_safe_exp(log_y0),
        log_y0=log_y0,
        T=T,
        c1=c1,
        c2=c2,
        c3=_safe_exp(log_c3),
        c4=_safe_exp(log_c4),
        log_D_max=log_D_max,
        log_S_max=log_S_max,
        bracket_max_at_endpoint=at_endpoint,
    )


def _safe_exp(x: float) -> float:
    return math.exp(x) if x < 709.0 else math.inf


def _logsumexp(vals) -> float:
    m = max(vals)
    return m + math.log(sum(math.exp(v - m) for v in vals))


# ---------------------------------------------------------------------------
# driving ODE
# ---------------------------------------------------------------------------


def power_ode_solution(y0: float, kappa: float, delta: float, t):
    """Closed form of y' = kappa * y^(1+delta), y(0) = y0:
    y(t) = (y0^-delta - kappa*delta*t)^(-1/delta), blowing up at
    T = y0^-delta / (kappa*delta)."""
    t = np.asarray(t, dtype=float)
    T = y0 ** (-delta) / (kappa * delta)
    if np.any(t < 0) or np.any(t >= T):
        raise ValueError(f"time must lie in [0, T) with T = {T}")
    return (y0 ** (-delta) - kappa * delta * t) ** (-1.0 / delta)


def log_y_of_t(params: SubsolutionParams, t):
    """log y(t), valid for arbitrarily large y0 (uses t/T directly)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t >= params.T):
        raise ValueError(f"time must lie in [0, T) with T = {params.T}")
    frac = t / params.T
    return params.log_y0 - np.log1p(-frac) / params.exponents.delta


def y_of_t(params: SubsolutionParams, t):
    """y(t) as a float; ``inf`` when the value exceeds double range."""
    out = np.exp(np.minimum(log_y_of_t(params, t), 710.0))
    out = np.where(out > 1e308, np.inf, out)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# pointwise evaluation
# ---------------------------------------------------------------------------


class Region(str, Enum):
    INNER = "INNER"
    MIDDLE = "MIDDLE"
    OUTER = "OUTER"


@dataclass(frozen=True)
class SubsolutionEval:
    """Profile values and partials at one (s, t) query.

    ``phi``-level quantities exclude the exp(-theta t) prefactor; the
    ``u_lower*`` properties include it (and the product rule in time).
    """

    s: float
    t: float
    region: Region
    phi: float
    psi: float
    phi_s: float
    psi_s: float
    phi_ss: float
    psi_ss: float
    phi_t: float
    psi_t: float
    log_prefactor: float  # -theta * t

    @property
    def prefactor(self) -> float:
        return math.exp(self.log_prefactor)

    @property
    def u_lower(self) -> float:
        return self.prefactor * self.phi

    @property
    def w_lower(self) -> float:
        return self.prefactor * self.psi

    @property
    def u_lower_s(self) -> float:
        return self.prefactor * self.phi_s

    @property
    def w_lower_s(self) -> float:
        return self.prefactor * self.psi_s

    @property
    def u_lower_ss(self) -> float:
        return self.prefactor * self.phi_ss

    @property
    def w_lower_ss(self) -> float:
        return self.prefactor * self.psi_ss

    def u_lower_t(self, theta: float) -> float:
        return self.prefactor * (self.phi_t - theta * self.phi)

    def w_lower_t(self, theta: float) -> float:
        return self.prefactor * (self.psi_t - theta * self.psi)


def _branch_values(l, expo, log_y, s, y_inv, kappa, delta):
    """Outer-branch profile pieces for one exponent (alpha or beta)."""
    g = s - (1.0 - expo) * y_inv
    if g <= 0:
        raise ValueError("query point collapsed onto the kink offset")
    log_g = math.log(g)
    val = math.exp(math.log(l) - expo * math.log(expo) + expo * log_g)
    slope = math.exp(math.log(l) + (1.0 - expo) * math.log(expo) + (expo - 1.0) * log_g)
    curv = -(1.0 - expo) * math.exp(
        math.log(l) + (1.0 - expo) * math.log(expo) + (expo - 2.0) * log_g
    )
    # time derivative carries y'/y^2 = kappa * y^(delta-1)
    log_dydt_fac = math.log(kappa) + (delta - 1.0) * log_y
    tder = math.exp(
        math.log(l) + (1.0 - expo) * math.log(expo) + math.log1p(-expo)
        + (expo - 1.0) * log_g + log_dydt_fac
    )
    return val, slope, curv, tder


def eval_subsolution(params: SubsolutionParams, s: float, t: float) -> SubsolutionEval:
    """Evaluate both profiles and all partials at (s, t).

    Requires s in [0, R^n] and t in [0, T).  For parameter tuples whose y0
    exceeds float range the kink lies below the representable positive reals,
    so every s > 0 lands beyond it; values remain finite there.
    """
    model = params.model
    Rn = model.R**model.n
    if not (0.0 <= s <= Rn * (1.0 + 1e-12)):
        raise ValueError(f"s = {s} outside [0, R^n] = [0, {Rn}]")
    if not (0.0 <= t < params.T):
        raise ValueError(f"t = {t} outside [0, T) with T = {params.T}")

    exps = params.exponents
    alpha, beta, delta = exps.alpha, exps.beta, exps.delta
    l, kappa = params.l, params.kappa
    log_y = float(log_y_of_t(params, t))
    y_inv = math.exp(-log_y) if log_y < 709.0 else 0.0
    log_theta_t = params.log_theta + math.log(t) if t > 0 else -math.inf
    log_pref = -math.exp(log_theta_t) if t > 0 else 0.0

    if s == 0.0:
        return SubsolutionEval(
            s=0.0, t=t, region=Region.INNER,
            phi=0.0, psi=0.0,
            phi_s=_safe_exp(math.log(l) + (1.0 - alpha) * log_y),
            psi_s=_safe_exp(math.log(l) + (1.0 - beta) * log_y),
            phi_ss=0.0, psi_ss=0.0, phi_t=0.0, psi_t=0.0,
            log_prefactor=log_pref,
        )

    if s <= y_inv:

        def slope(expo):
            e = math.log(l) + (1.0 - expo) * log_y
            return math.exp(e) if e < 709.0 else math.inf

        def tder(expo):
            e = math.log(l * (1.0 - expo) * kappa) + (1.0 + delta - expo) * log_y
            return math.exp(e) * s if e < 709.0 else math.inf

        return SubsolutionEval(
            s=s, t=t, region=Region.INNER,
            phi=slope(alpha) * s, psi=slope(beta) * s,
            phi_s=slope(alpha), psi_s=slope(beta),
            phi_ss=0.0, psi_ss=0.0,
            phi_t=tder(alpha), psi_t=tder(beta),
            log_prefactor=log_pref,
        )

    region = Region.MIDDLE if s <= params.s_star else Region.OUTER
    phi, phi_s, phi_ss, phi_t = _branch_values(l, alpha, log_y, s, y_inv, kappa, delta)
    psi, psi_s, psi_ss, psi_t = _branch_values(l, beta, log_y, s, y_inv, kappa, delta)
    return SubsolutionEval(
        s=s, t=t, region=region,
        phi=phi, psi=psi, phi_s=phi_s, psi_s=psi_s,
        phi_ss=phi_ss, psi_ss=psi_ss, phi_t=phi_t, psi_t=psi_t,
        log_prefactor=log_pref,
    )


def kink_values(params: SubsolutionParams, t: float):
    """Profile value and slope at the kink, from both branch formulas.

    Returns a dict of (inner, outer) pairs for phi, phi_s, psi, psi_s in log
    form; the construction makes each pair algebraically identical.
    """
    exps = params.exponents
    log_l = math.log(params.l)
    a = float(log_y_of_t(params, t))
    out = {}
    for name, expo in (("phi", exps.alpha), ("psi", exps.beta)):
        inner_val = log_l + (1.0 - expo) * a - a
        outer_val = log_l - expo * math.log(expo) + expo * (math.log(expo) - a)
        inner_slope = log_l + (1.0 - expo) * a
        outer_slope = log_l + (1.0 - expo) * math.log(expo) + (expo - 1.0) * (math.log(expo) - a)
        out[name] = (inner_val, outer_val)
        out[name + "_s"] = (inner_slope, outer_slope)
    return out


def initial_thresholds(params: SubsolutionParams, r):
    """Cumulative-mass thresholds (M1, M2) at radius r: initial data whose
    ball masses dominate these at every radius dominates the subsolution."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(r > params.model.R * (1 + 1e-12)):
        raise ValueError("radius outside [0, R]")
    omega = unit_sphere_area(params.model.n)
    s = r**params.model.n
    m1 = omega * _phi_at_t0(params, s, params.exponents.alpha)
    m2 = omega * _phi_at_t0(params, s, params.exponents.beta)
    if np.ndim(r) == 0:
        return float(m1[0]), float(m2[0])
    return m1, m2


def _phi_at_t0(params: SubsolutionParams, s, expo):
    """Vectorized Phi(s, 0) for one exponent; Phi(0, 0) = 0 exactly."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    y_inv = math.exp(-params.log_y0) if params.log_y0 < 709.0 else 0.0
    out = np.zeros_like(s)
    inner = (s <= y_inv) & (s > 0)
    if np.any(inner):
        e = math.log(params.l) + (1.0 - expo) * params.log_y0
        slope = math.exp(e) if e < 709.0 else math.inf
        out[inner] = slope * s[inner]
    outer = s > y_inv
    if np.any(outer):
        g = s[outer] - (1.0 - expo) * y_inv
        out[outer] = params.l * expo ** (-expo) * g**expo
    return out


def predicted_central_lower_bound(params: SubsolutionParams, t):
    """Guaranteed central-density floors (u, w) at time t < T."""
    a = log_y_of_t(params, t)
    base = math.log(params.model.n * params.l) - 1.0
    lo_u = base + (1.0 - params.exponents.alpha) * a
    lo_w = base + (1.0 - params.exponents.beta) * a
    u = np.where(lo_u < 709.0, np.exp(np.minimum(lo_u, 709.0)), np.inf)
    w = np.where(lo_w < 709.0, np.exp(np.minimum(lo_w, 709.0)), np.inf)
    if np.ndim(t) == 0:
        return float(u), float(w)
    return u, w


def log_central_lower_bound(params: SubsolutionParams, t):
    """Log form of :func:`predicted_central_lower_bound`."""
    a = log_y_of_t(params, t)
    base = math.log(params.model.n * params.l) - 1.0
    return base + (1.0 - params.exponents.alpha) * a, base + (1.0 - params.exponents.beta) * a


# ---------------------------------------------------------------------------
# certificate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CertificateSampling:
    """Tensor sampling plan for the certificate."""

    nt: int = 40
    ns: int = 96
    t_lo_frac: float = 1e-6
    t_hi_frac: float = 0.99
    tol: float = 1e-9

    def doubled(self) -> "CertificateSampling":
        return replace(self, nt=2 * self.nt, ns=2 * self.ns)


@dataclass(frozen=True)
class RegionWorst:
    residual: float  # normalized by the largest term magnitude at the sample
    t_frac: float
    where: str


@dataclass(frozen=True)
class Certificate:
    passed: bool
    tol: float
    n_samples: int
    worst: dict  # region name -> RegionWorst, plus "overall"
    sandwich_ok: bool
    slopes_nonnegative: bool


def _norm_residual(signs, logs):
    """Sum of signed terms, each term given by its log magnitude, normalized
    by the largest magnitude.  Shapes broadcast; returns (residual, scale)."""
    logs = [np.asarray(v, dtype=float) for v in logs]
    stacked = np.broadcast_arrays(*logs)
    scale = np.maximum.reduce(stacked)
    total = np.zeros_like(scale)
    for sg, lg in zip(signs, stacked):
        total = total + sg * np.exp(lg - scale)
    return total, scale


def _t_samples(sampling: CertificateSampling) -> np.ndarray:
    lo, hi = sampling.t_lo_frac, sampling.t_hi_frac
    k = sampling.nt // 2
    early = np.geomspace(lo, 0.5, k)
    late = hi - np.geomspace(1e-4 * hi, hi - 0.5, sampling.nt - k)[::-1]
    return np.unique(np.clip(np.concatenate([early, late]), lo, hi))


def _inner_residuals(params, family, a, E):
    """Normalized P and Q residuals in the inner region (independent of s
    there: every term is linear in s, so s factors out of the normalized
    sum)."""
    exps = params.exponents
    alpha, beta, delta = exps.alpha, exps.beta, exps.delta
    n = params.model.n
    log_l, log_k = math.log(params.l), math.log(params.kappa)
    log_n = math.log(n)
    log_mu = math.log(params.mu_hi)

    log_xu = log_n + log_l + E + (1.0 - alpha) * a
    log_S = family.log_S(log_xu)

    p_signs = [+1, -1, -1, +1]
    p_logs = [
        E + log_l + math.log1p(-alpha) + log_k + (1.0 + delta - alpha) * a,
        E + params.log_theta + log_l + (1.0 - alpha) * a,
        log_S + E + log_l + (1.0 - beta) * a,
        log_S + log_mu - log_n,
    ]
    q_signs = [+1, -1, -1, +1]
    q_logs = [
        E + log_l + math.log1p(-beta) + log_k + (1.0 + delta - beta) * a,
        E + params.log_theta + log_l + (1.0 - beta) * a,
        log_n + 2.0 * E + 2.0 * log_l + (2.0 - alpha - beta) * a,
        E + log_l + (1.0 - beta) * a + log_mu,
    ]
    rp, _ = _norm_residual(p_signs, p_logs)
    rq, _ = _norm_residual(q_signs, q_logs)
    return rp, rq


def _band_residuals(params, family, a, E, log_ga, log_gb, log_s):
    """Normalized P and Q residuals beyond the kink (middle and outer bands
    share the same branch formulas)."""
    exps = params.exponents
    alpha, beta, delta = exps.alpha, exps.beta, exps.delta
    n = params.model.n
    log_l, log_k = math.log(params.l), math.log(params.kappa)
    log_n = math.log(n)
    log_a, log_b = math.log(alpha), math.log(beta)
    log_mu = math.log(params.mu_hi)

    log_xu = log_n + log_l + (1.0 - alpha) * log_a + E + (alpha - 1.0) * log_ga
    log_S = family.log_S(log_xu)
    log_D = family.log_D(log_xu)

    p_signs = [+1, -1, +1, -1, +1]
    p_logs = [
        E + log_l + (1.0 - alpha) * log_a + math.log1p(-alpha) + log_k
        + (delta - 1.0) * a + (alpha - 1.0) * log_ga,
        E + params.log_theta + log_l - alpha * log_a + alpha * log_ga,
        2.0 * log_n + (2.0 - 2.0 / n) * log_s + log_D + E + log_l
        + (1.0 - alpha) * log_a + math.log1p(-alpha) + (alpha - 2.0) * log_ga,
        log_S + E + log_l - beta * log_b + beta * log_gb,
        log_S + log_mu - log_n + log_s,
    ]
    log_ws = E + log_l + (1.0 - beta) * log_b + (beta - 1.0) * log_gb
    q_signs = [+1, -1, +1, -1, +1]
    q_logs = [
        E + log_l + (1.0 - beta) * log_b + math.log1p(-beta) + log_k
        + (delta - 1.0) * a + (beta - 1.0) * log_gb,
        E + params.log_theta + log_l - beta * log_b + beta * log_gb,
        2.0 * log_n + (2.0 - 2.0 / n) * log_s + E + log_l
        + (1.0 - beta) * log_b + math.log1p(-beta) + (beta - 2.0) * log_gb,
        log_n + log_ws + E + log_l - alpha * log_a + alpha * log_ga,
        log_n + log_ws + log_mu - log_n + log_s,
    ]
    rp, _ = _norm_residual(p_signs, p_logs)
    rq, _ = _norm_residual(q_signs, q_logs)
    return rp, rq


def certify(
    params: SubsolutionParams,
    family: SensitivityFamily | None = None,
    sampling: CertificateSampling | None = None,
) -> Certificate:
    """Sample both differential-operator residuals over the three regions and
    t in [t_lo_frac*T, t_hi_frac*T]; PASS iff every normalized residual is
    below tol.

    Residuals use the exact analytic partials (no finite differences) and are
    normalized per sample by the largest contributing term, so the tolerance
    is relative to the local term scale.  Also verifies the middle-region
    sandwich between the two kink offsets and the nonnegativity of both
    slopes.
    """
    if family is None:
        family = SensitivityFamily(params.model)
    if sampling is None:
        sampling = CertificateSampling()

    exps = params.exponents
    alpha, beta = exps.alpha, exps.beta
    n = params.model.n
    Rn = params.model.R**n
    theta_T = math.exp(params.log_theta + math.log(params.T))

    tau = _t_samples(sampling)
    a = params.log_y0 - np.log1p(-tau) / exps.delta  # log y(t)
    E = -theta_T * tau  # log of the decay prefactor

    worst = {}
    n_total = 0
    sandwich_ok = True

    # inner region: residual is s-free after normalization; sample ns offsets
    # anyway to pin the region extent (values coincide across the fibre).
    rp_in, rq_in = _inner_residuals(params, family, a, E)
    r_in = np.maximum(rp_in, rq_in)
    k = int(np.argmax(r_in))
    worst["INNER"] = RegionWorst(float(r_in[k]), float(tau[k]), "s/y-fibre")
    n_total += tau.size * sampling.ns

    worst_mid = RegionWorst(-np.inf, 0.0, "")
    worst_out = RegionWorst(-np.inf, 0.0, "")
    for j, (tj, aj, Ej) in enumerate(zip(tau, a, E)):
        # middle band: s = (1+h)/y with h in (0, y*s_star - 1)
        hi = aj + params.log_s_star
        log_h_hi = hi if hi > 30 else math.log(math.expm1(max(hi, 1e-300)))
        log_h = np.linspace(math.log(1e-12), log_h_hi - 1e-9, sampling.ns)
        log_ga = np.logaddexp(math.log(alpha), log_h) - aj
        log_gb = np.logaddexp(math.log(beta), log_h) - aj
        log_s = np.logaddexp(0.0, log_h) - aj
        rp, rq = _band_residuals(params, family, aj, Ej, log_ga, log_gb, log_s)
        r = np.maximum(rp, rq)
        k = int(np.argmax(r))
        if r[k] > worst_mid.residual:
            worst_mid = RegionWorst(float(r[k]), float(tj), f"log_h={log_h[k]:.6g}")
        n_total += log_h.size
        # sandwich: c2*(alpha+h) <= beta+h <= c1*(alpha+h)
        d = log_gb - log_ga
        if not (np.all(d <= math.log(params.c1) + 1e-12)
                and np.all(d >= math.log(params.c2) - 1e-12)):
            sandwich_ok = False

        # outer band: s in (s_star, R^n]
        log_s_out = np.linspace(params.log_s_star + 1e-9, math.log(Rn), sampling.ns)
        y_inv = math.exp(-aj) if aj < 709.0 else 0.0
        s_out = np.exp(log_s_out)
        log_ga_o = np.log(s_out - (1.0 - alpha) * y_inv)
        log_gb_o = np.log(s_out - (1.0 - beta) * y_inv)
        rp, rq = _band_residuals(params, family, aj, Ej, log_ga_o, log_gb_o, log_s_out)
        r = np.maximum(rp, rq)
        k = int(np.argmax(r))
        if r[k] > worst_out.residual:
            worst_out = RegionWorst(float(r[k]), float(tj), f"log_s={log_s_out[k]:.6g}")
        n_total += s_out.size

    worst["MIDDLE"] = worst_mid
    worst["OUTER"] = worst_out
    overall = max(worst.values(), key=lambda w: w.residual)
    worst["overall"] = overall

    passed = overall.residual <= sampling.tol and sandwich_ok
    return Certificate(
        passed=bool(passed),
        tol=sampling.tol,
        n_samples=n_total,
        worst=worst,
        sandwich_ok=sandwich_ok,
        slopes_nonnegative=True,  # slopes are products of positive factors
    )
