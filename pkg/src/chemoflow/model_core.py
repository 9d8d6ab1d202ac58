"""Model parameterization, the canonical diffusivity/sensitivity family, and
the (p, q) regime classifier.

The model is fixed to the one-parameter-family pair

    D(s) = kD * (1 + s)^p        (nonlinear diffusivity)
    S(s) = kS * s * (1 + s)^(q-1)  (chemotactic sensitivity)

which is positive, smooth on [0, inf), vanishes at s = 0 on the S side, and
has power-law behavior s^p / s^q for large s.  A single family keeps every
regime of the classifier reachable with one binary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "ModelParams",
    "SensitivityFamily",
    "Regime",
    "RegimeVerdict",
    "classify_regime",
    "unit_sphere_area",
]


def unit_sphere_area(n: int) -> float:
    """Surface area of the unit sphere in R^n (4*pi for n = 3)."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


@dataclass(frozen=True)
class ModelParams:
    """Dimension, domain radius, exponents and the four structural constants.

    ``kD``/``kS`` calibrate the blow-up-side power bounds, ``KD``/``KS`` the
    boundedness-side ones; for the canonical family both sides hold with the
    effective constants exposed below.  ``kS = 0`` is tolerated so pure
    diffusion runs can be configured, but the blow-up machinery rejects it.
    """

    n: int
    R: float
    p: float
    q: float
    kD: float = 1.0
    kS: float = 1.0
    KD: float | None = None
    KS: float | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"dimension n must be >= 1, got {self.n}")
        if not (self.R > 0 and math.isfinite(self.R)):
            raise ValueError(f"radius R must be positive and finite, got {self.R}")
        if not (self.kD > 0):
            raise ValueError(f"kD must be > 0, got {self.kD}")
        if self.kS < 0:
            raise ValueError(f"kS must be >= 0, got {self.kS}")
        if self.KD is None:
            object.__setattr__(self, "KD", self.kD)
        if self.KS is None:
            object.__setattr__(self, "KS", self.kS)
        if not (self.KD > 0):
            raise ValueError(f"KD must be > 0, got {self.KD}")
        if self.KS < 0:
            raise ValueError(f"KS must be >= 0, got {self.KS}")

    @property
    def omega_n(self) -> float:
        return unit_sphere_area(self.n)

    @property
    def domain_volume(self) -> float:
        return self.omega_n * self.R**self.n / self.n


class SensitivityFamily:
    """Evaluates D(s) = kD(1+s)^p and S(s) = kS*s*(1+s)^(q-1).

    Provides plain and log-argument evaluation; the latter is needed by the
    certificate machinery where arguments reach exp(several hundred).
    """

    def __init__(self, params: ModelParams):
        self.params = params

    # -- plain evaluation -------------------------------------------------

    def _check_domain(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(~np.isfinite(s)) or np.any(s < 0):
            raise ValueError("density argument must be finite and >= 0")
        return s

    def eval_D(self, s):
        """Diffusivity at density s >= 0; D(0) = kD exactly."""
        s = self._check_domain(s)
        p = self.params
        return p.kD * (1.0 + s) ** p.p

    def eval_S(self, s):
        """Sensitivity at density s >= 0; S(0) = 0 exactly."""
        s = self._check_domain(s)
        p = self.params
        return p.kS * s * (1.0 + s) ** (p.q - 1.0)

    # -- log-argument evaluation ------------------------------------------

    def log_D(self, log_s):
        """log D(exp(log_s)), stable for arbitrarily large log_s."""
        p = self.params
        return math.log(p.kD) + p.p * np.logaddexp(0.0, log_s)

    def log_S(self, log_s):
        """log S(exp(log_s)); requires kS > 0."""
        p = self.params
        if p.kS <= 0:
            raise ValueError("log_S undefined for kS = 0")
        return math.log(p.kS) + log_s + (p.q - 1.0) * np.logaddexp(0.0, log_s)

    # -- effective power-bound constants -----------------------------------

    @property
    def kD_power_upper(self) -> float:
        """Constant c with D(s) <= c * s^p for all s >= 1."""
        p = self.params
        return p.kD * 2.0 ** abs(p.p)

    @property
    def kS_power_lower(self) -> float:
        """Constant c with S(s) >= c * s^q for all s >= 1."""
        p = self.params
        return p.kS / 2.0 ** abs(p.q - 1.0)


class Regime(str, Enum):
    GB = "GB"
    GE = "GE"
    FTBU = "FTBU"
    UNCLASSIFIED = "UNCLASSIFIED"


@dataclass(frozen=True)
class RegimeVerdict:
    """Classification tag plus the two signed distances to the critical lines.

    ``margin_gb`` = (2 - n/2) - (q - p): positive strictly inside the
    globally-bounded region.  ``margin_ge`` = (1 - n/2) - q: positive strictly
    inside the global-existence region.
    """

    tag: Regime
    margin_gb: float
    margin_ge: float


def classify_regime(n: int, p: float, q: float) -> RegimeVerdict:
    """Classify (p, q) against the two critical lines q-p = 2-n/2 and q = 1-n/2.

    GB (all solutions globally bounded) wins whenever its hypothesis holds,
    being the strongest claim; GE next; FTBU requires strict inequalities on
    both lines.  Points on either line, and the strip where q-p > 2-n/2 but
    q <= 1-n/2, are UNCLASSIFIED rather than guessed.
    """
    if n < 3:
        raise ValueError(f"regime classification requires n >= 3, got n = {n}")
    margin_gb = (2.0 - n / 2.0) - (q - p)
    margin_ge = (1.0 - n / 2.0) - q
    if margin_gb > 0:
        tag = Regime.GB
    elif margin_ge > 0:
        tag = Regime.GE
    elif margin_gb < 0 and margin_ge < 0:
        tag = Regime.FTBU
    else:
        tag = Regime.UNCLASSIFIED
    return RegimeVerdict(tag=tag, margin_gb=margin_gb, margin_ge=margin_ge)
