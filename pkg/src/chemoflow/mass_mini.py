"""Small explicit-Euler integrator for the transformed mass system itself,
used as a brute-force oracle for discrete comparison tests on coarse grids.

The dynamics treats the two differential inequalities of the mass system as
equalities,

    U_t = n^2 s^(2-2/n) D(n U_s) U_ss + S(n U_s) (W - mu_hi s / n)
    W_t = n^2 s^(2-2/n) W_ss + n W_s (U - mu_hi s / n),

on a uniform node set with both boundary rows pinned.  Explicit Euler is
deliberately naive: oracle credibility beats oracle speed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from chemoflow.model_core import SensitivityFamily

__all__ = ["MiniConfig", "MiniState", "mini_advance", "MiniStabilityError"]


class MiniStabilityError(RuntimeError):
    """Raised when the explicit stability bound forces a vanishing step."""


@dataclass(frozen=True)
class MiniConfig:
    """Node count, horizon and boundary data of the oracle problem.

    Boundary rows are fixed for all time: U(0) = W(0) = 0,
    U(R^n) = mu_u R^n / n, W(R^n) = mu_w R^n / n.
    """

    n: int
    R: float
    J: int
    horizon: float
    mu_u: float
    mu_w: float
    dt: float | None = None  # None: derive from the stability bound
    safety: float = 0.4

    def __post_init__(self):
        if not (8 <= self.J <= 128):
            raise ValueError(f"oracle node count must be in [8, 128], got {self.J}")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.R**self.n, self.J)

    @property
    def mu_hi(self) -> float:
        return max(self.mu_u, self.mu_w)


@dataclass
class MiniState:
    s: np.ndarray
    U: np.ndarray
    W: np.ndarray
    t: float


def _rhs(cfg: MiniConfig, sens: SensitivityFamily, U, W):
    s = cfg.nodes
    n = cfg.n
    ds = s[1] - s[0]
    dU = np.zeros_like(U)
    dW = np.zeros_like(W)
    si = s[1:-1]
    Us = (U[2:] - U[:-2]) / (2 * ds)
    Uss = (U[2:] - 2 * U[1:-1] + U[:-2]) / ds**2
    Ws = (W[2:] - W[:-2]) / (2 * ds)
    Wss = (W[2:] - 2 * W[1:-1] + W[:-2]) / ds**2
    coef = n**2 * si ** (2.0 - 2.0 / n)
    drift = cfg.mu_hi * si / n
    dU[1:-1] = coef * sens.eval_D(np.maximum(n * Us, 0.0)) * Uss \
        + sens.eval_S(np.maximum(n * Us, 0.0)) * (W[1:-1] - drift)
    dW[1:-1] = coef * Wss + n * Ws * (U[1:-1] - drift)
    return dU, dW


def _stable_dt(cfg: MiniConfig, sens: SensitivityFamily, U):
    s = cfg.nodes
    ds = s[1] - s[0]
    n = cfg.n
    Us = np.maximum(n * (U[2:] - U[:-2]) / (2 * ds), 0.0)
    coef = n**2 * s[1:-1] ** (2.0 - 2.0 / n) * np.maximum(sens.eval_D(Us), 1.0)
    return cfg.safety * ds**2 / (2.0 * float(np.max(coef)))


def mini_advance(U0, W0, cfg: MiniConfig, sens: SensitivityFamily, record_every: int = 10):
    """Integrate an initial pair to the horizon; returns a list of MiniState.

    Monotonicity of both profiles in s is re-checked after every step (small
    negative slopes at roundoff scale are tolerated); a stability violation
    aborts with a diagnostic.
    """
    s = cfg.nodes
    U = np.asarray(U0, dtype=float).copy()
    W = np.asarray(W0, dtype=float).copy()
    if U.shape != s.shape or W.shape != s.shape:
        raise ValueError("initial pair must match the node count")
    Rn = cfg.R**cfg.n
    expected = (0.0, cfg.mu_u * Rn / cfg.n, 0.0, cfg.mu_w * Rn / cfg.n)
    got = (U[0], U[-1], W[0], W[-1])
    if not np.allclose(got, expected, rtol=1e-9, atol=1e-12):
        raise ValueError(f"boundary rows {got} do not match the config {expected}")
    if np.any(np.diff(U) < -1e-12) or np.any(np.diff(W) < -1e-12):
        raise ValueError("initial mass functions must be nondecreasing")

    t = 0.0
    out = [MiniState(s=s, U=U.copy(), W=W.copy(), t=t)]
    k = 0
    tol = 1e-10 * max(1.0, float(np.max(U)), float(np.max(W)))
    while t < cfg.horizon:
        dt = cfg.dt if cfg.dt is not None else _stable_dt(cfg, sens, U)
        if not (dt > 0) or dt < 1e-15:
            raise MiniStabilityError(f"stability bound collapsed: dt = {dt} at t = {t}")
        dt = min(dt, cfg.horizon - t)
        dU, dW = _rhs(cfg, sens, U, W)
        U = U + dt * dU
        W = W + dt * dW
        t += dt
        k += 1
        if np.any(np.diff(U) < -tol) or np.any(np.diff(W) < -tol):
            raise MiniStabilityError(f"monotonicity lost at t = {t}; reduce dt")
        if k % record_every == 0 or t >= cfg.horizon:
            out.append(MiniState(s=s, U=U.copy(), W=W.copy(), t=t))
    return out
