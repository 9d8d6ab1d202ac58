"""Mass-accumulation transform and the two differential operators of the
transformed system, plus the discrete ordering check behind the comparison
argument.

With s = r^n, the cumulative mass functions

    U(s, t) = integral_0^(s^(1/n)) r^(n-1) u(r, t) dr     (same for W)

turn the radial system into a pair of scalar degenerate parabolic problems.
The operators evaluated here are

    P[U, W] = U_t - n^2 s^(2-2/n) D(n U_s) U_ss - S(n U_s) (W - mu_hi s / n)
    Q[U, W] = W_t - n^2 s^(2-2/n) W_ss - n W_s (U - mu_hi s / n)

with mu_hi the larger of the two initial means.  True solutions make both
nonnegative; subsolutions make both nonpositive, and ordered boundary and
initial data then stay ordered.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from chemoflow.elliptic import RadialGrid
from chemoflow.model_core import SensitivityFamily

__all__ = [
    "MassGrid",
    "MassState",
    "to_mass",
    "mass_from_cells",
    "eval_P",
    "eval_Q",
    "check_ordered",
    "OrderingReport",
]


@dataclass(frozen=True)
class MassGrid:
    """Graded node set on [0, R^n], geometrically clustered toward 0 where the
    subsolution kink and all concentration action live."""

    n: int
    R: float
    J: int  # number of nodes, including both endpoints
    ratio: float = 1.05

    def __post_init__(self):
        if self.J < 8:
            raise ValueError(f"need at least 8 nodes, got J = {self.J}")
        if self.ratio <= 1.0:
            raise ValueError("grading ratio must exceed 1")

    @property
    def nodes(self) -> np.ndarray:
        m = self.J - 1
        steps = self.ratio ** np.arange(m)
        s = np.concatenate(([0.0], np.cumsum(steps)))
        s *= self.R**self.n / s[-1]
        s[-1] = self.R**self.n
        return s


@dataclass
class MassState:
    """Cumulative mass pair on the node set at one time."""

    grid: MassGrid
    U: np.ndarray
    W: np.ndarray
    t: float
    mu_hi: float
    mu_lo: float

    def __post_init__(self):
        self.U = np.asarray(self.U, dtype=float)
        self.W = np.asarray(self.W, dtype=float)
        J = self.grid.J
        if self.U.shape != (J,) or self.W.shape != (J,):
            raise ValueError("mass arrays must match the node count")


def mass_from_cells(grid: RadialGrid, values: np.ndarray, s_query: np.ndarray) -> np.ndarray:
    """Cumulative integral of r^(n-1) * field up to radius s^(1/n), exact for
    the piecewise-constant cell representation.

    Within cell i the integral grows linearly in s with slope values[i] / n,
    so the result is the piecewise-linear interpolant of the exact face
    cumulative sums; the endpoint value equals mean * R^n / n identically.
    """
    s_faces = grid.faces**grid.n
    cum = np.concatenate(([0.0], np.cumsum(values * grid.weights)))
    return np.interp(s_query, s_faces, cum)


def to_mass(state, grid: MassGrid) -> MassState:
    """Transform a radial simulator state into mass-function form on ``grid``."""
    if grid.n != state.grid.n or grid.R != state.grid.R:
        raise ValueError("mass grid dimension/radius must match the radial grid")
    s = grid.nodes
    U = mass_from_cells(state.grid, state.u.values, s)
    W = mass_from_cells(state.grid, state.w.values, s)
    return MassState(
        grid=grid, U=U, W=W, t=state.t,
        mu_hi=max(state.mu_u, state.mu_w), mu_lo=min(state.mu_u, state.mu_w),
    )


def _derivatives(s: np.ndarray, f: np.ndarray):
    """First and second derivatives at interior nodes of a nonuniform grid."""
    h_minus = s[1:-1] - s[:-2]
    h_plus = s[2:] - s[1:-1]
    f0, f1, f2 = f[:-2], f[1:-1], f[2:]
    d1 = (f2 - f0) / (h_minus + h_plus)
    d2 = 2.0 * (h_minus * f2 - (h_minus + h_plus) * f1 + h_plus * f0) / (
        h_minus * h_plus * (h_minus + h_plus)
    )
    return d1, d2


def _interior_mask(s: np.ndarray, kink_s: float | None):
    mask = np.ones(s.size - 2, dtype=bool)
    if kink_s is not None and 0.0 < kink_s < s[-1]:
        idx = np.searchsorted(s, kink_s)
        for j in (idx - 2, idx - 1, idx):
            if 0 <= j < mask.size:
                mask[j] = False
    return mask


def eval_P(
    ms: MassState,
    dUdt: np.ndarray,
    sens: SensitivityFamily,
    kink_s: float | None = None,
):
    """First-operator residual at interior nodes; NaN where skipped.

    ``dUdt`` supplies the time derivative per node (analytic for profiles,
    finite-difference for simulated snapshots).  Nodes whose second
    difference would straddle ``kink_s`` are skipped: the profiles are only
    W^2,inf there.
    """
    s = ms.grid.nodes
    n = ms.grid.n
    d1, d2 = _derivatives(s, ms.U)
    si = s[1:-1]
    slope = np.maximum(n * d1, 0.0)
    res = (
        np.asarray(dUdt)[1:-1]
        - n**2 * si ** (2.0 - 2.0 / n) * sens.eval_D(slope) * d2
        - sens.eval_S(slope) * (ms.W[1:-1] - ms.mu_hi * si / n)
    )
    res[~_interior_mask(s, kink_s)] = np.nan
    return res


def eval_Q(
    ms: MassState,
    dWdt: np.ndarray,
    kink_s: float | None = None,
):
    """Second-operator residual at interior nodes; NaN where skipped."""
    s = ms.grid.nodes
    n = ms.grid.n
    d1, d2 = _derivatives(s, ms.W)
    si = s[1:-1]
    res = (
        np.asarray(dWdt)[1:-1]
        - n**2 * si ** (2.0 - 2.0 / n) * d2
        - n * d1 * (ms.U[1:-1] - ms.mu_hi * si / n)
    )
    res[~_interior_mask(s, kink_s)] = np.nan
    return res


@dataclass(frozen=True)
class OrderingReport:
    margin_U: float  # min over nodes of upper.U - lower.U
    margin_W: float
    tol: float
    passed: bool


def check_ordered(lower: MassState, upper: MassState, tol: float = 0.0) -> OrderingReport:
    """Nodewise domination check: PASS iff both margins are >= -tol."""
    if lower.grid != upper.grid:
        raise ValueError("ordering check requires a shared grid")
    if lower.t != upper.t:
        raise ValueError(f"ordering check requires matching times, got {lower.t} vs {upper.t}")
    mU = float(np.min(upper.U - lower.U))
    mW = float(np.min(upper.W - lower.W))
    return OrderingReport(margin_U=mU, margin_W=mW, tol=tol, passed=(mU >= -tol and mW >= -tol))
