"""Numerical laboratory for a quasilinear two-species chemotaxis system.

Two cell populations each secrete the chemical sensed by the other, with
instantaneous (elliptic) signal equilibration on a ball.  The package
simulates the radially symmetric dynamics, constructs explicit blow-up
subsolutions in mass-function form together with a sampling certificate,
monitors the Lyapunov functional and Lp norms behind the boundedness
results, and sweeps out the empirical (p, q) phase diagram.
"""

from chemoflow.model_core import ModelParams, RegimeVerdict, SensitivityFamily, classify_regime

__version__ = "0.1.0"

__all__ = [
    "ModelParams",
    "SensitivityFamily",
    "RegimeVerdict",
    "classify_regime",
    "__version__",
]
