import math
from types import SimpleNamespace

import numpy as np
import pytest

from chemoflow.diagnostics import G_eval, lyapunov_sample, track_norms
from chemoflow.dynamics import DiagnosticsSpec, RadialState, StepControl, advance, gaussian_profile
from chemoflow.elliptic import RadialGrid
from chemoflow.model_core import ModelParams, SensitivityFamily

CANON = ModelParams(n=3, R=1.0, p=0.0, q=1.0)


def unit_ratio_family():
    # duck-typed stand-in with D/S identically one
    return SimpleNamespace(eval_D=lambda s: np.ones_like(np.asarray(s, dtype=float)),
                           eval_S=lambda s: np.ones_like(np.asarray(s, dtype=float)))


class TestG:
    def test_unit_ratio_quadratic(self):
        fam = unit_ratio_family()
        s = np.array([0.2, 1.0, 2.0, 5.0])
        assert np.allclose(G_eval(s, 1.0, fam), (s - 1.0) ** 2 / 2.0, atol=1e-13)

    def test_anchor_values(self):
        sens = SensitivityFamily(CANON)
        assert G_eval(1.0, 1.0, sens) == pytest.approx(0.0, abs=1e-15)
        # near the anchor G is quadratic with curvature D(s1)/S(s1)
        h = 1e-4
        curv = sens.eval_D(1.0) / sens.eval_S(1.0)
        assert G_eval(1.0 + h, 1.0, sens) == pytest.approx(curv * h**2 / 2, rel=1e-3)
        assert G_eval(1.0 - h, 1.0, sens) == pytest.approx(curv * h**2 / 2, rel=1e-3)

    def test_against_riemann_oracle(self):
        # brute-force nested midpoint double integral, 2000 x 2000 panels
        sens = SensitivityFamily(CANON)
        s1, s = 1.0, 2.0
        m = 2000
        sigma = np.linspace(s1, s, m + 1)
        sig_mid = 0.5 * (sigma[1:] + sigma[:-1])
        dsig = (s - s1) / m
        total = 0.0
        for sm in sig_mid:
            tau = np.linspace(s1, sm, m + 1)
            tau_mid = 0.5 * (tau[1:] + tau[:-1])
            ratio = sens.eval_D(tau_mid) / sens.eval_S(tau_mid)
            total += np.sum(ratio) * (sm - s1) / m * dsig
        assert G_eval(s, s1, sens) == pytest.approx(total, rel=1e-6)

    def test_domain_errors(self):
        sens = SensitivityFamily(CANON)
        with pytest.raises(ValueError):
            G_eval(0.0, 1.0, sens)
        with pytest.raises(ValueError):
            G_eval(1.0, -1.0, sens)


class TestLyapunov:
    def test_homogeneous_state(self):
        sens = SensitivityFamily(CANON)
        grid = RadialGrid(n=3, R=1.0, N=64)
        c_u = 2.0
        st = RadialState.from_data(grid, np.full(64, c_u), np.full(64, 1.0))
        ls = lyapunov_sample(st, sens, s1=1.0)
        vol = grid.domain_volume
        assert ls.F == pytest.approx(vol * G_eval(c_u, 1.0, sens), rel=1e-10)
        assert ls.part_wlogw == pytest.approx(0.0, abs=1e-12)
        assert ls.part_cross == pytest.approx(0.0, abs=1e-14)
        assert ls.D_diss == pytest.approx(0.0, abs=1e-12)

    def test_dissipation_nonnegative(self):
        sens = SensitivityFamily(CANON)
        grid = RadialGrid(n=3, R=1.0, N=64)
        rng = np.random.default_rng(5)
        for _ in range(10):
            st = RadialState.from_data(grid, rng.uniform(0.01, 5, 64), rng.uniform(0.01, 5, 64))
            assert lyapunov_sample(st, sens).D_diss >= 0.0

    def test_identity_residual_shrinks_under_refinement(self):
        # dF/dt ~ -D along a smooth run, closer under joint space/time refinement
        model = ModelParams(n=3, R=1.0, p=1.0, q=0.0)
        sens = SensitivityFamily(model)

        def misfit(N, dt):
            grid = RadialGrid(n=3, R=1.0, N=N)
            st = RadialState.from_data(grid, gaussian_profile(grid, 3, 0.25, 0.5),
                                       gaussian_profile(grid, 3, 0.25, 0.5))
            samples = []
            advance(st, sens, StepControl(dt_max=dt), horizon=0.05,
                    diagnostics=DiagnosticsSpec(sample_every=25),
                    on_sample=lambda s: samples.append(lyapunov_sample(s, sens)))
            errs = []
            for a, b in zip(samples[:-1], samples[1:]):
                dfdt = (b.F - a.F) / (b.t - a.t)
                d_mid = 0.5 * (a.D_diss + b.D_diss)
                errs.append(abs(dfdt + d_mid) / max(d_mid, 1e-12))
            return np.mean(errs)

        assert misfit(128, 1e-4) < misfit(32, 4e-4)


class TestNorms:
    def test_constant_field_value(self):
        grid = RadialGrid(n=3, R=1.0, N=64)
        st = RadialState.from_data(grid, np.full(64, 2.0), np.full(64, 1.0))
        k, nu, nw = track_norms(st, [2.0])[0]
        assert nu == pytest.approx(9.0 * 4.0 * math.pi / 3.0, rel=1e-12)
        assert nw == pytest.approx(4.0 * math.pi / 3.0, rel=1e-12)

    def test_monotone_in_data(self):
        grid = RadialGrid(n=3, R=1.0, N=64)
        rng = np.random.default_rng(7)
        u = rng.uniform(0, 3, 64)
        st_lo = RadialState.from_data(grid, u, u)
        st_hi = RadialState.from_data(grid, u + 0.5, u)
        assert track_norms(st_hi, [2.5])[0][1] >= track_norms(st_lo, [2.5])[0][1]

    def test_rejects_low_exponent(self):
        grid = RadialGrid(n=3, R=1.0, N=32)
        st = RadialState.from_data(grid, np.full(32, 1.0), np.full(32, 1.0))
        with pytest.raises(ValueError):
            track_norms(st, [1.0])
