import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from chemoflow.elliptic import RadialField, RadialGrid, mean_value, solve_signal, solve_signal_full


def manufactured_v(r):
    # closed-form zero-mean solution for source f(r) = r^2 on the unit ball, n = 3
    return r**2 / 10 - r**4 / 20 - 27.0 / 700.0


class TestGrid:
    def test_weights_telescope_exactly(self):
        g = RadialGrid(n=3, R=1.7, N=77)
        assert np.sum(g.weights) == pytest.approx(1.7**3 / 3, rel=1e-15)

    def test_faces(self):
        g = RadialGrid(n=4, R=2.0, N=16)
        assert g.faces[0] == 0.0
        assert g.faces[-1] == 2.0
        assert np.all(np.diff(g.faces) > 0)


class TestMean:
    def test_constant_field(self):
        g = RadialGrid(n=3, R=1.0, N=64)
        assert mean_value(RadialField(g, np.full(64, 2.5))) == pytest.approx(2.5, rel=1e-14)

    def test_quadratic_exact_with_cell_averages(self):
        # cell averages of r^2 make the volume-weighted mean exactly 3/5
        g = RadialGrid(n=3, R=1.0, N=96)
        f = g.faces
        avg = (f[1:] ** 5 - f[:-1] ** 5) / (5.0 * g.weights)
        assert mean_value(RadialField(g, avg)) == pytest.approx(0.6, rel=1e-14)

    def test_quadratic_from_center_samples(self):
        g = RadialGrid(n=3, R=1.0, N=512)
        assert mean_value(RadialField(g, g.centers**2)) == pytest.approx(0.6, abs=5e-6)

    def test_single_cell_perturbation_shifts_mean_linearly(self):
        g = RadialGrid(n=3, R=1.0, N=64)
        base = np.random.default_rng(0).uniform(0, 1, 64)
        m0 = mean_value(RadialField(g, base))
        eps = 0.37
        i = 17
        bumped = base.copy()
        bumped[i] += eps * np.sum(g.weights) / g.weights[i]
        assert mean_value(RadialField(g, bumped)) == pytest.approx(m0 + eps, rel=1e-12)


class TestSolve:
    def test_constant_source_gives_zero(self):
        g = RadialGrid(n=3, R=1.0, N=64)
        v = solve_signal(RadialField(g, np.full(64, 3.3)))
        assert np.max(np.abs(v.values)) < 1e-14

    def test_manufactured_solution_and_convergence(self):
        errs = []
        for N in (128, 256, 512):
            g = RadialGrid(n=3, R=1.0, N=N)
            sol = solve_signal_full(RadialField(g, g.centers**2))
            errs.append(np.max(np.abs(sol.v.values - manufactured_v(g.centers))))
            assert abs(sol.dv_faces[-1]) < 1e-14  # Neumann compatibility
            assert abs(mean_value(sol.v)) < 1e-12
        assert errs[0] / errs[1] >= 3.5
        assert errs[1] / errs[2] >= 3.5

    def test_mean_subtraction_invariance(self):
        g = RadialGrid(n=3, R=1.0, N=64)
        rng = np.random.default_rng(1)
        f = rng.uniform(0, 2, 64)
        v1 = solve_signal(RadialField(g, f))
        v2 = solve_signal(RadialField(g, f + 4.2))
        assert np.allclose(v1.values, v2.values, atol=1e-13)

    @given(
        arrays(float, 48, elements=st.floats(-5, 5)),
        arrays(float, 48, elements=st.floats(-5, 5)),
        st.floats(-3, 3),
        st.floats(-3, 3),
    )
    @settings(max_examples=25, deadline=None)
    def test_linearity(self, f, g_vals, a, b):
        g = RadialGrid(n=3, R=1.0, N=48)
        va = solve_signal(RadialField(g, f)).values
        vb = solve_signal(RadialField(g, g_vals)).values
        vab = solve_signal(RadialField(g, a * f + b * g_vals)).values
        scale = max(np.max(np.abs(va)), np.max(np.abs(vb)), 1.0) * (abs(a) + abs(b) + 1)
        assert np.allclose(vab, a * va + b * vb, atol=1e-12 * scale)

    @given(arrays(float, 64, elements=st.floats(0, 10)))
    @settings(max_examples=25, deadline=None)
    def test_zero_mean_property(self, f):
        g = RadialGrid(n=3, R=1.0, N=64)
        v = solve_signal(RadialField(g, f))
        bound = 1e-12 * max(np.max(np.abs(f)), 1e-30) * g.R**2
        assert abs(mean_value(v)) <= bound + 1e-16

    def test_dimension_four(self):
        # radially exact integral check in n = 4: source r^2, flux has closed form
        g = RadialGrid(n=4, R=1.0, N=256)
        f = g.faces
        avg = (f[1:] ** 6 - f[:-1] ** 6) / (6.0 * g.weights)
        sol = solve_signal_full(RadialField(g, avg))
        # mu = 2/3; g(r) = mu r^4/4 - r^6/6; v'(r) = mu r/4 - r^3/6
        dv_exact = (2.0 / 3.0) * g.faces / 4 - g.faces**3 / 6
        assert np.allclose(sol.dv_faces, dv_exact, atol=1e-10)

    def test_rejects_nonfinite_source(self):
        g = RadialGrid(n=3, R=1.0, N=32)
        with pytest.raises(ValueError):
            RadialField(g, np.full(32, np.inf))
