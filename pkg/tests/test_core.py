import math

import numpy as np
import pytest

import spillfree as sf
from spillfree.core import InvariantError, l2_norm_sq, project_mass


class TestPhysicalParams:
    def test_h_star_is_derived(self, params):
        assert params.h_star == params.m / params.L

    @pytest.mark.parametrize("field", ["g", "mu", "L", "m", "H_max"])
    def test_positivity_enforced(self, params, field):
        kwargs = dict(g=params.g, mu=params.mu, L=params.L, m=params.m, H_max=params.H_max)
        kwargs[field] = -1.0
        with pytest.raises(InvariantError):
            sf.PhysicalParams(**kwargs)

    def test_equilibrium_must_fit_below_walls(self):
        with pytest.raises(InvariantError, match="h_star"):
            sf.PhysicalParams(g=9.81, mu=0.1, L=1.0, m=1.2, H_max=1.0)


class TestGrid:
    def test_spacing_times_intervals_recovers_length(self):
        for n in (8, 101, 400):
            g = sf.Grid(n, 2.5)
            assert g.dx * (n - 1) == pytest.approx(2.5, rel=1e-15)
            assert g.nodes[0] == 0.0 and g.nodes[-1] == 2.5

    def test_minimum_size(self):
        with pytest.raises(InvariantError):
            sf.Grid(7, 1.0)


class TestTrapezoid:
    def test_constant(self, grid):
        assert sf.trapezoid_integral(np.ones(grid.n), grid) == pytest.approx(1.0, rel=1e-14)

    def test_equilibrium_mass(self, params):
        grid = sf.Grid(101, params.L)
        f = np.full(grid.n, params.h_star)
        assert sf.trapezoid_integral(f, grid) == pytest.approx(0.5, rel=1e-14)

    def test_exact_on_linear(self):
        grid = sf.Grid(101, 1.0)
        assert sf.trapezoid_integral(grid.nodes, grid) == pytest.approx(0.5, rel=1e-14)

    def test_linearity(self, grid, rng):
        for _ in range(100):
            f = rng.standard_normal(grid.n)
            g = rng.standard_normal(grid.n)
            a, b = rng.standard_normal(2)
            lhs = sf.trapezoid_integral(a * f + b * g, grid)
            rhs = a * sf.trapezoid_integral(f, grid) + b * sf.trapezoid_integral(g, grid)
            assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_length_mismatch(self, grid):
        with pytest.raises(InvariantError):
            sf.trapezoid_integral(np.ones(grid.n + 1), grid)


class TestCentralDerivative:
    def test_constant_is_zero(self, grid):
        d = sf.central_derivative(np.full(grid.n, 3.7), grid)
        assert np.all(d == 0.0)

    def test_linear_is_exact(self, grid):
        d = sf.central_derivative(2.0 * grid.nodes, grid)
        assert np.allclose(d, 2.0, rtol=1e-12, atol=1e-12)

    def test_sine_second_order(self):
        # max |error| for sin(pi x) is bounded by (pi dx)^2 pi / 3 (third
        # derivative pi^3, one-sided boundary stencil remainder f'''/3)
        for n in (101, 201):
            grid = sf.Grid(n, 1.0)
            f = np.sin(np.pi * grid.nodes)
            exact = np.pi * np.cos(np.pi * grid.nodes)
            err = np.abs(sf.central_derivative(f, grid) - exact).max()
            assert err <= np.pi**3 * grid.dx**2 / 3.0

    def test_refinement_ratio_near_four(self):
        errs = []
        for n in (101, 201):
            grid = sf.Grid(n, 1.0)
            f = np.sin(np.pi * grid.nodes)
            exact = np.pi * np.cos(np.pi * grid.nodes)
            errs.append(np.abs(sf.central_derivative(f, grid) - exact).max())
        assert 3.5 <= errs[0] / errs[1] <= 4.5


class TestLiquidState:
    def test_rejects_nonpositive_level(self, grid):
        h = np.full(grid.n, 0.5)
        h[3] = 0.0
        with pytest.raises(InvariantError, match="positive"):
            sf.LiquidState(h, np.zeros(grid.n))

    def test_rejects_slip(self, grid):
        v = np.zeros(grid.n)
        v[0] = 1e-9
        with pytest.raises(InvariantError, match="slip"):
            sf.LiquidState(np.full(grid.n, 0.5), v)

    def test_rejects_nonfinite(self, grid):
        h = np.full(grid.n, 0.5)
        h[5] = np.nan
        with pytest.raises(InvariantError):
            sf.LiquidState(h, np.zeros(grid.n))

    def test_mass_validation(self, params, grid):
        h = np.full(grid.n, params.h_star * 1.01)
        with pytest.raises(InvariantError, match="mass"):
            sf.LiquidState.from_samples(h, np.zeros(grid.n), grid, params)

    def test_mass_projection_shifts_only_the_mean(self, params, grid):
        rng = np.random.default_rng(5)
        bump = 0.05 * np.sin(2 * np.pi * grid.nodes) + 0.003 * rng.standard_normal(grid.n)
        h = params.h_star + 0.02 + bump
        projected = project_mass(h, grid, params)
        assert sf.trapezoid_integral(projected, grid) == pytest.approx(params.m, rel=1e-13)
        # deviation shape untouched: differs from the input by a constant
        diff = projected - h
        assert np.allclose(diff, diff[0], atol=1e-15)

    def test_states_are_immutable(self, params, grid):
        _, state = sf.equilibrium_state(params, grid)
        with pytest.raises(ValueError):
            state.h[0] = 2.0


class TestStateNorm:
    def test_zero_at_equilibrium(self, params, grid):
        tank, state = sf.equilibrium_state(params, grid)
        assert sf.state_norm_X(tank, state, params, grid) == 0.0

    def test_single_component(self, params, grid):
        _, state = sf.equilibrium_state(params, grid)
        assert sf.state_norm_X(sf.TankState(1.0, 0.0), state, params, grid) == 1.0

    def test_sine_deviation_closed_form(self, params):
        # h = h* + 0.1 sin(2 pi x), L = 1: ||h-h*||^2 = 0.01/2 and
        # ||h_x||^2 = 0.01 (2 pi)^2 / 2
        expected = math.sqrt(0.01 * 0.5 + 0.01 * (2 * np.pi) ** 2 * 0.5)
        for n, tol in ((201, 5e-4), (2001, 5e-6)):
            grid = sf.Grid(n, params.L)
            h = params.h_star + 0.1 * np.sin(2 * np.pi * grid.nodes)
            state = sf.LiquidState(h, np.zeros(n))
            got = sf.state_norm_X(sf.TankState(0.0, 0.0), state, params, grid)
            assert got == pytest.approx(expected, rel=tol)

    def test_positive_off_equilibrium(self, params, grid, rng):
        from spillfree.sampling import sample_state

        for _ in range(20):
            tank, state = sample_state(rng, params, grid)
            assert sf.state_norm_X(tank, state, params, grid) > 0.0


class TestFrameMaps:
    def test_identity_frame(self, params, grid):
        tank, state = sf.equilibrium_state(params, grid)
        view = sf.to_lab_frame(tank, state, a_star=3.0)
        assert view.a == 3.0
        assert np.array_equal(view.u, state.v)
        assert np.array_equal(view.H, state.h)

    def test_rigid_translation(self, params, grid):
        _, state = sf.equilibrium_state(params, grid)
        view = sf.to_lab_frame(sf.TankState(2.0, 1.0), state, a_star=0.5)
        assert view.a == 2.5
        assert np.all(view.u == 1.0)

    def test_round_trip_bitwise_on_dyadic_data(self, params, grid):
        # dyadic samples make every +/- w exact, so the round trip is bitwise
        h = np.full(grid.n, 0.5)
        h[::2] = 0.75
        u = np.full(grid.n, 1.5)
        u[1:-1] += 0.25
        view = sf.LabFrameView(a=2.5, H=h, u=u)
        tank, state = sf.from_lab_frame(view, a_star=0.5)
        back = sf.to_lab_frame(tank, state, a_star=0.5)
        assert back.a == view.a
        assert np.array_equal(back.H, view.H)
        assert np.array_equal(back.u, view.u)

    def test_round_trip_random_to_roundoff(self, params, grid, rng):
        from spillfree.sampling import sample_state

        tank, state = sample_state(rng, params, grid)
        view = sf.to_lab_frame(tank, state, a_star=1.7)
        tank2, state2 = sf.from_lab_frame(view, a_star=1.7)
        assert tank2.xi == pytest.approx(tank.xi, abs=1e-14)
        assert tank2.w == tank.w
        assert np.allclose(state2.v, state.v, atol=1e-14)
        assert np.array_equal(state2.h, state.h)


class TestSpillCheck:
    def test_equilibrium_margin(self, params, grid):
        _, state = sf.equilibrium_state(params, grid)
        status = sf.spill_check(state, params)
        assert status.ok
        assert status.margin == pytest.approx(params.H_max - params.h_star)
        assert not status.interior_above_walls

    def test_wall_at_height_fails_with_zero_margin(self, params, grid):
        h = np.full(grid.n, params.h_star)
        h[0] = params.H_max
        status = sf.spill_check(sf.LiquidState(h, np.zeros(grid.n)), params)
        assert not status.ok
        assert status.margin == 0.0

    def test_interior_excess_only_warns(self, params, grid):
        # only the wall levels decide spilling; interior excess is a warning
        h = np.full(grid.n, params.h_star)
        h[grid.n // 2] = params.H_max + 0.1
        status = sf.spill_check(sf.LiquidState(h, np.zeros(grid.n)), params)
        assert status.ok
        assert status.interior_above_walls


def test_l2_norm_matches_quadrature(grid, rng):
    f = rng.standard_normal(grid.n)
    assert l2_norm_sq(f, grid) == pytest.approx(sf.trapezoid_integral(f * f, grid), rel=1e-14)
