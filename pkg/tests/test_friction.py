import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import spillfree as sf
from spillfree.friction import _grid_box_max
from spillfree.sampling import sample_state

MU = 0.1


def all_models():
    return [
        sf.Frictionless(),
        sf.ConstAbsV(c_f=0.3),
        sf.LinearLevel(r0=0.02, r1=0.5),
        sf.ChannelWidth(r=0.1, b=0.4),
        sf.VelocityIndependent(c=0.05, mu=MU),
        sf.BoundedGeneric(bound=0.08),
        sf.BoundedGeneric(bound=0.2, fn=lambda h, v: 0.2 * np.abs(np.sin(3 * h + v)) ),
    ]


class TestKappa:
    def test_frictionless_zero(self):
        model = sf.Frictionless()
        assert np.all(sf.kappa(model, np.array([0.3, 1.0]), np.array([-2.0, 5.0])) == 0.0)

    def test_velocity_independent_formula_and_limit(self):
        c = 0.05
        model = sf.VelocityIndependent(c=c, mu=MU)
        h = np.array([0.5])
        expected = 3 * MU * c / (3 * MU + 4 * c * 0.5)
        assert sf.kappa(model, h, np.array([2.0]))[0] == pytest.approx(expected, rel=1e-14)
        # the printed relation tends to c as the layer thins
        assert sf.kappa(model, np.array([1e-12]), np.array([0.0]))[0] == pytest.approx(c, rel=1e-9)

    def test_const_abs_v_symmetry(self):
        model = sf.ConstAbsV(c_f=0.3)
        h = np.array([0.5])
        assert sf.kappa(model, h, np.array([0.0]))[0] == 0.0
        assert sf.kappa(model, h, np.array([2.0]))[0] == pytest.approx(0.6)
        assert sf.kappa(model, h, np.array([-2.0]))[0] == pytest.approx(0.6)

    def test_rejects_nonpositive_level(self):
        for model in all_models():
            with pytest.raises(sf.InvariantError):
                sf.kappa(model, np.array([0.0]), np.array([1.0]))

    @given(h=st.floats(1e-6, 10.0), v=st.floats(-50.0, 50.0))
    @settings(max_examples=200, deadline=None)
    def test_nonnegative_everywhere(self, h, v):
        for model in all_models():
            value = sf.kappa(model, np.array([h]), np.array([v]))
            assert np.all(value >= 0.0)

    def test_unchecked_matches_checked(self, rng):
        h = rng.uniform(0.05, 1.0, size=64)
        v = rng.uniform(-3.0, 3.0, size=64)
        for model in all_models():
            checked = np.asarray(sf.kappa(model, h, v))
            fast = np.broadcast_to(np.asarray(model.kappa_unchecked(h, v)), checked.shape)
            assert np.allclose(checked, fast, rtol=1e-14, atol=0.0)


class TestEnvelope:
    def test_frictionless(self, params):
        assert sf.assumption_H_bound(sf.Frictionless(), 0.3, params) == 0.0

    def test_velocity_independent_formula(self, params):
        c = 0.05
        model = sf.VelocityIndependent(c=c, mu=params.mu)
        omega = 0.25
        expected = 3 * params.mu * c / (omega**2 * (3 * params.mu + 4 * c * omega))
        assert sf.assumption_H_bound(model, omega, params) == pytest.approx(expected, rel=1e-14)

    def test_bounded_formula(self, params):
        model = sf.BoundedGeneric(bound=0.08)
        assert sf.assumption_H_bound(model, 0.2, params) == pytest.approx(0.08 / 0.04, rel=1e-14)

    def test_velocity_dependent_models_have_no_envelope(self, params):
        for model in (
            sf.ConstAbsV(c_f=0.3),
            sf.LinearLevel(r0=0.02, r1=0.5),
            sf.ChannelWidth(r=0.1, b=0.4),
        ):
            assert sf.assumption_H_bound(model, 0.3, params) is None

    def test_envelope_dominates_grid_supremum(self, params):
        # dense grid over [omega, H_max] x [-10, 10]
        omega = 0.2
        hs = np.linspace(omega, params.H_max, 300)
        vs = np.linspace(-10.0, 10.0, 300)
        H, V = np.meshgrid(hs, vs, indexing="ij")
        for model in (
            sf.Frictionless(),
            sf.VelocityIndependent(c=0.05, mu=params.mu),
            sf.BoundedGeneric(bound=0.08),
        ):
            K = sf.assumption_H_bound(model, omega, params)
            sup = float(np.max(np.asarray(model.kappa(H, V)) / H**2))
            assert sup <= K * (1 + 1e-12)

    def test_envelope_nonincreasing(self, params):
        model = sf.VelocityIndependent(c=0.05, mu=params.mu)
        omegas = np.linspace(0.05, params.h_star, 50)
        values = [sf.assumption_H_bound(model, w, params) for w in omegas]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_domain_check(self, params):
        with pytest.raises(sf.InvariantError):
            sf.assumption_H_bound(sf.Frictionless(), 0.0, params)
        with pytest.raises(sf.InvariantError):
            sf.assumption_H_bound(sf.Frictionless(), params.h_star * 1.01, params)


class TestBoxBound:
    def test_frictionless(self, params):
        assert sf.K_tilde(sf.Frictionless(), 0.2, 1.0, params) == 0.0

    def test_const_abs_v_corner(self, params):
        model = sf.ConstAbsV(c_f=0.3)
        got = sf.K_tilde(model, 0.2, 2.0, params)
        assert got == pytest.approx(0.3 * 2.0 / 0.04, rel=1e-12)

    def test_velocity_independent_corner(self, params):
        model = sf.VelocityIndependent(c=0.05, mu=params.mu)
        got = sf.K_tilde(model, 0.25, 1.0, params)
        assert got == pytest.approx(sf.assumption_H_bound(model, 0.25, params), rel=1e-12)

    @pytest.mark.parametrize("omega1,omega2", [(0.1, 0.5), (0.25, 2.0), (0.4, 7.0)])
    def test_analytic_corners_match_grid_oracle(self, params, omega1, omega2):
        for model in all_models():
            analytic = sf.K_tilde(model, omega1, omega2, params)
            oracle = _grid_box_max(model.kappa, omega1, omega2, params.H_max, resolution=501)
            assert analytic >= oracle * (1 - 1e-9)
            assert analytic <= oracle * (1 + 1e-3) + 1e-12

    def test_generic_model_uses_scan(self, params):
        # a deliberately non-monotone kappa: the scan must find the interior bump
        fn = lambda h, v: np.exp(-((h - 0.6) ** 2) / 0.01) * np.exp(-(v**2))
        model = sf.BoundedGeneric(bound=1.0, fn=fn)
        got = sf.K_tilde(model, 0.2, 2.0, params)
        hs = np.linspace(0.2, params.H_max, 4001)
        vs = np.linspace(-2.0, 2.0, 4001)
        H, V = np.meshgrid(hs, vs, indexing="ij")
        brute = float(np.max(fn(H, V) / H**2))
        assert got == pytest.approx(brute, rel=1e-5)


class TestNodewiseBound:
    def test_frictionless(self, params, grid):
        _, state = sf.equilibrium_state(params, grid)
        assert sf.K_bar(sf.Frictionless(), state) == 0.0

    def test_rest_state_with_speed_friction(self, params, grid):
        _, state = sf.equilibrium_state(params, grid)
        assert sf.K_bar(sf.ConstAbsV(c_f=0.3), state) == 0.0

    def test_matches_bruteforce_loop(self, params, grid, rng):
        tank, state = sample_state(rng, params, grid)
        for model in all_models():
            brute = max(
                float(model.kappa(np.array([h]), np.array([v]))[0]) / h**2
                for h, v in zip(state.h, state.v)
            )
            assert sf.K_bar(model, state) == pytest.approx(brute, rel=1e-12)

    def test_dominated_by_box_bound(self, params, grid, rng):
        # whenever min h >= omega1 and |v| <= omega2 the nodewise bound
        # cannot exceed the box bound
        omega1, omega2 = 0.2, 1.5
        count = 0
        for _ in range(50):
            tank, state = sample_state(rng, params, grid, velocity_scale=0.5)
            if state.h.min() >= omega1 and np.abs(state.v).max() <= omega2:
                count += 1
                for model in all_models():
                    assert sf.K_bar(model, state) <= sf.K_tilde(model, omega1, omega2, params) * (
                        1 + 1e-12
                    )
        assert count > 0


class TestConfigParsing:
    def test_round_trip_types(self):
        specs = [
            {"type": "none"},
            {"type": "const_abs_v", "c_f": 0.3},
            {"type": "linear_level", "r0": 0.02, "r1": 0.5},
            {"type": "channel_width", "r": 0.1, "b": 0.4},
            {"type": "velocity_independent", "c": 0.05},
            {"type": "bounded", "bound": 0.08},
        ]
        for spec in specs:
            model = sf.friction_from_dict(spec, mu=MU)
            assert model.to_dict()["type"] == spec["type"]

    def test_viscosity_threaded_through(self):
        model = sf.friction_from_dict({"type": "velocity_independent", "c": 0.05}, mu=0.2)
        assert model.mu == 0.2

    def test_unknown_type(self):
        with pytest.raises(sf.InvariantError, match="unknown friction type"):
            sf.friction_from_dict({"type": "quadratic"}, mu=MU)
