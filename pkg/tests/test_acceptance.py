"""Acceptance suite: one test per criterion, desk scale (n <= 400-ish grids).

Each test prints a single pass line with its headline margin and wall time.
The closed-loop fixtures share one certified gain set (velocity-independent
wall friction, c = 0.05) so the robustness triptych reuses the main run.
Run with `pytest tests/test_acceptance.py -v -s` to see the lines live.
"""

import math
import time

import numpy as np
import pytest

import spillfree as sf
from spillfree.core import central_derivative, l2_norm_sq
from spillfree.sampling import sample_state_in_sublevel, scale_state
from spillfree.verify import (
    verify_decay,
    verify_energy_identities,
    verify_level_bounds,
    verify_sine_inequalities,
    verify_small_norm_bound,
)

PARAMS = sf.PhysicalParams(g=9.81, mu=0.1, L=1.0, m=0.5, H_max=1.0)
FRICTION = sf.VelocityIndependent(c=0.05, mu=PARAMS.mu)
OMEGA = 0.25
SEED = 42
SAMPLES = 1000


def report_line(number, name, elapsed, detail):
    print(f"[acceptance] criterion {number:>2} {name}: PASS in {elapsed:.1f}s ({detail})")


@pytest.fixture(scope="module")
def certificate():
    return sf.suggest_gains(FRICTION, PARAMS, mode="theorem1", omega=OMEGA)


def closed_loop_run(gains, r, friction, t_end=3.0, n=201):
    """Sloshing start scaled onto V(0) = 0.8 r, integrated closed loop."""
    grid = sf.Grid(n, PARAMS.L)
    tank, state = sf.make_initial(
        "sloshing", PARAMS, grid, amplitude=0.01, velocity=0.02, mode=1
    )
    fp = gains.fparams
    target = 0.8 * r
    lo, hi = 0.0, 1.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        tk, st = scale_state(tank, state, PARAMS, mid)
        if sf.clf_V(tk, st, PARAMS, fp, grid) <= target:
            lo = mid
        else:
            hi = mid
    tank, state = scale_state(tank, state, PARAMS, lo)
    cfg = sf.SolverConfig(n=n, t_end=t_end, output_every=0.01)
    return sf.simulate(tank, state, gains, friction, PARAMS, cfg)


@pytest.fixture(scope="module")
def th1_run(certificate):
    t0 = time.time()
    traj = closed_loop_run(certificate.gains, certificate.r, FRICTION)
    return traj, time.time() - t0


def test_criterion_01_level_bound_suite(certificate):
    t0 = time.time()
    fp = certificate.gains.fparams
    grid = sf.Grid(201, PARAMS.L)
    res = verify_level_bounds(SAMPLES, SEED, PARAMS, fp, grid)
    elapsed = time.time() - t0
    assert res.passed, res.to_json_dict()
    assert res.samples == SAMPLES
    assert elapsed < 10.0
    report_line(1, "level bounds from the functional", elapsed,
                f"worst margin {res.worst_margin:.3e}")


def test_criterion_02_sine_inequality_suite():
    t0 = time.time()
    grid = sf.Grid(201, PARAMS.L)
    res = verify_sine_inequalities(SAMPLES, SEED, grid)
    assert res.passed, res.to_json_dict()
    # gradient-norm inequality is an equality at the first eigenmode; verify
    # by quadrature of the first mode at 100001 points
    L = PARAMS.L
    x = np.linspace(0.0, L, 100001)
    dphi = np.sqrt(np.trapezoid((np.pi / L * np.cos(np.pi * x / L)) ** 2, x))
    ddphi = np.sqrt(np.trapezoid(((np.pi / L) ** 2 * np.sin(np.pi * x / L)) ** 2, x))
    rel_gap = abs(math.pi * dphi - L * ddphi) / (L * ddphi)
    assert rel_gap < 1e-10
    elapsed = time.time() - t0
    assert elapsed < 5.0
    report_line(2, "wall-pinned sine inequalities", elapsed,
                f"worst margin {res.worst_margin:.3e}, eigenmode gap {rel_gap:.1e}")


def test_criterion_03_near_equilibrium_bound(certificate):
    t0 = time.time()
    fp = certificate.gains.fparams
    grid = sf.Grid(201, PARAMS.L)
    eps = 0.1 * min(PARAMS.h_star, PARAMS.H_max - PARAMS.h_star) / math.sqrt(PARAMS.L)
    res = verify_small_norm_bound(SAMPLES, SEED, PARAMS, fp, grid, eps=eps)
    elapsed = time.time() - t0
    assert res.passed, res.to_json_dict()
    assert elapsed < 10.0
    report_line(3, "near-equilibrium quadratic bound", elapsed,
                f"worst margin {res.worst_margin:.3e}")


def test_criterion_04_sandwich_and_dissipation_bounds(certificate):
    # the level-bound sample set (same master seed), rescaled into the
    # spill-safe sublevel range where the constructive constants live
    t0 = time.time()
    fp = certificate.gains.fparams
    grid = sf.Grid(201, PARAMS.L)
    R = sf.radius_R(PARAMS, fp)
    lc = sf.lemma_constants(0.999 * R, PARAMS, fp, certificate.gains.sigma)
    worst_sandwich = math.inf
    worst_dissipation = math.inf
    streams = np.random.SeedSequence(SEED).spawn(SAMPLES)
    for ss in streams:
        rng = np.random.default_rng(ss)
        tank, state = sample_state_in_sublevel(rng, PARAMS, fp, grid, R)
        V = sf.clf_V(tank, state, PARAMS, fp, grid)
        assert V < R
        norm_sq = sf.state_norm_X(tank, state, PARAMS, grid) ** 2
        worst_sandwich = min(
            worst_sandwich, norm_sq - V / lc.G2(V), V * lc.G1(V) - norm_sq
        )
        hx = central_derivative(state.h, grid)
        vx = central_derivative(state.v, grid)
        rhs = (
            l2_norm_sq(hx, grid)
            + sf.trapezoid_integral(state.h * vx**2, grid)
            + tank.xi**2
            + (tank.w + fp.k * tank.xi) ** 2
        )
        worst_dissipation = min(worst_dissipation, rhs - V / lc.Lam(V))
    elapsed = time.time() - t0
    assert worst_sandwich >= 0.0
    assert worst_dissipation >= 0.0
    assert elapsed < 10.0
    report_line(4, "norm sandwich + dissipation floor", elapsed,
                f"margins {worst_sandwich:.3e}, {worst_dissipation:.3e}")


def identity_errors(n):
    grid = sf.Grid(n, PARAMS.L)
    tank, state = sf.make_initial(
        "sloshing", PARAMS, grid, amplitude=0.05 * PARAMS.h_star, velocity=0.1, mode=1
    )
    dt_max = 0.25 * grid.dx**2 / (2.0 * PARAMS.mu)
    cfg = sf.SolverConfig(
        n=n, t_end=0.2, output_every=10.0 * dt_max, dt_max=dt_max
    )
    traj = sf.simulate(tank, state, None, sf.Frictionless(), PARAMS, cfg)
    assert traj.termination == "completed"
    res = verify_energy_identities(traj, PARAMS, sf.Frictionless(), rel_tol=0.01)
    drift = float(np.abs(traj.mass - traj.mass[0]).max()) / PARAMS.m
    return res, drift


@pytest.fixture(scope="module")
def identity_pair():
    t0 = time.time()
    coarse, drift_coarse = identity_errors(400)
    fine, drift_fine = identity_errors(799)  # dx exactly halves (399 -> 798)
    return coarse, fine, max(drift_coarse, drift_fine), time.time() - t0


def test_criterion_05_energy_identities_self_convergent(identity_pair):
    coarse, fine, _, elapsed = identity_pair
    assert coarse.passed, coarse.details  # the 1%-at-n=400 example
    ratio_E = coarse.details["err_E"] / fine.details["err_E"]
    ratio_W = coarse.details["err_W"] / fine.details["err_W"]
    assert 3.5 <= ratio_E <= 4.5, (coarse.details, fine.details)
    assert 3.5 <= ratio_W <= 4.5, (coarse.details, fine.details)
    assert elapsed < 60.0
    report_line(5, "energy-derivative identities", elapsed,
                f"err_E {coarse.details['err_E']:.2e} ratios {ratio_E:.2f}/{ratio_W:.2f}")


def test_criterion_06_mass_conservation(th1_run, identity_pair):
    t0 = time.time()
    traj, _ = th1_run
    drift_closed = float(np.abs(traj.mass - traj.mass[0]).max()) / PARAMS.m
    _, _, drift_identity, _ = identity_pair
    worst = max(drift_closed, drift_identity)
    assert worst <= 1e-12
    report_line(6, "mass conservation", time.time() - t0, f"worst drift {worst:.2e}")


def test_criterion_07_certified_closed_loop(certificate, th1_run):
    traj, sim_elapsed = th1_run
    t0 = time.time()
    assert traj.termination == "completed"
    res = verify_decay(traj, certificate.report, PARAMS, friction=FRICTION)
    assert res.passed is True, res.details
    # monotone V, positive spill margin, fitted rate against omega/Lambda(r)
    assert res.details["worst_relative_uptick"] <= 1e-8
    assert res.details["min_spill_margin"] > 0.0
    assert res.details["fitted_rate_V"] >= 0.95 * res.provenance["lambda_V"]
    # gradient decay consistent with the constructive prefactor and rate
    p1_r, _ = sf.level_bounds_p(certificate.r, PARAMS, certificate.gains.fparams)
    K = sf.assumption_H_bound(FRICTION, p1_r, PARAMS)
    rates = sf.decay_rates(certificate.gains, certificate.r, PARAMS, K)
    grid = sf.Grid(traj.meta["n"], PARAMS.L)
    norm0 = sf.state_norm_X(traj.tank_states[0], traj.states[0], PARAMS, grid)
    vx2 = traj.vx_l2**2
    envelope = rates.M_bar**2 * np.exp(-rates.omega_bar * traj.times) * (norm0**2 + vx2[0])
    assert np.all(vx2 <= envelope * (1 + 1e-9))
    elapsed = sim_elapsed + time.time() - t0
    assert elapsed < 60.0
    report_line(7, "certified special-case closed loop", elapsed,
                f"rate {res.details['fitted_rate_V']:.3f} >= "
                f"0.95x{res.provenance['lambda_V']:.2e}")


def test_criterion_08_friction_robustness_triptych(certificate, th1_run):
    # same gain set, three friction models whose envelope at omega stays at
    # or below the certification bound
    t0 = time.time()
    _, vi_elapsed = th1_run
    K_cert = sf.assumption_H_bound(FRICTION, OMEGA, PARAMS)
    B = K_cert * OMEGA**2
    bounded = sf.BoundedGeneric(bound=B)
    assert sf.assumption_H_bound(bounded, OMEGA, PARAMS) == pytest.approx(K_cert, rel=1e-12)
    outcomes = {}
    for label, model in (("frictionless", sf.Frictionless()), ("bounded", bounded)):
        traj = closed_loop_run(certificate.gains, certificate.r, model)
        assert traj.termination == "completed"
        res = verify_decay(traj, certificate.report, PARAMS, friction=FRICTION)
        assert res.passed is True, (label, res.details)
        outcomes[label] = res.details["fitted_rate_V"]
        drift = float(np.abs(traj.mass - traj.mass[0]).max()) / PARAMS.m
        assert drift <= 1e-12
    elapsed = vi_elapsed + time.time() - t0
    assert elapsed < 180.0
    report_line(8, "friction robustness triptych", elapsed,
                f"rates {outcomes['frictionless']:.3f}/{outcomes['bounded']:.3f}")


def test_criterion_09_general_case_closed_loop():
    t0 = time.time()
    sug = sf.suggest_gains(FRICTION, PARAMS, mode="theorem2", omega1=0.25, omega2=2.0)
    assert sug.report.passed
    fp = sug.gains.fparams
    threshold = sf.xu_membership_bound(sug.r, fp)
    grid = sf.Grid(201, PARAMS.L)
    tank, state = sf.make_initial("sloshing", PARAMS, grid, amplitude=2e-6, mode=1)
    target = 0.8 * threshold
    lo, hi = 0.0, 1.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        tk, st = scale_state(tank, state, PARAMS, mid)
        if sf.functional_U(tk, st, PARAMS, fp, grid) <= target:
            lo = mid
        else:
            hi = mid
    tank, state = scale_state(tank, state, PARAMS, lo)
    cfg = sf.SolverConfig(n=201, t_end=1.5, output_every=0.005)
    traj = sf.simulate(tank, state, sug.gains, FRICTION, PARAMS, cfg)
    assert traj.termination == "completed"

    upticks = np.diff(traj.U) / np.maximum(traj.U[:-1], 1e-300)
    assert float(upticks.max()) <= 1e-8
    assert float(traj.U.max()) <= threshold * (1 + 1e-9)  # stays inside the set
    v_cap = sf.sup_velocity_bound(sug.r, PARAMS, fp)
    sup_v = max(float(np.abs(st.v).max()) for st in traj.states)
    assert sup_v <= v_cap
    drift = float(np.abs(traj.mass - traj.mass[0]).max()) / PARAMS.m
    assert drift <= 1e-12
    elapsed = time.time() - t0
    assert elapsed < 60.0
    report_line(9, "certified general-case closed loop", elapsed,
                f"max U {traj.U.max():.3e} <= {threshold:.3e}, sup|v| {sup_v:.1e}")


def test_criterion_10_frictionless_gate_across_delta_decades():
    t0 = time.time()
    for delta in (0.1, 1.0, 10.0):
        fp = sf.FunctionalParams(delta=delta, q=1.0, k=1.0, beta=1.0, gamma=1.0)
        R = sf.radius_R(PARAMS, fp)
        r = 0.5 * R
        theta_r = sf.theta(r, PARAMS, fp, 1.0)
        gains = sf.Gains(sigma=1.0, k=0.5 * theta_r, q=1.0, delta=delta, beta=1.0, gamma=1.0)
        omega = 0.5 * sf.level_bounds_p(r, PARAMS, gains.fparams)[0]
        report = sf.check_theorem1(gains, omega, r, sf.Frictionless(), PARAMS)
        assert report.passed, (delta, report.to_json_dict())
    report_line(10, "frictionless gate over delta decades", time.time() - t0,
                "delta in {0.1, 1, 10}")


def test_criterion_11_equilibrium_fixed_point(certificate):
    t0 = time.time()
    grid = sf.Grid(64, PARAMS.L)
    tank, state = sf.equilibrium_state(PARAMS, grid)
    cfg = sf.SolverConfig(n=64, t_end=1.0)
    dt = sf.stable_dt(state, PARAMS, grid, cfg)
    h0, v0 = state.h.copy(), state.v.copy()
    worst = 0.0
    for _ in range(10_000):
        tank, state = sf.step(tank, state, FRICTION, certificate.gains, PARAMS, grid, dt)
        worst = max(
            worst,
            abs(tank.xi),
            abs(tank.w),
            float(np.abs(state.h - h0).max()),
            float(np.abs(state.v - v0).max()),
        )
    assert worst <= 1e-10
    report_line(11, "equilibrium fixed point over 1e4 steps", time.time() - t0,
                f"max deviation {worst:.1e}")
