"""Property-verification suite: sampled inequality checks and trajectory audits.

Each operation draws its randomness from per-sample substreams of one seed,
so results are deterministic, reproducible from the recorded provenance,
and safe to parallelize over samples.  Every check reports its worst-case
margin (nonnegative means the inequality held with room to spare).  All
verdicts are discretely verified at the working resolution; they are
numerical evidence, not continuum proofs.

Checks
------
* ``verify_level_bounds``   two-sided level bounds from the functional value
  on random admissible states (sampled-state inequality);
* ``verify_sine_inequalities``   the sup-norm and gradient-norm inequalities
  for functions vanishing at the walls, with analytic derivatives;
* ``verify_small_norm_bound``   the quadratic upper bound of the functional
  near equilibrium;
* ``verify_energy_identities``  finite-difference energy derivatives along a
  trajectory against their closed-form right-hand sides;
* ``verify_decay``   the certified decay claims along a closed-loop run:
  monotonicity, sublevel invariance, spill margin, fitted rates against the
  certified rates, and the constructive state-norm envelope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .controller import DecayRates, FeasibilityReport, decay_rates
from .core import (
    Grid,
    InvariantError,
    PhysicalParams,
    central_derivative,
    l2_norm_sq,
    state_norm_X,
    trapezoid_integral,
)
from .friction import FrictionModel, assumption_H_bound
from .functionals import (
    FunctionalParams,
    clf_V,
    level_bounds_p,
    xu_membership_bound,
)
from .sampling import sample_state, sample_state_near_equilibrium
from .solver import Trajectory

__all__ = [
    "VerificationResult",
    "verify_level_bounds",
    "verify_sine_inequalities",
    "verify_small_norm_bound",
    "verify_energy_identities",
    "verify_decay",
    "fit_decay_rate",
]


@dataclass(frozen=True)
class VerificationResult:
    """Outcome of one check: worst margin, verdict and reproduction data.

    ``passed`` is None for observational runs (e.g. decay clauses demoted
    because the gains were not certified).
    """

    name: str
    samples: int
    worst_margin: float
    passed: bool | None
    provenance: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "samples": self.samples,
            "worst_margin": self.worst_margin,
            "pass": self.passed,
            "provenance": self.provenance,
            "details": self.details,
        }


def _substreams(seed: int, count: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


def verify_level_bounds(
    samples: int,
    seed: int,
    params: PhysicalParams,
    fparams: FunctionalParams,
    grid: Grid,
) -> VerificationResult:
    """Check p1(V) <= h(x) <= p2(V) nodewise on random admissible states."""
    worst = math.inf
    for rng in _substreams(seed, samples):
        tank, state = sample_state(rng, params, grid)
        V = clf_V(tank, state, params, fparams, grid)
        p1, p2 = level_bounds_p(V, params, fparams)
        margin = min(float(state.h.min()) - p1, p2 - float(state.h.max()))
        worst = min(worst, margin)
    return VerificationResult(
        name="level_bounds_from_functional",
        samples=samples,
        worst_margin=worst,
        passed=worst >= 0.0,
        provenance={
            "seed": seed,
            "n": grid.n,
            "delta": fparams.delta,
            "method": f"discretely verified at grid resolution n={grid.n}",
        },
    )


def verify_sine_inequalities(
    samples: int, seed: int, grid: Grid, *, modes: int = 8, dense: int = 4001
) -> VerificationResult:
    """Check the wall-pinned inequalities

        ||phi||_inf <= sqrt(L/3) ||phi'||_2   and   pi ||phi'||_2 <= L ||phi''||_2

    on random finite sine series, with the derivative norms evaluated
    analytically (never finite-differenced) and the sup norm by dense
    sampling, which only underestimates the left side.
    """
    L = grid.L
    xd = np.linspace(0.0, L, dense)
    worst = math.inf
    eq_gap = math.inf
    for rng in _substreams(seed, samples):
        j = np.arange(1, modes + 1)
        c = rng.standard_normal(modes) / j
        phi = sum(cj * np.sin(jj * np.pi * xd / L) for jj, cj in zip(j, c))
        sup = float(np.abs(phi).max())
        dphi_sq = float(np.sum(c**2 * (j * np.pi / L) ** 2) * L / 2.0)
        ddphi_sq = float(np.sum(c**2 * (j * np.pi / L) ** 4) * L / 2.0)
        m1 = math.sqrt(L / 3.0) * math.sqrt(dphi_sq) - sup
        m2 = L * math.sqrt(ddphi_sq) - math.pi * math.sqrt(dphi_sq)
        worst = min(worst, m1, m2)
        eq_gap = min(eq_gap, m2)
    return VerificationResult(
        name="wall_pinned_sine_inequalities",
        samples=samples,
        worst_margin=worst,
        passed=worst >= 0.0,
        provenance={"seed": seed, "modes": modes, "dense": dense},
        details={"worst_gradient_gap": eq_gap},
    )


def verify_small_norm_bound(
    samples: int,
    seed: int,
    params: PhysicalParams,
    fparams: FunctionalParams,
    grid: Grid,
    eps: float | None = None,
) -> VerificationResult:
    """Check the quadratic near-equilibrium bound

        V <= max(mu^2/(h* - eps sqrt(L)), (delta+1)g/2, (delta+2)H_max/2,
                 q, 3qk^2/2) * ||(xi, w, h - h*, v)||_X^2

    on states with ||(0, w, h - h*, v)||_X <= eps."""
    hs, H, L = params.h_star, params.H_max, params.L
    cap = min(hs, H - hs) / math.sqrt(L)
    if eps is None:
        eps = 0.1 * cap
    if not 0.0 < eps < cap:
        raise InvariantError(f"eps must lie in (0, {cap}), got {eps}")
    coeff = max(
        params.mu**2 / (hs - eps * math.sqrt(L)),
        0.5 * (fparams.delta + 1.0) * params.g,
        0.5 * (fparams.delta + 2.0) * H,
        fparams.q,
        1.5 * fparams.q * fparams.k**2,
    )
    worst = math.inf
    for rng in _substreams(seed, samples):
        tank, state = sample_state_near_equilibrium(rng, params, grid, eps)
        V = clf_V(tank, state, params, fparams, grid)
        rhs = coeff * state_norm_X(tank, state, params, grid) ** 2
        worst = min(worst, rhs - V)
    return VerificationResult(
        name="near_equilibrium_quadratic_bound",
        samples=samples,
        worst_margin=worst,
        passed=worst >= 0.0,
        provenance={"seed": seed, "eps": eps, "n": grid.n},
    )


# ---------------------------------------------------------------------------
# trajectory audits


def _identity_rhs(
    traj: Trajectory, params: PhysicalParams, friction: FrictionModel, grid: Grid
) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form right-hand sides of the energy derivatives along a run."""
    rhs_E = np.empty(len(traj.times))
    rhs_W = np.empty(len(traj.times))
    mu, g = params.mu, params.g
    for i, state in enumerate(traj.states):
        h, v = state.h, state.v
        vx = central_derivative(v, grid)
        hx = central_derivative(h, grid)
        kap = np.asarray(friction.kappa(h, v))
        f = traj.f[i]
        diss = mu * trapezoid_integral(h * vx**2, grid)
        momentum = trapezoid_integral(h * v, grid)
        kv2 = trapezoid_integral(kap * v**2, grid)
        rhs_E[i] = -diss + f * momentum - kv2
        rhs_W[i] = (
            -mu * g * l2_norm_sq(hx, grid)
            + f * (momentum + mu * float(h[-1] - h[0]))
            - kv2
            - mu * trapezoid_integral(hx * kap * v / h, grid)
        )
    return rhs_E, rhs_W


def verify_energy_identities(
    traj: Trajectory,
    params: PhysicalParams,
    friction: FrictionModel,
    *,
    rel_tol: float = 0.01,
) -> VerificationResult:
    """Compare centered finite differences of E(t) and W(t) along a densely
    sampled trajectory with their closed-form right-hand sides.

    The residual scales with dx^2 (spatial truncation) plus the sampling
    interval squared; the tolerance is therefore resolution-dependent and
    best pinned by self-convergence, which is what the acceptance suite
    does with this operation's reported errors.
    """
    if traj.states is None:
        raise InvariantError("energy-identity audit needs stored field snapshots")
    t = traj.times
    if len(t) < 5:
        raise InvariantError("trajectory too short for finite-difference audit")
    spacing = float(np.max(np.diff(t)))
    dt_used = traj.meta.get("dt_max_used", spacing)
    # output instants snap within a ~1e-12 t_end window, so allow that jitter
    if spacing > 10.0 * dt_used * (1.0 + 1e-6):
        raise InvariantError(
            f"trajectory too coarsely sampled: spacing {spacing} > 10 x dt {dt_used}"
        )
    grid = Grid(traj.meta["n"], params.L)
    rhs_E, rhs_W = _identity_rhs(traj, params, friction, grid)
    dE = np.gradient(traj.E, t, edge_order=2)
    dW = np.gradient(traj.W_energy, t, edge_order=2)
    sl = slice(1, -1)  # centered differences only
    scale_E = float(np.max(np.abs(rhs_E[sl]))) or 1.0
    scale_W = float(np.max(np.abs(rhs_W[sl]))) or 1.0
    err_E = float(np.max(np.abs(dE[sl] - rhs_E[sl]))) / scale_E
    err_W = float(np.max(np.abs(dW[sl] - rhs_W[sl]))) / scale_W
    worst = rel_tol - max(err_E, err_W)
    return VerificationResult(
        name="energy_derivative_identities",
        samples=len(t),
        worst_margin=worst,
        passed=worst >= 0.0,
        provenance={"n": traj.meta["n"], "rel_tol": rel_tol},
        details={"err_E": err_E, "err_W": err_W},
    )


def fit_decay_rate(
    t: np.ndarray,
    y: np.ndarray,
    *,
    floor_rel: float = 1e-10,
    discard_frac: float = 0.05,
) -> float | None:
    """Least-squares exponential rate of y(t): slope of log y on the window
    where y exceeds ``floor_rel`` times its reference scale, after dropping
    the startup transient.  None when the window is degenerate."""
    start = int(math.ceil(discard_frac * len(t)))
    t, y = np.asarray(t)[start:], np.asarray(y)[start:]
    ref = y[0] if y.size and y[0] > 0.0 else (float(y.max()) if y.size else 0.0)
    if ref <= 0.0:
        return None
    mask = y > floor_rel * ref
    if mask.sum() < 2:
        return None
    slope = np.polyfit(t[mask], np.log(y[mask]), 1)[0]
    return float(-slope)


def verify_decay(
    traj: Trajectory,
    report: FeasibilityReport,
    params: PhysicalParams,
    *,
    friction: FrictionModel | None = None,
    rate_factor: float = 0.95,
    uptick_rtol: float = 1e-8,
) -> VerificationResult:
    """Audit a closed-loop run against its certificate.

    Clauses: (i) the certified functional (V, or U in general mode) is
    nonincreasing up to ``uptick_rtol`` relative upticks; (ii) the state
    stays in the certified sublevel set; (iii) the spill margin stays
    positive; (iv) fitted exponential rates of V and ||v_x||_2^2 reach
    ``rate_factor`` times the certified rates (faster observed decay never
    fails); (v) the state norm obeys its constructive envelope
    M exp(-lambda t) with M = sqrt(G1(r) G2(r)).

    An uncertified report demotes all clauses to observations: the result
    carries the measurements with ``passed=None``.
    """
    gains, r = report.gains, report.r
    fp = gains.fparams
    mode = report.theorem
    if mode == "theorem1":
        monitored = traj.V
        threshold = r
        monitored_name = "V"
    else:
        monitored = traj.U
        threshold = xu_membership_bound(r, fp)
        monitored_name = "U"

    details: dict = {"monitored": monitored_name, "threshold": threshold}
    if not report.passed:
        details["note"] = "gains not certified; decay clauses demoted to observations"
        details["max_monitored"] = float(monitored.max()) if len(monitored) else None
        return VerificationResult(
            name="certified_decay (observational)",
            samples=len(traj.times),
            worst_margin=math.nan,
            passed=None,
            provenance={"theorem": mode, "r": r},
            details=details,
        )

    # certified rates; in the special case the gradient-rate constant uses the
    # envelope at the certified worst level p1(r) when the model is available
    if mode == "theorem1":
        if friction is not None:
            p1_r, _ = level_bounds_p(r, params, fp)
            K_rate = assumption_H_bound(friction, p1_r, params)
        else:
            K_rate = report.friction_bound
    else:
        K_rate = report.friction_bound
    assert K_rate is not None
    rates: DecayRates = decay_rates(gains, r, params, K_rate, mode=mode)

    t = traj.times
    margins: list[float] = []

    x0 = monitored[0]
    if len(monitored) > 1:
        prev = monitored[:-1]
        denom = np.maximum(prev, 1e-12 * max(x0, 1e-300))
        upticks = (monitored[1:] - prev) / denom
        worst_uptick = float(upticks.max())
    else:
        worst_uptick = 0.0
    details["worst_relative_uptick"] = worst_uptick
    margins.append(uptick_rtol - worst_uptick)

    overshoot = float(monitored.max()) - threshold * (1.0 + 1e-9)
    details["sublevel_overshoot"] = overshoot
    margins.append(-overshoot)

    min_spill = float(traj.spill_margin.min())
    details["min_spill_margin"] = min_spill
    margins.append(min_spill)

    if x0 > 0.0:
        rate_V = fit_decay_rate(t, traj.V)
        details["fitted_rate_V"] = rate_V
        details["certified_lambda_V"] = rates.lambda_V
        margins.append((rate_V or -math.inf) - rate_factor * rates.lambda_V)
        vx2 = traj.vx_l2**2
        rate_vx = fit_decay_rate(t, vx2)
        details["fitted_rate_vx_sq"] = rate_vx
        details["certified_rate_vx_sq"] = 2.0 * rates.lambda_vx
        if rate_vx is not None:
            margins.append(rate_vx - rate_factor * 2.0 * rates.lambda_vx)
    else:
        details["fitted_rate_V"] = None  # started at equilibrium

    if traj.states is not None:
        grid = Grid(traj.meta["n"], params.L)
        norms = np.array(
            [
                state_norm_X(tank, state, params, grid)
                for tank, state in zip(traj.tank_states, traj.states)
            ]
        )
        envelope = rates.M * np.exp(-rates.lambda_norm * t) * norms[0]
        norm_gap = float(np.min(envelope * (1.0 + 1e-9) - norms))
        details["min_norm_envelope_gap"] = norm_gap
        margins.append(norm_gap)

    worst = min(margins)
    return VerificationResult(
        name="certified_decay",
        samples=len(t),
        worst_margin=worst,
        passed=worst >= 0.0,
        provenance={
            "theorem": mode,
            "r": r,
            "lambda_V": rates.lambda_V,
            "lambda_U": rates.lambda_U,
            "M": rates.M,
            "M_bar": rates.M_bar,
            "K_rate": K_rate,
            "method": f"discretely verified at grid resolution n={traj.meta.get('n')}",
        },
        details=details,
    )
