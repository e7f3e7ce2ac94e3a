"""Momentum feedback law and gain-feasibility certification.

The control acceleration applied to the tank is

    f = -sigma ( (delta + 1) int h v dx + mu (h(L) - h(0)) - q (w + k xi) )

which needs only four measurements: tank position error and velocity, the
total liquid momentum, and the level difference at the walls.  It requires
no knowledge of the friction relation beyond a bound.

Certification answers: *given gains, a friction bound and a sublevel
radius r, do the hypotheses of the decay certificates hold?*  Two variants
exist:

* the special case (``check_theorem1``) assumes a velocity-independent
  friction envelope K(omega) and certifies exponential decay of V inside
  the sublevel set {V <= r}, and
* the general case (``check_theorem2``) works from the box bound K_tilde
  over a level floor omega1 and a speed ceiling omega2 and certifies decay
  of the augmented functional U inside its sublevel set.

Every strict inequality is reported with its raw numeric slack; equality
at the boundary is a FAIL.  ``suggest_gains`` automates the picks with a
configurable margin on each strict inequality and is deterministic, and
``decay_rates`` evaluates the constructive exponential rates the
certificates guarantee.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import Grid, InvariantError, LiquidState, PhysicalParams, TankState, trapezoid_integral
from .friction import FrictionModel, K_tilde, assumption_H_bound
from .functionals import (
    FunctionalParams,
    level_bounds_p,
    lemma_constants,
    radius_R,
    sup_velocity_bound,
    theta,
    theta_tilde,
)

__all__ = [
    "Gains",
    "CheckItem",
    "FeasibilityReport",
    "GainSuggestion",
    "InfeasibleTargetError",
    "feedback_f",
    "check_theorem1",
    "check_theorem2",
    "suggest_gains",
    "DecayRates",
    "decay_rates",
]


class InfeasibleTargetError(RuntimeError):
    """The requested certification targets admit no gain choice."""


@dataclass(frozen=True)
class Gains:
    """Controller parameters: feedback strength sigma plus the functional weights."""

    sigma: float
    k: float
    q: float
    delta: float
    beta: float
    gamma: float

    def __post_init__(self) -> None:
        for name in ("sigma", "k", "q", "delta", "beta", "gamma"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise InvariantError(f"{name} must be finite and > 0, got {value!r}")

    @property
    def fparams(self) -> FunctionalParams:
        return FunctionalParams(
            delta=self.delta, q=self.q, k=self.k, beta=self.beta, gamma=self.gamma
        )

    def to_dict(self) -> dict:
        return {
            "sigma": self.sigma,
            "k": self.k,
            "q": self.q,
            "delta": self.delta,
            "beta": self.beta,
            "gamma": self.gamma,
        }


def feedback_f(
    tank: TankState,
    state: LiquidState,
    gains: Gains,
    params: PhysicalParams,
    grid: Grid,
) -> float:
    """Control acceleration from momentum, wall level difference and tank terms.

    Linear in (int h v, h(L) - h(0), w + k xi) with coefficients
    (-sigma (delta + 1), -sigma mu, +sigma q); exactly zero at the target
    equilibrium.
    """
    momentum = trapezoid_integral(state.h * state.v, grid)
    level_diff = float(state.h[-1] - state.h[0])
    tank_term = tank.w + gains.k * tank.xi
    return -gains.sigma * (
        (gains.delta + 1.0) * momentum + params.mu * level_diff - gains.q * tank_term
    )


# ---------------------------------------------------------------------------
# feasibility reports


@dataclass(frozen=True)
class CheckItem:
    """One certified inequality: value, bound, slack and verdict.

    ``margin`` is the raw slack, nonnegative exactly when the non-strict
    version holds; ``passed`` applies the strictness the certificate
    actually requires.  Non-numeric gates (e.g. "an envelope exists") carry
    None for the numeric fields.
    """

    name: str
    lhs: float | None
    rhs: float | None
    margin: float | None
    passed: bool

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "margin": self.margin,
            "pass": self.passed,
        }


@dataclass(frozen=True)
class FeasibilityReport:
    """Aggregated verdict for one certificate at one gain set.

    ``friction_bound`` records the K value the certificate was checked
    against (the envelope K(omega) or the box bound K_tilde); decay-rate
    evaluation and robustness sweeps reuse it.  All entries are discretely
    verified quantities.
    """

    theorem: str
    r: float
    R: float
    checks: tuple[CheckItem, ...]
    gains: Gains
    friction_bound: float | None = None
    omega: float | None = None
    omega1: float | None = None
    omega2: float | None = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json_dict(self) -> dict:
        return {
            "theorem": self.theorem,
            "pass": self.passed,
            "r": self.r,
            "R": self.R,
            "checks": [c.to_json_dict() for c in self.checks],
            "gains": self.gains.to_dict(),
        }


def _strict(name: str, lhs: float, rhs: float) -> CheckItem:
    return CheckItem(name=name, lhs=lhs, rhs=rhs, margin=rhs - lhs, passed=lhs < rhs)


def _nonstrict(name: str, lhs: float, rhs: float) -> CheckItem:
    # here lhs is the quantity required to dominate: passes when lhs >= rhs
    return CheckItem(name=name, lhs=lhs, rhs=rhs, margin=lhs - rhs, passed=lhs >= rhs)


def check_theorem1(
    gains: Gains,
    omega: float,
    r: float,
    friction: FrictionModel,
    params: PhysicalParams,
) -> FeasibilityReport:
    """Certify the special-case hypotheses at level floor omega and radius r.

    Verifies, in order: the friction model admits a velocity-independent
    envelope K; 2 g (delta + 1) > mu K(omega); r lies in [0, R); the level
    bound p1(r) clears omega; and k < q theta(r).  Failures are report
    entries, never exceptions.  With kappa = 0 the friction checks pass for
    every delta > 0, which is exactly the frictionless corollary.
    """
    if not 0.0 < omega <= params.h_star:
        raise InvariantError(f"omega must lie in (0, h_star], got {omega}")
    fp = gains.fparams
    R = radius_R(params, fp)
    K = assumption_H_bound(friction, omega, params)
    checks: list[CheckItem] = [
        CheckItem(
            name="assumption_H_envelope_exists",
            lhs=None,
            rhs=None,
            margin=None,
            passed=K is not None,
        )
    ]
    K_eff = K if K is not None else math.inf
    checks.append(_strict("viscous_margin_over_friction", params.mu * K_eff, 2.0 * params.g * (gains.delta + 1.0)))
    in_range = 0.0 <= r < R
    checks.append(CheckItem(name="radius_within_spill_safe_range", lhs=r, rhs=R, margin=R - r, passed=in_range))
    if in_range:
        p1_r, _ = level_bounds_p(r, params, fp)
        checks.append(_nonstrict("level_bound_clears_floor", p1_r, omega))
        if p1_r > 0.0:
            ceiling = gains.q * theta(r, params, fp, gains.sigma)
            checks.append(_strict("position_gain_below_ceiling", gains.k, ceiling))
        else:
            checks.append(CheckItem("position_gain_below_ceiling", gains.k, None, None, False))
    else:
        checks.append(CheckItem("level_bound_clears_floor", None, omega, None, False))
        checks.append(CheckItem("position_gain_below_ceiling", gains.k, None, None, False))
    return FeasibilityReport(
        theorem="theorem1",
        r=r,
        R=R,
        checks=tuple(checks),
        gains=gains,
        friction_bound=K,
        omega=omega,
    )


def check_theorem2(
    gains: Gains,
    omega1: float,
    omega2: float,
    r: float,
    friction: FrictionModel,
    params: PhysicalParams,
) -> FeasibilityReport:
    """Certify the general-case hypotheses at level floor omega1, speed
    ceiling omega2 and radius r.

    Works for any continuous nonnegative friction relation through the box
    bound K_tilde.  On top of the special-case style gates it pins the
    augmentation weights: gamma must clear the forcing floor and beta the
    two gradient-estimate floors, and the certified sup-velocity envelope
    at r must stay strictly below omega2.
    """
    if not 0.0 < omega1 < params.h_star:
        raise InvariantError(f"omega1 must lie in (0, h_star), got {omega1}")
    if omega2 <= 0.0:
        raise InvariantError(f"omega2 must be > 0, got {omega2}")
    fp = gains.fparams
    R = radius_R(params, fp)
    Kt = K_tilde(friction, omega1, omega2, params)
    mu, g, L = params.mu, params.g, params.L

    checks: list[CheckItem] = []
    checks.append(_strict("viscous_margin_over_friction", mu * Kt, 2.0 * g * (gains.delta + 1.0)))
    th_t = theta_tilde(omega1, params, fp, gains.sigma)
    checks.append(_strict("position_gain_below_ceiling", gains.k, gains.q * th_t))
    in_range = 0.0 <= r < R
    checks.append(CheckItem("radius_within_spill_safe_range", lhs=r, rhs=R, margin=R - r, passed=in_range))
    if in_range:
        p1_r, _ = level_bounds_p(r, params, fp)
        checks.append(_strict("level_floor_strictly_cleared", omega1, p1_r))
    else:
        checks.append(CheckItem("level_floor_strictly_cleared", omega1, None, None, False))
    checks.append(_strict("sup_velocity_within_ceiling", sup_velocity_bound(r, params, fp), omega2))

    # augmentation weight floors; need alpha_tilde > 0, i.e. k < q theta_tilde.
    # eps1, eps2 and alpha_tilde do not depend on r, so evaluate at r = 0.
    if gains.k < gains.q * th_t:
        lc = lemma_constants(0.0, params, fp, gains.sigma, omega1=omega1)
        a_t = lc.alpha_tilde
        assert a_t is not None and a_t > 0.0
        gamma_floor = 5.0 * (params.H_max * Kt**2 + lc.eps1) / (gains.delta * mu * a_t)
        checks.append(_strict("gamma_above_forcing_floor", gamma_floor, gains.gamma))
        beta_floor = max(
            4.0 * lc.eps2 / ((2.0 * a_t + mu * gains.delta * gains.gamma * omega1) * omega1**2),
            20.0 * L / (3.0 * mu**2 * gains.delta * omega1),
        )
        checks.append(_strict("beta_above_gradient_floor", beta_floor, gains.beta))
    else:
        checks.append(CheckItem("gamma_above_forcing_floor", None, gains.gamma, None, False))
        checks.append(CheckItem("beta_above_gradient_floor", None, gains.beta, None, False))

    return FeasibilityReport(
        theorem="theorem2",
        r=r,
        R=R,
        checks=tuple(checks),
        gains=gains,
        friction_bound=Kt,
        omega1=omega1,
        omega2=omega2,
    )


# ---------------------------------------------------------------------------
# gain suggestion


@dataclass(frozen=True)
class GainSuggestion:
    """Deterministic gain pick plus the radius and the re-checked report."""

    gains: Gains
    r: float
    report: FeasibilityReport


def _bisect_largest(pred, hi: float, iters: int = 120) -> float:
    """Largest x in [0, hi] with pred true, assuming pred(0) and monotone pred."""
    if pred(hi):
        return hi
    lo = 0.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if pred(mid):
            lo = mid
        else:
            hi = mid
    return lo


def suggest_gains(
    friction: FrictionModel,
    params: PhysicalParams,
    *,
    mode: str = "theorem1",
    omega: float | None = None,
    omega1: float | None = None,
    omega2: float | None = None,
    sigma: float = 1.0,
    q: float = 1.0,
    margin: float = 0.25,
    delta_floor: float = 1.0,
    r_fraction: float = 0.5,
) -> GainSuggestion:
    """Automate the gain picks with the given margin on each strict inequality.

    Deterministic given inputs: delta is the smallest value clearing the
    viscous-margin check with margin (floored at ``delta_floor`` — pushing
    delta up shrinks the spill radius when the walls are low, so small
    wins); r starts at ``r_fraction * R`` and is clipped by bisection until
    the level floor (and, in general mode, the sup-velocity ceiling) holds;
    k sits at half its ceiling; beta and gamma follow the constructive
    selection rules with the same margin.  Raises
    :class:`InfeasibleTargetError` when the targets admit no pick, e.g. a
    velocity-dependent friction with no envelope in special-case mode.
    """
    mu, g = params.mu, params.g
    if mode == "theorem1":
        if omega is None:
            raise InvariantError("theorem1 mode needs a level floor omega")
        K = assumption_H_bound(friction, omega, params)
        if K is None:
            raise InfeasibleTargetError(
                "friction model admits no velocity-independent envelope "
                "(Assumption (H) not satisfied); certify via the general mode instead"
            )
        delta = max(delta_floor, (1.0 + margin) * mu * K / (2.0 * g) - 1.0)
        trial = FunctionalParams(delta=delta, q=q, k=1.0, beta=1.0, gamma=1.0)
        R = radius_R(params, trial)
        r = _bisect_largest(
            lambda x: level_bounds_p(x, params, trial)[0] >= omega, r_fraction * R
        )
        th = theta(r, params, trial, sigma)
        k = 0.5 * q * th
        fp = FunctionalParams(delta=delta, q=q, k=k, beta=1.0, gamma=1.0)
        lc = lemma_constants(r, params, fp, sigma)
        K_at_p1 = assumption_H_bound(friction, min(lc.p1_r, params.h_star), params)
        assert K_at_p1 is not None
        gamma = (1.0 + margin) * 5.0 * (params.H_max * K_at_p1**2 + lc.eps1) / (
            delta * mu * lc.alpha_r
        )
        beta = (1.0 + margin) * max(
            20.0 * params.L * params.H_max / (3.0 * mu**2 * delta * lc.phi_r),
            4.0 * params.H_max * lc.eps2 / (mu * delta * lc.p1_r**2 * lc.phi_r) / gamma,
        )
        gains = Gains(sigma=sigma, k=k, q=q, delta=delta, beta=beta, gamma=gamma)
        report = check_theorem1(gains, omega, r, friction, params)
        if not report.passed:
            raise InfeasibleTargetError(
                f"suggested gains fail their own certificate: {report.to_json_dict()}"
            )
        return GainSuggestion(gains=gains, r=r, report=report)

    if mode == "theorem2":
        if omega1 is None or omega2 is None:
            raise InvariantError("theorem2 mode needs targets omega1 and omega2")
        Kt = K_tilde(friction, omega1, omega2, params)
        delta = max(delta_floor, (1.0 + margin) * mu * Kt / (2.0 * g) - 1.0)
        trial = FunctionalParams(delta=delta, q=q, k=1.0, beta=1.0, gamma=1.0)
        th_t = theta_tilde(omega1, params, trial, sigma)
        k = 0.5 * q * th_t
        fp0 = FunctionalParams(delta=delta, q=q, k=k, beta=1.0, gamma=1.0)
        lc0 = lemma_constants(0.0, params, fp0, sigma, omega1=omega1)
        a_t = lc0.alpha_tilde
        assert a_t is not None and a_t > 0.0
        gamma = (1.0 + margin) * 5.0 * (params.H_max * Kt**2 + lc0.eps1) / (delta * mu * a_t)
        beta = (1.0 + margin) * max(
            4.0 * lc0.eps2 / ((2.0 * a_t + mu * delta * gamma * omega1) * omega1**2),
            20.0 * params.L / (3.0 * mu**2 * delta * omega1),
        )
        fp = FunctionalParams(delta=delta, q=q, k=k, beta=beta, gamma=gamma)
        R = radius_R(params, fp)
        v_cap = omega2 / (1.0 + margin)

        def feasible(x: float) -> bool:
            return (
                level_bounds_p(x, params, fp)[0] > omega1
                and sup_velocity_bound(x, params, fp) <= v_cap
            )

        r = _bisect_largest(feasible, r_fraction * R)
        if r <= 0.0:
            raise InfeasibleTargetError(
                f"no radius satisfies level floor {omega1} and speed ceiling {omega2}"
            )
        gains = Gains(sigma=sigma, k=k, q=q, delta=delta, beta=beta, gamma=gamma)
        report = check_theorem2(gains, omega1, omega2, r, friction, params)
        if not report.passed:
            raise InfeasibleTargetError(
                f"suggested gains fail their own certificate: {report.to_json_dict()}"
            )
        return GainSuggestion(gains=gains, r=r, report=report)

    raise InvariantError(f"unknown suggestion mode {mode!r}")


# ---------------------------------------------------------------------------
# certified decay rates


@dataclass(frozen=True)
class DecayRates:
    """Constructive exponential rates guaranteed by a passing certificate.

    lambda_V : decay rate of the functional V (and of U in general mode,
               reported as lambda_U)
    lambda_U : decay rate of the augmented functional U
    lambda_norm : rate of the state norm, lambda_V / 2
    lambda_vx : rate of ||v_x||_2, i.e. lambda_U / 2 (its square decays at
               lambda_U)
    M, M_bar : the matching prefactors of the norm and gradient estimates
    """

    lambda_V: float
    lambda_U: float
    lambda_norm: float
    lambda_vx: float
    M: float
    M_bar: float
    omega: float
    omega_bar: float


def decay_rates(
    gains: Gains,
    r: float,
    params: PhysicalParams,
    K: float,
    *,
    mode: str = "theorem1",
) -> DecayRates:
    """Evaluate the certified rates at radius r against friction bound K.

    ``K`` is the bound the certificate was checked with: the envelope at
    the worst certified level, K(p1(r)), in special-case mode, or K_tilde
    in general mode.  Raises when the implied rates are not positive, which
    signals the corresponding check did not actually pass.
    """
    fp = gains.fparams
    lc = lemma_constants(r, params, fp, gains.sigma)
    mu, g, H, L = params.mu, params.g, params.H_max, params.L
    q, k, delta, gamma, beta = gains.q, gains.k, gains.delta, gains.gamma, gains.beta
    th_r = lc.theta_r
    if mode == "theorem1":
        omega = min(
            0.25 * mu * g,
            mu * delta * lc.phi_r / (2.0 * H * lc.p1_r),
            q * k**3,
            q * (q * th_r - k),
        )
    elif mode == "theorem2":
        omega = min(0.25 * mu * g, q * k**3, q * (q * th_r - k), 0.5 * mu * delta)
    else:
        raise InvariantError(f"unknown mode {mode!r}")
    Lam_r = lc.Lam(r)
    lambda_V = omega / Lam_r
    omega_bar = min(
        (delta * gamma * lc.phi_r / H + math.pi**2 / L**2) * mu / 2.0,
        lc.alpha_r - 5.0 * (H * K**2 + lc.eps1) / (delta * mu * gamma),
    )
    if not (lambda_V > 0.0 and omega_bar > 0.0):
        raise InfeasibleTargetError(
            f"non-positive certified rates (lambda_V = {lambda_V}, omega_bar = {omega_bar}); "
            "the feasibility checks cannot all have passed"
        )
    M = math.sqrt(lc.G1(r) * lc.G2(r))
    M_bar = math.sqrt(2.0 * (1.0 + gamma) * (1.0 + lc.G2(r)) * math.exp(beta * r))
    return DecayRates(
        lambda_V=lambda_V,
        lambda_U=omega_bar,
        lambda_norm=0.5 * lambda_V,
        lambda_vx=0.5 * omega_bar,
        M=M,
        M_bar=M_bar,
        omega=omega,
        omega_bar=omega_bar,
    )
