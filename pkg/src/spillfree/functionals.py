"""The Lyapunov functional tower and every derived bound it certifies.

Four nested functionals measure distance to the target equilibrium
(flat level h* = m/L, fluid and tank at rest):

* ``E``      mechanical energy: kinetic plus level-deviation potential,
* ``W``      an energy built on the combination h v + mu h_x, standard in
             isentropic compressible flow analysis; it controls the level
             gradient through the viscosity,
* ``V``      the control Lyapunov functional delta*E + W plus a quadratic
             tank term; the feedback law is designed to make it decay,
* ``U``      V augmented with exp(beta*V) * (||v_x||^2/2 + gamma*V), the
             functional that converts decay into sup-norm velocity bounds
             via ||v_x||_2^2 <= 2 U.

From V alone one gets two-sided level bounds p1(V) <= h(x) <= p2(V) built
on the strictly increasing function G and its inverse.  The spill-safety
radius R is the sublevel height below which those bounds stay inside
(0, H_max), so every state with V < R is automatically spill-free.

The module also evaluates the constructive constants used by the decay
certificates: the dissipation bound Lambda, the norm-sandwich bounds
G1/G2, and the auxiliary quantities (phi, alpha, eps1, eps2, alpha_tilde)
entering the gain feasibility checks and decay rates.

All evaluations use the shared trapezoid/central-difference kernels, so a
reported certificate is *discretely verified* at the grid resolution, not
a continuum proof.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .core import (
    Grid,
    InvariantError,
    LiquidState,
    PhysicalParams,
    TankState,
    central_derivative,
    l2_norm_sq,
    trapezoid_integral,
)

__all__ = [
    "FunctionalParams",
    "guarded_exp",
    "LyapunovReport",
    "LemmaConstants",
    "energy_E",
    "energy_W",
    "clf_V",
    "functional_U",
    "vx_l2_sq",
    "G_of_h",
    "G_inverse",
    "level_bounds_p",
    "p1_positive_threshold",
    "radius_R",
    "theta",
    "theta_tilde",
    "lemma_constants",
    "xu_membership_bound",
    "sup_velocity_bound",
    "in_XV",
    "in_XU",
    "lyapunov_report",
]


@dataclass(frozen=True)
class FunctionalParams:
    """Weights of the Lyapunov tower.

    delta : mixing weight between E and W in V
    q, k  : tank velocity and position gains entering the quadratic tank term
    beta, gamma : exponent and weight of the U augmentation
    """

    delta: float
    q: float
    k: float
    beta: float
    gamma: float

    def __post_init__(self) -> None:
        for name in ("delta", "q", "k", "beta", "gamma"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise InvariantError(f"{name} must be finite and > 0, got {value!r}")


# ---------------------------------------------------------------------------
# the tower


def guarded_exp(x: float) -> float:
    """exp that saturates to inf instead of overflowing (exp(710) > float max).

    The augmented functional grows like exp(beta V); far outside any
    certified sublevel set its value is only used for threshold
    comparisons, where inf gives the right verdict.
    """
    return math.inf if x > 709.0 else math.exp(x)


def energy_E(state: LiquidState, params: PhysicalParams, grid: Grid) -> float:
    """Mechanical energy: (1/2) int h v^2 + (g/2) ||h - h*||_2^2."""
    dev = state.h - params.h_star
    kinetic = 0.5 * trapezoid_integral(state.h * state.v**2, grid)
    potential = 0.5 * params.g * l2_norm_sq(dev, grid)
    return kinetic + potential


def energy_W(state: LiquidState, params: PhysicalParams, grid: Grid) -> float:
    """Gradient-sensing energy: (1/2) int h^-1 (h v + mu h_x)^2 + (g/2) ||h - h*||_2^2."""
    hx = central_derivative(state.h, grid)
    combo = state.h * state.v + params.mu * hx
    dev = state.h - params.h_star
    core = 0.5 * trapezoid_integral(combo**2 / state.h, grid)
    potential = 0.5 * params.g * l2_norm_sq(dev, grid)
    return core + potential


def clf_V(
    tank: TankState,
    state: LiquidState,
    params: PhysicalParams,
    fparams: FunctionalParams,
    grid: Grid,
) -> float:
    """Control Lyapunov functional delta*E + W + (q k^2/2) xi^2 + (q/2)(w + k xi)^2."""
    fp = fparams
    tank_part = 0.5 * fp.q * fp.k**2 * tank.xi**2 + 0.5 * fp.q * (tank.w + fp.k * tank.xi) ** 2
    return fp.delta * energy_E(state, params, grid) + energy_W(state, params, grid) + tank_part


def vx_l2_sq(state: LiquidState, grid: Grid) -> float:
    """Squared L^2 norm of the velocity gradient, ||v_x||_2^2."""
    return l2_norm_sq(central_derivative(state.v, grid), grid)


def functional_U(
    tank: TankState,
    state: LiquidState,
    params: PhysicalParams,
    fparams: FunctionalParams,
    grid: Grid,
) -> float:
    """Velocity-gradient functional V + (||v_x||_2^2/2 + gamma V) exp(beta V).

    Satisfies ||v_x||_2^2 <= 2 U on every valid state, which is what turns
    decay of U into a sup-norm bound on the velocity.
    """
    V = clf_V(tank, state, params, fparams, grid)
    return V + (0.5 * vx_l2_sq(state, grid) + fparams.gamma * V) * guarded_exp(fparams.beta * V)


# ---------------------------------------------------------------------------
# level bounds through G


def G_of_h(h: float, params: PhysicalParams) -> float:
    """Strictly increasing level potential with G(h*) = 0.

    For h > 0: sgn(h - h*) ((2/3) h sqrt(h) - 2 h* sqrt(h) + (4/3) h* sqrt(h*));
    for h <= 0 it continues linearly as h - (4/3) h*^(3/2).  Continuous on
    all of R, with derivative |h - h*| / sqrt(h) on (0, inf).
    """
    hs = params.h_star
    tail = (4.0 / 3.0) * hs * math.sqrt(hs)
    if h <= 0.0:
        return h - tail
    inner = (2.0 / 3.0) * h * math.sqrt(h) - 2.0 * hs * math.sqrt(h) + tail
    sign = 1.0 if h > hs else (-1.0 if h < hs else 0.0)
    return sign * inner


def _G_derivative(h: float, params: PhysicalParams) -> float:
    return abs(h - params.h_star) / math.sqrt(h)


def G_inverse(y: float, params: PhysicalParams, *, rtol: float = 1e-13) -> float:
    """Invert G: the unique level (or its linear continuation) with G(h) = y.

    The branch y <= -(4/3) h*^(3/2) is exactly linear and solved in closed
    form.  Otherwise the root is bracketed away from the G' singularity at
    h = 0 and the kink at h = h* by plain bisection, then polished with
    bracket-guarded Newton steps using G'(h) = |h - h*| / sqrt(h).
    """
    hs = params.h_star
    tail = (4.0 / 3.0) * hs * math.sqrt(hs)
    if y <= -tail:
        return y + tail
    if y == 0.0:
        return hs
    if y > 0.0:
        lo, hi = hs, 2.0 * hs
        while G_of_h(hi, params) < y:
            hi = hs + 2.0 * (hi - hs)
    else:
        lo, hi = hs / 2.0, hs
        while G_of_h(lo, params) > y:
            lo *= 0.5
    # Bisect until the bracket is clear of both h = 0 and h = h*, and small.
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if G_of_h(mid, params) < y:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-6 * max(hs, abs(mid)):
            break
    h = 0.5 * (lo + hi)
    for _ in range(30):
        slope = _G_derivative(h, params)
        if slope == 0.0:
            break
        step = (G_of_h(h, params) - y) / slope
        h_new = h - step
        if not (lo < h_new < hi):
            h_new = 0.5 * (lo + hi)
        if G_of_h(h_new, params) < y:
            lo = h_new
        else:
            hi = h_new
        done = abs(h_new - h) <= rtol * max(abs(h_new), hs)
        h = h_new
        if done:
            break
    return h


def level_bounds_p(
    s: float, params: PhysicalParams, fparams: FunctionalParams
) -> tuple[float, float]:
    """Two-sided level bounds (p1(s), p2(s)) at functional value s >= 0.

    p1 is nonincreasing and p2 nondecreasing in s; both collapse to h* at
    s = 0.  Whenever a state has V = s, its level samples sit inside
    [p1(s), p2(s)].
    """
    if s < 0.0:
        raise InvariantError(f"functional value must be >= 0, got {s}")
    hs = params.h_star
    mu, g, m, delta = params.mu, params.g, params.m, fparams.delta
    c = 1.0 / (mu * math.sqrt(delta * g))
    amp = math.sqrt(2.0 * m * (1.0 + delta) / delta) * math.sqrt(s) / mu
    p1 = max(G_inverse(-c * s, params), hs - amp)
    p2 = min(G_inverse(c * s, params), hs + amp)
    return p1, p2


def p1_positive_threshold(params: PhysicalParams, fparams: FunctionalParams) -> float:
    """Largest functional value below which p1 is guaranteed positive."""
    hs, mu, g, L, delta = params.h_star, params.mu, params.g, params.L, fparams.delta
    return mu * hs * max(
        (4.0 / 3.0) * math.sqrt(delta * g * hs),
        mu * delta / (2.0 * L * (1.0 + delta)),
    )


def radius_R(params: PhysicalParams, fparams: FunctionalParams) -> float:
    """Spill-safety radius: for s < R both 0 < p1(s) and p2(s) < H_max hold."""
    hs, mu, g, m, H, delta = (
        params.h_star,
        params.mu,
        params.g,
        params.m,
        params.H_max,
        fparams.delta,
    )
    if not hs < H:
        raise InvariantError("equilibrium level must sit below the walls")
    zeta1 = max(
        math.sqrt(H / hs) - 2.0 * math.sqrt(hs / H),
        3.0 * mu * math.sqrt(delta) * (H - hs) / (4.0 * m * (1.0 + delta) * math.sqrt(g * hs)),
    )
    zeta2 = (hs / (H - hs)) * max(
        2.0,
        3.0 * mu * math.sqrt(delta * hs) / (4.0 * m * (1.0 + delta) * math.sqrt(g)),
    )
    return (2.0 * mu * math.sqrt(delta * g * hs) / 3.0) * (H - hs) * min(zeta1, zeta2)


def _theta_of_level(
    level: float, params: PhysicalParams, fparams: FunctionalParams, sigma: float
) -> float:
    if level <= 0.0:
        raise InvariantError(f"theta needs a positive level bound, got p1 = {level}")
    g, mu, L, m, H = params.g, params.mu, params.L, params.m, params.H_max
    delta = fparams.delta
    pi2 = math.pi**2
    core = g * mu * delta * pi2 * level
    den = core + 2.0 * sigma * L * (m * g * L * H * (delta + 1.0) ** 2 + 2.0 * mu**2 * delta * pi2 * level)
    return sigma * core / den


def theta(r: float, params: PhysicalParams, fparams: FunctionalParams, sigma: float) -> float:
    """Position-gain ceiling factor at sublevel radius r: the check is k < q * theta(r).

    Strictly positive whenever p1(r) > 0; nonincreasing in r since p1 is
    nonincreasing and theta is increasing in the level bound.
    """
    p1, _ = level_bounds_p(r, params, fparams)
    return _theta_of_level(p1, params, fparams, sigma)


def theta_tilde(
    omega1: float, params: PhysicalParams, fparams: FunctionalParams, sigma: float
) -> float:
    """Gain ceiling factor for the general-friction certificate: theta with
    the level bound pinned at the floor omega1 instead of p1(r)."""
    return _theta_of_level(omega1, params, fparams, sigma)


# ---------------------------------------------------------------------------
# constructive lemma constants


@dataclass(frozen=True)
class LemmaConstants:
    """Constructive bound functions and scalars evaluated at radius r.

    Lam, G1, G2 are callables of the functional value s on [0, R) with
    p1(s) > 0:

    * V / Lam(V) lower-bounds the closed-loop dissipation rate,
    * V / G2(V) <= ||(xi, w, h - h*, v)||_X^2 <= V * G1(V) sandwiches the
      state norm between multiples of V.

    phi and alpha (callables, plus their values at r) quantify how much of
    the viscous dissipation survives the worst level excursion; eps1/eps2
    collect the forcing constants of the velocity-gradient estimate, and
    alpha_tilde is the closed-form floor of alpha(r) used by the
    general-friction feasibility check (requires omega1).
    """

    r: float
    R: float
    sigma: float
    p1_r: float
    p2_r: float
    theta_r: float
    eps1: float
    eps2: float
    phi_r: float
    alpha_r: float
    alpha_tilde: float | None
    Lam: Callable[[float], float]
    G1: Callable[[float], float]
    G2: Callable[[float], float]
    phi: Callable[[float], float]
    alpha: Callable[[float], float]


def lemma_constants(
    r: float,
    params: PhysicalParams,
    fparams: FunctionalParams,
    sigma: float,
    omega1: float | None = None,
) -> LemmaConstants:
    """Evaluate the constructive constants at sublevel radius r.

    Requires 0 <= r < R with p1(r) > 0.  ``omega1`` (a strict level floor
    below h*) is only needed for ``alpha_tilde``; without it that field is
    None.
    """
    R = radius_R(params, fparams)
    if not 0.0 <= r < R:
        raise InvariantError(f"radius r = {r} outside [0, R) with R = {R}")
    g, mu, L, m, H = params.g, params.mu, params.L, params.m, params.H_max
    delta, q, k = fparams.delta, fparams.q, fparams.k
    pi2 = math.pi**2

    p1_r, p2_r = level_bounds_p(r, params, fparams)
    if p1_r <= 0.0:
        raise InvariantError(f"p1(r) = {p1_r} <= 0 at r = {r}; constants undefined")
    theta_r = _theta_of_level(p1_r, params, fparams, sigma)

    def Lam(s: float) -> float:
        p1, p2 = level_bounds_p(s, params, fparams)
        return 0.5 * max(
            L**2 * (delta + 2.0) * p2 / (pi2 * p1),
            (delta + 1.0) * g * L**2 + 2.0 * mu**2 / p1,
            q * k**2,
            q,
        )

    def G2(s: float) -> float:
        p1, _ = level_bounds_p(s, params, fparams)
        return max(
            0.5 * (delta + 2.0) * H,
            0.5 * (delta + 1.0) * g,
            mu**2 / p1,
            1.5 * q * k**2,
            q,
        )

    def G1(s: float) -> float:
        p1, _ = level_bounds_p(s, params, fparams)
        return 2.0 / min(
            0.5 * delta * p1,
            g * (delta + 1.0),
            delta * mu**2 / (H * (delta + 2.0)),
            0.5 * q * k**2,
            q / 3.0,
        )

    def phi(s: float) -> float:
        p1_s, p2_s = level_bounds_p(s, params, fparams)
        return 2.0 * H * p1_s - p1_r * p2_s

    def alpha(s: float) -> float:
        p1_s, p2_s = level_bounds_p(s, params, fparams)
        return (
            min(
                0.25 * mu * g,
                q * k**3,
                q * (q * theta_r - k),
                (mu * delta / (4.0 * H)) * (2.0 * H - p1_r * p2_s / p1_s),
            )
            / Lam(s)
        )

    eps1 = (delta + 1.0) * g**2 * H / mu**2 + 3.0 * sigma**2 * L * (
        (delta + 1.0) * (delta + 2.0) * m + delta * q
    )
    eps2 = 100.0 * (delta + 1.0) ** 2 * R / (delta**2 * mu**3)

    alpha_tilde: float | None = None
    if omega1 is not None:
        if not 0.0 < omega1 < params.h_star:
            raise InvariantError(f"omega1 must lie in (0, h_star), got {omega1}")
        th = _theta_of_level(omega1, params, fparams, sigma)
        alpha_tilde = min(mu * g, 4.0 * q * k**3, 4.0 * q * (q * th - k), mu * delta) / (
            2.0
            * max(
                L**2 * (delta + 2.0) * H / (pi2 * omega1),
                (delta + 1.0) * g * L**2 + 2.0 * mu**2 / omega1,
                q * k**2,
                q,
            )
        )

    return LemmaConstants(
        r=r,
        R=R,
        sigma=sigma,
        p1_r=p1_r,
        p2_r=p2_r,
        theta_r=theta_r,
        eps1=eps1,
        eps2=eps2,
        phi_r=phi(r),
        alpha_r=alpha(r),
        alpha_tilde=alpha_tilde,
        Lam=Lam,
        G1=G1,
        G2=G2,
        phi=phi,
        alpha=alpha,
    )


# ---------------------------------------------------------------------------
# sublevel-set membership


def xu_membership_bound(r: float, fparams: FunctionalParams) -> float:
    """U-threshold of the augmented sublevel set at radius r: r + gamma r e^(beta r)."""
    return r + fparams.gamma * r * guarded_exp(fparams.beta * r)


def sup_velocity_bound(r: float, params: PhysicalParams, fparams: FunctionalParams) -> float:
    """Certified sup-norm velocity inside the augmented sublevel set:
    ||v||_inf <= sqrt((2 L / 3) (r + gamma r e^(beta r)))."""
    return math.sqrt(2.0 * params.L * xu_membership_bound(r, fparams) / 3.0)


def in_XV(
    tank: TankState,
    state: LiquidState,
    params: PhysicalParams,
    fparams: FunctionalParams,
    grid: Grid,
    r: float,
) -> bool:
    """Membership test V <= r for the plain sublevel set."""
    return clf_V(tank, state, params, fparams, grid) <= r


def in_XU(
    tank: TankState,
    state: LiquidState,
    params: PhysicalParams,
    fparams: FunctionalParams,
    grid: Grid,
    r: float,
) -> bool:
    """Membership test U <= r + gamma r e^(beta r) for the augmented set."""
    return functional_U(tank, state, params, fparams, grid) <= xu_membership_bound(r, fparams)


# ---------------------------------------------------------------------------
# report


@dataclass(frozen=True)
class LyapunovReport:
    """Snapshot of the whole tower at one state, plus set memberships.

    The membership flags are evaluated against the radius ``r`` passed at
    report time and are None when no radius was requested.  All values are
    discretely verified at the grid resolution.
    """

    E: float
    W: float
    V: float
    U: float
    p1_of_V: float
    p2_of_V: float
    R: float
    in_XV_r: bool | None
    in_XU_r: bool | None
    vx_l2: float

    def to_json_dict(self) -> dict:
        return {
            "e": self.E,
            "w": self.W,
            "v": self.V,
            "u": self.U,
            "p1_of_v": self.p1_of_V,
            "p2_of_v": self.p2_of_V,
            "r": self.R,
            "in_xv_r": self.in_XV_r,
            "in_xu_r": self.in_XU_r,
            "vx_l2": self.vx_l2,
        }


def lyapunov_report(
    tank: TankState,
    state: LiquidState,
    params: PhysicalParams,
    fparams: FunctionalParams,
    grid: Grid,
    r: float | None = None,
) -> LyapunovReport:
    """Evaluate E, W, V, U, the level bounds at V, and set memberships at r."""
    E = energy_E(state, params, grid)
    W = energy_W(state, params, grid)
    fp = fparams
    tank_part = 0.5 * fp.q * fp.k**2 * tank.xi**2 + 0.5 * fp.q * (tank.w + fp.k * tank.xi) ** 2
    V = fp.delta * E + W + tank_part
    vx2 = vx_l2_sq(state, grid)
    U = V + (0.5 * vx2 + fp.gamma * V) * guarded_exp(fp.beta * V)
    p1, p2 = level_bounds_p(V, params, fparams)
    in_v = None if r is None else bool(V <= r)
    in_u = None if r is None else bool(U <= xu_membership_bound(r, fparams))
    return LyapunovReport(
        E=E,
        W=W,
        V=V,
        U=U,
        p1_of_V=p1,
        p2_of_V=p2,
        R=radius_R(params, fparams),
        in_XV_r=in_v,
        in_XU_r=in_u,
        vx_l2=math.sqrt(vx2),
    )
