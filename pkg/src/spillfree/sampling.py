"""Random admissible states for property verification.

States are built from finite Fourier series that satisfy the mass and
boundary constraints exactly by construction:

    h = h* + sum_j a_j sin(2 pi j x / L) + b_j cos(2 pi j x / L)
    v = sum_j c_j sin(pi j x / L)

Full-period sines and cosines have zero mean on [0, L] and, on the closed
uniform grid, zero trapezoid sum to machine precision, so the mass
constraint holds without correction; the sine series for v vanishes at
both walls.  Positivity is guaranteed by drawing the level amplitudes with
sum_j (|a_j| + |b_j|) < 0.9 h*.
"""

from __future__ import annotations

import numpy as np

from .core import Grid, LiquidState, PhysicalParams, TankState
from .functionals import FunctionalParams, clf_V

__all__ = [
    "sample_state",
    "sample_state_in_sublevel",
    "sample_state_near_equilibrium",
    "scale_state",
]


def sample_state(
    rng: np.random.Generator,
    params: PhysicalParams,
    grid: Grid,
    *,
    modes: int = 4,
    level_fraction: float = 0.9,
    velocity_scale: float = 1.0,
    tank_scale: float = 1.0,
) -> tuple[TankState, LiquidState]:
    """Draw one admissible state with the Fourier construction above."""
    x = grid.nodes
    L, hs = params.L, params.h_star
    j = np.arange(1, modes + 1)
    a = rng.standard_normal(modes) / j
    b = rng.standard_normal(modes) / j
    total = np.abs(a).sum() + np.abs(b).sum()
    target = rng.uniform(0.1, 1.0) * level_fraction * hs
    if total > 0.0:
        a *= target / total
        b *= target / total
    c = velocity_scale * rng.standard_normal(modes) / j

    h = hs + np.zeros_like(x)
    v = np.zeros_like(x)
    for jj, aj, bj, cj in zip(j, a, b, c):
        h = h + aj * np.sin(2.0 * np.pi * jj * x / L) + bj * np.cos(2.0 * np.pi * jj * x / L)
        v = v + cj * np.sin(np.pi * jj * x / L)
    v[0] = 0.0
    v[-1] = 0.0
    tank = TankState(tank_scale * rng.standard_normal(), tank_scale * rng.standard_normal())
    return tank, LiquidState.from_samples(h, v, grid, params, project=True)


def scale_state(
    tank: TankState, state: LiquidState, params: PhysicalParams, factor: float
) -> tuple[TankState, LiquidState]:
    """Scale the deviation from equilibrium by ``factor`` (mass preserved)."""
    hs = params.h_star
    h = hs + factor * (state.h - hs)
    v = factor * state.v
    return TankState(factor * tank.xi, factor * tank.w), LiquidState(h, v)


def sample_state_in_sublevel(
    rng: np.random.Generator,
    params: PhysicalParams,
    fparams: FunctionalParams,
    grid: Grid,
    r: float,
    *,
    modes: int = 4,
    fraction: float | None = None,
) -> tuple[TankState, LiquidState]:
    """Draw a state and shrink its deviation until V lands at ``fraction * r``.

    V is not monotone in the scale factor in general (the level enters the
    kinetic weight), so the target crossing is located by plain bisection
    on [0, 1] starting from V(0) = 0.
    """
    frac = rng.uniform(0.05, 0.95) if fraction is None else fraction
    target = frac * r
    tank, state = sample_state(rng, params, grid, modes=modes)
    if clf_V(tank, state, params, fparams, grid) <= target:
        return tank, state
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        t_mid, s_mid = scale_state(tank, state, params, mid)
        if clf_V(t_mid, s_mid, params, fparams, grid) <= target:
            lo = mid
        else:
            hi = mid
    return scale_state(tank, state, params, lo)


def sample_state_near_equilibrium(
    rng: np.random.Generator,
    params: PhysicalParams,
    grid: Grid,
    eps: float,
    *,
    modes: int = 4,
    xi_scale: float = 1.0,
) -> tuple[TankState, LiquidState]:
    """Draw a state with ||(0, w, h - h*, v)||_X <= eps, any tank offset.

    The norm is exactly linear under joint scaling of (w, deviation, v), so
    one rescale lands it at a uniform fraction of eps.
    """
    from .core import central_derivative, l2_norm_sq

    tank, state = sample_state(rng, params, grid, modes=modes)
    dev = state.h - params.h_star
    hx = central_derivative(state.h, grid)
    norm = np.sqrt(
        tank.w**2 + l2_norm_sq(dev, grid) + l2_norm_sq(hx, grid) + l2_norm_sq(state.v, grid)
    )
    factor = rng.uniform(0.05, 1.0) * eps / norm if norm > 0.0 else 0.0
    h = params.h_star + factor * dev
    v = factor * state.v
    return TankState(xi_scale * rng.standard_normal(), factor * tank.w), LiquidState(h, v)
