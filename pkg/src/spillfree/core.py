"""Grids, physical parameters and discrete states for the tank-liquid system.

Everything downstream (energy functionals, feasibility certificates, the
time integrator) consumes the kernels defined here: trapezoid quadrature,
second-order differentiation, the state-space norm, spill margins and the
maps between the moving tank frame and the lab frame.

Conventions
-----------
* The tank-frame coordinate x runs over [0, L]; the walls sit at x = 0, L.
* Grids are uniform and collocated and include both wall nodes.
* Level samples h_i are strictly positive; velocity samples vanish at the
  walls (no slip against the moving tank).
* Integrals are trapezoid sums; derivatives are second-order central
  differences with second-order one-sided stencils at the walls.  All
  derived quantities therefore share a consistent O(dx^2) truncation error.
* All types are immutable values; the operations are pure functions, safe
  to evaluate concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "InvariantError",
    "PhysicalParams",
    "Grid",
    "LiquidState",
    "TankState",
    "LabFrameView",
    "SpillStatus",
    "MASS_RTOL_DEFAULT",
    "trapezoid_integral",
    "central_derivative",
    "l2_norm_sq",
    "liquid_mass",
    "project_mass",
    "state_norm_X",
    "to_lab_frame",
    "from_lab_frame",
    "spill_check",
    "equilibrium_state",
]

#: Default relative tolerance on the mass constraint for validated states.
MASS_RTOL_DEFAULT = 1e-10


class InvariantError(ValueError):
    """A parameter set or state violates one of its declared invariants."""


@dataclass(frozen=True)
class PhysicalParams:
    """Physical constants of the tank-liquid system.

    Attributes
    ----------
    g : gravitational acceleration [m/s^2]
    mu : kinematic viscosity [m^2/s]
    L : tank length [m]
    m : total liquid mass per unit width, the integral of h over [0, L] [m^2]
    H_max : wall height [m]

    The equilibrium level ``h_star = m / L`` is derived, never stored, and
    must sit strictly below the walls so the target state itself is
    spill-free.
    """

    g: float
    mu: float
    L: float
    m: float
    H_max: float

    def __post_init__(self) -> None:
        for name in ("g", "mu", "L", "m", "H_max"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise InvariantError(f"{name} must be finite and > 0, got {value!r}")
        if not self.h_star < self.H_max:
            raise InvariantError(
                f"equilibrium level h_star = m/L = {self.h_star} must lie strictly "
                f"below the wall height H_max = {self.H_max}"
            )

    @property
    def h_star(self) -> float:
        """Equilibrium level m / L [m], recomputed on every access."""
        return self.m / self.L


@dataclass(frozen=True)
class Grid:
    """Uniform collocated grid on [0, L] including both wall nodes."""

    n: int
    L: float
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.n < 8:
            raise InvariantError(f"grid needs at least 8 nodes, got {self.n}")
        if not (math.isfinite(self.L) and self.L > 0.0):
            raise InvariantError(f"domain length must be finite and > 0, got {self.L}")
        nodes = np.linspace(0.0, self.L, self.n)
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def dx(self) -> float:
        return self.L / (self.n - 1)


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class TankState:
    """Tank position error xi = a - a_star [m] and tank velocity w [m/s]."""

    xi: float
    w: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.xi) and math.isfinite(self.w)):
            raise InvariantError(f"tank state must be finite, got xi={self.xi}, w={self.w}")


@dataclass(frozen=True, eq=False)
class LiquidState:
    """Sampled level h_i > 0 and velocity v_i on the grid nodes.

    Constructing a ``LiquidState`` enforces the cheap pointwise invariants:
    matching lengths, finiteness, strict level positivity and the no-slip
    condition v = 0 at both walls.  The mass constraint needs grid and
    parameters; use :meth:`from_samples` to validate (or project onto) it.
    """

    h: np.ndarray
    v: np.ndarray

    def __post_init__(self) -> None:
        h = _readonly(self.h)
        v = _readonly(self.v)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "v", v)
        if h.ndim != 1 or v.shape != h.shape:
            raise InvariantError(f"h and v must be 1-d and equal length, got {h.shape} vs {v.shape}")
        if h.size < 2:
            raise InvariantError("state needs at least two nodes")
        if not (np.isfinite(h).all() and np.isfinite(v).all()):
            raise InvariantError("state contains non-finite samples")
        if not (h > 0.0).all():
            raise InvariantError(f"level must be strictly positive everywhere, min(h) = {h.min()}")
        if v[0] != 0.0 or v[-1] != 0.0:
            raise InvariantError(f"no-slip violated: v(0) = {v[0]}, v(L) = {v[-1]}")

    @classmethod
    def from_samples(
        cls,
        h: np.ndarray,
        v: np.ndarray,
        grid: Grid,
        params: PhysicalParams,
        *,
        project: bool = False,
        mass_rtol: float = MASS_RTOL_DEFAULT,
    ) -> "LiquidState":
        """Build a state whose trapezoid mass matches ``params.m``.

        With ``project=True`` the level profile is first re-anchored onto the
        mass constraint: the zero-mean part of h passes through unchanged and
        the mean is replaced by h_star (a uniform additive correction), which
        is exact and preserves the deviation shape.
        """
        h = np.asarray(h, dtype=float)
        if h.shape != grid.nodes.shape:
            raise InvariantError(f"expected {grid.n} samples, got {h.shape}")
        if project:
            h = project_mass(h, grid, params)
        mass = float(np.trapezoid(h, dx=grid.dx))
        if abs(mass - params.m) > mass_rtol * params.m:
            raise InvariantError(
                f"mass constraint violated: integral h dx = {mass}, expected {params.m} "
                f"(rtol {mass_rtol})"
            )
        return cls(h, v)


@dataclass(frozen=True, eq=False)
class LabFrameView:
    """Lab-frame picture: left-wall position a, level H and velocity u.

    Pointwise, H = h and u = v + w; the level is unchanged by the frame
    change while the liquid velocity picks up the tank velocity.
    """

    a: float
    H: np.ndarray
    u: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "H", _readonly(self.H))
        object.__setattr__(self, "u", _readonly(self.u))


@dataclass(frozen=True)
class SpillStatus:
    """Wall-spill verdict: only the two wall levels decide spilling.

    ``interior_above_walls`` flags interior nodes exceeding H_max; that does
    not violate the spill condition but is worth a warning diagnostic.
    """

    ok: bool
    margin: float
    interior_above_walls: bool


# ---------------------------------------------------------------------------
# kernels


def trapezoid_integral(f: np.ndarray, grid: Grid) -> float:
    """Trapezoid quadrature of node samples over [0, L].

    Exact for piecewise-linear integrands; O(dx^2) otherwise.
    """
    f = np.asarray(f, dtype=float)
    if f.shape != (grid.n,):
        raise InvariantError(f"expected {grid.n} samples, got shape {f.shape}")
    return float(np.trapezoid(f, dx=grid.dx))


def central_derivative(f: np.ndarray, grid: Grid) -> np.ndarray:
    """Second-order derivative: central stencils inside, one-sided at walls."""
    f = np.asarray(f, dtype=float)
    if f.shape != (grid.n,):
        raise InvariantError(f"expected {grid.n} samples, got shape {f.shape}")
    return np.gradient(f, grid.dx, edge_order=2)


def l2_norm_sq(f: np.ndarray, grid: Grid) -> float:
    """Squared L^2(0, L) norm by trapezoid quadrature."""
    f = np.asarray(f, dtype=float)
    return trapezoid_integral(f * f, grid)


def liquid_mass(state: LiquidState, grid: Grid) -> float:
    """Trapezoid mass, the discrete stand-in for the conserved integral of h."""
    return trapezoid_integral(state.h, grid)


def project_mass(h: np.ndarray, grid: Grid, params: PhysicalParams) -> np.ndarray:
    """Uniform additive correction putting the trapezoid mass exactly at m."""
    h = np.asarray(h, dtype=float)
    mass = float(np.trapezoid(h, dx=grid.dx))
    return h + (params.m - mass) / params.L


def state_norm_X(tank: TankState, state: LiquidState, params: PhysicalParams, grid: Grid) -> float:
    """State-space norm of the deviation from the target equilibrium.

    Returns (xi^2 + w^2 + ||h - h*||_2^2 + ||h_x||_2^2 + ||v||_2^2)^(1/2);
    the level deviation is taken against h_star internally, so callers pass
    the raw level samples.
    """
    dev = state.h - params.h_star
    hx = central_derivative(state.h, grid)
    total = (
        tank.xi**2
        + tank.w**2
        + l2_norm_sq(dev, grid)
        + l2_norm_sq(hx, grid)
        + l2_norm_sq(state.v, grid)
    )
    return math.sqrt(total)


def to_lab_frame(tank: TankState, state: LiquidState, a_star: float) -> LabFrameView:
    """Undo the moving-frame change: a = xi + a_star, H = h, u = v + w."""
    return LabFrameView(a=tank.xi + a_star, H=state.h, u=state.v + tank.w)


def from_lab_frame(view: LabFrameView, a_star: float) -> tuple[TankState, LiquidState]:
    """Recover the tank-frame state from a lab-frame view.

    The tank velocity is read off the wall value u(0) (no slip makes the
    liquid move with the wall there); u(L) must agree or the view is
    inconsistent and state construction fails.
    """
    w = float(view.u[0])
    tank = TankState(xi=view.a - a_star, w=w)
    return tank, LiquidState(view.H, view.u - w)


def spill_check(state: LiquidState, params: PhysicalParams) -> SpillStatus:
    """No-spill verdict: both wall levels must stay strictly below H_max."""
    wall_max = max(float(state.h[0]), float(state.h[-1]))
    interior = bool(state.h.size > 2 and float(state.h[1:-1].max()) >= params.H_max)
    return SpillStatus(
        ok=wall_max < params.H_max,
        margin=params.H_max - wall_max,
        interior_above_walls=interior,
    )


def equilibrium_state(params: PhysicalParams, grid: Grid) -> tuple[TankState, LiquidState]:
    """Target equilibrium: flat level h_star, fluid and tank at rest."""
    h = np.full(grid.n, params.h_star)
    v = np.zeros(grid.n)
    return TankState(0.0, 0.0), LiquidState(h, v)
