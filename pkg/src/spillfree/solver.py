"""Conservative method-of-lines integrator for the closed-loop tank-liquid system.

Semidiscretization on the collocated grid:

* continuity in flux form with face fluxes F_{i+1/2} = ((hv)_i + (hv)_{i+1})/2
  and F = 0 at both wall faces.  The wall nodes own half cells, so the
  trapezoid mass telescopes exactly and the discrete mass is conserved to
  roundoff no matter what the momentum equation does;
* momentum in velocity (nonconservative) form

      v_t = -v v_x - g h_x + mu h^-1 (h v_x)_x - h^-1 kappa(h, v) v + f

  at interior nodes, with v pinned to zero at the walls.  Smooth spill-free
  regimes with viscosity have no shocks, so the velocity form is safe and
  keeps the no-slip boundary trivial;
* the tank obeys xi' = w, w' = -f.

Time stepping is classical RK4 under the explicit stability bound
dt <= min(cfl_adv dx / max(|v| + sqrt(g h)), cfl_diff dx^2 / (2 mu)); the
control acceleration is state feedback and is re-evaluated at every RK
stage unless sample-and-hold is requested.  Central differencing is used
for advection (the physical viscosity provides the dissipation); a small
level floor detects, not masks, positivity loss.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import (
    Grid,
    InvariantError,
    LiquidState,
    PhysicalParams,
    TankState,
    spill_check,
    trapezoid_integral,
)
from .controller import Gains, feedback_f
from .friction import FrictionModel, K_bar
from .functionals import FunctionalParams, energy_E, energy_W, guarded_exp, vx_l2_sq

__all__ = [
    "SolverConfig",
    "Trajectory",
    "PositivityError",
    "semidiscrete_rhs",
    "stable_dt",
    "step",
    "simulate",
    "make_initial",
]

CSV_COLUMNS = [
    "t",
    "xi",
    "w",
    "V",
    "U",
    "E",
    "W_energy",
    "mass",
    "vx_l2",
    "spill_margin",
    "f",
    "K_bar",
]


class PositivityError(RuntimeError):
    """The level dropped to the positivity floor; the run cannot continue."""


@dataclass(frozen=True)
class SolverConfig:
    """Grid size, horizon, stability factors and sampling policy.

    ``output_every`` is the diagnostic sampling interval (None records every
    step); ``dt_max`` optionally caps the step below the stability bound,
    which keeps the step pattern uniform in convergence studies.
    ``spill_policy`` is "warn" (record the margin and continue) or "halt".
    With ``per_stage_control`` off, the feedback is frozen over each step
    (sample-and-hold) instead of being evaluated per RK stage.
    """

    n: int = 201
    t_end: float = 1.0
    cfl_adv: float = 0.5
    cfl_diff: float = 0.5
    output_every: float | None = None
    h_floor: float = 1e-9
    dt_max: float | None = None
    store_fields: bool = True
    spill_policy: str = "warn"
    per_stage_control: bool = True

    def __post_init__(self) -> None:
        if self.n < 16:
            raise InvariantError(f"solver grid needs n >= 16, got {self.n}")
        if not 0.0 < self.cfl_adv <= 1.0 or not 0.0 < self.cfl_diff <= 1.0:
            raise InvariantError("CFL safety factors must lie in (0, 1]")
        if self.h_floor < 0.0:
            raise InvariantError("h_floor must be >= 0")
        if self.t_end <= 0.0:
            raise InvariantError("t_end must be > 0")
        if self.spill_policy not in ("warn", "halt"):
            raise InvariantError(f"spill_policy must be 'warn' or 'halt', got {self.spill_policy!r}")


@dataclass
class Trajectory:
    """Sampled run: tank states, diagnostics, and optional field snapshots.

    Diagnostics are recomputable bitwise from the stored snapshots because
    they are produced by the same public functions at recording time.
    ``termination`` is "completed", "positivity", "nonfinite" or "spill".
    """

    times: np.ndarray
    tank_states: list[TankState]
    states: list[LiquidState] | None
    V: np.ndarray
    U: np.ndarray
    E: np.ndarray
    W_energy: np.ndarray
    mass: np.ndarray
    vx_l2: np.ndarray
    spill_margin: np.ndarray
    f: np.ndarray
    K_bar: np.ndarray
    termination: str
    message: str
    meta: dict = field(default_factory=dict)

    @property
    def xi(self) -> np.ndarray:
        return np.array([ts.xi for ts in self.tank_states])

    @property
    def w(self) -> np.ndarray:
        return np.array([ts.w for ts in self.tank_states])

    def to_csv(self, path: str | Path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for i, t in enumerate(self.times):
                writer.writerow(
                    [
                        repr(float(x))
                        for x in (
                            t,
                            self.tank_states[i].xi,
                            self.tank_states[i].w,
                            self.V[i],
                            self.U[i],
                            self.E[i],
                            self.W_energy[i],
                            self.mass[i],
                            self.vx_l2[i],
                            self.spill_margin[i],
                            self.f[i],
                            self.K_bar[i],
                        )
                    ]
                )

    def write_snapshots(self, directory: str | Path, grid: Grid) -> None:
        """One CSV per stored sample with columns x, h, v, named by index."""
        if self.states is None:
            raise InvariantError("trajectory was run with store_fields=False")
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for i, state in enumerate(self.states):
            with (directory / f"snapshot_{i:05d}.csv").open("w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["x", "h", "v"])
                for x, h, v in zip(grid.nodes, state.h, state.v):
                    writer.writerow([repr(float(x)), repr(float(h)), repr(float(v))])


# ---------------------------------------------------------------------------
# right-hand side


def _rhs_arrays(
    w: float,
    h: np.ndarray,
    v: np.ndarray,
    f_val: float,
    friction: FrictionModel,
    g: float,
    mu: float,
    dx: float,
) -> tuple[float, float, np.ndarray, np.ndarray]:
    hv = h * v
    flux = 0.5 * (hv[:-1] + hv[1:])  # interior faces; wall faces carry zero flux
    dh = np.empty_like(h)
    dh[1:-1] = -(flux[1:] - flux[:-1]) / dx
    dh[0] = -flux[0] / (0.5 * dx)  # wall nodes own half cells
    dh[-1] = flux[-1] / (0.5 * dx)

    dv = np.zeros_like(v)
    inv2dx = 1.0 / (2.0 * dx)
    vx = (v[2:] - v[:-2]) * inv2dx
    hx = (h[2:] - h[:-2]) * inv2dx
    h_face = 0.5 * (h[:-1] + h[1:])
    visc = (h_face[1:] * (v[2:] - v[1:-1]) - h_face[:-1] * (v[1:-1] - v[:-2])) / dx**2
    hi = h[1:-1]
    kap = friction.kappa_unchecked(hi, v[1:-1])
    dv[1:-1] = -v[1:-1] * vx - g * hx + (mu * visc - kap * v[1:-1]) / hi + f_val
    return w, -f_val, dh, dv


def semidiscrete_rhs(
    tank: TankState,
    state: LiquidState,
    f: float,
    friction: FrictionModel,
    params: PhysicalParams,
    grid: Grid,
) -> tuple[float, float, np.ndarray, np.ndarray]:
    """Time derivatives (dxi/dt, dw/dt, dh/dt, dv/dt) of the coupled system.

    The level equation is the zero-wall-flux form described in the module
    docstring; the velocity equation is the nonconservative form with the
    viscous term discretized conservatively through face-averaged levels.
    Boundary velocity nodes report zero rate (v is pinned there).
    """
    if not math.isfinite(f):
        raise InvariantError(f"control value must be finite, got {f}")
    return _rhs_arrays(tank.w, state.h, state.v, f, friction, params.g, params.mu, grid.dx)


def _stable_dt_arrays(
    h: np.ndarray, v: np.ndarray, g: float, mu: float, dx: float, cfl_adv: float, cfl_diff: float
) -> float:
    wave = float(np.max(np.abs(v) + np.sqrt(g * h)))
    return min(cfl_adv * dx / wave, cfl_diff * dx**2 / (2.0 * mu))


def stable_dt(
    state: LiquidState, params: PhysicalParams, grid: Grid, config: SolverConfig
) -> float:
    """Explicit stability bound: advective and diffusive CFL, whichever binds."""
    return _stable_dt_arrays(
        state.h, state.v, params.g, params.mu, grid.dx, config.cfl_adv, config.cfl_diff
    )


def _control(
    xi: float,
    w: float,
    h: np.ndarray,
    v: np.ndarray,
    gains: Gains | None,
    params: PhysicalParams,
    grid: Grid,
) -> float:
    if gains is None:
        return 0.0
    hv = h * v
    momentum = grid.dx * (hv.sum() - 0.5 * (hv[0] + hv[-1]))
    return -gains.sigma * (
        (gains.delta + 1.0) * momentum
        + params.mu * float(h[-1] - h[0])
        - gains.q * (w + gains.k * xi)
    )


def _rk4_step(
    xi: float,
    w: float,
    h: np.ndarray,
    v: np.ndarray,
    friction: FrictionModel,
    gains: Gains | None,
    params: PhysicalParams,
    grid: Grid,
    dt: float,
    per_stage_control: bool = True,
) -> tuple[float, float, np.ndarray, np.ndarray, float]:
    """One classical RK4 step; returns the new state and the step-start control."""
    g, mu, dx = params.g, params.mu, grid.dx
    f0 = _control(xi, w, h, v, gains, params, grid)

    def stage(xs, ws, hs, vs):
        fs = _control(xs, ws, hs, vs, gains, params, grid) if per_stage_control else f0
        return _rhs_arrays(ws, hs, vs, fs, friction, g, mu, dx)

    k1 = stage(xi, w, h, v)
    k2 = stage(xi + 0.5 * dt * k1[0], w + 0.5 * dt * k1[1], h + 0.5 * dt * k1[2], v + 0.5 * dt * k1[3])
    k3 = stage(xi + 0.5 * dt * k2[0], w + 0.5 * dt * k2[1], h + 0.5 * dt * k2[2], v + 0.5 * dt * k2[3])
    k4 = stage(xi + dt * k3[0], w + dt * k3[1], h + dt * k3[2], v + dt * k3[3])
    sixth = dt / 6.0
    xi_n = xi + sixth * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
    w_n = w + sixth * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
    h_n = h + sixth * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
    v_n = v + sixth * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3])
    v_n[0] = 0.0
    v_n[-1] = 0.0
    return xi_n, w_n, h_n, v_n, f0


def step(
    tank: TankState,
    state: LiquidState,
    friction: FrictionModel,
    gains: Gains | None,
    params: PhysicalParams,
    grid: Grid,
    dt: float,
) -> tuple[TankState, LiquidState]:
    """Advance one RK4 step of the coupled system.

    The feedback is re-evaluated at each stage from that stage's state (the
    law is state feedback, hence part of the vector field); ``gains=None``
    runs open loop with f = 0.  Wall velocities are re-pinned to zero after
    the step and the flux-form continuity keeps the trapezoid mass drift at
    roundoff level.
    """
    xi, w, h, v, _ = _rk4_step(
        tank.xi, tank.w, state.h, state.v, friction, gains, params, grid, dt
    )
    if not (np.isfinite(h).all() and np.isfinite(v).all() and math.isfinite(xi) and math.isfinite(w)):
        raise InvariantError("step produced non-finite values")
    if h.min() <= 0.0:
        raise PositivityError(f"level positivity lost: min(h) = {h.min()}")
    return TankState(xi, w), LiquidState(h, v)


# ---------------------------------------------------------------------------
# full simulation


def simulate(
    tank0: TankState,
    state0: LiquidState,
    gains: Gains | None,
    friction: FrictionModel,
    params: PhysicalParams,
    config: SolverConfig,
    *,
    open_loop: bool = False,
    diagnostics_fparams: FunctionalParams | None = None,
) -> Trajectory:
    """Integrate to t_end with adaptive dt, sampling at the output instants.

    Gain feasibility is recommended but not required: ``open_loop=True``
    forces f = 0 while keeping the gains' weights for the Lyapunov
    diagnostics, and a failing gain set is a legitimate experiment.  The
    run terminates early with a typed reason on positivity failure,
    non-finite state, or (under the "halt" policy) wall spill; early
    termination is a result variant, not an exception.
    """
    grid = Grid(config.n, params.L)
    if state0.h.shape != (config.n,):
        raise InvariantError(
            f"initial state has {state0.h.shape[0]} nodes but config.n = {config.n}"
        )
    if gains is not None:
        fp = gains.fparams
    elif diagnostics_fparams is not None:
        fp = diagnostics_fparams
    else:
        fp = FunctionalParams(delta=1.0, q=1.0, k=1.0, beta=1.0, gamma=1.0)
    control_gains = None if open_loop else gains

    xi, w = tank0.xi, tank0.w
    h = state0.h.copy()
    v = state0.v.copy()

    times: list[float] = []
    tanks: list[TankState] = []
    snaps: list[LiquidState] | None = [] if config.store_fields else None
    diag: dict[str, list[float]] = {key: [] for key in CSV_COLUMNS[3:]}

    def record(t: float) -> None:
        tank_s = TankState(xi, w)
        state_s = LiquidState(h, v)
        times.append(t)
        tanks.append(tank_s)
        if snaps is not None:
            snaps.append(state_s)
        E = energy_E(state_s, params, grid)
        W = energy_W(state_s, params, grid)
        tank_part = 0.5 * fp.q * fp.k**2 * xi**2 + 0.5 * fp.q * (w + fp.k * xi) ** 2
        V = fp.delta * E + W + tank_part
        vx2 = vx_l2_sq(state_s, grid)
        U = V + (0.5 * vx2 + fp.gamma * V) * guarded_exp(fp.beta * V)
        diag["V"].append(V)
        diag["U"].append(U)
        diag["E"].append(E)
        diag["W_energy"].append(W)
        diag["mass"].append(trapezoid_integral(state_s.h, grid))
        diag["vx_l2"].append(math.sqrt(vx2))
        diag["spill_margin"].append(spill_check(state_s, params).margin)
        if control_gains is not None:
            diag["f"].append(feedback_f(tank_s, state_s, control_gains, params, grid))
        else:
            diag["f"].append(0.0)
        diag["K_bar"].append(K_bar(friction, state_s))

    termination = "completed"
    message = ""
    dt_max_used = 0.0
    out_every = config.output_every
    next_output = out_every if out_every is not None else None
    t = 0.0
    record(t)
    tiny = 1e-12 * config.t_end
    while t < config.t_end - tiny:
        dt = _stable_dt_arrays(h, v, params.g, params.mu, grid.dx, config.cfl_adv, config.cfl_diff)
        if config.dt_max is not None:
            dt = min(dt, config.dt_max)
        if next_output is not None and next_output - t > tiny:
            dt = min(dt, next_output - t)
        dt = min(dt, config.t_end - t)
        xi, w, h, v, _ = _rk4_step(
            xi, w, h, v, friction, control_gains, params, grid, dt,
            per_stage_control=config.per_stage_control,
        )
        t += dt
        dt_max_used = max(dt_max_used, dt)

        # a broken state cannot be recorded; the last good sample stands
        hmin = h.min()
        if not hmin > config.h_floor:  # also catches NaN
            if np.isfinite(h).all() and np.isfinite(v).all():
                termination, message = "positivity", f"min(h) = {hmin} at t = {t}"
            else:
                termination, message = "nonfinite", f"non-finite state at t = {t}"
            break
        if not (math.isfinite(xi) and math.isfinite(w) and np.isfinite(v).all()):
            termination, message = "nonfinite", f"non-finite state at t = {t}"
            break

        at_output = next_output is None or t >= next_output - tiny
        if at_output:
            record(t)
            if next_output is not None:
                while next_output <= t + tiny:
                    next_output += out_every
            if diag["spill_margin"][-1] <= 0.0 and config.spill_policy == "halt":
                termination, message = "spill", f"wall level reached H_max at t = {t}"
                break
    else:
        if next_output is not None and times[-1] < t - tiny:
            record(t)

    return Trajectory(
        times=np.array(times),
        tank_states=tanks,
        states=snaps,
        V=np.array(diag["V"]),
        U=np.array(diag["U"]),
        E=np.array(diag["E"]),
        W_energy=np.array(diag["W_energy"]),
        mass=np.array(diag["mass"]),
        vx_l2=np.array(diag["vx_l2"]),
        spill_margin=np.array(diag["spill_margin"]),
        f=np.array(diag["f"]),
        K_bar=np.array(diag["K_bar"]),
        termination=termination,
        message=message,
        meta={
            "n": config.n,
            "dt_max_used": dt_max_used,
            "output_every": out_every,
            "open_loop": open_loop,
        },
    )


# ---------------------------------------------------------------------------
# initial conditions


def make_initial(
    kind: str,
    params: PhysicalParams,
    grid: Grid,
    *,
    amplitude: float = 0.0,
    velocity: float = 0.0,
    mode: int = 1,
    xi0: float = 0.0,
    w0: float = 0.0,
) -> tuple[TankState, LiquidState]:
    """Named initial-condition families, mass- and boundary-exact by construction.

    "tilt"      h = h* + amplitude (x - L/2), fluid at rest (the odd part
                integrates to zero, so the trapezoid mass is exact);
    "sloshing"  h = h* + amplitude cos(mode pi x / L) (zero mean for every
                mode >= 1), v = velocity sin(mode pi x / L);
    "offset"    equilibrium fluid with tank offset xi0 and velocity w0;
                zero offsets give the exact equilibrium.
    """
    x = grid.nodes
    hs = params.h_star
    if kind == "tilt":
        h = hs + amplitude * (x - 0.5 * params.L)
        v = np.zeros(grid.n)
        tank = TankState(xi0, w0)
    elif kind == "sloshing":
        if mode < 1:
            raise InvariantError(f"sloshing mode must be >= 1, got {mode}")
        h = hs + amplitude * np.cos(mode * np.pi * x / params.L)
        v = velocity * np.sin(mode * np.pi * x / params.L)
        v[0] = 0.0
        v[-1] = 0.0
        tank = TankState(xi0, w0)
    elif kind == "offset":
        h = np.full(grid.n, hs)
        v = np.zeros(grid.n)
        tank = TankState(xi0, w0)
    else:
        raise InvariantError(f"unknown initial-condition kind {kind!r}")
    if h.min() <= 0.0:
        raise InvariantError(f"amplitude {amplitude} drives the level non-positive")
    return tank, LiquidState.from_samples(h, v, grid, params)
