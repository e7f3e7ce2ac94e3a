"""Empirical wall-friction models and the bound functions the certificates need.

The friction coefficient kappa(h, v) >= 0 multiplies the velocity in the
momentum sink -kappa v.  Its exact form is uncertain; the built-in variants
cover the relations used across the literature:

* ``Frictionless``             kappa = 0
* ``ConstAbsV(c_f)``           kappa = c_f |v|
* ``LinearLevel(r0, r1)``      kappa = r0 + r1 h |v|
* ``ChannelWidth(r, b)``       kappa = r h^(-1/3) (b + 2h)^(4/3) |v|
* ``VelocityIndependent(c, mu)``   kappa = 3 mu c / (3 mu + 4 c h)
* ``BoundedGeneric(bound, fn)``    any user relation with kappa <= bound

Two bound notions feed the feasibility checks:

* the velocity-independent envelope K(omega) of h^-2 kappa over levels
  above omega and *all* velocities — exists only for models whose kappa is
  bounded in v (the special-case hypothesis), and
* the box maximum K_tilde of h^-2 kappa over levels in [omega1, H_max] and
  speeds up to omega2 — always finite, used by the general certificate.

Velocity-dependent unbounded models honestly report "no envelope" instead
of being silently capped; they remain certifiable through K_tilde.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import InvariantError, LiquidState, PhysicalParams

__all__ = [
    "FrictionModel",
    "Frictionless",
    "ConstAbsV",
    "LinearLevel",
    "ChannelWidth",
    "VelocityIndependent",
    "BoundedGeneric",
    "kappa",
    "assumption_H_bound",
    "K_tilde",
    "K_bar",
    "friction_from_dict",
]


class FrictionModel:
    """Base class: a nonnegative coefficient field kappa(h, v) on (0, inf) x R."""

    def kappa(self, h, v):
        raise NotImplementedError

    def kappa_unchecked(self, h, v):
        """Hot-path evaluation: assumes h > 0 and matching array shapes.

        May return a scalar 0.0 (frictionless) or an array broadcastable
        against v; the solver relies on this skipping the domain checks.
        """
        return self.kappa(h, v)

    def envelope(self, omega: float) -> float | None:
        """Velocity-independent bound K(omega) on h^-2 kappa for h >= omega,
        or None when no such bound exists (kappa unbounded in v)."""
        return None

    def box_max(self, omega1: float, omega2: float, H_max: float) -> float:
        """Maximum of h^-2 kappa over [omega1, H_max] x [-omega2, omega2].

        The default is a dense 401 x 401 grid scan refined coordinate-wise
        by golden-section around the best cell; analytic variants override
        it with the exact monotone-corner value.
        """
        return _grid_box_max(self.kappa, omega1, omega2, H_max)

    def to_dict(self) -> dict:
        raise NotImplementedError


def _check_level(h) -> None:
    if np.any(np.asarray(h) <= 0.0):
        raise InvariantError("friction coefficient is only defined for levels h > 0")


@dataclass(frozen=True)
class Frictionless(FrictionModel):
    """kappa identically zero."""

    def kappa(self, h, v):
        _check_level(h)
        return np.zeros(np.broadcast(h, v).shape)

    def kappa_unchecked(self, h, v):
        return 0.0

    def envelope(self, omega: float) -> float:
        return 0.0

    def box_max(self, omega1: float, omega2: float, H_max: float) -> float:
        return 0.0

    def to_dict(self) -> dict:
        return {"type": "none"}


@dataclass(frozen=True)
class ConstAbsV(FrictionModel):
    """kappa = c_f |v|."""

    c_f: float

    def __post_init__(self) -> None:
        if self.c_f < 0.0:
            raise InvariantError(f"c_f must be >= 0, got {self.c_f}")

    def kappa(self, h, v):
        _check_level(h)
        return self.c_f * np.abs(v) * np.ones(np.broadcast(h, v).shape)

    def kappa_unchecked(self, h, v):
        return self.c_f * np.abs(v)

    def box_max(self, omega1: float, omega2: float, H_max: float) -> float:
        # h^-2 c_f |v| decreases in h, increases in |v|: corner (omega1, omega2).
        return self.c_f * omega2 / omega1**2

    def to_dict(self) -> dict:
        return {"type": "const_abs_v", "c_f": self.c_f}


@dataclass(frozen=True)
class LinearLevel(FrictionModel):
    """kappa = r0 + r1 h |v|."""

    r0: float
    r1: float

    def __post_init__(self) -> None:
        if self.r0 < 0.0 or self.r1 < 0.0:
            raise InvariantError("r0 and r1 must be >= 0")

    def kappa(self, h, v):
        _check_level(h)
        return self.r0 + self.r1 * np.asarray(h) * np.abs(v)

    def kappa_unchecked(self, h, v):
        return self.r0 + self.r1 * h * np.abs(v)

    def box_max(self, omega1: float, omega2: float, H_max: float) -> float:
        # r0 h^-2 + r1 |v| / h: both terms decrease in h, grow with |v|.
        return self.r0 / omega1**2 + self.r1 * omega2 / omega1

    def to_dict(self) -> dict:
        return {"type": "linear_level", "r0": self.r0, "r1": self.r1}


@dataclass(frozen=True)
class ChannelWidth(FrictionModel):
    """kappa = r h^(-1/3) (b + 2h)^(4/3) |v| for a channel of width b."""

    r: float
    b: float

    def __post_init__(self) -> None:
        if self.r < 0.0:
            raise InvariantError(f"r must be >= 0, got {self.r}")
        if self.b <= 0.0:
            raise InvariantError(f"channel width b must be > 0, got {self.b}")

    def kappa(self, h, v):
        _check_level(h)
        h = np.asarray(h, dtype=float)
        return self.r * h ** (-1.0 / 3.0) * (self.b + 2.0 * h) ** (4.0 / 3.0) * np.abs(v)

    def kappa_unchecked(self, h, v):
        return self.r * h ** (-1.0 / 3.0) * (self.b + 2.0 * h) ** (4.0 / 3.0) * np.abs(v)

    def box_max(self, omega1: float, omega2: float, H_max: float) -> float:
        # h^-7/3 (b + 2h)^(4/3) has log-derivative -(7b + 6h)/(3h(b + 2h)) < 0,
        # so the maximum again sits at the (omega1, omega2) corner.
        return self.r * omega2 * omega1 ** (-7.0 / 3.0) * (self.b + 2.0 * omega1) ** (4.0 / 3.0)

    def to_dict(self) -> dict:
        return {"type": "channel_width", "r": self.r, "b": self.b}


@dataclass(frozen=True)
class VelocityIndependent(FrictionModel):
    """Laminar-derived relation kappa(h) = 3 mu c / (3 mu + 4 c h).

    Tends to c as h -> 0+ and decays like 3 mu / (4 h) for deep liquid.
    Needs the fluid viscosity, so it is constructed with the mu it will be
    simulated with.
    """

    c: float
    mu: float

    def __post_init__(self) -> None:
        if self.c <= 0.0 or self.mu <= 0.0:
            raise InvariantError("c and mu must be > 0")

    def kappa(self, h, v):
        _check_level(h)
        h = np.asarray(h, dtype=float)
        return 3.0 * self.mu * self.c / (3.0 * self.mu + 4.0 * self.c * h) * np.ones(np.broadcast(h, v).shape)

    def kappa_unchecked(self, h, v):
        return 3.0 * self.mu * self.c / (3.0 * self.mu + 4.0 * self.c * h)

    def envelope(self, omega: float) -> float:
        return 3.0 * self.mu * self.c / (omega**2 * (3.0 * self.mu + 4.0 * self.c * omega))

    def box_max(self, omega1: float, omega2: float, H_max: float) -> float:
        # h^2 (3 mu + 4 c h) is increasing, so the max sits at h = omega1.
        return self.envelope(omega1)

    def to_dict(self) -> dict:
        return {"type": "velocity_independent", "c": self.c, "mu": self.mu}


@dataclass(frozen=True)
class BoundedGeneric(FrictionModel):
    """User-supplied kappa known to satisfy 0 <= kappa(h, v) <= bound everywhere.

    With no function given, kappa is the constant ``bound``.  The global
    bound yields the envelope K(omega) = bound / omega^2; the box maximum
    falls back to the grid + golden-section scan since nothing is known
    about monotonicity.
    """

    bound: float
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None

    def __post_init__(self) -> None:
        if self.bound <= 0.0:
            raise InvariantError(f"bound must be > 0, got {self.bound}")

    def kappa(self, h, v):
        _check_level(h)
        if self.fn is None:
            return self.bound * np.ones(np.broadcast(h, v).shape)
        return np.asarray(self.fn(np.asarray(h, dtype=float), np.asarray(v, dtype=float)), dtype=float)

    def kappa_unchecked(self, h, v):
        if self.fn is None:
            return self.bound
        return np.asarray(self.fn(h, v), dtype=float)

    def envelope(self, omega: float) -> float:
        return self.bound / omega**2

    def box_max(self, omega1: float, omega2: float, H_max: float) -> float:
        if self.fn is None:
            return self.bound / omega1**2
        return _grid_box_max(self.kappa, omega1, omega2, H_max)

    def to_dict(self) -> dict:
        return {"type": "bounded", "bound": self.bound}


# ---------------------------------------------------------------------------
# generic box maximum: dense scan plus coordinate-wise golden-section polish

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_max(f: Callable[[float], float], lo: float, hi: float, tol: float) -> tuple[float, float]:
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def _grid_box_max(
    kappa_fn: Callable, omega1: float, omega2: float, H_max: float, resolution: int = 401
) -> float:
    hs = np.linspace(omega1, H_max, resolution)
    vs = np.linspace(-omega2, omega2, resolution)
    H, V = np.meshgrid(hs, vs, indexing="ij")
    values = np.asarray(kappa_fn(H, V)) / H**2
    i, j = np.unravel_index(int(np.argmax(values)), values.shape)
    best = float(values[i, j])

    def slice_h(h: float) -> float:
        return float(kappa_fn(np.array([h]), np.array([vs[j]]))[0]) / h**2

    def slice_v(v: float) -> float:
        return float(kappa_fn(np.array([hs[i]]), np.array([v]))[0]) / hs[i] ** 2

    h_lo, h_hi = hs[max(i - 1, 0)], hs[min(i + 1, resolution - 1)]
    v_lo, v_hi = vs[max(j - 1, 0)], vs[min(j + 1, resolution - 1)]
    for f, lo, hi in ((slice_h, h_lo, h_hi), (slice_v, v_lo, v_hi)):
        if hi > lo:
            _, val = _golden_max(f, lo, hi, 1e-10 * max(1.0, hi - lo))
            best = max(best, val)
    return best


# ---------------------------------------------------------------------------
# operation-style entry points


def kappa(model: FrictionModel, h, v):
    """Evaluate the selected friction relation; h must be positive."""
    return model.kappa(h, v)


def assumption_H_bound(
    model: FrictionModel, omega: float, params: PhysicalParams
) -> float | None:
    """Velocity-independent envelope K(omega) on h^-2 kappa for levels above
    omega, valid for all velocities; None when the model admits no such bound.

    omega must lie in (0, h_star].  K is non-increasing in omega for every
    model that has it.
    """
    if not 0.0 < omega <= params.h_star:
        raise InvariantError(f"omega must lie in (0, h_star], got {omega}")
    return model.envelope(omega)


def K_tilde(
    model: FrictionModel, omega1: float, omega2: float, params: PhysicalParams
) -> float:
    """Box maximum of h^-2 kappa over levels [omega1, H_max], speeds [0, omega2]."""
    if not 0.0 < omega1 < params.h_star:
        raise InvariantError(f"omega1 must lie in (0, h_star), got {omega1}")
    if omega2 <= 0.0:
        raise InvariantError(f"omega2 must be > 0, got {omega2}")
    return model.box_max(omega1, omega2, params.H_max)


def K_bar(model: FrictionModel, state: LiquidState) -> float:
    """Nodewise maximum of h^-2 kappa(h, v) along a state."""
    values = np.asarray(model.kappa(state.h, state.v)) / state.h**2
    return float(values.max())


_PARSERS = {
    "none": lambda d, mu: Frictionless(),
    "const_abs_v": lambda d, mu: ConstAbsV(c_f=float(d["c_f"])),
    "linear_level": lambda d, mu: LinearLevel(r0=float(d["r0"]), r1=float(d["r1"])),
    "channel_width": lambda d, mu: ChannelWidth(r=float(d["r"]), b=float(d["b"])),
    "velocity_independent": lambda d, mu: VelocityIndependent(
        c=float(d["c"]), mu=float(d.get("mu", mu))
    ),
    "bounded": lambda d, mu: BoundedGeneric(bound=float(d["bound"])),
}


def friction_from_dict(spec: dict, mu: float) -> FrictionModel:
    """Build a friction model from a config mapping.

    ``mu`` supplies the fluid viscosity for the velocity-independent
    relation unless the mapping overrides it.
    """
    kind = spec.get("type")
    if kind not in _PARSERS:
        raise InvariantError(
            f"unknown friction type {kind!r}; expected one of {sorted(_PARSERS)}"
        )
    return _PARSERS[kind](spec, mu)
