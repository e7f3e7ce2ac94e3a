"""Experiment configuration: TOML (or JSON) in, validated objects out.

The file is flat-sectioned; unknown keys are rejected so typos surface as
config errors.  Grammar (TOML shown; the same structure as a JSON object
is accepted):

    [physical]
    g = 9.81            # gravity [m/s^2]
    mu = 0.1            # kinematic viscosity [m^2/s]
    L = 1.0             # tank length [m]
    m = 0.5             # liquid mass per unit width [m^2]
    H_max = 1.0         # wall height [m]

    [friction]
    type = "velocity_independent"   # none | const_abs_v | linear_level |
                                    # channel_width | velocity_independent | bounded
    c = 0.05                        # variant parameters by name

    [gains]
    mode = "suggest"        # suggest | explicit
    theorem = "theorem1"    # certificate: theorem1 | theorem2 | none
    omega = 0.25            # theorem1 level floor target
    # omega1 = 0.25         # theorem2 targets
    # omega2 = 2.0
    # sigma = 1.0  q = 1.0  margin = 0.25      (suggest hints)
    # sigma/k/q/delta/beta/gamma, r = ...       (explicit mode)

    [initial]
    kind = "sloshing"       # tilt | sloshing | offset
    amplitude = 0.01
    velocity = 0.0
    mode = 1
    xi0 = 0.0
    w0 = 0.0
    # sublevel_fraction = 0.8   # rescale so the certified functional starts
    #                           # at this fraction of its sublevel threshold

    [solver]
    n = 201
    t_end = 4.0
    output_every = 0.01
    # cfl_adv = 0.5  cfl_diff = 0.5  h_floor = 1e-9  spill_policy = "warn"
    # store_fields = true  dt_max = ...

    [control]
    enabled = true

    [verify]
    checks = ["lemma1", "prop1", "prop2", "lemma2", "decay"]
    samples = 1000
    seed = 42

    [output]
    dir = "out"
    fields = false          # also dump per-sample field snapshots
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

try:  # 3.11+
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .controller import Gains
from .core import InvariantError, PhysicalParams
from .friction import FrictionModel, friction_from_dict
from .solver import SolverConfig

__all__ = ["ConfigError", "ExperimentConfig", "load_config"]

KNOWN_CHECKS = ("lemma1", "prop1", "prop2", "lemma2", "decay")


class ConfigError(ValueError):
    """The configuration is unparseable or internally inconsistent."""


@dataclass
class GainSpec:
    mode: str = "suggest"
    theorem: str | None = "theorem1"
    omega: float | None = None
    omega1: float | None = None
    omega2: float | None = None
    sigma: float = 1.0
    q: float = 1.0
    margin: float = 0.25
    explicit: Gains | None = None
    r: float | None = None


@dataclass
class InitialSpec:
    kind: str = "sloshing"
    amplitude: float = 0.0
    velocity: float = 0.0
    mode: int = 1
    xi0: float = 0.0
    w0: float = 0.0
    sublevel_fraction: float | None = None


@dataclass
class VerifySpec:
    checks: tuple[str, ...] = ()
    samples: int = 1000
    seed: int = 42


@dataclass
class ExperimentConfig:
    physical: PhysicalParams
    friction: FrictionModel
    gains: GainSpec
    initial: InitialSpec
    solver: SolverConfig
    verify: VerifySpec
    out_dir: Path = Path("out")
    dump_fields: bool = False
    control_enabled: bool = True
    raw: dict = field(default_factory=dict)


def _section(data: dict, name: str, allowed: set[str]) -> dict:
    sec = data.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"section [{name}] must be a table/object")
    unknown = set(sec) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(unknown)}")
    return sec


def config_from_dict(data: dict) -> ExperimentConfig:
    phys_d = _section(data, "physical", {"g", "mu", "L", "m", "H_max"})
    missing = {"g", "mu", "L", "m", "H_max"} - set(phys_d)
    if missing:
        raise ConfigError(f"[physical] is missing {sorted(missing)}")
    try:
        physical = PhysicalParams(**{k: float(v) for k, v in phys_d.items()})
    except InvariantError as exc:
        raise ConfigError(f"[physical] invalid: {exc}") from exc

    fric_d = _section(data, "friction", {"type", "c_f", "r0", "r1", "r", "b", "c", "mu", "bound"})
    if not fric_d:
        fric_d = {"type": "none"}
    try:
        friction = friction_from_dict(fric_d, physical.mu)
    except (InvariantError, KeyError) as exc:
        raise ConfigError(f"[friction] invalid: {exc}") from exc

    gain_keys = {
        "mode", "theorem", "omega", "omega1", "omega2",
        "sigma", "k", "q", "delta", "beta", "gamma", "margin", "r",
    }
    gd = _section(data, "gains", gain_keys)
    mode = gd.get("mode", "suggest")
    if mode not in ("suggest", "explicit"):
        raise ConfigError(f"gains.mode must be 'suggest' or 'explicit', got {mode!r}")
    theorem = gd.get("theorem", "theorem1" if mode == "suggest" else None)
    if theorem in ("none", ""):
        theorem = None
    if theorem not in (None, "theorem1", "theorem2"):
        raise ConfigError(f"gains.theorem must be theorem1, theorem2 or none, got {theorem!r}")
    explicit = None
    if mode == "explicit":
        needed = {"sigma", "k", "q", "delta", "beta", "gamma"}
        missing = needed - set(gd)
        if missing:
            raise ConfigError(f"explicit gains missing {sorted(missing)}")
        try:
            explicit = Gains(**{k: float(gd[k]) for k in needed})
        except InvariantError as exc:
            raise ConfigError(f"[gains] invalid: {exc}") from exc
        if theorem is not None and gd.get("r") is None:
            raise ConfigError("explicit gains with a requested certificate need a radius r")
    else:
        if theorem == "theorem1" and gd.get("omega") is None:
            raise ConfigError("gain suggestion for theorem1 needs a level floor omega")
        if theorem == "theorem2" and (gd.get("omega1") is None or gd.get("omega2") is None):
            raise ConfigError("gain suggestion for theorem2 needs targets omega1 and omega2")
        if theorem is None:
            raise ConfigError("gains.mode = 'suggest' needs a target certificate theorem")
    gains = GainSpec(
        mode=mode,
        theorem=theorem,
        omega=None if gd.get("omega") is None else float(gd["omega"]),
        omega1=None if gd.get("omega1") is None else float(gd["omega1"]),
        omega2=None if gd.get("omega2") is None else float(gd["omega2"]),
        sigma=float(gd.get("sigma", 1.0)),
        q=float(gd.get("q", 1.0)),
        margin=float(gd.get("margin", 0.25)),
        explicit=explicit,
        r=None if gd.get("r") is None else float(gd["r"]),
    )
    init_d = _section(
        data, "initial",
        {"kind", "amplitude", "velocity", "mode", "xi0", "w0", "sublevel_fraction"},
    )
    initial = InitialSpec(
        kind=init_d.get("kind", "sloshing"),
        amplitude=float(init_d.get("amplitude", 0.0)),
        velocity=float(init_d.get("velocity", 0.0)),
        mode=int(init_d.get("mode", 1)),
        xi0=float(init_d.get("xi0", 0.0)),
        w0=float(init_d.get("w0", 0.0)),
        sublevel_fraction=(
            None
            if init_d.get("sublevel_fraction") is None
            else float(init_d["sublevel_fraction"])
        ),
    )
    if initial.kind not in ("tilt", "sloshing", "offset"):
        raise ConfigError(f"initial.kind must be tilt, sloshing or offset, got {initial.kind!r}")

    sol_d = _section(
        data, "solver",
        {"n", "t_end", "cfl_adv", "cfl_diff", "output_every", "h_floor",
         "dt_max", "store_fields", "spill_policy", "per_stage_control"},
    )
    try:
        solver = SolverConfig(
            n=int(sol_d.get("n", 201)),
            t_end=float(sol_d.get("t_end", 1.0)),
            cfl_adv=float(sol_d.get("cfl_adv", 0.5)),
            cfl_diff=float(sol_d.get("cfl_diff", 0.5)),
            output_every=(
                None if sol_d.get("output_every") is None else float(sol_d["output_every"])
            ),
            h_floor=float(sol_d.get("h_floor", 1e-9)),
            dt_max=None if sol_d.get("dt_max") is None else float(sol_d["dt_max"]),
            store_fields=bool(sol_d.get("store_fields", True)),
            spill_policy=str(sol_d.get("spill_policy", "warn")),
            per_stage_control=bool(sol_d.get("per_stage_control", True)),
        )
    except InvariantError as exc:
        raise ConfigError(f"[solver] invalid: {exc}") from exc

    ver_d = _section(data, "verify", {"checks", "samples", "seed"})
    checks = tuple(ver_d.get("checks", ()))
    unknown = set(checks) - set(KNOWN_CHECKS)
    if unknown:
        raise ConfigError(f"unknown verify checks {sorted(unknown)}; known: {KNOWN_CHECKS}")
    verify = VerifySpec(
        checks=checks,
        samples=int(ver_d.get("samples", 1000)),
        seed=int(ver_d.get("seed", 42)),
    )
    if "decay" in checks and gains.theorem is None:
        raise ConfigError("the decay check needs a requested certificate in [gains]")

    out_d = _section(data, "output", {"dir", "fields"})
    ctl_d = _section(data, "control", {"enabled"})

    return ExperimentConfig(
        physical=physical,
        friction=friction,
        gains=gains,
        initial=initial,
        solver=solver,
        verify=verify,
        out_dir=Path(out_d.get("dir", "out")),
        dump_fields=bool(out_d.get("fields", False)),
        control_enabled=bool(ctl_d.get("enabled", True)),
        raw=data,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse a TOML (or JSON) experiment file."""
    path = Path(path)
    text = path.read_bytes()
    try:
        if path.suffix == ".json" or text.lstrip()[:1] == b"{":
            data = json.loads(text)
        else:
            data = tomllib.loads(text.decode())
    except (json.JSONDecodeError, tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a table/object at top level")
    known = {"physical", "friction", "gains", "initial", "solver", "verify", "output", "control"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown sections {sorted(unknown)}; known: {sorted(known)}")
    return config_from_dict(data)
