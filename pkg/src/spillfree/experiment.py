"""Experiment pipeline: certify gains, simulate, verify, emit artifacts.

Exit codes: 0 all requested checks passed, 1 runtime failure (the
simulation terminated early), 2 configuration error, 3 check failure.
Observational results (decay clauses demoted because gains were not
certified) do not fail the run unless ``strict`` is set.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .config import ConfigError, ExperimentConfig
from .controller import (
    FeasibilityReport,
    InfeasibleTargetError,
    check_theorem1,
    check_theorem2,
    suggest_gains,
)
from .core import Grid, LiquidState, TankState
from .functionals import clf_V, functional_U, xu_membership_bound
from .sampling import scale_state
from .solver import Trajectory, make_initial, simulate
from .verify import (
    VerificationResult,
    verify_decay,
    verify_energy_identities,
    verify_level_bounds,
    verify_sine_inequalities,
    verify_small_norm_bound,
)

__all__ = ["RunResult", "run", "EXIT_OK", "EXIT_RUNTIME", "EXIT_CONFIG", "EXIT_CHECKS"]

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_CHECKS = 3


@dataclass
class RunResult:
    exit_code: int
    report: FeasibilityReport | None = None
    trajectory: Trajectory | None = None
    verifications: list[VerificationResult] = field(default_factory=list)
    messages: list[str] = field(default_factory=list)


def _certify(cfg: ExperimentConfig) -> tuple[FeasibilityReport | None, float | None]:
    gs = cfg.gains
    if gs.theorem is None:
        return None, None
    if gs.mode == "suggest":
        suggestion = suggest_gains(
            cfg.friction,
            cfg.physical,
            mode=gs.theorem,
            omega=gs.omega,
            omega1=gs.omega1,
            omega2=gs.omega2,
            sigma=gs.sigma,
            q=gs.q,
            margin=gs.margin,
        )
        return suggestion.report, suggestion.r
    assert gs.explicit is not None and gs.r is not None
    if gs.theorem == "theorem1":
        if gs.omega is None:
            raise ConfigError("theorem1 check needs omega")
        return check_theorem1(gs.explicit, gs.omega, gs.r, cfg.friction, cfg.physical), gs.r
    if gs.omega1 is None or gs.omega2 is None:
        raise ConfigError("theorem2 check needs omega1 and omega2")
    return (
        check_theorem2(gs.explicit, gs.omega1, gs.omega2, gs.r, cfg.friction, cfg.physical),
        gs.r,
    )


def _initial_state(
    cfg: ExperimentConfig, report: FeasibilityReport | None, grid: Grid
) -> tuple[TankState, LiquidState]:
    init = cfg.initial
    tank, state = make_initial(
        init.kind,
        cfg.physical,
        grid,
        amplitude=init.amplitude,
        velocity=init.velocity,
        mode=init.mode,
        xi0=init.xi0,
        w0=init.w0,
    )
    if init.sublevel_fraction is not None:
        if report is None:
            raise ConfigError("initial.sublevel_fraction needs a requested certificate")
        fp = report.gains.fparams
        if report.theorem == "theorem1":
            target = init.sublevel_fraction * report.r
            value = lambda tk, st: clf_V(tk, st, cfg.physical, fp, grid)
        else:
            target = init.sublevel_fraction * xu_membership_bound(report.r, fp)
            value = lambda tk, st: functional_U(tk, st, cfg.physical, fp, grid)
        if value(tank, state) > target:
            lo, hi = 0.0, 1.0
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                tk, st = scale_state(tank, state, cfg.physical, mid)
                if value(tk, st) <= target:
                    lo = mid
                else:
                    hi = mid
            tank, state = scale_state(tank, state, cfg.physical, lo)
    return tank, state


def run(
    cfg: ExperimentConfig,
    *,
    out_dir: Path | None = None,
    strict: bool = False,
    do_simulate: bool = True,
) -> RunResult:
    """Execute the configured pipeline and write artifacts to the output dir.

    ``do_simulate=False`` (the `verify` subcommand) skips the simulation
    unless a requested check needs a trajectory.
    """
    out = Path(out_dir) if out_dir is not None else cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    result = RunResult(exit_code=EXIT_OK)

    try:
        report, r = _certify(cfg)
    except InfeasibleTargetError as exc:
        # an honest infeasibility is a failed check, not a crash
        result.messages.append(str(exc))
        (out / "feasibility.json").write_text(json.dumps({"error": str(exc)}, indent=2))
        result.exit_code = EXIT_CHECKS
        return result
    result.report = report
    if report is not None:
        (out / "feasibility.json").write_text(json.dumps(report.to_json_dict(), indent=2))
        if not report.passed:
            failed = [c.name for c in report.checks if not c.passed]
            result.messages.append(f"certificate failed checks: {failed}")

    grid = Grid(cfg.solver.n, cfg.physical.L)
    needs_traj = do_simulate or bool({"lemma2", "decay"} & set(cfg.verify.checks))
    traj = None
    gains = report.gains if report is not None else cfg.gains.explicit
    if needs_traj:
        tank0, state0 = _initial_state(cfg, report, grid)
        traj = simulate(
            tank0,
            state0,
            gains,
            cfg.friction,
            cfg.physical,
            cfg.solver,
            open_loop=not cfg.control_enabled,
        )
        result.trajectory = traj
        traj.to_csv(out / "trajectory.csv")
        if cfg.dump_fields and traj.states is not None:
            traj.write_snapshots(out / "fields", grid)
        if traj.termination != "completed":
            result.messages.append(f"simulation terminated early: {traj.termination} ({traj.message})")
            result.exit_code = EXIT_RUNTIME
            (out / "verification.json").write_text(json.dumps([], indent=2))
            return result
        if float(traj.spill_margin.min()) <= 0.0:
            result.messages.append(
                "warning: wall spill margin went non-positive during the run"
            )
            if strict:
                result.exit_code = EXIT_CHECKS

    fp = gains.fparams if gains is not None else None
    checks: list[VerificationResult] = []
    for name in cfg.verify.checks:
        if name == "lemma1":
            assert fp is not None
            checks.append(
                verify_level_bounds(cfg.verify.samples, cfg.verify.seed, cfg.physical, fp, grid)
            )
        elif name == "prop1":
            checks.append(verify_sine_inequalities(cfg.verify.samples, cfg.verify.seed, grid))
        elif name == "prop2":
            assert fp is not None
            checks.append(
                verify_small_norm_bound(cfg.verify.samples, cfg.verify.seed, cfg.physical, fp, grid)
            )
        elif name == "lemma2":
            assert traj is not None
            checks.append(verify_energy_identities(traj, cfg.physical, cfg.friction))
        elif name == "decay":
            assert traj is not None and report is not None
            checks.append(verify_decay(traj, report, cfg.physical, friction=cfg.friction))
    result.verifications = checks
    (out / "verification.json").write_text(
        json.dumps([c.to_json_dict() for c in checks], indent=2)
    )

    hard_failures = [c for c in checks if c.passed is False]
    observational = [c for c in checks if c.passed is None]
    if report is not None and not report.passed:
        result.exit_code = EXIT_CHECKS
    if hard_failures:
        result.messages.extend(f"check failed: {c.name}" for c in hard_failures)
        result.exit_code = EXIT_CHECKS
    if observational:
        result.messages.extend(f"observational only: {c.name}" for c in observational)
        if strict:
            result.exit_code = EXIT_CHECKS
    return result
