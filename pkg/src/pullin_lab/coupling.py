"""Electromechanical coupling: voltage continuation and pull-in search.

The solution strategy is a staggered one: at each voltage the field problem
is solved on the current deformed geometry, the resulting surface traction is
applied to the beam, and the structure is re-solved, until the tip deflection
settles.  Voltage is then incremented, each step seeding from the previous
converged state.  Pull-in manifests as loss of convergence of that inner
loop (or as a structural limit point / gap closure), and the pull-in voltage
is bracketed by bisection between the last converged and first failed
voltage.

A 1-DoF rigid-plate configuration (:class:`~pullin_lab.oracles.LumpedModel`)
runs through the same continuation, stepping, and bisection machinery, which
lets the closed-form pull-in voltage exercise the full driver.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .beam_fe import (
    Displacement,
    LoadState,
    build_mesh,
    initial_state_loads,
    solve_linear,
    solve_nonlinear,
    tip_deflection,
)
from .errors import (
    ContactSignal,
    ExtractionError,
    FieldSolverError,
    LimitPointSignal,
    NoPullInError,
    NonConvergenceError,
    RemeshSignal,
    ValidationError,
)
from .field import (
    Drive,
    FieldMethod,
    bem_solve,
    build_field_domain,
    calibrate_correction,
    fem_solve,
    parallel_plate_solution,
    traction_load_state,
)
from .oracles import EPS0, LumpedModel
from .specimens import Specimen, derive_section

__all__ = [
    "CouplingMode",
    "Termination",
    "SolverConfig",
    "StepRecord",
    "SweepResult",
    "PullInResult",
    "LumpedParams",
    "ContinuationState",
    "sequential_step",
    "voltage_sweep",
    "find_pull_in",
    "extract_lumped",
    "parse_solver_config",
]


class CouplingMode(Enum):
    """How field and structure exchange information within a voltage step."""

    ITERATIVE = "Iterative"
    NON_INCREMENTAL = "NonIncremental"


class Termination(Enum):
    """Why a voltage step failed to converge."""

    NON_CONVERGENCE = "NonConvergence"
    LIMIT_POINT = "LimitPoint"
    CONTACT = "Contact"


@dataclass(frozen=True)
class SolverConfig:
    """Settings for the coupled sweep and pull-in search.

    ``correction`` multiplies the electrostatic traction uniformly (see
    :func:`~pullin_lab.field.calibrate_correction`).  ``under_relaxation``
    blends successive traction updates once the inner loop runs long and
    starts to oscillate, which stabilises the staggered scheme near pull-in.
    The NonIncremental mode performs a single field/structure pass per step
    using the previous converged geometry; it is only accurate for small
    voltage increments (dv of order (v_end - v_start)/200 or finer).
    """

    v_end: float
    v_start: float = 0.0
    dv: float = 1.0
    field_method: FieldMethod = FieldMethod.PARALLEL_PLATE
    coupling_mode: CouplingMode = CouplingMode.ITERATIVE
    geometric_nonlinearity: bool = True
    inner_tol: float = 1e-8
    max_inner_iter: int = 50
    pullin_bisection_tol: float = 0.01
    n_beam_elements: int = 40
    correction: float = 1.0
    under_relaxation: float = 0.7
    drive: Drive = Drive.COUNTER_ELECTRODE
    bem_elements: int = 340
    fem_mesh_scale: float = 1.0
    margin_gaps: float = 5.0

    def __post_init__(self):
        if not 0.0 <= self.v_start <= self.v_end:
            raise ValidationError(
                "voltage range must satisfy 0 <= v_start <= v_end")
        if self.dv <= 0.0:
            raise ValidationError("dv must be positive")
        if self.inner_tol <= 0.0 or self.pullin_bisection_tol <= 0.0:
            raise ValidationError("tolerances must be positive")
        if self.max_inner_iter < 1:
            raise ValidationError("max_inner_iter must be at least 1")
        if self.n_beam_elements < 4:
            raise ValidationError("n_beam_elements must be at least 4")
        if self.correction <= 0.0:
            raise ValidationError("correction must be positive")
        if not 0.0 < self.under_relaxation <= 1.0:
            raise ValidationError("under_relaxation must be in (0, 1]")


@dataclass(frozen=True)
class StepRecord:
    """Outcome of one voltage step of a sweep."""

    voltage: float
    tip_deflection: float
    inner_iterations: int
    converged: bool
    capacitance: float | None = None
    termination: Termination | None = None


@dataclass(frozen=True)
class SweepResult:
    """Voltage sweep outcome; a failed step, if any, is last."""

    steps: tuple[StepRecord, ...]
    source_id: str
    config: SolverConfig

    def __post_init__(self):
        volts = [s.voltage for s in self.steps]
        if any(b <= a for a, b in zip(volts, volts[1:])):
            raise ValidationError("sweep voltages must be strictly increasing")
        for s in self.steps[:-1]:
            if not s.converged:
                raise ValidationError("only the final sweep step may fail")

    @property
    def converged_steps(self) -> tuple[StepRecord, ...]:
        return tuple(s for s in self.steps if s.converged)

    @property
    def last_converged(self) -> StepRecord | None:
        conv = self.converged_steps
        return conv[-1] if conv else None


@dataclass(frozen=True)
class PullInResult:
    """Bisection bracket around the pull-in voltage."""

    v_pullin_low: float
    v_pullin_high: float
    tip_deflection_at_last_converged: float
    termination: Termination

    def __post_init__(self):
        if not self.v_pullin_high > self.v_pullin_low >= 0.0:
            raise ValidationError("pull-in bracket must be ordered")

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.v_pullin_low + self.v_pullin_high)


@dataclass(frozen=True)
class LumpedParams:
    """Reduced parameters extracted from a sweep for system-level models."""

    k_eff: float
    cv_table: tuple[tuple[float, float], ...]
    v_pullin: float | None = None


# --------------------------------------------------------------------------
# Systems: the structural side of the staggered loop.

# Convergence floor: tip changes are measured relative to the larger of the
# current tip deflection and this fraction of the gap, so near-zero
# deflections at low voltage do not stall the relative test.
_TIP_FLOOR_FRAC = 1e-3


class _BeamSystem:
    """Cantilever + 2D field model behind the continuation driver."""

    def __init__(self, specimen: Specimen, cfg: SolverConfig):
        self.specimen = specimen
        self.cfg = cfg
        self.mesh = build_mesh(specimen, n_elements=cfg.n_beam_elements)
        self.gap = specimen.gap
        self.depth = derive_section(specimen).depth
        # Structural coordinates take +v toward the counter-electrode,
        # whereas the specimen convention has positive curvature bending
        # away from it; flip the signed initial-state entries accordingly.
        init = replace(
            specimen.initial_state,
            curvature=-specimen.initial_state.curvature,
            moment_preload=-specimen.initial_state.moment_preload,
        )
        self._equivalent_initial = initial_state_loads(init, self.mesh)

    def zero_voltage_state(self) -> Displacement:
        loads = LoadState.zeros(self.mesh)
        loads.equivalent_initial = self._equivalent_initial
        return self._solve(loads, None)

    def field_solution(self, voltage: float, displacement: Displacement):
        cfg = self.cfg
        domain = build_field_domain(
            self.specimen, displacement,
            margin_gaps=cfg.margin_gaps, drive=cfg.drive)
        if cfg.field_method is FieldMethod.PARALLEL_PLATE:
            return parallel_plate_solution(domain, voltage)
        if cfg.field_method is FieldMethod.BOUNDARY:
            return bem_solve(domain, voltage, n_elements=cfg.bem_elements)
        return fem_solve(domain, voltage, mesh_scale=cfg.fem_mesh_scale)

    def loads_from(self, solution) -> LoadState:
        loads = traction_load_state(solution, self.mesh,
                                    correction=self.cfg.correction)
        loads.equivalent_initial = self._equivalent_initial
        return loads

    def solve(self, loads: LoadState, warm: Displacement | None) -> Displacement:
        return self._solve(loads, warm)

    def _solve(self, loads, warm):
        if self.cfg.geometric_nonlinearity:
            return solve_nonlinear(self.mesh, lambda _d: loads, initial=warm)
        return solve_linear(self.mesh, loads)

    @staticmethod
    def tip(displacement: Displacement) -> float:
        return tip_deflection(displacement)

    def capacitance_of(self, solution) -> float | None:
        if solution.capacitance_per_depth is None:
            return None
        if self.cfg.field_method is FieldMethod.PARALLEL_PLATE:
            return None
        return float(solution.capacitance_per_depth * self.depth)


class _LumpedSystem:
    """Rigid parallel plate on a linear spring, same driver interface.

    The "displacement" is a plain float (plate travel toward the fixed
    electrode) and a step is a fixed-point update u <- F_es(u, V)/k.
    """

    def __init__(self, model: LumpedModel, cfg: SolverConfig):
        self.model = model
        self.cfg = cfg
        self.gap = model.gap

    def zero_voltage_state(self) -> float:
        return 0.0

    def field_solution(self, voltage: float, displacement: float):
        local_gap = self.model.gap - displacement
        if local_gap <= 0.0:
            raise ContactSignal(min_gap=local_gap)
        return (voltage, local_gap)

    def loads_from(self, solution):
        voltage, local_gap = solution
        force = (self.cfg.correction * EPS0 * self.model.area
                 * voltage**2 / (2.0 * local_gap**2))
        return force

    def solve(self, force: float, warm) -> float:
        return force / self.model.stiffness

    @staticmethod
    def tip(displacement: float) -> float:
        return displacement

    def capacitance_of(self, solution) -> float | None:
        return None


@dataclass
class ContinuationState:
    """Mutable carrier of the last converged solution along a sweep."""

    system: object
    displacement: object
    voltage: float
    last_solution: object = None

    @classmethod
    def create(cls, source, cfg: SolverConfig) -> "ContinuationState":
        """Build the system for ``source`` and pre-solve the V = 0 state.

        ``source`` is a :class:`~pullin_lab.specimens.Specimen` or a
        :class:`~pullin_lab.oracles.LumpedModel`.
        """
        if isinstance(source, Specimen):
            system = _BeamSystem(source, cfg)
        elif isinstance(source, LumpedModel):
            system = _LumpedSystem(source, cfg)
        else:
            raise ValidationError(
                "source must be a Specimen or a LumpedModel")
        return cls(system=system,
                   displacement=system.zero_voltage_state(),
                   voltage=0.0)

    def commit(self, displacement, voltage: float, solution) -> None:
        self.displacement = displacement
        self.voltage = voltage
        self.last_solution = solution


def _blend_loads(new, old, factor: float):
    """Under-relaxed traction update: factor*new + (1-factor)*old."""
    if isinstance(new, LoadState):
        blended = LoadState(
            distributed_load=factor * new.distributed_load
            + (1.0 - factor) * old.distributed_load,
            transverse_force=new.transverse_force,
            moment=new.moment,
            axial_force=new.axial_force,
            equivalent_initial=new.equivalent_initial,
        )
        return blended
    return factor * new + (1.0 - factor) * old


def sequential_step(state: ContinuationState, voltage: float,
                    cfg: SolverConfig):
    """One voltage step of the staggered scheme.

    Returns ``(displacement, converged, iterations)``; the state is not
    modified (callers commit converged results).  In Iterative mode the
    field and the structure are re-solved in turn until the relative tip
    change drops below ``cfg.inner_tol``; in NonIncremental mode exactly
    one pass is made with the field evaluated on the previously converged
    geometry.

    Raises
    ------
    ContactSignal, LimitPointSignal, NonConvergenceError, RemeshSignal
        Propagated from the field/structure solvers; the sweep driver maps
        them to step terminations.
    """
    disp, converged, iterations, _solution = _step_full(state, voltage, cfg)
    return disp, converged, iterations


def _step_full(state: ContinuationState, voltage: float, cfg: SolverConfig):
    """sequential_step plus the final field solution (driver internal)."""
    system = state.system
    if cfg.coupling_mode is CouplingMode.NON_INCREMENTAL:
        solution = system.field_solution(voltage, state.displacement)
        loads = system.loads_from(solution)
        disp = system.solve(loads, state.displacement)
        return disp, True, 1, solution

    disp = state.displacement
    tip_old = system.tip(disp)
    floor = _TIP_FLOOR_FRAC * system.gap
    prev_loads = None
    solution = None
    for iteration in range(1, cfg.max_inner_iter + 1):
        solution = system.field_solution(voltage, disp)
        loads = system.loads_from(solution)
        if (prev_loads is not None and iteration > 10
                and cfg.under_relaxation < 1.0):
            loads = _blend_loads(loads, prev_loads, cfg.under_relaxation)
        prev_loads = loads
        disp = system.solve(loads, disp)
        tip_new = system.tip(disp)
        rel = abs(tip_new - tip_old) / max(abs(tip_new), floor)
        if rel < cfg.inner_tol:
            return disp, True, iteration, solution
        tip_old = tip_new
    return disp, False, cfg.max_inner_iter, solution


def _voltages(cfg: SolverConfig) -> np.ndarray:
    if cfg.v_end == cfg.v_start:
        return np.array([cfg.v_start])
    n = int(np.floor((cfg.v_end - cfg.v_start) / cfg.dv + 1e-9))
    volts = cfg.v_start + cfg.dv * np.arange(n + 1)
    if volts[-1] < cfg.v_end - 1e-9 * cfg.dv:
        volts = np.append(volts, cfg.v_end)
    return volts


def _termination_for(exc: Exception) -> Termination:
    if isinstance(exc, ContactSignal):
        return Termination.CONTACT
    if isinstance(exc, RemeshSignal):
        return Termination.CONTACT
    if isinstance(exc, LimitPointSignal):
        return Termination.LIMIT_POINT
    return Termination.NON_CONVERGENCE


def _try_step(state: ContinuationState, voltage: float, cfg: SolverConfig):
    """Run one step, mapping solver signals to a failure record."""
    try:
        disp, converged, iterations, solution = _step_full(
            state, voltage, cfg)
    except (ContactSignal, RemeshSignal, LimitPointSignal) as exc:
        return None, False, 0, None, _termination_for(exc)
    except NonConvergenceError as exc:
        return None, False, exc.iterations, None, Termination.NON_CONVERGENCE
    except FieldSolverError:
        return None, False, 0, None, Termination.NON_CONVERGENCE
    if converged:
        return disp, True, iterations, solution, None
    return disp, False, iterations, solution, Termination.NON_CONVERGENCE


def voltage_sweep(source, cfg: SolverConfig) -> SweepResult:
    """Step the voltage from v_start to v_end, recording each step.

    The sweep stops at the first non-converged step, which is recorded
    with its termination cause.  ``source`` may be a Specimen or a
    LumpedModel (the latter exercises the same machinery on the 1-DoF
    rigid-plate configuration).
    """
    state = ContinuationState.create(source, cfg)
    source_id = source.id if isinstance(source, Specimen) else "lumped"
    steps: list[StepRecord] = []
    for voltage in _voltages(cfg):
        disp, converged, iterations, solution, termination = _try_step(
            state, float(voltage), cfg)
        if converged:
            state.commit(disp, float(voltage), solution)
            steps.append(StepRecord(
                voltage=float(voltage),
                tip_deflection=state.system.tip(disp),
                inner_iterations=iterations,
                converged=True,
                capacitance=state.system.capacitance_of(solution),
            ))
        else:
            tip = state.system.tip(disp) if disp is not None else float("nan")
            steps.append(StepRecord(
                voltage=float(voltage),
                tip_deflection=tip,
                inner_iterations=iterations,
                converged=False,
                capacitance=None,
                termination=termination,
            ))
            break
    return SweepResult(steps=tuple(steps), source_id=source_id, config=cfg)


def find_pull_in(source, cfg: SolverConfig) -> PullInResult:
    """Bracket the pull-in voltage by sweep plus bisection.

    Sweeps upward until the first non-converged voltage, then bisects
    between the last converged and the failed voltage (each converged
    midpoint re-seeds the continuation) until the bracket is narrower
    than ``cfg.pullin_bisection_tol``.

    Raises
    ------
    NoPullInError
        If every voltage up to v_end converges.
    ValidationError
        If not even the first sweep voltage converges (no lower bracket).
    """
    state = ContinuationState.create(source, cfg)
    v_low = None
    v_high = None
    termination = None
    for voltage in _voltages(cfg):
        disp, converged, _its, solution, term = _try_step(
            state, float(voltage), cfg)
        if converged:
            state.commit(disp, float(voltage), solution)
            v_low = float(voltage)
        else:
            v_high = float(voltage)
            termination = term
            break
    if v_high is None:
        raise NoPullInError(
            f"all voltages up to {cfg.v_end} V converged; raise v_end")
    if v_low is None:
        raise ValidationError(
            "the first sweep voltage already fails to converge; "
            "lower v_start to obtain a pull-in bracket")

    while v_high - v_low > cfg.pullin_bisection_tol:
        v_mid = 0.5 * (v_low + v_high)
        disp, converged, _its, solution, term = _try_step(
            state, v_mid, cfg)
        if converged:
            state.commit(disp, v_mid, solution)
            v_low = v_mid
        else:
            v_high = v_mid
            termination = term

    return PullInResult(
        v_pullin_low=v_low,
        v_pullin_high=v_high,
        tip_deflection_at_last_converged=state.system.tip(state.displacement),
        termination=termination,
    )


def extract_lumped(sweep: SweepResult, source,
                   pullin: PullInResult | None = None) -> LumpedParams:
    """Reduce a sweep to lumped parameters for system-level modelling.

    ``k_eff`` is the secant stiffness at the lowest nonzero converged
    voltage: total electrostatic force on the undeformed electrode area
    divided by the tip deflection gained relative to the zero-voltage
    state.  The C(V) table keeps the converged steps that carried a
    capacitance (field methods other than the parallel-plate model).
    """
    conv = [s for s in sweep.converged_steps if s.voltage > 0.0]
    if len(conv) < 3:
        raise ExtractionError(
            "need at least 3 converged steps with V > 0 for extraction")
    baseline = 0.0
    for s in sweep.converged_steps:
        if s.voltage == 0.0:
            baseline = s.tip_deflection
            break

    first = conv[0]
    correction = sweep.config.correction
    if isinstance(source, Specimen):
        section = derive_section(source)
        x0, x1 = source.electrode_span
        area = section.depth * (x1 - x0)
        gap = source.gap
    elif isinstance(source, LumpedModel):
        area = source.area
        gap = source.gap
    else:
        raise ValidationError("source must be a Specimen or a LumpedModel")

    force = correction * EPS0 * area * first.voltage**2 / (2.0 * gap**2)
    deflection = first.tip_deflection - baseline
    if deflection <= 0.0:
        raise ExtractionError(
            "no measurable deflection at the lowest nonzero voltage")
    k_eff = force / deflection
    cv_table = tuple(
        (s.voltage, s.capacitance)
        for s in sweep.converged_steps if s.capacitance is not None
    )
    v_pullin = pullin.midpoint if pullin is not None else None
    return LumpedParams(k_eff=k_eff, cv_table=cv_table, v_pullin=v_pullin)


# --------------------------------------------------------------------------
# Config parsing (the `solver` block of a run configuration).

_FIELD_METHODS = {
    "parallelplate": FieldMethod.PARALLEL_PLATE,
    "bem": FieldMethod.BOUNDARY,
    "fem": FieldMethod.DOMAIN,
}
_COUPLING_MODES = {
    "iterative": CouplingMode.ITERATIVE,
    "nonincremental": CouplingMode.NON_INCREMENTAL,
}
_DRIVES = {
    "counterelectrode": Drive.COUNTER_ELECTRODE,
    "counter_electrode": Drive.COUNTER_ELECTRODE,
    "beam": Drive.BEAM,
}

_SOLVER_KEYS = {
    "field_method", "coupling_mode", "geometric_nonlinearity",
    "v_start", "v_end", "dv", "inner_tol", "max_inner_iter",
    "pullin_bisection_tol", "n_beam_elements", "correction",
    "under_relaxation", "drive", "bem_elements", "fem_mesh_scale",
    "margin_gaps",
}


def _number(block: dict, key: str) -> float:
    value = block[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"solver.{key} must be a number")
    return float(value)


def _count(block: dict, key: str) -> int:
    value = block[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"solver.{key} must be an integer")
    return value


def parse_solver_config(block: dict, *,
                        specimen: Specimen | None = None) -> SolverConfig:
    """Build a :class:`SolverConfig` from the `solver` config block.

    Unknown keys are rejected.  ``correction`` may be a number or the
    string "auto", which calibrates the fringing-field correction for the
    given specimen (and therefore requires one).
    """
    if not isinstance(block, dict):
        raise ValidationError("solver block must be an object")
    unknown = set(block) - _SOLVER_KEYS
    if unknown:
        raise ValidationError(
            f"unknown solver key(s): {', '.join(sorted(unknown))}")
    if "v_end" not in block:
        raise ValidationError("solver.v_end is required")

    kwargs: dict = {"v_end": _number(block, "v_end")}

    if "field_method" in block:
        raw = str(block["field_method"]).replace("_", "").lower()
        if raw not in _FIELD_METHODS:
            raise ValidationError(
                "solver.field_method must be one of "
                "ParallelPlate, BEM, FEM")
        kwargs["field_method"] = _FIELD_METHODS[raw]
    if "coupling_mode" in block:
        raw = str(block["coupling_mode"]).replace("_", "").lower()
        if raw not in _COUPLING_MODES:
            raise ValidationError(
                "solver.coupling_mode must be Iterative or NonIncremental")
        kwargs["coupling_mode"] = _COUPLING_MODES[raw]
    if "geometric_nonlinearity" in block:
        if not isinstance(block["geometric_nonlinearity"], bool):
            raise ValidationError(
                "solver.geometric_nonlinearity must be a boolean")
        kwargs["geometric_nonlinearity"] = block["geometric_nonlinearity"]
    if "drive" in block:
        raw = str(block["drive"]).replace("-", "_").lower()
        if raw not in _DRIVES:
            raise ValidationError(
                "solver.drive must be CounterElectrode or Beam")
        kwargs["drive"] = _DRIVES[raw]

    for key in ("v_start", "dv", "inner_tol", "pullin_bisection_tol",
                "under_relaxation", "fem_mesh_scale", "margin_gaps"):
        if key in block:
            kwargs[key] = _number(block, key)
    for key in ("max_inner_iter", "n_beam_elements", "bem_elements"):
        if key in block:
            kwargs[key] = _count(block, key)

    if "correction" in block:
        value = block["correction"]
        if isinstance(value, str):
            if value.lower() != "auto":
                raise ValidationError(
                    'solver.correction must be a number or "auto"')
            if specimen is None:
                raise ValidationError(
                    'solver.correction "auto" requires a specimen')
            kwargs["correction"] = calibrate_correction(specimen)
        else:
            kwargs["correction"] = _number(block, "correction")

    return SolverConfig(**kwargs)
