"""Field-solution container and traction/capacitance post-processing.

Every solver reports the induced surface charge density at the beam's
stations, on both the gap-facing (front) and far-side (back) surfaces.
The net electrostatic pressure pulling the beam toward the electrode is

    p(x) = (sigma_front(x)**2 - sigma_back(x)**2) / (2 * eps0)

which reduces to ``eps0 * V**2 / (2 * gap**2)`` between ideal parallel
plates.  Multiplying by the extrusion depth (and an optional calibration
factor for finite-depth effects) turns it into the line load the beam
model consumes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from ..errors import CapacitanceUndefinedError, ContactSignal, ValidationError
from ..oracles import EPS0
from .domain import Drive, FieldDomain

if TYPE_CHECKING:  # pragma: no cover - import cycle guard for hints only
    from ..beam_fe import BeamMesh, LoadState

__all__ = [
    "EPS0",
    "FieldMethod",
    "FieldSolution",
    "capacitance",
    "parallel_plate_pressure",
    "parallel_plate_solution",
    "surface_traction",
    "traction_load_state",
]


class FieldMethod(enum.Enum):
    """How the gap field is resolved."""

    PARALLEL_PLATE = "parallel_plate"
    BOUNDARY = "boundary"
    DOMAIN = "domain"


@dataclass(frozen=True)
class FieldSolution:
    """Surface charge state of one conductor pair at one voltage.

    ``sigma_front`` / ``sigma_back`` are charge densities (C/m^2, per unit
    depth geometry) sampled at ``domain.stations`` on the beam's facing
    and far surfaces.  ``capacitance_per_depth`` is the beam's total
    induced charge per volt and per unit extrusion depth (F/m); solvers
    that cannot resolve fringing leave it None.  ``charge_per_depth``
    collects the per-conductor totals for charge-balance diagnostics.
    """

    method: FieldMethod
    domain: FieldDomain
    voltage: float
    sigma_front: np.ndarray
    sigma_back: np.ndarray
    capacitance_per_depth: float | None = None
    charge_per_depth: dict = field(default_factory=dict)
    condition: float | None = None
    mesh: object | None = None          # domain solver: deformed mesh
    potential: np.ndarray | None = None  # domain solver: nodal potentials

    @property
    def station_pressure(self) -> np.ndarray:
        """Net attraction pressure (Pa) toward the electrode, per station."""
        eps = self.domain.permittivity
        return (self.sigma_front**2 - self.sigma_back**2) / (2.0 * eps)


def parallel_plate_pressure(voltage: float, gap, correction: float = 1.0):
    """Ideal parallel-plate attraction pressure ``corr*eps0*V^2/(2 g^2)``.

    ``gap`` may be a scalar or an array of local separations; every entry
    must be positive, otherwise the plates have met and a
    :class:`ContactSignal` is raised.
    """
    g = np.asarray(gap, dtype=float)
    if (g <= 0.0).any():
        raise ContactSignal(min_gap=float(g.min()))
    p = correction * EPS0 * float(voltage) ** 2 / (2.0 * g**2)
    return float(p) if np.isscalar(gap) else p


def parallel_plate_solution(domain: FieldDomain, voltage: float) -> FieldSolution:
    """Local parallel-plate field: each station sees its own ideal gap.

    Stations outside the electrode's footprint carry no charge, and the
    far surface is taken as screened (zero charge).
    """
    if domain.min_gap <= 0.0:
        raise ContactSignal(min_gap=domain.min_gap)
    x0, x1 = domain.electrode_span
    covered = (domain.stations >= x0 - 1e-12) & (domain.stations <= x1 + 1e-12)
    sigma_front = np.zeros_like(domain.stations)
    sigma_front[covered] = (-domain.permittivity * voltage
                            / domain.local_gaps[covered])
    sigma_back = np.zeros_like(sigma_front)
    if voltage != 0.0:
        span = max(x1 - x0, 0.0)
        cap = domain.permittivity * np.trapezoid(
            np.where(covered, 1.0 / domain.local_gaps, 0.0), domain.stations
        ) if span > 0.0 else 0.0
    else:
        cap = None
    return FieldSolution(
        method=FieldMethod.PARALLEL_PLATE,
        domain=domain,
        voltage=float(voltage),
        sigma_front=sigma_front,
        sigma_back=sigma_back,
        capacitance_per_depth=cap,
    )


def surface_traction(solution: FieldSolution) -> np.ndarray:
    """Net pull pressure per station interval (Pa), root to tip.

    Averages the station pressures of each interval between consecutive
    stations, ready to be scaled into an element line load.
    """
    p = solution.station_pressure
    return 0.5 * (p[:-1] + p[1:])


def traction_load_state(
    solution: FieldSolution,
    mesh: "BeamMesh",
    *,
    correction: float = 1.0,
) -> "LoadState":
    """Convert a field solution into a distributed beam load.

    The solution's stations must coincide with the mesh nodes (the
    coupling layer always builds domains from the structural grid).  The
    returned load has ``distributed_load[e] = p_e * depth * correction``
    acting toward the electrode (positive ``v``).
    """
    from ..beam_fe import LoadState  # local import to avoid a cycle

    if solution.domain.stations.shape != mesh.nodes.shape or not np.allclose(
        solution.domain.stations, mesh.nodes, rtol=0.0, atol=1e-9 * mesh.length
    ):
        raise ValidationError(
            "field stations do not match the structural mesh nodes"
        )
    load = LoadState.zeros(mesh)
    load.distributed_load[:] = (
        surface_traction(solution) * solution.domain.depth * correction
    )
    return load


def capacitance(solution: FieldSolution) -> float:
    """Beam capacitance in farads: induced charge per volt times depth.

    Raises :class:`CapacitanceUndefinedError` at zero voltage, where the
    charge/voltage quotient of the ideal-plate route is undefined.
    """
    if solution.voltage == 0.0 or solution.capacitance_per_depth is None:
        raise CapacitanceUndefinedError(
            "capacitance requires a nonzero drive voltage and a solver "
            "that reports induced charge"
        )
    return float(solution.capacitance_per_depth * solution.domain.depth)
