"""Calibration of the plate traction for fringing and finite depth.

The ideal parallel-plate pressure underestimates the attraction on real
conductor pairs: field lines bulge past the gap ends in the length
direction and wrap around the beam in the depth direction.  Because the
two effects act in orthogonal planes, each is calibrated with its own 2D
solve and the combined factor is their product:

* ``f_length`` — net traction of the length-plane outline solution over
  the ideal-plate value for the same electrode extent;
* ``f_width`` — the same ratio in the cross-section plane, which carries
  the depth-direction wrap-around (dominant for beams whose depth is
  comparable to the gap).

``scenario_catalog`` records reference force ratios for three canonical
configurations, usable as regression anchors for the calibration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bem import bem_solve
from .domain import build_field_domain, build_width_plane_domain
from .solution import parallel_plate_pressure

__all__ = [
    "CorrectionFactors",
    "CorrectionScenario",
    "calibrate_correction",
    "correction_factors",
    "scenario_catalog",
]


@dataclass(frozen=True)
class CorrectionScenario:
    """Reference net-force ratio for one canonical conductor layout.

    ``force_ratio`` is the net attraction divided by the ideal
    parallel-plate force for the same facing area and gap.
    """

    name: str
    description: str
    force_ratio: float


def scenario_catalog() -> tuple:
    """Reference ratios between resolved and ideal-plate attraction."""
    return (
        CorrectionScenario(
            name="narrow_pair",
            description=(
                "facing strips whose depth is comparable to the gap, free "
                "space around; wrap-around roughly doubles the pull"
            ),
            force_ratio=1.88,
        ),
        CorrectionScenario(
            name="narrow_pair_grounded_plane",
            description=(
                "narrow facing strips with a grounded plane behind the "
                "moving strip collecting stray field"
            ),
            force_ratio=2.1,
        ),
        CorrectionScenario(
            name="wide_pair",
            description=(
                "facing strips much deeper than the gap; near-ideal plate "
                "behavior with a thin fringing margin"
            ),
            force_ratio=1.05,
        ),
    )


@dataclass(frozen=True)
class CorrectionFactors:
    """Per-plane traction calibration factors (each >= 1 in free space)."""

    f_length: float
    f_width: float

    @property
    def product(self) -> float:
        return self.f_length * self.f_width


def _net_force_ratio(solution, span: float) -> float:
    """Net station traction integral over the ideal-plate force."""
    domain = solution.domain
    p = solution.station_pressure
    force = float(np.trapezoid(p, domain.stations))
    p_ideal = parallel_plate_pressure(solution.voltage, domain.gap)
    return force / (p_ideal * span)


def correction_factors(
    specimen,
    *,
    n_elements_length: int = 340,
    n_elements_width: int = 260,
) -> CorrectionFactors:
    """Calibrate both plane factors for a specimen's undeformed geometry."""
    dom_l = build_field_domain(specimen)
    sol_l = bem_solve(dom_l, 1.0, n_elements=n_elements_length)
    x0, x1 = dom_l.electrode_span
    f_length = _net_force_ratio(sol_l, x1 - x0)

    dom_w = build_width_plane_domain(specimen)
    sol_w = bem_solve(dom_w, 1.0, n_elements=n_elements_width)
    f_width = _net_force_ratio(sol_w, dom_w.stations[-1] - dom_w.stations[0])

    return CorrectionFactors(f_length=float(f_length), f_width=float(f_width))


def calibrate_correction(specimen, **kwargs) -> float:
    """Combined traction multiplier ``f_length * f_width``."""
    return correction_factors(specimen, **kwargs).product
