"""Geometry of the 2D electrostatic domains.

Two planes are modeled, both as collications of closed conductor outlines
inside a truncated outer box:

* the *length plane* contains the beam axis and the deflection direction.
  The beam appears as a strip of height ``flexural_dim`` whose gap-facing
  surface follows the current deflection ``v(x)`` (positive toward the
  counter-electrode); the counter-electrode is a parallel strip across the
  gap.  Out-of-plane layouts may add a grounded wafer strip beside the
  electrode where the beam is not covered by it.
* the *width plane* is a cross-section perpendicular to the beam axis,
  used to calibrate how much the finite extrusion depth changes the net
  attraction.  In-plane layouts place the wafer surface a release distance
  below the lateral edge of both conductors; out-of-plane layouts expose
  the wafer surface next to the counter-electrode.

Coordinates in every plane: the facing direction is ``+y`` (the beam's
gap-facing surface near ``y = 0``, the electrode surface at ``y = gap``)
and the station coordinate runs along ``x``.  Surface rotations are
ignored when offsetting the outline; slopes stay small against unity for
every catalog geometry.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import ContactSignal, ValidationError
from ..oracles import EPS0
from ..specimens import Layout, Specimen, TipShape, derive_section

__all__ = [
    "Drive",
    "FieldDomain",
    "build_field_domain",
    "build_width_plane_domain",
]


class Drive(enum.Enum):
    """Which conductor carries the applied potential (the other is ground)."""

    COUNTER_ELECTRODE = "counter_electrode"
    BEAM = "beam"


def _as_rect(x0: float, y0: float, x1: float, y1: float) -> tuple:
    return (float(x0), float(y0), float(x1), float(y1))


def _rect_outline(rect: tuple) -> np.ndarray:
    x0, y0, x1, y1 = rect
    return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float)


@dataclass(frozen=True)
class FieldDomain:
    """Closed conductor outlines plus the bookkeeping to load the beam.

    Outlines are (n, 2) vertex arrays; the edge from the last vertex back
    to the first is implied.  ``stations`` are sample positions along the
    beam's gap-facing surface (the structural nodes, in the length plane)
    at which surface charge is reported; ``station_offsets`` is the facing
    surface's displacement toward the electrode at those stations.

    The ``*_rect`` fields hold the undeformed axis-aligned footprint of
    each conductor, which the structured domain mesher requires; the
    outlines are the deformed shapes the boundary solver integrates over.
    """

    plane: str
    beam_outline: np.ndarray
    electrode_outline: np.ndarray
    wafer_outline: np.ndarray | None
    outer_box: tuple
    stations: np.ndarray
    station_offsets: np.ndarray
    local_gaps: np.ndarray
    electrode_span: tuple
    gap: float
    depth: float
    thickness: float
    beam_rect: tuple = field(default=())
    electrode_rect: tuple = field(default=())
    wafer_rect: tuple | None = field(default=None)
    permittivity: float = EPS0
    drive: Drive = Drive.COUNTER_ELECTRODE
    n_front: int = field(default=0)  # vertices of beam_outline on the front face

    @property
    def min_gap(self) -> float:
        """Smallest beam/electrode separation over the electrode span."""
        x0, x1 = self.electrode_span
        covered = (self.stations >= x0 - 1e-12) & (self.stations <= x1 + 1e-12)
        if not covered.any():
            return float(self.gap)
        return float(self.local_gaps[covered].min())

    @property
    def conductor_outlines(self) -> list:
        out = [self.beam_outline, self.electrode_outline]
        if self.wafer_outline is not None:
            out.append(self.wafer_outline)
        return out


def _tip_cap(tip_shape: TipShape, x_tip: float, y_front: float,
             thickness: float) -> np.ndarray:
    """Vertices between the front and back tip corners, tip pointing +x."""
    if tip_shape is TipShape.RECTANGULAR:
        return np.empty((0, 2), dtype=float)
    yc = y_front - 0.5 * thickness
    r = 0.5 * thickness
    if tip_shape is TipShape.SHARP_TRIANGULAR:
        return np.array([[x_tip + r, yc]], dtype=float)
    # Rounded: semicircle from the front corner, bulging past the tip.
    ang = np.linspace(0.0, np.pi, 7)[1:-1]
    pts = np.column_stack([x_tip + r * np.sin(ang), yc + r * np.cos(ang)])
    return pts


def _beam_outline(x: np.ndarray, v: np.ndarray, thickness: float,
                  tip_shape: TipShape) -> tuple[np.ndarray, int]:
    """Closed outline: front root->tip, tip cap, back tip->root."""
    front = np.column_stack([x, v])
    back = np.column_stack([x[::-1], v[::-1] - thickness])
    cap = _tip_cap(tip_shape, float(x[-1]), float(v[-1]), thickness)
    outline = np.vstack([front, cap, back])
    return outline, front.shape[0]


def build_field_domain(
    specimen: Specimen,
    displacement=None,
    *,
    margin_gaps: float = 5.0,
    drive: Drive = Drive.COUNTER_ELECTRODE,
    n_stations: int = 41,
) -> FieldDomain:
    """Length-plane domain for a specimen in its current deformed shape.

    ``displacement`` may be a structural displacement field (anything with
    ``x`` and ``v`` arrays, ``v`` positive toward the electrode) or None
    for the undeformed shape.  Raises :class:`ContactSignal` when the
    facing surface reaches the electrode anywhere under it.
    """
    if margin_gaps < 1.0:
        raise ValidationError("margin_gaps must be at least 1")
    sec = derive_section(specimen)
    t = sec.flexural_dim
    length = specimen.length
    gap = specimen.gap

    if displacement is not None:
        x = np.asarray(displacement.x, dtype=float)
        v = np.asarray(displacement.v, dtype=float)
        if x.shape != v.shape or x.ndim != 1 or x.size < 2:
            raise ValidationError("displacement must provide matching 1D x and v")
    else:
        x = np.linspace(0.0, length, n_stations)
        v = np.zeros_like(x)

    local_gaps = gap - v
    x0e, x1e = specimen.electrode_span
    covered = (x >= x0e - 1e-12) & (x <= x1e + 1e-12)
    if covered.any() and local_gaps[covered].min() <= 0.0:
        raise ContactSignal(min_gap=float(local_gaps[covered].min()))

    beam_outline, n_front = _beam_outline(x, v, t, specimen.tip_shape)
    beam_rect = _as_rect(0.0, -t, length, 0.0)
    te = t  # electrode strip modeled with the beam's own layer thickness
    electrode_rect = _as_rect(x0e, gap, x1e, gap + te)
    electrode_outline = _rect_outline(electrode_rect)

    wafer_rect = None
    wafer_outline = None
    if specimen.layout is Layout.OUT_OF_PLANE and specimen.wafer_surface_present:
        # Exposed wafer surface under the uncovered part of the beam,
        # separated from the electrode edge by one layer thickness.
        wx1 = x0e - te
        if wx1 > 2.0 * te:
            wafer_rect = _as_rect(0.0, gap + te, wx1, gap + 2.0 * te)
            wafer_outline = _rect_outline(wafer_rect)

    m = margin_gaps * gap
    ylo = min(float((v - t).min()), gap) - m
    yhi = gap + 2.0 * te + m
    outer_box = _as_rect(-m, ylo, length + t + m, yhi)

    return FieldDomain(
        plane="length",
        beam_outline=beam_outline,
        electrode_outline=electrode_outline,
        wafer_outline=wafer_outline,
        outer_box=outer_box,
        stations=x,
        station_offsets=v,
        local_gaps=local_gaps,
        electrode_span=(float(x0e), float(x1e)),
        gap=gap,
        depth=sec.depth,
        thickness=t,
        beam_rect=beam_rect,
        electrode_rect=electrode_rect,
        wafer_rect=wafer_rect,
        drive=drive,
        n_front=n_front,
    )


def build_width_plane_domain(
    specimen: Specimen,
    *,
    wafer_distance: float | None = None,
    margin_gaps: float = 5.0,
    drive: Drive = Drive.COUNTER_ELECTRODE,
    n_stations: int = 61,
) -> FieldDomain:
    """Cross-section domain used for the depth-direction calibration.

    The section is taken where the counter-electrode faces the beam; the
    station coordinate runs across the extrusion depth.  The strip height
    of both conductors is the flexural dimension, and the facing span is
    the depth, so the parallel-plate reference force per unit length of
    beam is ``p * depth``.

    For in-plane layouts with a wafer surface present, a grounded slab is
    placed ``wafer_distance`` (default: one gap) below the lateral edge
    of the conductor pair.  For out-of-plane layouts the wafer surface is
    exposed beside the electrode at the substrate level.
    """
    if margin_gaps < 1.0:
        raise ValidationError("margin_gaps must be at least 1")
    sec = derive_section(specimen)
    t = sec.flexural_dim
    w = sec.depth
    gap = specimen.gap
    te = t

    x = np.linspace(0.0, w, n_stations)
    v = np.zeros_like(x)

    beam_rect = _as_rect(0.0, -t, w, 0.0)
    beam_outline, n_front = _beam_outline(x, v, t, TipShape.RECTANGULAR)
    electrode_rect = _as_rect(0.0, gap, w, gap + te)
    electrode_outline = _rect_outline(electrode_rect)

    wafer_rect = None
    m = margin_gaps * gap
    if specimen.wafer_surface_present:
        if specimen.layout is Layout.IN_PLANE:
            dw = gap if wafer_distance is None else float(wafer_distance)
            if dw <= 0.0:
                raise ValidationError("wafer_distance must be positive")
            # Slab below the lateral edge, spanning past both conductors.
            wafer_rect = _as_rect(-dw - t, -t - 2.0 * gap, -dw, gap + te + 2.0 * gap)
        else:
            # Exposed substrate beside the electrode, at the wafer level.
            wafer_rect = _as_rect(w + te, gap + te, w + te + m, gap + 2.0 * te)
    wafer_outline = _rect_outline(wafer_rect) if wafer_rect is not None else None

    xlo = -m if wafer_rect is None or specimen.layout is not Layout.IN_PLANE \
        else wafer_rect[0] - m
    xhi = max(w, wafer_rect[2] if wafer_rect is not None else w) + m
    ylo = min(-t, wafer_rect[1] if wafer_rect is not None else -t) - m
    yhi = max(gap + te, wafer_rect[3] if wafer_rect is not None else gap + te) + m
    outer_box = _as_rect(xlo, ylo, xhi, yhi)

    return FieldDomain(
        plane="width",
        beam_outline=beam_outline,
        electrode_outline=electrode_outline,
        wafer_outline=wafer_outline,
        outer_box=outer_box,
        stations=x,
        station_offsets=v,
        local_gaps=gap - v,
        electrode_span=(0.0, float(w)),
        gap=gap,
        depth=1.0,
        thickness=t,
        beam_rect=beam_rect,
        electrode_rect=electrode_rect,
        wafer_rect=wafer_rect,
        drive=drive,
        n_front=n_front,
    )
