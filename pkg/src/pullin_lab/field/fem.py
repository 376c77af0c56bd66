"""Domain field solver on a structured triangulation of the gap region.

The dielectric region between the conductors is meshed once per call on
the *undeformed* geometry — a tensor grid aligned with every conductor
edge, graded toward the conductors and truncated by the outer box — and
then morphed so the beam-side hole follows the current deflection.  The
electrostatic potential solves the Laplace problem with the conductor
surfaces at their potentials and a natural (zero normal flux) condition
on the outer box.  Conductor surface charge comes from the discrete
reactions of the constrained nodes, which makes the total charge of each
conductor consistent with the discrete energy.

Morphing is harmonic by default: both displacement components satisfy a
discrete Laplace equation with the conductor and outer-box nodes pinned.
If the morph inverts an element a :class:`RemeshSignal` is raised; the
solver then falls back to a vertical shear map, which cannot invert a
band-aligned grid while the beam clears the electrode.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from ..errors import FieldSolverError, RemeshSignal, ValidationError
from .domain import Drive, FieldDomain
from .solution import FieldMethod, FieldSolution

__all__ = ["FieldMesh", "build_reference_mesh", "fem_solve", "morph_mesh"]


@dataclass(frozen=True)
class FieldMesh:
    """Triangulated dielectric region with tagged conductor nodes.

    ``groups`` maps conductor names (``beam``, ``electrode``, ``wafer``,
    ``outer``) to node-index arrays; ``front_idx`` / ``back_idx`` are the
    beam-hole nodes on the gap-facing and far surfaces ordered by station
    coordinate.
    """

    nodes: np.ndarray       # (n, 2)
    triangles: np.ndarray   # (m, 3) counter-clockwise
    groups: dict
    front_idx: np.ndarray
    back_idx: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def constrained(self) -> np.ndarray:
        return np.unique(np.concatenate(list(self.groups.values())))

    def signed_areas(self, nodes: np.ndarray | None = None) -> np.ndarray:
        p = self.nodes if nodes is None else nodes
        a, b, c = (p[self.triangles[:, k]] for k in range(3))
        return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
                      - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1]))


def _geometric_tail(start: float, end: float, h0: float,
                    growth: float = 1.45) -> np.ndarray:
    """Break points from start to end, first cell ~h0, geometrically growing.

    Works in either direction; endpoints are exact.
    """
    span = abs(end - start)
    if span <= h0:
        return np.array([start, end])
    n = max(1, int(np.ceil(np.log1p(span * (growth - 1.0) / h0)
                           / np.log(growth))))
    sizes = growth ** np.arange(n)
    cum = np.concatenate([[0.0], np.cumsum(sizes / sizes.sum())])
    out = start + (end - start) * cum
    out[0], out[-1] = start, end
    return out


def _axis_line(edges: np.ndarray, lo: float, hi: float,
               h_int: float) -> np.ndarray:
    """Grid line positions along one axis of the tensor mesh.

    ``edges`` are the conductor-rectangle edge coordinates (feature lines
    the grid must hit exactly).  Between features the spacing is uniform
    at ~``h_int``; outside the outermost features the cells grow
    geometrically toward the box ends ``lo``/``hi``.
    """
    edges = np.unique(np.asarray(edges, dtype=float))
    parts = [_geometric_tail(edges[0], lo, h_int)]
    for a, b in zip(edges[:-1], edges[1:]):
        n = int(np.clip(round((b - a) / h_int), 1, 400))
        parts.append(np.linspace(a, b, n + 1))
    parts.append(_geometric_tail(edges[-1], hi, h_int))
    return _dedup(np.unique(np.concatenate(parts)))


def _axis_breaks(domain: FieldDomain, scale: float) -> tuple:
    xb0, yb0, xb1, yb1 = domain.beam_rect
    xe0, ye0, xe1, ye1 = domain.electrode_rect
    xmin, ymin, xmax, ymax = domain.outer_box

    n_span = max(24, int(round(40 * scale)))
    n_gap = max(5, int(round(8 * scale)))
    n_band = max(2, int(round(2 * scale)))

    rects = [domain.beam_rect, domain.electrode_rect]
    if domain.wafer_rect is not None:
        rects.append(domain.wafer_rect)
    x_edges = [r[i] for r in rects for i in (0, 2)]
    y_edges = [r[i] for r in rects for i in (1, 3)]

    h_x = (xb1 - xb0) / n_span
    h_y = min((yb1 - yb0) / n_band, (ye0 - yb1) / n_gap,
              (ye1 - ye0) / n_band)
    return (_axis_line(x_edges, xmin, xmax, h_x),
            _axis_line(y_edges, ymin, ymax, h_y))


def _dedup(breaks: np.ndarray) -> np.ndarray:
    """Merge break values closer than a relative tolerance of the span."""
    tol = 1e-9 * (breaks[-1] - breaks[0])
    keep = np.concatenate([[True], np.diff(breaks) > tol])
    out = breaks[keep]
    out[-1] = breaks[-1]  # never drop the true endpoint
    return out


def _on_rect(nodes: np.ndarray, rect: tuple, tol: float) -> np.ndarray:
    x0, y0, x1, y1 = rect
    x, y = nodes[:, 0], nodes[:, 1]
    in_x = (x >= x0 - tol) & (x <= x1 + tol)
    in_y = (y >= y0 - tol) & (y <= y1 + tol)
    on_v = (np.abs(x - x0) <= tol) | (np.abs(x - x1) <= tol)
    on_h = (np.abs(y - y0) <= tol) | (np.abs(y - y1) <= tol)
    return (in_x & in_y) & (on_v | on_h)


def build_reference_mesh(domain: FieldDomain, scale: float = 1.0) -> FieldMesh:
    """Structured triangulation of the undeformed dielectric region.

    ``scale`` multiplies the base grid density (element count grows with
    its square).  Conductor footprints become holes whose boundary nodes
    are tagged; the outer box carries the ``outer`` tag.
    """
    if scale <= 0.0:
        raise ValidationError("mesh scale must be positive")
    xb, yb = _axis_breaks(domain, scale)
    nx, ny = xb.size, yb.size
    X, Y = np.meshgrid(xb, yb, indexing="ij")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    holes = [domain.beam_rect, domain.electrode_rect]
    if domain.wafer_rect is not None:
        holes.append(domain.wafer_rect)

    ci, cj = np.meshgrid(np.arange(nx - 1), np.arange(ny - 1), indexing="ij")
    ci, cj = ci.ravel(), cj.ravel()
    xc = 0.5 * (xb[ci] + xb[ci + 1])
    yc = 0.5 * (yb[cj] + yb[cj + 1])
    keep = np.ones(ci.size, dtype=bool)
    for x0, y0, x1, y1 in holes:
        keep &= ~((xc > x0) & (xc < x1) & (yc > y0) & (yc < y1))

    a = ci * ny + cj
    b = (ci + 1) * ny + cj
    c = (ci + 1) * ny + (cj + 1)
    d = ci * ny + (cj + 1)
    tris = np.concatenate([
        np.column_stack([a[keep], b[keep], c[keep]]),
        np.column_stack([a[keep], c[keep], d[keep]]),
    ])

    used, inverse = np.unique(tris, return_inverse=True)
    nodes = nodes[used]
    tris = inverse.reshape(tris.shape).astype(np.int64)

    tol = 1e-9 * max(xb[-1] - xb[0], yb[-1] - yb[0])
    groups = {}
    for name, rect in zip(("beam", "electrode", "wafer"), holes):
        groups[name] = np.flatnonzero(_on_rect(nodes, rect, tol))
    if domain.wafer_rect is None:
        groups.pop("wafer", None)
    on_box = (
        (np.abs(nodes[:, 0] - xb[0]) <= tol)
        | (np.abs(nodes[:, 0] - xb[-1]) <= tol)
        | (np.abs(nodes[:, 1] - yb[0]) <= tol)
        | (np.abs(nodes[:, 1] - yb[-1]) <= tol)
    )
    groups["outer"] = np.flatnonzero(on_box)

    xb0, yb0, xb1, yb1 = domain.beam_rect
    beam_nodes = groups["beam"]
    front = beam_nodes[np.abs(nodes[beam_nodes, 1] - yb1) <= tol]
    back = beam_nodes[np.abs(nodes[beam_nodes, 1] - yb0) <= tol]
    front = front[np.argsort(nodes[front, 0])]
    back = back[np.argsort(nodes[back, 0])]

    return FieldMesh(
        nodes=nodes,
        triangles=tris,
        groups=groups,
        front_idx=front,
        back_idx=back,
    )


def _p1_stiffness(nodes: np.ndarray, tris: np.ndarray,
                  coefficient: float = 1.0) -> sp.csr_matrix:
    p1, p2, p3 = (nodes[tris[:, k]] for k in range(3))
    b = np.stack([p2[:, 1] - p3[:, 1], p3[:, 1] - p1[:, 1],
                  p1[:, 1] - p2[:, 1]], axis=1)
    c = np.stack([p3[:, 0] - p2[:, 0], p1[:, 0] - p3[:, 0],
                  p2[:, 0] - p1[:, 0]], axis=1)
    area = 0.5 * ((p2[:, 0] - p1[:, 0]) * (p3[:, 1] - p1[:, 1])
                  - (p3[:, 0] - p1[:, 0]) * (p2[:, 1] - p1[:, 1]))
    if (area <= 0.0).any():
        raise FieldSolverError("triangulation contains inverted elements")
    ke = coefficient * (
        b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]
    ) / (4.0 * area[:, None, None])
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    n = nodes.shape[0]
    return sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def _dirichlet_solve(K: sp.csr_matrix, fixed: np.ndarray,
                     fixed_values: np.ndarray) -> np.ndarray:
    n = K.shape[0]
    free = np.setdiff1d(np.arange(n), fixed, assume_unique=False)
    phi = np.zeros(n)
    phi[fixed] = fixed_values
    rhs = -K[free][:, fixed] @ fixed_values
    phi[free] = spsolve(K[free][:, free].tocsc(), rhs)
    return phi


def morph_mesh(mesh: FieldMesh, boundary_displacement: np.ndarray) -> FieldMesh:
    """Harmonically extend boundary displacements into the mesh interior.

    ``boundary_displacement`` is an (n, 2) array; only the rows of tagged
    boundary nodes (conductors and outer box) are honored, interior nodes
    get the smooth extension.  Raises :class:`RemeshSignal` when the
    morphed mesh contains a non-positive triangle.
    """
    disp = np.asarray(boundary_displacement, dtype=float)
    if disp.shape != mesh.nodes.shape:
        raise ValidationError(
            "boundary displacement must match the mesh node array"
        )
    fixed = mesh.constrained
    K = _p1_stiffness(mesh.nodes, mesh.triangles, 1.0)
    out = np.empty_like(mesh.nodes)
    for comp in range(2):
        out[:, comp] = _dirichlet_solve(K, fixed, disp[fixed, comp])
    new_nodes = mesh.nodes + out
    areas = mesh.signed_areas(new_nodes)
    if areas.min() <= 0.0:
        raise RemeshSignal(min_area=float(areas.min()))
    return replace(mesh, nodes=new_nodes)


def _shear_nodes(mesh: FieldMesh, domain: FieldDomain) -> np.ndarray:
    """Vertical shear map following the beam deflection; never inverts a
    band-aligned grid while the local gap stays positive."""
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    _, yb0, _, yb1 = domain.beam_rect
    _, ye0, _, _ = domain.electrode_rect
    xmin, ymin, xmax, _ = domain.outer_box
    v = np.interp(x, domain.stations, domain.station_offsets)

    lam = np.zeros_like(y)
    in_beam = (y >= yb0) & (y <= yb1)
    in_gap = (y > yb1) & (y < ye0)
    below = y < yb0
    lam[in_beam] = 1.0
    lam[in_gap] = (ye0 - y[in_gap]) / (ye0 - yb1)
    lam[below] = (y[below] - ymin) / (yb0 - ymin)

    mu = np.ones_like(x)
    x0, x1 = domain.stations[0], domain.stations[-1]
    left = x < x0
    right = x > x1
    mu[left] = (x[left] - xmin) / max(x0 - xmin, 1e-300)
    mu[right] = (xmax - x[right]) / max(xmax - x1, 1e-300)

    out = mesh.nodes.copy()
    out[:, 1] += lam * mu * v
    return out


def fem_solve(
    domain: FieldDomain,
    voltage: float,
    *,
    mesh_scale: float = 1.0,
    morph: str = "harmonic",
) -> FieldSolution:
    """Solve the gap field on a morphed structured mesh.

    ``morph`` may be "harmonic" (smooth extension, shear fallback on
    inversion), "shear" (direct band shear), or "none" (solve on the
    undeformed reference mesh regardless of the domain's offsets).  The
    potential array and the deformed mesh are attached to the returned
    solution for inspection.
    """
    mesh = build_reference_mesh(domain, mesh_scale)
    dy = np.interp(mesh.nodes[:, 0], domain.stations, domain.station_offsets)

    deformed = mesh
    if np.abs(domain.station_offsets).max() > 0.0:
        if morph == "harmonic":
            disp = np.zeros_like(mesh.nodes)
            disp[mesh.groups["beam"], 1] = dy[mesh.groups["beam"]]
            try:
                deformed = morph_mesh(mesh, disp)
            except RemeshSignal:
                deformed = replace(mesh, nodes=_shear_nodes(mesh, domain))
        elif morph == "shear":
            deformed = replace(mesh, nodes=_shear_nodes(mesh, domain))
        elif morph != "none":
            raise ValidationError(f"unknown morph strategy: {morph!r}")
        areas = mesh.signed_areas(deformed.nodes)
        if areas.min() <= 0.0:
            raise RemeshSignal(min_area=float(areas.min()))

    K = _p1_stiffness(deformed.nodes, deformed.triangles, domain.permittivity)
    driven = "electrode" if domain.drive is Drive.COUNTER_ELECTRODE else "beam"
    fixed_parts = [(name, idx) for name, idx in deformed.groups.items()
                   if name != "outer"]
    fixed = np.concatenate([idx for _, idx in fixed_parts])
    values = np.concatenate([
        np.full(idx.size, 1.0 if name == driven else 0.0)
        for name, idx in fixed_parts
    ])
    order = np.argsort(fixed)
    fixed, values = fixed[order], values[order]
    phi_unit = _dirichlet_solve(K, fixed, values)
    reactions = K @ phi_unit  # nodal charge per depth at unit voltage

    charges = {
        name: float(voltage * reactions[idx].sum())
        for name, idx in deformed.groups.items() if name != "outer"
    }
    cap_per_depth = float(abs(reactions[deformed.groups["beam"]].sum()))

    sigma_front = voltage * _face_sigma(deformed, deformed.front_idx,
                                        reactions, domain.stations)
    sigma_back = voltage * _face_sigma(deformed, deformed.back_idx,
                                       reactions, domain.stations)

    return FieldSolution(
        method=FieldMethod.DOMAIN,
        domain=domain,
        voltage=float(voltage),
        sigma_front=sigma_front,
        sigma_back=sigma_back,
        capacitance_per_depth=cap_per_depth,
        charge_per_depth=charges,
        mesh=deformed,
        potential=voltage * phi_unit,
    )


def _face_sigma(mesh: FieldMesh, face_idx: np.ndarray, reactions: np.ndarray,
                stations: np.ndarray) -> np.ndarray:
    """Charge density along a face from nodal charges and tributary arcs.

    The two corner nodes are excluded — their reactions mix in the end
    faces — and stations beyond the last interior node take its value.
    """
    if face_idx.size < 4:
        raise FieldSolverError("conductor face is under-resolved")
    pos = mesh.nodes[face_idx]
    seg = np.hypot(*np.diff(pos, axis=0).T)
    interior = face_idx[1:-1]
    trib = 0.5 * (seg[:-1] + seg[1:])
    sigma = reactions[interior] / trib
    return np.interp(stations, pos[1:-1, 0], sigma)
