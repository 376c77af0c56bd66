"""Boundary-integral field solver on the conductor outlines.

Indirect single-layer formulation: an unknown charge density ``sigma`` on
the conductor surfaces generates the 2D potential

    phi(X) = -1/(2 pi eps0) * Integral sigma(y) ln(|X - y| / L_ref) ds(y) + c

The floating constant ``c`` together with an overall charge-neutrality
constraint removes the gauge dependence on ``L_ref`` and plays the role
of a far-away return path.  The density is piecewise linear on the
outline elements and collocated at the nodes; influence integrals use a
Gauss rule on well-separated elements, a subdivided rule on close ones,
and closed forms on the two elements adjacent to the collocation point.

The solve is done once at unit drive voltage and scaled, so the reported
capacitance is exact for every voltage of the same geometry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from ..errors import FieldSolverError, ValidationError
from .domain import Drive, FieldDomain
from .solution import FieldMethod, FieldSolution

__all__ = ["bem_solve"]

_GAUSS8_X, _GAUSS8_W = np.polynomial.legendre.leggauss(8)
_G8T = 0.5 * (_GAUSS8_X + 1.0)
_G8W = 0.5 * _GAUSS8_W

# Composite rule for nearly-singular integrals: 8 panels x 8 points.
_NEAR_T = np.concatenate([(k + _G8T) / 8.0 for k in range(8)])
_NEAR_W = np.concatenate([_G8W / 8.0 for _ in range(8)])

_CONDUCTOR_NAMES = ("beam", "electrode", "wafer")


@dataclass
class _BoundaryMesh:
    nodes: np.ndarray          # (N, 2)
    n1: np.ndarray             # (E,) element start node
    n2: np.ndarray             # (E,) element end node
    conductor: np.ndarray      # (N,) 0 beam / 1 electrode / 2 wafer
    front_idx: np.ndarray      # beam facing-surface nodes, root -> tip
    back_idx: np.ndarray       # beam far-surface nodes, root -> tip

    @property
    def lengths(self) -> np.ndarray:
        return np.hypot(*(self.nodes[self.n2] - self.nodes[self.n1]).T)

    @property
    def weights(self) -> np.ndarray:
        """Tributary arc length of each node."""
        w = np.zeros(self.nodes.shape[0])
        h = self.lengths
        np.add.at(w, self.n1, 0.5 * h)
        np.add.at(w, self.n2, 0.5 * h)
        return w


def _uniform_ts(m: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, m + 1)


def _cosine_ts(m: int) -> np.ndarray:
    return 0.5 * (1.0 - np.cos(np.linspace(0.0, np.pi, m + 1)))


def _graded_counts(x: np.ndarray, total: int, ratio: float) -> np.ndarray:
    """Subdivision count per polyline segment, sizes shrinking toward the
    far end by roughly ``ratio``."""
    xm = 0.5 * (x[:-1] + x[1:])
    span = x[-1] - x[0]
    rel = (xm - x[0]) / span if span > 0 else np.zeros_like(xm)
    density = 1.0 / (ratio - (ratio - 1.0) * rel)
    weight = density * np.diff(x)
    counts = np.maximum(1, np.rint(total * weight / weight.sum()).astype(int))
    return counts


def _closed_polyline(poly: np.ndarray, edge_ts: list) -> np.ndarray:
    pts = []
    k = poly.shape[0]
    for i in range(k):
        p, q = poly[i], poly[(i + 1) % k]
        ts = np.asarray(edge_ts[i])[:-1]
        pts.append(p + np.outer(ts, q - p))
    return np.vstack(pts)


def _discretize(domain: FieldDomain, n_elements: int) -> _BoundaryMesh:
    if n_elements < 80:
        raise ValidationError("n_elements must be at least 80")

    nf = domain.n_front
    outline = domain.beam_outline
    n_total = outline.shape[0]
    n_cap = n_total - 2 * nf  # vertices strictly between front and back runs

    n_front_el = max(nf - 1, int(round(0.40 * n_elements)))
    n_back_el = max(nf - 1, int(round(0.18 * n_elements)))
    n_etop = int(round(0.26 * n_elements))
    n_eback = max(6, n_etop // 7)

    # Beam outline: front edges, cap edges, back edges, root closure edge.
    front_x = outline[:nf, 0]
    front_counts = _graded_counts(front_x, n_front_el, ratio=5.0)
    back_x = outline[nf + n_cap:, 0]  # tip -> root
    back_counts = _graded_counts(back_x[::-1], n_back_el, ratio=2.0)[::-1]
    h_front = (front_x[-1] - front_x[0]) / max(int(front_counts.sum()), 1)

    def _end_face_count(p, q) -> int:
        size = float(np.hypot(*(q - p)))
        return int(np.clip(np.ceil(size / (1.5 * h_front)), 1, 8))

    cap_counts = [
        _end_face_count(outline[nf - 1 + i], outline[(nf + i) % outline.shape[0]])
        for i in range(n_cap + 1)
    ]
    edge_ts: list = [_uniform_ts(int(m)) for m in front_counts]
    edge_ts += [_uniform_ts(m) for m in cap_counts]
    edge_ts += [_uniform_ts(int(m)) for m in back_counts]
    edge_ts += [_uniform_ts(_end_face_count(outline[-1], outline[0]))]
    beam_nodes = _closed_polyline(outline, edge_ts)

    front_idx = np.arange(int(front_counts.sum()) + 1)
    back_start = int(front_counts.sum()) + int(sum(cap_counts))
    back_idx = back_start + np.arange(int(back_counts.sum()) + 1)
    back_idx = back_idx[::-1].copy()  # generated tip -> root; report root -> tip

    # Electrode: facing edge first in the outline, then sides and back.
    e_ts = [_cosine_ts(n_etop), _uniform_ts(2), _uniform_ts(n_eback),
            _uniform_ts(2)]
    electrode_nodes = _closed_polyline(domain.electrode_outline, e_ts)

    parts = [beam_nodes, electrode_nodes]
    conductor = [np.zeros(len(beam_nodes), dtype=int),
                 np.ones(len(electrode_nodes), dtype=int)]
    if domain.wafer_outline is not None:
        wo = domain.wafer_outline
        edge_len = np.hypot(*(np.roll(wo, -1, axis=0) - wo).T)
        n_wafer = max(16, int(round(0.10 * n_elements)))
        counts = np.maximum(
            2, np.round(n_wafer * edge_len / edge_len.sum()).astype(int))
        w_ts = [_uniform_ts(int(c)) for c in counts]
        wafer_nodes = _closed_polyline(domain.wafer_outline, w_ts)
        parts.append(wafer_nodes)
        conductor.append(np.full(len(wafer_nodes), 2, dtype=int))

    sizes = [len(p) for p in parts]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    nodes = np.vstack(parts)
    n1_list, n2_list = [], []
    for part_id, size in enumerate(sizes):
        base = offsets[part_id]
        idx = base + np.arange(size)
        n1_list.append(idx)
        n2_list.append(base + (np.arange(size) + 1) % size)
    return _BoundaryMesh(
        nodes=nodes,
        n1=np.concatenate(n1_list),
        n2=np.concatenate(n2_list),
        conductor=np.concatenate(conductor),
        front_idx=front_idx,
        back_idx=back_idx,
    )


def _influence_matrix(mesh: _BoundaryMesh, l_ref: float) -> np.ndarray:
    """phi_j = sum_n A[j, n] t_n on gap-scaled geometry.

    The unknown is the scaled density ``t = sigma * scale / eps0`` so all
    matrix entries stay O(1) and the condition estimate is meaningful.
    """
    X = mesh.nodes
    n = X.shape[0]
    A = np.zeros((n, n))
    pref = -1.0 / (2.0 * np.pi)
    shape1_far = _G8W * (1.0 - _G8T)
    shape2_far = _G8W * _G8T
    shape1_near = _NEAR_W * (1.0 - _NEAR_T)
    shape2_near = _NEAR_W * _NEAR_T

    for e in range(mesh.n1.size):
        i1, i2 = int(mesh.n1[e]), int(mesh.n2[e])
        p, q = X[i1], X[i2]
        tvec = q - p
        h = float(np.hypot(*tvec))
        if h <= 0.0:
            raise FieldSolverError("degenerate boundary element")

        ygauss = p + np.outer(_G8T, tvec)
        diff = X[:, None, :] - ygauss[None, :, :]
        lnr = np.log(np.hypot(diff[:, :, 0], diff[:, :, 1]) / l_ref)
        c1 = h * (lnr @ shape1_far)
        c2 = h * (lnr @ shape2_far)

        # Nearly-singular collocation points: subdivide the quadrature.
        proj = np.clip(((X - p) @ tvec) / (h * h), 0.0, 1.0)
        foot = p + proj[:, None] * tvec
        dist = np.hypot(*(X - foot).T)
        near = dist < 3.0 * h
        near[i1] = near[i2] = False
        if near.any():
            ynear = p + np.outer(_NEAR_T, tvec)
            diff = X[near, None, :] - ynear[None, :, :]
            lnr = np.log(np.hypot(diff[:, :, 0], diff[:, :, 1]) / l_ref)
            c1[near] = h * (lnr @ shape1_near)
            c2[near] = h * (lnr @ shape2_near)

        # Closed forms for the two touching collocation points:
        # Int_0^h (1 - s/h) ln(s/L) ds = h (ln(h/L)/2 - 3/4)
        # Int_0^h (s/h)     ln(s/L) ds = h (ln(h/L)/2 - 1/4)
        lhl = np.log(h / l_ref)
        c1[i1] = h * (0.5 * lhl - 0.75)
        c2[i1] = h * (0.5 * lhl - 0.25)
        c1[i2] = h * (0.5 * lhl - 0.25)
        c2[i2] = h * (0.5 * lhl - 0.75)

        A[:, i1] += pref * c1
        A[:, i2] += pref * c2
    return A


def bem_solve(
    domain: FieldDomain,
    voltage: float,
    *,
    n_elements: int = 340,
) -> FieldSolution:
    """Solve the outline problem and report beam surface charge.

    The driven conductor (per ``domain.drive``) is set to the voltage,
    everything else to ground.  Raises :class:`FieldSolverError` when the
    augmented collocation system is numerically singular.
    """
    mesh = _discretize(domain, n_elements)
    n = mesh.nodes.shape[0]
    scale = domain.gap
    scaled = _BoundaryMesh(
        nodes=mesh.nodes / scale, n1=mesh.n1, n2=mesh.n2,
        conductor=mesh.conductor, front_idx=mesh.front_idx,
        back_idx=mesh.back_idx,
    )
    A = _influence_matrix(scaled, l_ref=1.0)
    w_scaled = scaled.weights
    w = mesh.weights

    system = np.zeros((n + 1, n + 1))
    system[:n, :n] = A
    system[:n, n] = 1.0              # floating reference constant
    system[n, :n] = w_scaled         # total charge vanishes
    rhs = np.zeros(n + 1)
    driven = 1 if domain.drive is Drive.COUNTER_ELECTRODE else 0
    rhs[:n] = np.where(mesh.conductor == driven, 1.0, 0.0)

    try:
        lu_piv = lu_factor(system)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - defensive
        raise FieldSolverError(f"boundary system factorization failed: {exc}")
    condition = _reciprocal_condition(system, lu_piv[0])
    if condition is not None and condition < 1e-13:
        raise FieldSolverError(
            f"boundary system is numerically singular (rcond={condition:.2e})"
        )
    sigma_unit = lu_solve(lu_piv, rhs)[:n] * (domain.permittivity / scale)

    sigma = voltage * sigma_unit
    x_front = mesh.nodes[mesh.front_idx, 0]
    x_back = mesh.nodes[mesh.back_idx, 0]
    sigma_front = np.interp(domain.stations, x_front, sigma[mesh.front_idx])
    sigma_back = np.interp(domain.stations, x_back, sigma[mesh.back_idx])

    charges = {}
    for cid, name in enumerate(_CONDUCTOR_NAMES):
        mask = mesh.conductor == cid
        if mask.any():
            charges[name] = float(np.sum(w[mask] * sigma[mask]))
    beam_mask = mesh.conductor == 0
    cap_per_depth = float(abs(np.sum(w[beam_mask] * sigma_unit[beam_mask])))

    return FieldSolution(
        method=FieldMethod.BOUNDARY,
        domain=domain,
        voltage=float(voltage),
        sigma_front=sigma_front,
        sigma_back=sigma_back,
        capacitance_per_depth=cap_per_depth,
        charge_per_depth=charges,
        condition=condition,
    )


def _reciprocal_condition(system: np.ndarray, lu: np.ndarray) -> float | None:
    """1-norm reciprocal condition estimate from the LU factors."""
    try:
        from scipy.linalg import lapack

        anorm = np.linalg.norm(system, 1)
        rcond, info = lapack.dgecon(lu, anorm, norm="1")
        return float(rcond) if info == 0 else None
    except Exception:  # pragma: no cover - diagnostic only
        return None
