"""Plane-frame beam finite elements for the cantilever.

Two-node Timoshenko elements with three DOFs per node (axial u, transverse v,
rotation theta). Shear flexibility enters through the parameter

    phi = 12 E J / (k_s G A L^2)

which modifies the Hermitian bending stiffness. Geometric nonlinearity is
handled corotationally: local deformations are measured against the rotated
element chord and the tangent adds the string-stiffening terms from the
current axial force and end moments.

Sign convention inside this module: positive v is the bending direction of
positive curvature, i.e. a positive initial curvature deflects the beam
toward positive v. The coupling layer orients this axis relative to the
counter-electrode.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg as sla

from .errors import LimitPointSignal, NonConvergenceError, NumericalError, ValidationError
from .specimens import InitialState, Material, Section, Specimen, derive_section
from .specimens import curvature_from_tip_offset  # noqa: F401  (re-export)

# 4-point Gauss rule on [-1, 1], used across the thickness for thermal terms
_GAUSS4_X = np.array([-0.8611363115940526, -0.3399810435848563,
                      0.3399810435848563, 0.8611363115940526])
_GAUSS4_W = np.array([0.3478548451374538, 0.6521451548625461,
                      0.6521451548625461, 0.3478548451374538])


class Reference(Enum):
    """Configuration a displacement field refers to."""

    UNDEFORMED = "undeformed"
    UPDATED = "updated"


@dataclass(frozen=True)
class BeamMesh:
    """1D mesh of the cantilever, clamped at node 0.

    Nodes are axial stations in [0, length]; elements connect consecutive
    nodes.
    """

    nodes: np.ndarray
    section: Section
    material: Material

    def __post_init__(self):
        x = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", x)
        if x.ndim != 1 or x.size < 5:
            raise ValidationError("mesh needs at least 4 elements")
        if x[0] != 0.0 or np.any(np.diff(x) <= 0):
            raise ValidationError("mesh nodes must increase strictly from 0")

    @property
    def n_nodes(self) -> int:
        return self.nodes.size

    @property
    def n_elements(self) -> int:
        return self.nodes.size - 1

    @property
    def n_dof(self) -> int:
        return 3 * self.n_nodes

    @property
    def element_lengths(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def length(self) -> float:
        return float(self.nodes[-1])


@dataclass
class Displacement:
    """Nodal displacement field of a beam mesh.

    Attributes
    ----------
    x : ndarray
        Undeformed node positions [m].
    u, v, theta : ndarray
        Axial, transverse, and rotation components per node.
    reference : Reference
        Whether the field came from the undeformed-geometry (linear) or the
        updated-geometry (corotational) solver.
    """

    x: np.ndarray
    u: np.ndarray
    v: np.ndarray
    theta: np.ndarray
    reference: Reference = Reference.UNDEFORMED

    @classmethod
    def zeros(cls, mesh: BeamMesh, reference: Reference = Reference.UNDEFORMED):
        n = mesh.n_nodes
        return cls(mesh.nodes.copy(), np.zeros(n), np.zeros(n), np.zeros(n), reference)

    @classmethod
    def from_dofs(cls, mesh: BeamMesh, d: np.ndarray, reference: Reference):
        return cls(mesh.nodes.copy(), d[0::3].copy(), d[1::3].copy(),
                   d[2::3].copy(), reference)

    def dofs(self) -> np.ndarray:
        d = np.empty(3 * self.x.size)
        d[0::3], d[1::3], d[2::3] = self.u, self.v, self.theta
        return d

    def copy(self) -> "Displacement":
        return Displacement(self.x.copy(), self.u.copy(), self.v.copy(),
                            self.theta.copy(), self.reference)


@dataclass
class LoadState:
    """Loads acting on a beam mesh.

    ``distributed_load`` is a transverse line load per element [N/m] (uniform
    within each element, zero allowed). Nodal arrays hold concentrated loads.
    ``equivalent_initial`` is the assembled load vector representing the
    initial strain/curvature state.
    """

    distributed_load: np.ndarray      # (n_elements,) [N/m]
    transverse_force: np.ndarray      # (n_nodes,)    [N]
    moment: np.ndarray                # (n_nodes,)    [N m]
    axial_force: np.ndarray           # (n_nodes,)    [N]
    equivalent_initial: np.ndarray    # (3 n_nodes,)

    @classmethod
    def zeros(cls, mesh: BeamMesh):
        ne, n = mesh.n_elements, mesh.n_nodes
        return cls(np.zeros(ne), np.zeros(n), np.zeros(n), np.zeros(n),
                   np.zeros(3 * n))

    @classmethod
    def tip_force(cls, mesh: BeamMesh, p: float):
        """Concentrated transverse load at the free end."""
        ls = cls.zeros(mesh)
        ls.transverse_force[-1] = p
        return ls


def build_mesh(s: Specimen, n_elements: int = 40) -> BeamMesh:
    """Uniform mesh over the specimen length.

    Raises
    ------
    ValidationError
        If fewer than 4 elements are requested.
    """
    if n_elements < 4:
        raise ValidationError(f"n_elements must be at least 4, got {n_elements}")
    nodes = np.linspace(0.0, s.length, n_elements + 1)
    return BeamMesh(nodes, derive_section(s), s.material)


def shear_parameter(material: Material, section: Section, length: float) -> float:
    """Dimensionless shear flexibility phi of one element."""
    e, g = material.young_modulus, material.shear_modulus
    return 12.0 * e * section.second_moment / (
        section.shear_correction * g * section.area * length**2
    )


def _local_stiffness(material: Material, section: Section, length: float) -> np.ndarray:
    """3x3 stiffness on the natural DOFs (stretch, end rotations)."""
    phi = shear_parameter(material, section, length)
    a = material.young_modulus * section.second_moment / ((1.0 + phi) * length)
    ea = material.young_modulus * section.area / length
    return np.array([
        [ea, 0.0, 0.0],
        [0.0, (4.0 + phi) * a, (2.0 - phi) * a],
        [0.0, (2.0 - phi) * a, (4.0 + phi) * a],
    ])


def element_matrices(length: float, material: Material, section: Section,
                     axial_force: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Material and geometric stiffness of one element, 6x6 each.

    DOF order is (u1, v1, theta1, u2, v2, theta2). The geometric matrix is
    the consistent string-stiffening matrix scaled by ``axial_force`` and
    vanishes for zero axial force.

    Returns
    -------
    (ndarray, ndarray)
        Material stiffness and geometric stiffness.
    """
    if length <= 0:
        raise ValidationError("element length must be positive")
    kl = _local_stiffness(material, section, length)
    b0 = _linear_strain_map(length)
    k = b0.T @ kl @ b0

    n, L = axial_force, length
    kg4 = n / (30.0 * L) * np.array([
        [36.0, 3.0 * L, -36.0, 3.0 * L],
        [3.0 * L, 4.0 * L**2, -3.0 * L, -L**2],
        [-36.0, -3.0 * L, 36.0, -3.0 * L],
        [3.0 * L, -L**2, -3.0 * L, 4.0 * L**2],
    ])
    kg = np.zeros((6, 6))
    bend = np.ix_([1, 2, 4, 5], [1, 2, 4, 5])
    kg[bend] = kg4
    return k, kg


def _linear_strain_map(length: float) -> np.ndarray:
    """Natural-DOF extraction matrix at zero rotation (3x6)."""
    il = 1.0 / length
    return np.array([
        [-1.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        [0.0, il, 1.0, 0.0, -il, 0.0],
        [0.0, il, 0.0, 0.0, -il, 1.0],
    ])


# ---------------------------------------------------------------------------
# load vectors


def initial_state_loads(init: InitialState, mesh: BeamMesh) -> np.ndarray:
    """Equivalent nodal loads for an initial strain/curvature state.

    Each element receives self-equilibrated end loads so that, held at its
    ends, it carries the resultants

        N = E A (strain - strain_T) + axial_preload
        M = E J (curvature - curvature_T) + moment_preload

    where the thermal terms are strain_T(x) = alpha T0(x) and
    curvature_T(x) = alpha/J * integral_A y T(x, y) dA, the latter integrated
    with a 4-point Gauss rule across the thickness. A clamped beam under
    these loads alone deflects to v(x) = curvature x^2 / 2 for a pure
    initial curvature.
    """
    sec, mat = mesh.section, mesh.material
    e, alpha = mat.young_modulus, mat.thermal_expansion
    t = sec.flexural_dim
    x_mid = 0.5 * (mesh.nodes[:-1] + mesh.nodes[1:])

    t0 = init.temp_uniform
    strain_t = alpha * (t0(x_mid) if callable(t0) else t0 * np.ones_like(x_mid))
    tf = init.temp_field
    if callable(tf):
        y = 0.5 * t * _GAUSS4_X
        w = 0.5 * t * _GAUSS4_W
        # integral_A y T dA = depth * sum_g w_g y_g T(x, y_g)
        samples = np.array([[tf(xm, yg) for yg in y] for xm in x_mid])
        moment_int = sec.depth * samples @ (w * y)
        curv_t = alpha * moment_int / sec.second_moment
    else:
        curv_t = np.zeros_like(x_mid)  # constant T has zero first moment

    n_eq = e * sec.area * (init.strain - strain_t) + init.axial_preload
    m_eq = e * sec.second_moment * (init.curvature - curv_t) + init.moment_preload

    f = np.zeros(mesh.n_dof)
    i = np.arange(mesh.n_elements)
    np.add.at(f, 3 * i, -n_eq)
    np.add.at(f, 3 * (i + 1), n_eq)
    np.add.at(f, 3 * i + 2, -m_eq)
    np.add.at(f, 3 * (i + 1) + 2, m_eq)
    return f


def load_vector(mesh: BeamMesh, loads: LoadState) -> np.ndarray:
    """Assembled global load vector (3 n_nodes,)."""
    f = np.zeros(mesh.n_dof)
    f[0::3] += loads.axial_force
    f[1::3] += loads.transverse_force
    f[2::3] += loads.moment

    q = np.asarray(loads.distributed_load, dtype=float)
    el_len = mesh.element_lengths
    i = np.arange(mesh.n_elements)
    np.add.at(f, 3 * i + 1, 0.5 * q * el_len)
    np.add.at(f, 3 * (i + 1) + 1, 0.5 * q * el_len)
    np.add.at(f, 3 * i + 2, q * el_len**2 / 12.0)
    np.add.at(f, 3 * (i + 1) + 2, -q * el_len**2 / 12.0)

    return f + loads.equivalent_initial


# ---------------------------------------------------------------------------
# linear solve


def _assemble_linear(mesh: BeamMesh) -> np.ndarray:
    k = np.zeros((mesh.n_dof, mesh.n_dof))
    for i, length in enumerate(mesh.element_lengths):
        ke, _ = element_matrices(length, mesh.material, mesh.section)
        sl = slice(3 * i, 3 * i + 6)
        k[sl, sl] += ke
    return k


def solve_linear(mesh: BeamMesh, loads: LoadState) -> Displacement:
    """Small-displacement solve on the undeformed geometry."""
    k = _assemble_linear(mesh)
    f = load_vector(mesh, loads)
    d = np.zeros(mesh.n_dof)
    try:
        cho = sla.cho_factor(k[3:, 3:], check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular stiffness matrix: {exc}")
    d[3:] = sla.cho_solve(cho, f[3:], check_finite=False)
    return Displacement.from_dofs(mesh, d, Reference.UNDEFORMED)


# ---------------------------------------------------------------------------
# corotational nonlinear solve


def _corotational(mesh: BeamMesh, d: np.ndarray):
    """Internal force vector and consistent tangent for nodal DOFs ``d``."""
    x = mesh.nodes
    u, v, th = d[0::3], d[1::3], d[2::3]
    l0 = mesh.element_lengths
    du = u[1:] - u[:-1]
    dx = l0 + du
    dy = v[1:] - v[:-1]
    lc = np.hypot(dx, dy)
    c, s = dx / lc, dy / lc
    beta = np.arctan2(dy, dx)
    # stretch via a cancellation-free form of lc - l0
    ubar = (du * (dx + l0) + dy**2) / (lc + l0)
    tb1 = th[:-1] - beta
    tb2 = th[1:] - beta

    mat, sec = mesh.material, mesh.section
    phi = shear_parameter(mat, sec, l0)
    a = mat.young_modulus * sec.second_moment / ((1.0 + phi) * l0)
    n_ax = mat.young_modulus * sec.area * ubar / l0
    m1 = a * ((4.0 + phi) * tb1 + (2.0 - phi) * tb2)
    m2 = a * ((2.0 - phi) * tb1 + (4.0 + phi) * tb2)

    ne = mesh.n_elements
    zero = np.zeros(ne)
    one = np.ones(ne)
    r = np.stack([-c, -s, zero, c, s, zero], axis=1)
    z = np.stack([s, -c, zero, -s, c, zero], axis=1)
    zl = z / lc[:, None]
    b2 = np.stack([zero, zero, one, zero, zero, zero], axis=1) - zl
    b3 = np.stack([zero, zero, zero, zero, zero, one], axis=1) - zl

    f_el = n_ax[:, None] * r + m1[:, None] * b2 + m2[:, None] * b3

    ea_l = mat.young_modulus * sec.area / l0
    k22 = (4.0 + phi) * a
    k23 = (2.0 - phi) * a

    def outer(p, q):
        return np.einsum("ei,ej->eij", p, q)

    k_el = (
        ea_l[:, None, None] * outer(r, r)
        + k22[:, None, None] * (outer(b2, b2) + outer(b3, b3))
        + k23[:, None, None] * (outer(b2, b3) + outer(b3, b2))
        + (n_ax / lc)[:, None, None] * outer(z, z)
        + ((m1 + m2) / lc**2)[:, None, None] * (outer(r, z) + outer(z, r))
    )

    edof = (3 * np.arange(ne))[:, None] + np.arange(6)[None, :]
    f_int = np.zeros(mesh.n_dof)
    np.add.at(f_int, edof, f_el)
    k_t = np.zeros((mesh.n_dof, mesh.n_dof))
    np.add.at(k_t, (edof[:, :, None], edof[:, None, :]), k_el)
    return f_int, k_t, (n_ax, m1, m2)


def solve_nonlinear(mesh: BeamMesh, load_fn, tol: float = 1e-9,
                    max_iter: int = 30, initial: Displacement | None = None) -> Displacement:
    """Newton iteration on the corotational equilibrium equations.

    ``load_fn`` maps the current :class:`Displacement` to a :class:`LoadState`
    and is re-evaluated every iteration, so displacement-dependent loads are
    permitted. Convergence is declared when the relative displacement
    increment norm drops below ``tol``.

    Raises
    ------
    LimitPointSignal
        If the tangent stiffness loses positive definiteness.
    NonConvergenceError
        If ``max_iter`` is exhausted; both carry the last iterate.
    """
    d = initial.dofs() if initial is not None else np.zeros(mesh.n_dof)
    d[:3] = 0.0
    disp = Displacement.from_dofs(mesh, d, Reference.UPDATED)
    for _ in range(max_iter):
        f_ext = load_vector(mesh, load_fn(disp))
        f_int, k_t, _ = _corotational(mesh, d)
        res = f_ext - f_int
        try:
            cho = sla.cho_factor(k_t[3:, 3:], check_finite=False)
        except np.linalg.LinAlgError:
            raise LimitPointSignal(disp)
        delta = sla.cho_solve(cho, res[3:], check_finite=False)
        d[3:] += delta
        disp = Displacement.from_dofs(mesh, d, Reference.UPDATED)
        if np.linalg.norm(delta) <= tol * max(np.linalg.norm(d[3:]), 1e-30):
            return disp
    raise NonConvergenceError(disp, max_iter)


def element_resultants(mesh: BeamMesh, d: Displacement) -> tuple[np.ndarray, np.ndarray]:
    """Axial force and mid-element bending moment per element.

    Computed from the corotational local deformations, so N = E A eps and
    M = E J kappa hold exactly for manufactured uniform fields.
    """
    _, _, (n_ax, m1, m2) = _corotational(mesh, d.dofs())
    m_mid = 0.5 * (m2 - m1)
    return n_ax, m_mid


def tip_deflection(d: Displacement) -> float:
    """Transverse displacement of the free end [m]."""
    return float(d.v[-1])
