"""Independent reference models for cross-checking the coupled solver.

Everything here works from first principles with its own numerics: a rigid
parallel-plate model (closed form and brute-force energy scan), a single-mode
Ritz estimate of cantilever pull-in, and an inextensible-elastica solution of
the large-deflection tip-loaded cantilever.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .specimens import Material, Specimen, derive_section

#: Vacuum permittivity [F/m].
EPS0 = 8.854187817e-12


@dataclass(frozen=True)
class LumpedModel:
    """Rigid plate of area ``area`` on a linear spring above a fixed plate.

    Attributes
    ----------
    stiffness : float
        Spring constant k [N/m].
    gap : float
        Zero-voltage plate separation [m].
    area : float
        Overlap area [m^2].
    """

    stiffness: float
    gap: float
    area: float

    def __post_init__(self):
        if min(self.stiffness, self.gap, self.area) <= 0:
            raise ValidationError("stiffness, gap and area must be positive")

    def electrostatic_force(self, voltage: float, u: float) -> float:
        """Attractive force at plate displacement ``u`` [N]."""
        return 0.5 * EPS0 * self.area * voltage**2 / (self.gap - u) ** 2


def lumped_pullin(m: LumpedModel) -> tuple[float, float]:
    """Closed-form pull-in of the rigid-plate model.

    Returns
    -------
    (float, float)
        Pull-in voltage sqrt(8 k g^3 / (27 eps0 A)) and displacement g/3.
    """
    v = math.sqrt(8.0 * m.stiffness * m.gap**3 / (27.0 * EPS0 * m.area))
    return v, m.gap / 3.0


def lumped_pullin_bruteforce(m: LumpedModel, grid: int = 10_000) -> tuple[float, float]:
    """Pull-in of the rigid-plate model by scanning total energy.

    For each voltage on a grid the energy

        E(u) = 1/2 k u^2 - eps0 A V^2 / (2 (g - u))

    is sampled on a displacement grid over [0, g); pull-in is the largest
    voltage that still shows an interior local minimum. The voltage grid is
    searched by bisection over the (monotone) existence predicate, which
    visits the same grid points as a full scan.

    Returns
    -------
    (float, float)
        Pull-in voltage and the displacement of the last stable minimum,
        both grid-limited.
    """
    if grid < 1000:
        raise ValidationError(f"grid must be at least 1000, got {grid}")
    k, g, area = m.stiffness, m.gap, m.area
    v_cap = math.sqrt(k * g**3 / (EPS0 * area))  # above pull-in by 27/8 > 1
    u = np.linspace(0.0, g * (1.0 - 1e-6), grid)
    v_grid = np.linspace(0.0, v_cap, grid)

    def stable_index(v: float) -> int:
        """Index of an interior energy minimum, or -1."""
        energy = 0.5 * k * u**2 - 0.5 * EPS0 * area * v**2 / (g - u)
        interior = np.where(
            (energy[1:-1] < energy[:-2]) & (energy[1:-1] <= energy[2:])
        )[0]
        return int(interior[0]) + 1 if interior.size else -1

    lo, hi = 0, grid - 1  # invariant: stable at lo, assume unstable at hi
    if stable_index(v_grid[hi]) >= 0:
        raise ValidationError("voltage grid does not reach pull-in")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if stable_index(v_grid[mid]) >= 0:
            lo = mid
        else:
            hi = mid
    return float(v_grid[lo]), float(u[stable_index(v_grid[lo])])


def ritz_pullin(s: Specimen, material: Material | None = None,
                n_x: int = 801, n_amp: int = 2000,
                rel_tol: float = 1e-4) -> float:
    """Single-mode Ritz estimate of the cantilever pull-in voltage.

    Uses the kinematically admissible shape w(x) = a (1 - cos(pi x / 2 l)),
    linear bending energy, and the exact parallel-plate coenergy integrated
    over the counter-electrode span:

        Pi(a; V) = 1/2 E J a^2 I2 - eps0 w V^2 / 2 * int dx / (g - a phi)

    Pull-in is the largest voltage for which Pi still has an interior local
    minimum in the amplitude, located by bisection on the voltage.

    Notes
    -----
    Geometrically linear by construction; initial curvature and shear are
    not represented.
    """
    mat = material or s.material
    sec = derive_section(s)
    length, g = s.length, s.gap
    ej = mat.young_modulus * sec.second_moment

    x = np.linspace(0.0, length, n_x)
    shape = 1.0 - np.cos(0.5 * np.pi * x / length)
    i2 = (np.pi / (2.0 * length)) ** 4 * length / 2.0  # int (phi'')^2 dx
    x0, _ = s.electrode_span
    mask = x >= x0 - 1e-12 * length

    amp = np.linspace(0.0, g * 0.999, n_amp)
    gap_local = g - amp[:, None] * shape[None, mask]
    good = ~(gap_local <= 0.0).any(axis=1)
    coenergy = np.trapezoid(1.0 / np.where(gap_local > 0.0, gap_local, np.inf),
                            x[mask], axis=1)

    def has_energy_barrier(v: float) -> bool:
        # Below pull-in the energy rises again past the stable amplitude;
        # above it the curve falls monotonically toward contact.
        energy = 0.5 * ej * amp**2 * i2 - 0.5 * EPS0 * sec.depth * v**2 * coenergy
        return bool((np.diff(energy[good]) > 0.0).any())

    v_hi = 1.0
    for _ in range(80):
        if not has_energy_barrier(v_hi):
            break
        v_hi *= 2.0
    else:
        raise ValidationError("no pull-in found below voltage cap")
    v_lo = 0.5 * v_hi if v_hi > 1.0 else 0.0
    while v_hi - v_lo > rel_tol * v_hi:
        v_mid = 0.5 * (v_lo + v_hi)
        if has_energy_barrier(v_mid):
            v_lo = v_mid
        else:
            v_hi = v_mid
    return 0.5 * (v_lo + v_hi)


def elastica_tip(p: float, length: float, ej: float,
                 n_steps: int = 2000, tol: float = 1e-8) -> float:
    """Tip deflection of an inextensible cantilever under a dead end load.

    Integrates the elastica equation theta'' = -(P/EJ) cos(theta) along the
    arc with classical 4th-order Runge-Kutta and finds the free-end moment
    condition theta'(L) = 0 by bisection shooting on the root curvature.

    Parameters
    ----------
    p : float
        Transverse dead load at the tip [N], acting toward positive
        deflection.
    length : float
        Beam length [m].
    ej : float
        Bending stiffness [N m^2].
    tol : float
        Relative tolerance on the tip boundary condition.

    Returns
    -------
    float
        Transverse tip deflection [m].
    """
    if p == 0.0:
        return 0.0
    if p < 0 or length <= 0 or ej <= 0:
        raise ValidationError("p must be non-negative, length and ej positive")
    load = p / ej
    h = length / n_steps

    def shoot(kappa0: float):
        """(theta'(L), y(L)) for root curvature kappa0."""
        state = np.array([0.0, kappa0, 0.0])  # theta, theta', y

        def rhs(s):
            return np.array([s[1], -load * math.cos(s[0]), math.sin(s[0])])

        for _ in range(n_steps):
            k1 = rhs(state)
            k2 = rhs(state + 0.5 * h * k1)
            k3 = rhs(state + 0.5 * h * k2)
            k4 = rhs(state + h * k3)
            state = state + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return state[1], state[2]

    scale = load * length
    lo, hi = 0.0, scale  # residual < 0 at lo (straight), >= 0 at hi
    if shoot(hi)[0] < 0:
        raise ValidationError("shooting bracket failed")
    while hi - lo > tol * scale:
        mid = 0.5 * (lo + hi)
        if shoot(mid)[0] < 0.0:
            lo = mid
        else:
            hi = mid
    _, deflection = shoot(0.5 * (lo + hi))
    return deflection
