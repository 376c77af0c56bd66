"""Specimen definitions: geometry, material, and initial state.

A specimen is a microcantilever above (or beside) a fixed counter-electrode.
Two bending layouts are supported: in-plane, where the beam deflects parallel
to the wafer surface and the flexural dimension is the structural-layer
thickness, and out-of-plane, where it deflects toward the substrate.

The built-in catalog holds twelve reference specimens (eight in-plane, four
out-of-plane). Where a measured dimension is only known as a range, the
midpoint is used and the range is kept as metadata.
"""

from __future__ import annotations

import json
import math
import os
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from pathlib import Path

from .errors import ParseError, ValidationError

#: Environment variable that points at an alternative catalog data directory.
SEED_DIR_ENV = "PULLIN_LAB_SEED_DIR"

#: Timoshenko shear correction for rectangular sections.
SHEAR_CORRECTION_RECT = 5.0 / 6.0


class Layout(Enum):
    """Bending plane of the cantilever relative to the wafer."""

    IN_PLANE = "in_plane"
    OUT_OF_PLANE = "out_of_plane"


class TipShape(Enum):
    """Free-end outline used when the field domain is built."""

    RECTANGULAR = "rectangular"
    ROUNDED = "rounded"
    SHARP_TRIANGULAR = "sharp_triangular"


@dataclass(frozen=True)
class Material:
    """Linear elastic, isotropic material.

    Attributes
    ----------
    name : str
        Identifying name, e.g. ``"gold"``.
    young_modulus : float
        Young's modulus [Pa].
    poisson_ratio : float
        Poisson's ratio [-].
    thermal_expansion : float
        Linear thermal expansion coefficient [1/K].
    """

    name: str
    young_modulus: float
    poisson_ratio: float
    thermal_expansion: float = 0.0

    def __post_init__(self):
        if self.young_modulus <= 0:
            raise ValidationError(f"young_modulus must be positive, got {self.young_modulus}")
        if not 0 <= self.poisson_ratio < 0.5:
            raise ValidationError(f"poisson_ratio must be in [0, 0.5), got {self.poisson_ratio}")
        if self.thermal_expansion < 0:
            raise ValidationError("thermal_expansion must be non-negative")

    @property
    def shear_modulus(self) -> float:
        """Shear modulus G = E / (2 (1 + nu)) [Pa]."""
        return self.young_modulus / (2.0 * (1.0 + self.poisson_ratio))


@dataclass(frozen=True)
class Section:
    """Rectangular cross-section resultants for the beam model.

    ``flexural_dim`` is the dimension in the bending direction and ``depth``
    the dimension along the bending axis (the electrode-facing width).
    """

    area: float               # [m^2]
    second_moment: float      # [m^4]
    flexural_dim: float       # [m]
    depth: float              # [m]
    shear_correction: float = SHEAR_CORRECTION_RECT

    def __post_init__(self):
        if self.area <= 0 or self.second_moment <= 0:
            raise ValidationError("section area and second moment must be positive")


@dataclass(frozen=True)
class InitialState:
    """Stress/strain state frozen into the beam before any voltage is applied.

    ``curvature`` follows the specimen sign convention: positive curls the
    beam away from the counter-electrode (the as-fabricated direction), so a
    positive value increases the tip gap. Temperature entries are offsets
    from the stress-free temperature; ``temp_uniform`` may be a constant or a
    function of the axial coordinate x, ``temp_field`` a constant or a
    function (x, y) with y measured across the flexural dimension.
    """

    strain: float = 0.0              # [-]
    curvature: float = 0.0           # [1/m]
    axial_preload: float = 0.0       # [N]
    moment_preload: float = 0.0      # [N m]
    temp_uniform: float | Callable[[float], float] = 0.0
    temp_field: float | Callable[[float, float], float] = 0.0

    def is_zero(self) -> bool:
        return self == InitialState()


@dataclass(frozen=True)
class Specimen:
    """One cantilever/counter-electrode configuration.

    All dimensions in meters. ``counter_electrode_extent`` measures the
    electrode span from the beam tip backwards; ``None`` means the full beam
    length. ``wafer_surface_present`` defaults by layout (in-plane devices
    sit next to a grounded wafer surface that screens fringing fields).
    ``ranges`` keeps measured (min, max) bounds for ranged catalog entries
    and is excluded from equality.
    """

    id: str
    layout: Layout
    length: float
    width: float
    thickness: float
    gap: float
    tip_offset: float = 0.0
    tip_shape: TipShape = TipShape.ROUNDED
    counter_electrode_extent: float | None = None
    wafer_surface_present: bool | None = None
    material: Material = field(default_factory=lambda: _default_material())
    initial_state: InitialState = field(default_factory=InitialState)
    ranges: Mapping[str, tuple[float, float]] = field(
        default_factory=dict, compare=False, repr=False
    )

    def __post_init__(self):
        for name in ("length", "width", "thickness", "gap"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")
        if self.tip_offset < 0:
            raise ValidationError("tip_offset must be non-negative")
        if self.counter_electrode_extent is None:
            object.__setattr__(self, "counter_electrode_extent", self.length)
        elif not 0 < self.counter_electrode_extent <= self.length:
            raise ValidationError(
                "counter_electrode_extent must lie in (0, length]"
            )
        if self.wafer_surface_present is None:
            object.__setattr__(
                self, "wafer_surface_present", self.layout is Layout.IN_PLANE
            )

    @property
    def electrode_span(self) -> tuple[float, float]:
        """Axial interval [x0, x1] covered by the counter-electrode.

        The electrode is anchored at the tip side: an extent e covers
        [length - e, length].
        """
        return (self.length - self.counter_electrode_extent, self.length)


def _default_material() -> Material:
    return Material(
        "epitaxial polysilicon",
        young_modulus=160e9,
        poisson_ratio=0.22,
        thermal_expansion=2.6e-6,
    )


def derive_section(s: Specimen) -> Section:
    """Cross-section resultants for the bending plane of ``s``.

    For both layouts the flexural dimension is the thickness and the depth
    the width: in-plane devices bend across their (thin) structural-layer
    thickness, out-of-plane devices across the deposited film thickness.

    Returns
    -------
    Section
        Area w*t, second moment w*t^3/12, shear correction 5/6.
    """
    t, w = s.thickness, s.width
    return Section(
        area=w * t,
        second_moment=w * t**3 / 12.0,
        flexural_dim=t,
        depth=w,
    )


def curvature_from_tip_offset(tip_offset: float, length: float) -> float:
    """Constant curvature that produces ``tip_offset`` at the free end.

    Small-curvature closed form: offset = kappa * length^2 / 2.
    """
    if length <= 0:
        raise ValidationError("length must be positive")
    return 2.0 * tip_offset / length**2


def with_catalog_curvature(s: Specimen) -> Specimen:
    """Copy of ``s`` whose initial state carries the curvature implied by its
    tip offset (positive, i.e. curled away from the counter-electrode)."""
    kappa = curvature_from_tip_offset(s.tip_offset, s.length)
    return replace(s, initial_state=replace(s.initial_state, curvature=kappa))


# ---------------------------------------------------------------------------
# catalog


def _data_dir() -> Path | None:
    override = os.environ.get(SEED_DIR_ENV)
    if override:
        return Path(override)
    return None


def _load_catalog_doc() -> dict:
    override = _data_dir()
    if override is not None:
        path = override / "catalog.json"
        try:
            text = path.read_text()
        except OSError as exc:
            raise ParseError(f"cannot read catalog from {SEED_DIR_ENV}={override}: {exc}")
    else:
        text = resources.files("pullin_lab.data").joinpath("catalog.json").read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"catalog.json is not valid JSON: {exc}")


def _midpoint(value) -> tuple[float, tuple[float, float] | None]:
    """Collapse a scalar-or-[min, max] catalog value to (midpoint, range)."""
    if isinstance(value, (list, tuple)):
        lo, hi = float(value[0]), float(value[1])
        return 0.5 * (lo + hi), (lo, hi)
    return float(value), None


def material_library() -> dict[str, Material]:
    """Built-in materials keyed by name."""
    doc = _load_catalog_doc()
    out = {}
    for name, props in doc["materials"].items():
        out[name] = Material(
            name,
            young_modulus=props["young_modulus_pa"],
            poisson_ratio=props["poisson_ratio"],
            thermal_expansion=props.get("thermal_expansion_per_k", 0.0),
        )
    return out


def catalog() -> list[Specimen]:
    """The built-in reference specimens, in id order.

    Ranged dimensions are collapsed to midpoints; the (min, max) bounds stay
    available in ``Specimen.ranges``.
    """
    doc = _load_catalog_doc()
    materials = material_library()
    specimens = []
    for entry in doc["specimens"]:
        ranges = {}
        fields = {}
        for key in ("length_m", "width_m", "thickness_m", "gap_m", "tip_offset_m"):
            if key not in entry:
                continue
            mid, rng = _midpoint(entry[key])
            fields[key[:-2]] = mid
            if rng is not None:
                ranges[key[:-2]] = rng
        specimens.append(
            Specimen(
                id=str(entry["id"]),
                layout=Layout(entry["layout"]),
                length=fields["length"],
                width=fields["width"],
                thickness=fields["thickness"],
                gap=fields["gap"],
                tip_offset=fields.get("tip_offset", 0.0),
                material=materials[entry["material"]],
                ranges=ranges,
            )
        )
    return specimens


def catalog_by_id(specimen_id: str) -> Specimen:
    """Catalog lookup by id string; raises ``KeyError`` for unknown ids."""
    for s in catalog():
        if s.id == specimen_id:
            return s
    raise KeyError(f"no catalog specimen with id {specimen_id!r}")


# ---------------------------------------------------------------------------
# config documents

_SPECIMEN_KEYS = {
    "id", "layout", "length_m", "width_m", "thickness_m", "gap_m",
    "tip_offset_m", "tip_shape", "counter_electrode_extent_m", "wafer_surface",
}
_MATERIAL_KEYS = {"name", "young_modulus_pa", "poisson_ratio", "thermal_expansion_per_k"}
_INITIAL_KEYS = {"strain", "curvature_per_m", "axial_preload_n", "moment_preload_nm"}
_TOP_KEYS = {"specimen", "material", "initial_state", "solver"}


def _require_number(block: Mapping, block_name: str, key: str, default=None):
    if key not in block:
        if default is None:
            raise ParseError(f"{block_name}.{key} is required")
        return default
    value = block[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{block_name}.{key} must be a number, got {value!r}")
    return float(value)


def _check_keys(block: Mapping, allowed: set[str], block_name: str):
    if not isinstance(block, Mapping):
        raise ParseError(f"{block_name} must be an object")
    unknown = set(block) - allowed
    if unknown:
        raise ParseError(f"unknown field {block_name}.{sorted(unknown)[0]}")


def load_specimen(source) -> Specimen:
    """Build a :class:`Specimen` from a config document.

    ``source`` may be a parsed mapping, a JSON string, or a filesystem path.
    The document layout is::

        {"specimen": {...}, "material": {...}, "initial_state": {...}}

    ``material`` defaults to the built-in polysilicon; unknown fields raise
    :class:`ParseError`, non-physical values :class:`ValidationError`.
    """
    doc = _coerce_document(source)
    _check_keys(doc, _TOP_KEYS, "config")
    if "specimen" not in doc:
        raise ParseError("config.specimen is required")
    sp = doc["specimen"]
    _check_keys(sp, _SPECIMEN_KEYS, "specimen")

    layout_raw = sp.get("layout")
    try:
        layout = Layout(layout_raw)
    except ValueError:
        raise ParseError(
            f"specimen.layout must be one of {[k.value for k in Layout]}, got {layout_raw!r}"
        )
    tip_shape_raw = sp.get("tip_shape", TipShape.ROUNDED.value)
    try:
        tip_shape = TipShape(tip_shape_raw)
    except ValueError:
        raise ParseError(
            f"specimen.tip_shape must be one of {[k.value for k in TipShape]}, got {tip_shape_raw!r}"
        )

    length = _require_number(sp, "specimen", "length_m")
    gap = _require_number(sp, "specimen", "gap_m")
    if gap <= 0:
        raise ValidationError("specimen.gap_m: gap must be positive")
    extent = sp.get("counter_electrode_extent_m")
    if extent is not None:
        extent = _require_number(sp, "specimen", "counter_electrode_extent_m")
    wafer = sp.get("wafer_surface")
    if wafer is not None and not isinstance(wafer, bool):
        raise ParseError("specimen.wafer_surface must be a boolean")

    material = _parse_material(doc.get("material"))
    initial = _parse_initial_state(doc.get("initial_state"))

    return Specimen(
        id=str(sp.get("id", "custom")),
        layout=layout,
        length=length,
        width=_require_number(sp, "specimen", "width_m"),
        thickness=_require_number(sp, "specimen", "thickness_m"),
        gap=gap,
        tip_offset=_require_number(sp, "specimen", "tip_offset_m", default=0.0),
        tip_shape=tip_shape,
        counter_electrode_extent=extent,
        wafer_surface_present=wafer,
        material=material,
        initial_state=initial,
    )


def _coerce_document(source) -> Mapping:
    if isinstance(source, Mapping):
        return source
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise ParseError(f"cannot read config file {source}: {exc}")
    else:
        text = source
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"config is not valid JSON: {exc}")
    if not isinstance(doc, Mapping):
        raise ParseError("config root must be an object")
    return doc


def _parse_material(block) -> Material:
    if block is None:
        return _default_material()
    _check_keys(block, _MATERIAL_KEYS, "material")
    name = block.get("name", "custom")
    builtin = material_library().get(name)
    if builtin is not None and "young_modulus_pa" not in block:
        return builtin
    return Material(
        name,
        young_modulus=_require_number(block, "material", "young_modulus_pa"),
        poisson_ratio=_require_number(block, "material", "poisson_ratio"),
        thermal_expansion=_require_number(block, "material", "thermal_expansion_per_k", default=0.0),
    )


def _parse_initial_state(block) -> InitialState:
    if block is None:
        return InitialState()
    _check_keys(block, _INITIAL_KEYS, "initial_state")
    return InitialState(
        strain=_require_number(block, "initial_state", "strain", default=0.0),
        curvature=_require_number(block, "initial_state", "curvature_per_m", default=0.0),
        axial_preload=_require_number(block, "initial_state", "axial_preload_n", default=0.0),
        moment_preload=_require_number(block, "initial_state", "moment_preload_nm", default=0.0),
    )


def specimen_to_config(s: Specimen) -> dict:
    """Round-trippable config document for ``s`` (temperature profiles are
    programmatic and not serialized)."""
    doc = {
        "specimen": {
            "id": s.id,
            "layout": s.layout.value,
            "length_m": s.length,
            "width_m": s.width,
            "thickness_m": s.thickness,
            "gap_m": s.gap,
            "tip_offset_m": s.tip_offset,
            "tip_shape": s.tip_shape.value,
            "counter_electrode_extent_m": s.counter_electrode_extent,
            "wafer_surface": s.wafer_surface_present,
        },
        "material": {
            "name": s.material.name,
            "young_modulus_pa": s.material.young_modulus,
            "poisson_ratio": s.material.poisson_ratio,
            "thermal_expansion_per_k": s.material.thermal_expansion,
        },
    }
    init = s.initial_state
    if not init.is_zero():
        if callable(init.temp_uniform) or callable(init.temp_field) \
                or init.temp_uniform or init.temp_field:
            raise ValidationError("temperature profiles cannot be serialized")
        doc["initial_state"] = {
            "strain": init.strain,
            "curvature_per_m": init.curvature,
            "axial_preload_n": init.axial_preload,
            "moment_preload_nm": init.moment_preload,
        }
    return doc
