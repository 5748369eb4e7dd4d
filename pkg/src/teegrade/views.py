"""Geometric templates and quality checklists for the 10 captured views.

Each view renders as a fan-shaped scan containing a handful of ellipse/arc
primitives in normalised image coordinates (x right, y down, unit square).
The checklist length per view: views 1, 2, 3, 8, 10 carry five criteria and
views 4, 5, 6, 7, 9 carry four. ``structure-visible`` criteria point at the
primitive they control; the geometric criteria (rotation / centering /
depth) displace the whole layout when unmet.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

ROTATION = "rotation-in-band"
VISIBLE = "structure-visible"
CENTERED = "centered"
DEPTH = "depth-correct"

CRITERION_KINDS = (ROTATION, VISIBLE, CENTERED, DEPTH)


@dataclass(frozen=True)
class Structure:
    """One rendered primitive: a filled ellipse or an elliptical ring band."""

    kind: str  # "ellipse" | "arc"
    center: tuple[float, float]
    radii: tuple[float, float]
    intensity: float
    thickness: float = 0.35  # arcs only: ring band width as fraction of radius


@dataclass(frozen=True)
class Criterion:
    kind: str
    structure: Optional[int] = None  # index into ViewSpec.structures for VISIBLE

    def __post_init__(self):
        if self.kind not in CRITERION_KINDS:
            raise ValueError(f"unknown criterion kind {self.kind!r}")
        if (self.kind == VISIBLE) != (self.structure is not None):
            raise ValueError("structure index is required iff kind is structure-visible")


@dataclass(frozen=True)
class ViewSpec:
    view_id: int
    opening_deg: float
    structures: tuple[Structure, ...]
    checklist: tuple[Criterion, ...]

    @property
    def n_criteria(self) -> int:
        return len(self.checklist)


def _e(cx, cy, rx, ry, val):
    return Structure("ellipse", (cx, cy), (rx, ry), val)


def _a(cx, cy, rx, ry, val, thickness=0.35):
    return Structure("arc", (cx, cy), (rx, ry), val, thickness)


DEFAULT_VIEWS: tuple[ViewSpec, ...] = (
    # 1: mid-esophageal four-chamber, tricuspid focus
    ViewSpec(
        1,
        78.0,
        (
            _e(0.38, 0.38, 0.10, 0.13, 0.06),
            _e(0.62, 0.38, 0.10, 0.12, 0.07),
            _e(0.38, 0.66, 0.11, 0.15, 0.04),
            _e(0.62, 0.66, 0.11, 0.14, 0.05),
        ),
        (
            Criterion(ROTATION),
            Criterion(VISIBLE, 0),
            Criterion(VISIBLE, 3),
            Criterion(CENTERED),
            Criterion(DEPTH),
        ),
    ),
    # 2: mid-esophageal two-chamber
    ViewSpec(
        2,
        70.0,
        (
            _e(0.50, 0.36, 0.13, 0.12, 0.05),
            _e(0.50, 0.68, 0.14, 0.18, 0.04),
            _a(0.50, 0.52, 0.10, 0.05, 0.85, 0.5),
        ),
        (
            Criterion(ROTATION),
            Criterion(VISIBLE, 0),
            Criterion(VISIBLE, 1),
            Criterion(CENTERED),
            Criterion(DEPTH),
        ),
    ),
    # 3: mid-esophageal aortic-valve short-axis (annulus + cusps between atria)
    ViewSpec(
        3,
        64.0,
        (
            _a(0.50, 0.48, 0.12, 0.12, 0.90, 0.35),
            _e(0.50, 0.48, 0.05, 0.05, 0.75),
            _e(0.28, 0.44, 0.08, 0.10, 0.05),
            _e(0.72, 0.46, 0.08, 0.10, 0.06),
        ),
        (
            Criterion(ROTATION),
            Criterion(CENTERED),
            Criterion(VISIBLE, 1),
            Criterion(DEPTH),
            Criterion(DEPTH),
        ),
    ),
    # 4: transgastric mid short-axis (ring with dark cavity)
    ViewSpec(
        4,
        72.0,
        (
            _a(0.50, 0.62, 0.16, 0.15, 0.80, 0.40),
            _e(0.50, 0.62, 0.07, 0.065, 0.05),
        ),
        (
            Criterion(ROTATION),
            Criterion(VISIBLE, 0),
            Criterion(CENTERED),
            Criterion(DEPTH),
        ),
    ),
    # 5: mid-esophageal right-ventricle inflow-outflow
    ViewSpec(
        5,
        68.0,
        (
            _e(0.34, 0.52, 0.10, 0.12, 0.05),
            _a(0.58, 0.40, 0.14, 0.11, 0.80, 0.25),
            _e(0.68, 0.62, 0.08, 0.08, 0.06),
        ),
        (
            Criterion(ROTATION),
            Criterion(VISIBLE, 1),
            Criterion(VISIBLE, 2),
            Criterion(DEPTH),
        ),
    ),
    # 6: mid-esophageal aortic-valve long-axis
    ViewSpec(
        6,
        66.0,
        (
            _e(0.52, 0.58, 0.20, 0.10, 0.05),
            _e(0.68, 0.40, 0.06, 0.06, 0.85),
            _e(0.34, 0.42, 0.09, 0.07, 0.06),
        ),
        (
            Criterion(ROTATION),
            Criterion(VISIBLE, 1),
            Criterion(CENTERED),
            Criterion(DEPTH),
        ),
    ),
    # 7: transgastric two-chamber (chambers left, valve apparatus right)
    ViewSpec(
        7,
        74.0,
        (
            _e(0.40, 0.58, 0.13, 0.15, 0.045),
            _e(0.66, 0.44, 0.09, 0.10, 0.06),
            _a(0.60, 0.58, 0.07, 0.09, 0.90, 0.40),
            _e(0.60, 0.70, 0.06, 0.03, 0.80),
        ),
        (
            Criterion(ROTATION),
            Criterion(VISIBLE, 0),
            Criterion(VISIBLE, 2),
            Criterion(VISIBLE, 3),
        ),
    ),
    # 8: mid-esophageal four-chamber, left-ventricle focus
    ViewSpec(
        8,
        76.0,
        (
            _e(0.36, 0.40, 0.09, 0.11, 0.06),
            _e(0.64, 0.40, 0.09, 0.10, 0.05),
            _e(0.58, 0.68, 0.15, 0.17, 0.035),
            _a(0.46, 0.54, 0.12, 0.05, 0.85, 0.5),
        ),
        (
            Criterion(ROTATION),
            Criterion(VISIBLE, 2),
            Criterion(VISIBLE, 3),
            Criterion(CENTERED),
            Criterion(DEPTH),
        ),
    ),
    # 9: deep transgastric long-axis
    ViewSpec(
        9,
        84.0,
        (
            _e(0.50, 0.70, 0.17, 0.13, 0.04),
            _a(0.50, 0.42, 0.13, 0.10, 0.80, 0.30),
        ),
        (
            Criterion(ROTATION),
            Criterion(VISIBLE, 0),
            Criterion(VISIBLE, 1),
            Criterion(DEPTH),
        ),
    ),
    # 10: mid-esophageal mitral commissural (three bright scallops over a chamber)
    ViewSpec(
        10,
        70.0,
        (
            _e(0.50, 0.64, 0.19, 0.14, 0.04),
            _e(0.36, 0.46, 0.045, 0.04, 0.90),
            _e(0.50, 0.44, 0.045, 0.04, 0.90),
            _e(0.64, 0.46, 0.045, 0.04, 0.90),
        ),
        (
            Criterion(ROTATION),
            Criterion(VISIBLE, 1),
            Criterion(VISIBLE, 2),
            Criterion(VISIBLE, 3),
            Criterion(CENTERED),
        ),
    ),
)

VIEWS_BY_ID = {v.view_id: v for v in DEFAULT_VIEWS}
