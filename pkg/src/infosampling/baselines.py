"""Non-informative waypoint generators: boustrophedon sweep and random draws."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .field import GridField

__all__ = ["LawnmowerSpec", "lawnmower_path", "leg_count", "random_waypoints"]

HORIZONTAL = "horizontal"
VERTICAL = "vertical"


@dataclass(frozen=True)
class LawnmowerSpec:
    """Serpentine sweep over an inclusive cell rectangle.

    ``region`` is ``(row0, col0, row1, col1)``. With ``horizontal``
    orientation the legs run along rows and are stacked ``spacing`` rows
    apart; ``vertical`` swaps the roles.
    """

    region: tuple[int, int, int, int]
    spacing: int
    orientation: str = HORIZONTAL

    def __post_init__(self):
        r0, c0, r1, c1 = self.region
        if r1 < r0 or c1 < c0:
            raise ValueError(f"empty region {self.region}")
        if self.spacing < 1:
            raise ValueError("spacing must be >= 1")
        if self.orientation not in (HORIZONTAL, VERTICAL):
            raise ValueError(f"unknown orientation {self.orientation!r}")

    @classmethod
    def whole_grid(cls, field: GridField, spacing: int, orientation=HORIZONTAL):
        return cls((0, 0, field.height - 1, field.width - 1), spacing, orientation)

    @property
    def across(self) -> int:
        """Region extent perpendicular to the legs."""
        r0, c0, r1, c1 = self.region
        return (r1 - r0 + 1) if self.orientation == HORIZONTAL else (c1 - c0 + 1)


def leg_count(spec: LawnmowerSpec) -> int:
    return math.ceil(spec.across / spec.spacing)


def _leg_offsets(spec: LawnmowerSpec) -> list[int]:
    # each leg runs through the middle of its band of `spacing` lines
    out = []
    for k in range(leg_count(spec)):
        lo = k * spec.spacing
        hi = min(lo + spec.spacing, spec.across) - 1
        out.append((lo + hi) // 2)
    return out


def lawnmower_path(spec: LawnmowerSpec, field: GridField) -> list[tuple[int, int]]:
    """Leg endpoints in serpentine order, clipped to sampleable cells."""
    r0, c0, r1, c1 = spec.region
    if r1 >= field.height or c1 >= field.width or r0 < 0 or c0 < 0:
        raise ValueError(f"region {spec.region} exceeds grid {field.shape}")
    waypoints = []
    forward = True
    for off in _leg_offsets(spec):
        if spec.orientation == HORIZONTAL:
            r = r0 + off
            line = [(r, c) for c in range(c0, c1 + 1)]
        else:
            c = c0 + off
            line = [(r, c) for r in range(r0, r1 + 1)]
        ok = [cell for cell in line if field.mask[cell]]
        if not ok:
            continue
        ends = [ok[0], ok[-1]] if len(ok) > 1 else [ok[0]]
        waypoints.extend(ends if forward else ends[::-1])
        forward = not forward
    if not waypoints:
        raise ValueError("lawnmower region is fully masked")
    return waypoints


def random_waypoints(
    field: GridField,
    count: int,
    rng: np.random.Generator,
    region: tuple[int, int, int, int] | None = None,
    exclude=(),
) -> list[tuple[int, int]]:
    """``count`` distinct sampleable cells drawn uniformly from ``region``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    cells = field.sampleable_cells()
    if region is not None:
        r0, c0, r1, c1 = region
        inside = (
            (cells[:, 0] >= r0)
            & (cells[:, 0] <= r1)
            & (cells[:, 1] >= c0)
            & (cells[:, 1] <= c1)
        )
        cells = cells[inside]
    if exclude:
        banned = {tuple(e) for e in exclude}
        cells = np.array([c for c in cells if tuple(c) not in banned]).reshape(-1, 2)
    if count > len(cells):
        raise ValueError(f"requested {count} waypoints from {len(cells)} cells")
    idx = rng.choice(len(cells), size=count, replace=False)
    return [tuple(int(v) for v in cells[i]) for i in idx]
