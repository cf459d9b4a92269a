"""Ground-truth environments as gridded scalar fields.

A :class:`GridField` is a ``height x width`` raster indexed ``[row, col]``.
Locations throughout the package are ``(row, col)`` pairs in cell units; a
continuous location is snapped to the cell that contains it.
"""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "FieldError",
    "GridField",
    "DynamicField",
    "SamplePoint",
    "load_field",
    "write_raster",
    "synth_field",
    "synth_dynamic_field",
    "sample",
]


class FieldError(ValueError):
    """Raised for malformed rasters and invalid sampling requests."""


@dataclass(frozen=True)
class GridField:
    """Discretized scalar field with a sampleable-cell mask.

    Parameters
    ----------
    values : ndarray, shape (height, width)
        Cell values. Masked cells may hold anything (NaN by convention).
    mask : ndarray of bool, shape (height, width)
        True where the cell can be sampled.
    cell_size : float
        Edge length of one cell in meters. Carried for interpretation only.
    """

    values: np.ndarray
    mask: np.ndarray
    cell_size: float = 1.0

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        mask = np.array(self.mask, dtype=bool)
        if values.ndim != 2:
            raise FieldError("values must be a 2-D grid")
        if mask.shape != values.shape:
            raise FieldError(
                f"mask shape {mask.shape} does not match values {values.shape}"
            )
        if not np.all(np.isfinite(values[mask])):
            raise FieldError("every sampleable cell needs a finite value")
        values.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def cell_of(self, location) -> tuple[int, int]:
        """Snap a (row, col) location to its containing cell, checking bounds."""
        r, c = location
        ri, ci = int(math.floor(r)), int(math.floor(c))
        if not (0 <= ri < self.height and 0 <= ci < self.width):
            raise FieldError(f"location {tuple(location)} is outside the grid")
        return ri, ci

    def is_sampleable(self, location) -> bool:
        try:
            cell = self.cell_of(location)
        except FieldError:
            return False
        return bool(self.mask[cell])

    def sampleable_cells(self) -> np.ndarray:
        """Row-major ``(k, 2)`` integer array of sampleable cells."""
        return np.argwhere(self.mask)

    def variance(self) -> float:
        """Population variance of the sampleable values."""
        return float(np.var(self.values[self.mask]))

    def value_range(self) -> float:
        v = self.values[self.mask]
        return float(v.max() - v.min())


@dataclass(frozen=True)
class DynamicField:
    """Piecewise-static environment: one frame per ``frame_length`` samples."""

    frames: tuple[GridField, ...]
    frame_length: int = 1

    def __post_init__(self):
        frames = tuple(self.frames)
        if not frames:
            raise FieldError("a dynamic field needs at least one frame")
        if self.frame_length < 1:
            raise FieldError("frame_length must be >= 1")
        first = frames[0]
        for f in frames[1:]:
            if (
                f.shape != first.shape
                or f.cell_size != first.cell_size
                or not np.array_equal(f.mask, first.mask)
            ):
                raise FieldError("all frames must share geometry and mask")
        object.__setattr__(self, "frames", frames)

    @classmethod
    def static(cls, grid: GridField) -> "DynamicField":
        return cls((grid,), frame_length=1)

    @property
    def geometry(self) -> GridField:
        return self.frames[0]

    def frame_index(self, step: int) -> int:
        if step < 0:
            raise FieldError("step must be non-negative")
        return min(step // self.frame_length, len(self.frames) - 1)

    def frame_at(self, step: int) -> GridField:
        return self.frames[self.frame_index(step)]


@dataclass(frozen=True)
class SamplePoint:
    location: tuple[float, float]
    value: float
    step: int = 0


_SPLIT = re.compile(r"[,\s]+")


def _parse_rows(lines: Sequence[str]) -> np.ndarray:
    rows = []
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        tokens = [t for t in _SPLIT.split(line) if t]
        try:
            rows.append([float(t) for t in tokens])
        except ValueError as exc:
            raise FieldError(f"line {lineno}: non-numeric entry ({exc})") from None
    if not rows:
        raise FieldError("raster is empty")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise FieldError(f"ragged rows: found row lengths {sorted(widths)}")
    return np.array(rows, dtype=float)


def load_field(raster_source, cell_size: float = 1.0) -> GridField:
    """Read a plain-text raster into a :class:`GridField`.

    ``raster_source`` is a path, a string holding the raster text, or a
    nested sequence of numbers. Rows are comma- or whitespace-separated and
    ``nan`` marks a no-data (masked) cell. Values are not rescaled.
    """
    if isinstance(raster_source, (str, os.PathLike)) and os.path.exists(
        raster_source
    ):
        with open(raster_source) as fh:
            values = _parse_rows(fh.read().splitlines())
    elif isinstance(raster_source, str):
        values = _parse_rows(raster_source.splitlines())
    else:
        rows = [list(r) for r in raster_source]
        if len({len(r) for r in rows}) > 1:
            raise FieldError("ragged rows")
        try:
            values = np.array(rows, dtype=float)
        except (TypeError, ValueError):
            raise FieldError("non-numeric entry in raster") from None
        if values.ndim != 2 or values.size == 0:
            raise FieldError("raster must be a non-empty 2-D grid")
    mask = np.isfinite(values)
    if not mask.any():
        raise FieldError("zero sampleable cells")
    return GridField(values, mask, cell_size)


def format_float(x: float) -> str:
    """Shortest round-trip text for a float; ``nan`` for no-data."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return repr(x)


def write_raster(path, values: np.ndarray, mask: np.ndarray | None = None) -> None:
    """Write ``values`` in the comma-separated raster format ``load_field`` reads."""
    values = np.asarray(values, dtype=float)
    if mask is not None:
        values = np.where(mask, values, np.nan)
    with open(path, "w", newline="\n") as fh:
        for row in values:
            fh.write(",".join(format_float(v) for v in row))
            fh.write("\n")


def _bump_sum(height, width, centers, amplitudes, scales) -> np.ndarray:
    rows, cols = np.mgrid[0:height, 0:width].astype(float)
    values = np.zeros((height, width))
    for (cr, cc), a, s in zip(centers, amplitudes, scales):
        d2 = (rows - cr) ** 2 + (cols - cc) ** 2
        values += a * np.exp(-0.5 * d2 / s**2)
    return values


def _check_range(name, rng_pair):
    lo, hi = rng_pair
    if not lo <= hi:
        raise FieldError(f"{name} is empty: ({lo}, {hi})")
    return float(lo), float(hi)


def _draw_bumps(rng, height, width, bump_count, amplitude_range, length_scale_range):
    a_lo, a_hi = _check_range("amplitude_range", amplitude_range)
    l_lo, l_hi = _check_range("length_scale_range", length_scale_range)
    centers = np.column_stack(
        [rng.uniform(0, height - 1, bump_count), rng.uniform(0, width - 1, bump_count)]
    )
    amplitudes = rng.uniform(a_lo, a_hi, bump_count)
    scales = rng.uniform(l_lo, l_hi, bump_count)
    return centers, amplitudes, scales


def synth_field(
    seed: int,
    width: int,
    height: int,
    bump_count: int = 5,
    amplitude_range=(1.0, 3.0),
    length_scale_range=(4.0, 10.0),
    cell_size: float = 1.0,
) -> GridField:
    """Sum of isotropic Gaussian bumps; deterministic for a given seed."""
    if width < 2 or height < 2:
        raise FieldError("width and height must be >= 2")
    if bump_count < 1:
        raise FieldError("bump_count must be >= 1")
    rng = np.random.default_rng(seed)
    centers, amplitudes, scales = _draw_bumps(
        rng, height, width, bump_count, amplitude_range, length_scale_range
    )
    values = _bump_sum(height, width, centers, amplitudes, scales)
    return GridField(values, np.ones_like(values, dtype=bool), cell_size)


def synth_dynamic_field(
    seed: int,
    width: int,
    height: int,
    n_frames: int = 3,
    frame_length: int = 200,
    bump_count: int = 5,
    amplitude_range=(1.0, 3.0),
    length_scale_range=(4.0, 10.0),
    drift: float = 4.0,
    amplitude_jitter: float = 0.3,
    cell_size: float = 1.0,
) -> DynamicField:
    """Frames of a bump field whose bumps drift and change strength.

    Each bump moves ``drift`` cells per frame in its own random direction and
    its amplitude is multiplied by ``1 + amplitude_jitter * N(0, 1)``, so
    consecutive frames are correlated but noticeably different.
    """
    if n_frames < 1:
        raise FieldError("n_frames must be >= 1")
    base = synth_field(
        seed, width, height, bump_count, amplitude_range, length_scale_range, cell_size
    )
    rng = np.random.default_rng(seed)
    centers, amplitudes, scales = _draw_bumps(
        rng, height, width, bump_count, amplitude_range, length_scale_range
    )
    frames = [base]
    headings = rng.uniform(0, 2 * np.pi, bump_count)
    step = drift * np.column_stack([np.sin(headings), np.cos(headings)])
    if amplitude_jitter < 0:
        raise FieldError("amplitude_jitter must be >= 0")
    for _ in range(1, n_frames):
        centers = centers + step
        amplitudes = amplitudes * (1.0 + amplitude_jitter * rng.standard_normal(bump_count))
        values = _bump_sum(height, width, centers, amplitudes, scales)
        frames.append(GridField(values, base.mask, cell_size))
    return DynamicField(tuple(frames), frame_length)


def sample(
    env: DynamicField | GridField,
    location,
    step: int,
    noise_sd: float = 0.0,
    rng: np.random.Generator | None = None,
) -> SamplePoint:
    """Noisy point measurement of the frame active at ``step``."""
    if isinstance(env, GridField):
        env = DynamicField.static(env)
    frame = env.frame_at(step)
    cell = frame.cell_of(location)
    if not frame.mask[cell]:
        raise FieldError(f"location {tuple(location)} is masked")
    value = float(frame.values[cell])
    if noise_sd > 0:
        if rng is None:
            raise FieldError("a random generator is required when noise_sd > 0")
        value += noise_sd * rng.standard_normal()
    return SamplePoint((float(location[0]), float(location[1])), value, step)
