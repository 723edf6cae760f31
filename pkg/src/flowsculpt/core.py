"""Flow cross-sections, pillar advection maps, and the pixel match rate.

Everything here is pure and operates on immutable values, so all of it is
safe to call concurrently.  Shapes are binary occupancy grids stored as flat
row-major uint8 vectors; a pillar deformation is a total gather map: for each
destination pixel the index of the source pixel whose fluid arrives there.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyTargetError, GridMismatchError, ParameterError

# Number of discrete pillar configurations in the built-in library.
DEFAULT_ACTIONS = 32

# Default inlet stripe: the central 25% of the channel width.
DEFAULT_INLET_LO = 0.375
DEFAULT_INLET_HI = 0.625

# Surrogate deformation constants.  Four pillar positions across the channel,
# eight amplitude steps, a fixed Gaussian influence width, and a tiny epsilon
# that keeps the back-traced coordinate strictly below 1.
_POSITIONS = 4
_CENTER_BASE = 0.125
_CENTER_STEP = 0.25
_AMPLITUDE_STEP = 0.05
_SIGMA = 0.15
_EDGE_EPS = 1e-9


@dataclass(frozen=True)
class GridSpec:
    """Cross-section raster: h rows (channel depth), w columns (lateral)."""

    h: int
    w: int

    def __post_init__(self):
        if self.h < 2 or self.w < 2:
            raise ParameterError(f"grid must be at least 2x2, got {self.h}x{self.w}")
        if self.h * self.w > 1 << 20:
            raise ParameterError(f"grid {self.h}x{self.w} exceeds the 2^20 pixel bound")

    @property
    def size(self) -> int:
        return self.h * self.w

    def __str__(self):
        return f"{self.h}x{self.w}"


def _frozen_pixels(pixels) -> np.ndarray:
    arr = np.ascontiguousarray(pixels, dtype=np.uint8).ravel().copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FlowShape:
    """Binary occupancy grid; 1 marks fluid of the sculpted stream."""

    grid: GridSpec
    pixels: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = _frozen_pixels(self.pixels)
        if arr.shape[0] != self.grid.size:
            raise ParameterError(
                f"pixel vector length {arr.shape[0]} != grid size {self.grid.size}"
            )
        if arr.max(initial=0) > 1:
            raise ParameterError("pixels must be 0/1")
        object.__setattr__(self, "pixels", arr)

    def on_count(self) -> int:
        return int(np.count_nonzero(self.pixels))

    def as_rows(self) -> np.ndarray:
        return self.pixels.reshape(self.grid.h, self.grid.w)

    def __eq__(self, other):
        if not isinstance(other, FlowShape):
            return NotImplemented
        return self.grid == other.grid and bool(np.array_equal(self.pixels, other.pixels))

    def __hash__(self):
        return shape_hash(self)


@dataclass(frozen=True, eq=False)
class AdvectionMap:
    """Per-action gather map: src_index[d] feeds destination pixel d."""

    grid: GridSpec
    action_id: int
    src_index: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.ascontiguousarray(self.src_index, dtype=np.int64).ravel().copy()
        arr.setflags(write=False)
        if arr.shape[0] != self.grid.size:
            raise ParameterError("src_index length != grid size")
        if arr.min(initial=0) < 0 or arr.max(initial=0) >= self.grid.size:
            raise ParameterError("src_index entries out of range")
        object.__setattr__(self, "src_index", arr)

    def __eq__(self, other):
        if not isinstance(other, AdvectionMap):
            return NotImplemented
        return (
            self.grid == other.grid
            and self.action_id == other.action_id
            and bool(np.array_equal(self.src_index, other.src_index))
        )


@dataclass(frozen=True)
class PillarLibrary:
    """Ordered set of pillar deformations sharing one grid."""

    grid: GridSpec
    maps: tuple[AdvectionMap, ...]
    provenance: str = "surrogate"

    def __post_init__(self):
        if not self.maps:
            raise ParameterError("library needs at least one map")
        if self.provenance not in ("surrogate", "file"):
            raise ParameterError(f"unknown provenance {self.provenance!r}")
        for k, m in enumerate(self.maps):
            if m.action_id != k:
                raise ParameterError(f"map at slot {k} has action_id {m.action_id}")
            if m.grid != self.grid:
                raise GridMismatchError(f"map {k} grid {m.grid} != library grid {self.grid}")

    @property
    def actions(self) -> int:
        return len(self.maps)


def make_inlet(grid: GridSpec, lo_frac: float = DEFAULT_INLET_LO,
               hi_frac: float = DEFAULT_INLET_HI) -> FlowShape:
    """Vertical stripe inlet: columns floor(lo*W) .. floor(hi*W)-1 on in every row."""
    if not (0.0 <= lo_frac < hi_frac <= 1.0):
        raise ParameterError(f"need 0 <= lo < hi <= 1, got lo={lo_frac} hi={hi_frac}")
    lo = int(np.floor(lo_frac * grid.w))
    hi = int(np.floor(hi_frac * grid.w))
    row = np.zeros(grid.w, dtype=np.uint8)
    row[lo:hi] = 1
    return FlowShape(grid, np.tile(row, grid.h))


def _round_half_away(x: np.ndarray) -> np.ndarray:
    # np.round would round half to even; the map contract needs half away from zero.
    return np.where(x >= 0, np.floor(x + 0.5), np.ceil(x - 0.5))


def build_surrogate_map(action: int, grid: GridSpec, amplitude_scale: float = 1.0) -> AdvectionMap:
    """Closed-form deterministic pillar deformation.

    The action id encodes pillar position (action mod 4) and strength
    (action div 4).  Each destination pixel back-traces laterally by a
    sinusoidal-in-depth displacement attenuated by a Gaussian around the
    pillar center; the nearest source cell is gathered.  All math is double
    precision with half-away-from-zero rounding so the 32 maps are
    bit-identical across runs and platforms.

    ``amplitude_scale`` exists for tests: 0 yields the identity map.
    """
    if not 0 <= action < DEFAULT_ACTIONS:
        raise ParameterError(f"action {action} outside [0, {DEFAULT_ACTIONS})")
    pos = action % _POSITIONS
    strength = action // _POSITIONS
    center = _CENTER_BASE + _CENTER_STEP * pos
    amp = _AMPLITUDE_STEP * (strength + 1) * amplitude_scale

    i = np.arange(grid.h, dtype=np.float64)[:, None]  # rows: depth axis z
    j = np.arange(grid.w, dtype=np.float64)[None, :]  # cols: lateral axis y
    y = (j + 0.5) / grid.w
    z = (i + 0.5) / grid.h

    y_src = y - amp * np.sin(2.0 * np.pi * z) * np.exp(-((y - center) ** 2) / (2.0 * _SIGMA**2))
    y_src = np.clip(y_src, 0.0, 1.0 - _EDGE_EPS)

    j_src = np.clip(_round_half_away(y_src * grid.w - 0.5), 0, grid.w - 1).astype(np.int64)
    # depth is never displaced, so the row index passes through exactly
    i_src = np.broadcast_to(np.arange(grid.h, dtype=np.int64)[:, None], (grid.h, grid.w))
    return AdvectionMap(grid, action, (i_src * grid.w + j_src).ravel())


def identity_map(grid: GridSpec, action_id: int = 0) -> AdvectionMap:
    """No-op gather; handy for degenerate-dynamics tests."""
    return AdvectionMap(grid, action_id, np.arange(grid.size, dtype=np.int64))


def surrogate_library(grid: GridSpec, actions: int = DEFAULT_ACTIONS,
                      amplitude_scale: float = 1.0) -> PillarLibrary:
    """The built-in pillar library at the given resolution.

    ``actions`` may be lowered (a prefix of the 32 deformations) for small
    test environments; ``amplitude_scale=0`` degenerates every map to the
    identity.
    """
    if not 1 <= actions <= DEFAULT_ACTIONS:
        raise ParameterError(f"actions must be in [1, {DEFAULT_ACTIONS}], got {actions}")
    maps = tuple(build_surrogate_map(a, grid, amplitude_scale) for a in range(actions))
    return PillarLibrary(grid, maps, provenance="surrogate")


def apply_pillar(shape: FlowShape, amap: AdvectionMap) -> FlowShape:
    """One deformation step: gather source pixels into destinations."""
    if shape.grid != amap.grid:
        raise GridMismatchError(f"shape grid {shape.grid} != map grid {amap.grid}")
    return FlowShape(shape.grid, shape.pixels[amap.src_index])


def apply_sequence(shape: FlowShape, seq, lib: PillarLibrary) -> list[FlowShape]:
    """Compose pillars first-to-last; returns every intermediate shape."""
    out = []
    cur = shape
    for k, action in enumerate(seq):
        a = int(action)
        if not 0 <= a < lib.actions:
            raise ParameterError(f"action {action} at position {k} outside [0, {lib.actions})")
        cur = apply_pillar(cur, lib.maps[a])
        out.append(cur)
    return out


def pmr(generated: FlowShape, target: FlowShape) -> float:
    """Pixel match rate: 1 - mismatches / target on-pixels, clamped to [0, 1]."""
    if generated.grid != target.grid:
        raise GridMismatchError(f"grids differ: {generated.grid} vs {target.grid}")
    t = target.on_count()
    if t == 0:
        raise EmptyTargetError("target shape has no on-pixels; match rate undefined")
    m = int(np.count_nonzero(generated.pixels != target.pixels))
    return min(1.0, max(0.0, 1.0 - m / t))


def shape_hash(shape: FlowShape) -> int:
    """Stable 64-bit content digest of (h, w, pixels).

    BLAKE2b (unkeyed, 8-byte digest) over the literal bytes
    ``b"fshape-v1" + uint32le(h) + uint32le(w) + pixel bytes``; identical
    shapes hash identically across runs and platforms.
    """
    d = hashlib.blake2b(digest_size=8)
    d.update(b"fshape-v1")
    d.update(struct.pack("<II", shape.grid.h, shape.grid.w))
    d.update(shape.pixels.tobytes())
    return int.from_bytes(d.digest(), "little")
