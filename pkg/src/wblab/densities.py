"""Admissible densities: grid samples, exact 1D interval unions, ball unions.

An admissible density takes values in ``[0, 1]`` and has total mass ``m``.
Grids are uniform with spacing ``h`` in one or two dimensions; cell ``k``
covers ``[origin + k h, origin + (k+1) h]`` and is represented by its centre.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "ENDPOINT_TOL",
    "GridDensity",
    "IntervalConfig",
    "DropletConfig",
    "Ball",
    "Box",
    "AdmissibilityReport",
    "unit_ball_volume",
    "ball_volume",
    "ball_radius",
    "grid_from_indicator",
    "from_droplets",
    "check_admissible",
]

ENDPOINT_TOL = 1e-12


def unit_ball_volume(n: int) -> float:
    if n == 1:
        return 2.0
    if n == 2:
        return math.pi
    raise ValueError(f"dimension {n} not supported (1 or 2 only)")


def ball_volume(r: float, n: int) -> float:
    return unit_ball_volume(n) * r ** n


def ball_radius(mass: float, n: int) -> float:
    """Radius of the ball of measure ``mass`` in dimension ``n``."""
    return (mass / unit_ball_volume(n)) ** (1.0 / n)


def _check_dim(dim: int) -> int:
    if dim not in (1, 2):
        raise ValueError(f"dimension {dim} not supported (1 or 2 only)")
    return dim


@dataclass(frozen=True)
class GridDensity:
    """Density sampled on a uniform grid.

    ``values`` has shape ``(n,)`` in 1D and ``(n1, n2)`` in 2D.  Values are
    not range-checked here so that inadmissible states can be represented
    and reported by :func:`check_admissible`.
    """

    dim: int
    origin: tuple
    h: float
    values: np.ndarray
    mass: float = field(init=False)

    def __post_init__(self):
        _check_dim(self.dim)
        if not self.h > 0:
            raise ValueError("grid spacing h must be positive")
        vals = np.array(self.values, dtype=float)
        if vals.ndim != self.dim:
            raise ValueError(f"values must be {self.dim}-dimensional, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("density values must be finite")
        vals.setflags(write=False)
        origin = tuple(float(x) for x in np.atleast_1d(self.origin))
        if len(origin) != self.dim:
            raise ValueError("origin must have one coordinate per dimension")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "mass", float(vals.sum() * self.h ** self.dim))

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    def centers(self) -> np.ndarray:
        """Centres of all cells, shape ``(ncells, dim)`` in C order."""
        axes = [self.origin[i] + (np.arange(n) + 0.5) * self.h for i, n in enumerate(self.shape)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def lattice_indices(self) -> np.ndarray:
        """Integer lattice index of every cell, shape ``(ncells, dim)``."""
        mesh = np.meshgrid(*[np.arange(n) for n in self.shape], indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def occupied(self, tol: float = 0.0):
        """``(flat_indices, centres, values)`` of cells with value > tol."""
        flat = self.values.ravel()
        idx = np.flatnonzero(flat > tol)
        return idx, self.centers()[idx], flat[idx]

    def with_values(self, values) -> "GridDensity":
        return GridDensity(self.dim, self.origin, self.h, np.asarray(values, dtype=float).reshape(self.shape))

    def shifted(self, cells) -> "GridDensity":
        """Same values, origin moved by an integer number of cells per axis."""
        cells = np.atleast_1d(cells)
        origin = tuple(o + int(c) * self.h for o, c in zip(self.origin, cells))
        return GridDensity(self.dim, origin, self.h, self.values)

    # -- text formats --

    def to_text(self) -> str:
        head = [str(self.dim), *(_fmt(o) for o in self.origin), _fmt(self.h), *(str(n) for n in self.shape)]
        lines = [" ".join(head)]
        rows = self.values.reshape(-1, self.shape[-1]) if self.dim == 2 else self.values.reshape(1, -1)
        for row in rows:
            lines.append(" ".join(_fmt(v) for v in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "GridDensity":
        tokens = text.split()
        if not tokens:
            raise ValueError("empty grid file")
        dim = int(tokens[0])
        _check_dim(dim)
        origin = tuple(float(t) for t in tokens[1:1 + dim])
        h = float(tokens[1 + dim])
        shape = tuple(int(t) for t in tokens[2 + dim:2 + 2 * dim])
        vals = np.array([float(t) for t in tokens[2 + 2 * dim:]])
        if vals.size != int(np.prod(shape)):
            raise ValueError(f"grid file declares {int(np.prod(shape))} cells but holds {vals.size} values")
        return cls(dim, origin, h, vals.reshape(shape))

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        coords = self.centers()
        idx = self.lattice_indices()
        if self.dim == 1:
            wr.writerow(["i", "x", "value"])
        else:
            wr.writerow(["i", "j", "x", "y", "value"])
        for k, v in enumerate(self.values.ravel()):
            wr.writerow([*idx[k].tolist(), *(_fmt(c) for c in coords[k]), _fmt(v)])
        return buf.getvalue()


def _fmt(x) -> str:
    return format(float(x), ".17g")


@dataclass(frozen=True)
class IntervalConfig:
    """Indicator of a finite union of closed intervals on the line.

    Construction sorts the intervals and merges overlapping or touching ones
    (endpoints within ``ENDPOINT_TOL``).  Endpoints keep their numeric type,
    so ``fractions.Fraction`` inputs give exact arithmetic downstream.
    """

    intervals: tuple

    def __post_init__(self):
        object.__setattr__(self, "intervals", _normalize(self.intervals))

    @classmethod
    def of(cls, *pairs) -> "IntervalConfig":
        return cls(tuple(pairs))

    @property
    def mass(self):
        return sum((b - a for a, b in self.intervals), 0)

    @property
    def dim(self) -> int:
        return 1

    def __len__(self):
        return len(self.intervals)

    def __iter__(self):
        return iter(self.intervals)

    def bounds(self):
        if not self.intervals:
            return None
        return self.intervals[0][0], self.intervals[-1][1]

    def diameter(self):
        b = self.bounds()
        return 0 if b is None else b[1] - b[0]

    def translated(self, t) -> "IntervalConfig":
        return IntervalConfig(tuple((a + t, b + t) for a, b in self.intervals))

    def to_json(self) -> str:
        return json.dumps([[float(a), float(b)] for a, b in self.intervals])

    @classmethod
    def from_json(cls, text: str) -> "IntervalConfig":
        data = json.loads(text)
        if isinstance(data, dict):
            data = data["intervals"]
        return cls(tuple((float(a), float(b)) for a, b in data))


def _normalize(pairs) -> tuple:
    items = []
    for p in pairs:
        a, b = p
        if b < a:
            raise ValueError(f"interval [{a}, {b}] has b < a")
        if b - a > 0:
            items.append((a, b))
    items.sort(key=lambda ab: (ab[0], ab[1]))
    merged: list = []
    for a, b in items:
        if merged and a <= merged[-1][1] + ENDPOINT_TOL:
            pa, pb = merged[-1]
            merged[-1] = (pa, max(pb, b))
        else:
            merged.append((a, b))
    return tuple(merged)


@dataclass(frozen=True)
class DropletConfig:
    """Union of pairwise disjoint balls ``B(center_i, radius_i)``."""

    balls: tuple
    dim: int

    def __post_init__(self):
        _check_dim(self.dim)
        balls = []
        for c, r in self.balls:
            c = tuple(float(x) for x in np.atleast_1d(c))
            if len(c) != self.dim:
                raise ValueError(f"ball centre {c} does not have dimension {self.dim}")
            if not r > 0:
                raise ValueError("ball radius must be positive")
            balls.append((c, float(r)))
        for i in range(len(balls)):
            for j in range(i + 1, len(balls)):
                (ci, ri), (cj, rj) = balls[i], balls[j]
                if math.dist(ci, cj) < ri + rj - ENDPOINT_TOL:
                    raise ValueError(f"balls {i} and {j} overlap")
        object.__setattr__(self, "balls", tuple(balls))

    @classmethod
    def from_masses(cls, masses: Sequence[float], spacing: float, dim: int = 1) -> "DropletConfig":
        """Balls of the given masses with centres ``spacing`` apart along the first axis."""
        balls = []
        for i, m in enumerate(masses):
            c = [i * spacing] + [0.0] * (dim - 1)
            balls.append((tuple(c), ball_radius(m, dim)))
        return cls(tuple(balls), dim)

    @property
    def mass(self) -> float:
        return sum(ball_volume(r, self.dim) for _, r in self.balls)

    def to_intervals(self) -> IntervalConfig:
        if self.dim != 1:
            raise ValueError("only 1D droplet configurations are intervals")
        return IntervalConfig(tuple((c[0] - r, c[0] + r) for c, r in self.balls))

    def to_json(self) -> str:
        return json.dumps([{"center": list(c), "radius": r} for c, r in self.balls])

    @classmethod
    def from_json(cls, text: str) -> "DropletConfig":
        data = json.loads(text)
        balls = tuple((tuple(b["center"]), b["radius"]) for b in data)
        dim = len(balls[0][0]) if balls else 1
        return cls(balls, dim)


# -- shapes for rasterisation --

@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    def bounds(self):
        c = np.asarray(self.center, dtype=float)
        return c - self.radius, c + self.radius

    def contains(self, pts: np.ndarray) -> np.ndarray:
        c = np.asarray(self.center, dtype=float)
        return np.linalg.norm(pts - c, axis=1) <= self.radius + ENDPOINT_TOL


@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple

    def bounds(self):
        return np.asarray(self.lo, dtype=float), np.asarray(self.hi, dtype=float)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        lo, hi = self.bounds()
        return np.all((pts >= lo - ENDPOINT_TOL) & (pts <= hi + ENDPOINT_TOL), axis=1)


def _as_shapes(region, dim):
    if isinstance(region, IntervalConfig):
        return [Box((float(a),), (float(b),)) for a, b in region], 1
    if isinstance(region, DropletConfig):
        return [Ball(c, r) for c, r in region.balls], region.dim
    shapes = []
    for item in region:
        if isinstance(item, (Ball, Box)):
            shapes.append(item)
        elif len(item) == 2 and np.ndim(item[0]) == 0:
            shapes.append(Box((float(item[0]),), (float(item[1]),)))
        else:
            raise ValueError(f"cannot interpret region element {item!r}")
    if dim is None:
        dim = len(np.atleast_1d(shapes[0].bounds()[0])) if shapes else 1
    return shapes, dim


def grid_from_indicator(region, h: float, dim: int | None = None, pad: float = 0.0,
                        anchor: float = 0.0, box=None) -> GridDensity:
    """Sample the indicator of ``region`` on a grid by the cell-centre test.

    ``region`` is an :class:`IntervalConfig`, a :class:`DropletConfig`, or a
    sequence of :class:`Ball` / :class:`Box` shapes (``(a, b)`` tuples are
    read as 1D intervals).  The grid covers the region's bounding box (or
    ``box=(lo, hi)``) enlarged by ``pad`` and snapped outward to the lattice
    ``anchor + k h``.
    """
    if not h > 0:
        raise ValueError("grid spacing h must be positive")
    shapes, dim = _as_shapes(region, dim)
    _check_dim(dim)
    if box is not None:
        lo = np.atleast_1d(np.asarray(box[0], dtype=float))
        hi = np.atleast_1d(np.asarray(box[1], dtype=float))
    elif shapes:
        bl = np.array([np.atleast_1d(s.bounds()[0]) for s in shapes])
        bh = np.array([np.atleast_1d(s.bounds()[1]) for s in shapes])
        lo, hi = bl.min(axis=0) - pad, bh.max(axis=0) + pad
    else:
        return GridDensity(dim, (anchor,) * dim, h, np.zeros((0,) * dim))
    k_lo = np.floor((lo - anchor) / h + 1e-9)
    k_hi = np.ceil((hi - anchor) / h - 1e-9)
    origin = anchor + k_lo * h
    shape = tuple(int(n) for n in np.maximum(k_hi - k_lo, 0))
    grid = GridDensity(dim, tuple(origin), h, np.zeros(shape))
    pts = grid.centers()
    inside = np.zeros(len(pts), dtype=bool)
    for s in shapes:
        inside |= s.contains(pts)
    return grid.with_values(inside.astype(float))


def from_droplets(config: DropletConfig, h: float, pad: float = 0.0, anchor: float = 0.0,
                  box=None) -> GridDensity:
    """Grid indicator of a droplet configuration (balls must be disjoint)."""
    if not isinstance(config, DropletConfig):
        config = DropletConfig(tuple(config), len(np.atleast_1d(config[0][0])))
    return grid_from_indicator(config, h, dim=config.dim, pad=pad, anchor=anchor, box=box)


@dataclass
class AdmissibilityReport:
    ok: bool
    in_range: bool
    mass: float
    target_mass: float
    mass_error: float
    min_value: float
    max_value: float
    notes: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def check_admissible(density, m: float, tol: float = 1e-9) -> AdmissibilityReport:
    """Is ``density`` in the admissible class: values in [0, 1], mass ``m`` within ``tol``?"""
    notes = []
    if isinstance(density, IntervalConfig):
        lo, hi = (1.0, 1.0) if len(density) else (0.0, 0.0)
        mass = float(density.mass)
    else:
        vals = density.values
        lo = float(vals.min()) if vals.size else 0.0
        hi = float(vals.max()) if vals.size else 0.0
        mass = density.mass
    in_range = lo >= 0.0 and hi <= 1.0
    if lo < 0.0:
        notes.append(f"negative density value {lo}")
    if hi > 1.0:
        notes.append(f"bathtub constraint violated: value {hi} > 1")
    err = abs(mass - m)
    if err > tol:
        notes.append(f"mass {mass} differs from {m} by {err}")
    return AdmissibilityReport(in_range and err <= tol, in_range, mass, float(m), err, lo, hi, notes)
