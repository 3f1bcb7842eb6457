"""Interaction energies, potentials and variational diagnostics.

Two evaluation routes are provided:

* grid quadrature: ``E = h^(2N) sum_ij K(|x_i - x_j|) rho_i rho_j`` over the
  occupied cells of a :class:`~wblab.densities.GridDensity`, self pairs
  included;
* exact interval arithmetic in 1D: for two intervals ``I, J`` the
  difference ``s = y - x`` has the trapezoidal density
  ``phi(s) = |I ∩ (J - s)|`` and ``E[1_I, 1_J] = ∫ K(|s|) phi(s) ds``.  For
  the toy kernel the integral is piecewise linear and evaluated in closed
  form; other kernels integrate each smooth piece by Gauss-Kronrod.
"""
from __future__ import annotations

import json
import math
from fractions import Fraction
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .densities import ENDPOINT_TOL, GridDensity, IntervalConfig, grid_from_indicator
from .kernels import INF, ToyKernel, TruncatedKernel

__all__ = [
    "EnergyResult",
    "ELReport",
    "SeparationReport",
    "interaction_energy",
    "cross_energy",
    "potential",
    "potential_on_grid",
    "el_check",
    "separation_check",
    "exact_interval_energy",
    "interval_pair_energy",
    "format_value",
]

_BLOCK = 2048
_HALF = Fraction(1, 2)  # keeps int/Fraction endpoints exact, floats stay floats


def format_value(x):
    """JSON-friendly extended real: ``"+inf"`` for infinity."""
    x = float(x)
    if math.isinf(x):
        return "+inf" if x > 0 else "-inf"
    return x


@dataclass
class EnergyResult:
    value: float
    method: str
    forbidden_pairs: list = field(default_factory=list)
    h: float | None = None
    mass: float | None = None

    @property
    def finite(self) -> bool:
        return math.isfinite(self.value)

    def as_dict(self) -> dict:
        return {
            "value": format_value(self.value),
            "method": self.method,
            "forbidden_pairs": [list(map(int, p)) for p in self.forbidden_pairs],
            "h": self.h,
            "mass": None if self.mass is None else float(self.mass),
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict())


# -- helpers ----------------------------------------------------------------

def _toy_of(kernel):
    """The underlying toy kernel when truncation leaves it unchanged, else None."""
    if isinstance(kernel, ToyKernel):
        return kernel
    if isinstance(kernel, TruncatedKernel) and isinstance(kernel.base, ToyKernel):
        if kernel.R_cut >= kernel.base.support_radius:
            return kernel.base
    return None


def _lattice(density: GridDensity, ref_origin, tol: float = 0.0):
    """Occupied cells as integer lattice coordinates relative to ``ref_origin``."""
    idx, _, vals = density.occupied(tol)
    lat = density.lattice_indices()[idx]
    shift = (np.asarray(density.origin) - np.asarray(ref_origin)) / density.h
    ishift = np.rint(shift)
    if np.any(np.abs(shift - ishift) > 1e-9):
        raise ValueError("grids are not aligned on a common lattice")
    return idx, lat + ishift.astype(np.int64), vals


def _lattice_dist(A: np.ndarray, B: np.ndarray, h: float) -> np.ndarray:
    diff = A[:, None, :] - B[None, :, :]
    if diff.shape[-1] == 1:
        return h * np.abs(diff[..., 0]).astype(float)
    return h * np.sqrt((diff.astype(np.int64) ** 2).sum(axis=-1).astype(float))


def _blocks(n: int, workers: int):
    workers = max(1, int(workers))
    size = max(1, min(_BLOCK, math.ceil(n / workers))) if n else 1
    return [(lo, min(lo + size, n)) for lo in range(0, n, size)]


def _run_blocks(fn, n: int, workers: int):
    blocks = _blocks(n, workers)
    if workers <= 1 or len(blocks) <= 1:
        return [fn(lo, hi) for lo, hi in blocks]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(lambda b: fn(*b), blocks))


def _grid_bilinear(kernel, rho: GridDensity, eta: GridDensity, workers: int = 1, symmetric: bool = False):
    if rho.dim != eta.dim or not math.isclose(rho.h, eta.h, rel_tol=1e-12):
        raise ValueError("densities must share dimension and grid spacing")
    h, N = rho.h, rho.dim
    ia, A, va = _lattice(rho, rho.origin)
    ib, B, vb = _lattice(eta, rho.origin)

    def block(lo, hi):
        dist = _lattice_dist(A[lo:hi], B, h)
        K = kernel.grid_eval(dist, h)
        bad = np.isinf(K)
        if bad.any():
            K = np.where(bad, 0.0, K)
        part = float((va[lo:hi, None] * K * vb[None, :]).sum())
        pairs = []
        if bad.any():
            rows, cols = np.nonzero(bad)
            for r, c in zip(rows + lo, cols):
                i, j = int(ia[r]), int(ib[c])
                if symmetric and i >= j:
                    continue
                pairs.append((i, j))
        return part, pairs

    parts = _run_blocks(block, len(A), workers)
    total = 0.0
    pairs: list = []
    for part, pr in parts:
        total += part
        pairs.extend(pr)
    value = INF if pairs else h ** (2 * N) * total
    return value, pairs


# -- exact 1D interval arithmetic -------------------------------------------

def _phi(I, J, s):
    """Length of ``{x in I : x + s in J}``."""
    (a1, b1), (a2, b2) = I, J
    return max(0, min(b1, b2 - s) - max(a1, a2 - s))


def _phi_breaks(I, J):
    (a1, b1), (a2, b2) = I, J
    return sorted({a2 - b1, a2 - a1, b2 - b1, b2 - a1})


def _phi_integral(I, J, lo, hi):
    """Exact ``∫_lo^hi phi(s) ds`` (phi is piecewise linear)."""
    if hi <= lo:
        return 0
    pts = [lo] + [p for p in _phi_breaks(I, J) if lo < p < hi] + [hi]
    total = 0
    for s0, s1 in zip(pts[:-1], pts[1:]):
        total += (s1 - s0) * (_phi(I, J, s0) + _phi(I, J, s1)) * _HALF
    return total


def _overlap(lo1, hi1, lo2, hi2):
    return max(0, min(hi1, hi2) - max(lo1, lo2))


def _toy_pair_forbidden(I, J, w) -> bool:
    s_lo, s_hi = J[0] - I[1], J[1] - I[0]
    if w > 0:
        return (_overlap(s_lo, s_hi, 1, 1 + w) > ENDPOINT_TOL
                or _overlap(s_lo, s_hi, -1 - w, -1) > ENDPOINT_TOL)
    # w == 0: translating one interval by exactly 1 must not overlap the other
    return _phi(I, J, 1) > ENDPOINT_TOL or _phi(I, J, -1) > ENDPOINT_TOL


def _toy_pair_value(I, J):
    return -_phi_integral(I, J, -1, 1)


def interval_pair_energy(kernel, I, J) -> float:
    """``∫∫ K(|x-y|) 1_I(x) 1_J(y)`` for a finite-valued kernel, by piecewise quadrature."""
    s_lo, s_hi = J[0] - I[1], J[1] - I[0]
    bps = [float(b) for b in kernel.breakpoints if math.isfinite(b)]
    cuts = set(_phi_breaks(I, J)) | {0.0} | set(bps) | {-b for b in bps}
    pts = sorted(float(p) for p in cuts if s_lo < p < s_hi)
    pts = [float(s_lo)] + pts + [float(s_hi)]
    I = (float(I[0]), float(I[1]))
    J = (float(J[0]), float(J[1]))

    def f(s):
        return float(kernel(np.array([abs(s)]))[0]) * _phi(I, J, s)

    total = 0.0
    for s0, s1 in zip(pts[:-1], pts[1:]):
        if s1 - s0 <= 0:
            continue
        val, _ = integrate.quad(f, s0, s1, epsabs=1e-15, epsrel=1e-13, limit=200)
        total += val
    return total


def exact_interval_energy(kernel, config: IntervalConfig, other: IntervalConfig | None = None,
                          enforce_unit_distance: bool = True) -> EnergyResult:
    """Exact energy of an interval union.

    For the toy kernel the result is exact (closed form; fractions in, fractions
    out).  It is ``+inf`` iff some pair of intervals has a positive-measure set
    of distances inside the open band ``(1, 1 + w)``; for ``w == 0`` iff a
    translate by exactly 1 of one interval overlaps another in positive
    measure.  With ``other`` given, returns the cross energy ``E[config, other]``.
    Other kernels fall back to :func:`interval_pair_energy`.
    """
    toy = _toy_of(kernel)
    A = list(config.intervals)
    B = A if other is None else list(other.intervals)
    same = other is None
    forbidden = []
    total = 0
    for i, I in enumerate(A):
        for j, J in enumerate(B):
            if same and j < i:
                continue
            mult = 1 if (not same or i == j) else 2
            if toy is not None:
                check = toy.w > 0 or enforce_unit_distance
                if check and _toy_pair_forbidden(I, J, toy.w):
                    forbidden.append((i, j))
                    continue
                total += mult * _toy_pair_value(I, J)
            else:
                total += mult * interval_pair_energy(kernel, I, J)
    value = INF if forbidden else total
    mass = config.mass if same else None
    return EnergyResult(value, "exact-interval", forbidden, None, mass)


# -- public energies ---------------------------------------------------------

def interaction_energy(kernel, density, workers: int = 1) -> EnergyResult:
    """``E[rho] = ∫∫ K(|x-y|) rho(x) rho(y)``.

    Grid densities use cell-centre quadrature (toy kernels flag pairs inside
    the shrunken band, see :meth:`ToyKernel.grid_eval`); interval unions use
    exact interval arithmetic.
    """
    if isinstance(density, IntervalConfig):
        return exact_interval_energy(kernel, density)
    value, pairs = _grid_bilinear(kernel, density, density, workers, symmetric=True)
    return EnergyResult(value, "grid-quadrature", pairs, density.h, density.mass)


def cross_energy(kernel, rho, eta, workers: int = 1) -> float:
    """``E[rho, eta] = ∫∫ K(|x-y|) rho(x) eta(y)``; ``+inf`` if a forbidden pair spans both.

    For the toy kernel with ``w == 0`` the kernel itself is finite and the
    distance-1 rule is an admissibility condition on a single density, so it is
    applied by :func:`interaction_energy` and not here.
    """
    if isinstance(rho, IntervalConfig) and isinstance(eta, IntervalConfig):
        return exact_interval_energy(kernel, rho, eta, enforce_unit_distance=False).value
    if isinstance(rho, IntervalConfig) or isinstance(eta, IntervalConfig):
        raise TypeError("cross_energy needs two grids or two interval configurations")
    # canonical argument order makes the floating-point sum exactly symmetric
    key = lambda g: (g.origin, g.shape, g.values.tobytes())
    if key(eta) < key(rho):
        rho, eta = eta, rho
    return _grid_bilinear(kernel, rho, eta, workers)[0]


def _interval_potential(kernel, config: IntervalConfig, x: float) -> float:
    toy = _toy_of(kernel)
    total = 0.0
    if toy is not None:
        for a, b in config:
            if toy.w > 0 and (_overlap(a, b, x + 1, x + 1 + toy.w) > ENDPOINT_TOL
                              or _overlap(a, b, x - 1 - toy.w, x - 1) > ENDPOINT_TOL):
                return INF
            total -= _overlap(a, b, x - 1, x + 1)
        return float(total)
    bps = [float(b) for b in kernel.breakpoints if math.isfinite(b)]
    for a, b in config:
        a, b = float(a), float(b)
        cuts = sorted({p for p in [x] + [x + s for s in bps] + [x - s for s in bps] if a < p < b})
        pts = [a] + cuts + [b]
        for y0, y1 in zip(pts[:-1], pts[1:]):
            val, _ = integrate.quad(lambda y: float(kernel(np.array([abs(x - y)]))[0]), y0, y1,
                                    epsabs=1e-15, epsrel=1e-13, limit=200)
            total += val
    return total


def potential(kernel, density, x):
    """``(K * rho)(x)`` at one point or an array of points.

    Grid densities: ``h^N sum_j K(|x - x_j|) rho_j``; interval unions: the
    exact 1D integral.
    """
    if isinstance(density, IntervalConfig):
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.array([_interval_potential(kernel, density, float(xi)) for xi in xs])
        return float(out[0]) if np.ndim(x) == 0 else out
    pts = np.asarray(x, dtype=float)
    scalar = pts.ndim == 0 or (pts.ndim == 1 and density.dim > 1 and pts.shape[0] == density.dim)
    pts = pts.reshape(-1, density.dim)
    _, X, v = density.occupied()
    dist = np.linalg.norm(pts[:, None, :] - X[None, :, :], axis=-1)
    K = kernel.grid_eval(dist, density.h)
    with np.errstate(invalid="ignore"):
        out = density.h ** density.dim * np.where(np.isinf(K), INF, K * v[None, :]).sum(axis=1)
    return float(out[0]) if scalar else out


def potential_on_grid(kernel, density: GridDensity, workers: int = 1) -> np.ndarray:
    """``K * rho`` at every cell centre of the grid (same shape as ``values``)."""
    _, B, vb = _lattice(density, density.origin)
    A = density.lattice_indices()
    h = density.h

    def block(lo, hi):
        K = kernel.grid_eval(_lattice_dist(A[lo:hi], B, h), h)
        inf_rows = np.isinf(K).any(axis=1)
        vals = (np.where(np.isinf(K), 0.0, K) * vb[None, :]).sum(axis=1)
        vals[inf_rows] = INF
        return vals

    parts = _run_blocks(block, len(A), workers)
    out = np.concatenate(parts) if parts else np.zeros(0)
    return (h ** density.dim * out).reshape(density.shape)


# -- diagnostics --------------------------------------------------------------

@dataclass
class ELReport:
    """Residuals of the necessary condition ``K*rho >= λ`` on {rho=0},
    ``= λ`` on {0<rho<1}, ``<= λ`` on {rho=1}, with λ < 0."""

    lambda_: float
    violations_on_zero_set: float
    violations_on_one_set: float
    violations_on_partial_set: float
    lambda_negative: bool
    notes: list = field(default_factory=list)

    @property
    def total_violation(self) -> float:
        return self.violations_on_zero_set + self.violations_on_one_set + self.violations_on_partial_set

    def as_dict(self) -> dict:
        return {
            "lambda": format_value(self.lambda_),
            "violations_on_zero_set": self.violations_on_zero_set,
            "violations_on_one_set": self.violations_on_one_set,
            "violations_on_partial_set": self.violations_on_partial_set,
            "lambda_negative": self.lambda_negative,
            "notes": list(self.notes),
        }


def el_check(kernel, density, tol: float = 1e-9, workers: int = 1, h: float = 0.01) -> ELReport:
    """Euler-Lagrange residuals of ``density`` (grid, or interval union sampled at spacing ``h``).

    λ is the largest potential over cells with ``rho >= 1 - tol`` (falling back
    to ``rho > tol`` when no cell is full).  Violation entries are measures
    (cell counts times ``h^N``).
    """
    if isinstance(density, IntervalConfig):
        R = kernel.support_radius if math.isfinite(kernel.support_radius) else 2.0
        lo, hi = density.bounds()
        density = grid_from_indicator(density, h, pad=R)
    pot = potential_on_grid(kernel, density, workers).ravel()
    v = density.values.ravel()
    cell = density.cell_volume
    notes = []
    one = v >= 1 - tol
    if not one.any():
        one = v > tol
        notes.append("no cell with rho = 1; lambda taken over {rho > 0}")
    if not one.any():
        raise ValueError("density has no mass")
    if not np.all(np.isfinite(pot[v > tol])):
        raise ValueError("EL check needs a finite-energy density")
    lam = float(pot[one].max())
    zero = v <= tol
    partial = (~zero) & (v < 1 - tol)
    with np.errstate(invalid="ignore"):
        vz = float(np.count_nonzero(pot[zero] < lam - tol)) * cell
        vo = float(np.count_nonzero(pot[v >= 1 - tol] > lam + tol)) * cell
        vp = float(np.count_nonzero(np.abs(pot[partial] - lam) > tol)) * cell
    return ELReport(lam, vz, vo, vp, lam < 0, notes)


@dataclass
class SeparationReport:
    offending_pairs: list = field(default_factory=list)
    band: tuple = ()

    @property
    def empty(self) -> bool:
        return not self.offending_pairs

    def as_dict(self) -> dict:
        return {"band": list(self.band), "count": len(self.offending_pairs),
                "offending_pairs": [
                    {"i": i, "j": j, "x1": list(x1), "x2": list(x2), "distance": dist}
                    for i, j, x1, x2, dist in self.offending_pairs]}


def separation_check(kernel, density, tol: float = 1e-9, workers: int = 1, h: float = 0.01,
                     max_pairs: int | None = None) -> SeparationReport:
    """Support pairs with ``K*rho <= tol`` at both points and distance in ``[a+w, a+W-w]``.

    Needs a kernel carrying well-barrier parameters.  Interval unions are
    sampled at spacing ``h``.
    """
    for name in ("a", "w", "W"):
        if not hasattr(kernel, name):
            raise TypeError("separation check needs a well-barrier kernel")
    lo_d, hi_d = kernel.a + kernel.w, kernel.a + kernel.W - kernel.w
    if isinstance(density, IntervalConfig):
        density = grid_from_indicator(density, h)
    idx, X, v = density.occupied()
    pot = potential_on_grid(kernel, density, workers).ravel()[idx]
    cand = np.flatnonzero(pot <= tol)
    pairs = []
    if len(cand) >= 2 and lo_d <= hi_d:
        _, lat, _ = _lattice(density, density.origin)
        L = lat[cand]
        dist = _lattice_dist(L, L, density.h)
        ii, jj = np.nonzero((dist >= lo_d - ENDPOINT_TOL) & (dist <= hi_d + ENDPOINT_TOL))
        for a, b in zip(ii, jj):
            if a < b:
                p, q = cand[a], cand[b]
                pairs.append((int(idx[p]), int(idx[q]), tuple(map(float, X[p])), tuple(map(float, X[q])),
                              float(dist[a, b])))
                if max_pairs is not None and len(pairs) >= max_pairs:
                    break
    return SeparationReport(pairs, (lo_d, hi_d))
