"""Stochastic search over {0,1} grid densities and related constructions.

The annealer keeps the number of occupied cells fixed and relocates one cell
per move.  A potential vector ``U = K * 1_occ`` over all cells makes each
proposal O(1) and each accepted move O(#cells).
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .densities import DropletConfig, GridDensity, ball_radius, from_droplets, unit_ball_volume
from .droplets import PowerLawParams, ball_energy_g
from .energy import ELReport, el_check, exact_interval_energy, interaction_energy

__all__ = [
    "AnnealSchedule",
    "AnnealResult",
    "InfeasibleError",
    "ClusterSet",
    "SequenceTrace",
    "anneal",
    "anneal_chains",
    "default_box",
    "interaction_range",
    "cluster_decompose",
    "minimizing_sequence",
    "el_residual_of_annealed",
]

MAX_INIT_ATTEMPTS = 10_000


class InfeasibleError(RuntimeError):
    """No admissible starting state could be placed."""


@dataclass(frozen=True)
class AnnealSchedule:
    T0: float
    cooling: float = 0.95
    epochs: int = 200
    moves_per_epoch: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not self.T0 > 0:
            raise ValueError("T0 must be positive")
        if not 0 < self.cooling < 1:
            raise ValueError("cooling must lie in (0, 1)")
        if self.epochs < 1 or self.moves_per_epoch < 1:
            raise ValueError("epochs and moves_per_epoch must be positive")

    @classmethod
    def default(cls, kernel, m: float, h: float, dim: int, seed: int = 0, **kw) -> "AnnealSchedule":
        """``T0 = d m h^N``, cooling 0.95, 200 epochs, 50 moves per occupied cell per epoch."""
        k = max(1, int(round(m / h ** dim)))
        base = dict(T0=kernel.depth * m * h ** dim, cooling=0.95, epochs=200, moves_per_epoch=50 * k, seed=seed)
        base.update(kw)
        return cls(**base)


@dataclass
class AnnealResult:
    density: GridDensity
    energy: float
    trace: list  # (epoch, T, best_energy, current_energy)
    schedule: AnnealSchedule
    moves: int = 0
    accepted: int = 0

    def __iter__(self):  # allows ``density, trace = anneal(...)``
        return iter((self.density, self.trace))

    def trace_csv(self) -> str:
        lines = ["epoch,T,best_energy,current_energy"]
        for e, T, b, c in self.trace:
            lines.append(f"{e},{T:.17g},{b:.17g},{c:.17g}")
        return "\n".join(lines) + "\n"


def interaction_range(kernel) -> float:
    """``a + W`` for well-barrier kernels, else the support radius (finite) or 2."""
    end = getattr(kernel, "barrier_end", None)
    if end is not None and math.isfinite(end):
        return float(end)
    R = kernel.support_radius
    return float(R) if math.isfinite(R) else 2.0


def default_box(kernel, m: float, dim: int):
    """Cube of side ``4 (m/ω_N)^(1/N) + 2 (a + W)`` centred at the origin."""
    side = 4.0 * (m / unit_ball_volume(dim)) ** (1.0 / dim) + 2.0 * interaction_range(kernel)
    return (-0.5 * side,) * dim, (0.5 * side,) * dim


def _grid_for_box(box, h: float, dim: int):
    lo = np.atleast_1d(np.asarray(box[0], dtype=float))
    hi = np.atleast_1d(np.asarray(box[1], dtype=float))
    if lo.size != dim or hi.size != dim:
        raise ValueError("box corners must have one coordinate per dimension")
    k_lo = np.floor(lo / h + 1e-9)
    k_hi = np.ceil(hi / h - 1e-9)
    shape = tuple(int(n) for n in k_hi - k_lo)
    if min(shape) < 1:
        raise ValueError("box is empty")
    return tuple(k_lo * h), shape


def _offset_table(kernel, shape, h: float):
    """``K`` at every lattice offset, indexed by ``|di|`` (1D) or ``(|di|, |dj|)`` (2D)."""
    axes = [np.arange(n) for n in shape]
    mesh = np.meshgrid(*axes, indexing="ij")
    dist = h * np.sqrt(sum(m.astype(float) ** 2 for m in mesh))
    return np.asarray(kernel.grid_eval(dist, h), dtype=float)


class _State:
    """Occupancy with potential ``U`` (finite part) and forbidden counts ``F`` per cell."""

    def __init__(self, table: np.ndarray, shape: tuple):
        self.shape = shape
        self.M = int(np.prod(shape))
        self.bad = np.isinf(table)
        self.table = np.where(self.bad, 0.0, table)
        self.coords = np.stack([m.ravel() for m in np.meshgrid(*[np.arange(n) for n in shape], indexing="ij")], 1)
        self.U = np.zeros(self.M)
        self.F = np.zeros(self.M, dtype=np.int64)
        self.occ = np.zeros(self.M, dtype=bool)

    def rows(self, c: int):
        off = tuple(np.abs(self.coords - self.coords[c]).T)
        return self.table[off], self.bad[off]

    def add(self, c: int, sign: int = 1):
        row, bad = self.rows(c)
        self.U += sign * row
        self.F += sign * bad.astype(np.int64)
        self.occ[c] = sign > 0

    def pair(self, a: int, b: int):
        off = tuple(np.abs(self.coords[a] - self.coords[b]))
        return self.table[off], bool(self.bad[off])


def anneal(kernel, m: float, h: float, schedule: AnnealSchedule | None = None, box=None, dim: int = 1,
           progress=None) -> AnnealResult:
    """Simulated annealing over {0,1} densities with ``m / h^dim`` occupied cells.

    Moves relocate one occupied cell to a uniformly chosen empty cell and are
    accepted by the Metropolis rule at ``T0 * cooling**epoch``; moves creating
    a forbidden-band pair are always rejected.  The best visited state is
    returned.  ``box`` defaults to :func:`default_box`.
    """
    k = m / h ** dim
    if abs(k - round(k)) > 1e-9 * max(1.0, k):
        raise ValueError(f"mass {m} is not a whole number of cells of volume {h ** dim}")
    k = int(round(k))
    if k < 1:
        raise ValueError("need at least one occupied cell")
    if schedule is None:
        schedule = AnnealSchedule.default(kernel, m, h, dim)
    if box is None:
        box = default_box(kernel, m, dim)
    origin, shape = _grid_for_box(box, h, dim)
    st = _State(_offset_table(kernel, shape, h), shape)
    if k > st.M:
        raise ValueError("mass does not fit in the box")
    rng = np.random.Generator(np.random.PCG64(schedule.seed))
    scale = h ** (2 * dim)
    self_term = float(st.table[(0,) * dim])

    # random feasible start, one cell at a time
    attempts = 0
    placed = 0
    while placed < k:
        c = int(rng.integers(st.M))
        if not st.occ[c] and st.F[c] == 0:
            st.add(c)
            placed += 1
        else:
            attempts += 1
            if attempts > MAX_INIT_ATTEMPTS:
                raise InfeasibleError(f"could not place {k} cells without a forbidden pair")

    occ_list = np.flatnonzero(st.occ)
    emp_list = np.flatnonzero(~st.occ)
    current = scale * float(st.U[occ_list].sum())
    best = current
    best_occ = st.occ.copy()
    trace = []
    moves = accepted = 0
    n_emp = len(emp_list)
    T = schedule.T0
    for epoch in range(schedule.epochs):
        if n_emp:
            pick_a = rng.integers(k, size=schedule.moves_per_epoch)
            pick_b = rng.integers(n_emp, size=schedule.moves_per_epoch)
            coin = rng.random(schedule.moves_per_epoch)
            for ia, ib, u in zip(pick_a, pick_b, coin):
                moves += 1
                a, b = int(occ_list[ia]), int(emp_list[ib])
                kab, bad_ab = st.pair(a, b)
                if st.F[b] - int(bad_ab) > 0:
                    continue
                delta = 2.0 * scale * ((st.U[b] - kab) - (st.U[a] - self_term))
                if delta > 0 and u >= math.exp(-delta / T):
                    continue
                st.add(a, -1)
                st.add(b, +1)
                occ_list[ia], emp_list[ib] = b, a
                current += delta
                accepted += 1
                if current < best - 1e-15:
                    best = current
                    best_occ = st.occ.copy()
        trace.append((epoch, T, best, current))
        if progress is not None:
            progress(epoch, T, best, current)
        T *= schedule.cooling

    values = best_occ.reshape(shape).astype(float)
    dens = GridDensity(dim, origin, h, values)
    energy = interaction_energy(kernel, dens).value
    return AnnealResult(dens, energy, trace, schedule, moves, accepted)


def anneal_chains(kernel, m: float, h: float, schedule: AnnealSchedule, seeds: Sequence[int], box=None,
                  dim: int = 1, workers: int = 1) -> AnnealResult:
    """Independent chains; the lowest final energy wins, ties to the earlier seed."""
    jobs = [replace(schedule, seed=int(s)) for s in seeds]
    run = lambda sc: anneal(kernel, m, h, sc, box, dim)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(run, jobs))
    else:
        results = [run(sc) for sc in jobs]
    best = results[0]
    for r in results[1:]:
        if r.energy < best.energy:
            best = r
    return best


# -- clusters -----------------------------------------------------------------

@dataclass
class ClusterSet:
    clusters: list  # GridDensity per cluster, same grid as the input
    gap_threshold: float

    @property
    def masses(self) -> list:
        return [c.mass for c in self.clusters]

    def __len__(self):
        return len(self.clusters)

    def min_gap(self) -> float:
        """Smallest centre-to-centre distance between cells of different clusters."""
        best = math.inf
        pts = [c.occupied()[1] for c in self.clusters]
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                d, _ = cKDTree(pts[j]).query(pts[i])
                best = min(best, float(np.min(d)))
        return best

    def summary(self) -> dict:
        out = []
        for c in self.clusters:
            _, X, v = c.occupied()
            centre = (X * v[:, None]).sum(axis=0) / v.sum()
            out.append({"mass": c.mass, "center": [float(x) for x in centre]})
        return {"gap_threshold": self.gap_threshold, "count": len(self.clusters),
                "clusters": sorted(out, key=lambda d: d["center"])}


def cluster_decompose(density: GridDensity, gap_threshold: float) -> ClusterSet:
    """Connected components of occupied cells, joining cells closer than ``gap_threshold``."""
    if not gap_threshold > 0:
        raise ValueError("gap_threshold must be positive")
    idx, X, v = density.occupied()
    if len(idx) == 0:
        return ClusterSet([], gap_threshold)
    r = gap_threshold * (1.0 - 1e-12)
    pairs = cKDTree(X).query_pairs(r, output_type="ndarray")
    n = len(idx)
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n)) if len(pairs) else \
        coo_matrix((n, n))
    n_comp, labels = connected_components(graph, directed=False)
    # order clusters by their first cell so the output is reproducible
    first = [int(np.flatnonzero(labels == c)[0]) for c in range(n_comp)]
    clusters = []
    flat = density.values.ravel()
    for c in np.argsort(first):
        vals = np.zeros_like(flat)
        sel = idx[labels == c]
        vals[sel] = flat[sel]
        clusters.append(density.with_values(vals))
    return ClusterSet(clusters, gap_threshold)


# -- minimizing sequences --------------------------------------------------------------

@dataclass
class SequenceTrace:
    separations: list
    energies: list
    limit: float
    bound: list
    gaps: list = field(default_factory=list)

    @property
    def bounds_hold(self) -> bool:
        return all(abs(g) <= b + 1e-12 for g, b in zip(self.gaps, self.bound))

    @property
    def monotone(self) -> bool:
        a = [abs(g) for g in self.gaps]
        return all(y <= x + 1e-15 for x, y in zip(a, a[1:]))


def minimizing_sequence(params: PowerLawParams, masses: Sequence[float], separations: Sequence[float], kernel,
                        h: float = 0.01) -> SequenceTrace:
    """Droplets of the given masses with centres ``D`` apart, for each ``D``.

    In 1D energies are exact; in 2D they use grid quadrature at spacing ``h``
    and the limit is then the sum of the quadrature self energies.  The gap
    ``E - limit`` is the sum of cross terms and obeys
    ``|gap| <= sum_{i != j} m_i m_j sup_{r >= D - r_i - r_j} K(r)``.
    """
    masses = [float(x) for x in masses]
    seps = [float(D) for D in separations]
    if any(b <= a for a, b in zip(seps, seps[1:])):
        raise ValueError("separations must increase")
    n = params.n
    radii = [ball_radius(x, n) for x in masses]
    reach = interaction_range(kernel)
    two = [ri + rj for i, ri in enumerate(radii) for j, rj in enumerate(radii) if i < j]
    if two and seps[0] < max(two) + reach:
        raise ValueError(f"separation {seps[0]} lets droplets interact through the barrier (need >= {max(two) + reach})")
    if n == 1:
        limit = sum(ball_energy_g(params, x) for x in masses)
    else:
        limit = sum(interaction_energy(kernel, from_droplets(DropletConfig((((0.0, 0.0), r),), 2), h)).value
                    for r in radii)
    energies, bounds, gaps = [], [], []
    for D in seps:
        cfg = DropletConfig.from_masses(masses, D, n)
        if n == 1:
            E = exact_interval_energy(kernel, cfg.to_intervals()).value
        else:
            E = interaction_energy(kernel, from_droplets(cfg, h)).value
        bound = 0.0
        for i in range(len(masses)):
            for j in range(len(masses)):
                if i != j:
                    dist = abs(i - j) * D - radii[i] - radii[j]
                    bound += masses[i] * masses[j] * max(kernel.tail_sup(dist), 0.0)
        energies.append(E)
        bounds.append(bound)
        gaps.append(E - limit)
    return SequenceTrace(seps, energies, limit, bounds, gaps)


def el_residual_of_annealed(kernel, density: GridDensity, tol: float = 1e-9, workers: int = 1) -> ELReport:
    """Euler-Lagrange residuals of an annealed state (see :func:`wblab.energy.el_check`)."""
    return el_check(kernel, density, tol=tol, workers=workers)
