"""The toy model ``K_w``: exact minima, decomposition and a brute-force oracle.

``K_w`` is ``-1`` on ``[0, 1]``, ``+inf`` on ``(1, 1 + w)`` and ``0`` beyond.
Finite energy forces every pair of points to avoid the band, which makes
minimisers unions of well separated pieces of diameter at most one.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Integral, Rational

import numpy as np

from .densities import DropletConfig, GridDensity, IntervalConfig, ball_radius, ball_volume, unit_ball_volume
from .energy import exact_interval_energy, interaction_energy
from .kernels import ToyKernel

__all__ = [
    "ToyMinimum",
    "Decomposition",
    "DiameterReport",
    "BruteForceResult",
    "toy_minimal_energy",
    "decompose",
    "diameter_lemma_check",
    "brute_force_min",
    "w_zero_example",
    "EXHAUSTIVE_MAX_CELLS",
]

EXHAUSTIVE_MAX_CELLS = 26
TOL = 1e-12


@dataclass
class ToyMinimum:
    m: float
    w: float
    n_dim: int
    regime: str  # "wide", "narrow", "w-zero"
    value: float
    witness: object  # IntervalConfig in 1D, DropletConfig in 2D
    conjecture: bool = False

    def witness_energy(self):
        """Energy of the witness: exact in 1D, ``-sum |B_i|^2`` for separated 2D balls of diameter <= 1."""
        if isinstance(self.witness, IntervalConfig):
            return exact_interval_energy(ToyKernel(self.w), self.witness).value
        # every pair inside a ball is within distance 1, balls are >= 1 + w apart
        return -sum(ball_volume(r, self.n_dim) ** 2 for _, r in self.witness.balls)

    def witness_intervals(self) -> list:
        if isinstance(self.witness, IntervalConfig):
            return [[float(a), float(b)] for a, b in self.witness]
        return [{"center": list(c), "radius": r} for c, r in self.witness.balls]

    def as_dict(self) -> dict:
        return {"m": float(self.m), "w": float(self.w), "n_dim": self.n_dim, "regime": self.regime,
                "value": float(self.value), "witness_intervals": self.witness_intervals(),
                "conjecture_flag": self.conjecture}


def _is_integer(m) -> bool:
    if isinstance(m, Integral):
        return True
    if isinstance(m, Rational):
        return m.denominator == 1
    return float(m).is_integer()


def _row(lengths, spacing):
    """Intervals of the given lengths, centred ``spacing`` apart starting at 1/2."""
    half = Fraction(1, 2)
    out = []
    for i, L in enumerate(lengths):
        c = half + i * spacing
        out.append((c - L * half, c + L * half))
    return IntervalConfig(tuple(out))


def toy_minimal_energy(m, w, n_dim: int = 1, allow_conjecture: bool = False) -> ToyMinimum:
    """Minimal toy energy at mass ``m`` with a witness achieving it.

    * ``w >= 1`` (1D or 2D): write ``m = n |B(0,1/2)| + alpha``; the minimum
      is ``-n |B(0,1/2)|^2 - alpha^2``, attained by ``n`` balls of diameter one
      plus a remainder ball, centres ``3 + w`` apart.
    * ``0 <= w < 1`` in 1D with integer ``m``: the minimum is ``-m``, attained
      by ``m`` unit intervals separated by gaps of ``3/2 + w``.
    * ``w == 0`` with non-integer ``m = n + a``: returns ``-(n + a^2)``
      flagged as a conjecture; ``0 < w < 1`` with non-integer ``m`` needs
      ``allow_conjecture=True``.
    """
    if not m > 0:
        raise ValueError("mass must be positive")
    if not w >= 0:
        raise ValueError("w must be non-negative")
    if n_dim not in (1, 2):
        raise ValueError("n_dim must be 1 or 2")

    if w >= 1:
        if n_dim == 1:
            B = 1
            n = int(math.floor(m / B + TOL))
            alpha = m - n * B
            if abs(alpha) < TOL:
                alpha = 0 * alpha
            lengths = [1] * n + ([alpha] if alpha > 0 else [])
            witness = _row(lengths, 3 + w)
            value = -n - alpha * alpha
        else:
            B = unit_ball_volume(2) / 4.0
            n = int(math.floor(m / B + TOL))
            alpha = max(float(m) - n * B, 0.0)
            if alpha < TOL:
                alpha = 0.0
            masses = [B] * n + ([alpha] if alpha > 0 else [])
            balls = tuple(((i * (3.0 + float(w)), 0.0), ball_radius(x, 2)) for i, x in enumerate(masses))
            witness = DropletConfig(balls, 2)
            value = -n * B * B - alpha * alpha
        return ToyMinimum(m, w, n_dim, "wide", value, witness)

    if n_dim != 1:
        raise ValueError("the toy model with w < 1 is only treated in 1D")
    regime = "w-zero" if w == 0 else "narrow"
    # gaps of 1 + w + 1/2 keep every cross distance beyond the band
    spacing = 1 + (1 + w + Fraction(1, 2))
    if _is_integer(m):
        k = int(round(float(m)))
        return ToyMinimum(m, w, n_dim, regime, -k, _row([1] * k, spacing))
    if w > 0 and not allow_conjecture:
        raise ValueError("0 < w < 1 with non-integer mass is not resolved; pass allow_conjecture=True")
    n = int(math.floor(m))
    a = m - n
    return ToyMinimum(m, w, n_dim, regime, -(n + a * a), _row([1] * n + [a], spacing), conjecture=True)


# -- decomposition -------------------------------------------------------------

@dataclass
class Decomposition:
    components: list  # IntervalConfig per component
    gaps: list  # (i, j, distance) for i < j

    @property
    def min_gap(self) -> float:
        return min((g for _, _, g in self.gaps), default=math.inf)


def decompose(config: IntervalConfig, w) -> Decomposition:
    """Split a finite-energy interval union into pieces of diameter <= 1.

    Points are related when at most 1 apart; components are the classes of the
    transitive closure.  Finite energy with ``w >= 1`` forces each class to
    have diameter at most 1 and distinct classes to be at least ``1 + w`` apart.
    """
    if w < 1:
        raise ValueError("decomposition needs w >= 1")
    if not math.isfinite(exact_interval_energy(ToyKernel(w), config).value):
        raise ValueError("configuration has infinite energy")
    groups: list[list] = []
    for a, b in config:
        if groups and a - groups[-1][-1][1] <= 1 + TOL:
            groups[-1].append((a, b))
        else:
            groups.append([(a, b)])
    comps = [IntervalConfig(tuple(g)) for g in groups]
    gaps = []
    for i in range(len(comps)):
        if comps[i].diameter() > 1 + TOL:
            raise ArithmeticError(f"component {i} has diameter {comps[i].diameter()} > 1")
        for j in range(i + 1, len(comps)):
            dist = comps[j].bounds()[0] - comps[i].bounds()[1]
            if dist < 1 + w - TOL:
                raise ArithmeticError(f"components {i}, {j} only {dist} apart")
            gaps.append((i, j, dist))
    return Decomposition(comps, gaps)


# -- diameter lemma ----------------------------------------------------------------

@dataclass
class DiameterReport:
    x: float
    measure: float
    diameter: float
    finite_energy: bool
    bound: float  # 1 - w when the diameter exceeds 1, else 1
    ok: bool


def diameter_lemma_check(config: IntervalConfig, w, x) -> DiameterReport:
    """Measure of ``supp ∩ [x-1, x+1]`` against the bound ``1`` (or ``1 - w`` when its diameter exceeds 1)."""
    pieces = [(max(a, x - 1), min(b, x + 1)) for a, b in config]
    pieces = [(a, b) for a, b in pieces if b > a]
    measure = sum(b - a for a, b in pieces) if pieces else 0
    diameter = (pieces[-1][1] - pieces[0][0]) if pieces else 0
    finite = math.isfinite(exact_interval_energy(ToyKernel(w), config).value)
    bound = 1 - w if diameter > 1 + TOL else 1
    ok = measure <= 1 + TOL and measure <= bound + TOL
    return DiameterReport(x, measure, diameter, finite, bound, ok)


# -- brute force -----------------------------------------------------------------

@dataclass
class BruteForceResult:
    energy: float
    density: GridDensity
    mode: str
    evaluated: int = 0
    notes: list = field(default_factory=list)


def _cell_count(value: float, h: float, what: str) -> int:
    k = value / h
    if abs(k - round(k)) > 1e-9 * max(1.0, abs(k)):
        raise ValueError(f"{what} {value} is not a whole number of cells of size {h}")
    return int(round(k))


def _exhaustive(M: int, k: int, h: float, w: float, workers: int):
    near = int(math.floor((1.0 + 0.5 * h) / h + 1e-9))  # offsets counted as distance <= 1
    lo_band = 1.0 + 0.5 * h
    hi_band = 1.0 + w - 0.5 * h
    banned = [o for o in range(1, M) if lo_band < o * h < hi_band]
    banned_set = frozenset(banned)

    def gain_bound(n_chosen: int, r: int) -> int:
        return sum(1 + 2 * min(n_chosen + t, near) for t in range(r))

    def search(first: int):
        best = [-1, None]
        count = [0]
        chosen = [first]

        def rec(start: int, score: int):
            r = k - len(chosen)
            if r == 0:
                count[0] += 1
                if score > best[0]:
                    best[0], best[1] = score, tuple(chosen)
                return
            if score + gain_bound(len(chosen), r) <= best[0]:
                return
            for j in range(start, M - r + 1):
                bad = False
                g = 1
                for c in chosen:
                    off = j - c
                    if off in banned_set:
                        bad = True
                        break
                    if off <= near:
                        g += 2
                if bad:
                    continue
                chosen.append(j)
                rec(j + 1, score + g)
                chosen.pop()
                if score + gain_bound(len(chosen), r) <= best[0]:
                    return

        rec(first + 1, 1)
        return best[0], best[1], count[0]

    firsts = range(0, M - k + 1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(search, firsts))
    else:
        results = [search(f) for f in firsts]
    best_score, best_set, total = -1, None, 0
    for score, cells, cnt in results:  # fixed order: lowest first cell wins ties
        total += cnt
        if score > best_score:
            best_score, best_set = score, cells
    return best_set, total


def brute_force_min(domain_length: float, h: float, m: float, w: float, mode: str = "auto", seed: int = 0,
                    workers: int = 1, schedule=None) -> BruteForceResult:
    """Best ``{0,1}`` density on ``[0, domain_length]`` with ``m/h`` occupied cells.

    ``mode="exhaustive"`` enumerates occupied-cell subsets (branch and bound on
    the number of close pairs, band pairs pruned); it is the default up to
    ``EXHAUSTIVE_MAX_CELLS`` cells.  Larger grids use seeded annealing.
    Forbidden distances follow the grid convention of :meth:`ToyKernel.grid_eval`.
    """
    M = _cell_count(domain_length, h, "domain length")
    k = _cell_count(m, h, "mass")
    if k < 1 or k > M:
        raise ValueError("mass does not fit in the domain")
    if mode == "auto":
        mode = "exhaustive" if M <= EXHAUSTIVE_MAX_CELLS else "anneal"
    kernel = ToyKernel(w)
    if mode == "exhaustive":
        cells, total = _exhaustive(M, k, h, float(w), workers)
        if cells is None:
            raise ValueError("no band-free configuration exists")
        vals = np.zeros(M)
        vals[list(cells)] = 1.0
        dens = GridDensity(1, (0.0,), h, vals)
        return BruteForceResult(interaction_energy(kernel, dens).value, dens, mode, total)
    if mode == "anneal":
        from .search import AnnealSchedule, anneal

        if schedule is None:
            schedule = AnnealSchedule.default(kernel, m, h, 1, seed=seed)
        res = anneal(kernel, m, h, schedule, box=((0.0,), (float(domain_length),)), dim=1)
        return BruteForceResult(res.energy, res.density, mode, res.moves)
    raise ValueError(f"unknown mode {mode!r}")


# -- the w = 0 example ---------------------------------------------------------------

def w_zero_example(a):
    """The set ``(0,a) ∪ ((1+a)/2,1) ∪ (1+a,(3+a)/2) ∪ (2,2+a)`` and its exact energy at ``w = 0``.

    Pass a :class:`fractions.Fraction` to get an exact rational energy.
    """
    if not 0 < a < 1:
        raise ValueError("need 0 < a < 1")
    one = 1 if isinstance(a, Rational) else 1.0
    half = Fraction(1, 2) if isinstance(a, Rational) else 0.5
    cfg = IntervalConfig(((0 * one, a), ((one + a) * half, one), (one + a, (3 * one + a) * half), (2 * one, 2 * one + a)))
    return cfg, exact_interval_energy(ToyKernel(0), cfg).value
