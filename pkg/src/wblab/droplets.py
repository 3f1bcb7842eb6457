"""Droplet theory for power-law wells ``K(r) = r**p - d`` near the origin.

A ball of mass ``m`` in dimension ``n`` has energy

    g(m) = C_np m**(2 + p/n) - d m**2,

with ``C_np = |B_1|**-(2 + p/n) ∫_{B_1}∫_{B_1} |x - y|**p``.  Splitting mass
into droplets that do not interact reduces the minimal energy to a problem
over mass partitions, solved here in closed form or by scalar minimisation.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import optimize

from .densities import ball_radius, unit_ball_volume

__all__ = [
    "PowerLawParams",
    "GeneralizedMinimizer",
    "SplitThresholds",
    "SubadditivityReport",
    "c_np",
    "ball_energy_g",
    "g_prime",
    "g_second",
    "split_function_f",
    "split_derivative",
    "split_second_derivative",
    "split_thresholds",
    "best_two_ball_split",
    "optimal_partition",
    "minimal_energy_E",
    "linear_growth_limit",
    "subadditivity_probe",
    "partition_sweep",
]

MASS_TOL = 1e-10


# -- the constant C_{n,p} ----------------------------------------------------

def _c_closed(n: int, p: float) -> float:
    if n == 1:
        # ∫∫_{[-1,1]^2} |x-y|^p = 2^(p+3) / ((p+1)(p+2)), |B_1| = 2
        return 2.0 / ((p + 1.0) * (p + 2.0))
    if p == 2:
        # ∫∫ |x-y|^2 = 2 |B_1| ∫_{B_1} |x|^2 = 2 |B_1|^2 n / (n+2)
        return 2.0 * n / ((n + 2.0) * unit_ball_volume(n) ** (2.0 / n))
    raise ValueError(f"no closed form for C_{{{n},{p}}}")


def _c_quadrature(n: int, p: float, nodes: int) -> float:
    x, wts = np.polynomial.legendre.leggauss(nodes)
    u, wu = 0.5 * (x + 1.0), 0.5 * wts  # rule on [0, 1]
    if n == 1:
        # 2 ∫_{-1}^{1} ∫_0^{1-x} s^p ds dx with x = -1 + 2a, s = (1-x) b
        one_minus_x = 2.0 * (1.0 - u)
        inner = np.sum(wu * u ** p)
        total = 2.0 * 2.0 * np.sum(wu * one_minus_x ** (p + 1.0)) * inner
        return float(total / 2.0 ** (2.0 + p))
    # polar: 4π ∫_0^1∫_0^1 r1 r2 ∫_0^π (r1²+r2²-2 r1 r2 cos φ)^(p/2) dφ dr1 dr2
    phi, wphi = math.pi * u, math.pi * wu
    cos_phi = np.cos(phi)
    total = 0.0
    for r1, w1 in zip(u, wu):
        sq = r1 * r1 + u[:, None] ** 2 - 2.0 * r1 * u[:, None] * cos_phi[None, :]
        vals = np.maximum(sq, 0.0) ** (p / 2.0)
        total += w1 * r1 * np.sum(wu[:, None] * u[:, None] * vals * wphi[None, :])
    total *= 4.0 * math.pi
    return float(total / math.pi ** (2.0 + p / 2.0))


def _c_monte_carlo(n: int, p: float, samples: int, seed: int, chunk: int = 1_000_000) -> float:
    rng = np.random.Generator(np.random.PCG64(seed))
    acc = 0.0
    done = 0
    while done < samples:
        k = min(chunk, samples - done)
        if n == 1:
            X = rng.uniform(-1.0, 1.0, k)
            Y = rng.uniform(-1.0, 1.0, k)
            dist = np.abs(X - Y)
        else:
            r = np.sqrt(rng.random((2, k)))
            th = 2.0 * math.pi * rng.random((2, k))
            dx = r[0] * np.cos(th[0]) - r[1] * np.cos(th[1])
            dy = r[0] * np.sin(th[0]) - r[1] * np.sin(th[1])
            dist = np.hypot(dx, dy)
        acc += float(np.sum(dist ** p))
        done += k
    # ∫∫ |x-y|^p = |B_1|^2 E|X-Y|^p
    return acc / samples / unit_ball_volume(n) ** (p / n)


def c_np(n: int, p: float, method: str = "closed-form", samples: int = 10_000_000, seed: int = 0,
         nodes: int = 160) -> float:
    """The shape constant ``C_{n,p}`` by closed form, Monte Carlo or product Gauss-Legendre.

    Closed forms exist for ``n = 1`` (any ``p``) and ``p = 2`` (any ``n``).
    """
    if n not in (1, 2):
        raise ValueError(f"dimension {n} not supported (1 or 2 only)")
    p = float(p)
    if method == "closed-form":
        return _c_closed(n, p)
    if method == "monte-carlo":
        return _c_monte_carlo(n, p, int(samples), int(seed))
    if method == "product-quadrature":
        return _c_quadrature(n, p, int(nodes))
    raise ValueError(f"unknown method {method!r}")


@lru_cache(maxsize=None)
def _c_default(n: int, p: float) -> float:
    try:
        return _c_closed(n, p)
    except ValueError:
        return _c_quadrature(n, p, 200)


# -- parameters and the ball energy -------------------------------------------

@dataclass(frozen=True)
class PowerLawParams:
    """``(n, p, d)`` for the well ``r**p - d``; ``a`` bounds the power-law region."""

    n: int
    p: float
    d: float
    a: float = math.inf

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError(f"dimension {self.n} not supported (1 or 2 only)")
        if not self.p > self.n:
            raise ValueError("need p > n")
        if not self.d > 0:
            raise ValueError("need d > 0")
        if not self.a > 0:
            raise ValueError("need a > 0")

    @property
    def q(self) -> float:
        return self.p / self.n

    @property
    def C(self) -> float:
        return _c_default(self.n, float(self.p))

    @classmethod
    def from_kernel(cls, kernel, n: int) -> "PowerLawParams":
        base = getattr(kernel, "base", kernel)
        if getattr(base, "power", None) is None:
            raise ValueError("kernel well is not a power law")
        return cls(n, base.power, base.d, base.a)


def _g(params: PowerLawParams, m):
    return params.C * m ** (2.0 + params.q) - params.d * m * m


def ball_energy_g(params: PowerLawParams, m: float) -> float:
    """Energy of the ball of mass ``m``: ``C m^(2+p/n) - d m^2``.

    Raises if the ball's diameter exceeds ``params.a`` (the formula then no
    longer describes the kernel).
    """
    if m < 0:
        raise ValueError("mass must be non-negative")
    if m > 0 and 2.0 * ball_radius(m, params.n) > params.a + 1e-12:
        raise ValueError(f"ball of mass {m} has diameter {2 * ball_radius(m, params.n):.6g} > a={params.a}")
    return float(_g(params, m))


def g_prime(params: PowerLawParams, m):
    return params.C * (2.0 + params.q) * m ** (1.0 + params.q) - 2.0 * params.d * m


def g_second(params: PowerLawParams, m):
    q = params.q
    return params.C * (2.0 + q) * (1.0 + q) * m ** q - 2.0 * params.d


# -- one ball versus two ------------------------------------------------------

def _check_t(t):
    if not 0.0 <= t <= 0.5:
        raise ValueError("split fraction t must lie in [0, 1/2]")


def split_function_f(params: PowerLawParams, m: float, t: float) -> float:
    """``f(t) = g(t m) + g((1-t) m)``, energy of two distant balls."""
    _check_t(t)
    return ball_energy_g(params, t * m) + ball_energy_g(params, (1.0 - t) * m)


def split_derivative(params: PowerLawParams, m: float, t: float) -> float:
    _check_t(t)
    q, C, d = params.q, params.C, params.d
    return m * m * (C * (2.0 + q) * m ** q * (t ** (1.0 + q) - (1.0 - t) ** (1.0 + q)) - 2.0 * d * (2.0 * t - 1.0))


def split_second_derivative(params: PowerLawParams, m: float, t: float) -> float:
    _check_t(t)
    q, C, d = params.q, params.C, params.d
    return m * m * (C * (2.0 + q) * (1.0 + q) * m ** q * (t ** q + (1.0 - t) ** q) - 4.0 * d)


@dataclass(frozen=True)
class SplitThresholds:
    m0: float
    m1: float
    C_np: float


def split_thresholds(params: PowerLawParams) -> SplitThresholds:
    """Masses where splitting first pays (``m0``) and equal halves become optimal (``m1``)."""
    q, C, d = params.q, params.C, params.d
    m0 = (2.0 * d / (C * (2.0 + q))) ** (1.0 / q)
    m1 = (2.0 ** (1.0 + q) * d / (C * (2.0 + q) * (1.0 + q))) ** (1.0 / q)
    if not m0 < m1:
        raise ArithmeticError(f"thresholds out of order: m0={m0}, m1={m1}")
    return SplitThresholds(m0, m1, C)


def best_two_ball_split(params: PowerLawParams, m: float) -> tuple[float, float]:
    """Minimiser ``t*`` of ``f`` on ``[0, 1/2]`` and ``f(t*)``.

    ``f'`` is concave with ``f'(1/2) = 0``, so the interior case has a single
    root, found by bisection.
    """
    if not m > 0:
        raise ValueError("mass must be positive")
    th = split_thresholds(params)
    if m <= th.m0:
        t = 0.0
    elif m >= th.m1:
        t = 0.5
    else:
        fp = lambda s: split_derivative(params, m, s)
        b = 0.25
        while fp(b) <= 0.0:
            b = 0.5 - 0.5 * (0.5 - b)
            if 0.5 - b < 1e-15:
                raise ArithmeticError("could not bracket the root of f'")
        t = optimize.bisect(fp, 0.0, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return t, float(_g(params, t * m) + _g(params, (1.0 - t) * m))


# -- partitions ---------------------------------------------------------------

@dataclass
class GeneralizedMinimizer:
    masses: list
    energies: list
    total_energy: float
    k: int
    k_max: int
    k_max_attained: bool = False

    @property
    def mass(self) -> float:
        return float(sum(self.masses))

    def distinct_masses(self, tol: float = 1e-6) -> list:
        out: list = []
        for x in sorted(self.masses):
            if not out or x - out[-1] > tol:
                out.append(x)
        return out

    def as_dict(self) -> dict:
        return {"k": self.k, "masses": list(self.masses), "energies": list(self.energies),
                "total": self.total_energy, "k_max": self.k_max}


def _best_for_k(params: PowerLawParams, m: float, k: int, scan: int = 400):
    """Best ``(k-1) x r + 1 x s`` split with ``s <= r``; returns ``(energy, s, r)``."""
    if k == 1:
        return float(_g(params, m)), m, m
    equal = m / k
    e_equal = k * float(_g(params, equal))

    def h(s):
        return (k - 1) * _g(params, (m - s) / (k - 1)) + _g(params, s)

    ss = np.linspace(0.0, equal, scan + 1)
    hs = h(ss)
    i = int(np.argmin(hs))
    lo, hi = ss[max(i - 1, 0)], ss[min(i + 1, scan)]
    res = optimize.minimize_scalar(h, bounds=(lo, hi), method="bounded",
                                   options={"xatol": MASS_TOL * 0.1, "maxiter": 500})
    s = float(res.x)
    e = float(h(s))
    if hs[i] < e:
        s, e = float(ss[i]), float(hs[i])
    if e >= e_equal - 1e-13 or equal - s < 1e-9:
        return e_equal, equal, equal
    return e, s, (m - s) / (k - 1)


def optimal_partition(params: PowerLawParams, m: float, k_max: int | None = None) -> GeneralizedMinimizer:
    """Minimise ``sum g(m_i)`` over partitions of ``m`` into at most ``k_max`` droplets.

    For each ``k`` only the family of ``k - 1`` equal droplets plus one
    smaller one is searched (a single scalar ``s``).  Ties within 1e-9
    resolve to the smaller ``k``.
    """
    if not m > 0:
        raise ValueError("mass must be positive")
    if k_max is None:
        m_star, _ = linear_growth_limit(params)
        k_max = math.ceil(m / m_star) + 2
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    best = None
    for k in range(1, k_max + 1):
        e, s, r = _best_for_k(params, m, k)
        if s < 1e-12:
            continue  # degenerate: really k-1 droplets, already considered
        if best is None or e < best[0] - 1e-9:
            best = (e, k, s, r)
    e, k, s, r = best
    m = float(m)
    masses = [m] if k == 1 else ([r] * k if s == r else [s] + [r] * (k - 1))
    energies = [float(_g(params, x)) for x in masses]
    gm = GeneralizedMinimizer(masses, energies, float(sum(energies)), k, k_max, k == k_max and k_max > 1)
    if gm.k_max_attained:
        warnings.warn(f"best droplet count equals k_max={k_max}; increase k_max", RuntimeWarning, stacklevel=2)
    if math.isfinite(params.a):
        widest = max(2.0 * ball_radius(x, params.n) for x in masses)
        if widest > params.a + 1e-12:
            warnings.warn(f"droplet diameter {widest:.4g} exceeds a={params.a}; g(m) is not exact there",
                          RuntimeWarning, stacklevel=2)
    return gm


def minimal_energy_E(params: PowerLawParams, m: float, k_max: int | None = None) -> float:
    """``E(m) = inf E[rho]`` over admissible densities of mass ``m``."""
    return optimal_partition(params, m, k_max).total_energy


def linear_growth_limit(params: PowerLawParams) -> tuple[float, float]:
    """Preferred droplet mass ``m*`` minimising ``g(m)/m``, and ``g(m*)/m*`` (the limit of ``E(m)/m``)."""
    q, C, d = params.q, params.C, params.d
    m_star = (d / (C * (1.0 + q))) ** (1.0 / q)
    return m_star, float(_g(params, m_star) / m_star)


@dataclass
class SubadditivityReport:
    m: float
    n: float
    E_sum: float
    E_m: float
    E_n: float
    holds: bool
    slack: float = field(default=0.0)


def subadditivity_probe(params: PowerLawParams, m: float, n_mass: float, tol: float = 1e-9) -> SubadditivityReport:
    """Check ``E(m + n) <= E(m) + E(n) + tol``."""
    if not (m > 0 and n_mass > 0):
        raise ValueError("masses must be positive")
    e_sum = minimal_energy_E(params, m + n_mass)
    e_m = minimal_energy_E(params, m)
    e_n = minimal_energy_E(params, n_mass)
    slack = e_m + e_n - e_sum
    return SubadditivityReport(m, n_mass, e_sum, e_m, e_n, e_sum <= e_m + e_n + tol, slack)


def partition_sweep(params: PowerLawParams, masses: Sequence[float]) -> list[dict]:
    """Rows ``{m, k, total_energy, energy_per_mass}`` for each mass."""
    rows = []
    for m in masses:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            gm = optimal_partition(params, float(m))
        rows.append({"m": float(m), "k": gm.k, "total_energy": gm.total_energy,
                     "energy_per_mass": gm.total_energy / float(m)})
    return rows
