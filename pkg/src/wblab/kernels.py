"""Radial interaction kernels with a well-barrier shape.

A kernel is a callable ``K(r)`` for ``r >= 0`` returning an array of
extended reals.  Positive infinity is IEEE ``inf`` (``math.inf``); it is
only ever produced inside the open forbidden band of the toy kernel.

Three families are provided:

* :class:`WellBarrierKernel` - attractive well on ``[0, a]``, barrier of
  height at least ``h_bar`` on ``[a, a + W]``, non-negative tail beyond.
* :class:`ToyKernel` - ``-1`` on ``[0, 1]``, ``+inf`` on ``(1, 1 + w)``,
  ``0`` beyond.
* :class:`TruncatedKernel` - any kernel multiplied by ``1[r <= R_cut]``.

Power-law wells ``r**p - d`` are built with :func:`power_law_kernel`.
"""
from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

__all__ = [
    "Profile",
    "WellBarrierKernel",
    "ToyKernel",
    "TruncatedKernel",
    "ValidationReport",
    "make_well_barrier",
    "power_law_kernel",
    "validate_kernel",
    "eval_kernel",
    "truncate_kernel",
    "kernel_from_config",
    "kernel_to_config",
    "load_kernel",
]

INF = math.inf

_PROFILE_PARAMS = {
    "linear": ("d", "w"),
    "power": ("p", "d"),
    "constant": ("value",),
    "inverse-power": ("c", "q"),
    "compact": (),
}


@dataclass(frozen=True)
class Profile:
    """Named radial profile, e.g. ``Profile("power", {"p": 2, "d": 1})``.

    ``linear``         r -> d * (r / w - 1)   (zero crossing at w)
    ``power``          r -> r**p - d
    ``constant``       r -> value
    ``inverse-power``  r -> c / r**q
    ``compact``        r -> 0
    ``custom``         wraps an arbitrary vectorised callable (not serialisable)
    """

    kind: str
    params: Mapping[str, float] = field(default_factory=dict)
    func: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind == "custom":
            if self.func is None:
                raise ValueError("custom profile needs a callable")
            return
        if self.kind not in _PROFILE_PARAMS:
            raise ValueError(f"unknown profile tag {self.kind!r}")
        missing = [k for k in _PROFILE_PARAMS[self.kind] if k not in self.params]
        if missing:
            raise ValueError(f"profile {self.kind!r} missing parameters {missing}")
        if self.kind == "inverse-power" and float(self.params["q"]) <= 0:
            raise ValueError("inverse-power tail needs q > 0")
        if self.kind == "linear" and float(self.params["w"]) <= 0:
            raise ValueError("linear well needs w > 0")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        k, p = self.kind, self.params
        if k == "custom":
            return np.asarray(self.func(r), dtype=float) * np.ones_like(r)
        if k == "linear":
            return float(p["d"]) * (r / float(p["w"]) - 1.0)
        if k == "power":
            return r ** float(p["p"]) - float(p["d"])
        if k == "constant":
            return np.full_like(r, float(p["value"]))
        if k == "inverse-power":
            with np.errstate(divide="ignore"):
                return float(p["c"]) / r ** float(p["q"])
        return np.zeros_like(r)

    def as_dict(self) -> dict:
        if self.kind == "custom":
            raise ValueError("custom profiles cannot be serialised")
        return {"profile": self.kind, **{k: float(v) for k, v in self.params.items()}}


def _as_profile(obj) -> Profile:
    if isinstance(obj, Profile):
        return obj
    if callable(obj):
        return Profile("custom", func=obj)
    raise TypeError(f"expected Profile or callable, got {type(obj).__name__}")


@dataclass(frozen=True)
class WellBarrierKernel:
    """Kernel with an attractive well, a repulsive barrier and a decaying tail.

    Evaluation is piecewise: ``well`` on ``[0, a]``, ``barrier`` on
    ``(a, a + W]`` and ``tail`` beyond ``a + W``.
    """

    d: float
    w: float
    a: float
    h_bar: float
    W: float
    well: Profile
    barrier: Profile
    tail: Profile

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        in_well = r <= self.a
        in_barrier = (~in_well) & (r <= self.a + self.W)
        beyond = ~(in_well | in_barrier)
        if in_well.any():
            out[in_well] = self.well(r[in_well])
        if in_barrier.any():
            out[in_barrier] = self.barrier(r[in_barrier])
        if beyond.any():
            out[beyond] = self.tail(r[beyond])
        return out

    @property
    def depth(self) -> float:
        return self.d

    @property
    def barrier_end(self) -> float:
        return self.a + self.W

    @property
    def support_radius(self) -> float:
        """Radius beyond which the kernel vanishes identically (inf if it only decays)."""
        return self.barrier_end if self.tail.kind == "compact" else INF

    @property
    def band(self):
        return None

    @property
    def breakpoints(self) -> tuple[float, ...]:
        pts = [self.a, self.a + self.W]
        if 0 < self.w < self.a:
            pts.append(self.w)
        return tuple(sorted(pts))

    @property
    def power(self) -> float | None:
        """Exponent ``p`` when the well is the power law ``r**p - d``."""
        return float(self.well.params["p"]) if self.well.kind == "power" else None

    def tail_sup(self, R: float) -> float:
        """``sup_{r >= R} K(r)``."""
        if R > self.barrier_end:
            if self.tail.kind == "compact":
                return 0.0
            if self.tail.kind == "inverse-power":
                return float(self.tail(np.array([R]))[0])
        return _sampled_sup(self, R)

    def grid_eval(self, r, h: float):
        return self(r)


def _sampled_sup(kernel, R: float, decades: int = 12, per_decade: int = 200) -> float:
    R0 = max(R, 1e-12)
    rs = R0 * np.logspace(0, decades, decades * per_decade + 1)
    rs = np.concatenate(([R], rs, list(p for p in kernel.breakpoints if p >= R)))
    return float(np.max(kernel(rs)))


@dataclass(frozen=True)
class ToyKernel:
    """``-1`` on ``[0, 1]``, ``+inf`` on the open band ``(1, 1 + w)``, ``0`` beyond.

    With ``w == 0`` the band is empty; the "no pair at distance exactly 1"
    constraint is then an admissibility condition handled by the exact
    interval energy, not a kernel value.
    """

    w: float

    def __post_init__(self):
        if not self.w >= 0:
            raise ValueError("toy kernel needs w >= 0")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        out[r <= 1.0] = -1.0
        out[(r > 1.0) & (r < 1.0 + self.w)] = INF
        return out

    def grid_eval(self, r, h: float):
        """Evaluation on lattice distances.

        Only distances strictly inside ``(1 + h/2, 1 + w - h/2)`` count as
        forbidden; distances in the two margins take the value of the nearest
        finite branch so cell-centre quantisation does not create spurious
        infinities.
        """
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        eps = 0.5 * h
        out[r <= 1.0 + eps] = -1.0
        if self.w > 0:
            out[(r > 1.0 + eps) & (r < 1.0 + self.w - eps)] = INF
        return out

    @property
    def depth(self) -> float:
        return 1.0

    @property
    def support_radius(self) -> float:
        return 1.0 + self.w

    @property
    def band(self):
        return (1.0, 1.0 + self.w) if self.w > 0 else None

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return (1.0, 1.0 + self.w) if self.w > 0 else (1.0,)

    def tail_sup(self, R: float) -> float:
        # [R, inf) always reaches the zero branch; it meets the band iff R < 1 + w
        return INF if (self.w > 0 and R < 1.0 + self.w) else 0.0


@dataclass(frozen=True)
class TruncatedKernel:
    """``base(r) * 1[r <= R_cut]``."""

    base: object
    R_cut: float

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r <= self.R_cut, self.base(r), 0.0)

    def grid_eval(self, r, h: float):
        r = np.asarray(r, dtype=float)
        return np.where(r <= self.R_cut, self.base.grid_eval(r, h), 0.0)

    def __getattr__(self, name):
        # well-barrier parameters (d, w, a, h_bar, W, power, ...) come from the base
        if name in ("base", "R_cut"):
            raise AttributeError(name)
        return getattr(self.base, name)

    @property
    def depth(self) -> float:
        return self.base.depth

    @property
    def support_radius(self) -> float:
        return min(self.R_cut, self.base.support_radius)

    @property
    def band(self):
        return self.base.band

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(sorted(set(self.base.breakpoints) | {self.R_cut}))

    def tail_sup(self, R: float) -> float:
        if R > self.R_cut:
            return 0.0
        return max(_sampled_sup(self, R), 0.0)


# -- construction -----------------------------------------------------------

def make_well_barrier(d, w, a, h_bar, W, well=None, barrier=None, tail=None) -> WellBarrierKernel:
    """Assemble a well-barrier kernel.

    Profiles default to a linear well crossing zero at ``w``, a constant
    barrier at ``h_bar`` and a compact (zero) tail.  Conditions (K1)-(K5)
    are *not* checked here; see :func:`validate_kernel`.
    """
    d, w, a, h_bar, W = (float(x) for x in (d, w, a, h_bar, W))
    if not (d > 0 and a > 0 and h_bar > 0 and W > 0):
        raise ValueError("d, a, h_bar and W must be positive")
    if not w >= 0:
        raise ValueError("w must be non-negative")
    well = _as_profile(well if well is not None else Profile("linear", {"d": d, "w": w}))
    barrier = _as_profile(barrier if barrier is not None else Profile("constant", {"value": h_bar}))
    tail = _as_profile(tail if tail is not None else Profile("compact"))

    for name, prof, lo, hi in (
        ("well", well, 0.0, a),
        ("barrier", barrier, a, a + W),
        ("tail", tail, a + W, 1e3 * (a + W)),
    ):
        xs = np.linspace(lo, hi, 257)
        if name == "tail":
            xs = xs[1:]
        with np.errstate(all="ignore"):
            vals = prof(xs)
        if vals.shape != xs.shape or not np.all(np.isfinite(vals)):
            raise ValueError(f"{name} profile is not finite on its domain [{lo}, {hi}]")
    k0 = float(well(np.array([0.0]))[0])
    if not math.isclose(k0, -d, rel_tol=1e-12, abs_tol=1e-12):
        raise ValueError(f"well profile gives K(0)={k0}, expected -d={-d}")
    return WellBarrierKernel(d, w, a, h_bar, W, well, barrier, tail)


def power_law_kernel(p, d, a, W, barrier_height, tail=None) -> WellBarrierKernel:
    """Kernel ``r**p - d`` on ``[0, a]`` with a constant barrier and a tail.

    The well width is ``d**(1/p)`` when that lies inside ``[0, a]``.
    """
    p, d, a = float(p), float(d), float(a)
    w = d ** (1.0 / p)
    if w > a:
        raise ValueError("well must cross zero inside [0, a] (need d**(1/p) <= a)")
    well = Profile("power", {"p": p, "d": d})
    barrier = Profile("constant", {"value": float(barrier_height)})
    return make_well_barrier(d, w, a, barrier_height, W, well=well, barrier=barrier, tail=tail)


# -- validation -------------------------------------------------------------

@dataclass
class ValidationReport:
    checks: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        """True when (K1)-(K5) all pass (the structural flag is informational)."""
        return all(v for k, v in self.checks.items() if k != "structural")

    def failed(self) -> list[str]:
        return [k for k, v in self.checks.items() if not v]

    def as_dict(self) -> dict:
        return {"ok": self.ok, "checks": dict(self.checks), "details": dict(self.details)}


def validate_kernel(kernel: WellBarrierKernel, tol: float = 0.0, samples: int = 10_000,
                    decay_tol: float = 1e-6) -> ValidationReport:
    """Check conditions (K1)-(K5), the structural flag ``a + w <= W - 2w`` and
    consistency of the supplied well width ``w``."""
    rep = ValidationReport()
    d, w, a, h, W = kernel.d, kernel.w, kernel.a, kernel.h_bar, kernel.W

    rs = np.linspace(0.0, a, samples)
    well_vals = kernel(rs)
    k0 = float(well_vals[0])
    drops = np.diff(well_vals)
    rep.checks["K1"] = bool(k0 < 0 and np.all(drops >= -tol))
    rep.details["K1"] = f"K(0)={k0:.6g}, worst decrease on [0,a]={min(0.0, float(drops.min())):.3g}"

    rb = np.linspace(a, a + W, samples)
    bvals = kernel.barrier(rb)
    rep.checks["K2"] = bool(np.all(bvals >= h - tol))
    rep.details["K2"] = f"min barrier={float(bvals.min()):.6g} vs h_bar={h:.6g}"

    R0 = a + W
    rt = R0 * np.logspace(0, 8, samples)[1:]
    tvals = kernel.tail(rt)
    nonneg = bool(np.all(tvals >= -tol))
    # sup over [R_k, inf) on doubling radii must shrink below decay_tol
    sups = np.maximum.accumulate(tvals[::-1])[::-1]
    radii = R0 * 2.0 ** np.arange(1, 25)
    env = np.array([sups[min(np.searchsorted(rt, R), len(rt) - 1)] for R in radii])
    decays = bool(np.all(np.diff(env) <= tol) and env[-1] <= decay_tol)
    rep.checks["K3"] = nonneg and decays
    rep.details["K3"] = f"tail min={float(tvals.min()):.3g}, sup beyond {radii[-1]:.3g}={float(env[-1]):.3g}"

    rep.checks["K4"] = bool(d < h)
    rep.details["K4"] = f"d={d:.6g} < h_bar={h:.6g}"
    rep.checks["K5"] = bool(2 * w < W)
    rep.details["K5"] = f"2w={2 * w:.6g} < W={W:.6g}"
    rep.checks["structural"] = bool(a + w <= W - 2 * w)
    rep.details["structural"] = f"a+w={a + w:.6g} <= W-2w={W - 2 * w:.6g}"

    # w must be where K first becomes positive
    delta = 1e-6 * max(w, 1.0)
    below = float(kernel(np.array([max(w - delta, 0.0)]))[0])
    above = float(kernel(np.array([w + delta]))[0])
    at = float(kernel(np.array([w]))[0])
    rep.checks["width"] = bool(abs(at) <= max(tol, 1e-9) or (below <= tol and above > 0))
    rep.details["width"] = f"K(w-)={below:.3g}, K(w)={at:.3g}, K(w+)={above:.3g}"
    return rep


def eval_kernel(kernel, r):
    """Evaluate ``kernel`` at ``r >= 0``; returns a float for scalar input."""
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError("kernel evaluated at negative distance")
    out = kernel(arr)
    return float(out) if out.ndim == 0 else out


def truncate_kernel(kernel, R_cut: float, check_points: int = 1000) -> TruncatedKernel:
    """Cut ``kernel`` to zero beyond ``R_cut`` (which must not cut the barrier)."""
    end = getattr(kernel, "barrier_end", None)
    if end is None and isinstance(kernel, ToyKernel):
        end = kernel.support_radius
    if end is not None and R_cut < end:
        raise ValueError(f"R_cut={R_cut} would cut the barrier ending at {end}")
    tk = TruncatedKernel(kernel, float(R_cut))
    rs = np.linspace(0.0, 4.0 * R_cut, check_points)
    base = kernel(rs)
    ok = (base < 0) | (tk(rs) <= base)
    if not np.all(ok):
        raise ValueError("truncation increased the kernel; tail is not non-negative")
    return tk


# -- text config ------------------------------------------------------------

def kernel_to_config(kernel) -> str:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    R_cut = None
    if isinstance(kernel, TruncatedKernel):
        R_cut, kernel = kernel.R_cut, kernel.base
    if isinstance(kernel, ToyKernel):
        cp["kernel"] = {"type": "toy", "w": repr(float(kernel.w))}
    else:
        cp["kernel"] = {"type": "well-barrier"}
        cp["well"] = {"d": repr(kernel.d), "w": repr(kernel.w), "a": repr(kernel.a),
                      **{k: repr(v) if not isinstance(v, str) else v
                         for k, v in kernel.well.as_dict().items()}}
        cp["barrier"] = {"h_bar": repr(kernel.h_bar), "W": repr(kernel.W),
                         **{k: repr(v) if not isinstance(v, str) else v
                            for k, v in kernel.barrier.as_dict().items()}}
        cp["tail"] = {k: repr(v) if not isinstance(v, str) else v
                      for k, v in kernel.tail.as_dict().items()}
    if R_cut is not None:
        cp["kernel"]["truncate"] = repr(R_cut)
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def _section_profile(sec: Mapping[str, str], skip: tuple[str, ...]) -> Profile:
    kind = sec.get("profile")
    if kind is None:
        raise ValueError(f"section is missing a 'profile' tag")
    params = {k: float(v) for k, v in sec.items() if k != "profile" and k not in skip}
    if kind == "linear":
        params = {"d": params["d"], "w": params["w"]}
    elif kind == "power":
        params = {"p": params["p"], "d": params["d"]}
    return Profile(kind, params)


def kernel_from_config(text: str):
    """Parse a kernel from the ``[kernel]/[well]/[barrier]/[tail]`` text format."""
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp.read_string(text)
    if "kernel" not in cp:
        raise ValueError("config has no [kernel] section")
    kind = cp["kernel"].get("type", "well-barrier")
    if kind == "toy":
        kernel = ToyKernel(float(cp["kernel"]["w"]))
    elif kind in ("well-barrier", "power-law"):
        wl, br = cp["well"], cp["barrier"]
        tail = _section_profile(cp["tail"], ()) if "tail" in cp else Profile("compact")
        well = _section_profile(wl, ("a",))
        if well.kind == "linear" and "d" not in wl:
            raise ValueError("linear well needs d")
        barrier = _section_profile(br, ("h_bar", "W"))
        d = float(wl.get("d", well.params.get("d", 0)))
        w = float(wl["w"]) if "w" in wl else (d ** (1.0 / well.params["p"]) if well.kind == "power" else 0.0)
        kernel = make_well_barrier(d, w, float(wl["a"]), float(br["h_bar"]), float(br["W"]),
                                   well=well, barrier=barrier, tail=tail)
    else:
        raise ValueError(f"unknown kernel type {kind!r}")
    if "truncate" in cp["kernel"]:
        kernel = truncate_kernel(kernel, float(cp["kernel"]["truncate"]))
    return kernel


def load_kernel(path) -> object:
    return kernel_from_config(Path(path).read_text())
