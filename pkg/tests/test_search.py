import math

import numpy as np
import pytest

from wblab.densities import DropletConfig, from_droplets
from wblab.droplets import PowerLawParams, minimal_energy_E, optimal_partition
from wblab.energy import cross_energy
from wblab.kernels import Profile, ToyKernel, power_law_kernel
from wblab.search import (
    AnnealSchedule, InfeasibleError, anneal, anneal_chains, cluster_decompose, default_box, el_residual_of_annealed,
    minimizing_sequence,
)

P = PowerLawParams(1, 2, 1)
H = 0.05


def run(kernel, m, seed=42, h=H, **kw):
    return anneal(kernel, m, h, AnnealSchedule.default(kernel, m, h, 1, seed=seed, **kw))


def gap(kernel):
    return kernel.a + kernel.W


# -- schedule ---------------------------------------------------------------------------

def test_schedule_validation():
    with pytest.raises(ValueError):
        AnnealSchedule(T0=0.0)
    with pytest.raises(ValueError):
        AnnealSchedule(T0=1.0, cooling=1.0)
    with pytest.raises(ValueError):
        AnnealSchedule(T0=1.0, epochs=0)


def test_default_schedule(pl_kernel):
    sc = AnnealSchedule.default(pl_kernel, 1.5, 0.05, 1, seed=3)
    assert sc.T0 == pytest.approx(1.0 * 1.5 * 0.05)
    assert sc.cooling == 0.95 and sc.epochs == 200
    assert sc.moves_per_epoch == 50 * 30 and sc.seed == 3


def test_default_box(pl_kernel):
    lo, hi = default_box(pl_kernel, 2.0, 1)
    assert hi[0] - lo[0] == pytest.approx(4 * 1.0 + 2 * 6.5)
    assert lo[0] == -hi[0]


# -- annealing ------------------------------------------------------------------------

def test_single_droplet(pl_kernel):
    res = run(pl_kernel, 1.5)
    target = minimal_energy_E(P, 1.5)
    assert abs(res.energy - target) <= 0.05 * abs(target)
    assert len(cluster_decompose(res.density, gap(pl_kernel))) == 1


def test_two_droplets(pl_kernel):
    res = run(pl_kernel, 2.1)
    cs = cluster_decompose(res.density, gap(pl_kernel))
    assert len(cs) == 2
    assert all(abs(x - 1.05) <= 0.105 for x in cs.masses)
    assert cs.min_gap() >= gap(pl_kernel)


@pytest.mark.parametrize("m", [3.0, 4.0])
def test_cluster_masses_match_partition(pl_kernel, m):
    res = run(pl_kernel, m)
    got = sorted(cluster_decompose(res.density, gap(pl_kernel)).masses)
    want = sorted(optimal_partition(P, m).masses)
    assert len(got) == len(want)
    assert all(abs(g - x) <= 0.1 * x for g, x in zip(got, want))


def test_trace_and_mass(pl_kernel):
    res = run(pl_kernel, 2.1, epochs=60)
    best = [b for _, _, b, _ in res.trace]
    assert all(y <= x for x, y in zip(best, best[1:]))
    assert len(res.trace) == 60
    assert res.density.values.sum() == 42
    assert set(np.unique(res.density.values)) == {0.0, 1.0}
    assert res.energy == pytest.approx(best[-1], abs=1e-9)
    density, trace = res
    assert density is res.density and trace is res.trace
    assert res.trace_csv().splitlines()[0] == "epoch,T,best_energy,current_energy"


def test_determinism(pl_kernel):
    a = run(pl_kernel, 2.1, seed=9, epochs=40)
    b = run(pl_kernel, 2.1, seed=9, epochs=40)
    assert a.density.to_text() == b.density.to_text()
    assert a.trace_csv() == b.trace_csv()
    c = run(pl_kernel, 2.1, seed=10, epochs=40)
    assert c.trace_csv() != a.trace_csv()


def test_toy_band_safety():
    K = ToyKernel(0.5)
    h = 0.25
    for seed in range(3):
        res = anneal(K, 2.0, h, AnnealSchedule.default(K, 2.0, h, 1, seed=seed, epochs=50))
        _, X, _ = res.density.occupied()
        d = np.abs(X[:, 0][:, None] - X[:, 0][None, :])
        assert not np.isinf(K.grid_eval(d, h)).any()
        assert math.isfinite(res.energy)
        assert res.energy <= -2 + 2 * h


def test_infeasible_start():
    # eight cells in ten with offsets 5..7 banned: no admissible state exists
    K = ToyKernel(1.0)
    with pytest.raises(InfeasibleError):
        anneal(K, 2.0, 0.25, AnnealSchedule(T0=1.0, epochs=1, moves_per_epoch=1), box=((0.0,), (2.5,)))


def test_anneal_errors(pl_kernel):
    with pytest.raises(ValueError):
        anneal(pl_kernel, 1.03, 0.05)
    with pytest.raises(ValueError):
        anneal(pl_kernel, 5.0, 0.5, box=((0.0,), (1.0,)))


def test_chains_pick_best(pl_kernel):
    sc = AnnealSchedule.default(pl_kernel, 1.5, 0.1, 1, epochs=10)
    best = anneal_chains(pl_kernel, 1.5, 0.1, sc, seeds=[1, 2, 3], workers=2)
    singles = [anneal(pl_kernel, 1.5, 0.1, AnnealSchedule.default(pl_kernel, 1.5, 0.1, 1, seed=s, epochs=10)).energy
               for s in (1, 2, 3)]
    assert best.energy == min(singles)


def test_anneal_2d_small(pl_kernel):
    h = 0.2
    m = 0.4  # ten cells
    res = anneal(pl_kernel, m, h, AnnealSchedule.default(pl_kernel, m, h, 2, seed=1), dim=2)
    assert res.density.values.sum() == 10
    assert len(cluster_decompose(res.density, gap(pl_kernel))) == 1


# -- clusters -------------------------------------------------------------------------

def test_cluster_examples(pl_kernel):
    R = pl_kernel.support_radius
    two = from_droplets(DropletConfig((((0.0,), 0.5), ((3 * R,), 0.5)), 1), 0.05)
    cs = cluster_decompose(two, R)
    assert len(cs) == 2
    assert sum(cs.masses) == pytest.approx(two.mass)
    assert cross_energy(pl_kernel, cs.clusters[0], cs.clusters[1]) == 0
    one = from_droplets(DropletConfig((((0.0,), 0.5),), 1), 0.05)
    assert len(cluster_decompose(one, R)) == 1
    s = cs.summary()
    assert s["count"] == 2 and s["clusters"][0]["center"][0] < s["clusters"][1]["center"][0]
    with pytest.raises(ValueError):
        cluster_decompose(one, 0.0)


# -- minimizing sequence -----------------------------------------------------------------

def tail_kernel():
    return power_law_kernel(2, 1, 1.5, 5, 3, tail=Profile("inverse-power", {"c": 0.1, "q": 2}))


def test_sequence_tail_bound():
    tr = minimizing_sequence(P, [1.05, 1.05], [10, 20, 40], tail_kernel())
    assert tr.limit == pytest.approx(2 * (1.05 ** 4 / 6 - 1.05 ** 2), abs=1e-14)
    assert tr.bounds_hold and tr.monotone
    assert all(g > 0 for g in tr.gaps)
    # first entry: 2 * m^2 * c / (D - 2r)^2
    assert tr.bound[0] == pytest.approx(2 * 1.05 ** 2 * 0.1 / (10 - 1.05) ** 2, rel=1e-12)


def test_sequence_truncated_is_exact(pl_kernel):
    tr = minimizing_sequence(P, [1.05, 1.05], [10, 20, 40], pl_kernel)
    assert all(abs(g) <= 1e-12 for g in tr.gaps)


def test_sequence_rejects_close_droplets():
    with pytest.raises(ValueError):
        minimizing_sequence(P, [1.05, 1.05], [5.0], tail_kernel())
    with pytest.raises(ValueError):
        minimizing_sequence(P, [1.05, 1.05], [20.0, 10.0], tail_kernel())


# -- Euler-Lagrange residuals ---------------------------------------------------------------

def test_el_long_beats_short(pl_kernel):
    h = 0.1
    wins = 0
    for seed in range(10):
        short = run(pl_kernel, 1.5, seed=seed, h=h, epochs=5)
        long = run(pl_kernel, 1.5, seed=seed, h=h)
        rs = el_residual_of_annealed(pl_kernel, short.density)
        rl = el_residual_of_annealed(pl_kernel, long.density)
        wins += rl.total_violation <= rs.total_violation
        assert rl.lambda_ < 0
    assert wins >= 8


def test_el_exact_ball(pl_kernel):
    ball = from_droplets(DropletConfig((((0.0,), 0.75),), 1), 0.05, pad=7)
    rep = el_residual_of_annealed(pl_kernel, ball)
    assert rep.total_violation == 0 and rep.lambda_negative
