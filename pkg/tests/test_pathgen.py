"""Path generator: compensation, Laplace law, jump statistics, first passage."""

import math

import numpy as np
import pytest
from scipy import stats

from crtprune.catalog import MECHANISMS
from crtprune.mechanism import (
    BranchingMechanism, ConstantMarks, MarkingSpec, NO_MARKING, StableTail,
    ThresholdMarks, ZeroMeasure, psi_eval,
)
from crtprune.pathgen import (
    SimGrid, default_cutoff, first_passage, infimum_process, jump_tables,
    sample_path, tail_moments,
)

QUADRATIC = MECHANISMS["quadratic"]
DRIFT_ONLY = BranchingMechanism(1.0, 0.0, ZeroMeasure())


def _x_at_one(mech, marking, n, dt, seed, horizon=1.0, **kw):
    out = np.empty(n)
    grid = SimGrid(dt=dt, horizon=horizon, **kw)
    for i in range(n):
        p = sample_path(mech, marking, grid, seed, i)
        out[i] = p.values[-1]
    return out


def test_pure_drift_path_is_deterministic():
    grid = SimGrid(dt=0.01, horizon=2.0)
    p = sample_path(DRIFT_ONLY, NO_MARKING, grid, seed=1, path_index=0,
                    allow_finite_variation=True)
    assert np.allclose(p.values, -p.times, rtol=0, atol=1e-12)
    assert p.jumps == ()


def test_determinism_and_lane_separation():
    grid = SimGrid(dt=0.01, horizon=1.0)
    mech = MECHANISMS["atom_unit"]
    a = sample_path(mech, NO_MARKING, grid, seed=5, path_index=3)
    b = sample_path(mech, NO_MARKING, grid, seed=5, path_index=3)
    c = sample_path(mech, NO_MARKING, grid, seed=5, path_index=4)
    assert np.array_equal(a.values, b.values) and a.jumps == b.jumps
    assert not np.array_equal(a.values, c.values)


def test_marking_stream_does_not_touch_path():
    grid = SimGrid(dt=0.01, horizon=1.0)
    mech = MECHANISMS["atom_unit"]
    a = sample_path(mech, NO_MARKING, grid, seed=9, path_index=0)
    b = sample_path(mech, MarkingSpec(p=ConstantMarks(1.0)), grid, seed=9, path_index=0)
    assert np.array_equal(a.values, b.values)
    assert [(j.time, j.size) for j in a.jumps] == [(j.time, j.size) for j in b.jumps]
    assert all(not j.node_marked for j in a.jumps)
    assert all(j.node_marked for j in b.jumps)


def test_compensation_mean_drift():
    # empirical mean of X_1 within 3 SE of -alpha (exact at any dt for these)
    for name in ("quadratic", "quadratic_drift", "atoms_mixed"):
        mech = MECHANISMS[name]
        x = _x_at_one(mech, NO_MARKING, n=4000, dt=0.05, seed=11)
        se = x.std() / math.sqrt(len(x))
        assert abs(x.mean() + mech.alpha) <= 3.5 * se, name


def test_laplace_transform_of_x1():
    # E[exp(-lam X_1)] = exp(psi(lam))
    for name, lam in (("quadratic", 1.0), ("quadratic", 0.5), ("atoms_mixed", 0.5)):
        mech = MECHANISMS[name]
        x = _x_at_one(mech, NO_MARKING, n=6000, dt=0.05, seed=13)
        y = np.exp(-lam * x)
        se = y.std() / math.sqrt(len(y))
        want = math.exp(psi_eval(mech, lam))
        assert abs(y.mean() - want) <= 3.5 * se, (name, lam)


def test_stable_laplace_with_gaussian_match():
    mech = MECHANISMS["stable_1p5"]
    x = _x_at_one(mech, NO_MARKING, n=4000, dt=0.02, seed=17, jump_cutoff=0.01)
    lam = 0.5
    y = np.exp(-lam * x)
    se = y.std() / math.sqrt(len(y))
    want = math.exp(psi_eval(mech, lam))
    # small-jump replacement leaves a third-moment bias; budget it explicitly
    assert abs(y.mean() - want) <= 4.0 * se + 0.01


def test_jump_counts_are_poisson():
    # atom (1, 2) with cutoff below the atom: jump count ~ Poisson(2 T)
    mech = BranchingMechanism(0.0, 1.0, MECHANISMS["atom_unit"].levy.__class__(((1.0, 2.0),)))
    grid = SimGrid(dt=0.05, horizon=2.0, jump_cutoff=0.5)
    counts = np.array([len(sample_path(mech, NO_MARKING, grid, 23, i).jumps)
                       for i in range(4000)])
    mean = 2.0 * 2.0
    kmax = int(counts.max()) + 1
    obs = np.bincount(counts, minlength=kmax + 1).astype(float)
    pmf = stats.poisson.pmf(np.arange(kmax + 1), mean)
    # merge the tail so expected counts stay above 5
    exp = pmf * len(counts)
    cut = np.searchsorted(np.cumsum(exp[::-1]), 5.0)
    k = len(exp) - cut
    obs2 = np.concatenate([obs[:k], [obs[k:].sum()]])
    exp2 = np.concatenate([exp[:k], [exp[k:].sum()]])
    chi = stats.chisquare(obs2, exp2 * obs2.sum() / exp2.sum())
    assert chi.pvalue > 1e-3


def test_marked_thinning_counts_and_sizes():
    # stable tail, threshold marks: the marked sub-ledger is Poisson with
    # intensity p(l) pi(dl); counts tested chi-square, sizes KS vs the
    # normalised marked tail law (a Pareto above the threshold).
    mech = MECHANISMS["stable_1p5"]
    c = 1.5
    a = 0.7
    marking = MarkingSpec(p=ThresholdMarks(a), alpha1=0.0)
    grid = SimGrid(dt=0.05, horizon=1.0, jump_cutoff=0.05)
    sizes = []
    counts = []
    for i in range(1500):
        p = sample_path(mech, marking, grid, 57, i)
        marked = [j.size for j in p.jumps if j.node_marked]
        counts.append(len(marked))
        sizes.extend(marked)
        assert all(s >= a for s in marked)
    rate = mech.levy.scale * a ** (-c) / c  # pi([a, inf))
    counts = np.array(counts)
    kmax = int(counts.max())
    obs = np.bincount(counts, minlength=kmax + 1).astype(float)
    exp = stats.poisson.pmf(np.arange(kmax + 1), rate) * len(counts)
    keep = exp > 5
    obs2 = np.concatenate([obs[keep], [obs[~keep].sum()]])
    exp2 = np.concatenate([exp[keep], [exp[~keep].sum()]])
    assert stats.chisquare(obs2, exp2 * obs2.sum() / exp2.sum()).pvalue > 1e-3
    ks = stats.kstest(np.array(sizes), lambda x: 1.0 - (x / a) ** (-c))
    assert ks.pvalue > 1e-3


def test_first_passage_drift_case():
    grid = SimGrid(dt=0.01, horizon=5.0)
    p = sample_path(DRIFT_ONLY, NO_MARKING, grid, 1, 0, allow_finite_variation=True)
    fp = first_passage(p, 2.0)
    assert not fp.censored
    assert fp.time == pytest.approx(2.0, abs=1e-9)


def test_first_passage_quadratic_law():
    # E[exp(-lam tau_l)] = exp(-l sqrt(lam)); grid passage overshoots tau so
    # the estimate is biased low by O(sqrt(dt)), budgeted explicitly
    grid = SimGrid(dt=5e-4, horizon=12.0)
    lam, ell = 1.0, 1.0
    vals = []
    for i in range(2500):
        p = sample_path(QUADRATIC, NO_MARKING, grid, 31, i)
        fp = first_passage(p, ell)
        vals.append(math.exp(-lam * fp.time) if not fp.censored else 0.0)
    vals = np.array(vals)
    want = math.exp(-ell * math.sqrt(lam))
    se = vals.std() / math.sqrt(len(vals))
    assert abs(vals.mean() - want) <= 3.5 * se + 0.04


def test_censoring_rate_matches_fine_grid_oracle():
    horizon = 2.0
    ell = 1.0
    coarse = SimGrid(dt=4e-3, horizon=horizon)
    fine = SimGrid(dt=8e-4, horizon=horizon)
    def rate(grid, seed, n=1500):
        c = 0
        for i in range(n):
            p = sample_path(QUADRATIC, NO_MARKING, grid, seed, i)
            c += first_passage(p, ell).censored
        return c / n, n
    r1, n1 = rate(coarse, 41)
    r2, n2 = rate(fine, 43)
    se = math.sqrt(r1 * (1 - r1) / n1 + r2 * (1 - r2) / n2)
    assert abs(r1 - r2) <= 3.5 * se + 0.01


def test_infimum_process():
    grid = SimGrid(dt=0.01, horizon=1.0)
    p = sample_path(QUADRATIC, NO_MARKING, grid, 3, 7)
    inf = infimum_process(p)
    assert np.all(inf <= p.values + 1e-15)
    assert np.all(np.diff(inf) <= 1e-15)
    q = sample_path(DRIFT_ONLY, NO_MARKING, grid, 3, 0, allow_finite_variation=True)
    assert np.array_equal(infimum_process(q), q.values)  # monotone decreasing path


def test_default_cutoff_policies():
    # finite atoms: cutoff below the smallest atom, zero residual
    eps = default_cutoff(MECHANISMS["atoms_mixed"].levy, beta=0.5)
    assert eps < 0.5
    assert tail_moments(MECHANISMS["atoms_mixed"].levy, eps)[2] == 0.0
    # stable: the l^2 budget would force an unsimulable rate; the cap wins
    lev = StableTail(1.5)
    eps2 = default_cutoff(lev, beta=0.0)
    assert tail_moments(lev, eps2)[0] <= 1e4 + 1.0


def test_pwlaw_jump_sampler_matches_tail_law():
    lev = StableTail(1.5)
    kind, rate, _, ptab = jump_tables(lev, 0.2)
    assert kind == 2
    from crtprune.pathgen import _sample_sizes_pwlaw
    u = (np.arange(20000) + 0.5) / 20000
    s = _sample_sizes_pwlaw(u, *ptab)
    ks = stats.kstest(s, lambda x: 1.0 - (x / 0.2) ** (-1.5))
    assert ks.pvalue > 1e-3
