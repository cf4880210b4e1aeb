"""Discretised paths of the spectrally positive Levy process X.

E[exp(-lam X_t)] = exp(t psi(lam)).  The simulated path carries

  * a Gaussian skeleton on the dt grid: increments with mean
    -(alpha + m1(eps)) dt and variance (2 beta + v2?(eps)) dt, where
    m1(eps) is the mean of jumps >= eps (their compensator) and the
    small-jump remainder is either dropped or matched in variance,
  * jumps >= eps at their exact Poisson times, with sizes drawn from the
    normalised restriction of pi and node-mark flags drawn Bernoulli(p(size))
    from the independent mark stream.

A PathSample is a deterministic function of (seed, path_index, config).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from . import rng
from .mechanism import (
    BranchingMechanism, FiniteAtoms, MarkingSpec, NO_MARKING, ThinnedMeasure,
    ZeroMeasure, _mark_values, _measure_pieces, _segment_moment,
)

__all__ = ["SimGrid", "JumpEvent", "PathSample", "sample_path", "first_passage",
           "infimum_process", "FirstPassageResult", "default_cutoff", "jump_tables",
           "tail_moments"]


@dataclass(frozen=True)
class SimGrid:
    """Time step, horizon, and the small-jump policy below the cutoff."""
    dt: float
    horizon: float
    jump_cutoff: Optional[float] = None  # None -> default_cutoff at sampling time
    small_jump_policy: str = "gaussian_match"  # or "drop"

    def __post_init__(self):
        if self.dt <= 0 or self.horizon < self.dt:
            raise ValueError("need dt > 0 and horizon >= dt")
        if self.small_jump_policy not in ("gaussian_match", "drop"):
            raise ValueError("small_jump_policy must be gaussian_match or drop")
        if self.jump_cutoff is not None and self.jump_cutoff <= 0:
            raise ValueError("jump cutoff must be positive")


@dataclass(frozen=True)
class JumpEvent:
    time: float
    size: float
    node_marked: bool


@dataclass(frozen=True)
class PathSample:
    times: np.ndarray          # grid times, t_0 = 0
    values: np.ndarray         # X on the grid (jumps included from their exact times)
    jumps: Tuple[JumpEvent, ...]
    small_jump_bias: float     # integral_(0,eps) l^2 pi(dl), the reported bound
    cutoff: float
    seed: int
    path_index: int


@dataclass(frozen=True)
class FirstPassageResult:
    time: float
    censored: bool


# ---------------------------------------------------------------------------
# Levy-measure tail machinery (restriction to [eps, inf))
# ---------------------------------------------------------------------------

def tail_moments(measure, eps: float):
    """(mass, mean, var_below) = (pi[eps,inf), int_[eps,inf) l pi, int_(0,eps) l^2 pi)."""
    mass = 0.0
    mean = 0.0
    var_below = 0.0
    for (l, w) in measure._atoms():
        if l >= eps:
            mass += w
            mean += w * l
        else:
            var_below += w * l * l
    for (a, b, A, s, weight) in _measure_pieces(measure):
        if weight is not None:
            raise NotImplementedError(
                "path simulation of mark-thinned continuous measures is not supported; "
                "simulate the base mechanism and prune instead")
        lo = max(a, eps)
        if lo < b:
            mass += _segment_moment(lo, b, A, s, 0)
            mean += _segment_moment(lo, b, A, s, 1)
        hi = min(b, eps)
        if a < hi:
            var_below += _segment_moment(a, hi, A, s, 2)
    return mass, mean, var_below


def default_cutoff(measure, beta: float, rel_tol: float = 1e-4,
                   rate_cap: float = 1e4) -> float:
    """Cutoff so the sub-cutoff l^2 mass is <= rel_tol of the second-moment scale.

    FiniteAtoms get a cutoff below the smallest atom (exact simulation).  A
    rate cap keeps pi[eps, inf) simulable for measures with infinite activity;
    the achieved residual is reported on the sample.
    """
    atoms = measure._atoms()
    pieces = _measure_pieces(measure)
    if not pieces:
        if not atoms:
            return 1.0
        return 0.5 * min(l for l, _ in atoms)
    scale = rel_tol * (2.0 * beta + _ell_wedge(measure))
    lo, hi = 1e-12, 1e3
    # var_below is increasing in eps; find the largest eps meeting the budget
    for _ in range(80):
        mid = math.sqrt(lo * hi)
        if tail_moments(measure, mid)[2] <= scale:
            lo = mid
        else:
            hi = mid
    eps = lo
    for _ in range(80):
        if tail_moments(measure, eps)[0] <= rate_cap:
            break
        eps *= 1.3
    return eps


def _ell_wedge(measure):
    from .mechanism import _ell_wedge_ell2
    return _ell_wedge_ell2(measure)


def jump_tables(measure, eps: float):
    """Sampler data for the normalised restriction of pi to [eps, inf).

    Returns (kind, rate, atoms_tuple, segments_tuple):
      kind 0: no jumps; 1: finite atoms (sizes, cumprob); 2: piecewise power
      law (cum, lo, hi, e) with exact inverse-cdf sampling per segment.
    """
    mass, _, _ = tail_moments(measure, eps)
    if mass <= 0.0:
        return 0, 0.0, None, None
    atoms = [(l, w) for (l, w) in measure._atoms() if l >= eps]
    pieces = [(max(a, eps), b, A, s) for (a, b, A, s, _) in _measure_pieces(measure)
              if b > eps]
    if atoms and not pieces:
        sizes = np.array([l for l, _ in atoms])
        probs = np.array([w for _, w in atoms]) / mass
        order = np.argsort(sizes)
        return 1, mass, (sizes[order], np.cumsum(probs[order])), None
    if pieces and not atoms:
        # inverse cdf of each power-law segment is closed-form; an unbounded
        # last segment has e = s+1 < -1 so hi**e -> 0 (IEEE inf**negative)
        cum = np.cumsum([_segment_moment(a, b, A, s, 0) for (a, b, A, s) in pieces]) / mass
        cum[-1] = 1.0
        lo_a = np.asarray([a for (a, _, _, _) in pieces])
        hi_a = np.asarray([b if b != math.inf else np.inf for (_, b, _, _) in pieces])
        e_a = np.asarray([s + 1.0 for (_, _, _, s) in pieces])
        return 2, mass, None, (cum, lo_a, hi_a, e_a)
    if atoms and pieces:
        raise NotImplementedError("measures mixing atoms and a density are not supported")
    return 0, 0.0, None, None


def _sample_sizes_pwlaw(u, cum, lo, hi, e):
    """Vectorised exact inverse cdf for the piecewise power law."""
    u = np.asarray(u)
    idx = np.searchsorted(cum, u, side="left")
    idx = np.minimum(idx, len(cum) - 1)
    ulo = np.where(idx > 0, cum[np.maximum(idx - 1, 0)] * (idx > 0), 0.0)
    w = (u - ulo) / (cum[idx] - ulo)
    a, b, ee = lo[idx], hi[idx], e[idx]
    out = np.power(np.power(a, ee) + w * (np.power(b, ee) - np.power(a, ee)), 1.0 / ee)
    log_case = np.abs(ee) < 1e-12
    if np.any(log_case):
        out = np.where(log_case, a * np.power(np.where(np.isfinite(b), b, a) / a, w), out)
    return out


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def sample_path(mech: BranchingMechanism, marking: MarkingSpec, grid: SimGrid,
                seed: int, path_index: int,
                allow_finite_variation: bool = False) -> PathSample:
    """One discretised path with its jump ledger; deterministic in (seed, index)."""
    if not mech.is_infinite_variation and not allow_finite_variation:
        raise ValueError("finite-variation mechanism: pass allow_finite_variation=True "
                         "for test mode")
    eps = grid.jump_cutoff if grid.jump_cutoff is not None else \
        default_cutoff(mech.levy, mech.beta)
    mass, mean_tail, var_below = tail_moments(mech.levy, eps)
    drift = -(mech.alpha + mean_tail)
    var_rate = 2.0 * mech.beta
    if grid.small_jump_policy == "gaussian_match":
        var_rate += var_below

    n_steps = int(math.ceil(grid.horizon / grid.dt))
    times = np.arange(n_steps + 1) * grid.dt

    # Gaussian skeleton
    if var_rate > 0.0:
        z = rng.normals_vec(seed, path_index, rng.PURPOSE_PATH, n_steps)
    else:
        z = np.zeros(n_steps)
    incr = drift * grid.dt + math.sqrt(var_rate * grid.dt) * z

    # jumps at exact Poisson times
    jumps = []
    if mass > 0.0:
        kind, rate, atab, ptab = jump_tables(mech.levy, eps)
        # draw about twice the expected count, extend if unlucky
        need = max(16, int(rate * grid.horizon * 2 + 8 * math.sqrt(rate * grid.horizon + 1)))
        u = rng.uniforms_vec(seed, path_index, rng.PURPOSE_JUMPS, 2 * need)
        gaps = -np.log(u[0::2]) / rate
        t_j = np.cumsum(gaps)
        while t_j[-1] < grid.horizon:
            need *= 2
            u = rng.uniforms_vec(seed, path_index, rng.PURPOSE_JUMPS, 2 * need)
            gaps = -np.log(u[0::2]) / rate
            t_j = np.cumsum(gaps)
        keep = t_j <= grid.horizon
        t_j = t_j[keep]
        size_u = u[1::2][keep]
        if kind == 1:
            sizes_tab, cum_tab = atab
            idx = np.searchsorted(cum_tab, size_u, side="left")
            idx = np.minimum(idx, len(cum_tab) - 1)
            sizes = sizes_tab[idx]
        else:
            cum, lo, hi, e = ptab
            sizes = _sample_sizes_pwlaw(size_u, cum, lo, hi, e)
        pmark = _mark_values(marking.p, sizes)
        um = rng.uniforms_vec(seed, path_index, rng.PURPOSE_MARKS, len(sizes), slot=1)
        flags = um <= pmark
        jumps = [JumpEvent(float(t), float(s), bool(f))
                 for t, s, f in zip(t_j, sizes, flags)]

    values = np.concatenate(([0.0], np.cumsum(incr)))
    for ev in jumps:
        k = int(math.ceil(ev.time / grid.dt))
        values[k:] += ev.size

    return PathSample(times=times, values=values, jumps=tuple(jumps),
                      small_jump_bias=var_below, cutoff=eps,
                      seed=seed, path_index=path_index)


def first_passage(path: PathSample, level: float) -> FirstPassageResult:
    """First time X <= -level, linearly interpolated inside the crossing step."""
    if level <= 0:
        raise ValueError("level must be positive")
    below = path.values <= -level
    if not below.any():
        return FirstPassageResult(time=float(path.times[-1]), censored=True)
    k = int(np.argmax(below))
    if k == 0:
        return FirstPassageResult(time=0.0, censored=False)
    x0, x1 = path.values[k - 1], path.values[k]
    t0 = path.times[k - 1]
    dt = path.times[k] - t0
    # downward crossings are continuous for spectrally positive paths; any jump
    # inside the step moved X upward and cannot have produced the crossing
    frac = (x0 + level) / (x0 - x1) if x1 < x0 else 1.0
    return FirstPassageResult(time=float(t0 + frac * dt), censored=False)


def infimum_process(path: PathSample) -> np.ndarray:
    """Running minimum I_t on the grid; nonincreasing by construction."""
    return np.minimum.accumulate(path.values)
