"""Driver for the batch excursion kernels.

Translates (mechanism, marking, run parameters) into kernel arguments,
enforces mode eligibility, and returns plain arrays.  Two modes:

  full    joint observables (sigma, A_sigma, components) with a time cap;
          suitable for statistics carrying an exp(-c * sigma) weight that
          kills the heavy sigma tail (censoring documented per estimate).
  excise  marked excursions cut out; simulates the pruned process on its
          own clock, so A_sigma and the pruned mass path carry no horizon
          bias.  sigma is not observable in this mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from . import _kernels as K
from . import pathgen
from .mechanism import (
    BranchingMechanism, ConstantMarks, MarkingSpec, NO_MARKING, TabulatedMarks,
    ThresholdMarks, _mark_at, validate,
)
from .rng import split_key

__all__ = ["RunParams", "BatchResult", "run_batch"]

_EMPTY = np.empty(0)


@dataclass(frozen=True)
class RunParams:
    ell: float
    dt: float = 1e-4
    horizon: float = 40.0
    n_paths: int = 1000
    seed: int = 0
    lane_offset: int = 0
    excise: bool = False
    mark_initial_atom: bool = False
    component_delta: float = 0.0
    pruned_times: Tuple[float, ...] = ()
    direct_times: Tuple[float, ...] = ()
    jump_cutoff: Optional[float] = None
    small_jump_policy: str = "gaussian_match"
    allow_finite_variation: bool = False


@dataclass
class BatchResult:
    sigma: np.ndarray
    A_sigma: np.ndarray
    censored: np.ndarray          # boolean
    n_components: np.ndarray
    pruned_mass: np.ndarray       # (n, len(pruned_times)); nan where censored first
    direct_mass: np.ndarray
    cutoff: float
    small_jump_bias: float
    params: RunParams

    @property
    def n(self) -> int:
        return len(self.sigma)


def _mark_rule(marking: MarkingSpec):
    p = marking.p
    if isinstance(p, ConstantMarks):
        if p.q == 0.0:
            return K.MARK_NONE, 0.0, 0.0, _EMPTY, _EMPTY
        return K.MARK_CONST, p.q, 0.0, _EMPTY, _EMPTY
    if isinstance(p, ThresholdMarks):
        return K.MARK_THRESHOLD, 0.0, p.threshold, _EMPTY, _EMPTY
    if isinstance(p, TabulatedMarks):
        return (K.MARK_TABLE, 0.0, 0.0, np.asarray(p.sizes, float),
                np.clip(np.asarray(p.values, float), 0.0, 1.0))
    raise TypeError(f"not a mark function: {p!r}")


def run_batch(mech: BranchingMechanism, marking: MarkingSpec,
              params: RunParams) -> BatchResult:
    """Simulate n excursions from an initial atom of mass ell; see module docs."""
    if params.ell <= 0:
        raise ValueError("initial mass must be positive")
    if marking.alpha1 > 0 and mech.beta == 0.0:
        raise ValueError("skeleton marking with beta = 0 has no continuum stack "
                         "representation; use discrete mode (gw_discrete.scaled_run)")
    if not mech.is_infinite_variation and not params.allow_finite_variation:
        raise ValueError("finite-variation mechanism: continuum path operations "
                         "refuse it (allow_finite_variation enables test mode)")

    eps = params.jump_cutoff if params.jump_cutoff is not None else \
        pathgen.default_cutoff(mech.levy, mech.beta)
    mass, mean_tail, var_below = pathgen.tail_moments(mech.levy, eps)
    drift = -(mech.alpha + mean_tail)
    var_rate = 2.0 * mech.beta
    if params.small_jump_policy == "gaussian_match":
        var_rate += var_below

    jump_kind, jump_rate, atab, ptab = pathgen.jump_tables(mech.levy, eps)
    if jump_kind == 1:
        atom_sizes, atom_cum = atab
        atom_markp = np.array([_mark_at(marking.p, float(l)) for l in atom_sizes])
        seg_cum = seg_lo = seg_hi = seg_e = _EMPTY
        mark_kind, mark_q, mark_thresh, mt_s, mt_v = K.MARK_NONE, 0.0, 0.0, _EMPTY, _EMPTY
    elif jump_kind == 2:
        seg_cum, seg_lo, seg_hi, seg_e = ptab
        atom_sizes = atom_cum = atom_markp = _EMPTY
        mark_kind, mark_q, mark_thresh, mt_s, mt_v = _mark_rule(marking)
    else:
        atom_sizes = atom_cum = atom_markp = _EMPTY
        seg_cum = seg_lo = seg_hi = seg_e = _EMPTY
        mark_kind, mark_q, mark_thresh, mt_s, mt_v = K.MARK_NONE, 0.0, 0.0, _EMPTY, _EMPTY

    init_mark_prob = _mark_at(marking.p, params.ell) if params.mark_initial_atom else 0.0

    n = params.n_paths
    pt = np.asarray(sorted(params.pruned_times), float)
    dtt = np.asarray(sorted(params.direct_times), float)
    out_sigma = np.empty(n)
    out_A = np.empty(n)
    out_cens = np.empty(n, np.int64)
    out_ncomp = np.empty(n, np.int64)
    out_pruned = np.empty((n, len(pt)))
    out_direct = np.empty((n, len(dtt)))

    k0, k1 = split_key(params.seed)
    K._simulate_paths(
        np.uint64(k0), np.uint64(k1), params.lane_offset, n,
        drift, var_rate, mech.beta, marking.alpha1,
        params.dt, params.horizon, params.ell,
        jump_kind, jump_rate,
        np.asarray(atom_sizes, float), np.asarray(atom_cum, float),
        np.asarray(atom_markp, float),
        np.asarray(seg_cum, float), np.asarray(seg_lo, float),
        np.asarray(seg_hi, float), np.asarray(seg_e, float),
        mark_kind, mark_q, mark_thresh, mt_s, mt_v,
        1 if params.excise else 0, init_mark_prob, params.component_delta,
        pt, dtt,
        out_sigma, out_A, out_cens, out_ncomp, out_pruned, out_direct,
    )
    if params.excise:
        out_sigma = np.full(n, np.nan)  # not observable once excursions are cut out
    return BatchResult(sigma=out_sigma, A_sigma=out_A,
                       censored=out_cens.astype(bool), n_components=out_ncomp,
                       pruned_mass=out_pruned, direct_mass=out_direct,
                       cutoff=eps, small_jump_bias=var_below, params=params)
