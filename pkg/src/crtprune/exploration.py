"""The marked exploration process as a LIFO stack.

The stack codes the measure rho_t: continuous mass layers (beta * dr on the
height axis, so stack mass = beta * height) interleaved with atoms left by
jumps, each atom remembering its node-mark flag.  Skeleton marks live at
mass offsets inside continuous segments; a mark is discarded permanently
when its layer is popped.  A_t accumulates the time with no mark anywhere
on the stack, and C is its right-continuous inverse.

This is the reference semantics driven by net grid moves of a PathSample;
the batch kernels in engine.py implement the same law through the collapsed
level representation (see docs/methods.md) and are cross-checked against
this module in the tests.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .mechanism import BranchingMechanism, MarkingSpec, _mark_at
from .pathgen import PathSample, SimGrid, sample_path
from . import rng as _rng

__all__ = ["AtomSegment", "ContinuousSegment", "ExplorationState",
           "MarkedExcursionReport", "run_excursion", "accumulate_A",
           "inverse_time_change", "pruned_component_ledger"]


@dataclass
class AtomSegment:
    """Remaining service of one jump; the mark flag never changes."""
    mass: float
    node_marked: bool


@dataclass
class ContinuousSegment:
    """Diffusive ladder mass with skeleton-mark offsets in (0, mass]."""
    mass: float
    mark_offsets: List[float] = field(default_factory=list)  # ascending


class ExplorationState:
    """Marked LIFO stack at one time instant.

    Caches total mass and the number of marked segments; both are also
    recomputable from the stack, which the tests exploit.
    """

    def __init__(self, beta: float, alpha1: float,
                 rng: Optional[np.random.Generator] = None):
        if alpha1 > 0 and beta <= 0:
            raise ValueError("skeleton marks need beta > 0 (mass = beta * height); "
                             "use discrete mode for beta = 0")
        self.beta = beta
        self.alpha1 = alpha1
        self.rng = rng
        self.stack: List[object] = []
        self.total_mass = 0.0
        self.marked_count = 0
        self.t = 0.0
        self.infimum = 0.0
        self._x = 0.0
        self.discarded_marks: List[float] = []  # audit trail: popped mark levels

    # -- queries ------------------------------------------------------------

    @property
    def is_marked(self) -> bool:
        return self.marked_count > 0

    def height(self) -> float:
        if self.beta <= 0:
            raise ValueError("height is not a stack functional when beta = 0")
        return sum(s.mass for s in self.stack if isinstance(s, ContinuousSegment)) / self.beta

    def recompute_caches(self):
        self.total_mass = sum(s.mass for s in self.stack)
        self.marked_count = sum(
            1 for s in self.stack
            if (isinstance(s, AtomSegment) and s.node_marked)
            or (isinstance(s, ContinuousSegment) and s.mark_offsets))

    # -- transitions ---------------------------------------------------------

    def push_atom(self, mass: float, node_marked: bool):
        if mass <= 0:
            raise ValueError("atom mass must be positive")
        self.stack.append(AtomSegment(mass, node_marked))
        self.total_mass += mass
        if node_marked:
            self.marked_count += 1
        self._x += mass

    def grow(self, delta: float, mark_offsets: Optional[Sequence[float]] = None):
        """Upward diffusive move: extend the top continuous segment by delta.

        New skeleton marks fall Poisson(alpha1 * delta / beta) in the fresh
        layer unless explicit offsets (relative to the layer base) are given.
        """
        if delta <= 0:
            return
        if not self.stack or isinstance(self.stack[-1], AtomSegment):
            self.stack.append(ContinuousSegment(0.0))
        top = self.stack[-1]
        base = top.mass
        was_marked = bool(top.mark_offsets)
        if mark_offsets is None and self.alpha1 > 0:
            k = self.rng.poisson(self.alpha1 * delta / self.beta)
            mark_offsets = self.rng.uniform(0.0, delta, size=k) if k else ()
        for off in sorted(mark_offsets or ()):
            top.mark_offsets.append(base + off)
        top.mass += delta
        self.total_mass += delta
        self._x += delta
        if not was_marked and top.mark_offsets:
            self.marked_count += 1

    def pop(self, delta: float) -> float:
        """Downward move: erase mass delta backward from the top (the k_a erasure).

        Marks above the new top are discarded permanently.  Returns the mass
        actually removed (less than delta only if the stack empties, which
        signals the end of the excursion).
        """
        if delta <= 0:
            return 0.0
        removed = 0.0
        while delta > 0 and self.stack:
            top = self.stack[-1]
            if top.mass <= delta + 1e-15 * max(1.0, delta):
                delta -= top.mass
                removed += top.mass
                if isinstance(top, AtomSegment):
                    if top.node_marked:
                        self.marked_count -= 1
                        self.discarded_marks.append(self.t)
                elif top.mark_offsets:
                    self.marked_count -= 1
                    self.discarded_marks.extend(self.t for _ in top.mark_offsets)
                self.stack.pop()
            else:
                top.mass -= delta
                removed += delta
                if isinstance(top, ContinuousSegment) and top.mark_offsets:
                    kept = bisect.bisect_right(top.mark_offsets, top.mass)
                    if kept < len(top.mark_offsets):
                        self.discarded_marks.extend(
                            self.t for _ in top.mark_offsets[kept:])
                        del top.mark_offsets[kept:]
                        if not top.mark_offsets:
                            self.marked_count -= 1
                delta = 0.0
        self.total_mass -= removed
        self._x -= removed
        self.infimum = min(self.infimum, self._x)
        return removed

    def step(self, event) -> "ExplorationState":
        """Apply one event: ('jump', size, marked) | ('move', delta) | ('grow', delta, offsets)."""
        kind = event[0]
        if kind == "jump":
            self.push_atom(event[1], event[2])
        elif kind == "move":
            delta = event[1]
            if delta >= 0:
                self.grow(delta)
            else:
                self.pop(-delta)
        elif kind == "grow":
            self.grow(event[1], event[2])
        else:
            raise ValueError(f"unknown event {event!r}")
        return self


# ---------------------------------------------------------------------------
# excursion runs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MarkedExcursionReport:
    sigma: float
    A_sigma: float
    initial_mass: float
    censored: bool
    pruned_mass: Tuple[float, ...]      # total mass at C_u for requested u
    component_durations: Tuple[float, ...]  # maximal marked intervals
    mark_indicator: Optional[np.ndarray] = None  # per-step 1{m == 0}, for audits


def run_excursion(mech: BranchingMechanism, marking: MarkingSpec, grid: SimGrid,
                  seed: int, initial_mass: float,
                  sample_times: Sequence[float] = (),
                  path_index: int = 0,
                  mark_initial_atom: bool = False,
                  allow_finite_variation: bool = False,
                  keep_indicator: bool = False) -> MarkedExcursionReport:
    """Reference excursion run: stack driven by a fresh PathSample.

    The stack starts as one atom of mass `initial_mass` (unmarked unless the
    flag turns on Bernoulli(p(mass)) marking) and is driven by net grid moves
    until the total mass hits 0; that first-passage time is sigma.
    """
    if initial_mass <= 0:
        raise ValueError("initial mass must be positive")
    if marking.alpha1 > 0 and mech.beta <= 0:
        raise ValueError("skeleton marking needs beta > 0; use discrete mode")
    path = sample_path(mech, marking, grid, seed, path_index,
                       allow_finite_variation=allow_finite_variation)

    gen = np.random.Generator(np.random.Philox(key=seed ^ 0x6D61726B, counter=path_index))
    state = ExplorationState(beta=mech.beta, alpha1=marking.alpha1, rng=gen)
    init_marked = False
    if mark_initial_atom:
        u = _rng.uniforms(seed, path_index, _rng.PURPOSE_INIT, 1)[0]
        init_marked = u <= _mark_at(marking.p, initial_mass)
    state.push_atom(initial_mass, init_marked)

    dt = grid.dt
    times = path.times
    values = path.values
    jumps = list(path.jumps)
    ji = 0
    sample_times = sorted(sample_times)
    si = 0
    pruned = [math.nan] * len(sample_times)
    A = 0.0
    indicator = []
    sigma = math.nan
    censored = True
    comp_durations = []
    comp_start = None

    def note_indicator(unmarked, t_lo, t_hi):
        nonlocal comp_start
        if not unmarked and comp_start is None:
            comp_start = t_lo
        elif unmarked and comp_start is not None:
            comp_durations.append(t_hi - comp_start)
            comp_start = None

    for k in range(1, len(times)):
        t_lo, t_hi = times[k - 1], times[k]
        unmarked_at_start = not state.is_marked
        indicator.append(0 if state.is_marked else 1)
        note_indicator(unmarked_at_start, t_lo, t_lo)

        # decompose the step: diffusive net move split around exact jump times
        step_jumps = []
        while ji < len(jumps) and jumps[ji].time <= t_hi:
            step_jumps.append(jumps[ji])
            ji += 1
        diffusive = values[k] - values[k - 1] - sum(j.size for j in step_jumps)
        pieces = []
        t_prev = t_lo
        d_rem = diffusive
        for j in step_jumps:
            w = (j.time - t_prev) / (t_hi - t_prev) if t_hi > t_prev else 0.0
            pieces.append(("move", d_rem * w))
            d_rem -= d_rem * w
            pieces.append(("jump", j.size, j.node_marked))
            t_prev = j.time
        pieces.append(("move", d_rem))

        absorbed_frac = None
        pos = 0.0
        for piece in pieces:
            if piece[0] == "jump":
                state.push_atom(piece[1], piece[2])
            else:
                delta = piece[1]
                if delta >= 0:
                    state.grow(delta)
                    pos += delta
                else:
                    before = state.total_mass
                    removed = state.pop(-delta)
                    pos += delta
                    if removed < -delta - 1e-12:
                        # stack emptied inside this step: absorption
                        absorbed_frac = (before) / (-delta) if delta != 0 else 0.0
                        break
        if absorbed_frac is not None:
            frac = min(max(absorbed_frac, 0.0), 1.0)
            sigma = t_lo + frac * dt
            if unmarked_at_start:
                A += frac * dt
            censored = False
            break

        if unmarked_at_start:
            A += dt
        state.t = t_hi
        while si < len(sample_times) and A > sample_times[si]:
            pruned[si] = state.total_mass
            si += 1

    if censored:
        sigma = float(times[-1])
    else:
        while si < len(sample_times):
            pruned[si] = 0.0
            si += 1
        if comp_start is not None:
            comp_durations.append(sigma - comp_start)
    return MarkedExcursionReport(
        sigma=float(sigma), A_sigma=float(A), initial_mass=initial_mass,
        censored=censored, pruned_mass=tuple(pruned),
        component_durations=tuple(comp_durations),
        mark_indicator=np.asarray(indicator) if keep_indicator else None)


# ---------------------------------------------------------------------------
# time change
# ---------------------------------------------------------------------------

def accumulate_A(indicator: np.ndarray, dt: float) -> np.ndarray:
    """A on the grid from the per-step indicator 1{m == 0} (left-endpoint rule).

    A[0] = 0 and A[k] = dt * sum of the first k indicator values; A is
    nondecreasing and 1-Lipschitz by construction.
    """
    ind = np.asarray(indicator, dtype=float)
    return np.concatenate(([0.0], np.cumsum(ind))) * dt


def inverse_time_change(A: np.ndarray, dt: float, u: float) -> float:
    """C(u) = inf{r : A_r > u} on the grid; right-continuous, ties to later times."""
    k = int(np.searchsorted(A, u, side="right"))
    if k >= len(A):
        return math.inf
    return k * dt


def pruned_component_ledger(indicator: np.ndarray, dt: float,
                            size_threshold: float = 0.0) -> Tuple[float, ...]:
    """Durations (> threshold) of the maximal intervals where marks are present."""
    ind = np.asarray(indicator, dtype=bool)  # True = unmarked
    out = []
    run = 0
    for v in ind:
        if not v:
            run += 1
        elif run:
            out.append(run * dt)
            run = 0
    if run:
        out.append(run * dt)
    return tuple(d for d in out if d > size_threshold)
