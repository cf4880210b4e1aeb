"""Numba kernels: the batch marked-excursion engine.

One excursion under the initial condition "atom of mass ell at the root"
is driven by the spectrally positive path X (X_0 = 0, absorption at -ell).
The marked LIFO-stack state collapses, for the observables computed here,
to the level representation justified in docs/methods.md:

  * total stack mass     = ell + X_t,
  * a skeleton mark born while the segment grew through level y dies at the
    first time X < y, and a marked jump based at level b dies at the first
    time X < b,
  * fresh marks created while some mark is alive sit at strictly higher
    levels and die no later than it,

so the mark indicator is carried by the single scalar L* = lowest alive
mark level, and the time spent mark-free is A_t.

Stepping is exact in law for the Gaussian part at any block size (Brownian
bridge endpoints + minimum), so the engine takes large blocks far from the
active barrier and refines to the dt grid near it by dyadic bridge
bisection.  Fine dt steps are forced whenever the state is unmarked and
skeleton marks are possible, because mark births happen on every growth
layer.  In excision mode marked periods are cut out entirely (the state
resumes at the mark level, which is the exact continuum resumption point),
which simulates the pruned process on its own clock; sigma is then not
observable but A_sigma carries no horizon censoring bias.

All randomness is Philox4x32-10 counter mode, addressed per path; see rng.py.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np

from . import rng as _rng

U64 = np.uint64
_M0 = U64(_rng.PHILOX_M0)
_M1 = U64(_rng.PHILOX_M1)
_W0 = U64(_rng.PHILOX_W0)
_W1 = U64(_rng.PHILOX_W1)
_MASK32 = U64(0xFFFFFFFF)
_SH32 = U64(32)
_SH11 = U64(11)
_ONE = U64(1)
_INV53 = 2.0 ** -53
_INV32 = 2.0 ** -32

PURPOSE_PATH = U64(_rng.PURPOSE_PATH)
PURPOSE_MARKS = U64(_rng.PURPOSE_MARKS)
PURPOSE_JUMPS = U64(_rng.PURPOSE_JUMPS)

# jump-size samplers
JUMPS_NONE = 0
JUMPS_ATOMS = 1
JUMPS_PWLAW = 2   # piecewise power law, exact inverse cdf per segment

# node-mark rules for power-law jumps (atom jumps carry per-atom probabilities)
MARK_NONE = 0
MARK_CONST = 2
MARK_THRESHOLD = 3
MARK_TABLE = 4

_Z_MARGIN = 6.0      # block sizing keeps barrier crossings below exp(-2*6^2)
_EXP_SKIP = 42.0     # skip the crossing-probability draw beyond exp(-42)
_H_CAP = 4.0         # largest block, in time units

INF = math.inf


@nb.njit(nb.types.UniTuple(nb.uint64, 4)(nb.uint64, nb.uint64, nb.uint64,
                                         nb.uint64, nb.uint64, nb.uint64),
         cache=True, inline="always")
def _philox(k0, k1, c0, c1, c2, c3):
    x0, x1, x2, x3 = c0, c1, c2, c3
    kk0, kk1 = k0, k1
    for _ in range(10):
        p0 = (x0 & _MASK32) * _M0
        p1 = (x2 & _MASK32) * _M1
        hi0 = p0 >> _SH32
        lo0 = p0 & _MASK32
        hi1 = p1 >> _SH32
        lo1 = p1 & _MASK32
        x0 = (hi1 ^ (x1 & _MASK32) ^ (kk0 & _MASK32)) & _MASK32
        x1 = lo1
        x2 = (hi0 ^ (x3 & _MASK32) ^ (kk1 & _MASK32)) & _MASK32
        x3 = lo0
        kk0 = (kk0 + _W0) & _MASK32
        kk1 = (kk1 + _W1) & _MASK32
    return x0, x1, x2, x3


@nb.njit(cache=True, inline="always")
def _block_step(k0, k1, lane, serial, purpose):
    """One block -> (u53, u32a, u32b): radius uniform, angle word, bridge word."""
    w0, w1, w2, w3 = _philox(k0, k1, lane, serial, U64(0), purpose)
    a = ((w0 << _SH32) | w1)
    u53 = float((a >> _SH11) + _ONE) * _INV53          # in (0, 1]
    ua = (float(w2) + 0.5) * _INV32                    # in (0, 1)
    ub = (float(w3) + 0.5) * _INV32                    # in (0, 1)
    return u53, ua, ub


@nb.njit(cache=True, inline="always")
def _block_pair53(k0, k1, lane, serial, slot, purpose):
    w0, w1, w2, w3 = _philox(k0, k1, lane, serial, slot, purpose)
    a = ((w0 << _SH32) | w1)
    b = ((w2 << _SH32) | w3)
    return float((a >> _SH11) + _ONE) * _INV53, float((b >> _SH11) + _ONE) * _INV53


@nb.njit(cache=True, inline="always")
def _poisson_inv(u, mu):
    """Poisson sample by cdf inversion; mu is small in every use here."""
    p = math.exp(-mu)
    cdf = p
    k = 0
    while u > cdf and k < 200:
        k += 1
        p *= mu / k
        cdf += p
    return k


@nb.njit(cache=True, inline="always")
def _bridge_min(x0, x1, varh, u):
    """Minimum of a Brownian bridge from x0 to x1 with endpoint variance varh."""
    d = x0 - x1
    return 0.5 * (x0 + x1 - math.sqrt(d * d - 2.0 * varh * math.log(u)))


@nb.njit(cache=True, inline="always")
def _cross_prob(x0, x1, varh, b):
    """P(bridge min <= b | endpoints), for x0, x1 > b."""
    e = 2.0 * (x0 - b) * (x1 - b) / varh
    if e > _EXP_SKIP:
        return 0.0
    return math.exp(-e)


@nb.njit(cache=True, inline="always")
def _pwlaw_sample(u, seg_cum, seg_lo, seg_hi, seg_e):
    """Exact inverse-cdf sample from a piecewise power law (e = s + 1 per segment)."""
    j = 0
    for i in range(seg_cum.shape[0]):
        j = i
        if u <= seg_cum[i]:
            break
    ulo = seg_cum[j - 1] if j > 0 else 0.0
    w = (u - ulo) / (seg_cum[j] - ulo)
    lo = seg_lo[j]
    hi = seg_hi[j]
    e = seg_e[j]
    if -1e-12 < e < 1e-12:
        return lo * (hi / lo) ** w
    return (lo ** e + w * (hi ** e - lo ** e)) ** (1.0 / e)


@nb.njit(cache=True, inline="always")
def _mark_prob(sz, mark_kind, mark_q, mark_thresh, mtab_sizes, mtab_values):
    if mark_kind == MARK_CONST:
        return mark_q
    if mark_kind == MARK_THRESHOLD:
        return 1.0 if sz >= mark_thresh else 0.0
    if mark_kind == MARK_TABLE:
        n = mtab_sizes.shape[0]
        if sz <= mtab_sizes[0]:
            return mtab_values[0]
        if sz >= mtab_sizes[n - 1]:
            return mtab_values[n - 1]
        for i in range(1, n):
            if sz <= mtab_sizes[i]:
                w = (sz - mtab_sizes[i - 1]) / (mtab_sizes[i] - mtab_sizes[i - 1])
                return mtab_values[i - 1] + w * (mtab_values[i] - mtab_values[i - 1])
    return 0.0


@nb.njit(cache=True)
def _simulate_paths(
    # addressing
    k0, k1, lane0, n_paths,
    # mechanism / grid scalars
    drift, var_rate, beta, alpha1, dt, t_cap, ell,
    # jumps
    jump_kind, jump_rate, atom_sizes, atom_cum, atom_markp,
    seg_cum, seg_lo, seg_hi, seg_e,
    mark_kind, mark_q, mark_thresh, mtab_sizes, mtab_values,
    # mode
    excise, init_mark_prob, component_delta,
    # sampling grids
    pruned_times, direct_times,
    # outputs
    out_sigma, out_A, out_censored, out_ncomp, out_pruned, out_direct,
):
    n_pt = pruned_times.shape[0]
    n_dt = direct_times.shape[0]
    fine_births = (alpha1 > 0.0) and (beta > 0.0)
    sd_rate = math.sqrt(var_rate) if var_rate > 0.0 else 0.0
    zvar = _Z_MARGIN * _Z_MARGIN * var_rate

    for ip in nb.prange(n_paths):
        lane = U64(lane0 + ip)
        serial = U64(0)
        mserial = U64(0)
        jserial = U64(0)

        t = 0.0
        A = 0.0
        X = 0.0
        lstar = INF
        if init_mark_prob > 0.0:
            ui, _ = _block_pair53(k0, k1, lane, U64(0), U64(2), PURPOSE_MARKS)
            if ui <= init_mark_prob:
                if excise != 0:
                    # the root atom itself is marked: the pruned tree is empty
                    out_sigma[ip] = 0.0
                    out_A[ip] = 0.0
                    out_censored[ip] = 0
                    out_ncomp[ip] = 1
                    for i in range(n_pt):
                        out_pruned[ip, i] = 0.0
                    for i in range(n_dt):
                        out_direct[ip, i] = 0.0
                    continue
                lstar = -ell
        comp_start = 0.0
        ncomp = 0
        pt_i = 0
        dt_i = 0
        absorbed = False
        censored = False
        sigma = 0.0
        A_sigma = 0.0

        # first jump time
        if jump_kind != JUMPS_NONE and jump_rate > 0.0:
            u1, u2 = _block_pair53(k0, k1, lane, jserial, U64(0), PURPOSE_JUMPS)
            jserial += _ONE
            next_jump = -math.log(u1) / jump_rate
            jump_u = u2
        else:
            next_jump = INF
            jump_u = 0.0

        while True:
            if t >= t_cap - 1e-15:
                censored = True
                sigma = t
                A_sigma = A
                break

            marked = lstar < INF
            barrier = lstar if marked else -ell

            # ---- jump due now ----
            if next_jump <= t + 1e-15:
                # size
                if jump_kind == JUMPS_ATOMS:
                    sz = atom_sizes[atom_sizes.shape[0] - 1]
                    pmark = atom_markp[atom_sizes.shape[0] - 1]
                    for j in range(atom_cum.shape[0]):
                        if jump_u <= atom_cum[j]:
                            sz = atom_sizes[j]
                            pmark = atom_markp[j]
                            break
                else:
                    sz = _pwlaw_sample(jump_u, seg_cum, seg_lo, seg_hi, seg_e)
                    pmark = _mark_prob(sz, mark_kind, mark_q, mark_thresh,
                                       mtab_sizes, mtab_values)
                # node-mark draw lives in the marks stream, slot 1, keyed by jump index
                is_marked_jump = False
                if pmark > 0.0:
                    um, _ = _block_pair53(k0, k1, lane, jserial - _ONE, U64(1), PURPOSE_MARKS)
                    is_marked_jump = um <= pmark
                if is_marked_jump:
                    if excise == 0:
                        if not marked:
                            lstar = X  # base level of the marked atom
                            comp_start = t
                        X += sz  # the marked atom still carries stack mass
                    else:
                        ncomp += 1  # component deleted with its whole excursion
                else:
                    X += sz
                # schedule the next jump
                u1, u2 = _block_pair53(k0, k1, lane, jserial, U64(0), PURPOSE_JUMPS)
                jserial += _ONE
                next_jump = t - math.log(u1) / jump_rate
                jump_u = u2
                continue

            marked = lstar < INF
            barrier = lstar if marked else -ell

            # ---- choose the block length ----
            if (not marked) and fine_births:
                h = dt
            elif var_rate <= 0.0:
                h = _H_CAP
            else:
                d = X - barrier
                hr = d * d / zvar
                if hr <= dt:
                    h = dt
                else:
                    h = math.floor(hr / dt) * dt
                    if h > _H_CAP:
                        h = _H_CAP
            if t + h > t_cap:
                h = t_cap - t
            if t + h > next_jump:
                h = next_jump - t
            if n_dt > 0 and dt_i < n_dt:
                gap = direct_times[dt_i] - t
                if gap > dt and t + h > direct_times[dt_i]:
                    h = math.floor(gap / dt) * dt
            if n_pt > 0 and pt_i < n_pt and not marked:
                gap = pruned_times[pt_i] - A
                if gap > dt and A + h > pruned_times[pt_i]:
                    h = math.floor(gap / dt) * dt
            if h < 1e-15:
                h = 1e-15

            # ---- drift-only motion ----
            if var_rate <= 0.0:
                end = X + drift * h
                if end <= barrier and drift < 0.0:
                    hc = (X - barrier) / (-drift)
                    if marked:
                        # mark dies exactly at the barrier; no A while marked
                        dur = (t + hc) - comp_start
                        if dur > component_delta:
                            ncomp += 1
                        lstar = INF
                        X = barrier
                        t += hc
                        continue
                    sigma = t + hc
                    A_sigma = A + hc
                    absorbed = True
                    break
                if not marked:
                    A += h
                X = end
                t += h
                while dt_i < n_dt and t > direct_times[dt_i]:
                    out_direct[ip, dt_i] = ell + X
                    dt_i += 1
                while pt_i < n_pt and A > pruned_times[pt_i]:
                    out_pruned[ip, pt_i] = ell + X
                    pt_i += 1
                continue

            # ---- Gaussian block ----
            u53, ua, ub = _block_step(k0, k1, lane, serial, PURPOSE_PATH)
            serial += _ONE
            z = math.sqrt(-2.0 * math.log(u53)) * math.cos(6.283185307179586 * ua)
            varh = var_rate * h
            end = X + drift * h + sd_rate * math.sqrt(h) * z

            x0 = X
            x1 = end
            hh = h
            have_min = False
            Mleaf = 0.0

            if hh > dt * 1.5:
                # coarse block: resolve whether the first crossing lies inside
                if x1 > barrier:
                    pc = _cross_prob(x0, x1, varh, barrier)
                    if pc <= 0.0 or ub >= pc:
                        # no crossing in the block; commit it whole
                        if not marked:
                            A += h
                        X = end
                        t += h
                        while dt_i < n_dt and t > direct_times[dt_i]:
                            out_direct[ip, dt_i] = ell + X
                            dt_i += 1
                        while pt_i < n_pt and A > pruned_times[pt_i]:
                            out_pruned[ip, pt_i] = ell + X
                            pt_i += 1
                        continue
                # crossing certain inside [t, t+hh]; dyadic refinement to dt
                bserial = U64(0)
                while hh > dt * 1.5:
                    vq = varh * 0.25
                    um1, um2 = _block_pair53(k0, k1, lane, serial, U64(2) + bserial,
                                             PURPOSE_PATH)
                    bserial += _ONE
                    zm = math.sqrt(-2.0 * math.log(um1)) * \
                        math.cos(6.283185307179586 * um2)
                    xm = 0.5 * (x0 + x1) + math.sqrt(vq) * zm
                    # crossing probabilities of the two halves given midpoint
                    if xm <= barrier:
                        pl = 1.0
                    else:
                        pl = _cross_prob(x0, xm, varh * 0.5, barrier)
                    if xm <= barrier or x1 <= barrier:
                        pr = 1.0
                    else:
                        pr = _cross_prob(xm, x1, varh * 0.5, barrier)
                    pe = pl + pr - pl * pr
                    um3, _ = _block_pair53(k0, k1, lane, serial, U64(34) + bserial,
                                           PURPOSE_PATH)
                    if um3 * pe < pl:
                        x1 = xm          # first crossing in the left half
                    else:
                        # left half clean: commit it and descend right
                        if not marked:
                            A += hh * 0.5
                        t += hh * 0.5
                        x0 = xm
                        X = xm
                        while dt_i < n_dt and t > direct_times[dt_i]:
                            out_direct[ip, dt_i] = ell + X
                            dt_i += 1
                        while pt_i < n_pt and A > pruned_times[pt_i]:
                            out_pruned[ip, pt_i] = ell + X
                            pt_i += 1
                    hh *= 0.5
                    varh *= 0.5
                serial += _ONE  # close out the bisection serial space
                # conditioned leaf minimum (crossing known to be inside)
                if x0 > barrier and x1 > barrier:
                    pleaf = _cross_prob(x0, x1, varh, barrier)
                else:
                    pleaf = 1.0
                ul, _ = _block_pair53(k0, k1, lane, serial, U64(1), PURPOSE_PATH)
                serial += _ONE
                Mleaf = _bridge_min(x0, x1, varh, ul * pleaf)
                if Mleaf > barrier:
                    Mleaf = barrier
                have_min = True

            if not have_min:
                Mleaf = _bridge_min(x0, x1, varh, ub)

            # ---- apply the leaf (h <= dt scale) ----
            hleaf = hh
            start_marked = lstar < INF

            if start_marked and Mleaf <= lstar:
                dur = (t + hleaf) - comp_start
                if dur > component_delta:
                    ncomp += 1
                lstar = INF

            if Mleaf <= -ell:
                # absorbed; piecewise-linear time through the mid-leaf minimum
                denom = x0 - Mleaf
                frac = 0.5 * (x0 + ell) / denom if denom > 0.0 else 0.0
                if start_marked:
                    sigma = t + frac * hleaf
                    A_sigma = A
                else:
                    sigma = t + frac * hleaf
                    A_sigma = A + frac * hleaf
                absorbed = True
                break

            x_new = x1
            # skeleton births on the regrown layer (Mleaf, x1]
            if fine_births and lstar == INF:
                growth = x1 - Mleaf
                if growth > 0.0:
                    mu = alpha1 * growth / beta
                    up, upos = _block_pair53(k0, k1, lane, mserial, U64(0), PURPOSE_MARKS)
                    mserial += _ONE
                    kb = _poisson_inv(up, mu)
                    if kb > 0:
                        pos = Mleaf + growth * (1.0 - upos ** (1.0 / kb))
                        if excise != 0:
                            x_new = pos  # resume the pruned process at the mark level
                            ncomp += 1
                        else:
                            lstar = pos
                            comp_start = t + hleaf

            if not start_marked:
                A += hleaf
            X = x_new
            t += hleaf
            while dt_i < n_dt and t > direct_times[dt_i]:
                out_direct[ip, dt_i] = ell + X
                dt_i += 1
            while pt_i < n_pt and A > pruned_times[pt_i]:
                out_pruned[ip, pt_i] = ell + X
                pt_i += 1

        # ---- path done ----
        if absorbed:
            if lstar < INF:
                dur = sigma - comp_start
                if dur > component_delta:
                    ncomp += 1
            while dt_i < n_dt:
                out_direct[ip, dt_i] = 0.0
                dt_i += 1
            while pt_i < n_pt:
                out_pruned[ip, pt_i] = 0.0
                pt_i += 1
        else:
            while dt_i < n_dt:
                out_direct[ip, dt_i] = np.nan
                dt_i += 1
            while pt_i < n_pt:
                out_pruned[ip, pt_i] = np.nan
                pt_i += 1
        out_sigma[ip] = sigma
        out_A[ip] = A_sigma
        out_censored[ip] = 1 if censored else 0
        out_ncomp[ip] = ncomp
