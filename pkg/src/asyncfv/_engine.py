"""Numba kernels for the asynchronous event loop.

All simulation state lives in flat arrays owned by the Python driver
(schemes.run); the kernel executes a bounded number of events per call so
the driver can log progress and enforce the event cap between chunks.

Variant codes: 0 = BAS, 1 = BAST, 2 = BAS-casc.

Status codes returned by run_chunk:
    0 finished (queue empty)   1 budget exhausted, call again
    2 reaction rate non-finite 3 event cap exceeded
    4 cascade stack overflow
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .event_queue import heap_pop, heap_push, heap_remove, heap_update

BAS, BAST, CASC = 0, 1, 2

FINISHED, BUDGET, REACTION_ERR, RUNAWAY, STACK_OVERFLOW = 0, 1, 2, 3, 4

# istate layout
I_SIZE, I_TOTAL, I_TRACE, I_ERRCELL, I_TIME_VIOL = 0, 1, 2, 3, 4
# fstate layout
F_DTSUM, F_SYS, F_SKEW, F_ERRC = 0, 1, 2, 3


@njit(cache=True, inline="always")
def _comp_add(m, mcomp, j, x):
    # Neumaier compensated add: keeps per-cell mass accurate independent
    # of the event count, so long runs stay conservative to ~J*eps.
    t = m[j] + x
    if abs(m[j]) >= abs(x):
        mcomp[j] += (m[j] - t) + x
    else:
        mcomp[j] += (x - t) + m[j]
    m[j] = t


@njit(cache=True, inline="always")
def _flux_of(k, m, invV, lo, hi, gdif, vn):
    c_lo = m[lo[k]] * invV[lo[k]]
    c_hi = m[hi[k]] * invV[hi[k]]
    v = vn[k]
    c_up = c_lo if v >= 0.0 else c_hi
    return gdif[k] * (c_hi - c_lo) - c_up * v


@njit(cache=True, inline="always")
def _key_of(k, tf, flux, area, mp, delta_m, T, floor, variant):
    denom = abs(flux[k]) * area[k]
    if denom <= floor:
        return T
    numer = delta_m
    if variant == BAST:
        numer = delta_m - abs(mp[k])
        if numer < 0.0:
            numer = 0.0
    t = tf[k] + numer / denom
    if t > T:
        t = T
    return t


@njit(cache=True)
def _fire(k, ev_t, triggered,
          lo, hi, area, V, invV,
          m, mcomp, tf, flux, mp, tacc, nk, s, cellt, lastsign, reversal,
          istate, fstate, tr_face, tr_t, tr_dm, tr_trig,
          delta_m, T, floor, variant, use_reaction, rfun):
    """Execute one event on face k at time ev_t. Returns a status code."""
    denom = abs(flux[k]) * area[k]
    if triggered:
        interior = ev_t < T
    elif denom <= floor:
        interior = False
    else:
        numer = delta_m
        if variant == BAST:
            numer = delta_m - abs(mp[k])
            if numer < 0.0:
                numer = 0.0
        interior = tf[k] + numer / denom <= T
    dm = delta_m if interior else denom * (T - tf[k])

    fl = flux[k]
    sgn = 1.0 if fl > 0.0 else (-1.0 if fl < 0.0 else 0.0)
    loj = lo[k]
    hij = hi[k]

    dt1 = 0.0
    dt2 = 0.0
    if use_reaction:
        dt1 = ev_t - cellt[loj]
        dt2 = ev_t - cellt[hij]
        if dt1 > 0.0:
            c = m[loj] * invV[loj]
            r = rfun(c)
            if not np.isfinite(r):
                istate[I_ERRCELL] = loj
                fstate[F_ERRC] = c
                return REACTION_ERR
            _comp_add(m, mcomp, loj, V[loj] * 0.5 * dt1 * r)
        if dt2 > 0.0:
            c = m[hij] * invV[hij]
            r = rfun(c)
            if not np.isfinite(r):
                istate[I_ERRCELL] = hij
                fstate[F_ERRC] = c
                return REACTION_ERR
            _comp_add(m, mcomp, hij, V[hij] * 0.5 * dt2 * r)

    if sgn != 0.0 and dm > 0.0:
        _comp_add(m, mcomp, loj, sgn * dm)
        _comp_add(m, mcomp, hij, -sgn * dm)
        si = 1 if sgn > 0.0 else -1
        if lastsign[k] != 0 and si != lastsign[k]:
            reversal[k] = True
        lastsign[k] = si

    if use_reaction:
        if dt1 > 0.0:
            c = m[loj] * invV[loj]
            r = rfun(c)
            if not np.isfinite(r):
                istate[I_ERRCELL] = loj
                fstate[F_ERRC] = c
                return REACTION_ERR
            _comp_add(m, mcomp, loj, V[loj] * 0.5 * dt1 * r)
        if dt2 > 0.0:
            c = m[hij] * invV[hij]
            r = rfun(c)
            if not np.isfinite(r):
                istate[I_ERRCELL] = hij
                fstate[F_ERRC] = c
                return REACTION_ERR
            _comp_add(m, mcomp, hij, V[hij] * 0.5 * dt2 * r)
        if cellt[loj] < ev_t:
            cellt[loj] = ev_t
        if cellt[hij] < ev_t:
            cellt[hij] = ev_t

    s[k] += sgn * (dm / delta_m)
    nk[k] += 1
    fstate[F_DTSUM] += ev_t - tf[k]
    if ev_t < fstate[F_SYS]:
        lag = fstate[F_SYS] - ev_t
        if lag > fstate[F_SKEW]:
            fstate[F_SKEW] = lag
    else:
        fstate[F_SYS] = ev_t

    cur = istate[I_TRACE]
    if cur < tr_face.size:
        tr_face[cur] = k
        tr_t[cur] = ev_t
        tr_dm[cur] = dm
        tr_trig[cur] = 1 if triggered else 0
    istate[I_TRACE] = cur + 1

    tf[k] = ev_t
    if variant != BAS:
        mp[k] = 0.0
        tacc[k] = ev_t
    return 0


@njit(cache=True)
def _accrue_and_rekey(k, ev_t, stack, sp, size,
                      lo, hi, area, gdif, vn, aptr, aidx, invV,
                      m, tf, that, flux, mp, tacc,
                      heap, pos, istate,
                      delta_m, T, floor, thr, variant):
    """Associated-face update after an event on face k.

    BAST: accrue mass-passed with the pre-event fluxes and advance the
    associated faces' clocks. Casc: accrue against a shadow clock (so
    overlapping windows are not double counted) without touching the BAS
    clocks, and push threshold crossings onto the cascade stack.
    Then recompute fluxes and queue keys for the whole associated set.
    Returns the new stack top, or -1 on stack overflow.
    """
    if variant == BAST:
        for idx in range(aptr[k], aptr[k + 1]):
            l = aidx[idx]
            if l == k or pos[l] < 0:
                continue
            w = ev_t - tf[l]
            if w > 0.0:
                mp[l] += w * area[l] * flux[l]
                tf[l] = ev_t
            elif w < 0.0:
                istate[I_TIME_VIOL] += 1
    elif variant == CASC:
        for idx in range(aptr[k], aptr[k + 1]):
            l = aidx[idx]
            if l == k or pos[l] < 0:
                continue
            base = tf[l] if tf[l] > tacc[l] else tacc[l]
            w = ev_t - base
            if w > 0.0:
                mp[l] += w * area[l] * flux[l]
                tacc[l] = ev_t

    for idx in range(aptr[k], aptr[k + 1]):
        l = aidx[idx]
        if l == k or pos[l] < 0:
            continue
        flux[l] = _flux_of(l, m, invV, lo, hi, gdif, vn)
        key = _key_of(l, tf, flux, area, mp, delta_m, T, floor, variant)
        heap_update(heap, pos, that, size, l, key)
        if variant == CASC and tf[l] < ev_t:
            if mp[l] > thr or -mp[l] > thr:
                if sp >= stack.size:
                    return -1
                stack[sp] = l
                sp += 1
    return sp


@njit(cache=True, nogil=True)
def run_chunk(lo, hi, area, gdif, vn, aptr, aidx, V, invV,
              m, mcomp, tf, that, flux, mp, tacc, nk, s, cellt, lastsign, reversal,
              heap, pos, stack, istate, fstate,
              tr_face, tr_t, tr_dm, tr_trig,
              delta_m, T, floor, thr, variant, use_reaction, rfun,
              budget, max_events):
    size = istate[I_SIZE]
    total = istate[I_TOTAL]
    processed = 0
    while processed < budget:
        if size == 0:
            istate[I_SIZE] = size
            istate[I_TOTAL] = total
            return FINISHED
        if total >= max_events:
            istate[I_SIZE] = size
            istate[I_TOTAL] = total
            return RUNAWAY

        k = heap_pop(heap, pos, that, size)
        size -= 1
        ev_t = that[k]
        st = _fire(k, ev_t, False, lo, hi, area, V, invV,
                   m, mcomp, tf, flux, mp, tacc, nk, s, cellt, lastsign, reversal,
                   istate, fstate, tr_face, tr_t, tr_dm, tr_trig,
                   delta_m, T, floor, variant, use_reaction, rfun)
        if st != 0:
            istate[I_SIZE] = size
            istate[I_TOTAL] = total
            return st
        total += 1
        processed += 1

        sp = _accrue_and_rekey(k, ev_t, stack, 0, size,
                               lo, hi, area, gdif, vn, aptr, aidx, invV,
                               m, tf, that, flux, mp, tacc,
                               heap, pos, istate,
                               delta_m, T, floor, thr, variant)
        if sp < 0:
            istate[I_SIZE] = size
            istate[I_TOTAL] = total
            return STACK_OVERFLOW
        flux[k] = _flux_of(k, m, invV, lo, hi, gdif, vn)
        if tf[k] < T:
            key = _key_of(k, tf, flux, area, mp, delta_m, T, floor, variant)
            heap_push(heap, pos, that, size, k, key)
            size += 1

        # cascade: triggered events all occur at the moment ev_t
        while sp > 0:
            if total >= max_events:
                istate[I_SIZE] = size
                istate[I_TOTAL] = total
                return RUNAWAY
            sp -= 1
            c = stack[sp]
            if pos[c] < 0 or tf[c] >= ev_t:
                continue
            if not (mp[c] > thr or -mp[c] > thr):
                continue
            st = _fire(c, ev_t, True, lo, hi, area, V, invV,
                       m, mcomp, tf, flux, mp, tacc, nk, s, cellt, lastsign, reversal,
                       istate, fstate, tr_face, tr_t, tr_dm, tr_trig,
                       delta_m, T, floor, variant, use_reaction, rfun)
            if st != 0:
                istate[I_SIZE] = size
                istate[I_TOTAL] = total
                return st
            total += 1
            processed += 1
            sp = _accrue_and_rekey(c, ev_t, stack, sp, size,
                                   lo, hi, area, gdif, vn, aptr, aidx, invV,
                                   m, tf, that, flux, mp, tacc,
                                   heap, pos, istate,
                                   delta_m, T, floor, thr, variant)
            if sp < 0:
                istate[I_SIZE] = size
                istate[I_TOTAL] = total
                return STACK_OVERFLOW
            flux[c] = _flux_of(c, m, invV, lo, hi, gdif, vn)
            if tf[c] >= T:
                heap_remove(heap, pos, that, size, c)
                size -= 1
            else:
                key = _key_of(c, tf, flux, area, mp, delta_m, T, floor, variant)
                heap_update(heap, pos, that, size, c, key)

    istate[I_SIZE] = size
    istate[I_TOTAL] = total
    return BUDGET


@njit(cache=True)
def zero_rate(c):
    return 0.0
