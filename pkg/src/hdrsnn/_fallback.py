"""Pure-Python/numpy versions of the compiled kernels.

Arithmetic is ordered exactly as in ``_kernels.pyx`` so both backends produce
bit-identical results.
"""

from __future__ import annotations

import math

import numpy as np


def _cross_first(ua, d, L, ref, j_lo, j_hi, up):
    """First j in [j_lo, j_hi) where the interpolated value crosses ref by at least one step."""
    def hit(j):
        v = ua + d * float(j) / L
        return v - ref >= 1.0 if up else ref - v >= 1.0

    if up:
        est = int(np.floor((ref + 1.0 - ua) * L / d))
    else:
        est = int(np.floor((ua - ref + 1.0) * L / -d))
    j = min(max(j_lo, est - 2), j_hi)
    while j > j_lo and hit(j - 1):
        j -= 1
    while j < j_hi and not hit(j):
        j += 1
    return j


def adm_points(u, interp, n_block):
    u = np.ascontiguousarray(u, dtype=np.float64)
    n = u.shape[0]
    L = float(interp)
    ref = float(u[0])
    next_allowed = 0
    out_g, out_d = [], []
    for i in range(n - 1):
        ua = float(u[i])
        d = float(u[i + 1]) - ua
        base = i * interp
        j = max(0, next_allowed - base)
        while j < interp:
            v = ua + d * float(j) / L
            if v - ref >= 1.0:
                ref += 1.0
                out_g.append(base + j)
                out_d.append(1)
                next_allowed = base + j + n_block
                j = next_allowed - base
                continue
            if ref - v >= 1.0:
                ref -= 1.0
                out_g.append(base + j)
                out_d.append(-1)
                next_allowed = base + j + n_block
                j = next_allowed - base
                continue
            # monotone segment: only one direction can newly fire
            if d == 0.0:
                break
            j = _cross_first(ua, d, L, ref, j + 1, interp, up=d > 0)
    g = (n - 1) * interp
    if g >= next_allowed:
        v = float(u[n - 1])
        if v - ref >= 1.0:
            out_g.append(g)
            out_d.append(1)
        elif ref - v >= 1.0:
            out_g.append(g)
            out_d.append(-1)
    return np.asarray(out_g, dtype=np.int64), np.asarray(out_d, dtype=np.int8)


def simulate(ext_counts, w_ext, w_rec, syn_decay, syn_scale, mem_decay, mem_gain,
             i_thr, i_reset, i_const, tau_mem, refr, dt, ahp_decay, ahp_inc, probes,
             learn, plastic_class, src0, n_src_pl, dst0, n_dst_pl,
             trace_decay, trace_inc_pre, trace_inc_post, alpha, w_max, teacher):
    n_steps, n_src = ext_counts.shape
    n_neu = w_rec.shape[1]
    raster = np.zeros((n_steps, n_neu), dtype=np.uint8)
    pmem = np.zeros((n_steps, len(probes)), dtype=np.float64)
    pahp = np.zeros((n_steps, len(probes)), dtype=np.float64)

    isyn = np.zeros((4, n_neu))
    imem = np.zeros(n_neu)
    iahp = np.zeros(n_neu)
    ref_left = np.zeros(n_neu)
    xtr = np.zeros(n_src_pl)
    ytr = np.zeros(n_dst_pl)
    sd = np.asarray(syn_decay)[:, None]
    ss = np.asarray(syn_scale)[:, None]
    tau_mem = np.asarray(tau_mem, dtype=np.float64)
    refr = np.asarray(refr, dtype=np.float64)
    teacher = np.asarray(teacher, dtype=np.float64)
    pl_rows = slice(src0, src0 + n_src_pl)
    pl_cols = slice(dst0, dst0 + n_dst_pl)

    for k in range(n_steps):
        drive = np.zeros((4, n_neu))
        if k > 0:
            prev = ext_counts[k - 1]
            for s in np.flatnonzero(prev):
                drive += float(prev[s]) * w_ext[:, s, :]
            for s in np.flatnonzero(raster[k - 1]):
                drive += w_rec[:, s, :]
        isyn = isyn * sd + ss * drive

        i_in = isyn[0] + isyn[1] - isyn[2] - isyn[3] + i_const - iahp
        np.maximum(i_in, 0.0, out=i_in)
        iahp = iahp * ahp_decay
        holding = ref_left > 0.0
        full = holding & (ref_left >= dt)
        partial = holding & ~full
        h = np.where(partial, dt - ref_left, dt)
        decay = mem_decay.copy()
        for j in np.flatnonzero(partial):  # libm exp, as in the compiled kernel
            decay[j] = math.exp(-h[j] / tau_mem[j])
        start = np.where(holding, i_reset, imem)
        target = mem_gain * i_in
        v = target + (start - target) * decay
        fired = ~full & (v >= i_thr)
        ref_left = np.where(full, ref_left - dt, np.where(partial, 0.0, ref_left))
        if fired.any():
            for j in np.flatnonzero(fired):
                ts = 0.0
                if start[j] < i_thr[j]:
                    ts = tau_mem[j] * math.log((target[j] - start[j]) / (target[j] - i_thr[j]))
                rem = max(h[j] - ts, 0.0)
                ref_left[j] = max(refr[j] - rem, 0.0)
        imem = np.where(full | fired, i_reset, v)
        iahp = np.where(fired, iahp + ahp_inc, iahp)
        raster[k] = fired

        pmem[k] = imem[probes]
        pahp[k] = iahp[probes]

        if learn:
            xtr = xtr * trace_decay + trace_inc_pre * ext_counts[k, pl_rows].astype(np.float64)
            ytr = ytr * trace_decay + trace_inc_post * raster[k, pl_cols].astype(np.float64)
            active = xtr != 0.0
            if active.any():
                block = w_ext[plastic_class, pl_rows, pl_cols]
                upd = block[active] + alpha * (teacher - ytr)[None, :] * xtr[active][:, None]
                block[active] = np.clip(upd, 0.0, w_max)
                w_ext[plastic_class, pl_rows, pl_cols] = block

    return raster, pmem, pahp
