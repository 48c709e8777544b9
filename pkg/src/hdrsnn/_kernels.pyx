# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Semantics mirror ``_fallback`` operation for operation."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, floor, log

cnp.import_array()


cdef inline bint _hit(double ua, double d, double L, double ref, long j, bint up):
    cdef double v = ua + d * <double>j / L
    if up:
        return v - ref >= 1.0
    return ref - v >= 1.0


cdef long _cross_first(double ua, double d, double L, double ref, long j_lo, long j_hi, bint up):
    """First j in [j_lo, j_hi) where the interpolated value crosses ref by at least one step."""
    cdef double est
    if up:
        est = floor((ref + 1.0 - ua) * L / d)
    else:
        est = floor((ua - ref + 1.0) * L / -d)
    cdef long j
    if est - 2 > <double>j_hi:
        j = j_hi
    elif est - 2 < <double>j_lo:
        j = j_lo
    else:
        j = <long>est - 2
    while j > j_lo and _hit(ua, d, L, ref, j - 1, up):
        j -= 1
    while j < j_hi and not _hit(ua, d, L, ref, j, up):
        j += 1
    return j


def adm_points(const double[::1] u, long interp, long n_block):
    """Delta-modulate a threshold-normalised signal on its interpolated grid.

    Returns (grid indices, directions) with direction +1 for UP and -1 for DOWN.
    Between events the next crossing is located directly instead of visiting
    every interpolated point.
    """
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t i
    cdef long j, base, next_allowed = 0
    cdef double ref = u[0], ua, d, v
    cdef double L = <double>interp
    out_g = []
    out_d = []
    for i in range(n - 1):
        ua = u[i]
        d = u[i + 1] - ua
        base = i * interp
        j = next_allowed - base
        if j < 0:
            j = 0
        while j < interp:
            v = ua + d * <double>j / L
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
            if d == 0.0:
                break
            j = _cross_first(ua, d, L, ref, j + 1, interp, d > 0)
    base = (n - 1) * interp
    if base >= next_allowed:
        v = u[n - 1]
        if v - ref >= 1.0:
            out_g.append(base)
            out_d.append(1)
        elif ref - v >= 1.0:
            out_g.append(base)
            out_d.append(-1)
    return np.asarray(out_g, dtype=np.int64), np.asarray(out_d, dtype=np.int8)


def simulate(const int[:, ::1] ext_counts,
             double[:, :, ::1] w_ext,
             const double[:, :, ::1] w_rec,
             const double[::1] syn_decay,
             const double[::1] syn_scale,
             const double[::1] mem_decay,
             const double[::1] mem_gain,
             const double[::1] i_thr,
             const double[::1] i_reset,
             const double[::1] i_const,
             const double[::1] tau_mem,
             const double[::1] refr,
             double dt,
             const double[::1] ahp_decay,
             const double[::1] ahp_inc,
             const int[::1] probes,
             int learn,
             int plastic_class,
             int src0, int n_src_pl,
             int dst0, int n_dst_pl,
             double trace_decay,
             double trace_inc_pre,
             double trace_inc_post,
             double alpha,
             double w_max,
             const double[::1] teacher):
    cdef Py_ssize_t n_steps = ext_counts.shape[0]
    cdef Py_ssize_t n_src = ext_counts.shape[1]
    cdef Py_ssize_t n_neu = w_rec.shape[1]
    cdef Py_ssize_t n_probe = probes.shape[0]
    cdef Py_ssize_t k, s, j, c, p, a, b
    cdef double cnt, i_in, target, w, h, decay, v, ts, rem

    raster_np = np.zeros((n_steps, n_neu), dtype=np.uint8)
    pmem_np = np.zeros((n_steps, n_probe), dtype=np.float64)
    pahp_np = np.zeros((n_steps, n_probe), dtype=np.float64)
    cdef unsigned char[:, ::1] raster = raster_np
    cdef double[:, ::1] pmem = pmem_np
    cdef double[:, ::1] pahp = pahp_np

    isyn_np = np.zeros((4, n_neu), dtype=np.float64)
    drive_np = np.zeros((4, n_neu), dtype=np.float64)
    cdef double[:, ::1] isyn = isyn_np
    cdef double[:, ::1] drive = drive_np
    cdef double[::1] imem = np.zeros(n_neu, dtype=np.float64)
    cdef double[::1] iahp = np.zeros(n_neu, dtype=np.float64)
    cdef double[::1] ref_left = np.zeros(n_neu, dtype=np.float64)
    cdef double[::1] xtr = np.zeros(max(n_src_pl, 1), dtype=np.float64)
    cdef double[::1] ytr = np.zeros(max(n_dst_pl, 1), dtype=np.float64)

    for k in range(n_steps):
        # synapses: deliver external and recurrent spikes emitted at step k-1
        for c in range(4):
            for j in range(n_neu):
                drive[c, j] = 0.0
        if k > 0:
            for s in range(n_src):
                if ext_counts[k - 1, s] != 0:
                    cnt = <double>ext_counts[k - 1, s]
                    for c in range(4):
                        for j in range(n_neu):
                            drive[c, j] += cnt * w_ext[c, s, j]
            for s in range(n_neu):
                if raster[k - 1, s]:
                    for c in range(4):
                        for j in range(n_neu):
                            drive[c, j] += w_rec[c, s, j]
        for c in range(4):
            for j in range(n_neu):
                isyn[c, j] = isyn[c, j] * syn_decay[c] + syn_scale[c] * drive[c, j]

        # neurons; a threshold crossing is timed inside the step so that the
        # refractory period starts at the crossing, not at the step boundary
        for j in range(n_neu):
            i_in = isyn[0, j] + isyn[1, j] - isyn[2, j] - isyn[3, j] + i_const[j] - iahp[j]
            if i_in < 0.0:
                i_in = 0.0
            iahp[j] = iahp[j] * ahp_decay[j]
            h = dt
            decay = mem_decay[j]
            if ref_left[j] > 0.0:
                imem[j] = i_reset[j]
                if ref_left[j] >= dt:
                    ref_left[j] = ref_left[j] - dt
                    continue
                h = dt - ref_left[j]
                ref_left[j] = 0.0
                decay = exp(-h / tau_mem[j])
            target = mem_gain[j] * i_in
            v = target + (imem[j] - target) * decay
            if v >= i_thr[j]:
                ts = 0.0
                if imem[j] < i_thr[j]:
                    ts = tau_mem[j] * log((target - imem[j]) / (target - i_thr[j]))
                rem = h - ts
                if rem < 0.0:
                    rem = 0.0
                ref_left[j] = refr[j] - rem
                if ref_left[j] < 0.0:
                    ref_left[j] = 0.0
                imem[j] = i_reset[j]
                iahp[j] = iahp[j] + ahp_inc[j]
                raster[k, j] = 1
            else:
                imem[j] = v

        for p in range(n_probe):
            pmem[k, p] = imem[probes[p]]
            pahp[k, p] = iahp[probes[p]]

        if learn:
            for a in range(n_src_pl):
                xtr[a] = xtr[a] * trace_decay + trace_inc_pre * <double>ext_counts[k, src0 + a]
            for b in range(n_dst_pl):
                ytr[b] = ytr[b] * trace_decay + trace_inc_post * <double>raster[k, dst0 + b]
            for a in range(n_src_pl):
                if xtr[a] == 0.0:
                    continue
                for b in range(n_dst_pl):
                    w = w_ext[plastic_class, src0 + a, dst0 + b] + alpha * (teacher[b] - ytr[b]) * xtr[a]
                    if w < 0.0:
                        w = 0.0
                    elif w > w_max:
                        w = w_max
                    w_ext[plastic_class, src0 + a, dst0 + b] = w

    return raster_np, pmem_np, pahp_np
