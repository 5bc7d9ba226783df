# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: Philox4x32-10 draws and the Euler path loop.

Mirrors ``_pykernels`` address-for-address; results agree with the numpy
backend up to libm rounding.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, tan, log, pow, sqrt, tanh, cosh, isfinite, exp, M_PI
from libc.stdint cimport uint32_t, uint64_t, int64_t, int8_t

cnp.import_array()

cdef inline void philox(uint32_t* ctr, uint32_t k0, uint32_t k1) noexcept nogil:
    cdef uint64_t p0, p1
    cdef uint32_t c0 = ctr[0], c1 = ctr[1], c2 = ctr[2], c3 = ctr[3]
    cdef int r
    for r in range(10):
        p0 = <uint64_t>0xD2511F53u * c0
        p1 = <uint64_t>0xCD9E8D57u * c2
        c0 = <uint32_t>(p1 >> 32) ^ c1 ^ k0
        c1 = <uint32_t>p1
        c2 = <uint32_t>(p0 >> 32) ^ c3 ^ k1
        c3 = <uint32_t>p0
        k0 = k0 + 0x9E3779B9u
        k1 = k1 + 0xBB67AE85u
    ctr[0] = c0
    ctr[1] = c1
    ctr[2] = c2
    ctr[3] = c3


cdef inline double to_unit(uint32_t hi, uint32_t lo) noexcept nogil:
    cdef uint64_t bits = ((<uint64_t>hi << 32) | lo) >> 11
    return (<double>bits + 0.5) * 1.1102230246251565e-16


cdef inline void upair(uint64_t seed, uint64_t counter, uint32_t stream, uint32_t tag,
                       double* u1, double* u2) noexcept nogil:
    cdef uint32_t ctr[4]
    ctr[0] = <uint32_t>counter
    ctr[1] = <uint32_t>(counter >> 32)
    ctr[2] = stream
    ctr[3] = tag
    philox(ctr, <uint32_t>seed, <uint32_t>(seed >> 32))
    u1[0] = to_unit(ctr[0], ctr[1])
    u2[0] = to_unit(ctr[2], ctr[3])


cdef inline double draw(double alpha, double inv_a, double expo, uint64_t seed,
                        uint64_t counter, uint32_t stream, uint32_t tag) noexcept nogil:
    cdef double u1, u2, v, w
    upair(seed, counter, stream, tag, &u1, &u2)
    if alpha == 2.0:
        return sqrt(-2.0 * log(u1)) * cos(2.0 * M_PI * u2)
    v = M_PI * (u1 - 0.5)
    if alpha == 1.0:
        return tan(v)
    w = -log(u2)
    return sin(alpha * v) / pow(cos(v), inv_a) * pow(cos((1.0 - alpha) * v) / w, expo)


def uniform_pairs(seed, counter, uint32_t stream, uint32_t tag):
    cdef cnp.uint64_t[::1] ctr = np.ascontiguousarray(counter, dtype=np.uint64).ravel()
    cdef Py_ssize_t n = ctr.shape[0], i
    out1 = np.empty(n)
    out2 = np.empty(n)
    cdef double[::1] o1 = out1, o2 = out2
    cdef uint64_t s = <uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF)
    with nogil:
        for i in range(n):
            upair(s, ctr[i], stream, tag, &o1[i], &o2[i])
    return out1, out2


def noise_draws(double alpha, seed, counter, uint32_t stream, uint32_t tag):
    cdef cnp.uint64_t[::1] ctr = np.ascontiguousarray(counter, dtype=np.uint64).ravel()
    cdef Py_ssize_t n = ctr.shape[0], i
    out = np.empty(n)
    cdef double[::1] o = out
    cdef uint64_t s = <uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF)
    cdef double inv_a = 1.0 / alpha
    cdef double expo = (1.0 - alpha) / alpha
    with nogil:
        for i in range(n):
            o[i] = draw(alpha, inv_a, expo, s, ctr[i], stream, tag)
    return out


cdef inline double crossing(double d0, double d1, double var) noexcept nogil:
    # Brownian-bridge edge-touch probability, zero past the cutoff (matches _pykernels)
    cdef double x
    if var <= 0:
        return 0.0
    x = 2.0 * d0 * d1 / var
    return exp(-x) if x < 36.0 else 0.0


def simulate_paths(double[::1] drift_args, start, box, double alpha, double sigma1,
                   double sigma2, double dt, int64_t n_steps, seed, path_ids,
                   bint antithetic=False, bint bridge=False):
    """Path-major Euler loop; same contract as ``_pykernels.simulate_paths``."""
    cdef cnp.int64_t[::1] ids = np.ascontiguousarray(path_ids, dtype=np.int64).ravel()
    cdef Py_ssize_t n = ids.shape[0], p
    steps_arr = np.zeros(n, dtype=np.int64)
    v_arr = np.empty(n)
    w_arr = np.empty(n)
    status_arr = np.zeros(n, dtype=np.int8)
    cdef cnp.int64_t[::1] steps = steps_arr
    cdef double[::1] vout = v_arr, wout = w_arr
    cdef cnp.int8_t[::1] status = status_arr
    cdef double a = box[0], b = box[1], c = box[2], d = box[3]
    cdef double v0 = start[0], w0 = start[1]
    cdef uint64_t s = <uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF)
    cdef bint ml = drift_args.shape[0] > 0
    cdef double C = 1, gCa = 0, gK = 0, gL = 0, VCa = 0, VK = 0, VL = 0
    cdef double V1 = 0, V2 = 1, V3 = 0, V4 = 1, phi = 0, I = 0, sv = 1, sw = 1
    if ml:
        C, gCa, gK, gL, VCa, VK, VL, V1, V2, V3, V4, phi, I, sv, sw = drift_args
    cdef double inv_a = 1.0 / alpha
    cdef double expo = (1.0 - alpha) / alpha
    cdef double scale1, scale2
    if alpha == 2.0:
        scale1 = sigma1 * sqrt(dt)
        scale2 = sigma2 * sqrt(dt)
    else:
        scale1 = sigma1 * pow(dt, inv_a)
        scale2 = sigma2 * pow(dt, inv_a)
    cdef bint inside0 = a < v0 < b and c < w0 < d
    cdef bint use_bridge = bridge and alpha == 2.0
    cdef double var1 = sigma1 * sigma1 * dt, var2 = sigma2 * sigma2 * dt
    cdef double v, w, vr, wr, f1, f2, sgn, vp, wp, pa, pb, pc, pd, u1, u2, x
    cdef int64_t k
    cdef uint32_t base
    with nogil:
        for p in range(n):
            v = v0
            w = w0
            if not inside0:
                vout[p] = v
                wout[p] = w
                status[p] = 1
                continue
            if antithetic:
                base = <uint32_t>((ids[p] // 2) * 2)
                sgn = -1.0 if ids[p] % 2 == 1 else 1.0
            else:
                base = <uint32_t>ids[p]
                sgn = 1.0
            k = 0
            while k < n_steps:
                vp = v
                wp = w
                if ml:
                    vr = v / sv
                    wr = w / sw
                    f1 = (-gCa * 0.5 * (1.0 + tanh((vr - V1) / V2)) * (vr - VCa)
                          - gK * wr * (vr - VK) - gL * (vr - VL) + I) / C
                    f2 = phi * (0.5 * (1.0 + tanh((vr - V3) / V4)) - wr) * cosh((vr - V3) / (2.0 * V4))
                    v = v + sv * f1 * dt
                    w = w + sw * f2 * dt
                if sigma1 != 0.0:
                    v = v + scale1 * sgn * draw(alpha, inv_a, expo, s, <uint64_t>k, base, 0)
                if sigma2 != 0.0:
                    w = w + scale2 * sgn * draw(alpha, inv_a, expo, s, <uint64_t>k, base, 1)
                k = k + 1
                if not (isfinite(v) and isfinite(w)):
                    status[p] = 2
                    break
                if not (v > a and v < b and w > c and w < d):
                    status[p] = 1
                    break
                if use_bridge:
                    pa = crossing(vp - a, v - a, var1)
                    pb = crossing(b - vp, b - v, var1)
                    pc = crossing(wp - c, w - c, var2)
                    pd = crossing(d - wp, d - w, var2)
                    if pa == 0.0 and pb == 0.0 and pc == 0.0 and pd == 0.0:
                        continue
                    upair(s, <uint64_t>(k - 1), base, 3, &u1, &u2)
                    if u1 < 1.0 - (1.0 - pa) * (1.0 - pb) * (1.0 - pc) * (1.0 - pd):
                        x = u2 * (pa + pb + pc + pd)
                        if x < pa:
                            v = a
                        elif x < pa + pb:
                            v = b
                        elif x < pa + pb + pc:
                            w = c
                        else:
                            w = d
                        status[p] = 1
                        break
            steps[p] = k
            vout[p] = v
            wout[p] = w
    return steps_arr, v_arr, w_arr, status_arr
