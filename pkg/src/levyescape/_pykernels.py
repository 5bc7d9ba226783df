"""Pure-numpy implementations of the hot kernels.

Used when the compiled extension is unavailable (or forced with
``LEVYESCAPE_BACKEND=python``), and always for drift fields the compiled
core does not know about. Random numbers come from Philox4x32-10 keyed by
the seed and addressed by ``(counter, stream, tag)``, so every draw is a pure
function of its address.
"""

import numpy as np

_MASK = np.uint64(0xFFFFFFFF)
_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_TWO_M53 = 2.0 ** -53

STATUS_INSIDE = 0
STATUS_EXITED = 1
STATUS_NONFINITE = 2
TAG_BRIDGE = 3
BRIDGE_CUTOFF = 36.0


def philox4x32(c0, c1, c2, c3, k0, k1):
    """Philox4x32-10 on uint64 arrays holding 32-bit words."""
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) & _MASK for c in (c0, c1, c2, c3))
    k0 = np.uint64(k0) & _MASK
    k1 = np.uint64(k1) & _MASK
    for _ in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        c0, c1, c2, c3 = ((p1 >> np.uint64(32)) ^ c1 ^ k0, p1 & _MASK,
                          (p0 >> np.uint64(32)) ^ c3 ^ k1, p0 & _MASK)
        k0 = (k0 + _W0) & _MASK
        k1 = (k1 + _W1) & _MASK
    return c0, c1, c2, c3


def _to_unit(hi, lo):
    bits = ((hi << np.uint64(32)) | lo) >> np.uint64(11)
    return (bits.astype(np.float64) + 0.5) * _TWO_M53


def uniform_pairs(seed, counter, stream, tag):
    """Two independent open-(0,1) uniforms per address."""
    counter = np.asarray(counter, dtype=np.uint64)
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    x0, x1, x2, x3 = philox4x32(counter & _MASK, counter >> np.uint64(32),
                                np.broadcast_to(np.uint64(stream), counter.shape),
                                np.broadcast_to(np.uint64(tag), counter.shape),
                                seed & 0xFFFFFFFF, seed >> 32)
    return _to_unit(x0, x1), _to_unit(x2, x3)


def cms_transform(alpha, u1, u2):
    """Chambers-Mallows-Stuck map to S_alpha(1, 0, 0); ``alpha == 2`` gives N(0, 2)."""
    if alpha == 2.0:
        return 2.0 * np.sqrt(-np.log(u2)) * np.sin(np.pi * (u1 - 0.5))
    v = np.pi * (u1 - 0.5)
    if alpha == 1.0:
        return np.tan(v)
    w = -np.log(u2)
    return (np.sin(alpha * v) / np.cos(v) ** (1.0 / alpha)
            * (np.cos((1.0 - alpha) * v) / w) ** ((1.0 - alpha) / alpha))


def gauss_transform(u1, u2):
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def noise_draws(alpha, seed, counter, stream, tag):
    """Unit draws used for increments: S_alpha(1,0,0) for alpha < 2, N(0,1) at 2."""
    u1, u2 = uniform_pairs(seed, counter, stream, tag)
    if alpha == 2.0:
        return gauss_transform(u1, u2)
    return cms_transform(alpha, u1, u2)


def _ml_drift(v, w, a):
    C, gCa, gK, gL, VCa, VK, VL, V1, V2, V3, V4, phi, I, sv, sw = a
    vr = v / sv
    wr = w / sw
    m_inf = 0.5 * (1.0 + np.tanh((vr - V1) / V2))
    w_inf = 0.5 * (1.0 + np.tanh((vr - V3) / V4))
    f1 = (-gCa * m_inf * (vr - VCa) - gK * wr * (vr - VK) - gL * (vr - VL) + I) / C
    f2 = phi * (w_inf - wr) * np.cosh((vr - V3) / (2.0 * V4))
    return sv * f1, sw * f2


def _crossing(d0, d1, var):
    """Probability that a Brownian bridge between distances d0, d1 > 0 from an
    edge touches it; exponents beyond BRIDGE_CUTOFF count as zero."""
    if var <= 0:
        return np.zeros_like(d0)
    x = 2.0 * d0 * d1 / var
    return np.where(x < BRIDGE_CUTOFF, np.exp(-np.minimum(x, BRIDGE_CUTOFF)), 0.0)


def bridge_exit(v0, w0, v1, w1, box, var1, var2, u1, u2):
    """Brownian-bridge crossing test for a step that ends inside ``box``.

    Returns ``(crossed, v, w)``; a crossed path is moved onto the edge picked
    with probability proportional to that edge's crossing probability.
    """
    a, b, c, d = box
    pa = _crossing(v0 - a, v1 - a, var1)
    pb = _crossing(b - v0, b - v1, var1)
    pc = _crossing(w0 - c, w1 - c, var2)
    pd = _crossing(d - w0, d - w1, var2)
    crossed = u1 < 1.0 - (1.0 - pa) * (1.0 - pb) * (1.0 - pc) * (1.0 - pd)
    x = u2 * (pa + pb + pc + pd)
    edge = np.where(x < pa, 0, np.where(x < pa + pb, 1, np.where(x < pa + pb + pc, 2, 3)))
    v = np.where(crossed & (edge == 0), a, np.where(crossed & (edge == 1), b, v1))
    w = np.where(crossed & (edge == 2), c, np.where(crossed & (edge == 3), d, w1))
    return crossed, v, w


def _near_edge(v0, w0, v1, w1, box, var1, var2):
    """Steps with any crossing probability above the cutoff."""
    a, b, c, d = box
    lim1 = BRIDGE_CUTOFF * var1 / 2.0
    lim2 = BRIDGE_CUTOFF * var2 / 2.0
    near = np.zeros(v0.shape, dtype=bool)
    if var1 > 0:
        near |= ((v0 - a) * (v1 - a) < lim1) | ((b - v0) * (b - v1) < lim1)
    if var2 > 0:
        near |= ((w0 - c) * (w1 - c) < lim2) | ((d - w0) * (d - w1) < lim2)
    return near


def simulate_paths(drift, start, box, alpha, sigma1, sigma2, dt, n_steps,
                   seed, path_ids, antithetic=False, bridge=False):
    """Euler scheme for all ``path_ids`` until the state leaves ``box``.

    ``box = (a, b, c, d)`` is the open rectangle. Returns
    ``(steps, v, w, status)``: steps taken, final state, and a status code
    (inside at horizon / exited / non-finite). With ``bridge`` and
    ``alpha = 2`` a step that ends inside still exits when the Brownian
    bridge between the two states crosses an edge.
    """
    a, b, c, d = box
    ids = np.asarray(path_ids, dtype=np.int64)
    n = ids.size
    v = np.full(n, float(start[0]))
    w = np.full(n, float(start[1]))
    steps = np.zeros(n, dtype=np.int64)
    status = np.zeros(n, dtype=np.int8)
    if alpha == 2.0:
        scale1 = sigma1 * np.sqrt(dt)
        scale2 = sigma2 * np.sqrt(dt)
    else:
        scale1 = sigma1 * dt ** (1.0 / alpha)
        scale2 = sigma2 * dt ** (1.0 / alpha)
    if antithetic:
        base = (ids // 2) * 2
        sign = np.where(ids % 2 == 1, -1.0, 1.0)
    else:
        base = ids
        sign = np.ones(n)
    if isinstance(drift, np.ndarray):
        args = drift
        drift_fn = (lambda x, y: _ml_drift(x, y, args)) if args.size else None
    else:
        drift_fn = drift

    inside0 = a < start[0] < b and c < start[1] < d
    active = np.arange(n) if inside0 else np.arange(0)
    if not inside0:
        status[:] = STATUS_EXITED
    use_bridge = bridge and alpha == 2.0
    var1, var2 = (sigma1 ** 2 * dt, sigma2 ** 2 * dt)
    k = 0
    while active.size and k < n_steps:
        va, wa = v[active], w[active]
        v_prev, w_prev = va, wa
        if drift_fn is not None:
            f1, f2 = drift_fn(va, wa)
            va = va + f1 * dt
            wa = wa + f2 * dt
        ctr = np.full(active.size, k, dtype=np.uint64)
        if sigma1 != 0.0:
            va = va + scale1 * sign[active] * noise_draws(alpha, seed, ctr, base[active], 0)
        if sigma2 != 0.0:
            wa = wa + scale2 * sign[active] * noise_draws(alpha, seed, ctr, base[active], 1)
        finite = np.isfinite(va) & np.isfinite(wa)
        inside = finite & (va > a) & (va < b) & (wa > c) & (wa < d)
        if use_bridge and inside.any():
            idx = np.flatnonzero(inside & _near_edge(v_prev, w_prev, va, wa, box, var1, var2))
            u1, u2 = uniform_pairs(seed, ctr[idx], base[active[idx]], TAG_BRIDGE)
            crossed, va[idx], wa[idx] = bridge_exit(v_prev[idx], w_prev[idx], va[idx], wa[idx],
                                                    box, var1, var2, u1, u2)
            inside[idx[crossed]] = False
        v[active] = va
        w[active] = wa
        k += 1
        steps[active] = k
        status[active[~finite]] = STATUS_NONFINITE
        status[active[finite & ~inside]] = STATUS_EXITED
        active = active[inside]
    return steps, v, w, status
