"""JIT-compiled recurrent kernels; the hot time loops of the encoder.

Same math as numpy_impl, compiled with numba. First call pays the compile
cost; cache=True persists machine code across processes.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _sigmoid_inplace(z, lo, hi, out):
    for k in range(lo, hi):
        v = z[k]
        if v >= 0.0:
            out[k - lo] = 1.0 / (1.0 + np.exp(-v))
        else:
            e = np.exp(v)
            out[k - lo] = e / (1.0 + e)


@njit(cache=True)
def lstm_seq_forward(xw, wh):
    T = xw.shape[0]
    H = wh.shape[0]
    h_all = np.zeros((T, H))
    gates = np.zeros((T, 4 * H))
    c_all = np.zeros((T, H))
    tc_all = np.zeros((T, H))
    h = np.zeros(H)
    c = np.zeros(H)
    i = np.empty(H)
    f = np.empty(H)
    o = np.empty(H)
    for t in range(T):
        z = xw[t] + h @ wh
        _sigmoid_inplace(z, 0, H, i)
        _sigmoid_inplace(z, H, 2 * H, f)
        _sigmoid_inplace(z, 2 * H, 3 * H, o)
        g = np.tanh(z[3 * H:])
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        gates[t, :H] = i
        gates[t, H:2 * H] = f
        gates[t, 2 * H:3 * H] = o
        gates[t, 3 * H:] = g
        c_all[t] = c
        tc_all[t] = tc
        h_all[t] = h
    return h_all, (gates, c_all, tc_all)


@njit(cache=True)
def lstm_seq_backward(dh_all, wh, h_all, stash):
    gates, c_all, tc_all = stash
    T = dh_all.shape[0]
    H = wh.shape[0]
    dxw = np.zeros((T, 4 * H))
    dwh = np.zeros_like(wh)
    dh = np.zeros(H)
    dc = np.zeros(H)
    zero = np.zeros(H)
    for t in range(T - 1, -1, -1):
        i = gates[t, :H]
        f = gates[t, H:2 * H]
        o = gates[t, 2 * H:3 * H]
        g = gates[t, 3 * H:]
        c_prev = c_all[t - 1] if t > 0 else zero
        h_prev = h_all[t - 1] if t > 0 else zero
        dht = dh_all[t] + dh
        do = dht * tc_all[t]
        dc = dc + dht * o * (1.0 - tc_all[t] * tc_all[t])
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        for k in range(H):
            dxw[t, k] = i[k] * (1.0 - i[k]) * di[k]
            dxw[t, H + k] = f[k] * (1.0 - f[k]) * df[k]
            dxw[t, 2 * H + k] = o[k] * (1.0 - o[k]) * do[k]
            dxw[t, 3 * H + k] = (1.0 - g[k] * g[k]) * dg[k]
        dz = dxw[t]
        for a in range(H):
            hp = h_prev[a]
            if hp != 0.0:
                for bcol in range(4 * H):
                    dwh[a, bcol] += hp * dz[bcol]
        dh = wh @ dz
        dc = dc * f
    return dxw, dwh
