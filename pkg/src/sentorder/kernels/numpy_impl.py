"""Pure-numpy reference kernels for the recurrent time loops.

Math must match the numba implementations exactly; these are the fallback
path and the oracle the accelerated path is tested against.
"""

import numpy as np


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def lstm_seq_forward(xw, wh):
    """LSTM over a sequence, zero initial state.

    Parameters
    ----------
    xw : (T, 4H) input projections, bias already added (gate order i, f, o, g)
    wh : (H, 4H) hidden-to-hidden weights

    Returns
    -------
    h_all : (T, H) hidden states
    stash : (gates, c_all, tc_all) saved activations for the backward pass
    """
    T = xw.shape[0]
    H = wh.shape[0]
    h_all = np.zeros((T, H))
    gates = np.zeros((T, 4 * H))
    c_all = np.zeros((T, H))
    tc_all = np.zeros((T, H))
    h = np.zeros(H)
    c = np.zeros(H)
    for t in range(T):
        z = xw[t] + h @ wh
        i = _sigmoid(z[:H])
        f = _sigmoid(z[H:2 * H])
        o = _sigmoid(z[2 * H:3 * H])
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


def lstm_seq_backward(dh_all, wh, h_all, stash):
    """Gradients of lstm_seq_forward w.r.t. xw and wh given dL/dh_all."""
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
        dz = dxw[t]
        dz[:H] = i * (1.0 - i) * di
        dz[H:2 * H] = f * (1.0 - f) * df
        dz[2 * H:3 * H] = o * (1.0 - o) * do
        dz[3 * H:] = (1.0 - g * g) * dg
        dwh += h_prev.reshape(-1, 1) * dz.reshape(1, -1)
        dh = wh @ dz
        dc = dc * f
    return dxw, dwh
