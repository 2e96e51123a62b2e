"""Pure-numpy implementations of the hot numeric kernels.

This is the fallback path used when the numba backend is disabled or
unavailable (see ``emocause.kernels``). Both backends expose the same
functions with identical array contracts; results agree to floating-point
rounding, and each backend is bit-reproducible on its own.

Array contracts (all float64, C-contiguous):
  emb       (k, d)   one row per clause token, in clause order
  query     (d,)     query vector (emotion-word embedding at hop 1)
  w         (d+1,)   basic head: d weights for the read vector + 1 for distance
  w         (3d+1,)  windowed head: three slot blocks + 1 for distance
  attn/scores (hops, k), queries/outputs (hops, d) or (hops, 3, d)
"""

import math

import numpy as np


def _sigmoid(z):
    # branch keeps exp() off the overflowing side
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    t = math.exp(z)
    return t / (1.0 + t)


def _softmax(m):
    e = np.exp(m - m.max())
    return e / e.sum()


def basic_forward(emb, query, dist, w, bias, hops):
    """Multi-hop attention over one clause; returns probability and trace."""
    k, d = emb.shape
    scores = np.empty((hops, k))
    attn = np.empty((hops, k))
    queries = np.empty((hops, d))
    outputs = np.empty((hops, d))
    q = query
    for h in range(hops):
        queries[h] = q
        m = emb @ q
        scores[h] = m
        a = _softmax(m)
        attn[h] = a
        o = a @ emb + q
        outputs[h] = o
        q = o
    z = w[:d] @ q + w[d] * dist + bias
    return _sigmoid(z), scores, attn, queries, outputs


def basic_backward(emb, dist, w, p, label, attn, queries, outputs):
    """Exact log-loss gradients for the basic model, from a forward trace."""
    hops, k = attn.shape
    d = emb.shape[1]
    dz = p - label
    d_w = np.empty(d + 1)
    d_w[:d] = dz * outputs[hops - 1]
    d_w[d] = dz * dist
    d_bias = dz
    d_emb = np.zeros_like(emb)
    d_query = np.zeros(d)
    g = dz * w[:d]
    for h in range(hops - 1, -1, -1):
        a = attn[h]
        q = queries[h]
        dalpha = emb @ g
        dm = a * (dalpha - a @ dalpha)
        d_emb += np.outer(a, g) + np.outer(dm, q)
        dq = g + emb.T @ dm
        if h == 0:
            d_query = dq
        else:
            g = dq
    return d_w, d_bias, d_emb, d_query


def convms_forward(emb, query, dist, w, bias, hops):
    """Windowed multi-slot forward pass (window 3, zero padding)."""
    k, d = emb.shape
    pad = np.zeros((k + 2, d))
    pad[1:-1] = emb
    prev_e = pad[:-2]
    curr_e = pad[1:-1]
    foll_e = pad[2:]
    scores = np.empty((hops, k))
    attn = np.empty((hops, k))
    queries = np.empty((hops, 3, d))
    outputs = np.empty((hops, 3, d))
    qp = query
    qc = query
    qf = query
    for h in range(hops):
        queries[h, 0] = qp
        queries[h, 1] = qc
        queries[h, 2] = qf
        m = prev_e @ qp + curr_e @ qc + foll_e @ qf
        scores[h] = m
        a = _softmax(m)
        attn[h] = a
        op = a @ prev_e + qp
        oc = a @ curr_e + qc
        of = a @ foll_e + qf
        outputs[h, 0] = op
        outputs[h, 1] = oc
        outputs[h, 2] = of
        qp, qc, qf = op, oc, of
    z = w[:d] @ qp + w[d:2 * d] @ qc + w[2 * d:3 * d] @ qf + w[3 * d] * dist + bias
    return _sigmoid(z), scores, attn, queries, outputs


def convms_backward(emb, dist, w, p, label, attn, queries, outputs):
    """Exact log-loss gradients for the multi-slot model, from a forward trace."""
    hops, k = attn.shape
    d = emb.shape[1]
    pad = np.zeros((k + 2, d))
    pad[1:-1] = emb
    prev_e = pad[:-2]
    curr_e = pad[1:-1]
    foll_e = pad[2:]
    dz = p - label
    d_w = np.empty(3 * d + 1)
    d_w[:d] = dz * outputs[hops - 1, 0]
    d_w[d:2 * d] = dz * outputs[hops - 1, 1]
    d_w[2 * d:3 * d] = dz * outputs[hops - 1, 2]
    d_w[3 * d] = dz * dist
    d_bias = dz
    gp = dz * w[:d]
    gc = dz * w[d:2 * d]
    gf = dz * w[2 * d:3 * d]
    d_pad = np.zeros((k + 2, d))
    d_query = np.zeros(d)
    for h in range(hops - 1, -1, -1):
        a = attn[h]
        qp = queries[h, 0]
        qc = queries[h, 1]
        qf = queries[h, 2]
        # slot reads: o_slot = sum_i a_i * shifted_e_i + q_slot
        dalpha = prev_e @ gp + curr_e @ gc + foll_e @ gf
        d_pad[:-2] += np.outer(a, gp)
        d_pad[1:-1] += np.outer(a, gc)
        d_pad[2:] += np.outer(a, gf)
        dqp = gp.copy()
        dqc = gc.copy()
        dqf = gf.copy()
        # position softmax
        dm = a * (dalpha - a @ dalpha)
        # windowed scores: m_i = e_{i-1}.qp + e_i.qc + e_{i+1}.qf
        dqp += prev_e.T @ dm
        dqc += curr_e.T @ dm
        dqf += foll_e.T @ dm
        d_pad[:-2] += np.outer(dm, qp)
        d_pad[1:-1] += np.outer(dm, qc)
        d_pad[2:] += np.outer(dm, qf)
        if h == 0:
            d_query = dqp + dqc + dqf
        else:
            gp, gc, gf = dqp, dqc, dqf
    # padding rows are constants, their gradient is discarded
    d_emb = d_pad[1:-1].copy()
    return d_w, d_bias, d_emb, d_query


def skipgram_pairs(w_in, w_out, centers, contexts, negatives, lr_start, lr_min,
                   pairs_done, pairs_total):
    """One sequential pass of negative-sampling updates over (center, context) pairs.

    Updates w_in/w_out in place. The learning rate decays linearly with the
    global number of pairs processed, floored at lr_min. Negatives equal to
    the positive target are skipped. Returns the updated processed count.
    """
    n = centers.shape[0]
    kneg = negatives.shape[1]
    for t in range(n):
        lr = lr_start * (1.0 - (pairs_done + t) / pairs_total)
        if lr < lr_min:
            lr = lr_min
        c = centers[t]
        pos = contexts[t]
        h = w_in[c]
        gh = np.zeros_like(h)
        s = _sigmoid(w_out[pos] @ h)
        g = s - 1.0
        gh += g * w_out[pos]
        w_out[pos] -= (lr * g) * h
        for q in range(kneg):
            neg = negatives[t, q]
            if neg == pos:
                continue
            s = _sigmoid(w_out[neg] @ h)
            gh += s * w_out[neg]
            w_out[neg] -= (lr * s) * h
        w_in[c] -= lr * gh
    return pairs_done + n
