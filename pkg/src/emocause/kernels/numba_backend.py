"""Numba-compiled loop kernels; same contracts as ``numpy_backend``.

Importing this module compiles nothing by itself (lazy dispatch), but it
requires numba to be installed. Loops are written scalar-by-scalar so the
compiled code carries no allocation churn on the tiny per-instance arrays
the models work with.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _sigmoid(z):
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    t = math.exp(z)
    return t / (1.0 + t)


@njit(cache=True)
def _softmax_rows(scores, attn, h, k):
    # stable softmax of scores[h, :k] into attn[h, :k]
    mx = scores[h, 0]
    for i in range(1, k):
        if scores[h, i] > mx:
            mx = scores[h, i]
    total = 0.0
    for i in range(k):
        e = math.exp(scores[h, i] - mx)
        attn[h, i] = e
        total += e
    for i in range(k):
        attn[h, i] /= total


@njit(cache=True)
def basic_forward(emb, query, dist, w, bias, hops):
    k, d = emb.shape
    scores = np.empty((hops, k))
    attn = np.empty((hops, k))
    queries = np.empty((hops, d))
    outputs = np.empty((hops, d))
    q = query.copy()
    for h in range(hops):
        for j in range(d):
            queries[h, j] = q[j]
        for i in range(k):
            s = 0.0
            for j in range(d):
                s += emb[i, j] * q[j]
            scores[h, i] = s
        _softmax_rows(scores, attn, h, k)
        o = np.zeros(d)
        for i in range(k):
            a = attn[h, i]
            for j in range(d):
                o[j] += a * emb[i, j]
        for j in range(d):
            o[j] += q[j]
            outputs[h, j] = o[j]
        q = o
    z = bias
    for j in range(d):
        z += w[j] * q[j]
    z += w[d] * dist
    return _sigmoid(z), scores, attn, queries, outputs


@njit(cache=True)
def basic_backward(emb, dist, w, p, label, attn, queries, outputs):
    hops, k = attn.shape
    d = emb.shape[1]
    dz = p - label
    d_w = np.empty(d + 1)
    for j in range(d):
        d_w[j] = dz * outputs[hops - 1, j]
    d_w[d] = dz * dist
    d_bias = dz
    d_emb = np.zeros((k, d))
    d_query = np.zeros(d)
    g = np.empty(d)
    for j in range(d):
        g[j] = dz * w[j]
    dalpha = np.empty(k)
    dm = np.empty(k)
    for h in range(hops - 1, -1, -1):
        adot = 0.0
        for i in range(k):
            s = 0.0
            for j in range(d):
                s += emb[i, j] * g[j]
            dalpha[i] = s
            adot += attn[h, i] * s
        for i in range(k):
            dm[i] = attn[h, i] * (dalpha[i] - adot)
        dq = g.copy()
        for i in range(k):
            a = attn[h, i]
            for j in range(d):
                d_emb[i, j] += a * g[j] + dm[i] * queries[h, j]
                dq[j] += dm[i] * emb[i, j]
        if h == 0:
            for j in range(d):
                d_query[j] = dq[j]
        else:
            g = dq
    return d_w, d_bias, d_emb, d_query


@njit(cache=True)
def convms_forward(emb, query, dist, w, bias, hops):
    k, d = emb.shape
    scores = np.empty((hops, k))
    attn = np.empty((hops, k))
    queries = np.empty((hops, 3, d))
    outputs = np.empty((hops, 3, d))
    qp = query.copy()
    qc = query.copy()
    qf = query.copy()
    for h in range(hops):
        for j in range(d):
            queries[h, 0, j] = qp[j]
            queries[h, 1, j] = qc[j]
            queries[h, 2, j] = qf[j]
        for i in range(k):
            s = 0.0
            if i > 0:
                for j in range(d):
                    s += emb[i - 1, j] * qp[j]
            for j in range(d):
                s += emb[i, j] * qc[j]
            if i < k - 1:
                for j in range(d):
                    s += emb[i + 1, j] * qf[j]
            scores[h, i] = s
        _softmax_rows(scores, attn, h, k)
        op = np.zeros(d)
        oc = np.zeros(d)
        of = np.zeros(d)
        for i in range(k):
            a = attn[h, i]
            if i > 0:
                for j in range(d):
                    op[j] += a * emb[i - 1, j]
            for j in range(d):
                oc[j] += a * emb[i, j]
            if i < k - 1:
                for j in range(d):
                    of[j] += a * emb[i + 1, j]
        for j in range(d):
            op[j] += qp[j]
            oc[j] += qc[j]
            of[j] += qf[j]
            outputs[h, 0, j] = op[j]
            outputs[h, 1, j] = oc[j]
            outputs[h, 2, j] = of[j]
        qp, qc, qf = op, oc, of
    z = bias
    for j in range(d):
        z += w[j] * qp[j]
    for j in range(d):
        z += w[d + j] * qc[j]
    for j in range(d):
        z += w[2 * d + j] * qf[j]
    z += w[3 * d] * dist
    return _sigmoid(z), scores, attn, queries, outputs


@njit(cache=True)
def convms_backward(emb, dist, w, p, label, attn, queries, outputs):
    hops, k = attn.shape
    d = emb.shape[1]
    dz = p - label
    d_w = np.empty(3 * d + 1)
    for j in range(d):
        d_w[j] = dz * outputs[hops - 1, 0, j]
        d_w[d + j] = dz * outputs[hops - 1, 1, j]
        d_w[2 * d + j] = dz * outputs[hops - 1, 2, j]
    d_w[3 * d] = dz * dist
    d_bias = dz
    d_emb = np.zeros((k, d))
    d_query = np.zeros(d)
    gp = np.empty(d)
    gc = np.empty(d)
    gf = np.empty(d)
    for j in range(d):
        gp[j] = dz * w[j]
        gc[j] = dz * w[d + j]
        gf[j] = dz * w[2 * d + j]
    dalpha = np.empty(k)
    dm = np.empty(k)
    for h in range(hops - 1, -1, -1):
        adot = 0.0
        for i in range(k):
            s = 0.0
            if i > 0:
                for j in range(d):
                    s += emb[i - 1, j] * gp[j]
            for j in range(d):
                s += emb[i, j] * gc[j]
            if i < k - 1:
                for j in range(d):
                    s += emb[i + 1, j] * gf[j]
            dalpha[i] = s
            adot += attn[h, i] * s
        for i in range(k):
            dm[i] = attn[h, i] * (dalpha[i] - adot)
        dqp = gp.copy()
        dqc = gc.copy()
        dqf = gf.copy()
        for i in range(k):
            a = attn[h, i]
            # slot-read and score contributions; padding rows do not exist
            if i > 0:
                for j in range(d):
                    d_emb[i - 1, j] += a * gp[j] + dm[i] * queries[h, 0, j]
                    dqp[j] += dm[i] * emb[i - 1, j]
            for j in range(d):
                d_emb[i, j] += a * gc[j] + dm[i] * queries[h, 1, j]
                dqc[j] += dm[i] * emb[i, j]
            if i < k - 1:
                for j in range(d):
                    d_emb[i + 1, j] += a * gf[j] + dm[i] * queries[h, 2, j]
                    dqf[j] += dm[i] * emb[i + 1, j]
        if h == 0:
            for j in range(d):
                d_query[j] = dqp[j] + dqc[j] + dqf[j]
        else:
            gp, gc, gf = dqp, dqc, dqf
    return d_w, d_bias, d_emb, d_query


@njit(cache=True)
def skipgram_pairs(w_in, w_out, centers, contexts, negatives, lr_start, lr_min,
                   pairs_done, pairs_total):
    n = centers.shape[0]
    kneg = negatives.shape[1]
    d = w_in.shape[1]
    gh = np.empty(d)
    for t in range(n):
        lr = lr_start * (1.0 - (pairs_done + t) / pairs_total)
        if lr < lr_min:
            lr = lr_min
        c = centers[t]
        pos = contexts[t]
        for j in range(d):
            gh[j] = 0.0
        s = 0.0
        for j in range(d):
            s += w_out[pos, j] * w_in[c, j]
        g = _sigmoid(s) - 1.0
        for j in range(d):
            gh[j] += g * w_out[pos, j]
        for j in range(d):
            w_out[pos, j] -= (lr * g) * w_in[c, j]
        for q in range(kneg):
            neg = negatives[t, q]
            if neg == pos:
                continue
            s = 0.0
            for j in range(d):
                s += w_out[neg, j] * w_in[c, j]
            g = _sigmoid(s)
            for j in range(d):
                gh[j] += g * w_out[neg, j]
            for j in range(d):
                w_out[neg, j] -= (lr * g) * w_in[c, j]
        for j in range(d):
            w_in[c, j] -= lr * gh[j]
    return pairs_done + n
