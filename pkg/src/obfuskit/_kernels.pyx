# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled SGD epoch for the softmax / one-hidden-layer learners.

Same arithmetic as the numpy fallback (batch-mean cross-entropy gradient,
L2 on weights only, sign hinge on the parameter prefix); only summation
order differs, so results agree to rounding.
"""

import numpy as np
from libc.math cimport exp
from libc.stdint cimport int64_t


cdef void _softmax_delta(double* logits, int c, int64_t label, double inv_n) noexcept nogil:
    cdef int k
    cdef double m = logits[0], s = 0.0
    for k in range(1, c):
        if logits[k] > m:
            m = logits[k]
    for k in range(c):
        logits[k] = exp(logits[k] - m)
        s += logits[k]
    for k in range(c):
        logits[k] = logits[k] / s * inv_n
    logits[label] -= inv_n


def sgd_epoch(double[::1] theta, const double[:, ::1] Z, const int64_t[::1] y, const int64_t[::1] order,
              int d, int h, int c, int act, double lr, double reg, int batch_size,
              const double[::1] sign_targets, double sign_weight):
    cdef Py_ssize_t n = order.shape[0]
    cdef Py_ssize_t P = theta.shape[0]
    cdef Py_ssize_t n_sign = sign_targets.shape[0]
    cdef double[::1] grad = np.zeros(P, dtype=np.float64)
    cdef double[::1] hid = np.zeros(max(h, 1), dtype=np.float64)
    cdef double[::1] ghid = np.zeros(max(h, 1), dtype=np.float64)
    cdef double[::1] logit = np.zeros(c, dtype=np.float64)
    cdef Py_ssize_t start, stop, t, i, j, k, s
    cdef Py_ssize_t w1 = 0, b1, w2, b2
    cdef double inv_n, xi, acc, t_i, th, hj
    cdef int64_t label
    cdef double* T = &theta[0]
    cdef double* G = &grad[0]
    cdef double* H = &hid[0]
    cdef double* GH = &ghid[0]
    cdef double* row
    cdef double* trow
    cdef double* grow

    if h > 0:
        b1 = d * h
        w2 = b1 + h
        b2 = w2 + h * c
    else:
        b1 = w2 = 0
        b2 = d * c

    with nogil:
        start = 0
        while start < n:
            stop = start + batch_size
            if stop > n:
                stop = n
            inv_n = 1.0 / (stop - start)
            for i in range(P):
                grad[i] = 0.0

            for t in range(start, stop):
                s = order[t]
                label = y[s]
                if h == 0:
                    for k in range(c):
                        logit[k] = theta[b2 + k]
                    for i in range(d):
                        xi = Z[s, i]
                        if xi != 0.0:
                            for k in range(c):
                                logit[k] += xi * theta[i * c + k]
                    _softmax_delta(&logit[0], c, label, inv_n)
                    for i in range(d):
                        xi = Z[s, i]
                        if xi != 0.0:
                            for k in range(c):
                                grad[i * c + k] += xi * logit[k]
                    for k in range(c):
                        grad[b2 + k] += logit[k]
                else:
                    row = &Z[s, 0]
                    for j in range(h):
                        H[j] = T[b1 + j]
                    for i in range(d):
                        xi = row[i]
                        if xi != 0.0:
                            trow = T + i * h
                            for j in range(h):
                                H[j] += xi * trow[j]
                    for j in range(h):
                        if act == 0:
                            if hid[j] < 0.0:
                                hid[j] = 0.0
                        else:
                            hid[j] = 1.0 / (1.0 + exp(-hid[j]))
                    for k in range(c):
                        logit[k] = theta[b2 + k]
                    for j in range(h):
                        for k in range(c):
                            logit[k] += hid[j] * theta[w2 + j * c + k]
                    _softmax_delta(&logit[0], c, label, inv_n)
                    for j in range(h):
                        hj = H[j]
                        trow = T + w2 + j * c
                        grow = G + w2 + j * c
                        acc = 0.0
                        for k in range(c):
                            grow[k] += hj * logit[k]
                            acc += trow[k] * logit[k]
                        if act == 0:
                            GH[j] = acc if hj > 0.0 else 0.0
                        else:
                            GH[j] = acc * hj * (1.0 - hj)
                        G[b1 + j] += GH[j]
                    for k in range(c):
                        grad[b2 + k] += logit[k]
                    for i in range(d):
                        xi = row[i]
                        if xi != 0.0:
                            grow = G + i * h
                            for j in range(h):
                                grow[j] += xi * GH[j]

            if reg > 0.0:
                if h == 0:
                    for i in range(d * c):
                        grad[i] += reg * theta[i]
                else:
                    for i in range(d * h):
                        grad[i] += reg * theta[i]
                    for i in range(w2, b2):
                        grad[i] += reg * theta[i]
            for i in range(n_sign):
                t_i = sign_targets[i]
                th = theta[i]
                if (t_i > 0.0 and th < 0.0) or (t_i < 0.0 and th >= 0.0):
                    grad[i] -= sign_weight * t_i

            for i in range(P):
                theta[i] -= lr * grad[i]
            start = stop
