# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled rollout and weighting kernels.

Mirrors ``mbd._kernels_py``; the batch loop runs without the GIL so threaded
callers get real parallelism.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, tan, exp, fmin, fmax, INFINITY

cnp.import_array()

cdef enum:
    MAX_NX = 8

cdef enum:
    DOUBLE_INTEGRATOR = 0
    PENDULUM = 1
    CARTPOLE = 2
    CAR2D = 3


cdef inline void _deriv(int model, const double* x, const double* u,
                        const double* p, double* out) noexcept nogil:
    cdef double s, c, total, temp, th_acc
    if model == DOUBLE_INTEGRATOR:
        out[0] = x[2]
        out[1] = x[3]
        out[2] = u[0]
        out[3] = u[1]
    elif model == PENDULUM:
        out[0] = x[1]
        out[1] = (p[0] / p[1]) * sin(x[0]) + u[0] / (p[2] * p[1] * p[1])
    elif model == CARTPOLE:
        total = p[1] + p[2]
        s = sin(x[1])
        c = cos(x[1])
        temp = (u[0] + p[2] * p[3] * x[3] * x[3] * s) / total
        th_acc = (p[0] * s - c * temp) / (p[3] * (4.0 / 3.0 - p[2] * c * c / total))
        out[0] = x[2]
        out[1] = x[3]
        out[2] = temp - p[2] * p[3] * th_acc * c / total
        out[3] = th_acc
    else:
        out[0] = x[3] * cos(x[2])
        out[1] = x[3] * sin(x[2])
        out[2] = x[3] / p[0] * tan(x[4])
        out[3] = u[0]
        out[4] = u[1]


cdef inline void _clamp(int model, double* x, const double* p) noexcept nogil:
    if model == CAR2D:
        x[3] = fmin(fmax(x[3], -p[1]), p[1])
        x[4] = fmin(fmax(x[4], -p[2]), p[2])


def rollout_batch(int model_id, const double[::1] params, const double[::1] x0,
                  const double[:, :, ::1] controls, double dt, int integrator):
    cdef Py_ssize_t n_batch = controls.shape[0]
    cdef Py_ssize_t horizon = controls.shape[1]
    cdef Py_ssize_t nx = x0.shape[0]
    cdef Py_ssize_t b, t, j
    if nx > MAX_NX:
        raise ValueError("state dimension too large for compiled kernel")
    if model_id < 0 or model_id > 3:
        raise ValueError(f"unknown model id {model_id}")
    out_arr = np.empty((n_batch, horizon, nx), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef double x[MAX_NX]
    cdef double tmp[MAX_NX]
    cdef double k1[MAX_NX]
    cdef double k2[MAX_NX]
    cdef double k3[MAX_NX]
    cdef double k4[MAX_NX]
    cdef const double* p = &params[0] if params.shape[0] > 0 else NULL
    cdef const double* u
    cdef double half = 0.5 * dt
    cdef double sixth = dt / 6.0
    with nogil:
        for b in range(n_batch):
            for j in range(nx):
                x[j] = x0[j]
            for t in range(horizon):
                u = &controls[b, t, 0]
                if integrator == 0:
                    _deriv(model_id, x, u, p, k1)
                    for j in range(nx):
                        x[j] = x[j] + dt * k1[j]
                else:
                    _deriv(model_id, x, u, p, k1)
                    for j in range(nx):
                        tmp[j] = x[j] + half * k1[j]
                    _deriv(model_id, tmp, u, p, k2)
                    for j in range(nx):
                        tmp[j] = x[j] + half * k2[j]
                    _deriv(model_id, tmp, u, p, k3)
                    for j in range(nx):
                        tmp[j] = x[j] + dt * k3[j]
                    _deriv(model_id, tmp, u, p, k4)
                    for j in range(nx):
                        x[j] = x[j] + sixth * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
                _clamp(model_id, x, p)
                for j in range(nx):
                    out[b, t, j] = x[j]
    return out_arr


def weighted_mean(const double[:, ::1] ys, const double[::1] log_w):
    cdef Py_ssize_t n = ys.shape[0]
    cdef Py_ssize_t d = ys.shape[1]
    cdef Py_ssize_t k, j
    cdef double m = -INFINITY
    cdef double total = 0.0
    cdef double sq = 0.0
    cdef double wk
    w_arr = np.empty(n, dtype=np.float64)
    mean_arr = np.zeros(d, dtype=np.float64)
    cdef double[::1] w = w_arr
    cdef double[::1] mean = mean_arr
    with nogil:
        for k in range(n):
            if log_w[k] > m:
                m = log_w[k]
        for k in range(n):
            w[k] = exp(log_w[k] - m)
            total += w[k]
        for k in range(n):
            wk = w[k] / total
            w[k] = wk
            sq += wk * wk
            if wk != 0.0:
                for j in range(d):
                    mean[j] += wk * ys[k, j]
    return mean_arr, 1.0 / sq
