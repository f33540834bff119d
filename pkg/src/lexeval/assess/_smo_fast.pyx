# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled SMO loop for the epsilon-SVR dual.

Same algorithm and stopping rule as ``_smo_py.solve``; see that module for
the formulation.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()

cdef double TAU = 1e-12


def solve(double[:, ::1] K, double[::1] y, double epsilon, double C,
          double tol, long max_iter):
    cdef Py_ssize_t n = K.shape[0]
    cdef Py_ssize_t m = 2 * n
    cdef cnp.ndarray[cnp.float64_t, ndim=1] a_arr = np.zeros(m)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] G_arr = np.empty(m)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] s_arr = np.empty(m)
    cdef double[::1] a = a_arr
    cdef double[::1] G = G_arr
    cdef double[::1] s = s_arr
    cdef Py_ssize_t t, i, j, ii, jj
    cdef long it = 0
    cdef bint converged = False
    cdef double Gmax, Gmax2, grad_diff, quad, obj, obj_min, Qij
    cdef double delta, diff, total, old_ai, old_aj, dai, daj, yG
    cdef double ub, lb, sum_free, rho
    cdef long nr_free

    for t in range(n):
        s[t] = 1.0
        s[t + n] = -1.0
        G[t] = epsilon - y[t]
        G[t + n] = epsilon + y[t]

    while it < max_iter:
        Gmax = -INFINITY
        i = -1
        for t in range(m):
            if s[t] > 0:
                if a[t] < C and -G[t] >= Gmax:
                    Gmax = -G[t]
                    i = t
            else:
                if a[t] > 0 and G[t] >= Gmax:
                    Gmax = G[t]
                    i = t
        Gmax2 = -INFINITY
        j = -1
        obj_min = INFINITY
        if i >= 0:
            ii = i % n
            for t in range(m):
                jj = t % n
                if s[t] > 0:
                    if a[t] > 0:
                        grad_diff = Gmax + G[t]
                        if G[t] >= Gmax2:
                            Gmax2 = G[t]
                        if grad_diff > 0:
                            quad = K[ii, ii] + K[jj, jj] - 2.0 * K[ii, jj]
                            if quad <= 0:
                                quad = TAU
                            obj = -(grad_diff * grad_diff) / quad
                            if obj <= obj_min:
                                j = t
                                obj_min = obj
                else:
                    if a[t] < C:
                        grad_diff = Gmax - G[t]
                        if -G[t] >= Gmax2:
                            Gmax2 = -G[t]
                        if grad_diff > 0:
                            quad = K[ii, ii] + K[jj, jj] - 2.0 * K[ii, jj]
                            if quad <= 0:
                                quad = TAU
                            obj = -(grad_diff * grad_diff) / quad
                            if obj <= obj_min:
                                j = t
                                obj_min = obj
        if i < 0 or j < 0 or Gmax + Gmax2 < tol:
            converged = True
            break
        it += 1

        ii = i % n
        jj = j % n
        Qij = s[i] * s[j] * K[ii, jj]
        old_ai = a[i]
        old_aj = a[j]
        if s[i] != s[j]:
            quad = K[ii, ii] + K[jj, jj] + 2.0 * Qij
            if quad <= 0:
                quad = TAU
            delta = (-G[i] - G[j]) / quad
            diff = a[i] - a[j]
            a[i] += delta
            a[j] += delta
            if diff > 0:
                if a[j] < 0:
                    a[j] = 0
                    a[i] = diff
            else:
                if a[i] < 0:
                    a[i] = 0
                    a[j] = -diff
            if diff > 0:
                if a[i] > C:
                    a[i] = C
                    a[j] = C - diff
            else:
                if a[j] > C:
                    a[j] = C
                    a[i] = C + diff
        else:
            quad = K[ii, ii] + K[jj, jj] - 2.0 * Qij
            if quad <= 0:
                quad = TAU
            delta = (G[i] - G[j]) / quad
            total = a[i] + a[j]
            a[i] -= delta
            a[j] += delta
            if total > C:
                if a[i] > C:
                    a[i] = C
                    a[j] = total - C
            else:
                if a[j] < 0:
                    a[j] = 0
                    a[i] = total
            if total > C:
                if a[j] > C:
                    a[j] = C
                    a[i] = total - C
            else:
                if a[i] < 0:
                    a[i] = 0
                    a[j] = total

        dai = a[i] - old_ai
        daj = a[j] - old_aj
        for t in range(m):
            G[t] += s[t] * (s[i] * K[t % n, ii] * dai + s[j] * K[t % n, jj] * daj)

    ub = INFINITY
    lb = -INFINITY
    nr_free = 0
    sum_free = 0.0
    for t in range(m):
        yG = s[t] * G[t]
        if a[t] >= C:
            if s[t] < 0:
                ub = min(ub, yG)
            else:
                lb = max(lb, yG)
        elif a[t] <= 0:
            if s[t] > 0:
                ub = min(ub, yG)
            else:
                lb = max(lb, yG)
        else:
            nr_free += 1
            sum_free += yG
    if nr_free > 0:
        rho = sum_free / nr_free
    else:
        rho = (ub + lb) / 2.0

    beta = a_arr[:n] - a_arr[n:]
    return beta, rho, it, converged
