# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot-loop kernels; mirrors relsync._kernels_py operation for operation."""

from libc.math cimport sqrt

BACKEND_NAME = "compiled"


def update_basic_estimates(double[::1] x_hat, double[::1] self_weights,
                           long long[::1] indptr, long long[::1] indices,
                           double[::1] weights, double[::1] zeta,
                           double[::1] out):
    """One synchronous update of the basic-node estimates (see the Python twin)."""
    cdef Py_ssize_t nb = self_weights.shape[0]
    cdef Py_ssize_t u, j, start, end
    cdef double num, den, w
    for u in range(nb):
        start = indptr[u]
        end = indptr[u + 1]
        if start == end:
            out[u] = x_hat[u]
            continue
        num = self_weights[u] * x_hat[u]
        den = self_weights[u]
        for j in range(start, end):
            w = weights[j]
            num = num + w * (x_hat[indices[j]] + zeta[j])
            den = den + w
        out[u] = num / den
    return out


def rwp_advance(double[:, ::1] pos, double[:, ::1] dest, double[::1] speed,
                double[::1] pause_left, unsigned char[::1] moving,
                double dt, double t_p, double v_min, double v_max,
                double width, double height, object rng):
    """Advance every random-waypoint node by one tick of dt seconds (in place)."""
    cdef Py_ssize_t n = pos.shape[0]
    cdef Py_ssize_t i
    cdef double budget, dx, dy, dist, needed, frac
    for i in range(n):
        budget = dt
        while budget > 0.0:
            if not moving[i]:
                if pause_left[i] > budget:
                    pause_left[i] = pause_left[i] - budget
                    budget = 0.0
                else:
                    budget = budget - pause_left[i]
                    pause_left[i] = 0.0
                    dest[i, 0] = rng.uniform(0.0, width)
                    dest[i, 1] = rng.uniform(0.0, height)
                    speed[i] = rng.uniform(v_min, v_max)
                    moving[i] = True
            else:
                dx = dest[i, 0] - pos[i, 0]
                dy = dest[i, 1] - pos[i, 1]
                dist = sqrt(dx * dx + dy * dy)
                needed = dist / speed[i]
                if needed > budget:
                    frac = speed[i] * budget / dist
                    pos[i, 0] = pos[i, 0] + dx * frac
                    pos[i, 1] = pos[i, 1] + dy * frac
                    budget = 0.0
                else:
                    pos[i, 0] = dest[i, 0]
                    pos[i, 1] = dest[i, 1]
                    budget = budget - needed
                    moving[i] = False
                    pause_left[i] = t_p
