"""Pure-Python reference implementations of the hot-loop kernels.

The Cython module ``relsync._kernels`` mirrors these functions operation for
operation; given the same inputs and RNG both backends produce bit-identical
results.  Selection happens in :mod:`relsync._backends`.
"""

from __future__ import annotations

import math

BACKEND_NAME = "python"


def update_basic_estimates(x_hat, self_weights, indptr, indices, weights, zeta, out):
    """One synchronous update of the basic-node estimates.

    For basic node u the new estimate is the self-weighted average of its own
    estimate and each neighbor's estimate shifted by the shared relative
    measurement; a node with no neighbors keeps its estimate.

    Arrays describe the current graph in CSR-like form over basic rows:
    ``indices[indptr[u]:indptr[u+1]]`` are u's neighbors (0-based), ``weights``
    the weights u applies to them, ``zeta`` the measurements aligned the same
    way.  ``out`` receives the new basic estimates.
    """
    nb = len(self_weights)
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
            num += w * (x_hat[indices[j]] + zeta[j])
            den += w
        out[u] = num / den
    return out


def rwp_advance(pos, dest, speed, pause_left, moving, dt, t_p, v_min, v_max,
                width, height, rng):
    """Advance every random-waypoint node by one tick of dt seconds (in place).

    A node alternates pausing and moving at constant speed toward a uniformly
    drawn destination; whatever remains of the tick after a pause expires or a
    waypoint is reached is spent on the next leg.  Draw order per transition:
    destination x, destination y, speed.
    """
    n = pos.shape[0]
    for i in range(n):
        budget = dt
        while budget > 0.0:
            if not moving[i]:
                if pause_left[i] > budget:
                    pause_left[i] -= budget
                    budget = 0.0
                else:
                    budget -= pause_left[i]
                    pause_left[i] = 0.0
                    dest[i, 0] = rng.uniform(0.0, width)
                    dest[i, 1] = rng.uniform(0.0, height)
                    speed[i] = rng.uniform(v_min, v_max)
                    moving[i] = True
            else:
                dx = dest[i, 0] - pos[i, 0]
                dy = dest[i, 1] - pos[i, 1]
                dist = math.sqrt(dx * dx + dy * dy)
                needed = dist / speed[i]
                if needed > budget:
                    frac = speed[i] * budget / dist
                    pos[i, 0] += dx * frac
                    pos[i, 1] += dy * frac
                    budget = 0.0
                else:
                    pos[i, 0] = dest[i, 0]
                    pos[i, 1] = dest[i, 1]
                    budget -= needed
                    moving[i] = False
                    pause_left[i] = t_p
