"""Compiled inner loop for the float64 backend."""

import numpy as np
from numba import njit

# indices into the ``out`` counters array
FIRST_ALARM = 0
LEADER_ALARM = 1
DEGREE_ALARM = 2
CLAIM1_BAD = 3
CLAIM2_BAD = 4


@njit(cache=True)
def advance_float(X, alarm, U, V, DEG, a, b, d, ncols, check, conserve, tol, out):
    """Run rounds ``a..b-1`` of an edge block in place.

    ``X[:, 0]`` is the potential, further columns are value coordinates.
    ``out[FIRST_ALARM]``/``out[LEADER_ALARM]`` receive the first row offset
    (relative to ``a``) at which any node / the leader becomes alarmed, if
    still -1 on entry.  ``conserve`` > 0 asks for the mass check while the
    network is alarm-free.
    """
    n = X.shape[0]
    m = U.shape[1]
    acc = np.empty((n, ncols))
    newalarm = np.empty(n, np.bool_)
    any_alarm = False
    for i in range(n):
        if alarm[i]:
            any_alarm = True
    for row in range(a, b):
        fresh = False
        for i in range(n):
            newalarm[i] = alarm[i]
            if DEG[row, i] >= d and not alarm[i]:
                newalarm[i] = True
                out[DEGREE_ALARM] = 1
                fresh = True
        if any_alarm:
            for j in range(m):
                u = U[row, j]
                if u < 0:
                    continue
                v = V[row, j]
                if alarm[u] and not newalarm[v]:
                    newalarm[v] = True
                    fresh = True
                if alarm[v] and not newalarm[u]:
                    newalarm[u] = True
                    fresh = True
        for i in range(n):
            f = d - DEG[row, i]
            for c in range(ncols):
                acc[i, c] = f * X[i, c]
        for j in range(m):
            u = U[row, j]
            if u < 0:
                continue
            v = V[row, j]
            for c in range(ncols):
                acc[u, c] += X[v, c]
                acc[v, c] += X[u, c]
        for i in range(n):
            if newalarm[i]:
                X[i, 0] = 1.0
            else:
                for c in range(ncols):
                    X[i, c] = acc[i, c] / d
            alarm[i] = newalarm[i]
        if fresh:
            any_alarm = True
            if out[FIRST_ALARM] < 0:
                out[FIRST_ALARM] = row - a
        if alarm[0] and out[LEADER_ALARM] < 0:
            out[LEADER_ALARM] = row - a
        if check:
            total = 0.0
            for i in range(n):
                x = X[i, 0]
                total += x
                if x < -tol or x > 1.0 + tol:
                    out[CLAIM2_BAD] += 1
            if conserve > 0 and not any_alarm and abs(total - conserve) > tol:
                out[CLAIM1_BAD] += 1
    return any_alarm
