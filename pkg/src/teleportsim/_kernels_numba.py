"""Hot simulation loops, JIT-compiled with numba.

Mirrors _kernels_numpy function for function.  Elementwise update
expressions are written in the same order as the vectorized fallback so
parameter trajectories agree bit for bit across backends; metric sums
may differ in the last few ulps because summation order differs.

Status codes returned by the round loops:
  0 chunk completed, 1 target error reached, 2 diverged.
"""

from __future__ import annotations

import numpy as np
from numba import njit

DIVERGENCE_THRESHOLD = 1e12


@njit(cache=True)
def assign_rounds(u_sel: np.ndarray, u_perm: np.ndarray, n: int) -> np.ndarray:
    """Active hosts per round from pregenerated uniforms.

    Round t picks k of n nodes by partial Fisher-Yates on u_sel[t] and
    shuffles them into token order with u_perm[t].  Returns 0-based node
    indices of shape (C, k); entry [t, m] hosts token m in round t.
    """
    C, k = u_sel.shape
    hosts = np.empty((C, k), np.int64)
    pool = np.empty(n, np.int64)
    for t in range(C):
        for i in range(n):
            pool[i] = i
        for j in range(k):
            r = j + int(u_sel[t, j] * (n - j))
            if r >= n:
                r = n - 1
            tmp = pool[j]
            pool[j] = pool[r]
            pool[r] = tmp
        for j in range(k):
            r = j + int(u_perm[t, j] * (k - j))
            if r >= k:
                r = k - 1
            tmp = pool[j]
            pool[j] = pool[r]
            pool[r] = tmp
        for m in range(k):
            hosts[t, m] = pool[m]
    return hosts


@njit(cache=True)
def column_metrics(Z, x_star, h_mean):
    """(mean squared distance to optimum, consensus error, ||grad f(mean)||^2)."""
    d, k = Z.shape
    err = 0.0
    for m in range(k):
        for j in range(d):
            diff = Z[j, m] - x_star[j]
            err += diff * diff
    err /= k
    cons = 0.0
    gn = 0.0
    for j in range(d):
        s = 0.0
        for m in range(k):
            s += Z[j, m]
        zbar = s / k
        dev = 0.0
        for m in range(k):
            dd = Z[j, m] - zbar
            dev += dd * dd
        cons += dev
        gb = zbar - x_star[j]
        gn += gb * gb
    cons /= k
    gn *= h_mean * h_mean
    return err, cons, gn


@njit(cache=True)
def _check_row(e, c, g, target):
    if not (np.isfinite(e) and np.isfinite(c) and np.isfinite(g)):
        return 2
    if e > DIVERGENCE_THRESHOLD:
        return 2
    if target >= 0.0 and e <= target:
        return 1
    return 0


@njit(cache=True)
def teleport_rounds(
    Z, WT, curv, B, sd, noise, cursor, hosts, eta, x_star, h_mean,
    err, cons, gnorm, row0, target,
):
    """Token-matrix rounds: sample -> local step -> gossip.

    Z has one column per token.  hosts[t, m] supplies the node whose
    gradient and noise drive token m in round t; noise is consumed from
    per-node segments tracked by cursor.  Metrics land in rows
    row0 + t of the output arrays.
    """
    C, k = hosts.shape
    d = Z.shape[0]
    use_noise = sd > 0.0
    Y = np.empty_like(Z)
    Znew = np.empty_like(Z)
    for t in range(C):
        for m in range(k):
            h = hosts[t, m]
            cv = curv[h]
            if use_noise:
                base = cursor[h]
                cursor[h] = base + d
                for j in range(d):
                    g = cv * (Z[j, m] - B[j, h])
                    g = g + sd * noise[base + j]
                    Y[j, m] = Z[j, m] - eta * g
            else:
                for j in range(d):
                    g = cv * (Z[j, m] - B[j, h])
                    Y[j, m] = Z[j, m] - eta * g
        np.dot(Y, WT, Znew)
        Z[:, :] = Znew
        e, c, g = column_metrics(Z, x_star, h_mean)
        row = row0 + t
        err[row] = e
        cons[row] = c
        gnorm[row] = g
        status = _check_row(e, c, g, target)
        if status != 0:
            return status, t + 1
    return 0, C


@njit(cache=True)
def teleport_overlap_rounds(
    Z, WT, curv, B, sd, noise, cursor, hosts_cur, next_hosts, eta, x_star,
    h_mean, err, cons, gnorm, row0, target,
):
    """Communication-overlap variant of teleport_rounds.

    The active set of the following round is already known when a round
    runs, so the mixed columns are handed straight to their next hosts:
    gradients use hosts_cur, then ownership advances to next_hosts[t].
    hosts_cur is updated in place.
    """
    C, k = next_hosts.shape
    d = Z.shape[0]
    use_noise = sd > 0.0
    Y = np.empty_like(Z)
    Znew = np.empty_like(Z)
    for t in range(C):
        for m in range(k):
            h = hosts_cur[m]
            cv = curv[h]
            if use_noise:
                base = cursor[h]
                cursor[h] = base + d
                for j in range(d):
                    g = cv * (Z[j, m] - B[j, h])
                    g = g + sd * noise[base + j]
                    Y[j, m] = Z[j, m] - eta * g
            else:
                for j in range(d):
                    g = cv * (Z[j, m] - B[j, h])
                    Y[j, m] = Z[j, m] - eta * g
        np.dot(Y, WT, Znew)
        Z[:, :] = Znew
        for m in range(k):
            hosts_cur[m] = next_hosts[t, m]
        e, c, g = column_metrics(Z, x_star, h_mean)
        row = row0 + t
        err[row] = e
        cons[row] = c
        gnorm[row] = g
        status = _check_row(e, c, g, target)
        if status != 0:
            return status, t + 1
    return 0, C


@njit(cache=True)
def dsgd_rounds(
    Z, WT, curv, B, sd, noise, eta, x_star, h_mean,
    err, cons, gnorm, row0, target, C,
):
    """Full-participation rounds: every node steps, then the n-node gossip.

    noise has shape (n, C, d) with node-major layout; row t of node i is
    that node's noise vector for local round t.
    """
    d, n = Z.shape
    use_noise = sd > 0.0
    Y = np.empty_like(Z)
    Znew = np.empty_like(Z)
    for t in range(C):
        for i in range(n):
            cv = curv[i]
            if use_noise:
                for j in range(d):
                    g = cv * (Z[j, i] - B[j, i])
                    g = g + sd * noise[i, t, j]
                    Y[j, i] = Z[j, i] - eta * g
            else:
                for j in range(d):
                    g = cv * (Z[j, i] - B[j, i])
                    Y[j, i] = Z[j, i] - eta * g
        np.dot(Y, WT, Znew)
        Z[:, :] = Znew
        e, c, g = column_metrics(Z, x_star, h_mean)
        row = row0 + t
        err[row] = e
        cons[row] = c
        gnorm[row] = g
        status = _check_row(e, c, g, target)
        if status != 0:
            return status, t + 1
    return 0, C


@njit(cache=True)
def client_rounds(
    Z, W, curv, B, sd, noise, cursor, hosts, eta, x_star, h_mean,
    err, cons, gnorm, row0, target,
):
    """Client-sampling rounds on the full n-node graph.

    Sampled nodes take an SGD step; an edge mixes only when both of its
    endpoints were sampled, and every dropped weight is added to the
    self loop.  When all nodes are sampled the effective matrix equals W
    entry for entry, so k = n reproduces full-participation runs exactly.
    """
    C, k = hosts.shape
    d, n = Z.shape
    use_noise = sd > 0.0
    Y = np.empty_like(Z)
    Znew = np.empty_like(Z)
    M = np.empty((n, n))
    active = np.zeros(n, np.bool_)
    for t in range(C):
        for i in range(n):
            active[i] = False
        for m in range(k):
            active[hosts[t, m]] = True
        for i in range(n):
            if active[i]:
                lost = 0.0
                for j in range(n):
                    if j != i:
                        if active[j]:
                            M[j, i] = W[i, j]
                        else:
                            M[j, i] = 0.0
                            lost += W[i, j]
                M[i, i] = W[i, i] + lost
            else:
                for j in range(n):
                    M[j, i] = 0.0
                M[i, i] = 1.0
        for i in range(n):
            for j in range(d):
                Y[j, i] = Z[j, i]
        for m in range(k):
            h = hosts[t, m]
            cv = curv[h]
            if use_noise:
                base = cursor[h]
                cursor[h] = base + d
                for j in range(d):
                    g = cv * (Z[j, h] - B[j, h])
                    g = g + sd * noise[base + j]
                    Y[j, h] = Z[j, h] - eta * g
            else:
                for j in range(d):
                    g = cv * (Z[j, h] - B[j, h])
                    Y[j, h] = Z[j, h] - eta * g
        np.dot(Y, M, Znew)
        Z[:, :] = Znew
        e, c, g = column_metrics(Z, x_star, h_mean)
        row = row0 + t
        err[row] = e
        cons[row] = c
        gnorm[row] = g
        status = _check_row(e, c, g, target)
        if status != 0:
            return status, t + 1
    return 0, C
