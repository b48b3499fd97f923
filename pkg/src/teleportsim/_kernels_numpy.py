"""Pure-numpy fallback for the simulation loops.

Same contracts as _kernels_numba: identical elementwise update order
(parameter trajectories agree bit for bit with the JIT path), metrics
may differ in the last ulps since numpy reduces in a different order.
"""

from __future__ import annotations

import numpy as np

DIVERGENCE_THRESHOLD = 1e12


def assign_rounds(u_sel: np.ndarray, u_perm: np.ndarray, n: int) -> np.ndarray:
    """Active hosts per round from pregenerated uniforms; see numba twin."""
    C, k = u_sel.shape
    hosts = np.empty((C, k), np.int64)
    for t in range(C):
        pool = list(range(n))
        row_sel = u_sel[t]
        row_perm = u_perm[t]
        for j in range(k):
            r = j + int(row_sel[j] * (n - j))
            if r >= n:
                r = n - 1
            pool[j], pool[r] = pool[r], pool[j]
        for j in range(k):
            r = j + int(row_perm[j] * (k - j))
            if r >= k:
                r = k - 1
            pool[j], pool[r] = pool[r], pool[j]
        hosts[t] = pool[:k]
    return hosts


def column_metrics(Z, x_star, h_mean):
    """(mean squared distance to optimum, consensus error, ||grad f(mean)||^2)."""
    k = Z.shape[1]
    diff = Z - x_star[:, None]
    err = float(np.einsum("jm,jm->", diff, diff)) / k
    zbar = Z.mean(axis=1)
    dev = Z - zbar[:, None]
    cons = float(np.einsum("jm,jm->", dev, dev)) / k
    gb = zbar - x_star
    gn = h_mean * h_mean * float(gb @ gb)
    return err, cons, gn


def _check_row(e, c, g, target):
    if not (np.isfinite(e) and np.isfinite(c) and np.isfinite(g)):
        return 2
    if e > DIVERGENCE_THRESHOLD:
        return 2
    if target >= 0.0 and e <= target:
        return 1
    return 0


def _record(Z, x_star, h_mean, err, cons, gnorm, row, target):
    e, c, g = column_metrics(Z, x_star, h_mean)
    err[row] = e
    cons[row] = c
    gnorm[row] = g
    return _check_row(e, c, g, target)


def _noise_columns(noise, cursor, hrow, d):
    bases = cursor[hrow]
    idx = bases[None, :] + np.arange(d)[:, None]
    cursor[hrow] += d
    return noise[idx]


def teleport_rounds(
    Z, WT, curv, B, sd, noise, cursor, hosts, eta, x_star, h_mean,
    err, cons, gnorm, row0, target,
):
    C, k = hosts.shape
    d = Z.shape[0]
    use_noise = sd > 0.0
    Znew = np.empty_like(Z)
    for t in range(C):
        hrow = hosts[t]
        G = curv[hrow][None, :] * (Z - B[:, hrow])
        if use_noise:
            G = G + sd * _noise_columns(noise, cursor, hrow, d)
        Y = Z - eta * G
        np.dot(Y, WT, Znew)
        Z[:, :] = Znew
        status = _record(Z, x_star, h_mean, err, cons, gnorm, row0 + t, target)
        if status != 0:
            return status, t + 1
    return 0, C


def teleport_overlap_rounds(
    Z, WT, curv, B, sd, noise, cursor, hosts_cur, next_hosts, eta, x_star,
    h_mean, err, cons, gnorm, row0, target,
):
    C, k = next_hosts.shape
    d = Z.shape[0]
    use_noise = sd > 0.0
    Znew = np.empty_like(Z)
    for t in range(C):
        G = curv[hosts_cur][None, :] * (Z - B[:, hosts_cur])
        if use_noise:
            G = G + sd * _noise_columns(noise, cursor, hosts_cur, d)
        Y = Z - eta * G
        np.dot(Y, WT, Znew)
        Z[:, :] = Znew
        hosts_cur[:] = next_hosts[t]
        status = _record(Z, x_star, h_mean, err, cons, gnorm, row0 + t, target)
        if status != 0:
            return status, t + 1
    return 0, C


def dsgd_rounds(
    Z, WT, curv, B, sd, noise, eta, x_star, h_mean,
    err, cons, gnorm, row0, target, C,
):
    use_noise = sd > 0.0
    Znew = np.empty_like(Z)
    for t in range(C):
        G = curv[None, :] * (Z - B)
        if use_noise:
            G = G + sd * noise[:, t, :].T
        Y = Z - eta * G
        np.dot(Y, WT, Znew)
        Z[:, :] = Znew
        status = _record(Z, x_star, h_mean, err, cons, gnorm, row0 + t, target)
        if status != 0:
            return status, t + 1
    return 0, C


def client_rounds(
    Z, W, curv, B, sd, noise, cursor, hosts, eta, x_star, h_mean,
    err, cons, gnorm, row0, target,
):
    C, k = hosts.shape
    d, n = Z.shape
    use_noise = sd > 0.0
    Znew = np.empty_like(Z)
    diag_w = W.diagonal().copy()
    for t in range(C):
        hrow = hosts[t]
        active = np.zeros(n, bool)
        active[hrow] = True
        both = active[:, None] & active[None, :]
        keep = np.where(both, W, 0.0)
        np.fill_diagonal(keep, 0.0)
        dropped = np.where(both, 0.0, W)
        np.fill_diagonal(dropped, 0.0)
        # left-to-right scan, not pairwise sum: the JIT twin accumulates
        # sequentially and the self-loop mass must match it bit for bit
        lost = np.add.accumulate(dropped, axis=1)[:, -1]
        M = keep.T.copy()
        M[np.arange(n), np.arange(n)] = np.where(active, diag_w + lost, 1.0)
        Y = Z.copy()
        G = curv[hrow][None, :] * (Z[:, hrow] - B[:, hrow])
        if use_noise:
            G = G + sd * _noise_columns(noise, cursor, hrow, d)
        Y[:, hrow] = Z[:, hrow] - eta * G
        np.dot(Y, M, Znew)
        Z[:, :] = Znew
        status = _record(Z, x_star, h_mean, err, cons, gnorm, row0 + t, target)
        if status != 0:
            return status, t + 1
    return 0, C
