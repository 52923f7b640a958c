"""Compiled per-pair training loop.

One epoch of streamed alternating minimization: for each pair (in the given
order) run the inner coefficient iteration against the current basis, then
take a single-pair basis gradient step and re-cap column norms.  The basis
is updated in place.  Everything random (visit order, coefficient starts)
is drawn by the caller so the kernel stays deterministic.
"""

import math

import numpy as np
from numba import njit

VARIANT_SG = 0
VARIANT_EG = 1
VARIANT_EG_APPROX = 2


@njit(cache=True)
def fold_in_kernel(U, z, phi, w, mu, variant, max_inner, inner_tol):
    """Inner coefficient iteration for one pair; w is modified in place."""
    N, K = U.shape
    b = np.zeros(K)
    G = np.zeros((K, K))
    for k in range(K):
        s = 0.0
        for n in range(N):
            s += U[n, k] * z[n]
        b[k] = s
    for k in range(K):
        for l in range(k, K):
            s = 0.0
            for n in range(N):
                s += U[n, k] * U[n, l]
            G[k, l] = s
            G[l, k] = s
    zz = 0.0
    for n in range(N):
        zz += z[n] * z[n]

    # objective of the start point
    prev = 0.0
    for k in range(K):
        gw = 0.0
        for l in range(K):
            gw += G[k, l] * w[l]
        prev += w[k] * gw - 2.0 * b[k] * w[k]
    prev = phi * (zz + prev)

    g = np.zeros(K)
    for _ in range(max_inner):
        for k in range(K):
            gw = 0.0
            for l in range(K):
                gw += G[k, l] * w[l]
            g[k] = 2.0 * phi * (gw - b[k])
        if variant == VARIANT_SG:
            total = 0.0
            for k in range(K):
                wk = w[k] - mu * g[k]
                if wk < 0.0:
                    wk = 0.0
                w[k] = wk
                total += wk
            if total <= 0.0:
                for k in range(K):
                    w[k] = 1.0 / K
            else:
                for k in range(K):
                    w[k] /= total
        elif variant == VARIANT_EG:
            total = 0.0
            for k in range(K):
                w[k] = w[k] * math.exp(-mu * g[k])
                total += w[k]
            for k in range(K):
                w[k] /= total
        else:  # VARIANT_EG_APPROX
            # parameterize by zhat = U w: d/dzhat = -2 phi (z - zhat)
            rU = np.zeros(K)
            rz = 0.0
            for n in range(N):
                zh = 0.0
                for k in range(K):
                    zh += U[n, k] * w[k]
                r = z[n] - zh
                rz += r * zh
                for k in range(K):
                    rU[k] += r * U[n, k]
            total = 0.0
            for k in range(K):
                wk = w[k] * (1.0 + 2.0 * mu * phi * (rU[k] - rz))
                if wk < 1e-12:
                    wk = 1e-12
                w[k] = wk
                total += wk
            for k in range(K):
                w[k] /= total
        obj = 0.0
        for k in range(K):
            gw = 0.0
            for l in range(K):
                gw += G[k, l] * w[l]
            obj += w[k] * gw - 2.0 * b[k] * w[k]
        obj = phi * (zz + obj)
        ap = abs(prev)
        if ap < 1e-30:
            ap = 1e-30
        if abs(prev - obj) <= inner_tol * ap:
            break
        prev = obj


@njit(cache=True)
def stream_epoch(U, Z, phi, W_init, order, mu, cap, variant, max_inner, inner_tol):
    N, K = U.shape
    for oi in range(order.shape[0]):
        j = order[oi]
        z = Z[j]
        f = phi[j]
        w = W_init[j]
        fold_in_kernel(U, z, f, w, mu, variant, max_inner, inner_tol)
        # single-pair basis step: u_k += 2 mu f (z - U w) w_k, then re-cap
        for n in range(N):
            zh = 0.0
            for k in range(K):
                zh += U[n, k] * w[k]
            r = 2.0 * mu * f * (z[n] - zh)
            for k in range(K):
                U[n, k] += r * w[k]
        for k in range(K):
            nrm = 0.0
            for n in range(N):
                nrm += U[n, k] * U[n, k]
            nrm = math.sqrt(nrm)
            if nrm > cap:
                scale = cap / nrm
                for n in range(N):
                    U[n, k] *= scale
