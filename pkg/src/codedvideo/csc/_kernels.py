"""Fused per-element ADMM updates (numba).

Each kernel makes a single pass over the (K, T, H, W) arrays in C order so
that reductions happen in a fixed order and results are bit-reproducible.
"""

import numba as nb


@nb.njit(cache=True, fastmath=True)
def sparse_updates(u, u_prev, lam2, lam3, w2, w3, rhs, tau1, tau2):
    """Proximal and dual updates for the two L1 splittings.

    Arrays are (K, T, N) with space flattened. Writes w2, w3, the updated
    scaled duals and the u-space part of the next quadratic right-hand side
    ``(w2 - lam2) + grad_t^T (w3 - lam3)``. Returns
    (||u||_1, ||grad_t u||_1, ||u - u_prev||^2, ||u_prev||^2).
    """
    K, T, N = u.shape
    l1 = 0.0
    tv = 0.0
    dnum = 0.0
    dden = 0.0
    for k in range(K):
        for t in range(T):
            a1 = 0.0
            a2 = 0.0
            a3 = 0.0
            a4 = 0.0
            uk = u[k, t]
            upk = u_prev[k, t]
            l2k = lam2[k, t]
            w2k = w2[k, t]
            rk = rhs[k, t]
            for n in range(N):
                ut = uk[n]
                up = upk[n]
                a3 += (ut - up) * (ut - up)
                a4 += up * up
                a1 += abs(ut)
                v = ut + l2k[n]
                w = max(v - tau1, 0.0) + min(v + tau1, 0.0)
                w2k[n] = w
                lam = v - w
                l2k[n] = lam
                rk[n] = w - lam
            if t > 0:
                um = u[k, t - 1]
                l3k = lam3[k, t - 1]
                w3k = w3[k, t - 1]
                rm = rhs[k, t - 1]
                for n in range(N):
                    g = uk[n] - um[n]
                    a2 += abs(g)
                    v3 = g + l3k[n]
                    w = max(v3 - tau2, 0.0) + min(v3 + tau2, 0.0)
                    w3k[n] = w
                    lam = v3 - w
                    l3k[n] = lam
                    c3 = w - lam
                    rk[n] += c3
                    rm[n] -= c3
            l1 += a1
            tv += a2
            dnum += a3
            dden += a4
    return l1, tv, dnum, dden


@nb.njit(cache=True)
def rank_one_solve(R, F1, dhat, dnorm2, mu, proj):
    """Solve ``(conj(a) a^T + mu_t I) x = R + conj(a) F1`` per (t, frequency).

    ``R`` (K, T, H, Wr) holds the transformed u-space right-hand side and is
    overwritten with the solution. ``F1`` (T, H, Wr) is the transformed
    frame-space term, ``a = dhat[:, i, j]``. On return ``proj`` (T, H, Wr)
    holds ``a^T x``, the spectrum of the synthesized frames.
    """
    K, T, H, Wr = R.shape
    proj[...] = 0.0
    for k in range(K):
        for t in range(T):
            for i in range(H):
                for j in range(Wr):
                    a = dhat[k, i, j]
                    r = R[k, t, i, j] + a.conjugate() * F1[t, i, j]
                    R[k, t, i, j] = r
                    proj[t, i, j] += a * r
    for t in range(T):
        m = mu[t]
        for i in range(H):
            for j in range(Wr):
                proj[t, i, j] = proj[t, i, j] / (m * (m + dnorm2[i, j]))
    for k in range(K):
        for t in range(T):
            inv_m = 1.0 / mu[t]
            for i in range(H):
                for j in range(Wr):
                    R[k, t, i, j] = R[k, t, i, j] * inv_m - dhat[k, i, j].conjugate() * proj[t, i, j]
    for t in range(T):
        m = mu[t]
        for i in range(H):
            for j in range(Wr):
                # a^T x = (a^T r) / (m + |a|^2) = coef * m
                proj[t, i, j] = proj[t, i, j] * m
