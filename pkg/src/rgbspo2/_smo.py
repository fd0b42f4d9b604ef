"""SMO solver for the epsilon-SVR dual, compiled with numba.

The dual is written over 2n variables beta = [alpha, alpha*] with signs
s = [+1]*n + [-1]*n:

    min  1/2 beta' Q beta + p' beta,   Q_ij = s_i s_j K(i mod n, j mod n)
    s.t. s' beta = 0,  0 <= beta <= C,
    p = [eps - y, eps + y].

Working pairs are chosen with second-order information (maximal violating
pair on the first index, largest guaranteed objective decrease on the second).
"""

import numpy as np
from numba import njit

TAU = 1e-12


@njit(cache=True)
def _objective(beta, grad, p):
    return 0.5 * np.sum(beta * (grad + p))


@njit(cache=True)
def solve(K, y, C, eps, tol, max_iter, track, beta0):
    n = y.shape[0]
    m = 2 * n
    beta = np.zeros(m)
    if beta0.shape[0] == m:
        for t in range(m):
            beta[t] = min(beta0[t], C)
    s = np.empty(m)
    p = np.empty(m)
    grad = np.empty(m)
    for t in range(n):
        s[t] = 1.0
        s[t + n] = -1.0
        p[t] = eps - y[t]
        p[t + n] = eps + y[t]
    for t in range(m):
        grad[t] = p[t]
    for u in range(m):
        if beta[u] != 0.0:
            ku = u % n
            for t in range(m):
                grad[t] += s[t] * s[u] * K[t % n, ku] * beta[u]
    history = np.empty(max_iter + 1 if track else 1)
    if track:
        history[0] = _objective(beta, grad, p)
    it = 0
    gap = np.inf
    while it < max_iter:
        # i: maximal -s_t G_t over I_up
        gmax = -np.inf
        i = -1
        for t in range(m):
            if s[t] > 0:
                if beta[t] < C and -grad[t] >= gmax:
                    gmax = -grad[t]
                    i = t
            else:
                if beta[t] > 0 and grad[t] >= gmax:
                    gmax = grad[t]
                    i = t
        gmax2 = -np.inf
        j = -1
        best = np.inf
        if i >= 0:
            ki = i % n
            for t in range(m):
                kt = t % n
                if s[t] > 0:
                    if beta[t] > 0:
                        gd = gmax + grad[t]
                        if grad[t] >= gmax2:
                            gmax2 = grad[t]
                        if gd > 0:
                            quad = K[ki, ki] + K[kt, kt] - 2.0 * K[ki, kt]
                            if quad <= 0:
                                quad = TAU
                            ob = -(gd * gd) / quad
                            if ob <= best:
                                best = ob
                                j = t
                else:
                    if beta[t] < C:
                        gd = gmax - grad[t]
                        if -grad[t] >= gmax2:
                            gmax2 = -grad[t]
                        if gd > 0:
                            quad = K[ki, ki] + K[kt, kt] - 2.0 * K[ki, kt]
                            if quad <= 0:
                                quad = TAU
                            ob = -(gd * gd) / quad
                            if ob <= best:
                                best = ob
                                j = t
        gap = gmax + gmax2
        if i < 0 or j < 0 or gap < tol:
            break
        ki = i % n
        kj = j % n
        qij = s[i] * s[j] * K[ki, kj]
        old_i = beta[i]
        old_j = beta[j]
        if s[i] != s[j]:
            quad = K[ki, ki] + K[kj, kj] + 2.0 * qij
            if quad <= 0:
                quad = TAU
            delta = (-grad[i] - grad[j]) / quad
            diff = beta[i] - beta[j]
            beta[i] += delta
            beta[j] += delta
            if diff > 0:
                if beta[j] < 0:
                    beta[j] = 0.0
                    beta[i] = diff
            else:
                if beta[i] < 0:
                    beta[i] = 0.0
                    beta[j] = -diff
            if diff > 0:
                if beta[i] > C:
                    beta[i] = C
                    beta[j] = C - diff
            else:
                if beta[j] > C:
                    beta[j] = C
                    beta[i] = C + diff
        else:
            quad = K[ki, ki] + K[kj, kj] - 2.0 * qij
            if quad <= 0:
                quad = TAU
            delta = (grad[i] - grad[j]) / quad
            tot = beta[i] + beta[j]
            beta[i] -= delta
            beta[j] += delta
            if tot > C:
                if beta[i] > C:
                    beta[i] = C
                    beta[j] = tot - C
            else:
                if beta[j] < 0:
                    beta[j] = 0.0
                    beta[i] = tot
            if tot > C:
                if beta[j] > C:
                    beta[j] = C
                    beta[i] = tot - C
            else:
                if beta[i] < 0:
                    beta[i] = 0.0
                    beta[j] = tot
        di = beta[i] - old_i
        dj = beta[j] - old_j
        for t in range(m):
            kt = t % n
            grad[t] += s[t] * (s[i] * K[kt, ki] * di + s[j] * K[kt, kj] * dj)
        it += 1
        if track:
            history[it] = _objective(beta, grad, p)

    # bias from free variables, falling back to the midpoint of the feasible range
    ub = np.inf
    lb = -np.inf
    sum_free = 0.0
    n_free = 0
    for t in range(m):
        yg = s[t] * grad[t]
        at_upper = beta[t] >= C
        at_lower = beta[t] <= 0
        if at_upper:
            if s[t] < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif at_lower:
            if s[t] > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            n_free += 1
            sum_free += yg
    if n_free > 0:
        rho = sum_free / n_free
    else:
        rho = 0.5 * (ub + lb)
    coef = beta[:n] - beta[n:]
    obj = _objective(beta, grad, p)
    if track:
        history = history[: it + 1]
    return coef, -rho, it, gap, obj, history, beta


def sq_dist(A, B):
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    d2 = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    np.maximum(d2, 0.0, out=d2)
    return d2


def rbf_kernel(A, B, gamma):
    return np.exp(-gamma * sq_dist(A, B))
