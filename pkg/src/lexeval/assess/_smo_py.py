"""Pure numpy SMO for the epsilon-SVR dual (fallback for ``_smo_fast``).

The dual is written over 2n bounded variables ``a`` with signs ``s``
(+1 for the first n, -1 for the mirrored n)::

    min  0.5 a'Qa + p'a   s.t.  s'a = 0,  0 <= a <= C
    Q[t, u] = s_t s_u K[t mod n, u mod n]
    p[t] = eps - y_t (t < n),  eps + y_(t-n) (t >= n)

Working pairs are chosen by maximal violation for the first index and the
second-order gain for the second. The loop stops when the maximal KKT
violation drops below ``tol``. Dual coefficients are ``a[:n] - a[n:]`` and
the decision function is ``sum_i beta_i K(x_i, x) - rho``.
"""

from __future__ import annotations

import numpy as np

TAU = 1e-12


def solve(K: np.ndarray, y: np.ndarray, epsilon: float, C: float, tol: float, max_iter: int):
    n = K.shape[0]
    s = np.concatenate([np.ones(n), -np.ones(n)])
    a = np.zeros(2 * n)
    G = np.concatenate([epsilon - y, epsilon + y])
    diag = np.diag(K)
    diag2 = np.concatenate([diag, diag])
    pos = s > 0
    it = 0
    converged = False
    while it < max_iter:
        # first index: maximal violating variable
        up_ok = np.where(pos, a < C, a > 0)
        score_i = np.where(pos, -G, G)
        score_i = np.where(up_ok, score_i, -np.inf)
        i = int(np.flatnonzero(score_i == score_i.max())[-1]) if up_ok.any() else -1
        if i < 0:
            converged = True
            break
        Gmax = score_i[i]
        low_ok = np.where(pos, a > 0, a < C)
        score_j = np.where(pos, G, -G)
        cand = np.where(low_ok, score_j, -np.inf)
        Gmax2 = cand.max()
        if not low_ok.any() or Gmax + Gmax2 < tol:
            converged = True
            break
        ii = i % n
        kcol = K[:, ii]
        kcol2 = np.concatenate([kcol, kcol])
        grad_diff = Gmax + score_j
        quad = diag[ii] + diag2 - 2.0 * kcol2
        quad = np.where(quad <= 0, TAU, quad)
        obj = np.where(low_ok & (grad_diff > 0), -(grad_diff**2) / quad, np.inf)
        if not np.isfinite(obj.min()):
            converged = True
            break
        j = int(np.flatnonzero(obj == obj.min())[-1])
        it += 1

        jj = j % n
        Qij = s[i] * s[j] * K[ii, jj]
        old_ai, old_aj = a[i], a[j]
        ai, aj = a[i], a[j]
        if s[i] != s[j]:
            q = diag[ii] + diag[jj] + 2.0 * Qij
            q = q if q > 0 else TAU
            delta = (-G[i] - G[j]) / q
            diff = ai - aj
            ai += delta
            aj += delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0:
                if ai > C:
                    ai, aj = C, C - diff
            elif aj > C:
                aj, ai = C, C + diff
        else:
            q = diag[ii] + diag[jj] - 2.0 * Qij
            q = q if q > 0 else TAU
            delta = (G[i] - G[j]) / q
            total = ai + aj
            ai -= delta
            aj += delta
            if total > C:
                if ai > C:
                    ai, aj = C, total - C
            elif aj < 0:
                aj, ai = 0.0, total
            if total > C:
                if aj > C:
                    aj, ai = C, total - C
            elif ai < 0:
                ai, aj = 0.0, total
        a[i], a[j] = ai, aj
        dai, daj = ai - old_ai, aj - old_aj
        kj = K[:, jj]
        G += s * (s[i] * kcol2 * dai + s[j] * np.concatenate([kj, kj]) * daj)

    yG = s * G
    at_upper = a >= C
    at_lower = a <= 0
    free = ~(at_upper | at_lower)
    if free.any():
        rho = float(yG[free].mean())
    else:
        ub_mask = (at_upper & ~pos) | (at_lower & pos)
        lb_mask = (at_upper & pos) | (at_lower & ~pos)
        ub = yG[ub_mask].min() if ub_mask.any() else np.inf
        lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
        rho = float((ub + lb) / 2.0)
    return a[:n] - a[n:], rho, it, converged
