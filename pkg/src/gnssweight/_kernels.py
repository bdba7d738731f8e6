"""Hot numeric kernels.

The damped Gauss-Newton pseudorange solve dominates runtime (the
leave-one-out residual matrix costs N+1 solves per epoch), so the kernel
is numba-compiled by default. Set GNSSWEIGHT_NO_NUMBA=1 to select the
pure-numpy path; both paths share one source function, so results are
identical. ``benchmarks/bench_kernels.py`` compares the two.

Kernel state layout: [x, y, z, b_0 .. b_{K-1}] with clock terms in
meters (c * delta). Parameterizing clocks in meters keeps the normal
matrix condition number near the geometry's true DOP instead of
inflating it by c^2.
"""

import math
import os

import numpy as np

_env = os.environ.get("GNSSWEIGHT_NO_NUMBA", "").strip().lower()
NUMBA_ENABLED = _env not in ("1", "true", "yes")

# Status codes returned by lm_solve.
STATUS_CONVERGED = 0
STATUS_MAX_ITER = 1
STATUS_SINGULAR = 2


def _lm_solve(sat_pos, pr, w, const_idx, n_const, x0,
              max_iter, step_tol, lam0, lam_up, lam_down, cond_limit):
    """Levenberg-Marquardt minimization of sum_i w_i (rho_i - h_i(x))^2.

    Returns (x, iterations, status, cost). Damping multiplies the normal
    matrix diagonal; rejected steps raise it by lam_up, accepted steps
    scale it by lam_down.
    """
    n = pr.shape[0]
    d = 3 + n_const
    x = x0.copy()
    lam = lam0
    status = STATUS_MAX_ITER
    iterations = 0

    r = np.empty(n)
    H = np.zeros((n, d))
    rc = np.empty(n)
    A = np.empty((d, d))
    g = np.empty(d)

    # cost at the starting point
    cost = 0.0
    for i in range(n):
        dx = x[0] - sat_pos[i, 0]
        dy = x[1] - sat_pos[i, 1]
        dz = x[2] - sat_pos[i, 2]
        rng = math.sqrt(dx * dx + dy * dy + dz * dz)
        r[i] = pr[i] - (rng + x[3 + const_idx[i]])
        cost += w[i] * r[i] * r[i]

    for it in range(max_iter):
        iterations = it + 1
        # residuals and Jacobian of h at the current iterate
        for i in range(n):
            dx = x[0] - sat_pos[i, 0]
            dy = x[1] - sat_pos[i, 1]
            dz = x[2] - sat_pos[i, 2]
            rng = math.sqrt(dx * dx + dy * dy + dz * dz)
            if rng < 1e-3:
                rng = 1e-3
            r[i] = pr[i] - (rng + x[3 + const_idx[i]])
            H[i, 0] = dx / rng
            H[i, 1] = dy / rng
            H[i, 2] = dz / rng
            for k in range(n_const):
                H[i, 3 + k] = 0.0
            H[i, 3 + const_idx[i]] = 1.0

        # fixed-order accumulation: zero-weight rows contribute exact zeros,
        # so deleting a row and zeroing its weight give identical problems
        for j in range(d):
            for k in range(j, d):
                acc = 0.0
                for i in range(n):
                    acc += w[i] * H[i, j] * H[i, k]
                A[j, k] = acc
                A[k, j] = acc
            acc = 0.0
            for i in range(n):
                acc += w[i] * H[i, j] * r[i]
            g[j] = acc

        s = np.linalg.svd(A)[1]
        if s[s.shape[0] - 1] <= 0.0 or s[0] / s[s.shape[0] - 1] > cond_limit:
            status = STATUS_SINGULAR
            break

        accepted = False
        step_norm = 0.0
        for _trial in range(64):
            Ad = A.copy()
            for j in range(d):
                diag = A[j, j]
                if diag < 1e-12:
                    diag = 1e-12
                Ad[j, j] += lam * diag
            dxs = np.linalg.solve(Ad, g)
            xc = x + dxs
            cost_c = 0.0
            for i in range(n):
                dx = xc[0] - sat_pos[i, 0]
                dy = xc[1] - sat_pos[i, 1]
                dz = xc[2] - sat_pos[i, 2]
                rng = math.sqrt(dx * dx + dy * dy + dz * dz)
                rc[i] = pr[i] - (rng + xc[3 + const_idx[i]])
                cost_c += w[i] * rc[i] * rc[i]
            if cost_c <= cost:
                x = xc
                cost = cost_c
                lam = lam * lam_down
                if lam < 1e-12:
                    lam = 1e-12
                step_norm = 0.0
                for j in range(d):
                    step_norm += dxs[j] * dxs[j]
                step_norm = math.sqrt(step_norm)
                accepted = True
                break
            lam = lam * lam_up
            if lam > 1e14:
                break

        if not accepted:
            # damping saturated: the iterate is a numerical stationary point
            status = STATUS_CONVERGED
            break
        if step_norm < step_tol:
            status = STATUS_CONVERGED
            break

    if status == STATUS_CONVERGED:
        # Undamped Gauss-Newton polish. The damped loop stops within
        # step_tol of the minimizer; near it the computed cost is flat to
        # rounding (residuals are differences of ~1e7 m quantities, so the
        # cost carries ~1e-8 relative noise) and cannot gate acceptance.
        # The gradient still resolves the offset, so take plain GN steps
        # while the step norm shrinks and stop once it stalls or grows.
        prev2 = 1e300
        for _p in range(10):
            for i in range(n):
                dx = x[0] - sat_pos[i, 0]
                dy = x[1] - sat_pos[i, 1]
                dz = x[2] - sat_pos[i, 2]
                rng = math.sqrt(dx * dx + dy * dy + dz * dz)
                if rng < 1e-3:
                    rng = 1e-3
                r[i] = pr[i] - (rng + x[3 + const_idx[i]])
                H[i, 0] = dx / rng
                H[i, 1] = dy / rng
                H[i, 2] = dz / rng
                for k in range(n_const):
                    H[i, 3 + k] = 0.0
                H[i, 3 + const_idx[i]] = 1.0
            for j in range(d):
                for k in range(j, d):
                    acc = 0.0
                    for i in range(n):
                        acc += w[i] * H[i, j] * H[i, k]
                    A[j, k] = acc
                    A[k, j] = acc
                acc = 0.0
                for i in range(n):
                    acc += w[i] * H[i, j] * r[i]
                g[j] = acc
            dxs = np.linalg.solve(A, g)
            step2 = 0.0
            for j in range(d):
                step2 += dxs[j] * dxs[j]
            if step2 > 1.0 or step2 > prev2:
                break
            prev2 = step2
            for j in range(d):
                x[j] = x[j] + dxs[j]
            if step2 < 1e-20:
                break
        # cost at the polished iterate
        cost = 0.0
        for i in range(n):
            dx = x[0] - sat_pos[i, 0]
            dy = x[1] - sat_pos[i, 1]
            dz = x[2] - sat_pos[i, 2]
            rng = math.sqrt(dx * dx + dy * dy + dz * dz)
            r[i] = pr[i] - (rng + x[3 + const_idx[i]])
            cost += w[i] * r[i] * r[i]

    return x, iterations, status, cost


lm_solve_python = _lm_solve

if NUMBA_ENABLED:
    try:
        from numba import njit

        lm_solve = njit(cache=True, fastmath=False)(_lm_solve)
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False
        lm_solve = _lm_solve
else:
    lm_solve = _lm_solve
