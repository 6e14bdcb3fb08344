"""Independent reference computations used to check the package numerics.

None of these call into uavsec; they are deliberately slow and simple.
"""

import itertools

import numpy as np
import scipy.linalg
import scipy.optimize


def expm_series(A, terms=30):
    """Truncated Taylor series of e^A."""
    out = np.eye(A.shape[0])
    term = np.eye(A.shape[0])
    for k in range(1, terms + 1):
        term = term @ A / k
        out = out + term
    return out


def simpson_zoh(A, B, Ts, intervals=200):
    """Bd = int_0^Ts e^{A s} ds B by composite Simpson with scipy's expm."""
    h = Ts / intervals
    acc = np.zeros_like(B, dtype=float)
    for i in range(intervals + 1):
        w = 1 if i in (0, intervals) else (4 if i % 2 else 2)
        acc = acc + w * scipy.linalg.expm(A * i * h) @ B
    return acc * h / 3.0


def power_iteration_radius(M, iters=4000, seed=0):
    """Spectral radius estimate from the one-step growth of a power-iterated vector."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(M.shape[0])
    v /= np.linalg.norm(v)
    nv = 0.0
    for _ in range(iters):
        v = M @ v
        nv = np.linalg.norm(v)
        if nv == 0.0:
            return 0.0
        v /= nv
    return float(nv)


def rank_scan_zeros(P_of, r, lo, hi, points=100_000, tol=1e-8):
    """Locate real rank drops of a pencil by scanning sigma_r / sigma_1 on a grid.

    Every local minimum of the sampled ratio is polished with a bounded scalar
    minimization; those that reach below `tol` are reported.
    """
    grid = np.linspace(lo, hi, points)
    ratio = np.empty(points)
    for k, lam in enumerate(grid):
        s = np.linalg.svd(P_of(lam), compute_uv=False)
        ratio[k] = s[r - 1] / s[0]
    zeros = []
    step = grid[1] - grid[0]
    for k in range(1, points - 1):
        if ratio[k] <= ratio[k - 1] and ratio[k] <= ratio[k + 1]:
            res = scipy.optimize.minimize_scalar(
                lambda t: np.linalg.svd(P_of(t), compute_uv=False)[r - 1] / np.linalg.svd(P_of(t), compute_uv=False)[0],
                bounds=(grid[k] - step, grid[k] + step),
                method="bounded",
                options={"xatol": 1e-13},
            )
            if res.fun < tol:
                zeros.append(float(res.x))
    return zeros, grid, ratio


def brute_force_subset(A, edges, i, include_self=False):
    """A within the neighborhood of i, by enumerating every subset of the neighborhood."""
    hood = set()
    for a, b in edges:
        if a == i:
            hood.add(b)
        elif b == i:
            hood.add(a)
    if include_self:
        hood.add(i)
    target = frozenset(A)
    for size in range(len(hood) + 1):
        for sub in itertools.combinations(sorted(hood), size):
            if frozenset(sub) == target:
                return True
    return False


def shadow_quadrature(A, B, C, u_of_step, Ts, k, sub=8):
    """C x_s(k Ts) for a ZOH-held input: sum over held intervals of Simpson integrals."""
    t_end = k * Ts
    x = np.zeros(A.shape[0])
    for i in range(k):
        u = np.asarray(u_of_step(i), dtype=float)
        h = Ts / sub
        acc = np.zeros(A.shape[0])
        for q in range(sub + 1):
            w = 1 if q in (0, sub) else (4 if q % 2 else 2)
            tau = i * Ts + q * h
            acc = acc + w * scipy.linalg.expm(A * (t_end - tau)) @ (B @ u)
        x = x + acc * h / 3.0
    return C @ x
