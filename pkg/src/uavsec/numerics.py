"""Dense linear-algebra kernel: matrix exponential, ZOH, null spaces, observer gains."""

import math

import numpy as np
import scipy.linalg

from .errors import DetectabilityError, DimensionError, DomainError

DEFAULT_RANK_TOL = 1e-8

# Pade [13/13] numerator coefficients and the scaling threshold from
# Higham, "The scaling and squaring method for the matrix exponential revisited".
_PADE13 = (
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
)
_THETA13 = 5.371920351148152


def as_matrix(M, name="matrix"):
    """Return `M` as a finite 2-D float array or raise."""
    arr = np.array(M, dtype=float, ndmin=2)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"{name} must have at least one row and column")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} has non-finite entries")
    return arr


def _square(M, name="matrix"):
    arr = as_matrix(M, name)
    if arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"{name} must be square, got {arr.shape}")
    return arr


def matrix_exponential(M, t=1.0):
    """Compute e^{M t} by scaling and squaring with a [13/13] Pade approximant."""
    A = _square(M)
    if not math.isfinite(t):
        raise DomainError("t must be finite")
    A = A * t
    n = A.shape[0]
    ident = np.eye(n)

    norm1 = np.linalg.norm(A, 1)
    s = 0
    if norm1 > _THETA13:
        s = int(math.ceil(math.log2(norm1 / _THETA13)))
        A = A / (2.0**s)

    b = _PADE13
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A4 @ A2
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
    V = A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident
    R = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        R = R @ R
    return R


def zoh_discretize(A, B, Ts):
    """Zero-order-hold discretization of (A, B) at step `Ts`.

    Uses the exponential of the augmented block matrix [[A, B], [0, 0]] so that
    singular A (e.g. the consensus translation mode) needs no special casing.
    """
    A = _square(A, "A")
    B = as_matrix(B, "B")
    if B.shape[0] != A.shape[0]:
        raise DimensionError(f"B has {B.shape[0]} rows, A is {A.shape[0]}x{A.shape[0]}")
    if not (math.isfinite(Ts) and Ts > 0):
        raise DomainError(f"Ts must be positive, got {Ts}")
    n, m = B.shape
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = A
    aug[:n, n:] = B
    E = matrix_exponential(aug, Ts)
    return E[:n, :n], E[:n, n:]


def singular_values(M):
    """All min(m, n) singular values of M in descending order."""
    return np.linalg.svd(as_matrix(M), compute_uv=False)


def null_space(M, rank_tol=DEFAULT_RANK_TOL):
    """Orthonormal basis of the numerical right null space of M.

    A right-singular vector counts as null when its singular value is below
    ``rank_tol * sigma_max``; columns beyond min(rows, cols) have singular
    value zero.
    """
    M = as_matrix(M)
    if not rank_tol > 0:
        raise DomainError("rank_tol must be positive")
    _, s, Vt = np.linalg.svd(M, full_matrices=True)
    n = M.shape[1]
    sv = np.zeros(n)
    sv[: s.size] = s
    smax = s[0] if s.size else 0.0
    if smax == 0.0:
        return [Vt[k].copy() for k in range(n)]
    return [Vt[k].copy() for k in range(n) if sv[k] < rank_tol * smax]


def spectral_radius(M):
    A = _square(M)
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def stabilizing_gain(Ad, Cd, mode=None):
    """Steady-state predictor gain H from the DARE with identity weights.

    The returned gain always satisfies spectral_radius(Ad - H Cd) < 1; otherwise
    DetectabilityError is raised, tagged with `mode` when given.
    """
    Ad = _square(Ad, "Ad")
    Cd = as_matrix(Cd, "Cd")
    if Cd.shape[1] != Ad.shape[0]:
        raise DimensionError(f"Cd has {Cd.shape[1]} columns, Ad is {Ad.shape[0]}x{Ad.shape[0]}")
    n, p = Ad.shape[0], Cd.shape[0]
    where = f" in mode {mode}" if mode is not None else ""
    try:
        P = scipy.linalg.solve_discrete_are(Ad.T, Cd.T, np.eye(n), np.eye(p))
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise DetectabilityError(f"Riccati equation has no stabilizing solution{where}: {exc}", mode) from exc
    H = Ad @ P @ Cd.T @ np.linalg.inv(Cd @ P @ Cd.T + np.eye(p))
    rho = spectral_radius(Ad - H @ Cd)
    if not rho < 1.0:
        raise DetectabilityError(f"observer error dynamics unstable{where} (spectral radius {rho:.6g})", mode)
    return H


def observability_rank(Ad, Cd):
    Ad = _square(Ad, "Ad")
    Cd = as_matrix(Cd, "Cd")
    blocks = [Cd]
    for _ in range(Ad.shape[0] - 1):
        blocks.append(blocks[-1] @ Ad)
    return int(np.linalg.matrix_rank(np.vstack(blocks)))
