"""Small symmetric eigenproblems (cyclic Jacobi) and fractional matrix powers."""
from __future__ import annotations

import math

import numpy as np

MAX_DIM = 16
MAX_SWEEPS = 64


class SingularMatrixError(ArithmeticError):
    pass


def symmetrize(K) -> np.ndarray:
    """Copy of ``K`` with the upper triangle mirrored into the lower one."""
    K = np.array(K, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {K.shape}")
    iu = np.triu_indices(K.shape[0], 1)
    K[(iu[1], iu[0])] = K[iu]
    return K


def sym_eig(K) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and orthonormal eigenvectors (columns) of symmetric ``K``."""
    A = np.array(K, dtype=np.float64)
    n = A.shape[0]
    if A.ndim != 2 or A.shape[1] != n:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if n > MAX_DIM:
        raise ValueError(f"Jacobi solver is limited to k <= {MAX_DIM}, got {n}")
    if not np.array_equal(A, A.T):
        raise ValueError("matrix is not symmetric")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    V = np.eye(n)
    scale = np.max(np.abs(A)) if n else 0.0
    for _ in range(MAX_SWEEPS):
        off = math.sqrt(float(np.sum(np.triu(A, 1) ** 2)))
        if off <= 1e-300 or off <= 1e-17 * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                app, aqq = A[p, p], A[q, q]
                theta = (aqq - app) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J with J the (p, q) rotation
                ap, aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                rp, rq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                A[p, q] = A[q, p] = 0.0
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    evals = np.diag(A).copy()
    order = np.argsort(-evals, kind="stable")
    return evals[order], V[:, order]


def mat_frac_power(K, p: float, eps_reg: float = 0.0) -> np.ndarray:
    """``Q (Λ + eps_reg I)^p Qᵀ`` for symmetric PSD ``K``."""
    if eps_reg < 0:
        raise ValueError(f"eps_reg must be >= 0, got {eps_reg}")
    evals, Q = sym_eig(K)
    shifted = evals + eps_reg
    if p < 0:
        bad = shifted[shifted <= 0]
        if bad.size:
            raise SingularMatrixError(
                f"eigenvalue {bad[0]!r} (after eps_reg={eps_reg}) cannot be raised to negative power {p}"
            )
    elif p != int(p) and np.any(shifted < 0):
        raise SingularMatrixError(f"negative eigenvalue {shifted.min()!r} has no real power {p}")
    powered = shifted ** p
    return symmetrize((Q * powered) @ Q.T)
