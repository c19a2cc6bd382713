"""Exact vec/vech algebra: duplication, commutation and symmetrization operators.

All operators follow the column-major (Fortran) stacking convention:
``vec`` stacks columns, ``vech`` stacks the lower triangle column by column,
diagonal included.  Dense operator matrices are only built for small
dimensions (the model designs keep them below 10); the builders refuse
anything larger so a matrix-free path has to be used instead (``vech``,
``sym`` and friends apply directly to matrices and never materialize the
operators).
"""

import numpy as np

# dense operators beyond this size are a usage error, not a need
_MAX_DENSE_DIM = 32


def _check_dense_dim(p):
    if p < 1:
        raise ValueError(f"dimension must be >= 1, got {p}")
    if p > _MAX_DENSE_DIM:
        raise ValueError(
            f"dense operator requested for dimension {p} > {_MAX_DENSE_DIM}; "
            "use the matrix-free functions instead"
        )


def vec(M):
    """Column-major stacking of a 2-d array into a vector."""
    M = np.asarray(M)
    return M.reshape(-1, order="F").copy()


def unvec(v, rows, cols):
    """Inverse of vec: reshape a vector into a rows x cols matrix."""
    v = np.asarray(v)
    if v.size != rows * cols:
        raise ValueError(f"cannot unvec length {v.size} into {rows}x{cols}")
    return v.reshape(rows, cols, order="F").copy()


def sym(M):
    """Symmetric part (M + M') / 2."""
    M = np.asarray(M, dtype=float)
    return 0.5 * (M + M.T)


def vech(M):
    """Half-vectorization: stack the lower triangle of a square matrix
    column by column, diagonal included.

    For a symmetric p x p matrix this returns the p(p+1)/2 free entries in
    the order (1,1),(2,1),...,(p,1),(2,2),(3,2),...,(p,p).
    """
    M = np.asarray(M)
    p = M.shape[0]
    if M.shape != (p, p):
        raise ValueError(f"vech needs a square matrix, got shape {M.shape}")
    iu = np.triu_indices(p)
    # upper-triangle row-major order transposed = lower-triangle column-major
    return M[iu[1], iu[0]].copy()


def unvech(v):
    """Rebuild the symmetric matrix whose vech equals v."""
    v = np.asarray(v, dtype=float)
    m = v.size
    p = int((np.sqrt(8 * m + 1) - 1) / 2)
    if p * (p + 1) // 2 != m:
        raise ValueError(f"length {m} is not a triangular number")
    M = np.zeros((p, p))
    iu = np.triu_indices(p)
    M[iu[1], iu[0]] = v
    M[iu[0], iu[1]] = v
    return M


def vech_index(r, c, p):
    """0-based position of entry (r, c), r >= c, in the length-p(p+1)/2 vech."""
    if not (0 <= c <= r < p):
        raise ValueError(f"need 0 <= c <= r < {p}, got ({r}, {c})")
    return c * p - c * (c - 1) // 2 + (r - c)


def duplication_matrix(p):
    """Dense duplication matrix D_p (p^2 x p(p+1)/2): D_p vech(M) = vec(M)
    for symmetric M."""
    _check_dense_dim(p)
    m = p * (p + 1) // 2
    D = np.zeros((p * p, m))
    for c in range(p):
        for r in range(c, p):
            k = vech_index(r, c, p)
            D[c * p + r, k] = 1.0
            D[r * p + c, k] = 1.0
    return D


def duplication_pinv(p):
    """Moore-Penrose inverse D_p^+ (p(p+1)/2 x p^2): D_p^+ vec(M) = vech(M)
    for symmetric M, and D_p^+ D_p = I.

    Built directly from the permutation-and-halving structure (entries are
    exactly 0, 1/2 or 1), not via a numerical pseudoinverse.
    """
    _check_dense_dim(p)
    m = p * (p + 1) // 2
    Dp = np.zeros((m, p * p))
    for c in range(p):
        for r in range(c, p):
            k = vech_index(r, c, p)
            if r == c:
                Dp[k, c * p + r] = 1.0
            else:
                Dp[k, c * p + r] = 0.5
                Dp[k, r * p + c] = 0.5
    return Dp


def commutation_matrix(p, q):
    """Dense commutation matrix W_{p,q} (pq x pq): W vec(M) = vec(M') for
    every p x q matrix M.  A permutation matrix."""
    _check_dense_dim(max(p, q))
    W = np.zeros((p * q, p * q))
    for i in range(p):
        for j in range(q):
            # vec index of (i,j) in M is j*p+i; in M' it is i*q+j
            W[i * q + j, j * p + i] = 1.0
    return W


def np_operator(p):
    """Symmetrize-then-vech operator N_p = (1/2) D_p^+ (W_{p,p} + I):
    N_p vec(M) = vech((M + M')/2) for arbitrary square M."""
    _check_dense_dim(p)
    W = commutation_matrix(p, p)
    return 0.5 * duplication_pinv(p) @ (W + np.eye(p * p))
