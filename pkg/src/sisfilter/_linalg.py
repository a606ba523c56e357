"""Small dense linear-algebra helpers with an explicit conditioning guard.

Every inversion in the package goes through here so that the reciprocal
condition number threshold is applied uniformly and nothing is silently
regularized.
"""
import numpy as np
from scipy.linalg import lapack

RCOND_TOL = 1e-12


def _norm1(A):
    return float(np.abs(A).sum(axis=0).max())


def rcond(A):
    """1-norm reciprocal condition estimate from a pivoted LU factorization."""
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return 1.0
    lu, piv, info = lapack.dgetrf(A)
    if info > 0:
        return 0.0
    anorm = _norm1(A)
    if anorm == 0.0:
        return 0.0
    rc, info = lapack.dgecon(lu, anorm, norm="1")
    return float(rc)


def lu_checked(A, on_singular):
    """Factor ``A`` and return ``(lu, piv)``; call ``on_singular(rcond)`` if bad.

    ``on_singular`` must raise.
    """
    A = np.asarray(A, dtype=float)
    lu, piv, info = lapack.dgetrf(A)
    if info > 0:
        on_singular(0.0)
    anorm = _norm1(A)
    rc = 0.0
    if anorm > 0.0:
        rc, _ = lapack.dgecon(lu, anorm, norm="1")
    if not rc > RCOND_TOL:
        on_singular(float(rc))
    return lu, piv


def solve_checked(A, b, on_singular):
    """Solve ``A x = b`` by partial-pivot LU after the rcond guard."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.shape[0] == 0:
        return np.zeros(b.shape, dtype=float)
    lu, piv = lu_checked(A, on_singular)
    x, info = lapack.dgetrs(lu, piv, b)
    return x


def inv_checked(A, on_singular):
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    return solve_checked(A, np.eye(n), on_singular)


def symmetrize(X):
    return 0.5 * (X + X.T)


def psd_violation(X, sym_tol=1e-12, eig_tol=-1e-10):
    """Return a short reason string if ``X`` is not symmetric PSD, else None."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        return f"not square (shape {X.shape})"
    if X.size == 0:
        return None
    if not np.all(np.isfinite(X)):
        return "non-finite entries"
    asym = np.max(np.abs(X - X.T))
    if asym > sym_tol:
        return f"asymmetric (max |X-X^T| = {asym:.3g})"
    lam = np.linalg.eigvalsh(symmetrize(X)).min()
    if lam < eig_tol:
        return f"negative eigenvalue {lam:.3g}"
    return None
