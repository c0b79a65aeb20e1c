"""Dense real matrix helpers: symmetric eigensolvers, PD inversion, expm.

Every routine takes and returns plain ``numpy.ndarray`` objects and never
mutates its inputs.
"""

import math

import numpy as np

from .errors import ConvergenceError, DimensionError, NumericalError, SingularityError

# off-diagonal Frobenius norm relative to ||A||_F at which Jacobi stops
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
# lambda_min must exceed DEFINITE_TOL * max(1, lambda_max) for inversion
DEFINITE_TOL = 1e-12
EXPM_TAYLOR_TERMS = 20


def _square(A, name="A"):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {A.shape}")
    return A


def symmetrize(A):
    A = np.asarray(A, dtype=float)
    return 0.5 * (A + A.T)


def _off_norm(A):
    # summing the off-diagonal squares directly avoids cancellation against the diagonal
    D = A - np.diag(np.diag(A))
    return float(np.linalg.norm(D))


def jacobi_eigh(A, tol=JACOBI_TOL, max_sweeps=JACOBI_MAX_SWEEPS):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns ``(w, V)`` with ascending eigenvalues ``w`` and orthonormal
    eigenvectors in the columns of ``V``.
    """
    A = symmetrize(_square(A)).copy()
    n = A.shape[0]
    V = np.eye(n)
    if n <= 1:
        return np.diag(A).copy(), V
    scale = np.linalg.norm(A)
    if scale == 0.0:
        return np.zeros(n), V
    threshold = tol * scale
    for sweep in range(max_sweeps):
        off = _off_norm(A)
        if off <= threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                col_p = A[:, p].copy()
                col_q = A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p = A[p, :].copy()
                row_q = A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                A[p, q] = A[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    else:
        off = _off_norm(A)
        if off > threshold:
            raise ConvergenceError(
                f"Jacobi did not converge after {max_sweeps} sweeps (off-diagonal norm {off:.3e})",
                iterations=max_sweeps,
            )
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def sym_eig(A, method="lapack"):
    """Eigen-decomposition of the symmetric part of ``A``, eigenvalues ascending.

    ``method="jacobi"`` runs the pure cyclic-Jacobi solver; the default
    ``"lapack"`` defers to ``numpy.linalg.eigh``, which is what the hot
    loops use.
    """
    A = symmetrize(_square(A))
    if method == "jacobi":
        return jacobi_eigh(A)
    if method != "lapack":
        raise ValueError(f"unknown eigensolver {method!r}")
    if not np.all(np.isfinite(A)):
        raise NumericalError("matrix has non-finite entries")
    try:
        w, V = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigh failed: {exc}") from exc
    return w, V


def eigvalsh(A):
    A = symmetrize(_square(A))
    return np.linalg.eigvalsh(A)


def lambda_min(A):
    return float(eigvalsh(A)[0])


def lambda_max(A):
    return float(eigvalsh(A)[-1])


def psd_inverse(A, tol=DEFINITE_TOL):
    """Inverse of a symmetric positive definite matrix.

    Raises SingularityError when ``lambda_min <= tol * max(1, lambda_max)``.
    """
    w, V = sym_eig(A)
    lmin, lmax = float(w[0]), float(w[-1])
    if lmin <= tol * max(1.0, lmax):
        raise SingularityError(
            f"matrix is not numerically positive definite (lambda_min={lmin:.3e})",
            lambda_min=lmin,
        )
    inv = (V / w) @ V.T
    return symmetrize(inv)


def spectral_norm(A):
    """Largest singular value, sqrt(lambda_max(A^T A))."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise DimensionError(f"expected a matrix, got shape {A.shape}")
    if A.size == 0:
        return 0.0
    return math.sqrt(max(lambda_max(A.T @ A), 0.0))


def loewner_geq(A, B, tol=1e-9):
    """True when A - B is PSD up to ``tol``."""
    return lambda_min(np.asarray(A, dtype=float) - np.asarray(B, dtype=float)) >= -tol


def matrix_exp(A):
    """Matrix exponential by scaling and squaring with a 20-term Taylor core.

    ``A`` is scaled by 2**-j until its Frobenius norm is at most 0.5.
    """
    A = _square(A)
    n = A.shape[0]
    norm = float(np.linalg.norm(A))
    if not math.isfinite(norm):
        raise NumericalError("matrix has non-finite entries")
    j = 0
    if norm > 0.5:
        j = int(math.ceil(math.log2(norm / 0.5)))
    B = A / (2.0**j)
    E = np.eye(n)
    for k in range(EXPM_TAYLOR_TERMS, 0, -1):
        E = np.eye(n) + (B @ E) / k
    for _ in range(j):
        E = E @ E
    return E
