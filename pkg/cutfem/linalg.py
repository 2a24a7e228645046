import logging

import numpy as np
import scipy.io
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, gmres, spilu, splu

from .exceptions import (
    ConfigInvalid,
    DegenerateConstraint,
    NoConvergence,
    NonFinite,
    SingularMatrix,
)

logger = logging.getLogger(__name__)

SOLVERS = ("lu", "gmres")


def as_csr(matrix):
    """Canonical CSR: summed duplicates, sorted column indices, finite values."""
    matrix = sp.csr_matrix(matrix, dtype=float)
    matrix.sum_duplicates()
    matrix.sort_indices()
    if not np.all(np.isfinite(matrix.data)):
        raise NonFinite("Matrix has non-finite entries.")
    return matrix


def relative_residual(matrix, x, b):
    norm_b = np.linalg.norm(b)
    residual = np.linalg.norm(matrix @ x - b)
    return residual / norm_b if norm_b > 0 else residual


def _factorize(matrix):
    try:
        return splu(matrix.tocsc())
    except RuntimeError as e:
        raise SingularMatrix(f"LU factorization failed: {e}") from e


def _solve_lu(matrix, b, tol):
    lu = _factorize(matrix)
    x = lu.solve(b)
    if not np.all(np.isfinite(x)):
        raise SingularMatrix("LU solve produced non-finite values.")
    # a couple of refinement sweeps recover accuracy lost to pivot growth
    for _ in range(2):
        if relative_residual(matrix, x, b) <= tol:
            break
        x = x + lu.solve(b - matrix @ x)
    return x


def _solve_gmres(matrix, b, tol, restart, maxiter):
    try:
        ilu = spilu(matrix.tocsc(), drop_tol=1e-6, fill_factor=20)
    except RuntimeError as e:
        raise SingularMatrix(f"Incomplete factorization failed: {e}") from e
    preconditioner = LinearOperator(matrix.shape, ilu.solve)
    x, info = gmres(
        matrix, b, rtol=tol, atol=0.0, restart=restart, maxiter=maxiter, M=preconditioner
    )
    if info > 0:
        raise NoConvergence(
            f"GMRES did not reach rtol={tol:g} within {info} iterations "
            f"(residual {relative_residual(matrix, x, b):.3e})."
        )
    if info < 0:
        raise ConfigInvalid(f"GMRES rejected its input (info={info}).")
    return x


def solve(matrix, b, tol=1e-10, method="lu", restart=50, maxiter=1000):
    """Solve ``matrix @ x = b`` by sparse LU (default) or ILU-preconditioned GMRES."""
    matrix = as_csr(matrix)
    b = np.asarray(b, dtype=float)
    n = matrix.shape[0]
    if matrix.shape != (n, n) or b.shape != (n,):
        raise ValueError(f"Cannot solve a {matrix.shape} system with a {b.shape} rhs.")
    if n == 0:
        return np.zeros(0)
    if method == "lu":
        x = _solve_lu(matrix, b, tol)
    elif method == "gmres":
        x = _solve_gmres(matrix, b, tol, restart, maxiter)
    else:
        raise ConfigInvalid(f"Unknown solver '{method}' (choose {', '.join(SOLVERS)}).")
    residual = relative_residual(matrix, x, b)
    if residual > tol:
        logger.warning("Linear solve residual %.3e exceeds tolerance %.1e.", residual, tol)
    return x


def bordered_matrix(matrix, c):
    c = np.asarray(c, dtype=float)
    column = sp.csr_matrix(c[:, None])
    return sp.bmat([[as_csr(matrix), column], [column.T, None]], format="csr")


def solve_bordered(matrix, c, b, g, tol=1e-10, method="lu"):
    """Solve ``[[A, c], [c^T, 0]] [x; lam] = [b; g]`` and return ``(x, lam)``."""
    c = np.asarray(c, dtype=float)
    if np.linalg.norm(c) < 1e-14:
        raise DegenerateConstraint("Constraint vector vanishes; the domain is empty.")
    system = bordered_matrix(matrix, c)
    rhs = np.append(np.asarray(b, dtype=float), g)
    solution = solve(system, rhs, tol=tol, method=method)
    x, lam = solution[:-1], float(solution[-1])
    violation = abs(c @ x - g)
    if violation > tol * (1 + abs(g)) * 10:
        logger.warning("Constraint violated by %.3e after bordered solve.", violation)
    return x, lam


def estimate_condition(matrix, iterations=50, seed=0):
    """Estimate ``||A||_2 ||A^-1||_2`` by power iteration on ``A^T A`` and its inverse."""
    matrix = as_csr(matrix)
    n = matrix.shape[0]
    if n == 0:
        return 1.0
    lu = _factorize(matrix)
    rng = np.random.default_rng(seed)

    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    largest = 0.0
    for _ in range(iterations):
        w = matrix.T @ (matrix @ v)
        largest = np.linalg.norm(w)
        if largest == 0:
            raise SingularMatrix("Matrix is zero.")
        v = w / largest

    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    inverse = 0.0
    for _ in range(iterations):
        w = lu.solve(lu.solve(v, trans="T"))
        inverse = np.linalg.norm(w)
        if not np.isfinite(inverse):
            raise SingularMatrix("Matrix is numerically singular.")
        v = w / inverse
    return float(np.sqrt(largest * inverse))


def dump_matrix(matrix, path, comment=""):
    """Write ``matrix`` as a MatrixMarket coordinate file."""
    scipy.io.mmwrite(str(path), as_csr(matrix).tocoo(), comment=comment, precision=17)
