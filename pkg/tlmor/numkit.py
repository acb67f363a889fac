"""
Dense linear-algebra kernels shared by every reduction method.

Matrix exponentials, Lyapunov and Sylvester equations, shifted solves and
orthonormal bases. All entry points validate their inputs and return real
arrays whenever the inputs are real.
"""

import numpy as np
import scipy.linalg as spla

from tlmor.constants import IMAG_TRUNCATION_TOL, RANK_TOL, SOLVER_RESIDUAL_TOL
from tlmor.utils import get_tlmor_logger

LOGGER = get_tlmor_logger(name=__name__)
SINGULARITY_FACTOR = 100 * np.finfo(float).eps


class TlmorError(Exception):
    pass


class DimensionError(TlmorError):
    def __init__(self, name, shape, expected):
        self.name = name
        self.shape = shape
        self.expected = expected

    def __str__(self):
        return f"{self.name} has shape {self.shape}, expected {self.expected}"


class NonFiniteError(TlmorError):
    def __init__(self, name):
        self.name = name

    def __str__(self):
        return f"{self.name} contains NaN or Inf entries"


class SingularEquationError(TlmorError):
    def __init__(self, gap):
        self.gap = gap

    def __str__(self):
        return f"Equation is not uniquely solvable, spectral gap {self.gap:.3e}"


class SingularShiftError(TlmorError):
    def __init__(self, sigma):
        self.sigma = sigma

    def __str__(self):
        return f"Shift {self.sigma} is (numerically) an eigenvalue of the state matrix"


class RankError(TlmorError):
    def __init__(self, rank, cols):
        self.rank = rank
        self.cols = cols

    def __str__(self):
        return f"Matrix with {self.cols} columns has numerical rank {self.rank}"


class ComplexResidueError(TlmorError):
    def __init__(self, residue):
        self.residue = residue

    def __str__(self):
        return f"Expected a real result, imaginary residue is {self.residue:.3e}"


def as_matrix(value, name="matrix", square=False):
    """
    Convert to a finite 2-D array.

    Args:
        value (array_like): Input data, scalars and vectors are promoted to 2-D.
        name (str): Name used in error messages.
        square (bool): Require a square matrix.

    Returns:
        np.ndarray: 2-D array.

    Raises:
        DimensionError: Empty or non-square (when square=True) input.
        NonFiniteError: NaN or Inf entries.
    """
    matrix = np.atleast_2d(np.asarray(value))
    if matrix.ndim != 2 or 0 in matrix.shape:
        raise DimensionError(name=name, shape=matrix.shape, expected="non-empty 2-D matrix")

    if square and matrix.shape[0] != matrix.shape[1]:
        raise DimensionError(name=name, shape=matrix.shape, expected="square matrix")

    if not np.all(np.isfinite(matrix)):
        raise NonFiniteError(name=name)

    if not np.iscomplexobj(matrix):
        matrix = matrix.astype(float, copy=False)

    return matrix


def realify(value, tol=IMAG_TRUNCATION_TOL):
    """
    Drop a negligible imaginary part.

    Args:
        value (np.ndarray): Possibly complex array.
        tol (float): Relative threshold on the imaginary part.

    Returns:
        np.ndarray: Real array.

    Raises:
        ComplexResidueError: Imaginary part above the threshold.
    """
    if not np.iscomplexobj(value):
        return value

    scale = max(1.0, float(np.max(np.abs(value), initial=0.0)))
    residue = float(np.max(np.abs(value.imag), initial=0.0))
    if residue > tol * scale:
        raise ComplexResidueError(residue=residue)

    return np.ascontiguousarray(value.real)


def expm(matrix):
    """
    Matrix exponential by scaling and squaring with a diagonal Pade approximant.

    Args:
        matrix (array_like): Square matrix.

    Returns:
        np.ndarray: e^matrix, real for real input.
    """
    matrix = as_matrix(value=matrix, name="M", square=True)
    if not np.any(matrix):
        return np.eye(matrix.shape[0], dtype=matrix.dtype)

    return spla.expm(matrix)


def _check_spectral_gap(left, right):
    left_eigs = spla.eigvals(left)
    right_eigs = spla.eigvals(right)
    gap = float(np.min(np.abs(left_eigs[:, None] + right_eigs[None, :])))
    scale = max(1.0, float(np.max(np.abs(left_eigs))), float(np.max(np.abs(right_eigs))))
    if gap <= SINGULARITY_FACTOR * scale:
        raise SingularEquationError(gap=gap)


def _check_residual(residual, scale, tol, equation):
    if residual > tol * max(scale, np.finfo(float).tiny):
        LOGGER.warning(f"{equation} residual {residual:.3e} exceeds {tol:.1e} relative to {scale:.3e}")
    else:
        LOGGER.debug(f"{equation} residual {residual:.3e}")


def solve_sylv(A, B, C, tol=SOLVER_RESIDUAL_TOL):
    """
    Solve A X + X B + C = 0 by Schur reduction and back substitution.

    Args:
        A (array_like): k x k matrix.
        B (array_like): l x l matrix.
        C (array_like): k x l constant term.
        tol (float): Relative residual threshold reported on.

    Returns:
        np.ndarray: k x l solution.

    Raises:
        SingularEquationError: A and -B share an eigenvalue.
    """
    A = as_matrix(value=A, name="A", square=True)
    B = as_matrix(value=B, name="B", square=True)
    C = as_matrix(value=C, name="C")
    if C.shape != (A.shape[0], B.shape[0]):
        raise DimensionError(name="C", shape=C.shape, expected=(A.shape[0], B.shape[0]))

    _check_spectral_gap(left=A, right=B)
    if not np.any(C):
        return np.zeros(C.shape, dtype=np.result_type(A, B, C))

    solution = spla.solve_sylvester(A, B, -C)
    residual = np.linalg.norm(A @ solution + solution @ B + C)
    scale = (np.linalg.norm(A) + np.linalg.norm(B)) * np.linalg.norm(solution) + np.linalg.norm(C)
    _check_residual(residual=residual, scale=scale, tol=tol, equation="Sylvester")
    return solution


def solve_lyap(A, W, tol=SOLVER_RESIDUAL_TOL):
    """
    Solve A X + X A^T + W = 0 (plain transpose, also for complex A).

    Args:
        A (array_like): n x n matrix.
        W (array_like): n x n constant term.
        tol (float): Relative residual threshold reported on.

    Returns:
        np.ndarray: n x n solution, symmetric when W is symmetric.

    Raises:
        SingularEquationError: A and -A^T share an eigenvalue.
    """
    A = as_matrix(value=A, name="A", square=True)
    W = as_matrix(value=W, name="W", square=True)
    if W.shape != A.shape:
        raise DimensionError(name="W", shape=W.shape, expected=A.shape)

    _check_spectral_gap(left=A, right=A.T)
    if not np.any(W):
        return np.zeros(W.shape, dtype=np.result_type(A, W))

    if np.iscomplexobj(A) or np.iscomplexobj(W):
        solution = spla.solve_sylvester(A, A.T, -W)
    else:
        solution = spla.solve_continuous_lyapunov(A, -W)

    if np.allclose(W, W.T, rtol=0, atol=IMAG_TRUNCATION_TOL * max(1.0, np.abs(W).max())):
        solution = (solution + solution.T) / 2

    residual = np.linalg.norm(A @ solution + solution @ A.T + W)
    scale = 2 * np.linalg.norm(A) * np.linalg.norm(solution) + np.linalg.norm(W)
    _check_residual(residual=residual, scale=scale, tol=tol, equation="Lyapunov")
    return solution


def shifted_solve(A, sigma, R):
    """
    Compute (sigma I - A)^{-1} R with a dense LU factorization.

    Args:
        A (array_like): n x n matrix.
        sigma (complex): Shift.
        R (array_like): n x k right-hand side.

    Returns:
        np.ndarray: n x k solution, complex when sigma or R is complex.

    Raises:
        SingularShiftError: sigma is an eigenvalue of A.
    """
    A = as_matrix(value=A, name="A", square=True)
    R = as_matrix(value=R, name="R")
    if R.shape[0] != A.shape[0]:
        raise DimensionError(name="R", shape=R.shape, expected=(A.shape[0], "k"))

    sigma = complex(sigma)
    if sigma.imag == 0:
        sigma = sigma.real

    shifted = sigma * np.eye(A.shape[0]) - A
    dtype = np.result_type(shifted, R)
    shifted = shifted.astype(dtype)
    getrf, gecon, getrs = spla.get_lapack_funcs(("getrf", "gecon", "getrs"), (shifted,))
    lu, pivots, info = getrf(shifted)
    if info > 0:
        raise SingularShiftError(sigma=sigma)

    rcond, _ = gecon(lu, np.linalg.norm(shifted, 1), norm="1")
    if rcond < SINGULARITY_FACTOR:
        raise SingularShiftError(sigma=sigma)

    solution, _ = getrs(lu, pivots, R.astype(dtype))
    return solution


def orthonormalize(V, tol=RANK_TOL):
    """
    Orthonormal basis for the column span of V.

    Args:
        V (array_like): n x k matrix with full column rank.
        tol (float): Relative threshold on the pivoted R diagonal.

    Returns:
        np.ndarray: n x k matrix with orthonormal columns, R diagonal made positive.

    Raises:
        RankError: V is numerically rank deficient.
    """
    V = as_matrix(value=V, name="V")
    cols = V.shape[1]
    if cols > V.shape[0]:
        raise RankError(rank=V.shape[0], cols=cols)

    _, pivoted_r, _ = spla.qr(V, mode="economic", pivoting=True)
    diagonal = np.abs(np.diag(pivoted_r))
    rank = int(np.sum(diagonal > tol * diagonal[0])) if diagonal[0] > 0 else 0
    if rank < cols:
        raise RankError(rank=rank, cols=cols)

    basis, upper = spla.qr(V, mode="economic")
    signs = np.sign(np.diag(upper).real)
    signs[signs == 0] = 1
    return basis * signs
