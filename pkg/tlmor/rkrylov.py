"""
Tangential rational Krylov subspaces and the Sylvester data they satisfy.

Input side: span{(sigma_i I - A)^{-1} X c_i} with X = B_T (or B), satisfying
A V - V S - X L = 0 with L of size k x r.

Output side: span{(sigma_i I - A^T)^{-1} X b_i} with X = C_T^T (or C^T),
satisfying W^T A - S W^T - L X^T = 0 with L of size r x k.
"""

from dataclasses import dataclass

import numpy as np

from tlmor.constants import CONDITION_LIMIT, IMAG_TRUNCATION_TOL, Side
from tlmor.numkit import DimensionError, TlmorError, as_matrix, orthonormalize, realify, shifted_solve
from tlmor.sysmodel import InterpolationData
from tlmor.utils import get_tlmor_logger

LOGGER = get_tlmor_logger(name=__name__)
# construction data is mapped through a (possibly ill-conditioned) change of basis
RECOVERY_IMAG_TOL = 1e-8


class ConditioningError(TlmorError):
    def __init__(self, condition):
        self.condition = condition

    def __str__(self):
        return f"Residual factor is ill-conditioned (condition {self.condition:.3e}), cannot recover Sylvester data"


@dataclass(eq=False)
class SubspaceBundle:
    """
    Basis with its recovered Sylvester data.

    L is L_T (k x r) on the input side and B~_T (r x k) on the output side. perp is
    B_perp (n x k) or C_perp (k x n). source records whether (S, L) came from the
    projection formulas or from the interpolation data used to build the basis.
    """

    basis: np.ndarray
    S: np.ndarray
    L: np.ndarray
    perp: np.ndarray
    side: str
    residual: float
    source: str = "projection"

    @property
    def r(self):
        return self.basis.shape[1]


def _is_input(side):
    if side in (Side.INPUT, Side.RIGHT):
        return True

    if side in (Side.OUTPUT, Side.LEFT):
        return False

    raise ValueError(f"Unknown side {side}")


def krylov_columns(A, X, interp, side):
    """
    Complex Krylov columns (sigma_i I - A)^{-1} X d_i, one per interpolation point.

    Shifts are factorized once per distinct value (exact equality).

    Args:
        A (np.ndarray): n x n state matrix.
        X (np.ndarray): n x k factor (B_T, B, C_T^T or C^T).
        interp (InterpolationData): Points with directions of length k.
        side (str): "input" uses right_dirs and A, "output" uses left_dirs and A^T.

    Returns:
        np.ndarray: n x r complex matrix, column i belongs to interp.points[i].
    """
    A = as_matrix(value=A, name="A", square=True)
    X = as_matrix(value=X, name="X")
    dirs = interp.directions(side=side)
    if dirs.shape[1] != X.shape[1]:
        raise DimensionError(name="directions", shape=dirs.shape, expected=(interp.r, X.shape[1]))

    operator = A if _is_input(side=side) else A.T
    columns = np.zeros((A.shape[0], interp.r), dtype=complex)
    for sigma in dict.fromkeys(interp.points.tolist()):
        indices = np.flatnonzero(interp.points == sigma)
        columns[:, indices] = shifted_solve(A=operator, sigma=sigma, R=X @ dirs[indices].T)

    return columns


def realify_columns(columns, points):
    """Replace each conjugate pair {v, conj(v)} by {Re v, Im v} and real-shift columns by their real part."""
    real_columns = []
    for idx, sigma in enumerate(points):
        scale = max(1.0, abs(sigma))
        if abs(sigma.imag) <= IMAG_TRUNCATION_TOL * scale:
            real_columns.append(columns[:, idx].real)
        elif sigma.imag > 0:
            real_columns.extend([columns[:, idx].real, columns[:, idx].imag])

    return np.column_stack(real_columns)


def build_subspace(A, X, interp, side=Side.INPUT):
    """
    Orthonormal real basis of the tangential rational Krylov subspace.

    Args:
        A (np.ndarray): n x n state matrix.
        X (np.ndarray): n x k factor, B_T on the input side and C_T^T on the output side.
        interp (InterpolationData): Conjugate-closed points with directions of length k.
        side (str): "input" or "output".

    Returns:
        np.ndarray: n x r real matrix with orthonormal columns.

    Raises:
        SingularShiftError: A point is an eigenvalue of A.
        RankError: Columns are numerically dependent (e.g. duplicate data).
    """
    columns = krylov_columns(A=A, X=X, interp=interp, side=side)
    return orthonormalize(V=realify_columns(columns=columns, points=interp.points))


def _recover_from_interpolation(A, X, basis, interp, side):
    """
    Sylvester data from the construction: with raw columns V_raw = V M, S = M diag(sigma) M^{-1}, L = -dirs^T M^{-1}.
    """
    raw = krylov_columns(A=A, X=X, interp=interp, side=side)
    coords = basis.T @ raw
    span_defect = np.linalg.norm(basis @ coords - raw) / max(np.linalg.norm(raw), np.finfo(float).tiny)
    if span_defect > RECOVERY_IMAG_TOL:
        raise ConditioningError(condition=np.inf)

    dirs = interp.directions(side=side)
    diag = np.diag(interp.points)
    if _is_input(side=side):
        S = coords @ diag @ np.linalg.inv(coords)
        L = -np.linalg.solve(coords.T, dirs).T
    else:
        S = np.linalg.solve(coords.T, diag @ coords.T)
        L = -np.linalg.solve(coords.T, dirs)

    return realify(value=S, tol=RECOVERY_IMAG_TOL), realify(value=L, tol=RECOVERY_IMAG_TOL)


def recover_sylvester(A, X, V, side=Side.INPUT, interp=None, condition_limit=CONDITION_LIMIT):
    """
    Recover the Sylvester data (S, L) a Krylov basis satisfies.

    Input side, with W = V, E = V^T V, Ahat = V^T A V and Bhat = V^T X:
    B_perp = X - V E^{-1} Bhat, L = (B_perp^T B_perp)^{-1} B_perp^T (A V - V E^{-1} Ahat)
    and S = E^{-1} (Ahat - Bhat L). The output side is the dual with C_T = X^T.

    When B_perp^T B_perp (C_perp C_perp^T) is ill-conditioned, which is unavoidable
    when r + k > n, the data is taken from interp, the interpolation data the basis
    was built from.

    Args:
        A (np.ndarray): n x n state matrix.
        X (np.ndarray): n x k factor, as passed to build_subspace.
        V (np.ndarray): n x r basis with full column rank.
        side (str): "input" or "output".
        interp (InterpolationData): Construction data, enables the fallback.
        condition_limit (float): Largest accepted condition number.

    Returns:
        SubspaceBundle: Basis with S, L, the residual factor and the Sylvester residual.

    Raises:
        ConditioningError: Ill-conditioned residual factor and no interpolation data.
    """
    A = as_matrix(value=A, name="A", square=True)
    X = as_matrix(value=X, name="X")
    V = as_matrix(value=V, name="V")
    gram = V.T @ V
    projected = V.T @ A @ V
    if _is_input(side=side):
        coupling = V.T @ X
        perp = X - V @ np.linalg.solve(gram, coupling)
        target = A @ V - V @ np.linalg.solve(gram, projected)
        factor = perp
    else:
        coupling = X.T @ V
        perp = X.T - np.linalg.solve(gram.T, coupling.T).T @ V.T
        target = (V.T @ A - np.linalg.solve(gram.T, projected.T).T @ V.T).T
        factor = perp.T

    singular_values = np.linalg.svd(factor, compute_uv=False)
    condition = np.inf if singular_values[-1] == 0 else (singular_values[0] / singular_values[-1]) ** 2
    source = "projection"
    if condition <= condition_limit:
        solution = np.linalg.lstsq(factor, target, rcond=None)[0]
        if _is_input(side=side):
            L = solution
            S = np.linalg.solve(gram, projected - coupling @ L)
        else:
            L = solution.T
            S = np.linalg.solve(gram.T, (projected - L @ coupling).T).T
    elif interp is not None:
        LOGGER.debug(f"Residual factor condition {condition:.3e}, recovering {side} data from interpolation data")
        S, L = _recover_from_interpolation(A=A, X=X, basis=V, interp=interp, side=side)
        source = "interpolation"
    else:
        raise ConditioningError(condition=condition)

    if _is_input(side=side):
        residual = np.linalg.norm(A @ V - V @ S - X @ L)
    else:
        residual = np.linalg.norm(V.T @ A - S @ V.T - L @ X.T)

    LOGGER.debug(f"Recovered {side} Sylvester data of order {V.shape[1]} ({source}), residual {residual:.3e}")
    return SubspaceBundle(basis=V, S=S, L=L, perp=perp, side=side, residual=float(residual), source=source)


def augment_directions(interp, interval):
    """
    Time-limited tangential directions for B_T (C_T^T): d_i -> [d_i e^{-sigma_i t1}; d_i e^{-sigma_i t2}].

    Args:
        interp (InterpolationData): Base data, right and/or left directions.
        interval (TimeInterval): Finite horizon.

    Returns:
        InterpolationData: Same points with directions of twice the length.
    """
    points = interp.points[:, None]

    def _augment(dirs):
        if dirs is None:
            return None
        return np.hstack([dirs * np.exp(-points * interval.t1), dirs * np.exp(-points * interval.t2)])

    return InterpolationData(
        points=interp.points, right_dirs=_augment(dirs=interp.right_dirs), left_dirs=_augment(dirs=interp.left_dirs)
    )
