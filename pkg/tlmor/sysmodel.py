"""
LTI system representations and their evaluations.

A StateSpace is the full-order model x' = Ax + Bu, y = Cx. A ReducedModel is
the same triple for a reduced-order model together with the data that produced
it. InterpolationData holds conjugate-closed tangential interpolation data and
TimeInterval the [t1, t2] horizon, with t2 = inf selecting infinite horizon.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as spla

from tlmor.constants import CONJUGATE_MATCH_TOL, INFINITY, POLE_GAP_TOL, STABILITY_MARGIN
from tlmor.numkit import DimensionError, TlmorError, as_matrix, expm, shifted_solve
from tlmor.utils import get_tlmor_logger

LOGGER = get_tlmor_logger(name=__name__)


class StabilityError(TlmorError):
    def __init__(self, max_real_part):
        self.max_real_part = max_real_part

    def __str__(self):
        return f"System is not stable, max Re(eig(A)) = {self.max_real_part:.3e}"


class DecompositionError(TlmorError):
    def __init__(self, gap):
        self.gap = gap

    def __str__(self):
        return f"State matrix has (numerically) repeated eigenvalues, relative gap {self.gap:.3e}"


class ClosureError(TlmorError):
    def __init__(self, point):
        self.point = point

    def __str__(self):
        return f"Interpolation data is not closed under conjugation at {self.point}"


class InterpolationDataError(TlmorError):
    pass


class UnsupportedIntervalError(TlmorError):
    def __init__(self, interval, operation):
        self.interval = interval
        self.operation = operation

    def __str__(self):
        return f"{self.operation} does not support interval {self.interval}"


def _is_conjugate(first, second):
    tol = CONJUGATE_MATCH_TOL * max(1.0, float(np.abs(first).max()))
    return np.allclose(second, first.conjugate(), rtol=0, atol=tol)


@dataclass(frozen=True)
class TimeInterval:
    t1: float = 0.0
    t2: float = INFINITY

    def __post_init__(self):
        t1, t2 = float(self.t1), float(self.t2)
        if math.isnan(t1) or math.isnan(t2) or t1 < 0 or math.isinf(t1):
            raise ValueError(f"Invalid interval bounds [{self.t1}, {self.t2}]")

        if not t1 < t2:
            raise ValueError(f"Interval requires t1 < t2, got [{t1}, {t2}]")

        object.__setattr__(self, "t1", t1)
        object.__setattr__(self, "t2", t2)

    @classmethod
    def until(cls, t):
        return cls(t1=0.0, t2=t)

    @property
    def is_finite(self):
        return not math.isinf(self.t2)

    @property
    def is_infinite_horizon(self):
        return self.t1 == 0 and not self.is_finite

    @property
    def length(self):
        return self.t2 - self.t1

    def __str__(self):
        return f"[{self.t1:g}, {self.t2:g}]"


@dataclass(eq=False)
class StateSpace:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        self.A = as_matrix(value=self.A, name="A", square=True)
        self.B = as_matrix(value=self.B, name="B")
        self.C = as_matrix(value=self.C, name="C")
        if self.B.shape[0] != self.n:
            raise DimensionError(name="B", shape=self.B.shape, expected=(self.n, "m"))

        if self.C.shape[1] != self.n:
            raise DimensionError(name="C", shape=self.C.shape, expected=("p", self.n))

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def p(self):
        return self.C.shape[0]

    @property
    def poles(self):
        return spla.eigvals(self.A)

    @property
    def is_stable(self):
        return is_stable(sys=self)

    def transform(self, T):
        """Realization (T^{-1} A T, T^{-1} B, C T) of the same transfer function."""
        T = as_matrix(value=T, name="T", square=True)
        lu = spla.lu_factor(T)
        return StateSpace(A=spla.lu_solve(lu, self.A @ T), B=spla.lu_solve(lu, self.B), C=self.C @ T)

    def __repr__(self):
        return f"StateSpace(n={self.n}, m={self.m}, p={self.p})"


@dataclass(eq=False)
class ReducedModel:
    """
    Reduced-order model with its provenance.

    S and L_right (m x r) are the Sylvester data of input-side methods, S and
    L_left (r x p) those of output-side methods. info carries method specific
    diagnostics such as convergence flags and iteration counts.
    """

    Ahat: np.ndarray
    Bhat: np.ndarray
    Chat: np.ndarray
    method: str
    interval: TimeInterval = field(default_factory=TimeInterval)
    S: np.ndarray = None
    L_right: np.ndarray = None
    L_left: np.ndarray = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        model = StateSpace(A=self.Ahat, B=self.Bhat, C=self.Chat)
        self.Ahat, self.Bhat, self.Chat = model.A, model.B, model.C

    @property
    def A(self):
        return self.Ahat

    @property
    def B(self):
        return self.Bhat

    @property
    def C(self):
        return self.Chat

    @property
    def r(self):
        return self.Ahat.shape[0]

    @property
    def n(self):
        return self.r

    @property
    def m(self):
        return self.Bhat.shape[1]

    @property
    def p(self):
        return self.Chat.shape[0]

    @property
    def poles(self):
        return spla.eigvals(self.Ahat)

    @property
    def is_stable(self):
        return is_stable(sys=self)

    def to_state_space(self):
        return StateSpace(A=self.Ahat, B=self.Bhat, C=self.Chat)

    def __repr__(self):
        return f"ReducedModel(method={self.method}, r={self.r}, interval={self.interval})"


@dataclass(eq=False)
class InterpolationData:
    """
    Conjugate-closed tangential interpolation data.

    points has shape (r,), right_dirs (r, m) and left_dirs (r, p); row i holds
    the direction attached to points[i].
    """

    points: np.ndarray
    right_dirs: np.ndarray = None
    left_dirs: np.ndarray = None

    def __post_init__(self):
        self.points = np.atleast_1d(np.asarray(self.points, dtype=complex)).ravel()
        if not self.points.size:
            raise InterpolationDataError("No interpolation points given")

        if not np.all(np.isfinite(self.points)):
            raise InterpolationDataError("Interpolation points must be finite")

        if np.any(self.points.real <= 0):
            raise InterpolationDataError(f"Interpolation points need positive real parts, got {self.points}")

        if self.right_dirs is None and self.left_dirs is None:
            raise InterpolationDataError("At least one set of tangential directions is required")

        self.right_dirs = self._validate_dirs(dirs=self.right_dirs, name="right_dirs")
        self.left_dirs = self._validate_dirs(dirs=self.left_dirs, name="left_dirs")
        self._check_conjugate_closure()

    def _validate_dirs(self, dirs, name):
        if dirs is None:
            return None

        dirs = np.asarray(dirs, dtype=complex)
        if dirs.ndim == 1:
            dirs = dirs.reshape(self.r, -1)

        if dirs.shape[0] != self.r:
            raise DimensionError(name=name, shape=dirs.shape, expected=(self.r, "k"))

        if np.any(np.linalg.norm(dirs, axis=1) == 0):
            raise InterpolationDataError(f"{name} contains a zero direction")

        return dirs

    def _rows(self, index):
        return [dirs[index] for dirs in (self.right_dirs, self.left_dirs) if dirs is not None]

    def _check_conjugate_closure(self):
        unmatched = set(range(self.r))
        for idx in range(self.r):
            if idx not in unmatched:
                continue

            sigma = self.points[idx]
            tol = CONJUGATE_MATCH_TOL * max(1.0, abs(sigma))
            unmatched.discard(idx)
            if abs(sigma.imag) <= tol:
                if not all(_is_conjugate(first=row, second=row) for row in self._rows(index=idx)):
                    raise ClosureError(point=sigma)
                continue

            partner = next(
                (
                    jdx
                    for jdx in sorted(unmatched)
                    if abs(self.points[jdx] - sigma.conjugate()) <= tol
                    and all(
                        _is_conjugate(first=row_i, second=row_j)
                        for row_i, row_j in zip(self._rows(index=idx), self._rows(index=jdx))
                    )
                ),
                None,
            )
            if partner is None:
                raise ClosureError(point=sigma)

            unmatched.discard(partner)

    @property
    def r(self):
        return self.points.size

    def directions(self, side):
        dirs = self.right_dirs if side in ("input", "right") else self.left_dirs
        if dirs is None:
            raise InterpolationDataError(f"Interpolation data has no {side} directions")

        return dirs

    def concatenate(self, other):
        def _join(first, second):
            if first is None or second is None:
                return None
            return np.vstack([first, second])

        return InterpolationData(
            points=np.concatenate([self.points, other.points]),
            right_dirs=_join(self.right_dirs, other.right_dirs),
            left_dirs=_join(self.left_dirs, other.left_dirs),
        )

    def __repr__(self):
        return f"InterpolationData(r={self.r}, points={np.array2string(self.points, precision=4)})"


@dataclass(eq=False)
class PoleResidue:
    """Pole-residue form H(s) = sum_k l_k r_k^T / (s - poles[k]) with left (k, p) and right (k, m)."""

    poles: np.ndarray
    left: np.ndarray
    right: np.ndarray

    def evaluate(self, s):
        weights = 1.0 / (s - self.poles)
        return np.einsum("k,kp,km->pm", weights, self.left, self.right)

    def residue(self, index):
        return np.outer(self.left[index], self.right[index])


def is_stable(sys, margin=STABILITY_MARGIN):
    return bool(np.max(spla.eigvals(sys.A).real) < -margin)


def check_stable(sys, margin=STABILITY_MARGIN):
    """
    Raises:
        StabilityError: Some eigenvalue of the state matrix has Re >= -margin.
    """
    max_real = float(np.max(spla.eigvals(sys.A).real))
    if not max_real < -margin:
        raise StabilityError(max_real_part=max_real)


def eval_tf(sys, s):
    """
    Transfer function C (sI - A)^{-1} B.

    Args:
        sys (StateSpace or ReducedModel): System.
        s (complex): Evaluation point.

    Returns:
        np.ndarray: p x m matrix.
    """
    return sys.C @ shifted_solve(A=sys.A, sigma=s, R=sys.B)


def freqresp(sys, omegas):
    """
    Frequency response H(j w) on a grid.

    Uses the eigendecomposition of A when it is well conditioned, dense solves otherwise.

    Args:
        sys (StateSpace or ReducedModel): System.
        omegas (array_like): Angular frequencies.

    Returns:
        np.ndarray: Array of shape (len(omegas), p, m).
    """
    omegas = np.asarray(omegas, dtype=float).ravel()
    poles, vectors = spla.eig(sys.A)
    if np.linalg.cond(vectors) < 1e8:
        left = sys.C @ vectors
        right = np.linalg.solve(vectors, sys.B)
        weights = 1.0 / (1j * omegas[:, None] - poles[None, :])
        return np.einsum("wk,pk,km->wpm", weights, left, right)

    return np.array([eval_tf(sys=sys, s=1j * omega) for omega in omegas])


def pole_residue(sys, gap_tol=POLE_GAP_TOL):
    """
    Pole-residue decomposition from the eigendecomposition of A.

    Args:
        sys (StateSpace or ReducedModel): System with simple poles.
        gap_tol (float): Relative eigenvalue gap below which poles count as repeated.

    Returns:
        PoleResidue: Poles with left (C x_k) and right (row k of X^{-1} B) residue directions.

    Raises:
        DecompositionError: Repeated or defective eigenvalues.
    """
    poles, vectors = spla.eig(sys.A)
    if poles.size > 1:
        diffs = np.abs(poles[:, None] - poles[None, :])
        scale = np.maximum(1.0, np.abs(poles)[:, None])
        np.fill_diagonal(diffs, np.inf)
        gap = float(np.min(diffs / scale))
        if gap < gap_tol:
            raise DecompositionError(gap=gap)

    right = np.linalg.solve(vectors, sys.B.astype(complex))
    left = (sys.C @ vectors).T
    return PoleResidue(poles=poles, left=left, right=right)


def exp_action(A, t, X):
    """e^{A t} X, with e^{A 0} = I exactly."""
    if t == 0:
        return np.array(X, copy=True)

    return expm(matrix=A * t) @ X


def step_response(sys, grid):
    """
    Unit step response y(t) = C int_0^t e^{A tau} d tau B, exact per grid point.

    The integral is propagated with the augmented exponential of [[A, B], [0, 0]],
    so singular A is handled and uniform grids cost a single exponential.

    Args:
        sys (StateSpace or ReducedModel): System.
        grid (array_like): Increasing, non-negative time points.

    Returns:
        np.ndarray: Outputs of shape (len(grid), p, m).
    """
    grid = np.asarray(grid, dtype=float).ravel()
    if grid.size and (grid[0] < 0 or np.any(np.diff(grid) < 0)):
        raise ValueError("Step response grid must be increasing and start at t >= 0")

    n, m = sys.n, sys.m
    augmented = np.zeros((n + m, n + m))
    augmented[:n, :n] = sys.A
    augmented[:n, n:] = sys.B
    propagator = None
    state_integral = np.zeros((n, m))
    previous = 0.0
    outputs = np.zeros((grid.size, sys.p, m))
    for idx, t in enumerate(grid):
        step = t - previous
        if step > 0:
            # uniform grids reuse the previous propagator
            if propagator is None or not np.isclose(propagator[0], step, rtol=1e-12, atol=0):
                block = expm(matrix=augmented * step)
                propagator = (step, block[:n, :n], block[:n, n:])

            _, transition, gain = propagator
            state_integral = transition @ state_integral + gain

        outputs[idx] = sys.C @ state_integral
        previous = t

    return outputs


def eval_G(sys, s, t):
    """
    Time-limited transfer function used by the tangential optimality conditions.

    For [0, t]: G(s) = -e^{-st} C (sI - A)^{-1} e^{At} B + H(s). For [t1, t2] the
    two-exponential difference e^{-s t1} C (sI - A)^{-1} e^{A t1} B - e^{-s t2} C (sI - A)^{-1} e^{A t2} B.

    Args:
        sys (StateSpace or ReducedModel): System.
        s (complex): Evaluation point.
        t (float or TimeInterval): Horizon.

    Returns:
        np.ndarray: p x m matrix.
    """
    if not isinstance(t, TimeInterval):
        if t == 0:
            return np.zeros((sys.p, sys.m), dtype=complex)
        t = TimeInterval.until(t=t)

    def _term(bound):
        return np.exp(-s * bound) * (sys.C @ shifted_solve(A=sys.A, sigma=s, R=exp_action(A=sys.A, t=bound, X=sys.B)))

    value = _term(bound=t.t1)
    if t.is_finite:
        value = value - _term(bound=t.t2)

    return value


def augment_inputs(sys, interval):
    """
    Time-limited input matrix B_T = [e^{A t1} B, -e^{A t2} B] (n x 2m).

    Raises:
        UnsupportedIntervalError: Infinite t2, the infinite horizon goes through PORK.
    """
    if not interval.is_finite:
        raise UnsupportedIntervalError(interval=interval, operation="augment_inputs")

    return np.hstack([exp_action(A=sys.A, t=interval.t1, X=sys.B), -exp_action(A=sys.A, t=interval.t2, X=sys.B)])


def augment_outputs(sys, interval):
    """
    Time-limited output matrix C_T = [C e^{A t1}; -C e^{A t2}] (2p x n).

    Raises:
        UnsupportedIntervalError: Infinite t2.
    """
    if not interval.is_finite:
        raise UnsupportedIntervalError(interval=interval, operation="augment_outputs")

    return np.vstack([
        exp_action(A=sys.A.T, t=interval.t1, X=sys.C.T).T,
        -exp_action(A=sys.A.T, t=interval.t2, X=sys.C.T).T,
    ])
