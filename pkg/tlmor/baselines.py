"""
Comparison methods: balanced truncation (BT, TLBT, A-TLBT) and the
interpolatory fixed-point iterations IRKA and TLIRKA.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as spla
from timeout_sampler import TimeoutWatch

from tlmor.constants import (
    BALANCING_CLAMP,
    IRKA_MAXITER,
    IRKA_TOL,
    RANK_TOL,
    TLIRKA_RESIDUAL_TOL,
    GramianKind,
    Method,
    Side,
)
from tlmor.gramnorm import gramian, tl_gramian
from tlmor.numkit import RankError, as_matrix, orthonormalize
from tlmor.rkrylov import augment_directions, build_subspace, krylov_columns, realify_columns
from tlmor.sysmodel import (
    DecompositionError,
    InterpolationData,
    InterpolationDataError,
    ReducedModel,
    TimeInterval,
    UnsupportedIntervalError,
    augment_inputs,
    augment_outputs,
    check_stable,
    pole_residue,
)
from tlmor.utils import get_tlmor_logger

LOGGER = get_tlmor_logger(name=__name__)


@dataclass(eq=False)
class BalancingData:
    """
    Square-root balancing of a Gramian pair (P, Q).

    T (n x k) and Ti (k x n) satisfy Ti T = I and Ti P Ti^T = T^T Q T = diag(hankel_values[:k]),
    k being the numerical rank of the pair (k = n for minimal systems).
    """

    T: np.ndarray
    Ti: np.ndarray
    hankel_values: np.ndarray

    @property
    def rank(self):
        return self.T.shape[1]


def _sqrt_factor(gram, name):
    """Factor L with L L^T = gram, eigenvalues below BALANCING_CLAMP * ||gram|| set to zero."""
    gram = (gram + gram.T) / 2
    eigenvalues, vectors = np.linalg.eigh(gram)
    scale = max(float(np.abs(eigenvalues).max()), np.finfo(float).tiny)
    if eigenvalues[0] < -BALANCING_CLAMP * scale:
        LOGGER.debug(f"{name} has negative eigenvalue {eigenvalues[0]:.3e} (scale {scale:.3e}), clamped")

    eigenvalues = np.where(eigenvalues > BALANCING_CLAMP * scale, eigenvalues, 0.0)
    return vectors * np.sqrt(eigenvalues)


def balance(P, Q):
    """
    Square-root balancing transformation of a (semi)definite Gramian pair.

    Args:
        P (np.ndarray): Controllability-type Gramian.
        Q (np.ndarray): Observability-type Gramian.

    Returns:
        BalancingData: Transformation restricted to the numerical rank and all Hankel values.
    """
    P = as_matrix(value=P, name="P", square=True)
    Q = as_matrix(value=Q, name="Q", square=True)
    ctrl_factor = _sqrt_factor(gram=P, name="P")
    obs_factor = _sqrt_factor(gram=Q, name="Q")
    U, hankel_values, Vh = spla.svd(obs_factor.T @ ctrl_factor)
    rank = 0 if hankel_values[0] == 0 else int(np.sum(hankel_values > RANK_TOL * hankel_values[0]))
    scaling = 1.0 / np.sqrt(hankel_values[:rank])
    return BalancingData(
        T=ctrl_factor @ Vh[:rank].T * scaling,
        Ti=(U[:, :rank] * scaling).T @ obs_factor.T,
        hankel_values=hankel_values,
    )


def _truncate(sys, P, Q, r, method, interval):
    data = balance(P=P, Q=Q)
    if r > data.rank:
        raise RankError(rank=data.rank, cols=r)

    V, W = data.T[:, :r], data.Ti[:r].T
    rom = ReducedModel(
        Ahat=W.T @ sys.A @ V,
        Bhat=W.T @ sys.B,
        Chat=sys.C @ V,
        method=method,
        interval=interval,
        info={"hankel_values": data.hankel_values, "balancing": data},
    )
    rom.info["stable"] = rom.is_stable
    if not rom.info["stable"]:
        LOGGER.warning(f"{method} ROM of order {r} on {interval} is not stable")

    LOGGER.info(f"{method} n={sys.n} r={r} interval={interval}, truncated Hankel value {data.hankel_values[r - 1]:.3e}")
    return rom


def bt_reduce(sys, r):
    """
    Balanced truncation on the infinite-horizon Gramians.

    Args:
        sys (StateSpace): Stable, minimal full-order model.
        r (int): Reduced order.

    Returns:
        ReducedModel: Balanced ROM, info holds the Hankel values.

    Raises:
        RankError: r exceeds the numerical rank of the Gramian pair.
    """
    check_stable(sys=sys)
    return _truncate(
        sys=sys,
        P=gramian(sys=sys, which=GramianKind.CTRL),
        Q=gramian(sys=sys, which=GramianKind.OBS),
        r=r,
        method=Method.BT,
        interval=TimeInterval(),
    )


def tlbt_reduce(sys, r, interval):
    """
    Time-limited balanced truncation on P_T and Q_T.

    Stability of the ROM is not guaranteed; info["stable"] records it.

    Args:
        sys (StateSpace): Stable full-order model.
        r (int): Reduced order.
        interval (TimeInterval): Horizon.

    Returns:
        ReducedModel: Time-limited balanced ROM.

    Raises:
        RankError: r exceeds the numerical rank of (P_T, Q_T).
    """
    return _truncate(
        sys=sys,
        P=tl_gramian(sys=sys, interval=interval, which=GramianKind.CTRL),
        Q=tl_gramian(sys=sys, interval=interval, which=GramianKind.OBS),
        r=r,
        method=Method.TLBT,
        interval=interval,
    )


def atlbt_reduce(sys, r, interval, approxP, approxQ):
    """
    Approximate TLBT: balancing on low-rank approximations of P_T and Q_T,
    e.g. the TLCURE products V_tot,t P_tot,t V_tot,t^T and W_tot,t Q_tot,t W_tot,t^T.

    Raises:
        RankError: r exceeds the rank of the approximate pair.
    """
    check_stable(sys=sys)
    for name, approx in (("approxP", approxP), ("approxQ", approxQ)):
        if as_matrix(value=approx, name=name, square=True).shape[0] != sys.n:
            raise ValueError(f"{name} must be {sys.n} x {sys.n}")

    return _truncate(sys=sys, P=approxP, Q=approxQ, r=r, method=Method.ATLBT, interval=interval)


def _project(sys, V, W, method, interval):
    """Oblique projection with (W^T V)^{-1}."""
    lu = spla.lu_factor(W.T @ V)
    return ReducedModel(
        Ahat=spla.lu_solve(lu, W.T @ sys.A @ V),
        Bhat=spla.lu_solve(lu, W.T @ sys.B),
        Chat=sys.C @ V,
        method=method,
        interval=interval,
    )


def _mirrored_interp(rom):
    """Mirror images of the ROM poles (forced into the right half-plane) with residue directions."""
    decomposition = pole_residue(sys=rom)
    poles = decomposition.poles
    return InterpolationData(
        points=np.abs(poles.real) - 1j * poles.imag,
        right_dirs=decomposition.right,
        left_dirs=decomposition.left,
    )


def _shift_change(old, new):
    old, new = np.sort_complex(old), np.sort_complex(new)
    return float(np.linalg.norm(new - old) / max(np.linalg.norm(old), np.finfo(float).tiny))


def random_interp(sys, r, seed=0):
    """
    Seeded start for IRKA: real points drawn log-uniformly over the mirrored pole range.

    SISO directions are ones, MIMO directions standard normal.
    """
    magnitudes = np.abs(sys.poles)
    low = max(float(np.min(np.abs(sys.poles.real))), np.finfo(float).tiny)
    high = max(float(np.max(magnitudes)), 10 * low)
    rng = np.random.default_rng(seed)
    points = np.sort(10 ** rng.uniform(np.log10(low), np.log10(high), size=r))
    right = np.ones((r, 1)) if sys.m == 1 else rng.standard_normal((r, sys.m))
    left = np.ones((r, 1)) if sys.p == 1 else rng.standard_normal((r, sys.p))
    return InterpolationData(points=points, right_dirs=right, left_dirs=left)


def _initial_interp(sys, r, init, seed):
    if not 1 <= r <= sys.n:
        raise RankError(rank=sys.n, cols=r)

    if init is None:
        return random_interp(sys=sys, r=r, seed=seed)

    if init.r != r or init.right_dirs is None or init.left_dirs is None:
        raise InterpolationDataError(f"Initial data needs {r} points with right and left directions, got {init}")

    return init


def _fixed_point(sys, interp, bases, method, interval, maxiter, tol, timeout, strict):
    """
    Iterate projection -> mirrored poles until the relative shift change drops below tol.

    Args:
        bases (callable): Maps InterpolationData to (V, W, sylvester_residual or None).
        strict (bool): Raise DecompositionError on a defective iterate instead of stopping.
    """
    if maxiter < 1:
        raise ValueError(f"maxiter must be positive, got {maxiter}")

    timeout_watcher = TimeoutWatch(timeout=timeout) if timeout else None
    converged = timed_out = False
    change = np.inf
    residuals = []
    rom = next_interp = None
    iteration = 0
    for iteration in range(1, maxiter + 1):
        V, W, residual = bases(interp)
        if residual is not None:
            residuals.append(residual)

        rom = _project(sys=sys, V=V, W=W, method=method, interval=interval)
        rom.info["interp"] = interp
        try:
            next_interp = _mirrored_interp(rom=rom)
        except DecompositionError as exp:
            if strict:
                raise

            LOGGER.warning(f"{method} stopped at iteration {iteration}: {exp}")
            next_interp = None
            break

        change = _shift_change(old=interp.points, new=next_interp.points)
        LOGGER.debug(f"{method} iteration {iteration}: relative shift change {change:.3e}")
        interp = next_interp
        if change < tol:
            converged = True
            break

        if timeout_watcher and timeout_watcher.remaining_time() <= 0:
            LOGGER.warning(f"{method} ran out of its {timeout}s budget after {iteration} iterations")
            timed_out = True
            break

    rom.info.update({
        "converged": converged,
        "iterations": iteration,
        "shift_change": change,
        "timed_out": timed_out,
        "next_interp": next_interp,
    })
    if residuals:
        rom.info["sylvester_residual"] = max(residuals)

    if converged:
        LOGGER.info(f"{method} n={sys.n} r={rom.r} converged after {iteration} iterations")
    else:
        LOGGER.warning(f"{method} n={sys.n} r={rom.r} did not converge, last shift change {change:.3e}")

    return rom


def irka_reduce(sys, r, init=None, maxiter=IRKA_MAXITER, tol=IRKA_TOL, timeout=None, seed=0):
    """
    Iterative rational Krylov algorithm.

    Bases interpolate at the current points along the right (V) and left (W)
    directions; the next points are the mirrored ROM poles with their residue
    directions.

    Args:
        sys (StateSpace): Stable full-order model.
        r (int): Reduced order, 1 <= r <= n.
        init (InterpolationData): Start with right and left directions, random_interp(seed) when None.
        maxiter (int): Iteration cap.
        tol (float): Relative shift change for convergence.
        timeout (float): Optional wall-clock budget in seconds.
        seed (int): Seed of the random start.

    Returns:
        ReducedModel: Last iterate; info holds converged, iterations, shift_change,
            interp (data of the returned ROM) and next_interp (its mirrored poles).
    """
    check_stable(sys=sys)
    interp = _initial_interp(sys=sys, r=r, init=init, seed=seed)
    LOGGER.info(f"IRKA n={sys.n} r={r} maxiter={maxiter} tol={tol:.1e}")

    def _bases(data):
        V = build_subspace(A=sys.A, X=sys.B, interp=data, side=Side.INPUT)
        W = build_subspace(A=sys.A, X=sys.C.T, interp=data, side=Side.OUTPUT)
        return V, W, None

    return _fixed_point(
        sys=sys,
        interp=interp,
        bases=_bases,
        method=Method.IRKA,
        interval=TimeInterval(),
        maxiter=maxiter,
        tol=tol,
        timeout=timeout,
        strict=False,
    )


def _raw_residual(operator, raw, points, factor, dirs):
    """Relative residual of operator V - V diag(points) + factor dirs^T = 0."""
    forcing = factor @ dirs.T
    residual = np.linalg.norm(operator @ raw - raw * points + forcing)
    scale = np.linalg.norm(operator) * np.linalg.norm(raw) + np.linalg.norm(forcing)
    return float(residual / max(scale, np.finfo(float).tiny))


def tlirka_reduce(sys, r, init=None, interval=None, maxiter=IRKA_MAXITER, tol=IRKA_TOL, timeout=None, seed=0):
    """
    Time-limited IRKA heuristic.

    V and W solve the time-limited Sylvester equations with the spectral data
    of the current ROM, i.e. tangential directions [b e^{-sigma t1}; b e^{-sigma t2}]
    against B_T and their duals against C_T^T. No optimality is guaranteed.
    The infinite horizon [0, inf) is plain IRKA.

    Args:
        sys (StateSpace): Stable full-order model.
        r (int): Reduced order.
        init (InterpolationData): Start, e.g. the final data of an IRKA run.
        interval (TimeInterval): Horizon.
        maxiter (int): Iteration cap.
        tol (float): Relative change of the shifts for convergence.
        timeout (float): Optional wall-clock budget in seconds.
        seed (int): Seed of the random start when init is None.

    Returns:
        ReducedModel: Last iterate with the IRKA info keys plus sylvester_residual.

    Raises:
        DecompositionError: An iterate has repeated or defective poles.
        UnsupportedIntervalError: Infinite horizon starting after t = 0.
    """
    interval = interval or TimeInterval()
    if interval.is_infinite_horizon:
        rom = irka_reduce(sys=sys, r=r, init=init, maxiter=maxiter, tol=tol, timeout=timeout, seed=seed)
        rom.method = Method.TLIRKA
        return rom

    if not interval.is_finite:
        raise UnsupportedIntervalError(interval=interval, operation="tlirka_reduce")

    check_stable(sys=sys)
    interp = _initial_interp(sys=sys, r=r, init=init, seed=seed)
    inputs = augment_inputs(sys=sys, interval=interval)
    outputs = augment_outputs(sys=sys, interval=interval)
    LOGGER.info(f"TLIRKA n={sys.n} r={r} interval={interval} maxiter={maxiter} tol={tol:.1e}")

    def _bases(data):
        augmented = augment_directions(interp=data, interval=interval)
        raw_right = krylov_columns(A=sys.A, X=inputs, interp=augmented, side=Side.INPUT)
        raw_left = krylov_columns(A=sys.A, X=outputs.T, interp=augmented, side=Side.OUTPUT)
        residual = max(
            _raw_residual(
                operator=sys.A, raw=raw_right, points=data.points, factor=inputs, dirs=augmented.right_dirs
            ),
            _raw_residual(
                operator=sys.A.T, raw=raw_left, points=data.points, factor=outputs.T, dirs=augmented.left_dirs
            ),
        )
        if residual > TLIRKA_RESIDUAL_TOL:
            LOGGER.warning(f"TLIRKA Sylvester residual {residual:.3e} exceeds {TLIRKA_RESIDUAL_TOL:.1e}")

        V = orthonormalize(V=realify_columns(columns=raw_right, points=data.points))
        W = orthonormalize(V=realify_columns(columns=raw_left, points=data.points))
        return V, W, residual

    return _fixed_point(
        sys=sys,
        interp=interp,
        bases=_bases,
        method=Method.TLIRKA,
        interval=interval,
        maxiter=maxiter,
        tol=tol,
        timeout=timeout,
        strict=True,
    )
