import math
from dataclasses import dataclass, field

import numpy as np

from tlmor.constants import ENERGY_ROUNDOFF_TOL, GRAMIAN_CLAMP, GramianKind
from tlmor.numkit import expm, solve_lyap, solve_sylv
from tlmor.sysmodel import TimeInterval, UnsupportedIntervalError, check_stable, exp_action
from tlmor.utils import get_tlmor_logger

LOGGER = get_tlmor_logger(name=__name__)


@dataclass(eq=False)
class GramianSet:
    P: np.ndarray
    Q: np.ndarray
    kind: str
    interval: TimeInterval = field(default_factory=TimeInterval)


@dataclass(eq=False)
class CrossGramians:
    """Ptilde (n x r) pairs the system with the ROM on the input side, Qtilde (r x n) on the output side."""

    Ptilde: np.ndarray
    Qtilde: np.ndarray


def _limited_factors(A, X, interval):
    # [e^{A t1} X, e^{A t2} X], the second is None for t2 = inf
    first = exp_action(A=A, t=interval.t1, X=X)
    second = exp_action(A=A, t=interval.t2, X=X) if interval.is_finite else None
    return first, second


def _difference_term(left, right):
    """Constant term L1 R1^T - L2 R2^T of a time-limited Lyapunov/Sylvester equation."""
    (left_first, left_second), (right_first, right_second) = left, right
    term = left_first @ right_first.T
    if left_second is not None:
        term = term - left_second @ right_second.T

    return term


def gramian(sys, which=GramianKind.CTRL):
    """
    Infinite-horizon Gramian.

    Args:
        sys (StateSpace or ReducedModel): Stable system.
        which (str): "ctrl" for A P + P A^T + B B^T = 0, "obs" for A^T Q + Q A + C^T C = 0.

    Returns:
        np.ndarray: n x n Gramian.

    Raises:
        StabilityError: sys is not stable.
    """
    return tl_gramian(sys=sys, interval=TimeInterval(), which=which)


def tl_gramian(sys, interval, which=GramianKind.CTRL):
    """
    Time-limited Gramian over [t1, t2].

    P_T(t2) - P_T(t1) is the solution of a single Lyapunov equation whose
    constant term is e^{A t1} B B^T e^{A^T t1} - e^{A t2} B B^T e^{A^T t2}.

    Args:
        sys (StateSpace or ReducedModel): Stable system.
        interval (TimeInterval): Horizon, t2 = inf allowed.
        which (str): "ctrl" or "obs".

    Returns:
        np.ndarray: n x n symmetric Gramian.

    Raises:
        StabilityError: sys is not stable.
    """
    check_stable(sys=sys)
    if which == GramianKind.CTRL:
        factors = _limited_factors(A=sys.A, X=sys.B, interval=interval)
        return solve_lyap(A=sys.A, W=_difference_term(left=factors, right=factors))

    if which == GramianKind.OBS:
        factors = _limited_factors(A=sys.A.T, X=sys.C.T, interval=interval)
        return solve_lyap(A=sys.A.T, W=_difference_term(left=factors, right=factors))

    raise ValueError(f"Unknown Gramian kind {which}")


def tl_gramian_set(sys, interval):
    kind = "infinite" if interval.is_infinite_horizon else "time-limited"
    return GramianSet(
        P=tl_gramian(sys=sys, interval=interval, which=GramianKind.CTRL),
        Q=tl_gramian(sys=sys, interval=interval, which=GramianKind.OBS),
        kind=kind,
        interval=interval,
    )


def tl_cross_gramians(sys, rom, interval):
    """
    Cross Gramians of the error system.

    Ptilde solves A X + X Ahat^T + B Bhat^T - e^{At} B Bhat^T e^{Ahat^T t} = 0 and
    Qtilde solves Ahat^T Y + Y A + Chat^T C - e^{Ahat^T t} Chat^T C e^{At} = 0
    (two-exponential differences for [t1, t2]).

    Args:
        sys (StateSpace): Full-order model.
        rom (ReducedModel or StateSpace): Reduced model.
        interval (TimeInterval): Horizon.

    Returns:
        CrossGramians: Ptilde (n x r) and Qtilde (r x n).
    """
    check_stable(sys=sys)
    check_stable(sys=rom)
    input_full = _limited_factors(A=sys.A, X=sys.B, interval=interval)
    input_rom = _limited_factors(A=rom.A, X=rom.B, interval=interval)
    output_full = _limited_factors(A=sys.A.T, X=sys.C.T, interval=interval)
    output_rom = _limited_factors(A=rom.A.T, X=rom.C.T, interval=interval)
    return CrossGramians(
        Ptilde=solve_sylv(A=sys.A, B=rom.A.T, C=_difference_term(left=input_full, right=input_rom)),
        Qtilde=solve_sylv(A=rom.A.T, B=sys.A, C=_difference_term(left=output_rom, right=output_full)),
    )


def _sqrt_clamped(value, scale):
    if value < -GRAMIAN_CLAMP * max(scale, 1.0):
        LOGGER.warning(f"Squared norm {value:.3e} is negative beyond round-off (scale {scale:.3e})")

    return math.sqrt(max(value, 0.0))


def h2t_norm(sys, interval, path=GramianKind.CTRL):
    """
    H2,t norm, sqrt(tr(C P_T C^T)) or sqrt(tr(B^T Q_T B)).

    Args:
        sys (StateSpace or ReducedModel): Stable system.
        interval (TimeInterval): Horizon, TimeInterval() gives the H2 norm.
        path (str): "ctrl" or "obs" Gramian formulation.

    Returns:
        float: Non-negative norm.
    """
    gram = tl_gramian(sys=sys, interval=interval, which=path)
    if path == GramianKind.CTRL:
        value = float(np.trace(sys.C @ gram @ sys.C.T))
    else:
        value = float(np.trace(sys.B.T @ gram @ sys.B))

    return _sqrt_clamped(value=value, scale=abs(value))


def h2_norm(sys, path=GramianKind.CTRL):
    return h2t_norm(sys=sys, interval=TimeInterval(), path=path)


def h2t_energies(sys, rom, interval, path=GramianKind.CTRL):
    """
    Squared H2,t norms of the system, the ROM and their difference.

    Args:
        sys (StateSpace): Full-order model.
        rom (ReducedModel or StateSpace): Reduced model.
        interval (TimeInterval): Horizon.
        path (str): "ctrl" or "obs" Gramian formulation.

    Returns:
        tuple: (||H||^2, ||Hr||^2, ||H - Hr||^2) with the error term not clamped.
    """
    cross = tl_cross_gramians(sys=sys, rom=rom, interval=interval)
    full = tl_gramian(sys=sys, interval=interval, which=path)
    reduced = tl_gramian(sys=rom, interval=interval, which=path)
    if path == GramianKind.CTRL:
        full_energy = float(np.trace(sys.C @ full @ sys.C.T))
        rom_energy = float(np.trace(rom.C @ reduced @ rom.C.T))
        mixed = float(np.trace(sys.C @ cross.Ptilde @ rom.C.T))
    else:
        full_energy = float(np.trace(sys.B.T @ full @ sys.B))
        rom_energy = float(np.trace(rom.B.T @ reduced @ rom.B))
        mixed = float(np.trace(rom.B.T @ cross.Qtilde @ sys.B))

    return full_energy, rom_energy, full_energy - 2 * mixed + rom_energy


def h2t_error(sys, rom, interval, path=GramianKind.CTRL):
    """
    H2,t norm of the error system H - Hr.

    Args:
        sys (StateSpace): Full-order model.
        rom (ReducedModel or StateSpace): Reduced model.
        interval (TimeInterval): Horizon, TimeInterval() gives the H2 error.
        path (str): "ctrl" or "obs" Gramian formulation.

    Returns:
        float: Non-negative error, zero when the squared error is within round-off of the energy scale.
    """
    full_energy, rom_energy, error_energy = h2t_energies(sys=sys, rom=rom, interval=interval, path=path)
    scale = full_energy + rom_energy
    if abs(error_energy) <= ENERGY_ROUNDOFF_TOL * scale:
        return 0.0

    return _sqrt_clamped(value=error_energy, scale=scale)


def gramian_quadrature_oracle(sys, interval, steps=1000):
    """
    Composite Simpson approximation of int_{t1}^{t2} e^{A tau} B B^T e^{A^T tau} d tau.

    Args:
        sys (StateSpace): System.
        interval (TimeInterval): Finite horizon.
        steps (int): Number of subintervals, rounded up to an even count.

    Returns:
        np.ndarray: n x n approximation.
    """
    if not interval.is_finite:
        raise UnsupportedIntervalError(interval=interval, operation="gramian_quadrature_oracle")

    if steps < 2:
        raise ValueError(f"Simpson quadrature needs at least 2 steps, got {steps}")

    steps += steps % 2
    width = interval.length / steps
    transition = expm(matrix=sys.A * width)
    factor = exp_action(A=sys.A, t=interval.t1, X=sys.B)
    total = np.zeros((sys.n, sys.n))
    for idx in range(steps + 1):
        weight = 1 if idx in (0, steps) else 4 if idx % 2 else 2
        total += weight * (factor @ factor.T)
        factor = transition @ factor

    return total * width / 3
