"""
Cumulative time-limited pseudo-optimal reduction.

Every step adds a PORK step to the accumulated Sylvester data and maps the
result to the time-limited setting, so each cumulative ROM is time-limited
pseudo-optimal and the H2,t error decays monotonically.
"""

from dataclasses import dataclass, field

import numpy as np

from tlmor.constants import DEFINITENESS_FLOOR, GramianKind, Method, Side
from tlmor.gramnorm import h2t_error, tl_gramian
from tlmor.numkit import TlmorError, expm
from tlmor.porkcure import CureAccumulator
from tlmor.sysmodel import ReducedModel, exp_action
from tlmor.utils import get_tlmor_logger

LOGGER = get_tlmor_logger(name=__name__)


class AccumulationError(TlmorError):
    def __init__(self, step, min_eigenvalue):
        self.step = step
        self.min_eigenvalue = min_eigenvalue

    def __str__(self):
        return (
            f"Time-limited accumulated Gramian of step {self.step} is not positive definite "
            f"(smallest eigenvalue {self.min_eigenvalue:.3e})"
        )


@dataclass(eq=False)
class TlCureTrace:
    """
    Per-step record of a TLCURE run.

    side "input" (V-type) stores V_tot,t and P_tot,t in basis_t and gram_t,
    side "output" (W-type) stores W_tot,t and Q_tot,t.
    """

    side: str
    interval: object
    roms: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    gramian_defects: list = field(default_factory=list)
    basis_t: np.ndarray = None
    gram_t: np.ndarray = None
    state: object = None

    @property
    def steps(self):
        return len(self.roms)

    @property
    def rom(self):
        return self.roms[-1]

    @property
    def V_tot_t(self):
        return self.basis_t

    @property
    def P_tot_t(self):
        return self.gram_t

    @property
    def W_tot_t(self):
        return self.basis_t

    @property
    def Q_tot_t(self):
        return self.gram_t


def _limited_gram(S_tot, gram_inv, interval, step, side):
    """Inverse of the congruence-transformed difference of the accumulated Gramian inverse."""
    first = expm(matrix=-S_tot * interval.t1)
    if side == Side.INPUT:
        difference = first.T @ gram_inv @ first
    else:
        difference = first @ gram_inv @ first.T

    if interval.is_finite:
        second = expm(matrix=-S_tot * interval.t2)
        if side == Side.INPUT:
            difference = difference - second.T @ gram_inv @ second
        else:
            difference = difference - second @ gram_inv @ second.T

    difference = (difference + difference.T) / 2
    eigenvalues = np.linalg.eigvalsh(difference)
    if eigenvalues[0] <= DEFINITENESS_FLOOR * max(abs(eigenvalues[-1]), np.finfo(float).tiny):
        raise AccumulationError(step=step, min_eigenvalue=float(eigenvalues[0]))

    gram = np.linalg.inv(difference)
    return (gram + gram.T) / 2


def _limited_basis(A, basis, S_tot, interval, side):
    operator = A if side == Side.INPUT else A.T
    shift = -S_tot if side == Side.INPUT else -S_tot.T
    limited = exp_action(A=operator, t=interval.t1, X=basis) @ expm(matrix=shift * interval.t1)
    if interval.is_finite:
        limited = limited - exp_action(A=operator, t=interval.t2, X=basis) @ expm(matrix=shift * interval.t2)

    return limited


def _tlcure_run(sys, schedule, interval, tol, side):
    accumulator = CureAccumulator(sys=sys, side=side)
    trace = TlCureTrace(side=side, interval=interval, state=accumulator.state)
    if side == Side.INPUT:
        exact = tl_gramian(sys=sys, interval=interval, which=GramianKind.CTRL)
        weight = sys.C
    else:
        exact = tl_gramian(sys=sys, interval=interval, which=GramianKind.OBS)
        weight = sys.B.T

    for interp in schedule:
        state = accumulator.add_step(interp=interp)
        gram_t = _limited_gram(
            S_tot=state.S_tot, gram_inv=state.gram_tot_inv, interval=interval, step=state.step, side=side
        )
        basis_t = _limited_basis(A=sys.A, basis=state.basis_tot, S_tot=state.S_tot, interval=interval, side=side)
        if side == Side.INPUT:
            rom = ReducedModel(
                Ahat=-state.S_tot.T,
                Bhat=-state.L_tot.T,
                Chat=sys.C @ basis_t @ gram_t,
                method=Method.TLCURE,
                interval=interval,
                S=state.S_tot,
                L_right=state.L_tot,
                info={"side": side, "step": state.step},
            )
        else:
            rom = ReducedModel(
                Ahat=-state.S_tot.T,
                Bhat=gram_t @ basis_t.T @ sys.B,
                Chat=-state.L_tot.T,
                method=Method.TLCURE,
                interval=interval,
                S=state.S_tot,
                L_left=state.L_tot,
                info={"side": side, "step": state.step},
            )

        approx = basis_t @ gram_t @ basis_t.T
        error = h2t_error(sys=sys, rom=rom, interval=interval)
        trace.roms.append(rom)
        trace.errors.append(error)
        trace.gramian_defects.append(float(np.trace(weight @ (exact - approx) @ weight.T)))
        trace.basis_t, trace.gram_t = basis_t, gram_t
        LOGGER.info(f"TLCURE ({side}) step {state.step}: order {state.order}, h2t error {error:.6e}")
        if tol is not None and error <= tol:
            LOGGER.info(f"TLCURE ({side}) reached tolerance {tol:.3e} at order {state.order}")
            break

    return trace


def tlcure_v_run(sys, schedule, interval, tol=None):
    """
    TLCURE V-type: accumulate input-side PORK steps and map them to [t1, t2].

    V_tot,t = e^{A t1} V_tot e^{-S_tot t1} - e^{A t2} V_tot e^{-S_tot t2} and
    P_tot,t = (e^{-S_tot^T t1} P_tot^{-1} e^{-S_tot t1} - e^{-S_tot^T t2} P_tot^{-1} e^{-S_tot t2})^{-1};
    the ROM is (-S_tot^T, -L_tot^T, C V_tot,t P_tot,t).

    Args:
        sys (StateSpace): Stable full-order model.
        schedule (list): InterpolationData with right directions, one per step.
        interval (TimeInterval): Horizon.
        tol (float): Stop once the H2,t error is at most tol.

    Returns:
        TlCureTrace: Per-step ROMs, errors and the accumulated time-limited data.

    Raises:
        AccumulationError: P_tot,t is not positive definite.
    """
    return _tlcure_run(sys=sys, schedule=schedule, interval=interval, tol=tol, side=Side.INPUT)


def tlcure_w_run(sys, schedule, interval, tol=None):
    """
    TLCURE W-type: output-side dual of tlcure_v_run.

    The ROM is (-S_tot^T, Q_tot,t W_tot,t^T B, -L_tot^T).

    Args:
        sys (StateSpace): Stable full-order model.
        schedule (list): InterpolationData with left directions, one per step.
        interval (TimeInterval): Horizon.
        tol (float): Stop once the H2,t error is at most tol.

    Returns:
        TlCureTrace: Per-step ROMs, errors and the accumulated time-limited data.
    """
    return _tlcure_run(sys=sys, schedule=schedule, interval=interval, tol=tol, side=Side.OUTPUT)


def approx_gramian(trace, which=None):
    """
    Approximate time-limited Gramian of a TLCURE run.

    Args:
        trace (TlCureTrace): Run with at least one step.
        which (str): "ctrl" (V-type) or "obs" (W-type), defaults to the side of the run.

    Returns:
        np.ndarray: V_tot,t P_tot,t V_tot,t^T or W_tot,t Q_tot,t W_tot,t^T, symmetric.
    """
    if not trace.steps:
        raise ValueError("TLCURE trace has no steps")

    expected = GramianKind.CTRL if trace.side == Side.INPUT else GramianKind.OBS
    if which is not None and which != expected:
        raise ValueError(f"A {trace.side} TLCURE run approximates the {expected} Gramian, not {which}")

    approx = trace.basis_t @ trace.gram_t @ trace.basis_t.T
    return (approx + approx.T) / 2
