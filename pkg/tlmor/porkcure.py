"""
Infinite-horizon pseudo-optimal rational Krylov reduction (PORK) and the
cumulative reduction framework (CURE) built from PORK steps.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as spla

from tlmor.constants import DEFINITENESS_FLOOR, OBSERVABILITY_TOL, Method, Side
from tlmor.numkit import TlmorError, solve_lyap
from tlmor.rkrylov import build_subspace, recover_sylvester
from tlmor.sysmodel import ReducedModel, TimeInterval, check_stable
from tlmor.utils import get_tlmor_logger

LOGGER = get_tlmor_logger(name=__name__)


class PolePlacementError(TlmorError):
    def __init__(self, margin):
        self.margin = margin

    def __str__(self):
        return f"Sylvester pair (S, L) is not observable (PBH margin {self.margin:.3e}), poles cannot be placed"


class PseudoOptimalityError(TlmorError):
    def __init__(self, min_eigenvalue, name="Q_S"):
        self.min_eigenvalue = min_eigenvalue
        self.name = name

    def __str__(self):
        return f"{self.name} is not positive definite, smallest eigenvalue {self.min_eigenvalue:.3e}"


def check_observable(S, L, tol=OBSERVABILITY_TOL):
    """
    PBH test of the pair (S, L), L having S.shape[0] columns.

    Raises:
        PolePlacementError: sigma_min([lambda I - S; L]) falls below tol relative to the data.
    """
    scale = max(np.linalg.norm(S, 2), np.linalg.norm(L, 2), np.finfo(float).tiny)
    identity = np.eye(S.shape[0])
    margin = min(
        np.linalg.svd(np.vstack([eigenvalue * identity - S, L]), compute_uv=False)[-1]
        for eigenvalue in spla.eigvals(S)
    )
    if margin <= tol * scale:
        raise PolePlacementError(margin=margin / scale)


def check_positive_definite(matrix, name, floor=DEFINITENESS_FLOOR):
    """
    Raises:
        PseudoOptimalityError: Smallest eigenvalue below floor * ||matrix||.
    """
    eigenvalues = np.linalg.eigvalsh((matrix + matrix.T) / 2)
    if eigenvalues[0] <= floor * max(abs(eigenvalues[-1]), np.finfo(float).tiny):
        raise PseudoOptimalityError(min_eigenvalue=float(eigenvalues[0]), name=name)


def pork_reduce(sys, interp, side=Side.INPUT):
    """
    Pseudo-optimal reduction at the given interpolation data.

    Input side: V spans (sigma I - A)^{-1} B c, (S, L) solve A V - V S - B L = 0 and
    -S^T Q - Q S + L^T L = 0; the ROM is (-Q^{-1} S^T Q, -Q^{-1} L^T, C V).
    Output side is the dual with left directions: (-P S^T P^{-1}, W^T B, -L^T P^{-1}).

    Args:
        sys (StateSpace): Stable full-order model.
        interp (InterpolationData): Points in the right half-plane with right (input) or left (output) directions.
        side (str): "input" or "output".

    Returns:
        ReducedModel: Pseudo-optimal ROM with poles at -sigma_i.

    Raises:
        PolePlacementError: Unobservable (uncontrollable) Sylvester pair.
        PseudoOptimalityError: Gramian of the pair is not positive definite.
    """
    check_stable(sys=sys)
    LOGGER.info(f"PORK ({side}) n={sys.n} r={interp.r}")
    if side in (Side.INPUT, Side.RIGHT):
        basis = build_subspace(A=sys.A, X=sys.B, interp=interp, side=Side.INPUT)
        bundle = recover_sylvester(A=sys.A, X=sys.B, V=basis, side=Side.INPUT, interp=interp)
        check_observable(S=bundle.S, L=bundle.L)
        gram = solve_lyap(A=-bundle.S.T, W=bundle.L.T @ bundle.L)
        check_positive_definite(matrix=gram, name="Q_s")
        return ReducedModel(
            Ahat=-np.linalg.solve(gram, bundle.S.T @ gram),
            Bhat=-np.linalg.solve(gram, bundle.L.T),
            Chat=sys.C @ basis,
            method=Method.PORK,
            S=bundle.S,
            L_right=bundle.L,
            info={"side": Side.INPUT, "gramian": gram, "basis": basis},
        )

    basis = build_subspace(A=sys.A, X=sys.C.T, interp=interp, side=Side.OUTPUT)
    bundle = recover_sylvester(A=sys.A, X=sys.C.T, V=basis, side=Side.OUTPUT, interp=interp)
    check_observable(S=bundle.S.T, L=bundle.L.T)
    gram = solve_lyap(A=-bundle.S, W=bundle.L @ bundle.L.T)
    check_positive_definite(matrix=gram, name="P_s")
    return ReducedModel(
        Ahat=-np.linalg.solve(gram.T, (gram @ bundle.S.T).T).T,
        Bhat=basis.T @ sys.B,
        Chat=-np.linalg.solve(gram.T, bundle.L).T,
        method=Method.PORK,
        S=bundle.S,
        L_left=bundle.L,
        info={"side": Side.OUTPUT, "gramian": gram, "basis": basis},
    )


@dataclass(eq=False)
class CureState:
    """
    Accumulated CURE data after `step` steps.

    Input side: A V_tot - V_tot S_tot - B L_tot = 0, L_tot is m x rho,
    pseudo_tot is Bbar_tot (rho x m), gram_tot is P_tot = blkdiag(Q_i^{-1}) and
    perp is the current B_perp (n x m).
    Output side: W_tot^T A - S_tot W_tot^T - L_tot C = 0, L_tot is rho x p,
    pseudo_tot is Cbar_tot (p x rho), gram_tot is Q_tot = blkdiag(P_i^{-1}) and
    perp is the current C_perp (p x n).
    gram_tot_inv holds the inverse block diagonal, assembled directly.
    """

    side: str
    perp: np.ndarray
    step: int = 0
    S_tot: np.ndarray = None
    L_tot: np.ndarray = None
    pseudo_tot: np.ndarray = None
    basis_tot: np.ndarray = None
    gram_tot: np.ndarray = None
    gram_tot_inv: np.ndarray = None
    orders: list = field(default_factory=list)

    @property
    def order(self):
        return sum(self.orders)

    @property
    def is_input(self):
        return self.side in (Side.INPUT, Side.RIGHT)

    # names used for the input side
    @property
    def V_tot(self):
        return self.basis_tot

    @property
    def P_tot(self):
        return self.gram_tot

    @property
    def B_tot(self):
        return self.pseudo_tot

    # names used for the output side
    @property
    def W_tot(self):
        return self.basis_tot

    @property
    def Q_tot(self):
        return self.gram_tot

    @property
    def C_tot(self):
        return self.pseudo_tot


class CureAccumulator:
    """
    Cumulative pseudo-optimal reduction, one PORK step at a time.

    Each step builds its Krylov basis on the current residual factor B_perp
    (C_perp), so earlier interpolation conditions stay untouched and the
    accumulated pair keeps a block-diagonal Gramian.

    Args:
        sys (StateSpace): Stable full-order model.
        side (str): "input" (V-type) or "output" (W-type).
    """

    def __init__(self, sys, side=Side.INPUT):
        check_stable(sys=sys)
        self.sys = sys
        perp = sys.B.copy() if side in (Side.INPUT, Side.RIGHT) else sys.C.copy()
        self.state = CureState(side=side, perp=perp)

    def add_step(self, interp):
        """
        Append one PORK step at interp.

        Args:
            interp (InterpolationData): Step data with right (input) or left (output) directions.

        Returns:
            CureState: The updated state.
        """
        state = self.state
        if state.is_input:
            S_new, L_new, basis, step_gram, step_gram_inv, pseudo = self._input_step(interp=interp)
        else:
            S_new, L_new, basis, step_gram, step_gram_inv, pseudo = self._output_step(interp=interp)

        if state.step == 0:
            state.S_tot = S_new
            state.L_tot = L_new
            state.pseudo_tot = pseudo
            state.basis_tot = basis
        elif state.is_input:
            coupling = -state.pseudo_tot @ L_new
            state.S_tot = np.block([[state.S_tot, coupling], [np.zeros((S_new.shape[0], state.order)), S_new]])
            state.L_tot = np.hstack([state.L_tot, L_new])
            state.pseudo_tot = np.vstack([state.pseudo_tot, pseudo])
            state.basis_tot = np.hstack([state.basis_tot, basis])
        else:
            coupling = -L_new @ state.pseudo_tot
            state.S_tot = np.block([[state.S_tot, np.zeros((state.order, S_new.shape[0]))], [coupling, S_new]])
            state.L_tot = np.vstack([state.L_tot, L_new])
            state.pseudo_tot = np.hstack([state.pseudo_tot, pseudo])
            state.basis_tot = np.hstack([state.basis_tot, basis])

        state.gram_tot = step_gram if state.step == 0 else spla.block_diag(state.gram_tot, step_gram)
        state.gram_tot_inv = step_gram_inv if state.step == 0 else spla.block_diag(state.gram_tot_inv, step_gram_inv)
        state.orders.append(S_new.shape[0])
        state.step += 1
        LOGGER.info(f"CURE ({state.side}) step {state.step}: order {state.order}")
        return state

    def _input_step(self, interp):
        A, perp = self.sys.A, self.state.perp
        basis = build_subspace(A=A, X=perp, interp=interp, side=Side.INPUT)
        bundle = recover_sylvester(A=A, X=perp, V=basis, side=Side.INPUT, interp=interp)
        check_observable(S=bundle.S, L=bundle.L)
        step_gram_inv = solve_lyap(A=-bundle.S.T, W=bundle.L.T @ bundle.L)
        check_positive_definite(matrix=step_gram_inv, name="Q_s")
        pseudo = -np.linalg.solve(step_gram_inv, bundle.L.T)
        self.state.perp = perp - basis @ pseudo
        return bundle.S, bundle.L, basis, np.linalg.inv(step_gram_inv), step_gram_inv, pseudo

    def _output_step(self, interp):
        A, perp = self.sys.A, self.state.perp
        basis = build_subspace(A=A, X=perp.T, interp=interp, side=Side.OUTPUT)
        bundle = recover_sylvester(A=A, X=perp.T, V=basis, side=Side.OUTPUT, interp=interp)
        check_observable(S=bundle.S.T, L=bundle.L.T)
        step_gram_inv = solve_lyap(A=-bundle.S, W=bundle.L @ bundle.L.T)
        check_positive_definite(matrix=step_gram_inv, name="P_s")
        pseudo = -np.linalg.solve(step_gram_inv.T, bundle.L).T
        self.state.perp = perp - pseudo @ basis.T
        return bundle.S, bundle.L, basis, np.linalg.inv(step_gram_inv), step_gram_inv, pseudo

    def sylvester_residual(self):
        state = self.state
        A, B, C = self.sys.A, self.sys.B, self.sys.C
        if state.is_input:
            return float(np.linalg.norm(A @ state.basis_tot - state.basis_tot @ state.S_tot - B @ state.L_tot))

        return float(np.linalg.norm(state.basis_tot.T @ A - state.S_tot @ state.basis_tot.T - state.L_tot @ C))

    def rom(self, method=Method.CURE, interval=None):
        """
        Accumulated infinite-horizon ROM in the state-transformed realization.

        Input side: (-S_tot^T, -L_tot^T, C V_tot P_tot). Output side: (-S_tot^T, Q_tot W_tot^T B, -L_tot^T).
        """
        state = self.state
        interval = interval or TimeInterval()
        if state.is_input:
            return ReducedModel(
                Ahat=-state.S_tot.T,
                Bhat=-state.L_tot.T,
                Chat=self.sys.C @ state.basis_tot @ state.gram_tot,
                method=method,
                interval=interval,
                S=state.S_tot,
                L_right=state.L_tot,
                info={"side": state.side, "step": state.step},
            )

        return ReducedModel(
            Ahat=-state.S_tot.T,
            Bhat=state.gram_tot @ state.basis_tot.T @ self.sys.B,
            Chat=-state.L_tot.T,
            method=method,
            interval=interval,
            S=state.S_tot,
            L_left=state.L_tot,
            info={"side": state.side, "step": state.step},
        )


def cure_run(sys, schedule, inner=Method.PORK, side=Side.INPUT):
    """
    Cumulative reduction over a schedule of interpolation data.

    Args:
        sys (StateSpace): Stable full-order model.
        schedule (list): InterpolationData per step.
        inner (str): Inner reduction, only PORK keeps the monotone error decay.
        side (str): "input" or "output".

    Returns:
        tuple: (list of ReducedModel after each step, CureState).
    """
    if inner != Method.PORK:
        raise ValueError(f"CURE supports only PORK inner steps, got {inner}")

    accumulator = CureAccumulator(sys=sys, side=side)
    roms = []
    for interp in schedule:
        accumulator.add_step(interp=interp)
        roms.append(accumulator.rom())

    return roms, accumulator.state
