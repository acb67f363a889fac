"""
Time-limited pseudo-optimal rational Krylov reduction.

TLPORK works on the input side: it interpolates the time-limited transfer
function H_T(s) = C (sI - A)^{-1} B_T along c_i = [c^_i e^{-sigma_i t1}; c^_i e^{-sigma_i t2}].
O-TLPORK is its output-side dual. Both place the ROM poles at -sigma_i and
satisfy the Gramian optimality condition of their side, so that
||H - Hr||^2 = ||H||^2 - ||Hr||^2 in the H2,t norm.
"""

from dataclasses import dataclass, field

import numpy as np

from tlmor.constants import GramianKind, Method, Side
from tlmor.gramnorm import h2t_energies, tl_cross_gramians, tl_gramian
from tlmor.numkit import expm, solve_lyap
from tlmor.porkcure import check_observable, check_positive_definite
from tlmor.rkrylov import augment_directions, build_subspace, recover_sylvester
from tlmor.sysmodel import (
    ClosureError,
    DecompositionError,
    InterpolationData,
    ReducedModel,
    augment_inputs,
    augment_outputs,
    check_stable,
    eval_G,
    pole_residue,
)
from tlmor.utils import get_tlmor_logger

LOGGER = get_tlmor_logger(name=__name__)


@dataclass(eq=False)
class TlReduction:
    """
    Result of TLPORK (side "right") or O-TLPORK (side "left").

    basis is V_{r,t} or W_{r,t}; gram is Q_S or P_S; parts holds (L+, L-) with
    shapes (m x r, m x r), or (B~+, B~-) with shapes (r x p, r x p).
    """

    rom: ReducedModel
    basis: np.ndarray
    gram: np.ndarray
    parts: tuple
    side: str
    interval: object
    info: dict = field(default_factory=dict)

    @property
    def S(self):
        return self.rom.S

    @property
    def QS(self):
        return self.gram if self.side == Side.RIGHT else None

    @property
    def PS(self):
        return self.gram if self.side == Side.LEFT else None

    @property
    def xi(self):
        """Structure-preserving time-limited input (right) or output (left) matrix of the ROM."""
        plus, minus = self.parts
        if self.side == Side.RIGHT:
            return -np.linalg.solve(self.gram, np.hstack([plus.T, -minus.T]))

        return -np.linalg.solve(self.gram.T, np.hstack([plus, -minus])).T


def _shift_back(S, block, t1, side):
    # L^ = L+ e^{S t1} (right), B^ = e^{S t1} B~+ (left); identity for t1 = 0
    if t1 == 0:
        return block

    growth = expm(matrix=S * t1)
    return block @ growth if side == Side.RIGHT else growth @ block


def tlpork_reduce(sys, interp, interval):
    """
    TLPORK: time-limited pseudo-optimal reduction with right tangential directions.

    Args:
        sys (StateSpace): Stable full-order model.
        interp (InterpolationData): Points with positive real part and right directions (length m).
        interval (TimeInterval): Finite horizon [t1, t2].

    Returns:
        TlReduction: ROM (-Q_S^{-1} S^T Q_S, -Q_S^{-1} L^T, C V_{r,t}) with Q_S, V_{r,t} and (L+, L-).

    Raises:
        PseudoOptimalityError: Q_S not positive definite.
        PolePlacementError: Unobservable pair (S, L+).
        UnsupportedIntervalError: Infinite horizon, use pork_reduce.
    """
    check_stable(sys=sys)
    LOGGER.info(f"TLPORK n={sys.n} r={interp.r} interval={interval}")
    inputs = augment_inputs(sys=sys, interval=interval)
    augmented = augment_directions(interp=interp, interval=interval)
    basis = build_subspace(A=sys.A, X=inputs, interp=augmented, side=Side.INPUT)
    bundle = recover_sylvester(A=sys.A, X=inputs, V=basis, side=Side.INPUT, interp=augmented)
    plus, minus = bundle.L[: sys.m], bundle.L[sys.m :]
    check_observable(S=bundle.S, L=plus)
    gram = solve_lyap(A=-bundle.S.T, W=plus.T @ plus - minus.T @ minus)
    check_positive_definite(matrix=gram, name="Q_S")
    directions = _shift_back(S=bundle.S, block=plus, t1=interval.t1, side=Side.RIGHT)
    rom = ReducedModel(
        Ahat=-np.linalg.solve(gram, bundle.S.T @ gram),
        Bhat=-np.linalg.solve(gram, directions.T),
        Chat=sys.C @ basis,
        method=Method.TLPORK,
        interval=interval,
        S=bundle.S,
        L_right=directions,
        info={"sylvester_residual": bundle.residual, "recovery": bundle.source},
    )
    return TlReduction(
        rom=rom,
        basis=basis,
        gram=gram,
        parts=(plus, minus),
        side=Side.RIGHT,
        interval=interval,
        info={"bundle": bundle},
    )


def otlpork_reduce(sys, interp, interval):
    """
    O-TLPORK: output-side dual of TLPORK with left tangential directions.

    Args:
        sys (StateSpace): Stable full-order model.
        interp (InterpolationData): Points with positive real part and left directions (length p).
        interval (TimeInterval): Finite horizon [t1, t2].

    Returns:
        TlReduction: ROM (-P_S S^T P_S^{-1}, W_{r,t}^T B, -B^T P_S^{-1}) with P_S, W_{r,t} and (B~+, B~-).

    Raises:
        PseudoOptimalityError: P_S not positive definite.
        PolePlacementError: Uncontrollable pair (S, B~+).
        UnsupportedIntervalError: Infinite horizon.
    """
    check_stable(sys=sys)
    LOGGER.info(f"O-TLPORK n={sys.n} r={interp.r} interval={interval}")
    outputs = augment_outputs(sys=sys, interval=interval)
    augmented = augment_directions(interp=interp, interval=interval)
    basis = build_subspace(A=sys.A, X=outputs.T, interp=augmented, side=Side.OUTPUT)
    bundle = recover_sylvester(A=sys.A, X=outputs.T, V=basis, side=Side.OUTPUT, interp=augmented)
    plus, minus = bundle.L[:, : sys.p], bundle.L[:, sys.p :]
    check_observable(S=bundle.S.T, L=plus.T)
    gram = solve_lyap(A=-bundle.S, W=plus @ plus.T - minus @ minus.T)
    check_positive_definite(matrix=gram, name="P_S")
    directions = _shift_back(S=bundle.S, block=plus, t1=interval.t1, side=Side.LEFT)
    rom = ReducedModel(
        Ahat=-np.linalg.solve(gram.T, (gram @ bundle.S.T).T).T,
        Bhat=basis.T @ sys.B,
        Chat=-np.linalg.solve(gram.T, directions).T,
        method=Method.OTLPORK,
        interval=interval,
        S=bundle.S,
        L_left=directions,
        info={"sylvester_residual": bundle.residual, "recovery": bundle.source},
    )
    return TlReduction(
        rom=rom,
        basis=basis,
        gram=gram,
        parts=(plus, minus),
        side=Side.LEFT,
        interval=interval,
        info={"bundle": bundle},
    )


def tl_approx_gramian(red):
    """
    Low-rank approximation of P_T (right) or Q_T (left) carried by a TLPORK/O-TLPORK result.

    Returns:
        np.ndarray: V_{r,t} Q_S^{-1} V_{r,t}^T or W_{r,t} P_S^{-1} W_{r,t}^T.
    """
    approx = red.basis @ np.linalg.solve(red.gram, red.basis.T)
    return (approx + approx.T) / 2


@dataclass
class PseudoOptimalityReport:
    """
    Defects of the pseudo-optimality conditions.

    gramian_residual: ||Chat P^_T - C P~_T|| (right) or ||Q^_T Bhat - Q~_T B|| (left).
    energy_defect: | ||H||^2 - ||Hr||^2 - ||H - Hr||^2 | in the H2,t norm.
    tangential_defects: per ROM pole, relative tangential interpolation defect of G at -lambda_k.
    gramian_recovery_defect: ||P^_T - Q_S^{-1}|| (right) or ||Q^_T - P_S^{-1}|| (left), None without Q_S/P_S.
    The *_scale fields hold the magnitudes the absolute defects are measured against.
    """

    side: str
    gramian_residual: float
    gramian_scale: float
    energy_defect: float
    energy_scale: float
    tangential_defects: list
    gramian_recovery_defect: float = None

    @property
    def relative_gramian_residual(self):
        return self.gramian_residual / max(self.gramian_scale, np.finfo(float).tiny)

    @property
    def relative_energy_defect(self):
        return self.energy_defect / max(self.energy_scale, np.finfo(float).tiny)

    @property
    def max_tangential_defect(self):
        return max(self.tangential_defects, default=0.0)

    def as_dict(self):
        return {
            "side": self.side,
            "gramian_residual": float(self.gramian_residual),
            "relative_gramian_residual": float(self.relative_gramian_residual),
            "energy_defect": float(self.energy_defect),
            "relative_energy_defect": float(self.relative_energy_defect),
            "tangential_defects": [float(defect) for defect in self.tangential_defects],
            "gramian_recovery_defect": (
                None if self.gramian_recovery_defect is None else float(self.gramian_recovery_defect)
            ),
        }


def _tangential_defects(sys, rom, interval, side):
    try:
        decomposition = pole_residue(sys=rom)
    except DecompositionError as exp:
        LOGGER.warning(f"Skipping tangential defects: {exp}")
        return []

    defects = []
    for idx, pole in enumerate(decomposition.poles):
        point = -pole
        difference = eval_G(sys=sys, s=point, t=interval) - eval_G(sys=rom, s=point, t=interval)
        if side == Side.RIGHT:
            direction = decomposition.right[idx]
            defect = np.linalg.norm(difference @ direction)
            scale = np.linalg.norm(eval_G(sys=sys, s=point, t=interval) @ direction)
        else:
            direction = decomposition.left[idx]
            defect = np.linalg.norm(direction @ difference)
            scale = np.linalg.norm(direction @ eval_G(sys=sys, s=point, t=interval))

        defects.append(float(defect / max(scale, np.finfo(float).tiny)))

    return defects


def verify_pseudo_optimality(sys, red, side=None):
    """
    Check the time-limited pseudo-optimality conditions of a reduction.

    Args:
        sys (StateSpace): Full-order model.
        red (TlReduction or ReducedModel): Reduction to check; a plain ReducedModel skips the recovery defect.
        side (str): "right" or "left", defaults to the side of red (right for plain models).

    Returns:
        PseudoOptimalityReport: Magnitudes of all defects, nothing is raised for large defects.
    """
    is_tl = isinstance(red, TlReduction)
    rom = red.rom if is_tl else red
    side = side or (red.side if is_tl else Side.RIGHT)
    interval = rom.interval
    cross = tl_cross_gramians(sys=sys, rom=rom, interval=interval)
    if side == Side.RIGHT:
        rom_gram = tl_gramian(sys=rom, interval=interval, which=GramianKind.CTRL)
        reduced_side, full_side = rom.C @ rom_gram, sys.C @ cross.Ptilde
    else:
        rom_gram = tl_gramian(sys=rom, interval=interval, which=GramianKind.OBS)
        reduced_side, full_side = rom_gram @ rom.B, cross.Qtilde @ sys.B

    full_energy, rom_energy, error_energy = h2t_energies(sys=sys, rom=rom, interval=interval)
    recovery = None
    if is_tl and red.side == side:
        inverse = np.linalg.inv(red.gram)
        recovery = float(np.linalg.norm(rom_gram - inverse) / max(np.linalg.norm(rom_gram), np.finfo(float).tiny))

    report = PseudoOptimalityReport(
        side=side,
        gramian_residual=float(np.linalg.norm(reduced_side - full_side)),
        gramian_scale=float(np.linalg.norm(reduced_side) + np.linalg.norm(full_side)),
        energy_defect=abs(full_energy - rom_energy - error_energy),
        energy_scale=full_energy,
        tangential_defects=_tangential_defects(sys=sys, rom=rom, interval=interval, side=side),
        gramian_recovery_defect=recovery,
    )
    LOGGER.debug(f"Pseudo-optimality report ({rom.method}): {report.as_dict()}")
    return report


def mirror_modal_interp(sys, selected_eigs, side=Side.RIGHT):
    """
    Interpolation data preserving selected poles and their residue directions.

    Points are the mirror images -conj(lambda_i) with directions conj(r_i) (right)
    or conj(l_i) (left); as the selection is conjugate-closed this is the same
    data as -lambda_i with r_i.

    Args:
        sys (StateSpace): Stable model with simple poles.
        selected_eigs (iterable): Indices into pole_residue(sys).poles.
        side (str): "right" or "left".

    Returns:
        InterpolationData: Mirror-image points with residue directions.

    Raises:
        ClosureError: Selection contains a complex pole without its conjugate.
    """
    decomposition = pole_residue(sys=sys)
    indices = list(dict.fromkeys(int(idx) for idx in selected_eigs))
    poles = decomposition.poles[indices]
    for pole in poles:
        tol = 1e-8 * max(1.0, abs(pole))
        if abs(pole.imag) > tol and not np.any(np.abs(poles - pole.conjugate()) <= tol):
            raise ClosureError(point=pole)

    if np.any(poles.real >= 0):
        raise ValueError(f"Selected poles must be stable, got {poles}")

    residues = decomposition.right if side == Side.RIGHT else decomposition.left
    dirs = residues[indices].conjugate()
    if side == Side.RIGHT:
        return InterpolationData(points=-poles.conjugate(), right_dirs=dirs)

    return InterpolationData(points=-poles.conjugate(), left_dirs=dirs)


def mirror_modal_schedule(sys, steps, per_step, side=Side.RIGHT):
    """
    Split the dominant mirrored poles into CURE steps.

    Poles are ranked by ||l_k|| ||r_k|| / |Re lambda_k|; conjugate pairs stay in the same step.

    Args:
        sys (StateSpace): Stable model with simple poles.
        steps (int): Number of steps.
        per_step (int): Order added per step.
        side (str): "right" or "left".

    Returns:
        list: InterpolationData per step (fewer when the poles run out).
    """
    decomposition = pole_residue(sys=sys)
    poles = decomposition.poles
    scores = np.linalg.norm(decomposition.left, axis=1) * np.linalg.norm(decomposition.right, axis=1)
    scores = scores / np.abs(poles.real)
    groups = []
    for idx in np.argsort(-scores, kind="stable"):
        if poles[idx].imag < 0:
            continue

        if poles[idx].imag > 0:
            partner = int(np.argmin(np.abs(poles - poles[idx].conjugate())))
            groups.append([int(idx), partner])
        else:
            groups.append([int(idx)])

    schedule, current = [], []
    for group in groups:
        if len(schedule) == steps:
            break

        if current and len(current) + len(group) > per_step:
            schedule.append(mirror_modal_interp(sys=sys, selected_eigs=current, side=side))
            current = []

        current.extend(group)
        if len(current) >= per_step:
            schedule.append(mirror_modal_interp(sys=sys, selected_eigs=current, side=side))
            current = []

    if current and len(schedule) < steps:
        schedule.append(mirror_modal_interp(sys=sys, selected_eigs=current, side=side))

    return schedule[:steps]
