import math

import numpy as np
import pytest

from tlmor.constants import Side
from tlmor.numkit import RankError, SingularShiftError
from tlmor.rkrylov import (
    ConditioningError,
    augment_directions,
    build_subspace,
    krylov_columns,
    recover_sylvester,
)
from tlmor.sysmodel import InterpolationData, TimeInterval, augment_inputs, augment_outputs, eval_tf


def _sorted(values):
    values = np.asarray(values, dtype=complex).ravel()
    return values[np.lexsort((np.round(values.imag, 6), np.round(values.real, 6)))]


def test_build_subspace_scalar(scalar_sys):
    inputs = augment_inputs(sys=scalar_sys, interval=TimeInterval.until(t=1))
    interp = InterpolationData(points=[1.0], right_dirs=[[1.0, math.exp(-1)]])
    raw = krylov_columns(A=scalar_sys.A, X=inputs, interp=interp, side=Side.INPUT)
    # (sigma - a)^{-1} B_T c = (1 - e^{-2}) / 2, the opposite sign of (A - sigma I)^{-1} B_T c
    assert raw[0, 0].real == pytest.approx(0.4323324, abs=1e-7)
    basis = build_subspace(A=scalar_sys.A, X=inputs, interp=interp, side=Side.INPUT)
    assert abs(basis[0, 0]) == pytest.approx(1.0)


def test_build_subspace_conjugate_pair(random_sys):
    sys = random_sys(n=6, seed=1)
    interp = InterpolationData(points=[1 + 1j, 1 - 1j], right_dirs=[[1.0], [1.0]])
    basis = build_subspace(A=sys.A, X=sys.B, interp=interp, side=Side.INPUT)
    assert basis.shape == (6, 2)
    assert not np.iscomplexobj(basis)
    np.testing.assert_allclose(basis.T @ basis, np.eye(2), atol=1e-13)


def test_build_subspace_duplicate_point(random_sys):
    sys = random_sys(n=6, seed=1)
    interp = InterpolationData(points=[2.0, 2.0], right_dirs=[[1.0], [1.0]])
    with pytest.raises(RankError):
        build_subspace(A=sys.A, X=sys.B, interp=interp, side=Side.INPUT)


def test_build_subspace_singular_shift():
    A = np.diag([1.0, -2.0])
    interp = InterpolationData(points=[1.0], right_dirs=[[1.0]])
    with pytest.raises(SingularShiftError):
        build_subspace(A=A, X=np.ones((2, 1)), interp=interp, side=Side.INPUT)


@pytest.mark.parametrize("side", [Side.INPUT, Side.OUTPUT])
def test_recover_sylvester_points(random_sys, side):
    sys = random_sys(n=8, m=2, p=2, seed=2)
    X = sys.B if side == Side.INPUT else sys.C.T
    interp = InterpolationData(
        points=[1.0, 2.0], right_dirs=[[1.0, 0.5], [0.3, 1.0]], left_dirs=[[1.0, 2.0], [1.0, -1.0]]
    )
    basis = build_subspace(A=sys.A, X=X, interp=interp, side=side)
    bundle = recover_sylvester(A=sys.A, X=X, V=basis, side=side)
    assert bundle.source == "projection"
    np.testing.assert_allclose(_sorted(np.linalg.eigvals(bundle.S)), [1.0, 2.0], atol=1e-8)
    assert bundle.residual <= 1e-8 * np.linalg.norm(sys.A)
    if side == Side.INPUT:
        assert bundle.L.shape == (2, 2)
        assert bundle.perp.shape == (8, 2)
    else:
        assert bundle.L.shape == (2, 2)
        assert bundle.perp.shape == (2, 8)


def test_recover_sylvester_complex_points(random_sys):
    sys = random_sys(n=10, seed=3)
    interp = InterpolationData(points=[0.5 + 2j, 0.5 - 2j, 3.0], right_dirs=[[1.0], [1.0], [1.0]])
    basis = build_subspace(A=sys.A, X=sys.B, interp=interp, side=Side.INPUT)
    bundle = recover_sylvester(A=sys.A, X=sys.B, V=basis, side=Side.INPUT)
    np.testing.assert_allclose(_sorted(np.linalg.eigvals(bundle.S)), _sorted(interp.points), atol=1e-8)


def test_recover_sylvester_scalar_fallback(scalar_sys):
    interval = TimeInterval.until(t=1)
    inputs = augment_inputs(sys=scalar_sys, interval=interval)
    interp = InterpolationData(points=[1.0], right_dirs=[[1.0, math.exp(-1)]])
    basis = build_subspace(A=scalar_sys.A, X=inputs, interp=interp, side=Side.INPUT)
    bundle = recover_sylvester(A=scalar_sys.A, X=inputs, V=basis, side=Side.INPUT, interp=interp)
    assert bundle.source == "interpolation"
    np.testing.assert_allclose(bundle.S, [[1.0]], atol=1e-12)
    assert bundle.residual <= 1e-12


def test_recover_sylvester_conditioning_error(scalar_sys):
    # the only column lies in range(X), so the residual factor vanishes
    with pytest.raises(ConditioningError):
        recover_sylvester(A=scalar_sys.A, X=scalar_sys.B, V=[[1.0]], side=Side.INPUT)


def test_projection_interpolates(random_sys):
    sys = random_sys(n=8, seed=4)
    interp = InterpolationData(points=[0.8, 2.5], right_dirs=[[1.0], [1.0]])
    V = build_subspace(A=sys.A, X=sys.B, interp=interp, side=Side.INPUT)
    W = V @ np.linalg.inv(V.T @ V)
    reduced_a, reduced_b, reduced_c = W.T @ sys.A @ V, W.T @ sys.B, sys.C @ V
    for sigma in interp.points:
        reduced = reduced_c @ np.linalg.solve(sigma * np.eye(2) - reduced_a, reduced_b)
        np.testing.assert_allclose(reduced, eval_tf(sys=sys, s=sigma), rtol=1e-8)


def test_augment_directions():
    interval = TimeInterval(t1=0.5, t2=2.0)
    interp = InterpolationData(points=[1.0, 3.0], right_dirs=[[1.0], [2.0]], left_dirs=[[1.0], [1.0]])
    augmented = augment_directions(interp=interp, interval=interval)
    np.testing.assert_allclose(
        augmented.right_dirs, [[math.exp(-0.5), math.exp(-2.0)], [2 * math.exp(-1.5), 2 * math.exp(-6.0)]]
    )
    assert augmented.left_dirs.shape == (2, 2)


def test_time_limited_output_subspace(random_sys):
    sys = random_sys(n=8, p=2, seed=5)
    interval = TimeInterval.until(t=1.0)
    outputs = augment_outputs(sys=sys, interval=interval)
    interp = augment_directions(
        interp=InterpolationData(points=[1.0, 2.0], left_dirs=[[1.0, 0.0], [0.0, 1.0]]), interval=interval
    )
    basis = build_subspace(A=sys.A, X=outputs.T, interp=interp, side=Side.OUTPUT)
    bundle = recover_sylvester(A=sys.A, X=outputs.T, V=basis, side=Side.OUTPUT, interp=interp)
    assert bundle.L.shape == (2, 4)
    assert bundle.residual <= 1e-8 * np.linalg.norm(sys.A)
