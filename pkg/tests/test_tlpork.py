import math

import numpy as np
import pytest

from tlmor.baselines import tlbt_reduce
from tlmor.constants import GramianKind, Side
from tlmor.gramnorm import h2t_energies, tl_gramian
from tlmor.numkit import expm
from tlmor.porkcure import pork_reduce
from tlmor.sysmodel import (
    ClosureError,
    InterpolationData,
    ReducedModel,
    StateSpace,
    TimeInterval,
    UnsupportedIntervalError,
    eval_tf,
)
from tlmor.tlpork import (
    TlReduction,
    mirror_modal_interp,
    mirror_modal_schedule,
    otlpork_reduce,
    tl_approx_gramian,
    tlpork_reduce,
    verify_pseudo_optimality,
)

SAMPLE_POINTS = (0.0, 0.7, 2.0 + 1.0j, 9.0j)


def _sorted(values):
    values = np.asarray(values, dtype=complex).ravel()
    return values[np.lexsort((np.round(values.imag, 6), np.round(values.real, 6)))]


def _assert_same_transfer_function(first, second, rtol):
    for s in SAMPLE_POINTS:
        np.testing.assert_allclose(eval_tf(sys=first, s=s), eval_tf(sys=second, s=s), rtol=rtol, atol=1e-12)


def _real_interp(r, seed, side=Side.RIGHT, width=1):
    rng = np.random.default_rng(seed)
    points = rng.uniform(0.5, 10.0, size=r)
    dirs = rng.standard_normal((r, width))
    if side == Side.RIGHT:
        return InterpolationData(points=points, right_dirs=dirs)
    return InterpolationData(points=points, left_dirs=dirs)


@pytest.fixture(scope="module")
def scalar_reduction(scalar_sys):
    return tlpork_reduce(
        sys=scalar_sys,
        interp=InterpolationData(points=[1.0], right_dirs=[[1.0]]),
        interval=TimeInterval.until(t=1),
    )


class TestScalarTlpork:
    def test_rom_matrices(self, scalar_reduction):
        rom = scalar_reduction.rom
        np.testing.assert_allclose(rom.A, [[-1.0]], atol=1e-12)
        np.testing.assert_allclose(rom.C @ rom.B, [[1.0]], atol=1e-12)

    def test_gramian_of_the_pair(self, scalar_reduction):
        # basis-invariant form of Q_S = 0.4323324 in the unnormalized basis
        chat = scalar_reduction.rom.C
        value = chat @ np.linalg.solve(scalar_reduction.QS, chat.T)
        assert value[0, 0] == pytest.approx(0.4323324, abs=1e-7)
        assert scalar_reduction.PS is None

    def test_exact_recovery(self, scalar_sys, scalar_reduction):
        _assert_same_transfer_function(first=scalar_reduction.rom, second=scalar_sys, rtol=1e-10)


def test_tlpork_energy_identity_diagonal(diag_sys):
    interval = TimeInterval.until(t=1)
    red = tlpork_reduce(sys=diag_sys, interp=InterpolationData(points=[1.0], right_dirs=[[1.0]]), interval=interval)
    full, reduced, error = h2t_energies(sys=diag_sys, rom=red.rom, interval=interval)
    assert abs(full - reduced - error) <= 1e-10


@pytest.mark.parametrize(
    "method, side, pork_side",
    [
        pytest.param(tlpork_reduce, Side.RIGHT, Side.INPUT, id="tlpork"),
        pytest.param(otlpork_reduce, Side.LEFT, Side.OUTPUT, id="otlpork"),
    ],
)
def test_long_horizon_is_pork(random_sys, method, side, pork_side):
    sys = random_sys(n=10, m=2, p=2, seed=21)
    # mirrored modal points keep every ROM pole at least as fast as the slowest system pole
    interp = mirror_modal_schedule(sys=sys, steps=1, per_step=4, side=side)[0]
    t2 = 50 / np.abs(np.linalg.eigvals(sys.A).real).min()
    red = method(sys=sys, interp=interp, interval=TimeInterval.until(t=t2))
    pork = pork_reduce(sys=sys, interp=interp, side=pork_side)
    omegas = 10 ** np.random.default_rng(21).uniform(-2, 2, size=20)
    for s in 1j * omegas:
        np.testing.assert_allclose(eval_tf(sys=red.rom, s=s), eval_tf(sys=pork, s=s), rtol=1e-6, atol=1e-12)


def test_siso_sides_agree(random_sys):
    sys = random_sys(n=12, seed=23)
    interval = TimeInterval.until(t=1.5)
    points = [1.0, 2.5, 4.0]
    interp = InterpolationData(points=points, right_dirs=np.ones((3, 1)), left_dirs=np.ones((3, 1)))
    right = tlpork_reduce(sys=sys, interp=interp, interval=interval)
    left = otlpork_reduce(sys=sys, interp=interp, interval=interval)
    _assert_same_transfer_function(first=right.rom, second=left.rom, rtol=1e-8)


def test_tlpork_infinite_horizon(scalar_sys):
    interp = InterpolationData(points=[1.0], right_dirs=[[1.0]])
    with pytest.raises(UnsupportedIntervalError):
        tlpork_reduce(sys=scalar_sys, interp=interp, interval=TimeInterval())


@pytest.mark.incremental
class TestTlporkProperties:
    interval = TimeInterval.until(t=1)

    @pytest.fixture(scope="class")
    def system(self):
        return StateSpace(
            A=np.diag([-0.5, -1.0, -2.0, -4.0, -7.0, -11.0]) + np.diag([0.3] * 5, 1),
            B=[[1.0, 0.0], [0.5, 1.0], [0.0, 1.0], [1.0, -1.0], [0.2, 0.0], [1.0, 1.0]],
            C=[[1.0, 0.0, 1.0, 0.5, 0.0, 1.0], [0.0, 1.0, -1.0, 0.0, 1.0, 0.3]],
        )

    @pytest.fixture(scope="class")
    def interp(self):
        return InterpolationData(
            points=[0.8, 1.5 + 2.0j, 1.5 - 2.0j],
            right_dirs=[[1.0, 0.5], [1.0 + 1.0j, 0.2], [1.0 - 1.0j, 0.2]],
            left_dirs=[[0.3, 1.0], [1.0, 2.0j], [1.0, -2.0j]],
        )

    @pytest.fixture(scope="class")
    def right(self, system, interp):
        return tlpork_reduce(sys=system, interp=interp, interval=self.interval)

    @pytest.fixture(scope="class")
    def left(self, system, interp):
        return otlpork_reduce(sys=system, interp=interp, interval=self.interval)

    def test_poles_are_mirror_images(self, right, left, interp):
        expected = _sorted(-interp.points.conjugate())
        np.testing.assert_allclose(_sorted(right.rom.poles), expected, atol=1e-8)
        np.testing.assert_allclose(_sorted(left.rom.poles), expected, atol=1e-8)

    def test_structure_preservation(self, right):
        rom = right.rom
        expected = np.hstack([rom.B, -expm(matrix=rom.A * self.interval.t2) @ rom.B])
        np.testing.assert_allclose(right.xi, expected, atol=1e-9 * np.abs(expected).max())

    def test_gramian_recovery(self, right, left):
        rom_ctrl = tl_gramian(sys=right.rom, interval=self.interval, which=GramianKind.CTRL)
        np.testing.assert_allclose(np.linalg.inv(right.QS), rom_ctrl, rtol=1e-8, atol=1e-12)
        rom_obs = tl_gramian(sys=left.rom, interval=self.interval, which=GramianKind.OBS)
        np.testing.assert_allclose(np.linalg.inv(left.PS), rom_obs, rtol=1e-8, atol=1e-12)

    def test_energy_identity(self, system, right, left):
        for red in (right, left):
            full, reduced, error = h2t_energies(sys=system, rom=red.rom, interval=self.interval)
            assert abs(full - reduced - error) <= 1e-8 * full

    def test_verification_report(self, system, right, left):
        for red in (right, left):
            report = verify_pseudo_optimality(sys=system, red=red)
            assert report.side == red.side
            assert report.relative_gramian_residual <= 1e-8
            assert report.relative_energy_defect <= 1e-8
            assert report.max_tangential_defect <= 1e-6
            assert report.gramian_recovery_defect <= 1e-8
            assert len(report.tangential_defects) == 3

    def test_approx_gramian_bound(self, system, right):
        exact = tl_gramian(sys=system, interval=self.interval)
        approx = tl_approx_gramian(red=right)
        assert np.trace(system.C @ approx @ system.C.T) <= np.trace(system.C @ exact @ system.C.T) + 1e-8

    def test_realization_independence(self, system, interp, right):
        transform = np.eye(system.n) + 0.3 * np.random.default_rng(24).standard_normal((system.n, system.n))
        other = tlpork_reduce(sys=system.transform(T=transform), interp=interp, interval=self.interval)
        _assert_same_transfer_function(first=other.rom, second=right.rom, rtol=1e-7)


@pytest.mark.parametrize(
    "method, side",
    [
        pytest.param(tlpork_reduce, Side.RIGHT, id="tlpork"),
        pytest.param(otlpork_reduce, Side.LEFT, id="otlpork"),
    ],
)
@pytest.mark.parametrize("width", [1, 2])
@pytest.mark.parametrize("seed", range(20))
def test_random_verification(random_sys, method, side, width, seed):
    sys = random_sys(n=30, m=width, p=width, seed=seed)
    interp = _real_interp(r=4, seed=seed, side=side, width=width)
    red = method(sys=sys, interp=interp, interval=TimeInterval.until(t=1))
    report = verify_pseudo_optimality(sys=sys, red=red)
    assert report.side == side
    assert report.relative_gramian_residual <= 1e-6
    assert report.relative_energy_defect <= 1e-6
    assert report.max_tangential_defect <= 1e-6
    assert report.gramian_recovery_defect <= 1e-6
    assert len(report.tangential_defects) == 4


def _spread_spectrum_sys(n, seed):
    # real poles spread over -0.1 .. -30 in an orthonormal modal basis
    rng = np.random.default_rng(seed)
    basis, _ = np.linalg.qr(rng.standard_normal((n, n)))
    poles = -(10 ** rng.uniform(-1.0, 1.5, size=n))
    return StateSpace(A=basis @ np.diag(poles) @ basis.T, B=rng.standard_normal((n, 1)), C=rng.standard_normal((1, n)))


def test_tlbt_is_not_pseudo_optimal():
    interval = TimeInterval.until(t=1)
    violations = 0
    for seed in range(20):
        sys = _spread_spectrum_sys(n=20, seed=seed)
        report = verify_pseudo_optimality(sys=sys, red=tlbt_reduce(sys=sys, r=2, interval=interval))
        violations += report.max_tangential_defect > 1e-4

    assert violations >= 18


@pytest.mark.parametrize("method", [tlpork_reduce, otlpork_reduce])
def test_generalized_interval(random_sys, method):
    sys = random_sys(n=12, m=1, p=1, seed=25)
    interval = TimeInterval(t1=0.3, t2=1.2)
    points = [1.0, 2.0, 3.5]
    dirs = np.ones((3, 1))
    red = method(sys=sys, interp=InterpolationData(points=points, right_dirs=dirs, left_dirs=dirs), interval=interval)
    np.testing.assert_allclose(_sorted(red.rom.poles), _sorted(-np.asarray(points)), atol=1e-8)
    full, reduced, error = h2t_energies(sys=sys, rom=red.rom, interval=interval)
    assert abs(full - reduced - error) <= 1e-8 * full
    report = verify_pseudo_optimality(sys=sys, red=red)
    assert report.relative_gramian_residual <= 1e-8
    assert report.gramian_recovery_defect <= 1e-8


def test_verification_negative_control(random_sys):
    sys = random_sys(n=10, seed=26)
    interval = TimeInterval.until(t=1)
    half_gain = ReducedModel(Ahat=sys.A, Bhat=sys.B, Chat=0.5 * sys.C, method="half", interval=interval)
    report = verify_pseudo_optimality(sys=sys, red=half_gain)
    assert report.relative_gramian_residual > 1e-4
    assert report.relative_energy_defect > 1e-4
    assert report.gramian_recovery_defect is None


def test_verification_of_the_system_itself(random_sys):
    sys = random_sys(n=5, seed=27)
    interval = TimeInterval.until(t=1)
    same = ReducedModel(Ahat=sys.A, Bhat=sys.B, Chat=sys.C, method="identity", interval=interval)
    report = verify_pseudo_optimality(sys=sys, red=same)
    assert report.relative_gramian_residual <= 1e-10
    assert report.relative_energy_defect <= 1e-10
    assert report.max_tangential_defect <= 1e-12
    assert isinstance(report.as_dict()["tangential_defects"], list)


class TestMirrorModal:
    def test_diagonal_points(self, diag_sys):
        interp = mirror_modal_interp(sys=diag_sys, selected_eigs=[0, 1])
        np.testing.assert_allclose(np.sort(interp.points.real), [1.0, 2.0])
        red = tlpork_reduce(sys=diag_sys, interp=interp, interval=TimeInterval.until(t=1))
        np.testing.assert_allclose(_sorted(red.rom.poles), [-2.0, -1.0], atol=1e-8)

    def test_full_order_recovers_system(self, diag_sys):
        interp = mirror_modal_interp(sys=diag_sys, selected_eigs=[0, 1])
        red = tlpork_reduce(sys=diag_sys, interp=interp, interval=TimeInterval.until(t=1))
        _assert_same_transfer_function(first=red.rom, second=diag_sys, rtol=1e-8)

    def test_left_side(self, diag_sys):
        interp = mirror_modal_interp(sys=diag_sys, selected_eigs=[0], side=Side.LEFT)
        assert interp.right_dirs is None
        assert interp.left_dirs.shape == (1, 1)

    def test_half_of_a_conjugate_pair(self):
        sys = StateSpace(A=[[-1.0, 2.0], [-2.0, -1.0]], B=[[1.0], [0.0]], C=[[1.0, 1.0]])
        with pytest.raises(ClosureError):
            mirror_modal_interp(sys=sys, selected_eigs=[0])

    def test_schedule(self, random_sys):
        sys = random_sys(n=10, seed=28)
        schedule = mirror_modal_schedule(sys=sys, steps=3, per_step=2)
        assert len(schedule) == 3
        assert all(1 <= interp.r <= 2 for interp in schedule)
        points = np.concatenate([interp.points for interp in schedule])
        assert len(set(np.round(points, 8))) == points.size


def test_tl_reduction_type(scalar_reduction):
    assert isinstance(scalar_reduction, TlReduction)
    assert scalar_reduction.side == Side.RIGHT
    assert scalar_reduction.parts[1][0, 0] == pytest.approx(scalar_reduction.parts[0][0, 0] * math.exp(-1))
