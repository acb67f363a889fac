import numpy as np
import pytest

from tlmor.constants import GramianKind, Method, Side
from tlmor.gramnorm import h2t_energies, h2t_error, tl_gramian
from tlmor.sysmodel import InterpolationData, StateSpace, TimeInterval, eval_tf
from tlmor.tlcure import TlCureTrace, approx_gramian, tlcure_v_run, tlcure_w_run
from tlmor.tlpork import mirror_modal_schedule, otlpork_reduce, tlpork_reduce

SAMPLE_POINTS = (0.0, 1.3, 0.5 + 3.0j)


def _assert_same_transfer_function(first, second, rtol):
    for s in SAMPLE_POINTS:
        np.testing.assert_allclose(eval_tf(sys=first, s=s), eval_tf(sys=second, s=s), rtol=rtol, atol=1e-12)


def _schedule(steps, per_step, seed, side=Side.RIGHT):
    rng = np.random.default_rng(seed)
    schedule = []
    for _ in range(steps):
        points = rng.uniform(0.5, 10.0, size=per_step)
        dirs = np.ones((per_step, 1))
        schedule.append(
            InterpolationData(points=points, right_dirs=dirs)
            if side == Side.RIGHT
            else InterpolationData(points=points, left_dirs=dirs)
        )

    return schedule


def _non_increasing(values, slack):
    return all(later <= earlier + slack for earlier, later in zip(values, values[1:]))


def test_single_step_is_tlpork(random_sys):
    sys = random_sys(n=12, seed=31)
    interval = TimeInterval.until(t=1)
    schedule = _schedule(steps=1, per_step=3, seed=31)
    trace = tlcure_v_run(sys=sys, schedule=schedule, interval=interval)
    red = tlpork_reduce(sys=sys, interp=schedule[0], interval=interval)
    assert trace.steps == 1
    assert trace.rom.method == Method.TLCURE
    _assert_same_transfer_function(first=trace.rom, second=red.rom, rtol=1e-8)


def test_single_w_step_is_otlpork(random_sys):
    sys = random_sys(n=12, m=2, seed=32)
    interval = TimeInterval.until(t=1)
    schedule = _schedule(steps=1, per_step=3, seed=32, side=Side.LEFT)
    trace = tlcure_w_run(sys=sys, schedule=schedule, interval=interval)
    red = otlpork_reduce(sys=sys, interp=schedule[0], interval=interval)
    _assert_same_transfer_function(first=trace.rom, second=red.rom, rtol=1e-8)


@pytest.mark.incremental
class TestTlcureV:
    interval = TimeInterval.until(t=2)

    @pytest.fixture(scope="class")
    def system(self, random_sys):
        return random_sys(n=40, seed=33)

    @pytest.fixture(scope="class")
    def trace(self, system):
        return tlcure_v_run(sys=system, schedule=_schedule(steps=4, per_step=2, seed=33), interval=self.interval)

    def test_orders(self, trace):
        assert isinstance(trace, TlCureTrace)
        assert [rom.r for rom in trace.roms] == [2, 4, 6, 8]
        assert trace.V_tot_t.shape == (40, 8)
        assert trace.P_tot_t.shape == (8, 8)

    def test_monotone_errors(self, system, trace):
        assert _non_increasing(values=trace.errors, slack=1e-10)
        recomputed = [h2t_error(sys=system, rom=rom, interval=self.interval) for rom in trace.roms]
        np.testing.assert_allclose(trace.errors, recomputed)

    def test_every_step_is_pseudo_optimal(self, system, trace):
        for rom in trace.roms:
            full, reduced, error = h2t_energies(sys=system, rom=rom, interval=self.interval)
            assert abs(full - reduced - error) <= 1e-8 * full

    def test_nested_spectra(self, trace):
        previous = []
        for rom in trace.roms:
            spectrum = np.linalg.eigvals(rom.S)
            for value in previous:
                assert np.min(np.abs(spectrum - value)) <= 1e-8 * max(1.0, abs(value))
            previous = spectrum

    def test_gramian_defects(self, trace):
        assert all(defect >= -1e-8 for defect in trace.gramian_defects)
        assert _non_increasing(values=trace.gramian_defects, slack=1e-10)

    def test_approx_gramian(self, system, trace):
        approx = approx_gramian(trace=trace)
        np.testing.assert_allclose(approx, approx.T, atol=1e-14)
        exact = tl_gramian(sys=system, interval=self.interval)
        assert np.trace(system.C @ approx @ system.C.T) <= np.trace(system.C @ exact @ system.C.T) + 1e-8


@pytest.mark.parametrize("seed", range(5))
def test_w_type_monotone(random_sys, seed):
    sys = random_sys(n=20, m=2, seed=seed)
    interval = TimeInterval(t1=0.2, t2=1.5)
    trace = tlcure_w_run(sys=sys, schedule=_schedule(steps=4, per_step=2, seed=seed, side=Side.LEFT), interval=interval)
    assert _non_increasing(values=trace.errors, slack=1e-10)
    assert _non_increasing(values=trace.gramian_defects, slack=1e-10)


def test_siso_single_step_types_agree(random_sys):
    sys = random_sys(n=15, seed=34)
    interval = TimeInterval.until(t=1)
    right = _schedule(steps=1, per_step=3, seed=34)
    left = [InterpolationData(points=interp.points, left_dirs=interp.right_dirs) for interp in right]
    v_trace = tlcure_v_run(sys=sys, schedule=right, interval=interval)
    w_trace = tlcure_w_run(sys=sys, schedule=left, interval=interval)
    for v_rom, w_rom in zip(v_trace.roms, w_trace.roms):
        _assert_same_transfer_function(first=v_rom, second=w_rom, rtol=1e-8)


def test_full_order_recovery():
    sys = StateSpace(A=np.diag([-1.0, -2.0, -3.0]), B=[[1.0], [1.0], [1.0]], C=[[1.0, 2.0, 1.0]])
    interval = TimeInterval.until(t=1)
    schedule = mirror_modal_schedule(sys=sys, steps=2, per_step=2)
    trace = tlcure_v_run(sys=sys, schedule=schedule, interval=interval)
    assert trace.rom.r == 3
    _assert_same_transfer_function(first=trace.rom, second=sys, rtol=1e-8)
    assert trace.errors[-1] <= 1e-6
    np.testing.assert_allclose(approx_gramian(trace=trace), tl_gramian(sys=sys, interval=interval), atol=1e-6)


def test_tolerance_stops_early(random_sys):
    sys = random_sys(n=10, seed=35)
    trace = tlcure_v_run(
        sys=sys, schedule=_schedule(steps=3, per_step=2, seed=35), interval=TimeInterval.until(t=1), tol=1e3
    )
    assert trace.steps == 1


def test_approx_gramian_errors(random_sys):
    sys = random_sys(n=10, seed=36)
    trace = tlcure_v_run(sys=sys, schedule=_schedule(steps=1, per_step=2, seed=36), interval=TimeInterval.until(t=1))
    with pytest.raises(ValueError):
        approx_gramian(trace=trace, which=GramianKind.OBS)

    with pytest.raises(ValueError):
        approx_gramian(trace=TlCureTrace(side=Side.INPUT, interval=TimeInterval.until(t=1)))


def _conjugate_pair_schedule(steps, width, seed, side):
    rng = np.random.default_rng(seed)
    schedule = []
    for _ in range(steps):
        point = complex(rng.uniform(0.5, 10.0), rng.uniform(0.5, 5.0))
        direction = rng.standard_normal(width) + 1j * rng.standard_normal(width)
        points, dirs = [point, point.conjugate()], np.vstack([direction, direction.conjugate()])
        schedule.append(
            InterpolationData(points=points, right_dirs=dirs)
            if side == Side.RIGHT
            else InterpolationData(points=points, left_dirs=dirs)
        )

    return schedule


@pytest.mark.parametrize(
    "run, side",
    [
        pytest.param(tlcure_v_run, Side.RIGHT, id="v-type"),
        pytest.param(tlcure_w_run, Side.LEFT, id="w-type"),
    ],
)
@pytest.mark.parametrize("seed", range(20))
def test_mimo_monotone_decay(random_sys, run, side, seed):
    sys = random_sys(n=30, m=2, p=2, seed=seed)
    interval = TimeInterval.until(t=1)
    trace = run(sys=sys, schedule=_conjugate_pair_schedule(steps=5, width=2, seed=seed, side=side), interval=interval)
    assert trace.steps == 5
    assert _non_increasing(values=trace.errors, slack=1e-10)
    for rom in trace.roms:
        full, reduced, error = h2t_energies(sys=sys, rom=rom, interval=interval)
        assert abs(full - reduced - error) <= 1e-8 * full

    assert all(defect >= -1e-8 for defect in trace.gramian_defects)
    assert _non_increasing(values=trace.gramian_defects, slack=1e-10)
