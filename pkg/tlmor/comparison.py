"""
Experiment orchestration: run a set of reduction methods on one model and
report H2,t and Hinf errors, pseudo-optimality defects and step-response errors.
"""

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize
import yaml
from benedict import benedict

from tlmor.baselines import atlbt_reduce, bt_reduce, irka_reduce, random_interp, tlbt_reduce, tlirka_reduce
from tlmor.constants import (
    CSV_COLUMNS,
    CSV_FLOAT_FORMAT,
    HINF_DECADES_MARGIN,
    HINF_GRID_POINTS,
    INFINITY,
    IRKA_MAXITER,
    IRKA_TOL,
    STEP_CSV_COLUMNS,
    STEP_GRID_POINTS,
    Method,
    Side,
)
from tlmor.gramnorm import h2t_error
from tlmor.models import generate_model, load_model
from tlmor.numkit import TlmorError
from tlmor.porkcure import cure_run, pork_reduce
from tlmor.sysmodel import InterpolationData, StabilityError, TimeInterval, freqresp, step_response
from tlmor.tlcure import approx_gramian, tlcure_v_run, tlcure_w_run
from tlmor.tlpork import (
    mirror_modal_schedule,
    otlpork_reduce,
    tlpork_reduce,
    verify_pseudo_optimality,
)
from tlmor.utils import get_thread_cap, get_tlmor_logger

LOGGER = get_tlmor_logger(name=__name__)


class ConfigError(TlmorError):
    def __init__(self, reason):
        self.reason = reason

    def __str__(self):
        return f"Invalid experiment configuration: {self.reason}"


class Interpolation:
    AUTO = "auto"
    MIRROR_MODAL = "mirror-modal"
    RANDOM = "random"

    ALL = (AUTO, MIRROR_MODAL, RANDOM)


# TLCURE runs feeding A-TLBT
APPROX_CTRL = "TLCURE-ctrl"
APPROX_OBS = "TLCURE-obs"


@dataclass
class ExperimentConfig:
    """
    One comparison run.

    model is {"paths": ...} for Matrix Market input or {"generator": name, "params": {...}}.
    interpolation is one of Interpolation.ALL or explicit InterpolationData.
    """

    model: dict
    methods: list
    r: int
    interval: TimeInterval = field(default_factory=TimeInterval)
    interpolation: object = Interpolation.AUTO
    seed: int = 0
    csv_path: str = None
    step_csv_path: str = None
    irka_tol: float = IRKA_TOL
    irka_maxiter: int = IRKA_MAXITER
    tlcure_tol: float = None
    cure_step_order: int = 2
    approx_order: int = None
    timeout: float = None
    timing: bool = False

    @classmethod
    def from_dict(cls, data):
        """
        Build a validated config from a (nested) mapping.

        Raises:
            ConfigError: Unknown methods, r < 1, t1 >= t2 or malformed entries.
        """
        data = benedict(data or {}, keypath_separator=".")
        try:
            interval = TimeInterval(t1=_as_float(data.get("interval.t1", 0.0)), t2=_as_float(data.get("interval.t2")))
        except (TypeError, ValueError) as exp:
            raise ConfigError(reason=str(exp)) from exp

        try:
            config = cls(
                model=dict(data.get("model") or {}),
                methods=_parse_methods(methods=data.get("methods", Method.ALL)),
                r=int(data.get("order", 0)),
                interval=interval,
                interpolation=_parse_interpolation(value=data.get("interpolation", Interpolation.AUTO)),
                seed=int(data.get("seed", 0)),
                csv_path=data.get("output.csv"),
                step_csv_path=data.get("output.steps"),
                irka_tol=float(data.get("tolerance.irka", IRKA_TOL)),
                irka_maxiter=int(data.get("tolerance.irka_maxiter", IRKA_MAXITER)),
                tlcure_tol=_optional_float(data.get("tolerance.tlcure")),
                cure_step_order=int(data.get("cure_step_order", 2)),
                approx_order=_optional_int(data.get("approx_order")),
                timeout=_optional_float(data.get("timeout")),
                timing=bool(data.get("timing", False)),
            )
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError, TlmorError) as exp:
            raise ConfigError(reason=str(exp)) from exp

        config.validate()
        return config

    def validate(self):
        if self.r < 1:
            raise ConfigError(reason=f"order must be at least 1, got {self.r}")

        if "paths" not in self.model and "generator" not in self.model:
            raise ConfigError(reason="model needs 'paths' or 'generator'")

        if self.cure_step_order < 1:
            raise ConfigError(reason=f"cure_step_order must be positive, got {self.cure_step_order}")

        if self.irka_maxiter < 1 or self.irka_tol <= 0:
            raise ConfigError(reason="IRKA tolerance and iteration cap must be positive")

    def build_model(self):
        if "paths" in self.model:
            return load_model(paths=self.model["paths"])

        params = dict(self.model.get("params") or {})
        if self.model["generator"] == "random":
            params.setdefault("seed", self.seed)

        try:
            return generate_model(name=self.model["generator"], **params)
        except (TypeError, ValueError) as exp:
            raise ConfigError(reason=str(exp)) from exp


def _as_float(value):
    if value is None:
        return INFINITY

    return float(value)


def _optional_float(value):
    return None if value is None else float(value)


def _optional_int(value):
    return None if value is None else int(value)


def _parse_methods(methods):
    if isinstance(methods, str):
        methods = Method.ALL if methods.lower() == "all" else [name.strip() for name in methods.split(",")]

    known = {name.upper(): name for name in Method.ALL}
    parsed = []
    for name in methods:
        method = known.get(str(name).upper())
        if method is None:
            raise ConfigError(reason=f"unknown method {name}, expected one of {', '.join(Method.ALL)}")

        if method not in parsed:
            parsed.append(method)

    if not parsed:
        raise ConfigError(reason="no methods requested")

    return parsed


def _complex_array(values):
    return np.asarray([complex(str(value).replace(" ", "")) for value in np.ravel(values)])


def _parse_interpolation(value):
    if isinstance(value, InterpolationData):
        return value

    if isinstance(value, str):
        if value not in Interpolation.ALL:
            raise ConfigError(reason=f"unknown interpolation mode {value}, expected one of {Interpolation.ALL}")
        return value

    points = _complex_array(values=value["points"])
    right = value.get("right_dirs")
    left = value.get("left_dirs")
    return InterpolationData(
        points=points,
        right_dirs=None if right is None else _complex_array(values=right).reshape(points.size, -1),
        left_dirs=None if left is None else _complex_array(values=left).reshape(points.size, -1),
    )


def load_config(path):
    """
    Load an ExperimentConfig from a JSON or YAML file.

    Raises:
        ConfigError: Unreadable file or invalid content.
    """
    try:
        with open(path, "r") as stream:
            data = yaml.safe_load(stream=stream)
    except (OSError, yaml.YAMLError) as exp:
        raise ConfigError(reason=f"cannot read {path}: {exp}") from exp

    if not isinstance(data, dict):
        raise ConfigError(reason=f"{path} does not hold a mapping")

    return ExperimentConfig.from_dict(data=data)


@dataclass
class TaskOutcome:
    value: object = None
    error: str = None
    runtime_ms: float = None


@dataclass
class ComparisonRow:
    method: str
    r: int
    t1: float
    t2: float
    h2t_error: float = None
    hinf_error: float = None
    stable: bool = None
    defect_energy: float = None
    defect_gramian: float = None
    runtime_ms: float = None
    status: str = "ok"

    def as_csv_row(self):
        row = []
        for column in CSV_COLUMNS:
            value = getattr(self, column)
            if value is None:
                row.append("")
            elif isinstance(value, bool):
                row.append(str(value).lower())
            elif isinstance(value, float):
                row.append(CSV_FLOAT_FORMAT.format(value))
            else:
                row.append(str(value))

        return row


@dataclass
class ComparisonReport:
    config: ExperimentConfig
    rows: list = field(default_factory=list)
    step_rows: list = field(default_factory=list)
    verification: dict = field(default_factory=dict)
    roms: dict = field(default_factory=dict)

    def row(self, method):
        return next(row for row in self.rows if row.method == method)

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as stream:
            writer = csv.writer(stream, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            writer.writerows(row.as_csv_row() for row in self.rows)

        LOGGER.info(f"Wrote {len(self.rows)} comparison rows to {path}")

    def write_step_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as stream:
            writer = csv.writer(stream, lineterminator="\n")
            writer.writerow(STEP_CSV_COLUMNS)
            for time_point, method, error in self.step_rows:
                writer.writerow([CSV_FLOAT_FORMAT.format(time_point), method, CSV_FLOAT_FORMAT.format(error)])

        LOGGER.info(f"Wrote {len(self.step_rows)} step-response samples to {path}")


def hinf_error(sys, rom, points=HINF_GRID_POINTS):
    """
    Estimate ||H - Hr||_inf: log-spaced sweep over the pole range (widened by
    HINF_DECADES_MARGIN decades) plus DC, refined by a bounded scalar search
    around the grid maximum.

    Returns:
        float: Largest singular value of the error found.
    """

    def _gain(omegas):
        difference = freqresp(sys=sys, omegas=omegas) - freqresp(sys=rom, omegas=omegas)
        return np.linalg.norm(difference, ord=2, axis=(1, 2))

    magnitudes = np.abs(np.concatenate([sys.poles, rom.poles]))
    magnitudes = magnitudes[magnitudes > 0]
    low = np.log10(magnitudes.min()) - HINF_DECADES_MARGIN if magnitudes.size else -HINF_DECADES_MARGIN
    high = np.log10(magnitudes.max()) + HINF_DECADES_MARGIN if magnitudes.size else HINF_DECADES_MARGIN
    exponents = np.linspace(low, high, points)
    gains = _gain(omegas=10**exponents)
    peak = int(np.argmax(gains))
    best = max(float(gains[peak]), float(_gain(omegas=[0.0])[0]))
    bounds = (exponents[max(peak - 1, 0)], exponents[min(peak + 1, points - 1)])
    if bounds[0] < bounds[1]:
        result = scipy.optimize.minimize_scalar(
            lambda exponent: -_gain(omegas=[10**exponent])[0], bounds=bounds, method="bounded"
        )
        best = max(best, float(-result.fun))

    return best


def _step_grid(sys, interval):
    if interval.is_finite:
        return np.linspace(interval.t1, interval.t2, STEP_GRID_POINTS)

    settle = 10.0 / float(np.min(np.abs(sys.poles.real)))
    return np.linspace(interval.t1, interval.t1 + settle, STEP_GRID_POINTS)


class ExperimentRunner:
    """
    Runs the requested methods and the tasks they depend on.

    With automatic interpolation data the runs chain as IRKA -> PORK, IRKA -> TLIRKA
    -> TLPORK/O-TLPORK and TLCURE (both sides) -> A-TLBT. Independent tasks of a
    stage run concurrently, capped by TLMOR_THREADS.

    Args:
        sys (StateSpace): Full-order model.
        config (ExperimentConfig): Validated configuration.
    """

    def __init__(self, sys, config):
        self.sys = sys
        self.config = config
        self.outcomes = {}

    @property
    def interval(self):
        return self.config.interval

    def dependencies(self, task):
        if task == Method.ATLBT:
            return [APPROX_CTRL, APPROX_OBS]

        if self.config.interpolation != Interpolation.AUTO:
            return []

        if task in (Method.PORK, Method.TLIRKA):
            return [Method.IRKA]

        if task in (Method.TLPORK, Method.OTLPORK):
            return [Method.TLIRKA]

        return []

    def stages(self):
        needed, pending = [], list(self.config.methods)
        while pending:
            task = pending.pop(0)
            if task not in needed:
                needed.append(task)
                pending.extend(self.dependencies(task=task))

        stages, done = [], set()
        while len(done) < len(needed):
            ready = [task for task in needed if task not in done and set(self.dependencies(task=task)) <= done]
            stages.append(ready)
            done.update(ready)

        return stages

    def _start_interp(self):
        interpolation, r = self.config.interpolation, self.config.r
        if isinstance(interpolation, InterpolationData):
            return interpolation

        if interpolation == Interpolation.MIRROR_MODAL:
            right = mirror_modal_schedule(sys=self.sys, steps=1, per_step=r, side=Side.RIGHT)[0]
            left = mirror_modal_schedule(sys=self.sys, steps=1, per_step=r, side=Side.LEFT)[0]
            return InterpolationData(points=right.points, right_dirs=right.right_dirs, left_dirs=left.left_dirs)

        return random_interp(sys=self.sys, r=r, seed=self.config.seed)

    def _data_from(self, task):
        rom = self._dependency(task=task)
        return rom.info.get("next_interp") or rom.info["interp"]

    def _dependency(self, task):
        outcome = self.outcomes[task]
        if outcome.error:
            raise TlmorError(f"{task} failed: {outcome.error}")

        return outcome.value

    def _interp_for(self, task):
        if self.config.interpolation == Interpolation.AUTO:
            return self._data_from(task=task)

        return self._start_interp()

    def _schedule(self, order, side):
        interpolation = self.config.interpolation
        if isinstance(interpolation, InterpolationData):
            return [interpolation]

        steps = math.ceil(order / self.config.cure_step_order)
        return mirror_modal_schedule(sys=self.sys, steps=steps, per_step=self.config.cure_step_order, side=side)

    def _irka_kwargs(self):
        return {
            "maxiter": self.config.irka_maxiter,
            "tol": self.config.irka_tol,
            "timeout": self.config.timeout,
            "seed": self.config.seed,
        }

    def _approx_order(self):
        return min(self.sys.n, self.config.approx_order or 4 * self.config.r)

    def execute(self, task):
        sys, r, interval = self.sys, self.config.r, self.interval
        if task == Method.BT:
            return bt_reduce(sys=sys, r=r)

        if task == Method.TLBT:
            return tlbt_reduce(sys=sys, r=r, interval=interval)

        if task == Method.IRKA:
            init = None if self.config.interpolation == Interpolation.AUTO else self._start_interp()
            return irka_reduce(sys=sys, r=r, init=init, **self._irka_kwargs())

        if task == Method.TLIRKA:
            init = self._interp_for(task=Method.IRKA)
            return tlirka_reduce(sys=sys, r=r, init=init, interval=interval, **self._irka_kwargs())

        if task == Method.PORK:
            return pork_reduce(sys=sys, interp=self._interp_for(task=Method.IRKA), side=Side.INPUT)

        if task == Method.TLPORK:
            return tlpork_reduce(sys=sys, interp=self._interp_for(task=Method.TLIRKA), interval=interval)

        if task == Method.OTLPORK:
            return otlpork_reduce(sys=sys, interp=self._interp_for(task=Method.TLIRKA), interval=interval)

        if task == Method.CURE:
            roms, _ = cure_run(sys=sys, schedule=self._schedule(order=r, side=Side.RIGHT), side=Side.INPUT)
            return roms[-1]

        if task == Method.TLCURE:
            schedule = self._schedule(order=r, side=Side.RIGHT)
            return tlcure_v_run(sys=sys, schedule=schedule, interval=interval, tol=self.config.tlcure_tol)

        if task == APPROX_CTRL:
            schedule = self._schedule(order=self._approx_order(), side=Side.RIGHT)
            return tlcure_v_run(sys=sys, schedule=schedule, interval=interval)

        if task == APPROX_OBS:
            schedule = self._schedule(order=self._approx_order(), side=Side.LEFT)
            return tlcure_w_run(sys=sys, schedule=schedule, interval=interval)

        if task == Method.ATLBT:
            return atlbt_reduce(
                sys=sys,
                r=r,
                interval=interval,
                approxP=approx_gramian(trace=self._dependency(task=APPROX_CTRL)),
                approxQ=approx_gramian(trace=self._dependency(task=APPROX_OBS)),
            )

        raise ConfigError(reason=f"unknown task {task}")

    def _run_task(self, task):
        start = time.perf_counter()
        try:
            value = self.execute(task=task)
        except (TlmorError, ValueError, np.linalg.LinAlgError) as exp:
            LOGGER.error(f"{task} failed: {exp}")
            return TaskOutcome(error=str(exp) or exp.__class__.__name__)

        return TaskOutcome(value=value, runtime_ms=(time.perf_counter() - start) * 1000)

    def run(self):
        with ThreadPoolExecutor(max_workers=get_thread_cap()) as executor:
            for stage in self.stages():
                futures = {task: executor.submit(self._run_task, task) for task in stage}
                for task in stage:
                    self.outcomes[task] = futures[task].result()

        return self.outcomes


def _reduced_model(value):
    # TlReduction and TlCureTrace carry the ROM as .rom
    return getattr(value, "rom", value)


def evaluate(sys, method, outcome, config):
    """
    Report row for one method outcome.

    Returns:
        tuple: (ComparisonRow, verification dict or None, step samples list).
    """
    interval = config.interval
    row = ComparisonRow(method=method, r=config.r, t1=interval.t1, t2=interval.t2)
    if config.timing and outcome.runtime_ms is not None:
        row.runtime_ms = outcome.runtime_ms

    if outcome.error:
        row.status = outcome.error
        return row, None, []

    rom = _reduced_model(value=outcome.value)
    row.r = rom.r
    row.stable = rom.is_stable
    row.hinf_error = hinf_error(sys=sys, rom=rom)
    verification = None
    try:
        row.h2t_error = h2t_error(sys=sys, rom=rom, interval=interval)
        if method in Method.PSEUDO_OPTIMAL:
            report = verify_pseudo_optimality(sys=sys, red=outcome.value if method != Method.TLCURE else rom)
            row.defect_energy = report.relative_energy_defect
            row.defect_gramian = report.relative_gramian_residual
            verification = report.as_dict()
    except StabilityError:
        row.status = "unstable ROM, H2,t error undefined"
    except TlmorError as exp:
        row.status = str(exp)

    grid = _step_grid(sys=sys, interval=interval)
    difference = step_response(sys=sys, grid=grid) - step_response(sys=rom, grid=grid)
    errors = np.linalg.norm(difference.reshape(grid.size, -1), axis=1)
    samples = [(float(time_point), method, float(error)) for time_point, error in zip(grid, errors)]
    return row, verification, samples


def run_comparison(config, sys=None):
    """
    Run every requested method and assemble the report in the configured method order.

    Args:
        config (ExperimentConfig): Validated configuration.
        sys (StateSpace): Model to use instead of config.build_model().

    Returns:
        ComparisonReport: Rows, step-response samples and verification defects;
            CSV files are written when config names them.
    """
    sys = sys or config.build_model()
    LOGGER.info(f"Comparing {', '.join(config.methods)} on n={sys.n} r={config.r} interval={config.interval}")
    outcomes = ExperimentRunner(sys=sys, config=config).run()
    report = ComparisonReport(config=config)
    with ThreadPoolExecutor(max_workers=get_thread_cap()) as executor:
        futures = {
            method: executor.submit(evaluate, sys, method, outcomes[method], config) for method in config.methods
        }
        for method in config.methods:
            row, verification, samples = futures[method].result()
            report.rows.append(row)
            report.step_rows.extend(samples)
            if verification is not None:
                report.verification[method] = verification

            if not outcomes[method].error:
                report.roms[method] = _reduced_model(value=outcomes[method].value)

            LOGGER.info(f"{method}: h2t_error={row.h2t_error} hinf_error={row.hinf_error} status={row.status}")

    if config.csv_path:
        report.write_csv(path=config.csv_path)

    if config.step_csv_path:
        report.write_step_csv(path=config.step_csv_path)

    return report
