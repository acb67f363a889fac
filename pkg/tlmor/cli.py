"""
Command line entry point.

    tlmor generate --generator heat_rod --n 200 --out rod/
    tlmor reduce --model rod/ --method TLPORK --order 5 --t2 2 --out rom/
    tlmor compare --generator heat_rod --n 200 --order 5 --t2 2 --out table.csv
    tlmor simulate --model rod/ --methods BT,TLPORK --order 5 --t2 2 --out steps.csv
    tlmor verify --generator random --n 30 --order 4 --t2 1

Exit codes: 0 success, 1 configuration or input error, 2 numerical failure.
"""

import argparse
import os
import sys

import numpy as np
import yaml
from benedict import benedict

from tlmor.comparison import ConfigError, ExperimentConfig, ExperimentRunner, run_comparison
from tlmor.constants import Method
from tlmor.gramnorm import h2t_error
from tlmor.models import GENERATORS, DimensionMismatchError, ModelFormatError, generate_model, write_model
from tlmor.numkit import TlmorError
from tlmor.sysmodel import StabilityError
from tlmor.tlpork import verify_pseudo_optimality
from tlmor.utils import get_tlmor_logger

LOGGER = get_tlmor_logger(name=__name__)
INPUT_ERRORS = (ConfigError, ModelFormatError, DimensionMismatchError)


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(reason=message)


def _add_model_args(parser):
    parser.add_argument("--config", help="JSON or YAML experiment configuration, flags override it")
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--model", nargs="+", help="Directory with A.mtx, B.mtx, C.mtx or the three files")
    source.add_argument("--generator", choices=sorted(GENERATORS), help="Generated benchmark model")
    parser.add_argument("--n", type=int, help="State dimension of a generated model")
    parser.add_argument("--m", type=int, help="Inputs of a random model")
    parser.add_argument("--p", type=int, help="Outputs of a random model")
    parser.add_argument("--diffusivity", type=float, help="Heat rod diffusivity")
    parser.add_argument("--seed", type=int, help="Seed for generated models and random interpolation data")


def _add_reduction_args(parser, methods_flag="--methods"):
    parser.add_argument("--order", type=int, help="Reduced order r")
    parser.add_argument("--t1", type=float, help="Interval start (default 0)")
    parser.add_argument("--t2", type=float, help="Interval end (default inf)")
    parser.add_argument(methods_flag, help="Comma separated methods or 'all'")
    parser.add_argument(
        "--points",
        help="Interpolation data: auto, mirror-modal, random or comma separated complex points",
    )
    parser.add_argument("--tol", type=float, help="IRKA/TLIRKA convergence tolerance")
    parser.add_argument("--timeout", type=float, help="Wall-clock budget per iterative method in seconds")
    parser.add_argument("--timing", action="store_true", help="Fill the runtime_ms column")


def build_parser():
    parser = ArgumentParser(prog="tlmor", description="Time-limited pseudo-optimal model order reduction")
    commands = parser.add_subparsers(dest="command", required=True)

    generate = commands.add_parser("generate", help="Write a generated model as Matrix Market files")
    _add_model_args(parser=generate)
    generate.add_argument("--out", required=True, help="Output directory")

    reduce = commands.add_parser("reduce", help="Reduce a model with one method")
    _add_model_args(parser=reduce)
    _add_reduction_args(parser=reduce, methods_flag="--method")
    reduce.add_argument("--out", required=True, help="Output directory for the ROM and summary.yaml")

    compare = commands.add_parser("compare", help="Compare methods, write the error table as CSV")
    _add_model_args(parser=compare)
    _add_reduction_args(parser=compare)
    compare.add_argument("--out", help="CSV report path")
    compare.add_argument("--steps-out", help="Step-response error CSV path")

    simulate = commands.add_parser("simulate", help="Step-response errors of the reduced models as CSV")
    _add_model_args(parser=simulate)
    _add_reduction_args(parser=simulate)
    simulate.add_argument("--out", required=True, help="Step-response error CSV path")

    verify = commands.add_parser("verify", help="Pseudo-optimality defects as YAML")
    _add_model_args(parser=verify)
    _add_reduction_args(parser=verify)
    verify.add_argument("--out", help="YAML path, stdout when omitted")
    return parser


def _parse_points(value):
    if value in ("auto", "mirror-modal", "random"):
        return value

    points = [complex(token.strip().replace(" ", "")) for token in value.split(",") if token.strip()]
    return {"points": [str(point) for point in points], "right_dirs": None, "left_dirs": None}


def _config_data(args, default_methods):
    """
    Merge the config file with the command line flags via benedict keypaths.
    """
    data = benedict({}, keypath_separator=".")
    if args.config:
        try:
            with open(args.config, "r") as stream:
                data = benedict(yaml.safe_load(stream=stream) or {}, keypath_separator=".")
        except (OSError, yaml.YAMLError) as exp:
            raise ConfigError(reason=f"cannot read {args.config}: {exp}") from exp

    if args.model:
        data["model"] = {"paths": args.model[0] if len(args.model) == 1 else args.model}
    elif args.generator:
        data["model"] = {"generator": args.generator, "params": {}}

    if data.get("model.generator"):
        for name in ("n", "m", "p", "diffusivity"):
            if getattr(args, name) is not None:
                data[f"model.params.{name}"] = getattr(args, name)

    overrides = {
        "seed": args.seed,
        "order": getattr(args, "order", None),
        "interval.t1": getattr(args, "t1", None),
        "interval.t2": getattr(args, "t2", None),
        "tolerance.irka": getattr(args, "tol", None),
        "timeout": getattr(args, "timeout", None),
    }
    for keypath, value in overrides.items():
        if value is not None:
            data[keypath] = value

    methods = getattr(args, "methods", None) or getattr(args, "method", None)
    if methods:
        data["methods"] = methods
    elif "methods" not in data:
        data["methods"] = list(default_methods)

    if getattr(args, "points", None):
        data["interpolation"] = _parse_points(value=args.points)

    if getattr(args, "timing", False):
        data["timing"] = True

    return data


def _generate(args):
    data = _config_data(args=args, default_methods=[])
    generator = data.get("model.generator")
    if not generator:
        raise ConfigError(reason="generate needs --generator")

    params = dict(data.get("model.params") or {})
    if generator == "random":
        params.setdefault("seed", args.seed or 0)

    try:
        model = generate_model(name=generator, **params)
    except (TypeError, ValueError) as exp:
        raise ConfigError(reason=str(exp)) from exp

    write_model(sys=model, directory=args.out, comment=f"tlmor {generator} {params}")
    return 0


def _with_directions(data, model):
    """Attach all-ones directions to command line points."""
    interpolation = data.get("interpolation")
    if isinstance(interpolation, dict) and interpolation.get("right_dirs") is None:
        count = len(interpolation["points"])
        data["interpolation"] = {
            "points": interpolation["points"],
            "right_dirs": np.ones((count, model.m)).tolist(),
            "left_dirs": np.ones((count, model.p)).tolist(),
        }

    return ExperimentConfig.from_dict(data=data)


def _prepare(args, default_methods):
    data = _config_data(args=args, default_methods=default_methods)
    # validate everything but explicit points before touching the model
    draft = benedict(dict(data), keypath_separator=".")
    if isinstance(draft.get("interpolation"), dict):
        draft["interpolation"] = "auto"

    model = ExperimentConfig.from_dict(data=draft).build_model()
    return _with_directions(data=data, model=model), model


def _scalar_info(info):
    scalars = {}
    for key, value in info.items():
        if isinstance(value, (bool, int, float, str)):
            scalars[key] = value if not isinstance(value, float) else float(value)
        elif isinstance(value, np.generic):
            scalars[key] = value.item()

    return scalars


def _reduce(args):
    config, model = _prepare(args=args, default_methods=[Method.TLPORK])
    if len(config.methods) != 1:
        raise ConfigError(reason=f"reduce takes exactly one method, got {config.methods}")

    method = config.methods[0]
    outcome = ExperimentRunner(sys=model, config=config).run()[method]
    if outcome.error:
        LOGGER.error(f"{method} failed: {outcome.error}")
        return 2

    rom = getattr(outcome.value, "rom", outcome.value)
    write_model(sys=rom, directory=args.out, comment=f"tlmor {method} r={rom.r} interval={config.interval}")
    summary = {
        "method": method,
        "n": model.n,
        "r": rom.r,
        "t1": config.interval.t1,
        "t2": config.interval.t2,
        "stable": bool(rom.is_stable),
        "info": _scalar_info(info=rom.info),
    }
    try:
        summary["h2t_error"] = h2t_error(sys=model, rom=rom, interval=config.interval)
    except StabilityError as exp:
        LOGGER.warning(f"H2,t error of the {method} ROM is undefined: {exp}")

    with open(os.path.join(args.out, "summary.yaml"), "w") as stream:
        yaml.safe_dump(summary, stream, sort_keys=False)

    LOGGER.info(f"{method} ROM of order {rom.r} written to {args.out}")
    return 0


def _compare(args):
    config, model = _prepare(args=args, default_methods=Method.ALL)
    config.csv_path = args.out or config.csv_path
    config.step_csv_path = args.steps_out or config.step_csv_path
    report = run_comparison(config=config, sys=model)
    if not config.csv_path:
        for row in report.rows:
            sys.stdout.write(",".join(row.as_csv_row()) + "\n")

    return 0


def _simulate(args):
    config, model = _prepare(args=args, default_methods=[Method.BT, Method.TLBT, Method.TLPORK])
    config.csv_path = None
    config.step_csv_path = args.out
    run_comparison(config=config, sys=model)
    return 0


def _verify(args):
    config, model = _prepare(args=args, default_methods=Method.PSEUDO_OPTIMAL)
    outcomes = ExperimentRunner(sys=model, config=config).run()
    document = {}
    for method in config.methods:
        outcome = outcomes[method]
        if outcome.error:
            document[method] = {"error": outcome.error}
            continue

        red = outcome.value if method != Method.TLCURE else outcome.value.rom
        document[method] = verify_pseudo_optimality(sys=model, red=red).as_dict()

    text = yaml.safe_dump(document, sort_keys=False)
    if args.out:
        with open(args.out, "w") as stream:
            stream.write(text)
    else:
        sys.stdout.write(text)

    return 0


COMMANDS = {
    "generate": _generate,
    "reduce": _reduce,
    "compare": _compare,
    "simulate": _simulate,
    "verify": _verify,
}


def main(argv=None):
    """
    Run the tlmor command line.

    Returns:
        int: 0 on success, 1 for configuration and input errors, 2 for numerical failures.
    """
    try:
        args = build_parser().parse_args(args=argv)
        return COMMANDS[args.command](args)
    except INPUT_ERRORS as exp:
        LOGGER.error(str(exp))
        return 1
    except TlmorError as exp:
        LOGGER.error(str(exp))
        return 2


if __name__ == "__main__":
    sys.exit(main())
