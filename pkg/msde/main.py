#!/usr/bin/env python
"""
.. module:: main
   :platform: Unix, MacOSX
   :synopsis: Main entry of the script.

"""
import argparse
import logging
import sys

from . import asymptotics, dataio, estimation, simulation
from .divergence import NAMED_LAMBDAS, DivergenceParams
from .exceptions import (DataFormatError, DegenerateInformation, DomainError, EmptyDataset, MsdeError,
                         NonConvergence, SimulationError, TruncationError, UndefinedDivergence)
from .models import get_model

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INADMISSIBLE = 2
EXIT_NONCONVERGENCE = 3
EXIT_IO = 4
EXIT_BAD_ARGS = 5

# first matching class wins
EXIT_CODES = (
    (UndefinedDivergence, EXIT_INADMISSIBLE),
    (NonConvergence, EXIT_NONCONVERGENCE),
    (TruncationError, EXIT_NONCONVERGENCE),
    (SimulationError, EXIT_NONCONVERGENCE),
    (DegenerateInformation, EXIT_NONCONVERGENCE),
    (DataFormatError, EXIT_IO),
    (EmptyDataset, EXIT_IO),
    (OSError, EXIT_IO),
    (DomainError, EXIT_BAD_ARGS),
    (MsdeError, 1),
)

TABLE_ALPHAS = [0.0, 0.1, 0.25, 0.4, 0.5, 0.6, 0.8, 1.0]
TABLE_LAMBDAS = [-1.0, -0.7, -0.5, -0.3, -0.1, 0.0, 0.5, 1.0, 1.3, 1.5, 2.0]
ARE_ALPHAS = [0.0, 0.05, 0.1, 0.3, 0.5, 0.7, 1.0]
ARE_THETAS = {
    'poisson': [2.0, 3.0, 5.0, 10.0, 15.0],
    'geometric': [0.1, 0.2, 0.5, 0.7, 0.9],
}
DEFAULT_DIGITS = {'poisson': 2, 'geometric': 4}


def exit_code(err):
    for cls, code in EXIT_CODES:
        if isinstance(err, cls):
            return code
    return 1


class ArgumentParser(argparse.ArgumentParser):
    """argparse with the bad-arguments exit code instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_BAD_ARGS, "{}: error: {}\n".format(self.prog, message))


def lambda_value(text):
    """Float or a named Cressie-Read member (PCS, LD, HD, KLD, NCS)."""
    if text.upper() in NAMED_LAMBDAS:
        return NAMED_LAMBDAS[text.upper()]
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("{!r} is neither a number nor one of {}".format(
            text, ", ".join(NAMED_LAMBDAS)))


def _common_arguments(parser):
    parser.add_argument("--config", type=str, help="key=value file providing defaults for any flag")
    parser.add_argument("-f", "--format", default="text", choices=dataio.FORMATS)
    parser.add_argument("-o", "--output", type=str, help="output filename")
    parser.add_argument("--digits", type=int, help="decimals in text output")
    parser.add_argument("--no-timestamp", action="store_true", help="omit the manifest timestamp")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("-q", "--quiet", action="store_true", help="no progress bars")


def _data_arguments(parser):
    parser.add_argument("-d", "--data", required=True,
                        help="frequency or raw-sample csv, or a bundled dataset ({})".format(
                            ", ".join(dataio.BUNDLED_DATASETS)))
    parser.add_argument("--data-format", default="auto", choices=("auto", "frequency", "raw"))
    parser.add_argument("--exclude", nargs="+", type=int, default=[], help="support points to drop")
    parser.add_argument("-m", "--model", default="poisson")


def _config_value(action, text):
    if isinstance(action, argparse._CountAction):
        return int(text)
    if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
        return text.lower() in ('1', 'true', 'yes', 'on')
    convert = action.type or str
    if action.nargs in ('+', '*'):
        return [convert(v) for v in text.replace(',', ' ').split()]
    return convert(text)


def _apply_config(parser, path):
    """Turn a key=value file into parser defaults; keys are long flag names."""
    config = dataio.load_config(path)
    by_name = {}
    for action in parser._actions:
        names = {action.dest} | {opt.lstrip('-').replace('-', '_') for opt in action.option_strings
                                 if opt.startswith('--')}
        for name in names:
            by_name[name] = action
    unknown = sorted(set(config) - set(by_name))
    if unknown:
        parser.error("unknown config key(s) in {}: {}".format(path, ", ".join(unknown)))
    defaults = {}
    for key, text in config.items():
        action = by_name[key]
        try:
            defaults[action.dest] = _config_value(action, text)
        except (TypeError, ValueError, argparse.ArgumentTypeError):
            parser.error("bad config value {}={!r}".format(key, text))
        action.required = False
    parser.set_defaults(**defaults)


def _parse(parser, argv):
    """Parse ``argv``; a --config file supplies defaults that flags override."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        _apply_config(parser, known.config)
    args = parser.parse_args(argv)
    _setup_logging(args.verbose)
    return args


def _setup_logging(verbose):
    level = logging.WARNING
    if verbose == 1:
        level = logging.INFO
    elif verbose > 1:
        level = logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(asctime)s %(name)s %(levelname)s: %(message)s")


def _emit(text, output):
    if output is not None:
        with open(output, 'w') as ofhandle:
            ofhandle.write(text)
    else:
        sys.stdout.write(text)


def _digits(args, model_name):
    return args.digits if args.digits is not None else DEFAULT_DIGITS.get(model_name, 4)


def fit_command(argv):
    """Fit one (alpha, lambda) cell and report theta_hat with its standard error."""
    parser = ArgumentParser(prog="msde fit", description="Minimum S-divergence estimate of one parameter")
    _data_arguments(parser)
    parser.add_argument("-a", "--alpha", type=float, required=True)
    parser.add_argument("-l", "--lambda", dest="lambda_", type=lambda_value, required=True)
    _common_arguments(parser)
    args = _parse(parser, argv)

    model = get_model(args.model)
    params = DivergenceParams(args.alpha, args.lambda_)
    data, path = dataio.load_dataset(args.data, args.data_format, args.exclude)
    manifest = dataio.make_manifest("fit", {
        'data': args.data, 'exclude': args.exclude, 'model': model.name,
        'alpha': params.alpha, 'lambda': params.lam}, path, not args.no_timestamp)
    try:
        result = estimation.fit(data, model, params)
    except UndefinedDivergence as err:
        logger.warning("%s", err)
        _emit(dataio.render_undefined(params, str(err), manifest, args.format), args.output)
        return EXIT_INADMISSIBLE
    result.std_error = asymptotics.std_error(result, data, model, params.alpha)
    _emit(dataio.render_fit(result, manifest, args.format, _digits(args, model.name)), args.output)
    return EXIT_OK


def table_command(argv):
    """Fit a lambda x alpha grid; cells never abort the table."""
    parser = ArgumentParser(prog="msde table", description="Grid of minimum S-divergence estimates")
    _data_arguments(parser)
    parser.add_argument("--grid-alphas", nargs="+", type=float, default=TABLE_ALPHAS)
    parser.add_argument("--grid-lambdas", nargs="+", type=lambda_value, default=TABLE_LAMBDAS)
    parser.add_argument("-j", "--jobs", type=int, default=1)
    _common_arguments(parser)
    args = _parse(parser, argv)

    model = get_model(args.model)
    data, path = dataio.load_dataset(args.data, args.data_format, args.exclude)
    manifest = dataio.make_manifest("table", {
        'data': args.data, 'exclude': args.exclude, 'model': model.name,
        'alphas': args.grid_alphas, 'lambdas': args.grid_lambdas}, path, not args.no_timestamp)
    grid = estimation.fit_grid(data, model, args.grid_alphas, args.grid_lambdas,
                               jobs=args.jobs, progress=not args.quiet)
    _emit(dataio.render_grid(grid, manifest, args.format, _digits(args, model.name)), args.output)
    return EXIT_OK


def are_command(argv):
    """Asymptotic relative efficiency table, thetas by alphas."""
    parser = ArgumentParser(prog="msde are", description="Asymptotic relative efficiency against the MLE")
    parser.add_argument("-m", "--model", default="poisson")
    parser.add_argument("-t", "--theta", nargs="+", type=float)
    parser.add_argument("--grid-alphas", nargs="+", type=float, default=ARE_ALPHAS)
    _common_arguments(parser)
    args = _parse(parser, argv)

    model = get_model(args.model)
    thetas = args.theta or ARE_THETAS[model.name]
    manifest = dataio.make_manifest("are", {'model': model.name, 'thetas': thetas,
                                            'alphas': args.grid_alphas}, timestamp=not args.no_timestamp)
    table = asymptotics.are_table(model, thetas, args.grid_alphas)
    digits = args.digits if args.digits is not None else 2
    _emit(dataio.render_are(model.name, thetas, args.grid_alphas, table, manifest, args.format, digits),
          args.output)
    return EXIT_OK


def _plan_arguments(parser):
    parser.add_argument("-p", "--plan", type=str, help="simulation plan (key=value)")
    parser.add_argument("-m", "--model")
    parser.add_argument("--theta", dest="theta_true", type=float)
    parser.add_argument("-n", type=int)
    parser.add_argument("-r", "--replicates", type=int)
    parser.add_argument("-a", "--alpha", type=float)
    parser.add_argument("--epsilon", type=float)
    parser.add_argument("--location", type=int)
    parser.add_argument("-s", "--seed", type=int)
    parser.add_argument("-j", "--jobs", type=int, default=1)


def _plan_overrides(args):
    return {'model': args.model, 'theta_true': args.theta_true, 'n': args.n, 'replicates': args.replicates,
            'alpha': args.alpha, 'epsilon': args.epsilon, 'location': args.location, 'seed': args.seed}


def simulate_command(argv):
    """Run a Monte Carlo plan and compare with the sandwich variance."""
    parser = ArgumentParser(prog="msde simulate", description="Monte Carlo check of the asymptotic variance")
    _plan_arguments(parser)
    parser.add_argument("-l", "--lambda", dest="lambda_", type=lambda_value)
    _common_arguments(parser)
    args = _parse(parser, argv)

    overrides = _plan_overrides(args)
    overrides['lambda'] = args.lambda_
    plan = dataio.parse_plan(args.plan if args.plan else {}, overrides)
    manifest = dataio.make_manifest("simulate", dataio.plan_to_dict(plan), args.plan,
                                    not args.no_timestamp)
    report = simulation.run_plan(plan, jobs=args.jobs, progress=not args.quiet)
    _emit(dataio.render_report(report, manifest, args.format), args.output)
    return EXIT_OK


def lambda_check_command(argv):
    """Scaled variances of theta_hat across lambdas on common datasets."""
    parser = ArgumentParser(prog="msde lambda-check", description="Lambda independence of the variance")
    _plan_arguments(parser)
    parser.add_argument("-l", "--lambdas", nargs="+", type=lambda_value, default=[-0.5, 0.0, 1.0])
    _common_arguments(parser)
    args = _parse(parser, argv)

    overrides = _plan_overrides(args)
    overrides['lambda'] = args.lambdas[0]
    plan = dataio.parse_plan(args.plan if args.plan else {}, overrides)
    parameters = dataio.plan_to_dict(plan)
    parameters['lambda'] = list(args.lambdas)
    manifest = dataio.make_manifest("lambda-check", parameters, args.plan, not args.no_timestamp)
    verdict = simulation.lambda_independence_check(
        plan.model, plan.theta_true, plan.n, plan.replicates, plan.alpha, args.lambdas, plan.seed,
        plan.epsilon, plan.location, jobs=args.jobs, progress=not args.quiet)
    _emit(dataio.render_verdict(verdict, manifest, args.format), args.output)
    return EXIT_OK


COMMANDS = {
    "fit": fit_command,
    "table": table_command,
    "are": are_command,
    "simulate": simulate_command,
    "lambda-check": lambda_check_command,
}

USAGE = """msde <command> [<args>]

Commands can be:
fit           Estimate theta for one (alpha, lambda).
table         Estimate theta over a lambda x alpha grid.
are           Asymptotic relative efficiency table.
simulate      Monte Carlo run of a simulation plan.
lambda-check  Compare estimator variances across lambdas.
"""


def run(argv):
    """Dispatch ``argv`` (without the program name) and return the exit code."""
    parser = ArgumentParser(description="Minimum S-divergence estimation for discrete models", usage=USAGE)
    parser.add_argument('command')
    args = parser.parse_args(argv[0:1])
    if args.command not in COMMANDS:
        parser.print_help()
        return EXIT_BAD_ARGS
    try:
        return COMMANDS[args.command](argv[1:])
    except MsdeError as err:
        logger.error("%s", err)
        return exit_code(err)
    except OSError as err:
        logger.error("%s", err)
        return EXIT_IO


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
