"""
Command-line front end: simulate, region, certify and fit.

Every command writes its data files into --out-dir together with a
manifest.json holding the resolved configuration, seed and version, so
any output can be regenerated exactly.

Exit codes: 0 success (no-certificate verdicts included), 1 validation or
configuration error, 2 numeric fault, 3 I/O error.
"""

import argparse
import json
import logging
import os
import sys

import pandas as pd

from errors import ConfigError, DecayedBelowFloorError, MjdsError, NumericFaultError, ValidationError
from history_core import History
from jump_system import build_jump_system, simulate_ensemble
from lyapunov import c_outside_candidate_range, feasible_region, region_frontier, unit_grid
from markov_chain import stationary_distribution
from moments import MomentCurve, emss_check, fit_decay
from sat_example import SatSystemSpec, certify_sat, certify_sat_sampled, parse_c
from systems import SAT_GAMMA_RANGE, model_from_config
from utils.config_manager import LOG_LEVEL_ENV, config_keys, resolve_config
from utils.gnuplot import ensemble_script, region_script
from utils.helpers import version_string, write_csv, write_json
from utils.performance import time_function

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERIC = 2
EXIT_IO = 3


class CliParser(argparse.ArgumentParser):
    """argparse would exit with status 2, which is reserved for numeric faults"""

    def error(self, message):
        raise ConfigError(message)


def build_parser():
    common = CliParser(add_help=False)
    common.add_argument('--seed', type=int, help='Master seed')
    common.add_argument('--out-dir', dest='out_dir', help='Output directory (env MJDS_OUT_DIR)')
    common.add_argument('--threads', type=int, help='Worker threads (env MJDS_THREADS)')
    common.add_argument('--config', help='JSON configuration file; flags override it')
    common.add_argument('--gnuplot', action='store_true', default=None, help='Also write a gnuplot script')
    common.add_argument('-v', '--verbose', action='store_true', help='Debug logging')
    common.add_argument('-q', '--quiet', action='store_true', help='Warnings and errors only')

    system = CliParser(add_help=False)
    system.add_argument('--system', help='Built-in system name (default sat)')
    system.add_argument('--gamma', type=float)
    system.add_argument('--p', type=float, help='Probability of staying in mode 1 (delay 0)')
    system.add_argument('--q', type=float, help='Probability of staying in mode 2 (delay 2)')
    system.add_argument('--c', help="Candidate parameter: a number, 'e' or 'auto'")
    system.add_argument('--lambda-ratio', dest='lambda_ratio', type=float,
                        help='Override the witness ratio lambda2/lambda1')

    parser = CliParser(prog='mjds', description='Mean-square stability of Markov-delay systems')
    commands = parser.add_subparsers(dest='command', required=True, parser_class=CliParser)

    sim = commands.add_parser('simulate', parents=[common, system], help='Monte Carlo ensemble')
    sim.add_argument('--runs', type=int)
    sim.add_argument('--horizon', type=int)
    sim.add_argument('--xi0', type=float, help='Constant initial history value')
    sim.add_argument('--eta0', type=int, help='Pin the initial mode (default uniform)')
    sim.add_argument('--dump-runs', dest='dump_runs', type=int, help='Write the first M trajectories')

    region = commands.add_parser('region', parents=[common, system], help='(p, q) feasibility grid')
    region.add_argument('--grid', type=int, help='Cells per axis')

    cert = commands.add_parser('certify', parents=[common, system], help='Decay certificate')
    cert.add_argument('--alpha3', type=float, help='Declared alpha3; switches to the sampled check')
    cert.add_argument('--samples', type=int)
    cert.add_argument('--radius', type=float)

    fit = commands.add_parser('fit', parents=[common], help='Decay fit of an ensemble CSV')
    fit.add_argument('--curve', help='ensemble.csv written by simulate')
    fit.add_argument('--certificate', help='certificate.json written by certify')
    fit.add_argument('--xi0-norm', dest='xi0_norm', type=float)
    fit.add_argument('--burn-in', dest='burn_in', type=int)
    return parser


def configure_logging(verbose=False, quiet=False):
    level_name = os.getenv(LOG_LEVEL_ENV, 'INFO').upper()
    level = getattr(logging, level_name, logging.INFO)
    if verbose:
        level = logging.DEBUG
    elif quiet:
        level = logging.WARNING
    logging.basicConfig(level=level, format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    logging.getLogger().setLevel(level)


def _manifest(config, **extra):
    manifest = {
        'command': config.command,
        'config': config.to_dict(),
        'seed': config.seed,
        'version': version_string(),
    }
    manifest.update(extra)
    return manifest


def _path(config, name):
    return os.path.join(config.out_dir, name)


def _check_gamma(gamma):
    low, high = SAT_GAMMA_RANGE
    if not low <= gamma <= high:
        raise ValidationError(f"gamma must lie in [{low}, {high}], got {gamma}")


def _build_system(config):
    model = model_from_config(config.model_config())
    tpm = config.tpm
    if tpm is None:
        if len(model.alphabet) != 2:
            raise ConfigError("a 'tpm' is required for systems with other than two modes", field='tpm')
        tpm = [[config.p, 1.0 - config.p], [1.0 - config.q, config.q]]
    return build_jump_system(model, tpm)


@time_function('simulate')
def cmd_simulate(config):
    sys_ = _build_system(config)
    xi0 = History.constant(sys_.model.delta, config.xi0, dim=sys_.model.n)
    eta0 = config.eta0
    stats = simulate_ensemble(sys_, xi0, eta0=eta0, horizon=config.horizon, n_runs=config.runs,
                              seed=config.seed, threads=config.threads,
                              keep_trajectories=max(config.dump_runs, 0))

    outputs = [write_csv(stats.to_frame(), _path(config, 'ensemble.csv'))]
    for index, trajectory in enumerate(stats.trajectories):
        outputs.append(write_csv(trajectory.to_frame(), _path(config, os.path.join('trajectories', f'run_{index:04d}.csv'))))
    if config.gnuplot:
        script = ensemble_script('ensemble.csv', xi0_norm=abs(config.xi0))
        outputs.append(_write_text(script, _path(config, 'ensemble.gp')))

    write_json(_manifest(
        config,
        eta0=stats.eta0_choice,
        xi0_norm=abs(config.xi0),
        stationary_distribution=stationary_distribution(sys_.chain.tpm).tolist(),
        outputs=[os.path.relpath(p, config.out_dir) for p in outputs],
    ), _path(config, 'manifest.json'))
    logger.info(f"Wrote {len(outputs)} files to {config.out_dir}")
    return EXIT_OK


@time_function('region')
def cmd_region(config):
    _check_gamma(config.gamma)
    c = parse_c(config.c)
    if c == 'auto':
        raise ValidationError("region needs a concrete c, not 'auto'")
    grid = unit_grid(config.grid)
    region = feasible_region(config.gamma, c, grid, grid)
    frontier = region_frontier(region)

    outputs = [write_csv(region, _path(config, 'region.csv')),
               write_csv(frontier, _path(config, 'frontier.csv'))]
    if config.gnuplot:
        script = region_script('region.csv', 'frontier.csv', title=f'gamma={config.gamma:g}, c={c:.6g}')
        outputs.append(_write_text(script, _path(config, 'region.gp')))

    write_json(_manifest(
        config,
        c=c,
        c_outside_candidate_range=c_outside_candidate_range(c),
        feasible_cells=int(region['feasible'].sum()),
        total_cells=len(region),
        outputs=[os.path.relpath(p, config.out_dir) for p in outputs],
    ), _path(config, 'manifest.json'))
    return EXIT_OK


@time_function('certify')
def cmd_certify(config):
    if config.system != 'sat':
        raise ValidationError(f"certify only supports the built-in 'sat' system, got '{config.system}'")
    spec = SatSystemSpec.from_dict(config.sat_spec())
    if config.alpha3 is None:
        report = certify_sat(spec)
    else:
        report = certify_sat_sampled(spec, config.alpha3, n_samples=config.samples,
                                     radius=config.radius, seed=config.seed)

    manifest = _manifest(config, c=report.c, c_outside_candidate_range=report.c_outside_candidate_range,
                         outputs=['certificate.json'])
    write_json(report.to_dict(), _path(config, 'certificate.json'))
    write_json(manifest, _path(config, 'manifest.json'))
    logger.info(f"Verdict: {report.verdict}")
    return EXIT_OK


def _load_certificate(path):
    """(M, zeta) from a certificate.json, or None when it holds no certificate"""
    with open(path, 'r') as f:
        try:
            report = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: {e.msg}", field='certificate', line=e.lineno) from e
    if not isinstance(report, dict):
        raise ConfigError(f"{path}: top level must be a JSON object", field='certificate')
    chain = report.get('chain')
    if report.get('verdict') != 'certificate' or not chain:
        return None
    try:
        return float(chain['M']), float(chain['zeta'])
    except KeyError as e:
        raise ConfigError(f"{path}: certificate chain has no {e.args[0]!r}", field='certificate') from e
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{path}: certificate chain is malformed ({e})", field='certificate') from e


def _load_curve(path, xi0_norm, seed):
    try:
        frame = pd.read_csv(path)
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise ConfigError(f"{path}: {e}", field='curve') from e
    try:
        return MomentCurve.from_frame(frame, xi0_norm=xi0_norm, seed=seed)
    except MjdsError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{path}: non-numeric moment values ({e})", field='curve') from e


@time_function('fit')
def cmd_fit(config):
    if not config.curve:
        raise ConfigError("fit needs --curve", field='curve')
    xi0_norm = config.xi0_norm if config.xi0_norm is not None else abs(config.xi0)
    curve = _load_curve(config.curve, xi0_norm, config.seed)

    result = {}
    try:
        result['fit'] = fit_decay(curve, burn_in=config.burn_in).to_dict()
        result['status'] = 'fitted'
    except DecayedBelowFloorError as e:
        logger.warning(str(e))
        result['fit'] = None
        result['status'] = 'decayed below floor'

    if config.certificate:
        certificate = _load_certificate(config.certificate)
        if certificate is None:
            result['emss_check'] = None
            logger.info(f"{config.certificate} holds no certificate; EMSS check skipped")
        else:
            M, zeta = certificate
            check = emss_check(curve, M, zeta, xi0_norm)
            result['emss_check'] = {'M': M, 'zeta': zeta, **check.to_dict()}

    write_json(_manifest(config, xi0_norm=xi0_norm, outputs=['fit.json']), _path(config, 'manifest.json'))
    write_json(result, _path(config, 'fit.json'))
    return EXIT_OK


def _write_text(text, path):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w') as f:
        f.write(text)
    return path


COMMANDS = {
    'simulate': cmd_simulate,
    'region': cmd_region,
    'certify': cmd_certify,
    'fit': cmd_fit,
}


def main(argv=None):
    """Run one subcommand; returns the process exit code"""
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as e:
        configure_logging()
        logger.error(f"Invalid arguments: {e}")
        return EXIT_VALIDATION
    configure_logging(args.verbose, args.quiet)

    flags = {key: getattr(args, key) for key in config_keys() if hasattr(args, key)}
    try:
        config = resolve_config(args.command, flags, args.config)
        return COMMANDS[args.command](config)
    except NumericFaultError as e:
        logger.error(f"Numeric fault: {e}")
        return EXIT_NUMERIC
    except MjdsError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_VALIDATION
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return EXIT_IO


if __name__ == '__main__':
    sys.exit(main())
