"""
AssetFlow CLI
Command-line workflows: simulate, equilibria, scan, excursion, contagion, calibrate and validate
"""

import argparse
import json
import logging
import os
import sys
from typing import Dict, List, Optional

import numpy as np

from assetflow import __version__
from assetflow.analysis.bifurcation import bifurcation_scan, cycle_metrics, seeded_state
from assetflow.analysis.equilibrium import (default_manifold_grid, fundamental_equilibrium, manifold_frame,
                                            manifold_scan, solve_manifold_point)
from assetflow.analysis.market import contagion_matrix, excursion_surface, wealth_series
from assetflow.analysis.spectral import analyze_equilibrium
from assetflow.calibration.estimation import (FreeParameter, fit, problem_from_dict, synthetic_problem)
from assetflow.common import config
from assetflow.common.errors import AssetFlowError, ConfigError, PreconditionError
from assetflow.integration.integrator import IntegratorSettings, integrate
from assetflow.model.config_io import config_hash, parse_document
from assetflow.model.parameters import apply_parameter
from assetflow.model.types import ExecutionMode
from assetflow.reporting import plots
from assetflow.reporting.exporters import ArtifactWriter, RunManifest
from assetflow.scenarios.presets import (PARAMETER_DOMAINS, Scenario, available_scenarios, initial_state_for,
                                         load_scenario)

logger = logging.getLogger(__name__)

DEFAULT_SCENARIO = "mixed-two-asset"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
MODES = {'rationed': ExecutionMode.RATIONED_CLEARING, 'as_written': ExecutionMode.AS_WRITTEN}


class UsageError(Exception):
    """Bad flag value detected after argparse accepted the command line"""


# =============================================================================
# Argument parsing
# =============================================================================

def _float_list(text: str) -> List[float]:
    try:
        return [float(tok) for tok in text.split(',') if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def _assignment(text: str):
    name, sep, value = text.partition('=')
    if not sep or not name.strip():
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got '{text}'")
    try:
        return name.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"value of '{name}' is not a number: '{value}'")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--scenario', help=f"preset name ({', '.join(available_scenarios(benchmark_names=True))})")
    common.add_argument('--config', help="JSON model configuration file")
    common.add_argument('--set', dest='overrides', action='append', type=_assignment, default=[],
                        metavar='NAME=VALUE', help="override a parameter path or alias (repeatable)")
    common.add_argument('--out', default=None, help="output directory")
    common.add_argument('--threads', type=int, default=None, help="worker cap for concurrent jobs")
    common.add_argument('--plot', action='store_true', help="also write a gnuplot script")
    common.add_argument('--seed', type=int, default=0)
    common.add_argument('--log-level', default=None, choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    common.add_argument('--mode', choices=sorted(MODES), default=None, help="execution mode")

    parser = argparse.ArgumentParser(prog='assetflow', description="Multi-asset asset-flow dynamics toolkit")
    parser.add_argument('--version', action='version', version=f"assetflow {__version__}")
    sub = parser.add_subparsers(dest='command', required=True)

    sim = sub.add_parser('simulate', parents=[common], help="integrate one trajectory")
    sim.add_argument('--horizon', type=float, default=200.0)
    sim.add_argument('--dt', type=float, default=0.1, help="sample spacing")
    sim.add_argument('--perturb', action='append', type=_assignment, default=[], metavar='I=FRAC',
                     help="relative price perturbation of asset I (repeatable)")

    eq = sub.add_parser('equilibria', parents=[common], help="scan the equilibrium manifold")
    eq.add_argument('--grid', type=int, default=50, help="number of cash nodes")
    eq.add_argument('--from', dest='start', type=float, default=None, help="first group-1 cash fraction")
    eq.add_argument('--to', dest='stop', type=float, default=None, help="last group-1 cash fraction")

    scan = sub.add_parser('scan', parents=[common], help="one-parameter bifurcation scan")
    scan.add_argument('--param', default=None)
    scan.add_argument('--from', dest='start', type=float, default=None)
    scan.add_argument('--to', dest='stop', type=float, default=None)
    scan.add_argument('--steps', type=int, default=12)
    scan.add_argument('--horizon', type=float, default=config.DEFAULT_SCAN_HORIZON)

    exc = sub.add_parser('excursion', parents=[common], help="excursion surface over price offsets")
    exc.add_argument('--grid', type=_float_list, default=None, help="offsets, e.g. -10,-5,0,5,10")
    exc.add_argument('--horizon', type=float, default=config.EXCURSION_HORIZON)

    con = sub.add_parser('contagion', parents=[common], help="cross-asset contagion matrix")
    con.add_argument('--shock', type=float, default=config.CONTAGION_SHOCK)
    con.add_argument('--horizon', type=float, default=config.CONTAGION_HORIZON)
    con.add_argument('--window', type=float, default=config.CONTAGION_WINDOW)

    cal = sub.add_parser('calibrate', parents=[common], help="estimate parameters from price series")
    cal.add_argument('--problem', default=None, help="JSON estimation problem")
    cal.add_argument('--free', action='append', default=[], metavar='NAME[:LO:HI]',
                     help="free parameter of a synthetic problem (repeatable)")
    cal.add_argument('--loss', choices=['nls', 'sml'], default='nls')
    cal.add_argument('--noise', type=float, default=None, help="observation noise, fraction of mean Pa")
    cal.add_argument('--simulations', type=int, default=config.SML_MIN_SIMULATIONS)
    cal.add_argument('--restarts', type=int, default=None)
    cal.add_argument('--horizon', type=float, default=60.0, help="synthetic observation window")
    cal.add_argument('--observations', type=int, default=31, help="synthetic observation count")

    val = sub.add_parser('validate', parents=[common], help="run the acceptance suite")
    val.add_argument('--quick', action='store_true', help="reduced grids and horizons")
    val.add_argument('--with-calibration', action='store_true', help="include the calibration checks")
    return parser


# =============================================================================
# Shared setup
# =============================================================================

def _setup_logging(level: Optional[str]):
    logging.basicConfig(level=getattr(logging, (level or config.ASSETFLOW_LOG_LEVEL).upper(), logging.INFO),
                        format=LOG_FORMAT)
    if level:
        logging.getLogger().setLevel(level.upper())
    logging.captureWarnings(True)


def _scenario(args) -> Scenario:
    if args.scenario and args.config:
        raise UsageError("use either --scenario or --config, not both")
    scenario = load_scenario(args.config or args.scenario or DEFAULT_SCENARIO)
    cfg = scenario.cfg
    for name, value in args.overrides:
        cfg = apply_parameter(cfg, name, value, scenario.aliases)
    if args.mode:
        cfg = cfg.replace(exec_mode=MODES[args.mode])
    if cfg is scenario.cfg:
        return scenario
    scenario = scenario.with_config(cfg)
    if scenario.explicit_state:
        return scenario
    state = initial_state_for(cfg, scenario.cash)
    return Scenario(scenario.name, cfg, state, scenario.cash, scenario.aliases, scenario.provenance,
                    scenario.perturbation, scenario.source, scenario.asset, scenario.scan, False)


def _writer(args) -> ArtifactWriter:
    return ArtifactWriter(args.out or os.path.join(config.ASSETFLOW_OUTPUT_DIR, args.command))


def _manifest(args, argv: List[str], scenario: Optional[Scenario], settings: Dict, status: Dict) -> RunManifest:
    return RunManifest(
        command=args.command,
        config_hash=config_hash(scenario.cfg) if scenario is not None else "",
        settings={'scenario': scenario.name if scenario is not None else None,
                  'overrides': {name: value for name, value in args.overrides},
                  'mode': args.mode, 'threads': args.threads, **settings},
        seed=args.seed,
        status=status,
        argv=list(argv),
    )


def _equilibrium(scenario: Scenario):
    try:
        return fundamental_equilibrium(scenario.cfg, scenario.cash)
    except AssetFlowError as exc:
        logger.info(f"no fundamental equilibrium ({exc.message}); using the manifold point")
        return solve_manifold_point(scenario.cfg, scenario.cash)


# =============================================================================
# Subcommands
# =============================================================================

def cmd_simulate(args, argv: List[str]) -> int:
    scenario = _scenario(args)
    cfg = scenario.cfg
    settings = IntegratorSettings(t_end=args.horizon, sample_dt=args.dt)
    perturbation = {int(i): v for i, v in args.perturb} if args.perturb else dict(scenario.perturbation)
    state = scenario.state
    for asset, frac in perturbation.items():
        if not 0 <= asset < cfg.m:
            raise UsageError(f"--perturb asset index {asset} out of range (m={cfg.m})")
        state = seeded_state(state, frac, asset)

    logger.info(f"simulating {scenario.name} over {args.horizon:g} time units")
    traj = integrate(cfg, state, settings)
    writer = _writer(args)
    frame = traj.to_frame()
    wealth = wealth_series(traj).to_frame()
    for column in wealth.columns:
        if column.startswith(('trading_', 'share_value_', 'capital_gain_')):
            frame[column] = wealth[column].to_numpy()
    writer.csv('trajectory.csv', frame)

    status: Dict = {'drift': traj.diagnostics.get('drift'),
                    'accepted_steps': traj.diagnostics.get('accepted_steps')}
    try:
        eq = _equilibrium(scenario)
        spectra = {'equilibrium': eq.to_dict(), 'full': analyze_equilibrium(cfg, eq, 'full').to_dict()}
        classification = spectra['full']['classification']
        if eq.kind.value == 'fundamental':
            spectra['reduced'] = analyze_equilibrium(cfg, eq, 'reduced').to_dict()
            classification = spectra['reduced']['classification']
        spectra['classification'] = classification
        writer.json('spectrum.json', spectra)
        status['classification'] = classification
    except AssetFlowError as exc:
        logger.warning(f"spectral classification skipped: {exc.message}")
        status['classification'] = None
        status['spectrum_error'] = exc.message

    late = traj.window(settings.t0 + config.TRANSIENT_FRACTION * args.horizon)
    status['cycle'] = cycle_metrics(late, scenario.asset, strict=False).to_dict()
    if args.plot:
        writer.text('trajectory.gp', plots.trajectory_script(list(frame.columns)))
    _manifest(args, argv, scenario, {'horizon': args.horizon, 'dt': args.dt,
                                     'perturbation': perturbation}, status).write(writer)
    logger.info(f"simulate done: classification={status['classification']}")
    return 0


def cmd_equilibria(args, argv: List[str]) -> int:
    scenario = _scenario(args)
    cfg = scenario.cfg
    if args.grid < 2:
        raise UsageError("--grid needs at least 2 nodes")
    if args.start is not None or args.stop is not None:
        if cfg.n != 2:
            raise UsageError("--from/--to apply to two-group models only")
        start = 0.01 if args.start is None else args.start
        stop = 0.99 if args.stop is None else args.stop
        if not 0 <= start < stop <= 1:
            raise UsageError("--from/--to must satisfy 0 <= from < to <= 1")
        grid = np.linspace(start, stop, args.grid) * cfg.M0
    else:
        grid = default_manifold_grid(cfg, args.grid)

    logger.info(f"manifold scan of {scenario.name}: {len(grid)} nodes")
    nodes = manifold_scan(cfg, grid, workers=args.threads)
    writer = _writer(args)
    frame = manifold_frame(cfg, nodes)
    writer.csv('manifold.csv', frame)
    solved = frame[frame['error'] == ""]
    status = {
        'nodes': len(nodes),
        'solved': int(len(solved)),
        'stable': int(sum(1 for node in nodes if node.stable)),
        'P_eq_min': solved[[c for c in frame.columns if c.startswith('P_eq_')]].min().tolist() if len(solved) else None,
        'P_eq_max': solved[[c for c in frame.columns if c.startswith('P_eq_')]].max().tolist() if len(solved) else None,
    }
    if args.plot:
        writer.text('manifold.gp', plots.manifold_script(cfg.m))
    _manifest(args, argv, scenario, {'grid': args.grid, 'from': args.start, 'to': args.stop}, status).write(writer)
    logger.info(f"equilibria done: {status['stable']}/{status['nodes']} stable")
    return 0


def cmd_scan(args, argv: List[str]) -> int:
    scenario = _scenario(args)
    default = scenario.scan or (None, None, None)
    param = args.param or default[0]
    start = default[1] if args.start is None else args.start
    stop = default[2] if args.stop is None else args.stop
    if param is None or start is None or stop is None:
        raise UsageError(f"scenario {scenario.name} has no default scan; pass --param, --from and --to")
    if args.steps < 2 or start == stop:
        raise UsageError("scan needs --steps >= 2 and --from != --to")
    grid = np.linspace(start, stop, args.steps)

    logger.info(f"scanning {param} over [{start:g}, {stop:g}] in {args.steps} steps")
    result = bifurcation_scan(scenario.cfg, param, grid, cash=scenario.cash, horizon=args.horizon,
                              perturbation=scenario.perturbation.get(scenario.asset, config.SEED_PERTURBATION),
                              asset=scenario.asset, aliases=scenario.aliases, workers=args.threads)
    writer = _writer(args)
    writer.csv('bifurcation.csv', result.to_frame())
    writer.json('threshold.json', result.threshold_dict())
    if args.plot:
        writer.text('bifurcation.gp', plots.bifurcation_script(result.threshold_value))
    status = {'threshold': result.threshold_value, 'note': result.note,
              'failed_nodes': sum(1 for node in result.nodes if node.error)}
    _manifest(args, argv, scenario, {'param': param, 'from': start, 'to': stop, 'steps': args.steps,
                                     'horizon': args.horizon}, status).write(writer)
    logger.info(f"scan done: threshold={result.threshold_value}")
    return 0


def cmd_excursion(args, argv: List[str]) -> int:
    scenario = _scenario(args)
    base = fundamental_equilibrium(scenario.cfg, scenario.cash)
    grid = args.grid if args.grid is not None else list(config.EXCURSION_GRID)
    logger.info(f"excursion surface of {scenario.name}: offsets {grid}")
    surface = excursion_surface(scenario.cfg, base, grid, grid, horizon=args.horizon, workers=args.threads)
    writer = _writer(args)
    writer.csv('excursion_grid.csv', surface.to_frame())
    writer.json('excursion_summary.json', surface.summary)
    if args.plot and scenario.cfg.m >= 2:
        writer.text('excursion.gp', plots.excursion_script())
    _manifest(args, argv, scenario, {'grid': grid, 'horizon': args.horizon},
              {'failed_nodes': surface.summary['failed']}).write(writer)
    logger.info("excursion done")
    return 0


def cmd_contagion(args, argv: List[str]) -> int:
    scenario = _scenario(args)
    if scenario.cfg.m < 2:
        raise PreconditionError("contagion needs at least two assets")
    base = fundamental_equilibrium(scenario.cfg, scenario.cash)
    logger.info(f"contagion matrix of {scenario.name}: shock {args.shock:g}·Pa")
    report = contagion_matrix(scenario.cfg, base, shock=args.shock, horizon=args.horizon, window=args.window,
                              workers=args.threads)
    writer = _writer(args)
    writer.json('contagion.json', report.to_dict())
    if args.plot:
        writer.text('contagion.gp', plots.contagion_script(report.gamma.tolist(),
                                                           [f"asset {i + 1}" for i in range(scenario.cfg.m)]))
    _manifest(args, argv, scenario, {'shock': args.shock, 'horizon': args.horizon, 'window': args.window},
              {'asymmetry': report.asymmetry, 'off_diagonal_total': report.off_diagonal_total}).write(writer)
    logger.info(f"contagion done: asymmetry={report.asymmetry}")
    return 0


def _free_parameter(text: str) -> FreeParameter:
    parts = text.split(':')
    if len(parts) == 3:
        try:
            return FreeParameter(parts[0], float(parts[1]), float(parts[2]))
        except ValueError:
            raise UsageError(f"bad bounds in --free {text}")
    if len(parts) == 1 and text in PARAMETER_DOMAINS:
        lo, hi = PARAMETER_DOMAINS[text]
        return FreeParameter(text, lo, hi)
    raise UsageError(f"--free {text}: give NAME:LO:HI (no default domain for '{parts[0]}')")


def cmd_calibrate(args, argv: List[str]) -> int:
    scenario = _scenario(args)
    cfg = scenario.cfg
    if args.problem and args.free:
        raise UsageError("use either --problem or --free, not both")
    if args.problem:
        try:
            with open(args.problem, 'r', encoding='utf-8') as fh:
                doc = parse_document(fh.read(), args.problem)
        except OSError as exc:
            raise ConfigError(f"cannot read problem file: {exc}", path=args.problem)
        doc.setdefault('loss', args.loss)
        problem = problem_from_dict(doc, cfg, scenario.state, scenario.aliases)
    elif args.free:
        free = [_free_parameter(text) for text in args.free]
        times = np.linspace(0.0, args.horizon, args.observations)
        noise_fraction = 0.0 if args.noise is None else args.noise
        state = scenario.state
        for asset, frac in scenario.perturbation.items():
            state = seeded_state(state, frac, asset)
        problem = synthetic_problem(cfg, state, free, times, noise=noise_fraction * float(np.mean(cfg.Pa)),
                                    seed=args.seed, loss=args.loss, simulations=args.simulations,
                                    aliases=scenario.aliases)
    else:
        raise UsageError("calibrate needs --problem PATH or at least one --free NAME")

    logger.info(f"calibrating {', '.join(problem.names)} by {problem.loss}")
    result = fit(problem, seed=args.seed, restarts=args.restarts)
    writer = _writer(args)
    writer.json('estimation.json', result.to_dict())
    _manifest(args, argv, scenario, {'loss': problem.loss, 'free': problem.names, 'noise': args.noise,
                                     'simulations': args.simulations, 'restarts': args.restarts},
              {'converged': result.converged, 'loss': result.loss}).write(writer)
    logger.info(f"calibrate done: {result.estimates}")
    return 0


def cmd_validate(args, argv: List[str]) -> int:
    from assetflow.scenarios.acceptance import run_validation

    writer = _writer(args)
    table = run_validation(quick=args.quick, with_calibration=args.with_calibration, seed=args.seed,
                           workers=args.threads, out_dir=writer.out_dir)
    writer.csv('validation.csv', table)
    print(table.to_string(index=False))
    passed = bool(table['passed'].all())
    status = {'passed': int(table['passed'].sum()), 'total': int(len(table)), 'all_passed': passed}
    _manifest(args, argv, None, {'quick': args.quick, 'with_calibration': args.with_calibration},
              status).write(writer)
    logger.info(f"validate {'passed' if passed else 'failed'}: {status['passed']}/{status['total']} checks passed")
    return 0 if passed else 1


COMMANDS = {
    'simulate': cmd_simulate,
    'equilibria': cmd_equilibria,
    'scan': cmd_scan,
    'excursion': cmd_excursion,
    'contagion': cmd_contagion,
    'calibrate': cmd_calibrate,
    'validate': cmd_validate,
}


def cli_dispatch(argv: Optional[List[str]] = None) -> int:
    """
    Parse argv, run one workflow and return the process exit code

    Returns:
        0 on success, 1 on a domain error, 2 on a usage error
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2

    _setup_logging(args.log_level)
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](args, argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AssetFlowError as exc:
        logger.debug(json.dumps(exc.to_dict(), default=str))
        print(f"error: {type(exc).__name__}: {exc.message}", file=sys.stderr)
        return 1


if __name__ == '__main__':
    sys.exit(cli_dispatch())
