"""Command-line surface: one subcommand per pipeline stage.

Structured results go to stdout (or --out) as JSON with an embedded
"manifest"; CSV outputs get a <path>.manifest.json sidecar. Progress and
diagnostics go to stderr. Exit codes: 0 success, 1 domain/convergence or
input errors (one JSON error object on stderr), 2 usage errors.
"""

import argparse

from . import __version__
from .benchmark import SweepConfig, cell_seeds, run_sweep, write_csv, write_summary
from .config_manager import ConfigManager
from .debug_logger import DebugLogger
from .display import TerminalDisplay
from .errors import ConfigError, IsingError
from .exact_oracle import exact_moments
from .graph_model import (
    EdgeAppearance,
    build_complete,
    load_edge_appearance,
    load_model,
    parse_graph_spec,
    random_model,
    uniform_edge_appearance,
)
from .inverse import METHODS, invert_all, recover_biases
from .learner import LearnConfig, gradient_ascent, write_trace_csv
from .manifest import RunManifest, read_json, with_manifest, write_json, write_sidecar
from .sampler import DataStatistics, gibbs_sample, statistics, write_samples_csv
from .spike_ingest import bin_spikes, parse_spike_file, spike_statistics
from .trw_forward import SOLVERS, solve_trw


def _resolve(value, config_manager, section, key, kind=str):
    """CLI flag if given, else config.txt, else built-in default"""
    if value is not None:
        return value
    if kind is int:
        return config_manager.get_int_setting(section, key)
    if kind is float:
        return config_manager.get_float_setting(section, key)
    return config_manager.get_setting(section, key)


def _load_statistics(path):
    return DataStatistics.from_dict(read_json(path))


def _inference_graph(args, stats):
    """Edge set for inversion/learning: --model's graph, --graph spec, or all pairs"""
    if getattr(args, 'model', None):
        graph = load_model(args.model).graph
    elif getattr(args, 'graph', None):
        graph = parse_graph_spec(args.graph, rng_seed=args.graph_seed)
    else:
        graph = build_complete(stats.vertex_count)
    if graph.vertex_count != stats.vertex_count:
        raise ConfigError(f"Graph has {graph.vertex_count} vertices but statistics describe {stats.vertex_count}")
    return graph


def _edge_appearance(choice, graph):
    if choice in (None, 'uniform'):
        return uniform_edge_appearance(graph)
    return load_edge_appearance(graph, choice)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cell(text):
    """'OMEGA_INDEX,TRIAL' -> (omega_index, trial)"""
    try:
        omega_index, trial = (int(part) for part in text.split(','))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected OMEGA_INDEX,TRIAL, got {text!r}")
    if omega_index < 0 or trial < 0:
        raise argparse.ArgumentTypeError("cell indices must be non-negative")
    return omega_index, trial


def _stage_seed(args, stage):
    """--seed itself, or the bench cell's model (0) / sampling (1) seed when --cell is given"""
    if args.cell is None:
        return args.seed
    return cell_seeds(args.seed, *args.cell)[stage]


def _seed_record(args):
    seeds = {'seed': args.seed}
    if args.cell is not None:
        seeds['cell'] = list(args.cell)
    return seeds


def cmd_generate(args, context):
    graph = parse_graph_spec(args.graph, rng_seed=args.seed)
    model = random_model(graph, args.regime, args.omega, _stage_seed(args, 0))
    context.logger.info(f"Generated {args.regime} model on {args.graph}: {graph.vertex_count} spins, "
                        f"{graph.edge_count} edges")
    context.manifest.seeds = _seed_record(args)
    write_json(args.out, with_manifest(model.to_dict(), context.finish(args.out)))


def cmd_oracle(args, context):
    model = load_model(args.model)
    moments = exact_moments(
        model,
        max_spins=_resolve(args.max_spins, context.config, 'oracle', 'max_spins', int),
        chunk_bits=context.config.get_int_setting('oracle', 'chunk_bits'),
    )
    payload = moments.to_dict()
    payload['D'] = 0
    write_json(args.out, with_manifest(payload, context.finish(args.out)))


def cmd_sample(args, context):
    model = load_model(args.model)
    sweeps = _resolve(args.sweeps, context.config, 'sampler', 'sweeps', int)
    burn_in = _resolve(args.burn_in, context.config, 'sampler', 'burn_in', int)
    thin = _resolve(args.thin, context.config, 'sampler', 'thin', int)
    chains = _resolve(args.chains, context.config, 'sampler', 'chains', int)
    samples = gibbs_sample(model, sweeps, burn_in, thin, _stage_seed(args, 1), chains=chains, logger=context.logger)
    context.manifest.seeds = _seed_record(args)
    context.manifest.config.update(sweeps=sweeps, burn_in=burn_in, thin=thin, chains=chains)
    if args.samples:
        write_samples_csv(samples, args.samples)
        write_sidecar(args.samples, context.finish(args.samples))
    write_json(args.out, with_manifest(statistics(samples).to_dict(), context.finish(args.out)))


def cmd_trw_bound(args, context):
    model = load_model(args.model)
    rho = _edge_appearance(args.rho, model.graph) if model.graph.edge_count else EdgeAppearance.ones(model.graph)
    solution = solve_trw(
        model, rho,
        tol=_resolve(args.tol, context.config, 'trw', 'tol', float),
        max_iter=context.config.get_int_setting('trw', 'max_iter'),
        damping=context.config.get_float_setting('trw', 'damping'),
        solver=_resolve(args.solver, context.config, 'trw', 'solver'),
        logger=context.logger,
    )
    payload = {
        'phi_trw': solution.log_partition,
        'solver': solution.solver,
        'iterations': solution.iterations,
        'free_energy': solution.free_energy.to_dict(),
    }
    max_spins = context.config.get_int_setting('oracle', 'max_spins')
    if model.vertex_count <= max_spins:
        phi = exact_moments(model, max_spins=max_spins).log_partition
        payload['phi_exact'] = phi
        payload['gap'] = solution.log_partition - phi
    write_json(args.out, with_manifest(payload, context.finish(args.out)))


def cmd_invert(args, context):
    stats = _load_statistics(args.stats)
    graph = _inference_graph(args, stats)
    rho = _edge_appearance(args.rho, graph)
    methods = METHODS if args.method == 'all' else (args.method,)
    results = invert_all(stats, rho, methods=methods, logger=context.logger)

    payload = {}
    for method, result in results.items():
        entry = result.to_dict()
        if args.with_biases:
            bias_rho = EdgeAppearance.ones(graph) if method == 'bethe' else rho
            entry['h'] = recover_biases(stats, result, bias_rho).tolist()
        payload[method] = entry
    if args.method != 'all':
        payload = payload[args.method]
    write_json(args.out, with_manifest(payload, context.finish(args.out)))


def cmd_learn(args, context):
    stats = _load_statistics(args.stats)
    graph = _inference_graph(args, stats)
    config = LearnConfig(
        learning_rate=_resolve(args.learning_rate, context.config, 'learner', 'learning_rate', float),
        n_updates=_resolve(args.updates, context.config, 'learner', 'updates', int),
        mc_steps_per_gradient=_resolve(args.mc_steps, context.config, 'learner', 'mc_steps', int),
        estimator=_resolve(args.estimator, context.config, 'learner', 'estimator'),
        rng_seed=args.seed,
        chains=_resolve(args.chains, context.config, 'learner', 'chains', int),
        tol=args.tol,
    )
    trace = gradient_ascent(stats, graph, config, logger=context.logger)
    context.manifest.config.update(config.to_dict())
    context.manifest.seeds = {'seed': args.seed}
    if args.trace:
        write_trace_csv(trace, args.trace)
        write_sidecar(args.trace, context.finish(args.trace))
    payload = trace.model.to_dict()
    payload['iterations'] = trace.iterations
    payload['converged'] = trace.converged
    payload['final_max_gradient'] = trace.max_gradient[-1]
    write_json(args.out, with_manifest(payload, context.finish(args.out)))


def cmd_bench(args, context):
    payload = read_json(args.config_file)
    if isinstance(payload, dict):
        payload.setdefault('trials', context.config.get_int_setting('bench', 'trials'))
    config = SweepConfig.from_dict(payload)
    jobs = _resolve(args.jobs, context.config, 'bench', 'jobs', int)
    report = run_sweep(config, jobs=jobs, display=context.display, logger=context.logger)
    context.manifest.config.update(config.to_dict())
    context.manifest.seeds = {'rng_seed': config.rng_seed}
    context.display.display_summary_table(report.aggregates)
    write_csv(report, args.csv)
    write_sidecar(args.csv, context.finish(args.csv))
    write_summary(report, args.out, context.finish(args.out))


def cmd_spikes(args, context):
    trains = parse_spike_file(args.input)
    tau = _resolve(args.tau, context.config, 'spikes', 'tau', float)
    series = bin_spikes(trains, tau)
    context.logger.info(f"Binned {trains.spike_count} spikes of {trains.neuron_count} neurons "
                        f"into {series.bin_count} bins of {tau} s")
    context.manifest.config['tau'] = tau
    write_json(args.out, with_manifest(spike_statistics(series).to_dict(), context.finish(args.out)))


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Context:
    def __init__(self, args):
        self.config = ConfigManager(args.config, debug_override=True if args.debug else None)
        self.logger = DebugLogger(self.config)
        self.display = TerminalDisplay()
        recorded = {k: v for k, v in vars(args).items() if k not in ('handler', 'config', 'debug')}
        inputs = [v for k, v in recorded.items() if k in ('model', 'stats', 'input', 'config_file') and v]
        self.manifest = RunManifest(args.command, config=recorded, inputs=inputs)

    def finish(self, output):
        if output not in (None, '-') and output not in self.manifest.outputs:
            self.manifest.outputs.append(output)
        return self.manifest.finish()


def build_parser():
    parser = argparse.ArgumentParser(
        prog='ising-utils.py',
        description='Inverse Ising toolkit: TRW/Bethe/SM/IP inversion, exact oracle, Gibbs sampling, benchmarks',
    )
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    parser.add_argument('--debug', action='store_true', help='Enable debug output (overrides config.txt)')
    parser.add_argument('--config', default=None, help='INI config file (default: config.txt or $ISING_CONFIG)')
    sub = parser.add_subparsers(dest='command', required=True)

    def add(name, handler, help_text):
        command = sub.add_parser(name, help=help_text)
        command.set_defaults(handler=handler)
        command.add_argument('--out', default='-', help='Output JSON path (default: stdout)')
        return command

    p = add('generate', cmd_generate, 'Draw a random model on a graph')
    p.add_argument('--graph', required=True, help='grid2d:WxH | grid3d:XxYxZ | complete:N | chain:N | tree:N')
    p.add_argument('--regime', choices=('attractive', 'mixed'), required=True)
    p.add_argument('--omega', type=float, required=True)
    p.add_argument('--seed', type=int, required=True)
    p.add_argument('--cell', type=_cell, default=None, metavar='OMEGA_INDEX,TRIAL',
                   help="Draw the model of this bench cell (--seed is then the sweep's rng_seed)")

    p = add('oracle', cmd_oracle, 'Exact moments and log-partition by enumeration')
    p.add_argument('--model', required=True)
    p.add_argument('--max-spins', type=int, default=None)

    p = add('sample', cmd_sample, 'Gibbs-sample a model and report statistics')
    p.add_argument('--model', required=True)
    p.add_argument('--seed', type=int, required=True)
    p.add_argument('--sweeps', type=int, default=None)
    p.add_argument('--burn-in', type=int, default=None)
    p.add_argument('--thin', type=int, default=None)
    p.add_argument('--chains', type=int, default=None)
    p.add_argument('--samples', default=None, help='Also write the +/-1 sample matrix as CSV')
    p.add_argument('--cell', type=_cell, default=None, metavar='OMEGA_INDEX,TRIAL',
                   help="Use this bench cell's sampling seed (--seed is then the sweep's rng_seed)")

    p = add('trw-bound', cmd_trw_bound, 'TRW upper bound on the log-partition function')
    p.add_argument('--model', required=True)
    p.add_argument('--rho', default='uniform', help="'uniform' or a rho JSON file")
    p.add_argument('--solver', choices=SOLVERS, default=None)
    p.add_argument('--tol', type=float, default=None)

    p = add('invert', cmd_invert, 'Infer couplings from statistics with the analytic formulas')
    p.add_argument('--stats', required=True)
    p.add_argument('--method', choices=METHODS + ('all',), default='all')
    p.add_argument('--rho', default='uniform', help="'uniform' or a rho JSON file")
    p.add_argument('--graph', default=None, help='Restrict inference to this graph (default: all pairs)')
    p.add_argument('--graph-seed', type=int, default=0)
    p.add_argument('--model', default=None, help='Take the edge set from this model JSON')
    p.add_argument('--with-biases', action='store_true', help='Add biases recovered from self-consistency')

    p = add('learn', cmd_learn, 'Gradient-ascent (Boltzmann) learning')
    p.add_argument('--stats', required=True)
    p.add_argument('--graph', default=None)
    p.add_argument('--graph-seed', type=int, default=0)
    p.add_argument('--model', default=None)
    p.add_argument('--estimator', choices=('exact', 'mcmc'), default=None)
    p.add_argument('--learning-rate', type=float, default=None)
    p.add_argument('--updates', type=int, default=None)
    p.add_argument('--mc-steps', type=int, default=None)
    p.add_argument('--chains', type=int, default=None)
    p.add_argument('--seed', type=int, default=None)
    p.add_argument('--tol', type=float, default=None, help='Stop once the max gradient drops below this')
    p.add_argument('--trace', default=None, help='Trace CSV path')

    p = add('bench', cmd_bench, 'Reconstruction sweep over omega and trials')
    p.add_argument('--config', dest='config_file', required=True, help='Sweep config JSON')
    p.add_argument('--jobs', type=int, default=None)
    p.add_argument('--csv', required=True, help='Long-format report CSV path')

    p = add('spikes', cmd_spikes, 'Bin a spike file into spin statistics')
    p.add_argument('--input', required=True)
    p.add_argument('--tau', type=float, default=None)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2

    if args.command == 'learn':
        estimator = args.estimator or ConfigManager(args.config).get_setting('learner', 'estimator')
        if estimator == 'mcmc' and args.seed is None:
            try:
                parser.error('learn with the mcmc estimator requires --seed')
            except SystemExit as e:
                return e.code

    display = TerminalDisplay()
    try:
        context = _Context(args)
        args.handler(args, context)
    except IsingError as e:
        display.display_error_json(e)
        return 1
    except (OSError, ValueError) as e:
        display.display_error_json(e)
        return 1
    return 0
