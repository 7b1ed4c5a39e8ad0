"""
Command-line harness

Subcommands:
    attack    run an attack suite and write its report
    verify    run the Monte Carlo and closed-form verification battery
    curves    write the estimator loss curves as CSV
    serve     serve a model over the oracle wire protocol
    gen-data  generate a synthetic dataset with target and surrogate models
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .attack import PRESETS, AttackConfig, attack_preset, evaluate_suite
from .config import ExperimentConfig, load_config
from .datasets import KINDS, Dataset, gen_dataset, load_dataset, load_dataset_models
from .estimators import EstimatorConfig, GaImpl, Variant
from .exceptions import ConfigError, DomainError, PrgfError
from .geometry import nn_upsample_basis
from .oracles import LossKind, MlpModel, OracleBackend, OracleFactory, load_model
from .oracles.remote import RemoteOracle
from .oracles.server import DEFAULT_BUDGET, run_server
from .priors import PriorSourceKind, SurrogatePrior
from .reporting import SuiteReport, build_report, write_report, write_verify_results
from .verify import (
    corrupted_lambda_star,
    emit_loss_curves,
    lambda_star,
    run_verification_battery,
    write_loss_curves_csv,
)

logger = logging.getLogger('prgf.cli')

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_ERROR = 2


# Attack suites

def _backend(config: ExperimentConfig, loss: LossKind, dataset_target: Optional[MlpModel]) -> OracleBackend:
    source = config.oracle_source
    if source == 'oracle_url':
        return OracleFactory.create('remote', endpoint=config['oracle_url'])
    model = load_model(config['oracle_model']) if source == 'oracle_model' else dataset_target
    return OracleFactory.create('model', model=model, loss=loss.value)


def build_suite(config: ExperimentConfig) -> Tuple[OracleBackend, Optional[SurrogatePrior], Dataset,
                                                   AttackConfig, EstimatorConfig]:
    """Resolve a config into the backend, prior source, dataset and attack settings"""
    if config['dataset'] is None:
        raise ConfigError("An attack needs a dataset (--dataset or 'dataset' in the config)")
    dataset = load_dataset(config['dataset'])
    if config['instances'] is not None:
        dataset = dataset.head(config['instances'])

    preset = attack_preset(config.preset_name(), dataset.dim, config['max_queries'])
    loss = LossKind(config['loss']) if config['loss'] else preset.loss
    variant = Variant.parse(config['variant'])

    # The dataset's own models back the target and the default surrogate
    needs_target = config.oracle_source == 'oracle_builtin'
    needs_surrogate = variant is not Variant.RGF and not config['surrogates']
    dataset_target, dataset_surrogate = (
        load_dataset_models(config['dataset']) if needs_target or needs_surrogate else (None, None)
    )

    backend = _backend(config, loss, dataset_target)
    if backend.dim != dataset.dim:
        raise ConfigError(f"Oracle expects dim {backend.dim} but the dataset has dim {dataset.dim}")

    prior_source = None
    if variant is not Variant.RGF:
        models = [load_model(p) for p in config['surrogates']] or [dataset_surrogate]
        surrogates = [OracleFactory.create('model', model=m, loss=loss.value) for m in models]
        prior_source = SurrogatePrior(surrogates, PriorSourceKind.parse(config['prior']))

    dd_basis = None
    if config['dd']:
        dd_dim = config['dd_dim'] or max(1, dataset.dim // 4)
        dd_basis = nn_upsample_basis(dd_dim, dataset.dim)

    est_cfg = EstimatorConfig(
        q=config['q'] or preset.q,
        sigma=float(config['sigma'] or preset.sigma),
        D=dataset.dim,
        variant=variant,
        dd_basis=dd_basis,
        ga_impl=GaImpl.parse(config['ga_impl']),
        fixed_lambda=config['fixed_lambda'],
        fixed_mu=config['fixed_mu'],
    )
    return backend, prior_source, dataset, preset.attack, est_cfg


def cmd_attack(config: ExperimentConfig, show_progress: bool = False) -> SuiteReport:
    """Run the configured suite and write its report into config['out']"""
    backend, prior_source, dataset, attack_cfg, est_cfg = build_suite(config)
    try:
        outcomes = evaluate_suite(backend, prior_source, dataset, attack_cfg, est_cfg,
                                  seed=config['seed'], jobs=config['jobs'], show_progress=show_progress)
    finally:
        if isinstance(backend, RemoteOracle):
            backend.close()
    report = build_report(outcomes)
    write_report(report, config['out'], config.summary())
    asr = 'n/a' if report.asr is None else f"{report.asr:.3f}"
    logger.info(f"ASR {asr}, AVG. Q {report.avg_queries}, MED. Q {report.med_queries}")
    return report


# Verification and curves

def cmd_verify(trials: int = 20000, seed: int = 0, out: Optional[str] = None,
               corrupt_lambda: bool = False, configs: int = 50) -> int:
    """
    Run the verification battery

    Returns:
        EXIT_OK when every check passes, EXIT_VERIFY_FAILED otherwise

    Raises:
        DomainError: if trials is below the battery minimum
    """
    lambda_fn = corrupted_lambda_star if corrupt_lambda else lambda_star
    results = run_verification_battery(trials, seed, lambda_fn=lambda_fn, configs=configs)
    if out is not None:
        write_verify_results(results, Path(out) / 'verify.json')
    failed = [r.name for r in results if not r.passed]
    if failed:
        logger.error(f"✗ {len(failed)} of {len(results)} checks failed: {', '.join(failed)}")
        return EXIT_VERIFY_FAILED
    logger.info(f"✓ All {len(results)} checks passed")
    return EXIT_OK


def cmd_curves(D: int = 3072, q: int = 50, grid: int = 101, out: str = 'curves.csv') -> Path:
    if grid < 2:
        raise DomainError(f"grid needs at least 2 points, got {grid}")
    rows = emit_loss_curves(D, q, np.linspace(0.0, 1.0, grid))
    write_loss_curves_csv(rows, out)
    return Path(out)


def cmd_serve(model_path: str, budget: int = DEFAULT_BUDGET, port: int = 8001,
              loss: str = 'cross_entropy', host: str = ''):
    backend = OracleFactory.create('model', model=load_model(model_path), loss=loss)
    run_server(backend, budget, port, host)


# Argument parsing

def _add_attack_arguments(parser: argparse.ArgumentParser):
    parser.add_argument('--config', help='YAML or JSON experiment config')
    parser.add_argument('--dataset', help='Dataset file written by gen-data')
    parser.add_argument('--instances', type=int, help='Attack only the first N instances')
    parser.add_argument('--oracle-url', help='Remote oracle endpoint')
    parser.add_argument('--oracle-model', help='Target model file (PRGFMLP1)')
    parser.add_argument('--surrogate', dest='surrogates', action='append', help='Surrogate model file (repeatable)')
    parser.add_argument('--preset', choices=PRESETS)
    parser.add_argument('--norm', choices=['l2', 'linf'])
    parser.add_argument('--loss', choices=[kind.value for kind in LossKind])
    parser.add_argument('--max-queries', type=int)
    parser.add_argument('--variant', choices=['rgf', 'prgf-bs', 'prgf-ga'])
    parser.add_argument('--prior', choices=['single', 'avg', 'proj'])
    parser.add_argument('--q', type=int, help='Probes per estimate')
    parser.add_argument('--sigma', type=float, help='Finite-difference step')
    parser.add_argument('--dd', action='store_true', default=None, help='Restrict probes to a data-dependent subspace')
    parser.add_argument('--dd-dim', type=int, help='Subspace dimension (default D/4)')
    parser.add_argument('--ga-impl', choices=['projection', 'closed-form'])
    parser.add_argument('--fixed-lambda', type=float, help='Use this lambda instead of the optimal one')
    parser.add_argument('--fixed-mu', type=float, help='Use this mu instead of the optimal one')
    parser.add_argument('--seed', type=int)
    parser.add_argument('--jobs', type=int)
    parser.add_argument('--out', help='Report directory')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='prgf', description='Prior-guided zeroth-order gradient estimation and attacks')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    parser.add_argument('-v', '--verbose', action='store_true', help='Debug logging')
    subparsers = parser.add_subparsers(dest='command', required=True)

    _add_attack_arguments(subparsers.add_parser('attack', help='Run an attack suite'))

    verify = subparsers.add_parser('verify', help='Run the verification battery')
    verify.add_argument('--trials', type=int, default=20000)
    verify.add_argument('--seed', type=int, default=0)
    verify.add_argument('--configs', type=int, default=50, help='Random configurations per Monte Carlo check')
    verify.add_argument('--out', help='Directory for verify.json')
    verify.add_argument('--corrupt-lambda', action='store_true', help=argparse.SUPPRESS)

    curves = subparsers.add_parser('curves', help='Write estimator loss curves')
    curves.add_argument('--dim', type=int, default=3072)
    curves.add_argument('--q', type=int, default=50)
    curves.add_argument('--grid', type=int, default=101, help='Number of alpha grid points')
    curves.add_argument('--out', default='curves.csv')

    serve = subparsers.add_parser('serve', help='Serve a model over HTTP')
    serve.add_argument('--model', required=True, help='Model file (PRGFMLP1)')
    serve.add_argument('--budget', type=int, default=DEFAULT_BUDGET)
    serve.add_argument('--port', type=int, default=8001)
    serve.add_argument('--host', default='')
    serve.add_argument('--loss', choices=[kind.value for kind in LossKind], default='cross_entropy')

    gen = subparsers.add_parser('gen-data', help='Generate a synthetic dataset')
    gen.add_argument('--kind', choices=KINDS, default='blobs')
    gen.add_argument('--n', type=int, default=200)
    gen.add_argument('--dim', type=int, default=100)
    gen.add_argument('--classes', type=int, default=10)
    gen.add_argument('--seed', type=int, default=0)
    gen.add_argument('--out', default='data/blobs.json')
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    keys = ('dataset', 'instances', 'oracle_url', 'oracle_model', 'surrogates', 'preset', 'norm', 'loss',
            'max_queries', 'variant', 'prior', 'q', 'sigma', 'dd', 'dd_dim', 'ga_impl', 'fixed_lambda',
            'fixed_mu', 'seed', 'jobs', 'out')
    return {key: getattr(args, key) for key in keys}


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == 'attack':
        config = load_config(args.config, _overrides(args))
        cmd_attack(config, show_progress=sys.stderr.isatty())
        return EXIT_OK
    if args.command == 'verify':
        return cmd_verify(args.trials, args.seed, args.out, args.corrupt_lambda, args.configs)
    if args.command == 'curves':
        cmd_curves(args.dim, args.q, args.grid, args.out)
        return EXIT_OK
    if args.command == 'serve':
        cmd_serve(args.model, args.budget, args.port, args.loss, args.host)
        return EXIT_OK
    gen_dataset(args.kind, args.n, args.dim, args.seed, args.out, args.classes)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(levelname)s - %(name)s - %(message)s',
    )
    try:
        return _dispatch(args)
    except PrgfError as e:
        logger.debug("Command failed", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except KeyboardInterrupt:
        print("\n👋 Interrupted", file=sys.stderr)
        return 130
