"""Command-line interface of mlmoments.

Usage:
    mlmoments estimate --input data.csv --alpha 2,1 --estimator rosenblatt
    mlmoments estimate --input data.csv --alpha 1,2 --estimator monotone-uniform --seed 1
    mlmoments transport --input data.csv --source gaussian --seed 1 --out sol.jsonl
    mlmoments oracle copula max 1 2
    mlmoments oracle two-point --x1 1,1 --x2=-1,-1
    mlmoments table1 --nu 0.5 --n 30,100 --replicates 100 --seed 0

Records go to stdout (or `--out`) as JSON lines; logs go to stderr.

Exit codes: 0 success, 1 usage error, 2 data error, 3 unconverged transport,
4 failed experiment checks (`table1`).
"""
import argparse
import logging
import sys
from dataclasses import dataclass, field
from typing import IO

import numpy as np

from mlmoments import __version__
from mlmoments.dataio import load_csv, load_solution, save_solution, write_records
from mlmoments.estimators import (DEFAULT_MC_SAMPLES, TrimDomain,
                                  estimate_lmoments, estimate_rosenblatt)
from mlmoments.exceptions import DataError, DomainError
from mlmoments.experiment import DEFAULT_BUDGET, table1_experiment
from mlmoments.models import (CopulaKind, LcivModel, copula_lmoment,
                              gaussian_lmoment, lciv_hermite_lambda2,
                              lciv_hermite_lambda3)
from mlmoments.result import Estimator, LMomentResult, MultiIndex, SourceKind
from mlmoments.transport import (SolverConfig, solve, two_point_lmoment_gaussian,
                                 two_point_lmoment_uniform)

__all__ = ['main', 'RunConfig', 'UsageError']

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_UNCONVERGED = 3
EXIT_CHECKS = 4

_MONOTONE = {
    Estimator.MONOTONE_UNIFORM: SourceKind.UNIFORM,
    Estimator.MONOTONE_HERMITE: SourceKind.GAUSSIAN,
    Estimator.TRIMMED_MONOTONE: SourceKind.UNIFORM,
}


class UsageError(Exception):
    """Invalid command line."""
    pass


class _Parser(argparse.ArgumentParser):

    def error(self, message: str):
        raise UsageError(message)


def _floats(text: str) -> list[float]:
    try:
        return [float(s) for s in text.split(',')]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number list {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(',')]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer list {text!r}") from None


def _matrix(text: str) -> np.ndarray:
    """`identity`, `identity:d`, or rows separated by `;`, e.g. `1,0.8;0.8,1`."""
    if text.startswith('identity'):
        _, _, d = text.partition(':')
        return np.eye(int(d) if d else 2)
    try:
        return np.array([[float(s) for s in row.split(',')] for row in text.split(';')])
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid matrix {text!r}") from None


@dataclass(frozen=True)
class RunConfig():
    """
    Validated settings of an `estimate` or `transport` run.

    Attributes
    ----------
    command : str
        `'estimate'` or `'transport'`.
    input : str | None
        CSV file of samples, one row per observation.
    estimator : Estimator | None
        Estimator of an `estimate` run.
    alphas : tuple[MultiIndex, ...]
        Multi-indices to estimate.
    source : SourceKind | None
        Source measure of the transport.
    solver : SolverConfig
        Transport settings.
    mc_samples : int
        Monte-Carlo draws of the estimators.
    trim : TrimDomain | None
        Integration domain of trimmed L-moments.
    seed : int | None
        Seed, mandatory for stochastic runs.
    output_format : str
        `'json-lines'` or `'table'`.
    out : str | None
        Output path; stdout if `None`.
    solution : str | None
        Saved transport to reuse instead of solving.
    """
    command: str
    input: str | None = None
    estimator: Estimator | None = None
    alphas: tuple[MultiIndex, ...] = ()
    source: SourceKind | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    mc_samples: int = DEFAULT_MC_SAMPLES
    trim: TrimDomain | None = None
    seed: int | None = None
    output_format: str = 'json-lines'
    out: str | None = None
    solution: str | None = None

    def __post_init__(self):
        if self.input is None and self.solution is None:
            raise UsageError("--input is required")
        if self.command == 'estimate':
            if self.estimator is None:
                raise UsageError("--estimator is required")
            if not self.alphas:
                raise UsageError("at least one --alpha is required")
            if self.estimator is Estimator.TRIMMED_MONOTONE and self.trim is None:
                raise UsageError("--estimator trimmed-monotone requires --trim")
            if self.trim is not None and self.estimator is not Estimator.TRIMMED_MONOTONE:
                raise UsageError("--trim is only valid with --estimator trimmed-monotone")
            if self.estimator in _MONOTONE:
                implied = _MONOTONE[self.estimator]
                if self.source is not None and self.source is not implied:
                    raise UsageError(
                        f"--estimator {self.estimator.value} uses the {implied.value} source")
                object.__setattr__(self, 'source', implied)
            elif self.solution is not None:
                raise UsageError("--solution is only valid with monotone estimators")
        if self.stochastic and self.seed is None:
            raise UsageError("--seed is required for Monte-Carlo estimators")
        if self.mc_samples < 1:
            raise UsageError("--mc must be >= 1")

    @property
    def stochastic(self) -> bool:
        return self.command == 'transport' or self.estimator in _MONOTONE


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog='mlmoments',
        description="Multivariate L-moments through monotone measure transport.",
    )
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    parser.add_argument('-v', '--verbose', action='count', default=0,
                        help="increase log verbosity (repeatable)")
    commands = parser.add_subparsers(dest='command', required=True)

    def add_solver_args(p: argparse.ArgumentParser):
        p.add_argument('--input', help="CSV file of samples")
        p.add_argument('--source', choices=[s.value for s in SourceKind])
        p.add_argument('--gamma', type=float, help="fixed descent step (default: per-cell steps)")
        p.add_argument('--eta', type=float, help="tolerance on the gradient sup-norm")
        p.add_argument('--mc', type=int, help="Monte-Carlo draws")
        p.add_argument('--max-iter', type=int, default=2000)
        p.add_argument('--crn', action='store_true',
                       help="reuse one Monte-Carlo pool across iterations")
        p.add_argument('--seed', type=int)
        p.add_argument('--out', help="output file (default: stdout)")

    estimate = commands.add_parser('estimate', help="estimate L-moments of a sample")
    add_solver_args(estimate)
    estimate.add_argument('--alpha', action='append', type=_ints, default=[],
                          help="multi-index such as 2,1 (repeatable)")
    estimate.add_argument('--estimator', choices=[e.value for e in Estimator])
    estimate.add_argument('--trim', type=_floats, help="per-coordinate trims, e.g. 0.1,0.1")
    estimate.add_argument('--solution', help="transport saved by the transport command")
    estimate.add_argument('--format', choices=['json-lines', 'table'], default='json-lines')

    transport = commands.add_parser('transport', help="solve and save a transport")
    add_solver_args(transport)

    oracle = commands.add_parser('oracle', help="closed-form L-moments")
    kinds = oracle.add_subparsers(dest='kind', required=True)
    copula = kinds.add_parser('copula')
    copula.add_argument('copula', choices=[c.value for c in CopulaKind])
    copula.add_argument('j', type=int)
    copula.add_argument('k', type=int)
    gaussian = kinds.add_parser('gaussian')
    gaussian.add_argument('--A', type=_matrix, default='identity')
    gaussian.add_argument('--m', type=_floats)
    gaussian.add_argument('--alpha', type=_ints, required=True)
    lambda2 = kinds.add_parser('gaussian-lambda2')
    lambda2.add_argument('--A', type=_matrix, default='identity')
    two_point = kinds.add_parser('two-point')
    two_point.add_argument('--x1', type=_floats, required=True)
    two_point.add_argument('--x2', type=_floats, required=True)
    two_point.add_argument('--coordinate', type=int, default=1, help="1-based")
    two_point.add_argument('--source', choices=[s.value for s in SourceKind],
                           default='gaussian')
    two_point.add_argument('--r', type=int, default=2)
    for name in ('lciv-lambda2', 'lciv-lambda3'):
        lciv = kinds.add_parser(name)
        lciv.add_argument('--nu', type=float, default=0.5)
        lciv.add_argument('--sigma', type=_floats, default=[1.8, 0.2])
        lciv.add_argument('--normalize', action='store_true')

    table1 = commands.add_parser('table1', help="LCIV stability experiment")
    table1.add_argument('--nu', type=float, default=0.5)
    table1.add_argument('--n', type=_ints, default=[30, 100])
    table1.add_argument('--replicates', type=int, default=100)
    table1.add_argument('--seed', type=int, default=0)
    table1.add_argument('--mc', type=int, default=DEFAULT_MC_SAMPLES)
    table1.add_argument('--processes', type=int, default=1)
    table1.add_argument('--budget', type=int, default=DEFAULT_BUDGET)
    table1.add_argument('--out')

    return parser


def _run_config(args: argparse.Namespace) -> RunConfig:
    try:
        solver = SolverConfig(step_size=args.gamma, tolerance=args.eta,
                              mc_samples=args.mc, max_iterations=args.max_iter,
                              seed=args.seed or 0, common_random_numbers=args.crn)
        is_estimate = args.command == 'estimate'
        return RunConfig(
            command=args.command,
            input=args.input,
            estimator=Estimator(args.estimator) if is_estimate and args.estimator else None,
            alphas=tuple(MultiIndex(tuple(a)) for a in args.alpha) if is_estimate else (),
            source=SourceKind(args.source) if args.source else None,
            solver=solver,
            mc_samples=args.mc or DEFAULT_MC_SAMPLES,
            trim=TrimDomain(tuple(args.trim)) if is_estimate and args.trim else None,
            seed=args.seed,
            output_format=args.format if is_estimate else 'json-lines',
            out=args.out,
            solution=args.solution if is_estimate else None)
    except DomainError as err:
        raise UsageError(str(err)) from err


def _emit(records: list[dict], config_format: str, stream: IO[str]) -> None:
    if config_format == 'json-lines':
        write_records(records, stream)
        return
    for record in records:
        value = ' '.join(f"{v:.6g}" for v in record.get('value', []))
        alpha = ','.join(str(a) for a in record.get('alpha', []))
        stream.write(f"{record['op']}\t{alpha}\t{record.get('estimator', '')}\t{value}\t{record['status']}\n")


def _estimate_record(result: LMomentResult, status: str) -> dict:
    return {'op': 'estimate', **result.to_record(), 'status': status}


def cmd_estimate(config: RunConfig, stream: IO[str]) -> int:
    """Estimate every requested L-moment and write one record per index."""
    if config.estimator not in _MONOTONE:
        data = load_csv(config.input)
        results = estimate_rosenblatt(
            data, config.alphas,
            unbiased=config.estimator is Estimator.ROSENBLATT_UNBIASED)
        _emit([_estimate_record(r, 'ok') for r in results], config.output_format, stream)
        return EXIT_OK

    if config.solution is not None:
        solution = load_solution(config.solution)
        if solution.source.kind is not config.source:
            raise DomainError(
                f"The saved transport has a {solution.source.kind.value} source, but {config.source.value} is needed.")
    else:
        solution = solve(load_csv(config.input), config.source, config.solver)
    results = estimate_lmoments(solution, config.alphas, config.mc_samples,
                                config.seed, trim=config.trim)
    records = [_estimate_record(r, solution.status) for r in results]
    if not solution.success:
        records.insert(0, {'op': 'warning', 'status': solution.status,
                           'message': f"transport unconverged after {solution.niter} iterations",
                           'grad_norm': solution.grad_norm})
    _emit(records, config.output_format, stream)
    return EXIT_OK if solution.success else EXIT_UNCONVERGED


def cmd_transport(config: RunConfig, stream: IO[str]) -> int:
    """Solve the transport and write it with its trace as JSON lines."""
    source = config.source or SourceKind.UNIFORM
    solution = solve(load_csv(config.input), source, config.solver)
    save_solution(solution, stream)
    return EXIT_OK if solution.success else EXIT_UNCONVERGED


def cmd_oracle(args: argparse.Namespace, stream: IO[str]) -> int:
    """Print closed-form values as decimals, one row per line."""
    if args.kind == 'copula':
        values = np.array([[float(v) for v in copula_lmoment(args.copula, args.j, args.k)]])
    elif args.kind == 'gaussian':
        d = args.A.shape[0]
        m = np.asarray(args.m) if args.m is not None else np.zeros(d)
        values = gaussian_lmoment(m, args.A, args.alpha)[np.newaxis]
    elif args.kind == 'gaussian-lambda2':
        d = args.A.shape[0]
        values = np.column_stack([gaussian_lmoment(np.zeros(d), args.A, MultiIndex.unit(d, j))
                                  for j in range(d)])
    elif args.kind == 'two-point':
        i = args.coordinate - 1
        if args.source == 'gaussian':
            values = two_point_lmoment_gaussian(args.x1, args.x2, i)[np.newaxis]
        else:
            values = two_point_lmoment_uniform(args.x1, args.x2, args.r, i)[np.newaxis]
    else:
        model = LcivModel.symmetrized_weibull(args.nu, sigma=args.sigma)
        if args.normalize:
            model = model.normalized()
        if args.kind == 'lciv-lambda2':
            values = lciv_hermite_lambda2(model, require_normalized=args.normalize)
        else:
            values = lciv_hermite_lambda3(model)
    for row in np.atleast_2d(values):
        stream.write(' '.join(f"{v:.6g}" for v in row) + '\n')
    return EXIT_OK


def cmd_reproduce_table1(args: argparse.Namespace, stream: IO[str]) -> int:
    """Run the LCIV experiment and print the summary table with its checks."""
    if args.replicates*sum(args.n) > args.budget:
        raise UsageError(
            f"--replicates x sum(--n) = {args.replicates*sum(args.n)} exceeds --budget {args.budget}")
    summary = table1_experiment(args.nu, args.n, args.replicates, args.seed,
                                mc_samples=args.mc, processes=args.processes,
                                budget=args.budget)
    stream.write(summary.to_table())
    for n, count in summary.excluded.items():
        if count:
            stream.write(f"excluded (n={n}): {count}\n")
    checks = summary.checks()
    for name, passed in checks:
        stream.write(f"{'PASS' if passed else 'FAIL'}\t{name}\n")
    failed = [name for name, passed in checks if not passed]
    if failed:
        logger.warning("%d experiment check(s) failed: %s.", len(failed), '; '.join(failed))
        return EXIT_CHECKS
    return EXIT_OK


def _dispatch(args: argparse.Namespace, stream: IO[str]) -> int:
    if args.command in ('estimate', 'transport'):
        config = _run_config(args)
        if args.command == 'estimate':
            return cmd_estimate(config, stream)
        return cmd_transport(config, stream)
    if args.command == 'oracle':
        return cmd_oracle(args, stream)
    return cmd_reproduce_table1(args, stream)


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as err:
        parser.print_usage(sys.stderr)
        print(f"mlmoments: error: {err}", file=sys.stderr)
        return EXIT_USAGE

    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(stream=sys.stderr, level=level,
                        format='%(levelname)s %(name)s: %(message)s')

    out = getattr(args, 'out', None)
    try:
        if out:
            with open(out, 'w', encoding='utf-8') as stream:
                return _dispatch(args, stream)
        return _dispatch(args, sys.stdout)
    except UsageError as err:
        print(f"mlmoments: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DomainError, OSError) as err:
        print(f"mlmoments: error: {err}", file=sys.stderr)
        return EXIT_DATA
