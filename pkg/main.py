#!/usr/bin/env python3
"""
Certify stabilizability of a switched linear system under restricted switching,
synthesize the switching signal and check exponential decay by simulation.

    python main.py full problems/four_subsystems.json --emit-csv out/
"""
import argparse
import logging
import sys
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from config import (DEFAULT_HORIZON, DEFAULT_M_MAX, DEFAULT_MAX_INTERIOR, DEFAULT_SEED, DEFAULT_TRIALS,
                    DEFAULT_WORKERS, setup_logging)
from errors import (EXIT_INPUT_ERROR, EXIT_NO_CERTIFICATE, EXIT_OK, InstanceValidationError,
                    SwitchCertError, UsageError)
from problem_io import ProblemFile, load_problem, to_instance
from reporting import (Report, export_report, instance_summary, read_blocks_csv, render_report,
                       write_prefix_norms_csv, write_signal_csvs, write_trajectory_csvs)
from signals import check_admissible, signal_from_blocks, synthesize_signal
from simulation_engine import SimulationEngine, calibrate_certificate
from stability_certificates import ResultKind, SearchOptions, search_certificate

SUBCOMMANDS = ('analyze', 'synthesize', 'simulate', 'full')


@dataclass
class RunSettings:
    """Command-line overrides; None falls back to the problem file, then the environment"""
    m_max: Optional[int] = None
    max_interior: Optional[int] = None
    horizon: Optional[int] = None
    trials: Optional[int] = None
    seed: Optional[int] = None
    workers: Optional[int] = None
    allow_stable: bool = False
    escalate_m: bool = False
    emit_csv: Optional[str] = None
    signal_path: Optional[str] = None


def _pick(*values):
    for v in values:
        if v is not None:
            return v
    return None


def search_options(problem: ProblemFile, settings: RunSettings) -> SearchOptions:
    opts = problem.options
    return SearchOptions(
        m_max=_pick(settings.m_max, opts.m_max, DEFAULT_M_MAX),
        max_interior=_pick(settings.max_interior, opts.max_interior, DEFAULT_MAX_INTERIOR),
        allow_stable=settings.allow_stable or opts.allow_stable,
        escalate_m=settings.escalate_m or opts.escalate_m,
        kinds=[ResultKind(k) for k in opts.kinds] if opts.kinds else None,
        combination=tuple(opts.combination) if opts.combination else None,
        lambda_=opts.lambda_,
        workers=_pick(settings.workers, opts.workers, DEFAULT_WORKERS),
    )


def run_pipeline(problem: ProblemFile, subcommand: str,
                 settings: Optional[RunSettings] = None) -> Tuple[Report, int]:
    """
    Run one pipeline stage on a parsed problem.

    Returns:
        (report, exit code): 0 success, 2 no certificate within caps, 1 input/usage error
    """
    settings = settings or RunSettings()
    report = Report(stage=subcommand, instance={})
    try:
        if subcommand not in SUBCOMMANDS:
            raise UsageError(f"unknown subcommand '{subcommand}'")
        if subcommand == 'simulate' and not settings.signal_path:
            raise UsageError("simulate needs a signal file (--signal)")

        opts = problem.options
        horizon = _pick(settings.horizon, opts.horizon, DEFAULT_HORIZON)
        trials = _pick(settings.trials, opts.trials, DEFAULT_TRIALS)
        seed = _pick(settings.seed, opts.seed, DEFAULT_SEED)
        options = search_options(problem, settings)

        instance = to_instance(problem, allow_stable=options.allow_stable)
        report.instance = instance_summary(instance)
        engine = SimulationEngine(instance.family, seed=seed, workers=options.workers)

        if subcommand == 'simulate':
            return _simulate(report, instance, engine, settings, horizon, trials, opts.lambda_)

        result = search_certificate(instance, options)
        report.M = result.M
        report.combinations = [c.to_dict() for c in result.combinations]
        report.candidates = [c.to_dict() for c in result.candidates]
        report.message = result.message
        if not result.found:
            report.exit_code = EXIT_NO_CERTIFICATE
            return report, EXIT_NO_CERTIFICATE

        certificate = result.certificate
        if opts.lambda_ is None:
            certificate = calibrate_certificate(instance.family, certificate, horizon)
        report.certificate = certificate.to_dict()
        if subcommand == 'analyze':
            return report, EXIT_OK

        signal = synthesize_signal(certificate, horizon)
        report.signal = signal.to_dict()
        report.admissibility = check_admissible(signal, instance.graph, instance.bounds).to_dict()
        if settings.emit_csv:
            report.files.extend(write_signal_csvs(signal, settings.emit_csv))
        if subcommand == 'synthesize':
            return report, EXIT_OK

        estimate = engine.verify_ges(signal, certificate, T=horizon, trials=trials)
        report.verification = estimate.to_dict()
        if not estimate.satisfied:
            report.message = f"verification failed: {'; '.join(estimate.reasons)}"
            logging.warning(f"Certificate {certificate.kind.value} did not pass simulation: {report.message}")
        if settings.emit_csv:
            report.files.append(write_prefix_norms_csv(engine.prefix_norms(signal, horizon), settings.emit_csv))
            report.files.extend(write_trajectory_csvs(engine.trajectories(signal, trials, horizon),
                                                      settings.emit_csv))
        return report, EXIT_OK

    except InstanceValidationError as e:
        logging.error(f"Invalid instance: {e}")
        report.message = str(e)
        report.instance = {'violations': e.violations}
    except SwitchCertError as e:
        logging.error(f"{subcommand} failed: {e}")
        report.message = str(e)
    report.exit_code = EXIT_INPUT_ERROR
    return report, EXIT_INPUT_ERROR


def _simulate(report, instance, engine, settings, horizon, trials, lam) -> Tuple[Report, int]:
    blocks = read_blocks_csv(settings.signal_path)
    covered = sum(d for _, d in blocks)
    signal = signal_from_blocks(blocks, min(horizon, covered))
    report.signal = signal.to_dict()
    report.admissibility = check_admissible(signal, instance.graph, instance.bounds).to_dict()
    report.message = "simulation complete"
    if lam is not None:
        estimate = engine.verify_ges(signal, lam=lam, trials=trials)
        report.verification = estimate.to_dict()
        if not estimate.satisfied:
            report.message = f"verification failed: {'; '.join(estimate.reasons)}"
            logging.warning(f"Supplied signal did not pass simulation: {report.message}")
    if settings.emit_csv:
        report.files.append(write_prefix_norms_csv(engine.prefix_norms(signal), settings.emit_csv))
        report.files.extend(write_trajectory_csvs(engine.trajectories(signal, trials), settings.emit_csv))
    return report, EXIT_OK


class CliParser(argparse.ArgumentParser):
    """Reports usage errors as UsageError so they map to the input-error exit code"""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = CliParser(
        description="Stabilizability certificates and switching signals for switched linear systems")
    parser.add_argument('subcommand', choices=SUBCOMMANDS)
    parser.add_argument('problem', help="problem document (JSON)")
    parser.add_argument('--m-max', type=int, help="largest power m tried for each stable combination")
    parser.add_argument('--max-interior', type=int, help="maximum interior vertices per path")
    parser.add_argument('--horizon', type=int, help="signal horizon T in steps")
    parser.add_argument('--trials', type=int, help="random initial states for verification")
    parser.add_argument('--seed', type=int, help="seed for random initial states")
    parser.add_argument('--workers', type=int, help="threads for candidate evaluation and trials")
    parser.add_argument('--allow-stable', action='store_true', help="permit a stable subsystem with i = j")
    parser.add_argument('--escalate-m', action='store_true', help="retry larger m when the first pass fails")
    parser.add_argument('--emit-csv', metavar='DIR', help="write CSV outputs into DIR")
    parser.add_argument('--signal', metavar='CSV', help="block listing (index,dwell) for simulate")
    parser.add_argument('--report', metavar='FILE', help="write the report to FILE instead of stdout")
    parser.add_argument('--log-level', default=None, help="logging level (default from environment)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        setup_logging()
        logging.error(f"Usage error: {e}")
        return EXIT_INPUT_ERROR
    setup_logging(args.log_level)

    try:
        problem = load_problem(args.problem)
    except (SwitchCertError, OSError) as e:
        logging.error(f"Cannot load {args.problem}: {e}")
        return EXIT_INPUT_ERROR

    settings = RunSettings(
        m_max=args.m_max, max_interior=args.max_interior, horizon=args.horizon,
        trials=args.trials, seed=args.seed, workers=args.workers,
        allow_stable=args.allow_stable, escalate_m=args.escalate_m,
        emit_csv=args.emit_csv, signal_path=args.signal,
    )
    report, code = run_pipeline(problem, args.subcommand, settings)

    if args.report:
        export_report(report, args.report)
    else:
        print(render_report(report))
    return code


if __name__ == '__main__':
    sys.exit(main())
