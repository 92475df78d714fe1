import argparse
from typing import Callable, Dict, List, Optional

from app import init_app
from app.constants import ABLATION_BASELINE, ABLATION_TARGET, CONFIG_PATH, ExitStatus
from app.context import context
from app.dto.config_dto import RunConfig
from app.exceptions import ConfigError, MLKPError, NumericBlowUpError, WeightArchiveError
from app.services.ablation_service import high_order_wins, run_ablation
from app.services.data_service import generate_dataset
from app.services.eval_service import evaluate_weights, export_detections, map_passes
from app.services.gradcheck_service import render_reports, run_gradcheck
from app.services.oracle_service import failed_checks, run_oracles
from app.services.train_service import train_detector
from app.utils.config_file import load_config
from app.utils.utils import create_logger, save_lines, save_text

cli_log = create_logger(__name__, entity_name='CLI', level=context.log_level)


def _status(passed: bool) -> int:
    return ExitStatus.OK if passed else ExitStatus.CHECK_FAILED

# --- Commands ---

def cmd_gradcheck(args: argparse.Namespace, cfg: RunConfig) -> int:
    reports = run_gradcheck(cfg.checks, tolerance=args.tolerance, suites=args.suite)
    path = args.report or cfg.paths.report
    save_text(render_reports(reports), path)
    passed = all(report.passed for report in reports)
    cli_log.info(f"Gradient checks {'passed' if passed else 'FAILED'}; report written to {path}")
    return _status(passed)

def cmd_oracle(args: argparse.Namespace, cfg: RunConfig) -> int:
    report = run_oracles(cfg.checks, trials=args.trials)
    path = args.report or cfg.paths.report
    save_text(report.render() + '\n', path)
    if report.passed:
        cli_log.info(f"All oracles agree; report written to {path}")
    else:
        cli_log.error(f"Oracles disagree: {', '.join(failed_checks(report))}")
    return _status(report.passed)

def cmd_train(args: argparse.Namespace, cfg: RunConfig) -> int:
    _, summary = train_detector(cfg, weights_out=args.out or cfg.paths.weights_out, metrics_log=cfg.paths.metrics_log)
    cli_log.info(f"Trained {summary.iterations} iterations; weights written to {summary.weights_path}")
    return ExitStatus.OK

def cmd_eval(args: argparse.Namespace, cfg: RunConfig) -> int:
    report = evaluate_weights(cfg, args.weights or cfg.paths.weights_out)
    path = args.report or cfg.paths.report
    save_text(report.render() + '\n', path)
    return _status(map_passes(report, cfg))

def cmd_export_detections(args: argparse.Namespace, cfg: RunConfig) -> int:
    export_detections(cfg, args.weights or cfg.paths.weights_out, args.out or cfg.paths.detections)
    return ExitStatus.OK

def cmd_gen_data(args: argparse.Namespace, cfg: RunConfig) -> int:
    generate_dataset(cfg, args.out_dir or cfg.paths.data_dir)
    return ExitStatus.OK

def cmd_ablate(args: argparse.Namespace, cfg: RunConfig) -> int:
    results = run_ablation(cfg, variants=args.variant)
    path = args.report or cfg.paths.report
    save_lines([result.render() for result in results], path)
    if not {result.variant for result in results} >= {ABLATION_BASELINE, ABLATION_TARGET}:
        cli_log.info(f"'{ABLATION_TARGET}' and '{ABLATION_BASELINE}' were not both run; nothing to compare")
        return ExitStatus.OK
    return _status(high_order_wins(results))


COMMANDS: Dict[str, Callable[[argparse.Namespace, RunConfig], int]] = {
    'gradcheck': cmd_gradcheck,
    'oracle': cmd_oracle,
    'train': cmd_train,
    'eval': cmd_eval,
    'export-detections': cmd_export_detections,
    'gen-data': cmd_gen_data,
    'ablate': cmd_ablate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='mlkp', description="Location-aware polynomial kernel representations for a toy object detector."
    )
    parser.add_argument('--env-file', default=None, help="Environment file to load instead of ./.env.")
    commands = parser.add_subparsers(dest='command', required=True)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument('--config', default=CONFIG_PATH, help=f"Run configuration (default {CONFIG_PATH}).")
        return sub

    gradcheck = add('gradcheck', "Finite-difference checks of every analytic backward pass.")
    gradcheck.add_argument('--tolerance', type=float, default=None, help="Relative error tolerance.")
    gradcheck.add_argument('--suite', action='append', default=None, help="Run only this check (repeatable).")
    gradcheck.add_argument('--report', default=None, help="Report path (default paths.report).")

    oracle = add('oracle', "Compare fast kernels against brute-force oracles.")
    oracle.add_argument('--trials', type=int, default=None, help="Random instances per oracle.")
    oracle.add_argument('--report', default=None, help="Report path (default paths.report).")

    train = add('train', "Train the toy detector on synthetic scenes.")
    train.add_argument('--out', default=None, help="Weight archive to write (default paths.weights_out).")

    evaluate = add('eval', "mAP of a weight archive on the held-out scenes.")
    evaluate.add_argument('--weights', default=None, help="Weight archive (default paths.weights_out).")
    evaluate.add_argument('--report', default=None, help="Report path (default paths.report).")

    export = add('export-detections', "Write held-out detections, one per line.")
    export.add_argument('--weights', default=None, help="Weight archive (default paths.weights_out).")
    export.add_argument('--out', default=None, help="Detections file (default paths.detections).")

    gen_data = add('gen-data', "Export synthetic scenes as PNG images with annotations.")
    gen_data.add_argument('--out-dir', default=None, help="Output folder (default paths.data_dir).")

    ablate = add('ablate', "Train and evaluate the kernel-order and location-weight variants.")
    ablate.add_argument('--report', default=None, help="Report path (default paths.report).")
    ablate.add_argument('--variant', action='append', default=None, help="Run only this variant (repeatable).")
    return parser

def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    init_app(args.env_file)
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as e:
        for problem in e.problems:
            cli_log.error(f"{args.config}: {problem}")
        return ExitStatus.INVALID_INPUT
    except WeightArchiveError as e:
        cli_log.error(str(e))
        return ExitStatus.INVALID_INPUT
    except NumericBlowUpError as e:
        cli_log.error(f"Training diverged at iteration {e.iteration} (loss {e.loss})")
        return ExitStatus.NUMERIC_BLOW_UP
    except MLKPError as e:
        cli_log.error(f"{args.command} failed: {e}")
        return ExitStatus.INVALID_INPUT
    except OSError as e:
        cli_log.error(f"{args.command} could not access {e.filename or 'a file'}: {e.strerror or e}")
        return ExitStatus.INVALID_INPUT
