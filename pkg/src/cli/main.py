"""
Command-line front end
Subcommands: import, variability, uncertainty, evaluate, correlate, simulate,
schedule, plot. Exit codes: 0 success, 1 usage, 2 data/parse, 3 internal
consistency failure.
"""

import argparse
import logging
import sys
from typing import Any, Dict, List, Optional, Sequence, Tuple

from src.pipeline.analysis_pipeline import VariabilityAnalysisPipeline
from src.utils.config import RunConfig, load_run_config
from src.utils.exceptions import ConfigError, LandmarkAnalysisError

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


class _ArgumentParser(argparse.ArgumentParser):
    """Parser whose usage errors surface as ConfigError (exit code 1)"""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _thresholds(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"thresholds must be comma-separated numbers, got '{text}'") from None


def _strategy_path(text: str) -> Tuple[str, str]:
    name, sep, path = text.partition("=")
    if not sep or not name or not path:
        raise argparse.ArgumentTypeError(f"expected NAME=PATH, got '{text}'")
    return name.strip(), path.strip()


def _common_options() -> argparse.ArgumentParser:
    common = _ArgumentParser(add_help=False)
    common.add_argument('--config', type=str, default=None, help='YAML run configuration')
    common.add_argument('--corpus', type=str, default=None, help='Native JSON-lines annotation corpus')
    common.add_argument('--strategy', type=_strategy_path, action='append', default=None, metavar='NAME=PATH',
                        help='Prediction-sample file of a fusion strategy (repeatable)')
    common.add_argument('--out', type=str, default=None, help='Output directory')
    common.add_argument('--seed', type=int, default=None, help='Run seed (default: 42)')
    common.add_argument('--folds', type=int, default=None, help='Cross-validation folds (default: 4)')
    common.add_argument('--bin-size', type=int, default=None, help='Landmarks per correlation bin (default: 5)')
    common.add_argument('--binning', choices=['consecutive', 'sorted'], default=None,
                        help='Ordering before binning (default: consecutive)')
    common.add_argument('--thresholds', type=_thresholds, default=None, metavar='T1,T2,...',
                        help='SDR thresholds in mm (default: 2,2.5,3,4)')
    common.add_argument('--epsilon', type=float, default=None, help='Sets both anisotropy and WCVar epsilon')
    common.add_argument('--space', choices=['original', 'downsampled'], default=None,
                        help='Coordinate space of imported / simulated annotations')
    common.add_argument('--gt-rater', type=str, default=None, help='Use one rater as ground truth instead of the average')
    common.add_argument('--log-level', type=str, default=None, help='Logging level (default: INFO)')
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = _ArgumentParser(
        prog='landmark-variability',
        description='Inter-rater variability and uncertainty analysis for anatomical landmarks',
    )
    subparsers = parser.add_subparsers(dest='command', metavar='COMMAND')
    subparsers.required = True

    p_import = subparsers.add_parser('import', parents=[common], help='Import ISBI files or a native corpus')
    p_import.add_argument('source', help='Directory <rater>/<scan>.txt or a native corpus file')
    p_import.add_argument('--output', type=str, default=None, help='Corpus file to write')

    subparsers.add_parser('variability', parents=[common], help='Inter-rater variability metrics')
    subparsers.add_parser('uncertainty', parents=[common], help='Uncertainty metrics per strategy')
    subparsers.add_parser('evaluate', parents=[common], help='MRE / SDR per strategy')
    subparsers.add_parser('correlate', parents=[common], help='Uncertainty vs. variability and error')

    p_simulate = subparsers.add_parser('simulate', parents=[common], help='Write a synthetic corpus')
    p_simulate.add_argument('--scans', type=int, default=None)
    p_simulate.add_argument('--landmarks', type=int, default=None)
    p_simulate.add_argument('--raters', type=int, default=None)
    p_simulate.add_argument('--mc-samples', type=int, default=None)
    p_simulate.add_argument('--confidence', choices=['constant', 'spread_coupled'], default=None)
    p_simulate.add_argument('--heatmap-sigma', type=float, default=None,
                            help='Render samples as heatmaps with this sigma (px) and decode them by argmax')
    p_simulate.add_argument('--analyze', action='store_true', help='Run every analysis on the simulated corpus')

    p_schedule = subparsers.add_parser('schedule', parents=[common], help='Random Sampling training schedule')
    p_schedule.add_argument('--iterations', type=int, default=None)
    p_schedule.add_argument('--fold', type=int, default=None, help='Leave this test fold out')
    p_schedule.add_argument('--output', type=str, default=None)

    p_plot = subparsers.add_parser('plot', parents=[common], help='SVG plots of rater clouds')
    p_plot.add_argument('--scan', action='append', default=None, help='Restrict to a scan (repeatable)')
    p_plot.add_argument('--landmark', type=int, action='append', default=None,
                        help='Restrict to a landmark id (repeatable)')
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {
        'corpus_path': args.corpus,
        'output_dir': args.out,
        'seed': args.seed,
        'n_folds': args.folds,
        'bin_size': args.bin_size,
        'binning': args.binning,
        'thresholds_mm': args.thresholds,
        'space': args.space,
        'gt_rater': args.gt_rater,
        'log_level': args.log_level.upper() if args.log_level else None,
    }
    if args.strategy:
        overrides['samples'] = dict(args.strategy)
    if args.epsilon is not None:
        overrides['epsilon_aniso'] = args.epsilon
        overrides['epsilon_wcvar'] = args.epsilon
    if args.command == 'schedule':
        overrides['schedule_iterations'] = args.iterations
    if args.command == 'simulate':
        simulation = {
            'n_scans': args.scans,
            'n_landmarks': args.landmarks,
            'n_raters': args.raters,
            'mc_samples': args.mc_samples,
            'confidence_model': args.confidence,
        }
        simulation = {k: v for k, v in simulation.items() if v is not None}
        if simulation:
            overrides['simulation'] = simulation
        overrides['heatmap_sigma_px'] = args.heatmap_sigma
    return overrides


def _run(args: argparse.Namespace, config: RunConfig) -> None:
    pipeline = VariabilityAnalysisPipeline(config)
    if args.command == 'import':
        pipeline.run_import(args.source, args.output)
        summary = pipeline.corpus.summary()
        print(" ".join(f"{key}={value}" for key, value in summary.items()))
    elif args.command == 'variability':
        pipeline.run_variability()
    elif args.command == 'uncertainty':
        pipeline.run_uncertainty()
    elif args.command == 'evaluate':
        pipeline.run_evaluation()
    elif args.command == 'correlate':
        pipeline.run_correlation()
    elif args.command == 'simulate':
        pipeline.run_simulation()
        if args.analyze:
            pipeline.run_full_analysis()
    elif args.command == 'schedule':
        pipeline.run_schedule(fold=args.fold, output=args.output)
    elif args.command == 'plot':
        pipeline.run_plots(scan_ids=args.scan, landmark_ids=args.landmark)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        config = load_run_config(args.config, _overrides(args))
        logging.basicConfig(level=getattr(logging, config.log_level, logging.INFO), format=LOG_FORMAT)
        _run(args, config)
    except LandmarkAnalysisError as e:
        logger.error(f"❌ {e}")
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    return 0


if __name__ == '__main__':
    sys.exit(main())
