"""
Study Command Line
`study run <id>` and `study list`
"""

import argparse
import sys
from typing import List, Optional

from pydantic import ValidationError

from api.models import OutputFormat, StudyId, StudySpec
from core.config import get_settings
from core.exceptions import ConfigError, ExplorationAbortedError, RaftPerfError
from core.logging import get_logger, setup_logging
from database.presets import get_preset_registry
from services.config_loader import parse_config
from services.result_writer import emit
from services.study_runner import STUDY_CATALOGUE, StudyRunnerService

logger = get_logger()

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_STATE_SPACE_LIMIT = 3


def resolve_study_id(text: str) -> StudyId:
    """Accept a full study id or its short form (S1 .. S8)"""
    for study in StudyId:
        if text == study.value or text.upper() == study.name:
            return study
    raise ConfigError(f"Unknown study '{text}'. Run 'study list' for the catalogue")


def build_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    parser = argparse.ArgumentParser(
        prog="study",
        description="Response-time and availability studies of RAFT controller clusters",
    )
    parser.add_argument("--log-level", default=None, help="Log level (default: from settings)")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run a predefined study")
    run.add_argument("study_id", metavar="ID", help="Study id, e.g. S1-cdf-by-cluster-size or S1")
    run.add_argument("--config", help="key=value cluster configuration file (defaults: table2 preset)")
    run.add_argument("--preset", choices=get_preset_registry().names(), help="Start from a named preset instead of table2")
    run.add_argument("--out", help="Output file (default: stdout)")
    run.add_argument(
        "--format",
        choices=[f.value for f in OutputFormat],
        default=settings.output_format,
        help="Output format",
    )
    run.add_argument("--seed", type=int, help="Random seed for the discrete-event oracle")
    run.add_argument("--runs", type=int, help="Replications for the discrete-event oracle")
    run.add_argument("--eps", type=float, help="Total truncation error of the transient solver")
    run.add_argument("--max-states", type=int, help="Abort exploration beyond this many states")
    run.add_argument("--dump-ctmc", metavar="FILE", help="Also write the CTMC of the study's first configuration")

    commands.add_parser("list", help="List the predefined studies")
    return parser


def _list_studies() -> int:
    for study, description in STUDY_CATALOGUE.items():
        print(f"{study.value:<28} {description}")
    return EXIT_OK


def _run(args: argparse.Namespace) -> int:
    study = resolve_study_id(args.study_id)
    if args.config and args.preset:
        raise ConfigError("--config and --preset are mutually exclusive")
    if args.config:
        config = parse_config(args.config)
    else:
        config = get_preset_registry().config(args.preset or "table2")

    spec = StudySpec(
        id=study,
        config=config,
        output_path=args.out,
        seed=args.seed,
        eps=args.eps,
        max_states=args.max_states,
        runs=args.runs,
    )
    runner = StudyRunnerService()
    outcome = runner.run(spec)
    emit(outcome.table, args.format, spec.output_path)
    if args.dump_ctmc:
        runner.dump_ctmc(outcome.configs[0], args.dump_ctmc)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point of the `study` command; returns the process exit code"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    setup_logging(args.log_level.upper() if args.log_level else None)

    try:
        if args.command == "list":
            return _list_studies()
        return _run(args)
    except (ConfigError, ValidationError) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG_ERROR
    except ExplorationAbortedError as e:
        logger.error(f"State-space limit reached: {e}")
        return EXIT_STATE_SPACE_LIMIT
    except (RaftPerfError, OSError) as e:
        logger.error(f"Study failed: {e}")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
