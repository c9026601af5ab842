"""
Command-line entrypoint for the IQB scoring engine.

Commands:
- validate  -> config findings, one per line
- aggregate -> pre-aggregated CSV from measurement inputs
- score     -> JSON or CSV score reports, one per region
- explain   -> contribution table for one region

Exit codes: 0 success, 1 data/validation failure, 2 usage/parse error.

Usage:
    python -m backend.main validate -c data/config/iqb.example.yaml
    python -m backend.main score -c data/config/iqb.example.yaml ndt=ndt.csv ookla=ookla.csv
"""

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Optional

# =============================================================================
# PATH SETUP
# =============================================================================
# Allow `python backend/main.py` as well as `python -m backend.main`

PROJECT_ROOT = Path(__file__).resolve().parent.parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from pydantic import ValidationError

from backend.iqb import __version__
from backend.iqb.analytics import build_aggregate_matrix, score_region
from backend.iqb.config import Settings, get_config_summary, get_settings
from backend.iqb.errors import ConfigError, IngestError, InsufficientDataError, IQBError
from backend.iqb.ingest import (
    RowReject,
    canonical_spec,
    detect_granularity,
    filter_window,
    load_adapter_spec,
    parse_per_test,
    parse_pre_aggregated,
    read_table,
    write_rejects_csv,
)
from backend.iqb.model import (
    AggregateKey,
    AggregateStat,
    AggregationSettings,
    Granularity,
    MeasurementRecord,
    QualityLevel,
    ScoringConfig,
    UseCase,
    load_config,
    validate_config,
)
from backend.iqb.model.types import DATASET_ID_PATTERN
from backend.iqb.report import (
    aggregates_to_csv,
    build_manifest,
    render_explain,
    report_document,
    reports_to_csv,
    reports_to_json,
)

logger = logging.getLogger("backend.main")

EXIT_OK = 0
EXIT_DATA = 1
EXIT_USAGE = 2

LEVELS = {"high": QualityLevel.high, "min": QualityLevel.minimum, "minimum": QualityLevel.minimum}

# Flags recorded in the run manifest
MANIFEST_FLAGS = ("command", "region", "level", "format", "window", "dropped", "mode", "min_samples")


# =============================================================================
# ARGUMENT TYPES
# =============================================================================

def _instant(text: str) -> Optional[datetime]:
    if not text:
        return None
    try:
        ts = datetime.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an RFC 3339 instant: {text!r}") from None
    if ts.tzinfo is None:
        raise argparse.ArgumentTypeError(f"instant needs a UTC offset: {text!r}")
    return ts


def parse_window(text: str) -> tuple[Optional[datetime], Optional[datetime]]:
    """START/END, either side may be empty; the window is [START, END)."""
    start, sep, end = text.partition("/")
    if not sep:
        raise argparse.ArgumentTypeError("window must be START/END")
    bounds = (_instant(start), _instant(end))
    if bounds[0] and bounds[1] and bounds[0] >= bounds[1]:
        raise argparse.ArgumentTypeError("window start must be before its end")
    return bounds


@dataclass(frozen=True)
class InputSpec:
    path: Path
    dataset: Optional[str] = None


def parse_input(token: str) -> InputSpec:
    """PATH or DATASET=PATH."""
    name, sep, rest = token.partition("=")
    if sep and rest and DATASET_ID_PATTERN.match(name):
        return InputSpec(path=Path(rest), dataset=name)
    return InputSpec(path=Path(token))


# =============================================================================
# INPUT LOADING
# =============================================================================

@dataclass
class LoadedInputs:
    records: list[MeasurementRecord] = field(default_factory=list)
    provided: list[AggregateStat] = field(default_factory=list)
    rejects: list[RowReject] = field(default_factory=list)
    dropped: int = 0


def _spec_for(config: ScoringConfig, source: InputSpec, granularity: Granularity):
    if source.dataset is None:
        return canonical_spec(granularity)
    entry = config.dataset(source.dataset)
    if entry is None:
        raise IngestError(f"dataset {source.dataset!r} is not declared in the config")
    adapter = config.adapter_path(entry.id)
    spec = load_adapter_spec(adapter) if adapter is not None else canonical_spec(entry.granularity)
    return spec.for_dataset(entry.id)


def load_inputs(config: ScoringConfig, sources: list[InputSpec], window=None) -> LoadedInputs:
    """Parse every input into records or provided stats, collecting rejects."""
    loaded = LoadedInputs()
    for source in sources:
        frame = read_table(source.path)
        spec = _spec_for(config, source, detect_granularity(frame))

        if spec.granularity is Granularity.per_test:
            records, rejects = parse_per_test(frame, spec)
            loaded.records.extend(records)
        else:
            entry = config.dataset(source.dataset) if source.dataset else None
            stats, rejects = parse_pre_aggregated(frame, spec, entry.statistic if entry else "p95")
            loaded.provided.extend(stats)

        if len(sources) > 1:
            rejects = [r.model_copy(update={"message": f"{source.path}: {r.message}"}) for r in rejects]
        loaded.rejects.extend(rejects)
        if rejects:
            logger.warning("%s: %d rows rejected", source.path, len(rejects))

    if window is not None:
        loaded.records, loaded.dropped = filter_window(loaded.records, *window)
    return loaded


# =============================================================================
# SHARED STEPS
# =============================================================================

def _config_path(args: argparse.Namespace, settings: Settings) -> Path:
    path = args.config or settings.config
    if path is None:
        raise ConfigError("no config given: pass --config or set IQB_CONFIG")
    return Path(path)


def _emit(text: str, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(out, "w", encoding="utf-8", newline="") as f:
        f.write(text)


def _matrix(args, settings: Settings, config: ScoringConfig) -> Optional[dict[AggregateKey, AggregateStat]]:
    loaded = load_inputs(config, args.inputs, args.window)
    args.dropped = loaded.dropped
    if args.window is not None:
        print(f"{loaded.dropped} records outside --window dropped", file=sys.stderr)
    if getattr(args, "rejects", None):
        write_rejects_csv(loaded.rejects, args.rejects)

    overrides = {
        name: getattr(args, name)
        for name in ("mode", "min_samples")
        if getattr(args, name, None) is not None
    }
    try:
        aggregation = AggregationSettings.model_validate(config.aggregation.model_dump() | overrides)
    except ValidationError as e:
        raise ConfigError(f"invalid aggregation override:\n{e}") from e

    if not loaded.records and not loaded.provided:
        return None
    return build_aggregate_matrix(loaded.records, loaded.provided, aggregation, workers=settings.workers)


def _scoring_config(args, settings: Settings) -> Optional[ScoringConfig]:
    """Load the config; print findings and return None when it does not validate."""
    config = load_config(_config_path(args, settings))
    findings = validate_config(config)
    for finding in findings:
        print(finding, file=sys.stderr)
    return None if findings else config


# =============================================================================
# COMMANDS
# =============================================================================

def cmd_validate(args: argparse.Namespace, settings: Settings) -> int:
    config = load_config(_config_path(args, settings))
    findings = validate_config(config)
    for finding in findings:
        print(finding)
    return EXIT_DATA if findings else EXIT_OK


def cmd_aggregate(args: argparse.Namespace, settings: Settings) -> int:
    config = _scoring_config(args, settings)
    if config is None:
        return EXIT_DATA
    matrix = _matrix(args, settings, config)
    if not matrix:
        print("no data", file=sys.stderr)
        return EXIT_DATA
    _emit(aggregates_to_csv(matrix), args.out)
    return EXIT_OK


def cmd_score(args: argparse.Namespace, settings: Settings) -> int:
    config = _scoring_config(args, settings)
    if config is None:
        return EXIT_DATA
    matrix = _matrix(args, settings, config)
    if not matrix:
        print("no data", file=sys.stderr)
        return EXIT_DATA

    regions = sorted({region for region, _, _ in matrix})
    if args.region is not None:
        if args.region not in regions:
            print(f"unknown region {args.region!r}", file=sys.stderr)
            return EXIT_DATA
        regions = [args.region]

    def score_one(region: str):
        try:
            return score_region(matrix, config.thresholds, config.weights, region, args.level)
        except InsufficientDataError as e:
            return e

    with ThreadPoolExecutor(max_workers=settings.workers) as pool:
        outcomes = list(pool.map(score_one, regions))

    status = EXIT_OK
    reports = []
    for region, outcome in zip(regions, outcomes):
        if isinstance(outcome, InsufficientDataError):
            print(f"{region}: {outcome}", file=sys.stderr)
            status = EXIT_DATA
        else:
            reports.append(outcome)

    if args.format == "csv":
        _emit(reports_to_csv(reports), args.out)
    else:
        manifest = build_manifest(
            config,
            [source.path for source in args.inputs],
            _parameters(args),
            settings.source_date_epoch,
        )
        _emit(reports_to_json([report_document(r, manifest) for r in reports]), args.out)
    return status


def cmd_explain(args: argparse.Namespace, settings: Settings) -> int:
    config = _scoring_config(args, settings)
    if config is None:
        return EXIT_DATA
    matrix = _matrix(args, settings, config)
    if not matrix or args.region not in {region for region, _, _ in matrix}:
        print(f"no data for region {args.region!r}", file=sys.stderr)
        return EXIT_DATA

    try:
        report = score_region(matrix, config.thresholds, config.weights, args.region, args.level)
    except InsufficientDataError as e:
        print(e, file=sys.stderr)
        return EXIT_DATA

    text, consistent = render_explain(report, args.use_case)
    _emit(text, None)
    return EXIT_OK if consistent else EXIT_DATA


def _parameters(args: argparse.Namespace) -> dict[str, object]:
    params = {}
    for name in MANIFEST_FLAGS:
        value = getattr(args, name, None)
        if name == "window" and value is not None:
            value = "/".join(ts.isoformat() if ts else "" for ts in value)
        elif isinstance(value, QualityLevel):
            value = value.value
        params[name] = value
    return params


# =============================================================================
# PARSER
# =============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iqb", description="Internet Quality Barometer scoring")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", type=Path, help="scoring config YAML (default: $IQB_CONFIG)")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("inputs", nargs="+", type=parse_input, metavar="[DATASET=]PATH",
                      help="measurement CSV; DATASET= selects the dataset's adapter")
    data.add_argument("--window", type=parse_window, metavar="START/END",
                      help="keep per-test records with START <= timestamp < END")

    level = argparse.ArgumentParser(add_help=False)
    level.add_argument("--level", choices=sorted(LEVELS), default="high",
                       type=str.lower, help="quality level (default: high)")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="validate a scoring config")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("aggregate", parents=[common, data], help="aggregate measurements per region")
    p.add_argument("--out", type=Path, help="output CSV (default: stdout)")
    p.add_argument("--rejects", type=Path, help="write rejected rows to this CSV")
    p.add_argument("--mode", choices=["tail", "literal"], help="override aggregation mode")
    p.add_argument("--min-samples", type=int, help="override the low-sample warning threshold")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("score", parents=[common, data, level], help="score regions")
    p.add_argument("--region", help="score only this region")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--out", type=Path, help="output file (default: stdout)")
    p.add_argument("--rejects", type=Path, help="write rejected rows to this CSV")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("explain", parents=[common, data, level], help="show score contributions")
    p.add_argument("--region", required=True)
    p.add_argument("--use-case", choices=[u.value for u in UseCase], help="only this use case's rows")
    p.set_defaults(func=cmd_explain)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    args.level = LEVELS.get(getattr(args, "level", None) or "high")
    if getattr(args, "use_case", None):
        args.use_case = UseCase(args.use_case)

    try:
        settings = get_settings()
    except ValidationError as e:
        print(f"error: invalid environment settings:\n{e}", file=sys.stderr)
        return EXIT_USAGE

    logging.basicConfig(
        level=settings.log_level.upper(),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    logger.debug("Settings: %s", get_config_summary(settings))

    try:
        return args.func(args, settings)
    except (ConfigError, IngestError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except IQBError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
