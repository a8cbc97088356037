"""
Command-line entry point: ``ssga-lab <command> [options]``.

Exit status is 0 when the command completed, 1 when it failed or a
validation it runs failed, and 2 for invalid arguments.
"""

import argparse
import csv
import io
import json
import logging
import os
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence

from ssga_lab.core.custom_types import SCHEMA_VERSION, Argument, CommandResult, CommandResultStatus
from ssga_lab.harness.commands import Lab

logger = logging.getLogger(__name__)

WORKERS_ENV = "SSGA_LAB_WORKERS"
LOG_LEVEL_ENV = "SSGA_LAB_LOG_LEVEL"


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {value}")
    return value


LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR"]

EXIT_CODES = {
    CommandResultStatus.DONE: 0,
    CommandResultStatus.FAILED: 1,
    CommandResultStatus.INVALID: 2,
}


def _log_level(text: str) -> str:
    level = text.upper()
    if level not in LOG_LEVELS:
        raise argparse.ArgumentTypeError(f"log level must be one of {', '.join(LOG_LEVELS)}, got {text!r}")
    return level


def _list_of(convert: Callable[[str], Any]) -> Callable[[str], List[Any]]:
    def parse(text: str) -> List[Any]:
        try:
            return [convert(item) for item in text.split(",") if item.strip()]
        except ValueError as e:
            raise argparse.ArgumentTypeError(str(e))
    return parse


_CONVERTERS: Dict[str, Callable[[str], Any]] = {
    "int": int,
    "positive_int": _positive_int,
    "float": float,
    "str": str,
    "int_list": _list_of(int),
    "float_list": _list_of(float),
}


def _add_argument(parser: argparse.ArgumentParser, arg: Argument) -> None:
    flag = f"--{arg.name}"
    if arg.type == "flag":
        parser.add_argument(flag, action="store_true", help=arg.description)
        return
    convert = _CONVERTERS[arg.type]
    options: Dict[str, Any] = {"type": convert, "help": arg.description, "default": arg.default}
    if arg.choices:
        options["choices"] = [convert(choice) for choice in arg.choices]
    if not arg.optional:
        options["required"] = True
    parser.add_argument(flag, **options)


def build_parser(lab: Lab) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ssga-lab", description="Steady-state (mu+1) GA laboratory")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name in lab.available_commands:
        command = lab.get_command(name)
        sub = subparsers.add_parser(name, help=command.description, description=command.description)
        for arg in command.args:
            _add_argument(sub, arg)
        sub.add_argument("--seed", type=int, default=0, help="Master seed (default 0)")
        sub.add_argument("--out", help="Output file, stdout when omitted")
        sub.add_argument("--format", choices=["csv", "json"], default=command.default_format,
                         help=f"Output format (default {command.default_format})")
        # string defaults go through the type converter, so bad env values are argument errors
        sub.add_argument("--workers", type=_positive_int, default=os.getenv(WORKERS_ENV, "1"),
                         help=f"Worker processes (CLI > env:{WORKERS_ENV} > 1)")
        sub.add_argument("--log-level", type=_log_level, default=os.getenv(LOG_LEVEL_ENV, "WARNING"),
                         help=f"Logging level on stderr, one of {', '.join(LOG_LEVELS)} "
                              f"(CLI > env:{LOG_LEVEL_ENV} > WARNING)")
    return parser


def _csv_value(value: Any) -> Any:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return value


def render(result: CommandResult, fmt: str) -> str:
    """Serialises a result; CSV carries the rows only, JSON everything."""
    if fmt == "csv":
        buffer = io.StringIO()
        columns = result.columns or (list(result.rows[0]) if result.rows else [])
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(columns)
        for row in result.rows:
            writer.writerow([_csv_value(row.get(column)) for column in columns])
        return buffer.getvalue()
    document = {
        "schema_version": SCHEMA_VERSION,
        "command": result.command,
        "status": result.status.value,
        "message": result.feedback_message,
        "rows": result.rows,
        "info": result.info,
    }
    return json.dumps(document, indent=2) + "\n"


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    lab = Lab()
    parser = build_parser(lab)
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0

    logging.basicConfig(level=args.log_level, stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    kwargs = {k: v for k, v in vars(args).items() if k not in ("command", "out", "format", "log_level")}
    logger.info("running %s", args.command)
    result = lab.get_command(args.command).execute(**kwargs)
    logger.info("%s finished: %s (%s)", args.command, result.status.value, result.feedback_message)
    if result.status != CommandResultStatus.DONE:
        print(result.feedback_message, file=sys.stderr)

    text = render(result, args.format)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_CODES[result.status]


def main() -> None:
    sys.exit(cli_main())
