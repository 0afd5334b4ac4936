"""Command line entry point: ``adrsignal synth|detect|report``.

Settings resolve as flags > ``--config`` file (YAML or JSON) > defaults.  On
failure a single line ``error: <Category>: <message>`` goes to stderr and the
exit status is 1.
"""

from __future__ import annotations

import argparse
import logging
import sys
from datetime import date
from pathlib import Path

import yaml

from . import synth
from .errors import ADRSignalError, InvalidConfig
from .pipeline import RunConfig, detect, write_outputs
from .readcode import load_dictionary
from .signals import Direction, Order, ReportFormat, SignalQuery, read_statistics, report_filename, select_signals, write_report

log = logging.getLogger("adrsignal")


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise InvalidConfig(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise InvalidConfig(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise InvalidConfig(f"config {path} must be a mapping")
    return {str(k).replace("-", "_"): v for k, v in data.items()}


def _merge(args: argparse.Namespace, names) -> dict:
    """Config-file values overridden by any flag given on the command line."""
    merged = _load_config_file(getattr(args, "config", None))
    unknown = set(merged) - set(names)
    if unknown:
        raise InvalidConfig(f"unknown config keys: {', '.join(sorted(unknown))}")
    for name in names:
        value = getattr(args, name, None)
        if value is not None:
            merged[name] = value
    return merged


def _drug_codes(value) -> tuple[str, ...]:
    if value is None:
        return ()
    if isinstance(value, (list, tuple)):
        return tuple(str(v).strip() for v in value if str(v).strip())
    text = str(value)
    path = Path(text)
    if path.is_file():
        text = path.read_text(encoding="utf-8").replace("\n", ",")
    return tuple(c.strip() for c in text.split(",") if c.strip())


def _add_query_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--p-max", type=float, help="significance threshold (default 0.05)")
    p.add_argument("--order", choices=[o.value for o in Order], help="ranking order (default p)")
    p.add_argument("--direction", choices=[d.value for d in Direction],
                   help="keep increases only (default) or both directions")
    p.add_argument("--chapter", help="keep only event keys starting with this prefix")
    p.add_argument("--top-k", type=int, help="truncate the ranked table")
    p.add_argument("--dictionary", help="code,description CSV used to label reports")
    p.add_argument("--format", choices=[f.value for f in ReportFormat], help="report format (default tsv)")
    p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adrsignal", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a seeded synthetic population")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--n-exposed", type=int)
    p.add_argument("--n-unexposed", type=int)
    p.add_argument("--n-codes", type=int, help="vocabulary size")
    p.add_argument("--window-rate", type=float, help="baseline chance of a code per window")
    p.add_argument("--n-injected", type=int)
    p.add_argument("--multiplier", type=float, help="post-exposure rate multiplier for injected codes")
    p.add_argument("--noise-events", type=float, dest="noise_events_per_patient",
                   help="Poisson mean of out-of-window events per patient")
    p.add_argument("--window-days", type=int)
    p.add_argument("--drug-code")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("detect", help="run signal detection on input CSVs")
    p.add_argument("--config")
    p.add_argument("--input", help="directory holding patients.csv, therapy.csv, medical.csv")
    p.add_argument("--patients")
    p.add_argument("--therapy")
    p.add_argument("--medical")
    p.add_argument("--drug-codes", help="comma-separated codes or a file of codes")
    p.add_argument("--window-days", type=int)
    p.add_argument("--mode", choices=["full", "level3"])
    p.add_argument("--group-size", type=int)
    p.add_argument("--remainder", choices=["drop", "partial"])
    p.add_argument("--test", choices=["pooled", "paired"])
    p.add_argument("--strictness", choices=["strict", "skip"])
    p.add_argument("--threads", type=int)
    p.add_argument("--seed", type=int, help="accepted for config symmetry; unused by detect")
    _add_query_flags(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("report", help="re-rank a statistics table written by detect")
    p.add_argument("statistics", help="statistics_<mode>.tsv from a detect run")
    p.add_argument("--mode", choices=["full", "level3"], help="mode label for the output file name")
    _add_query_flags(p)
    p.set_defaults(func=cmd_report)
    return parser


_SYNTH_KEYS = ["seed", "out", "n_exposed", "n_unexposed", "n_codes", "window_rate", "n_injected",
               "multiplier", "noise_events_per_patient", "window_days", "drug_code",
               "index_start", "index_end"]


def cmd_synth(args) -> int:
    opts = _merge(args, _SYNTH_KEYS)
    out = opts.pop("out", None) or "synth"
    for key in ("index_start", "index_end"):
        if key in opts and not isinstance(opts[key], date):
            opts[key] = date.fromisoformat(str(opts[key]))
    try:
        config = synth.default_config(**opts)
    except TypeError as exc:
        raise InvalidConfig(str(exc)) from None
    paths = synth.generate(config, out)
    for name in ("patients", "therapy", "medical", "truth"):
        print(paths[name])
    return 0


def cmd_detect(args) -> int:
    names = RunConfig.field_names() + ["input"]
    opts = _merge(args, names)
    input_dir = opts.pop("input", None)
    if input_dir:
        for name in ("patients", "therapy", "medical"):
            opts.setdefault(name, str(Path(input_dir) / f"{name}.csv"))
    opts["drug_codes"] = _drug_codes(opts.get("drug_codes"))
    config = RunConfig(**opts)
    result = detect(config)
    dictionary = load_dictionary(config.dictionary) if config.dictionary else None
    paths = write_outputs(config, result, dictionary)
    print(paths["summary"].read_text(encoding="utf-8"), end="")
    return 0


def cmd_report(args) -> int:
    query = SignalQuery(
        order=args.order or Order.ASCENDING_P,
        p_max=args.p_max if args.p_max is not None else 0.05,
        direction=args.direction or Direction.INCREASE_ONLY,
        chapter_prefix=args.chapter,
        top_k=args.top_k,
    )
    dictionary = load_dictionary(args.dictionary) if args.dictionary else None
    records = select_signals(read_statistics(args.statistics), query, dictionary)
    mode = args.mode or ("level3" if "level3" in Path(args.statistics).name else "full")
    fmt = args.format or "tsv"
    out = Path(args.out or Path(args.statistics).parent)
    out.mkdir(parents=True, exist_ok=True)
    path = out / report_filename(query.order, mode, fmt)
    write_report(records, dictionary, fmt, path)
    print(path)
    return 0


def _one_line(exc) -> str:
    return " ".join(str(exc).split())


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ADRSignalError as exc:
        print(f"error: {exc.category}: {_one_line(exc)}", file=sys.stderr)
    except OSError as exc:
        print(f"error: IoError: {_one_line(exc)}", file=sys.stderr)
    except ValueError as exc:
        print(f"error: InvalidConfig: {_one_line(exc)}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
