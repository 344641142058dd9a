"""Command-line front end.

    svbias audit --scores S --metadata M --attributes nationality,gender
    svbias compare RUN_A RUN_B --output-dir D
    svbias synth SPECS.json --output-dir D
    svbias composition --scores S --metadata M --attributes gender,nationality

Options may also come from a key-value config file (``--config``), one
``key = value`` per line using the long flag names; flags win.

Exit codes: 0 success, 2 input/parse error, 3 evaluation error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .bias import EqualizedOddsTolerance, SupportFloor
from .errors import InputError, SvBiasError
from .metrics import DcfConfig
from .pipeline import ALL_FORMATS, AuditConfig, default_output_dir, run_audit, run_compare
from .report import composition_to_csv
from .synth import generate, load_specs
from .trials import (
    SpeakerIdRule,
    TrialFileFormat,
    composition_summary,
    parse_metadata,
    parse_trials,
    write_metadata,
    write_trials,
)

EXIT_OK, EXIT_INPUT, EXIT_EVAL, EXIT_IO = 0, 2, 3, 4

# option name -> (type, default); None default means required
_AUDIT_OPTIONS = {
    "scores": (str, None),
    "metadata": (str, None),
    "attributes": (str, None),
    "p-target": (float, 0.05),
    "c-fn": (float, 1.0),
    "c-fp": (float, 1.0),
    "min-speakers": (int, 5),
    "min-trials": (int, 100),
    "eo-fpr-tol": (float, 0.0),
    "eo-fnr-tol": (float, 0.0),
    "output-dir": (str, ""),
    "formats": (str, ",".join(ALL_FORMATS)),
    "columns": (str, "label,enroll,test,score"),
    "metadata-delimiter": (str, ","),
    "speaker-delimiter": (str, "/"),
    "speaker-segment": (int, 0),
    "jobs": (int, 1),
}


def read_config_file(path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InputError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("_", "-")
            if key not in _AUDIT_OPTIONS:
                raise InputError(f"{path}:{lineno}: unknown option {key!r}")
            out[key] = value
    return out


def _resolve(args, names) -> dict:
    file_values = read_config_file(args.config) if getattr(args, "config", None) else {}
    resolved = {}
    for name in names:
        typ, default = _AUDIT_OPTIONS[name]
        value = getattr(args, name.replace("-", "_"), None)
        if value is None and name in file_values:
            try:
                value = typ(file_values[name])
            except ValueError:
                raise InputError(f"config option {name}: bad value {file_values[name]!r}") from None
        if value is None:
            if default is None:
                raise InputError(f"missing required option --{name}")
            value = default
        resolved[name] = value
    return resolved


def _split(text: str) -> tuple[str, ...]:
    return tuple(t.strip() for t in text.split(",") if t.strip())


def _add_input_options(p):
    p.add_argument("--config", help="key-value config file; flags override it")
    p.add_argument("--scores", help="trial/score file: label enroll_utt test_utt score per line")
    p.add_argument("--metadata", help="speaker metadata CSV with a speaker_id,<attr>,... header")
    p.add_argument("--attributes", help="comma-separated attributes defining subgroups, in display order")
    p.add_argument("--columns", help="trial file column order (default label,enroll,test,score)")
    p.add_argument("--metadata-delimiter", help="metadata field delimiter (default ',')")
    p.add_argument("--speaker-delimiter", help="utterance-id separator for the speaker id (default '/')")
    p.add_argument("--speaker-segment", type=int, help="segment index of the speaker id (default 0)")
    p.add_argument("--output-dir", help="output directory (default $SVBIAS_OUTPUT_DIR or ./svbias-out)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="svbias", description="Group-bias audits of speaker verification scores.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("audit", help="audit subgroup bias and write reports and DET curves")
    _add_input_options(p)
    p.add_argument("--p-target", type=float, help="target prior (default 0.05)")
    p.add_argument("--c-fn", type=float, help="false negative cost (default 1)")
    p.add_argument("--c-fp", type=float, help="false positive cost (default 1)")
    p.add_argument("--min-speakers", type=int, help="support floor: unique enrollment speakers (default 5)")
    p.add_argument("--min-trials", type=int, help="support floor: trials per label (default 100)")
    p.add_argument("--eo-fpr-tol", type=float, help="equalized-odds FPR gap tolerance (default 0)")
    p.add_argument("--eo-fnr-tol", type=float, help="equalized-odds FNR gap tolerance (default 0)")
    p.add_argument("--formats", help=f"comma-separated subset of {','.join(ALL_FORMATS)}")
    p.add_argument("--jobs", type=int, help="worker threads for per-subgroup evaluation")

    p = sub.add_parser("compare", help="compare subgroup bias between two audit runs")
    p.add_argument("report_a", help="report.json (or audit output directory) of run A")
    p.add_argument("report_b", help="report.json (or audit output directory) of run B")
    p.add_argument("--names", default="A,B", help="display names of the two runs (default A,B)")
    p.add_argument("--output-dir", help="output directory")

    p = sub.add_parser("synth", help="generate synthetic trial and metadata files from a JSON spec list")
    p.add_argument("specs", help="JSON list of subgroup score specs")
    p.add_argument("--output-dir", help="output directory")

    p = sub.add_parser("composition", help="speaker/utterance representation per attribute value")
    _add_input_options(p)
    p.add_argument("--top-k", type=int, default=3, help="values listed per attribute (default 3)")
    return parser


def _input_settings(opts):
    fmt = TrialFileFormat.from_string(opts["columns"])
    rule = SpeakerIdRule(opts["speaker-delimiter"], opts["speaker-segment"])
    return fmt, rule


def cmd_audit(args, out) -> int:
    opts = _resolve(args, _AUDIT_OPTIONS)
    try:
        fmt, rule = _input_settings(opts)
        dcf = DcfConfig(opts["p-target"], opts["c-fn"], opts["c-fp"])
    except ValueError as exc:
        raise InputError(str(exc)) from None
    config = AuditConfig(
        scores_path=opts["scores"],
        metadata_path=opts["metadata"],
        attributes=_split(opts["attributes"]),
        dcf=dcf,
        support_floor=SupportFloor(opts["min-speakers"], opts["min-trials"]),
        eo_tolerance=EqualizedOddsTolerance(opts["eo-fpr-tol"], opts["eo-fnr-tol"]),
        output_dir=opts["output-dir"] or default_output_dir(),
        formats=_split(opts["formats"]),
        trial_format=fmt,
        metadata_delimiter=opts["metadata-delimiter"],
        speaker_rule=rule,
        jobs=opts["jobs"],
    )
    _, written = run_audit(config, out)
    out.write(f"wrote {len(written)} files to {config.output_dir}\n")
    return EXIT_OK


def cmd_compare(args, out) -> int:
    names = _split(args.names)
    if len(names) != 2:
        raise InputError("--names takes exactly two comma-separated names")
    run_compare(args.report_a, args.report_b, args.output_dir or default_output_dir(), names, out)
    return EXIT_OK


def cmd_synth(args, out) -> int:
    try:
        specs = load_specs(args.specs)
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"{args.specs}: bad spec file ({exc})") from None
    trials, metadata = generate(specs)
    dest = Path(args.output_dir or default_output_dir())
    dest.mkdir(parents=True, exist_ok=True)
    write_trials(trials.records, dest / "trials.txt")
    attrs = list(specs[0].key.attributes) if specs else []
    write_metadata(metadata, dest / "metadata.csv", attrs)
    out.write(f"wrote {len(trials)} trials and {len(metadata)} speakers to {dest}\n")
    out.write(f"attributes: {','.join(attrs)}\n")
    return EXIT_OK


def cmd_composition(args, out) -> int:
    opts = _resolve(args, ["scores", "metadata", "attributes", "columns", "metadata-delimiter",
                           "speaker-delimiter", "speaker-segment", "output-dir"])
    try:
        fmt, rule = _input_settings(opts)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    trials = parse_trials(opts["scores"], fmt)
    metadata = parse_metadata(opts["metadata"], opts["metadata-delimiter"])
    attrs = _split(opts["attributes"])
    comp = composition_summary(trials, metadata, attrs, rule, top_k=args.top_k)
    out.write(f"{comp.n_speakers} unique speakers, {comp.n_utterance_occurrences} utterance occurrences\n")
    for attr in attrs:
        tops = ", ".join(f"{r.value} ({r.speaker_pct:.1f} / {r.utterance_pct:.1f})" for r in comp.top[attr])
        out.write(f"top {attr} (% speakers / utterances): {tops}\n")
    if opts["output-dir"]:
        dest = Path(opts["output-dir"])
        dest.mkdir(parents=True, exist_ok=True)
        (dest / "composition.csv").write_text(composition_to_csv(comp), encoding="utf-8")
    else:
        out.write(composition_to_csv(comp))
    return EXIT_OK


_COMMANDS = {"audit": cmd_audit, "compare": cmd_compare, "synth": cmd_synth, "composition": cmd_composition}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return _COMMANDS[args.command](args, out)
    except SvBiasError as exc:
        print(f"svbias {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"svbias {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
