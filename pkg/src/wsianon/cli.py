"""Command line front end.

One line is printed per input file: a human summary by default, a
structured record with --json. Diagnostics go to stderr only; the
exit code is the primary machine-readable result:

    0  every file processed and, in anonymize mode, reached level 4
    1  unsupported format
    2  corrupt structure
    3  I/O failure
    4  policy refusal (inseparable label, unsatisfiable replacement,
       or a run that finished below level 4)
    5  bad usage

With several failing inputs the code of the first failure (in input
order) wins.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from concurrent.futures import ThreadPoolExecutor

from .detect import VendorFormat, sniff_path
from .engine import AnonymizationConfig, PolicyLevel, anonymize_path, audit_path
from .errors import (
    CorruptStructure,
    IoFailure,
    LabelNotSeparable,
    ReplacementConstraintViolation,
    UnsupportedFormat,
    WsiAnonError,
)

EXIT_OK = 0
EXIT_UNSUPPORTED = 1
EXIT_CORRUPT = 2
EXIT_IO = 3
EXIT_POLICY = 4
EXIT_USAGE = 5


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad arguments; the contract reserves 2
    # for corrupt inputs, so usage problems are remapped
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="wsi-anon",
        description="Anonymize whole-slide images in place, in their native formats.",
    )
    p.add_argument("files", nargs="*", metavar="FILE", help="slide files to process")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--audit", action="store_true",
                      help="grade files without modifying them")
    mode.add_argument("--detect", action="store_true",
                      help="print the detected format of each file")
    p.add_argument("--keep-macro", action="store_true",
                   help="preserve the macro overview image")
    p.add_argument("--overwrite-only", action="store_true",
                   help="blank image payloads but keep directory structure intact")
    p.add_argument("--backup", metavar="DIR", default=None,
                   help="copy each file into DIR before modifying it")
    p.add_argument("--rename", metavar="NAME", default=None,
                   help="base name for the output file (default: random)")
    p.add_argument("--dry-run", action="store_true",
                   help="plan and simulate, touch nothing")
    p.add_argument("--sentinels", metavar="FILE", default=None,
                   help="known identifiers to scan for during auditing")
    p.add_argument("--quiet", action="store_true", help="suppress per-file output")
    p.add_argument("--json", action="store_true", dest="as_json",
                   help="emit one JSON record per file")
    p.add_argument("--parallel", metavar="N", type=int, default=1,
                   help="process up to N files concurrently")
    return p


def _load_sentinels(path: str) -> dict[str, bytes]:
    """Accept either the fixture sentinel file or plain text.

    A JSON object is read with the fixture conventions (values are
    needles, hex_roles lists entries whose values are hex-encoded
    binary). Anything else is newline-separated literal strings.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    text = raw.decode("utf-8", errors="replace")
    stripped = text.lstrip()
    if stripped.startswith("{"):
        from .forge import load_sentinels

        return load_sentinels(path)
    needles: dict[str, bytes] = {}
    for i, line in enumerate(text.splitlines()):
        line = line.strip()
        if line:
            needles[f"needle{i}"] = line.encode("utf-8")
    return needles


def _classify(exc: BaseException) -> int:
    if isinstance(exc, UnsupportedFormat):
        return EXIT_UNSUPPORTED
    if isinstance(exc, (LabelNotSeparable, ReplacementConstraintViolation)):
        return EXIT_POLICY
    if isinstance(exc, CorruptStructure):
        return EXIT_CORRUPT
    if isinstance(exc, IoFailure):
        return EXIT_IO
    if isinstance(exc, WsiAnonError):
        return EXIT_CORRUPT
    if isinstance(exc, OSError):
        return EXIT_IO
    return EXIT_IO


def _checks_line(checks: dict[str, bool]) -> str:
    return " ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in checks.items())


def _run_one(path: str, args, sentinels) -> tuple[int, str | None, dict | None]:
    """Process one file; returns (exit_code, human_line, json_record)."""
    if args.detect:
        det = sniff_path(path)
        record = {"path": path, "vendor": det.vendor.slug, "cue": det.cue}
        code = EXIT_UNSUPPORTED if det.vendor == VendorFormat.UNKNOWN else EXIT_OK
        return code, det.vendor.slug, record

    if args.audit:
        det = sniff_path(path)
        outcome = audit_path(path, sentinels)
        record = {"path": path, "vendor": det.vendor.slug, **outcome.to_dict()}
        line = f"{path} [{det.vendor.slug}] {outcome.level_name} {_checks_line(outcome.checks)}"
        return EXIT_OK, line, record

    config = AnonymizationConfig(
        keep_macro=args.keep_macro,
        overwrite_only=args.overwrite_only,
        backup_dir=args.backup,
        new_base_name=args.rename,
        dry_run=args.dry_run,
    )
    report = anonymize_path(path, config)
    if sentinels and not args.dry_run:
        # regrade with the caller's identifiers folded in
        report.audit = audit_path(report.output_path, sentinels)

    code = EXIT_OK
    if not args.overwrite_only and report.audit.level < PolicyLevel.L4_METADATA_CLEAN:
        print(
            f"wsi-anon: {path}: finished below level 4 "
            f"({report.audit.level_name}): {_checks_line(report.audit.checks)}",
            file=sys.stderr,
        )
        code = EXIT_POLICY

    patches = (f"patches=0/{report.patches_planned}" if report.dry_run
               else f"patches={report.patches_applied}")
    bits = [f"{path} -> {report.output_path}", f"[{report.vendor}]",
            report.audit.level_name, patches]
    if report.backup_path:
        bits.append(f"backup={report.backup_path}")
    if report.dry_run:
        bits.append("(dry run)")
    return code, "  ".join(bits), report.to_dict()


def run(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits itself on --help and on flag conflicts
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    if not args.files:
        print("wsi-anon: error: no input files", file=sys.stderr)
        return EXIT_USAGE
    if args.parallel < 1:
        print("wsi-anon: error: --parallel must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    if args.rename is not None and len(args.files) > 1:
        print("wsi-anon: error: --rename with several inputs would collide",
              file=sys.stderr)
        return EXIT_USAGE
    if args.detect and (args.keep_macro or args.overwrite_only or args.backup
                        or args.rename or args.dry_run):
        print("wsi-anon: error: --detect takes no anonymization flags", file=sys.stderr)
        return EXIT_USAGE

    sentinels = None
    if args.sentinels:
        try:
            sentinels = _load_sentinels(args.sentinels)
        except OSError as exc:
            print(f"wsi-anon: {args.sentinels}: {exc}", file=sys.stderr)
            return EXIT_IO

    def worker(path: str) -> tuple[int, str | None, dict | None]:
        try:
            return _run_one(path, args, sentinels)
        except Exception as exc:
            code = _classify(exc)
            name = type(exc).__name__
            print(f"wsi-anon: {path}: {name}: {exc}", file=sys.stderr)
            if not isinstance(exc, (WsiAnonError, OSError)):
                traceback.print_exc()
            return code, None, None

    if args.parallel > 1 and len(args.files) > 1:
        with ThreadPoolExecutor(max_workers=args.parallel) as ex:
            results = list(ex.map(worker, args.files))
    else:
        results = [worker(f) for f in args.files]

    exit_code = EXIT_OK
    for code, line, record in results:
        if code != EXIT_OK and exit_code == EXIT_OK:
            exit_code = code
        if args.quiet or line is None:
            continue
        if args.as_json:
            sys.stdout.write(json.dumps(record, separators=(",", ":")) + "\n")
        else:
            sys.stdout.write(line + "\n")
    sys.stdout.flush()
    return exit_code


def main(argv: list[str] | None = None) -> int:
    return run(argv)


if __name__ == "__main__":
    raise SystemExit(main())
