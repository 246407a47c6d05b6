"""
MAIL toolkit - CLI Entry Point.

Usage:
    python -m src translate --arch x86 sample.asm
    python -m src cfg --normalize --loops sample.asm
    python -m src match template.acfg target.acfg [--no-patterns]
    python -m src build-templates --store STORE --manifest corpus.yaml
    python -m src detect --threshold 0.25 --store STORE sample.asm
    python -m src detect --exact --store STORE --format json a.asm b.asm
    python -m src xval --manifest corpus.yaml --folds 10 --train 25 --seed 42
    python -m src sweep --manifest corpus.yaml --store STORE --thresholds 0.1,0.25,0.5

Data goes to standard output (or -o PATH), diagnostics to standard error.
Exit status is 0 when the command ran, 1 on an operational error and 2 on
a usage error; detection verdicts never change it.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Callable, Optional

from .cfg import AcfgFormatError, deserialize_all, find_loops, function_acfgs, program_acfg, render_dot, serialize
from .config import CliConfig
from .detector import (
    ManifestError,
    StoreFormatError,
    TemplateSource,
    TemplateStore,
    build_templates,
    cross_validate,
    load_corpus,
    load_corpus_manifest,
    prepare_sample,
    render_records,
    render_sweep,
    render_text,
    scan_corpus,
    sweep_threshold,
)
from .disasm import Arch, DisasmError, parse_disasm
from .lifters import lift_program
from .logging_config import configure_logging
from .mail import MailSyntaxError, emit_mail
from .matcher import MatchResult, MatchSizeError, MatchStatus, brute_force_match, match_acfg
from .mail.program import MailProgram
from .tables.loader import TableError
from .validation import MailValidationError, validate_program_or_raise

logger = logging.getLogger(__name__)

PROG = "mail-toolkit"


# =============================================================================
# I/O helpers
# =============================================================================

def read_input(path_or_stdin: str | Path) -> str:
    """Read a file, or standard input for '-'."""
    if str(path_or_stdin) == "-":
        return sys.stdin.read()
    path = Path(path_or_stdin)
    if not path.exists():
        raise FileNotFoundError(f"File not found: {path}")
    return path.read_text()


def write_output(text: str, output: Optional[Path]) -> None:
    if output is None:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        output.write_text(text)
        logger.info(f"Wrote {output}")


def _sample_name(path: Path) -> str:
    return "stdin" if str(path) == "-" else path.stem


def _require_store(config: CliConfig) -> Path:
    if config.store is None:
        raise ValueError("No template store given (use --store or set MAIL_TEMPLATE_STORE)")
    return config.store


def _require_manifest(config: CliConfig) -> Path:
    if config.manifest is None:
        raise ValueError("This command needs --manifest")
    return config.manifest


# =============================================================================
# Commands
# =============================================================================

def lift_input(config: CliConfig) -> MailProgram:
    """Lift the first input listing and check the result is well formed."""
    text = read_input(config.inputs[0])
    program = lift_program(parse_disasm(text, config.arch), config.libcall_as_call)
    validate_program_or_raise(program)
    return program


def cmd_translate(config: CliConfig, args: argparse.Namespace) -> int:
    program = lift_input(config)
    write_output(emit_mail(program, addresses=args.addresses), config.output)
    return 0


def cmd_cfg(config: CliConfig, args: argparse.Namespace) -> int:
    program = lift_input(config)
    if args.program:
        graphs = [program_acfg(program, args.normalize, config.libcall_as_call)]
    else:
        graphs = function_acfgs(program, args.normalize, config.libcall_as_call)
    if args.function is not None:
        graphs = [g for g in graphs if g.name == args.function or str(g.index) == args.function]
        if not graphs:
            raise ValueError(f"No function named {args.function!r}")

    chunks = []
    for graph in graphs:
        if args.dot:
            chunks.append(render_dot(graph, statements=not args.no_statements))
            continue
        chunk = serialize(graph, statements=not args.no_statements)
        if args.loops:
            info = find_loops(graph)
            chunk += f"# loops {graph.name}: {info.summary()}\n"
            for loop in info.loops:
                lo, hi = loop.span
                chunk += (
                    f"# loop header={loop.header} span={lo}-{hi} depth={loop.depth} "
                    f"body={','.join(str(b) for b in sorted(loop.body))}\n"
                )
        chunks.append(chunk)
    write_output("".join(chunks), config.output)
    return 0


def cmd_match(config: CliConfig, args: argparse.Namespace) -> int:
    templates = deserialize_all(read_input(config.inputs[0]))
    targets = deserialize_all(read_input(config.inputs[1]))
    try:
        template, target = templates[args.template_graph], targets[args.target_graph]
    except IndexError:
        raise ValueError("Graph index out of range") from None

    if args.brute_force:
        mapping = brute_force_match(template, target, config.use_patterns)
        result = MatchResult(MatchStatus.MATCHED if mapping is not None else MatchStatus.NO_MATCH, mapping)
    else:
        result = match_acfg(template, target, config.use_patterns, config.budget)

    lines = [f"{result.status} {template.name} -> {target.name}"]
    if result.mapping is not None:
        lines.extend(f"{t} -> {g}" for t, g in result.mapping.items())
    write_output("\n".join(lines) + "\n", config.output)
    return 0


def cmd_build_templates(config: CliConfig, args: argparse.Namespace) -> int:
    root = _require_store(config)
    sources: list[TemplateSource] = []
    if config.manifest is not None:
        for entry in load_corpus_manifest(config.manifest):
            if not entry.is_malware:
                logger.info(f"Skipping benign sample {entry.name}")
                continue
            sources.append(TemplateSource(entry.name, entry.read(), entry.arch.value, str(entry.path)))
    for path in config.inputs:
        sources.append(TemplateSource(_sample_name(path), read_input(path), config.arch.value, str(path)))

    store = build_templates(sources, root, config.libcall_as_call)
    print(f"Built {len(store)} template(s) in {root}", file=sys.stderr)
    return 0


def _detect_samples(config: CliConfig) -> list:
    samples = []
    if config.manifest is not None:
        graphs, _labels = load_corpus(load_corpus_manifest(config.manifest), config.libcall_as_call)
        samples.extend(graphs)
    for path in config.inputs:
        samples.append(prepare_sample(_sample_name(path), read_input(path), config.arch, config.libcall_as_call))
    if not samples:
        raise ValueError("No samples given")
    return samples


def cmd_detect(config: CliConfig, args: argparse.Namespace) -> int:
    store = TemplateStore.load(_require_store(config))
    samples = _detect_samples(config)
    detection = config.detection(mode="exact" if args.exact else "threshold", granularity=args.granularity)
    reports = scan_corpus(store, samples, detection)
    if args.format == "json":
        write_output(render_records(reports), config.output)
    else:
        write_output(render_text(reports, witnesses=args.witnesses), config.output)
    return 0


def cmd_xval(config: CliConfig, args: argparse.Namespace) -> int:
    samples, labels = load_corpus(load_corpus_manifest(_require_manifest(config)), config.libcall_as_call)
    report = cross_validate(
        samples,
        labels,
        k=config.folds,
        train_size=config.train_size,
        threshold=config.threshold,
        seed=config.seed,
        use_patterns=config.use_patterns,
        budget=config.budget,
        mode="exact" if args.exact else "threshold",
    )
    if args.format == "json":
        write_output(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", config.output)
    else:
        write_output(report.to_text(), config.output)
    return 0


def _thresholds(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ValueError(f"Thresholds must be a comma-separated list of numbers, got {text!r}") from None


def cmd_sweep(config: CliConfig, args: argparse.Namespace) -> int:
    store = TemplateStore.load(_require_store(config))
    samples, labels = load_corpus(load_corpus_manifest(_require_manifest(config)), config.libcall_as_call)
    thresholds = _thresholds(args.thresholds)
    if not thresholds:
        raise ValueError("No thresholds given")
    rows = sweep_threshold(store, samples, labels, thresholds, config.use_patterns, config.budget)
    write_output(render_sweep(rows), config.output)
    return 0


COMMANDS: dict[str, Callable[[CliConfig, argparse.Namespace], int]] = {
    "translate": cmd_translate,
    "cfg": cmd_cfg,
    "match": cmd_match,
    "build-templates": cmd_build_templates,
    "detect": cmd_detect,
    "xval": cmd_xval,
    "sweep": cmd_sweep,
}


# =============================================================================
# Argument parsing
# =============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Lift disassembly to MAIL, build annotated CFGs and detect malware by graph matching",
        prog=PROG,
    )
    parser.add_argument(
        "-v", "--verbose",
        action="count",
        default=0,
        help="More diagnostics on stderr (-v: info, -vv: debug)",
    )
    parser.add_argument(
        "--log-format",
        choices=["text", "json"],
        default=None,
        help="Diagnostic format (default: LOG_FORMAT env var, else text)",
    )

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-o", "--output", type=Path, default=None, help="Write output here instead of stdout")
    common.add_argument(
        "--arch",
        choices=[a.value for a in Arch],
        default=Arch.X86.value,
        help="Architecture of the disassembly (default: x86)",
    )
    common.add_argument(
        "--compat-libcalls",
        action="store_true",
        help="Tag library calls as CALL / CALL_CONSTANT",
    )

    matching = argparse.ArgumentParser(add_help=False)
    matching.add_argument("--no-patterns", action="store_true", help="Match on graph structure only")
    matching.add_argument("--budget", type=int, default=None, help="Matcher expansion budget per pair")

    corpus = argparse.ArgumentParser(add_help=False)
    corpus.add_argument("--manifest", type=Path, default=None, help="Corpus manifest (YAML)")
    corpus.add_argument("--workers", type=int, default=None, help="Worker processes (default: CPU count)")

    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")

    translate = subparsers.add_parser("translate", parents=[common], help="Lift disassembly to MAIL text")
    translate.add_argument("input", help="Disassembly listing, or '-' for stdin")
    translate.add_argument("--addresses", action="store_true", help="Append '-- 0x<addr>' to each line")

    cfg = subparsers.add_parser("cfg", parents=[common], help="Build serialized ACFGs from disassembly")
    cfg.add_argument("input", help="Disassembly listing, or '-' for stdin")
    cfg.add_argument("--normalize", action="store_true", help="Normalize the graphs")
    cfg.add_argument("--loops", action="store_true", help="Append a loop summary per graph")
    cfg.add_argument("--program", action="store_true", help="One whole-program graph instead of one per function")
    cfg.add_argument("--function", default=None, help="Only the function with this name or index")
    cfg.add_argument("--dot", action="store_true", help="Emit Graphviz DOT instead of the ACFG format")
    cfg.add_argument("--no-statements", action="store_true", help="Leave out MAIL statements")

    match = subparsers.add_parser("match", parents=[common, matching], help="Match a template ACFG against a target ACFG")
    match.add_argument("template", help="ACFG file of the template")
    match.add_argument("target", help="ACFG file of the target")
    match.add_argument("--template-graph", type=int, default=0, help="Graph index in the template file")
    match.add_argument("--target-graph", type=int, default=0, help="Graph index in the target file")
    match.add_argument("--brute-force", action="store_true", help="Use exhaustive search (graphs of at most 8 blocks)")

    build = subparsers.add_parser(
        "build-templates", parents=[common, corpus], help="Build a template store from malware samples",
    )
    build.add_argument("inputs", nargs="*", help="Disassembly listings of malware samples")
    build.add_argument("--store", type=Path, default=None, help="Store directory (default: MAIL_TEMPLATE_STORE)")

    detect = subparsers.add_parser("detect", parents=[common, matching, corpus], help="Classify samples")
    detect.add_argument("inputs", nargs="*", help="Disassembly listings to classify")
    detect.add_argument("--store", type=Path, default=None, help="Store directory (default: MAIL_TEMPLATE_STORE)")
    mode = detect.add_mutually_exclusive_group()
    mode.add_argument("--exact", action="store_true", help="Flag on any full template graph match")
    mode.add_argument("--threshold", type=float, default=None, help="Matched-function fraction (default: 0.25)")
    detect.add_argument(
        "--granularity",
        choices=["function", "program"],
        default="function",
        help="Exact mode: match function graphs or whole-program graphs (default: function)",
    )
    detect.add_argument("--format", choices=["text", "json"], default="text", help="Report format (default: text)")
    detect.add_argument("--witnesses", action="store_true", help="List the matched graph pairs (text format)")

    xval = subparsers.add_parser("xval", parents=[common, matching, corpus], help="Cross-validate on a labeled corpus")
    xval.add_argument("--folds", type=int, default=10, help="Number of rounds (default: 10)")
    xval.add_argument("--train", type=int, default=25, help="Malware samples per training set (default: 25)")
    xval.add_argument("--seed", type=int, default=0, help="Random seed (default: 0)")
    xval.add_argument("--threshold", type=float, default=None, help="Matched-function fraction (default: 0.25)")
    xval.add_argument("--exact", action="store_true", help="Score with exact mode instead of threshold mode")
    xval.add_argument("--format", choices=["text", "json"], default="text", help="Report format (default: text)")

    sweep = subparsers.add_parser("sweep", parents=[common, matching, corpus], help="Rates over a list of thresholds")
    sweep.add_argument("--store", type=Path, default=None, help="Store directory (default: MAIL_TEMPLATE_STORE)")
    sweep.add_argument("--thresholds", required=True, help="Comma-separated thresholds, e.g. 0.1,0.25,0.5")

    return parser


def config_from_args(args: argparse.Namespace) -> CliConfig:
    """Build the CliConfig; unset options fall back to their environment defaults."""
    if args.command in ("translate", "cfg"):
        inputs = [Path(args.input)]
    elif args.command == "match":
        inputs = [Path(args.template), Path(args.target)]
    else:
        inputs = [Path(p) for p in getattr(args, "inputs", [])]

    overrides = {}
    for option, key in (("store", "store"), ("threshold", "threshold"), ("workers", "workers"), ("budget", "budget")):
        value = getattr(args, option, None)
        if value is not None:
            overrides[key] = value

    return CliConfig(
        command=args.command,
        inputs=inputs,
        arch=Arch.parse(args.arch),
        output=args.output,
        manifest=getattr(args, "manifest", None),
        seed=getattr(args, "seed", 0),
        folds=getattr(args, "folds", 10),
        train_size=getattr(args, "train", 25),
        use_patterns=not getattr(args, "no_patterns", False),
        libcall_as_call=args.compat_libcalls,
        verbosity=args.verbose,
        **overrides,
    )


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command is None:
        parser.print_help(sys.stderr)
        return 2

    level = {0: "WARNING", 1: "INFO"}.get(args.verbose, "DEBUG")
    json_format = None if args.log_format is None else args.log_format == "json"
    configure_logging(level=level, json_format=json_format)

    try:
        config = config_from_args(args)
        return COMMANDS[args.command](config, args)
    except FileNotFoundError as e:
        print(f"Error: {e}", file=sys.stderr)
    except (
        DisasmError, MailSyntaxError, MailValidationError, AcfgFormatError,
        StoreFormatError, TableError, MatchSizeError, ManifestError,
    ) as e:
        print(f"Error: {e}", file=sys.stderr)
    except ValueError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
    except OSError as e:
        print(f"Error: {e}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
