"""Command-line driver.

Three subcommands mirror the pipeline stages, plus one that chains them:

    pathpatch analyze  --program P --vuln V [--out DIR]
    pathpatch locate   --program P --vuln V [--out DIR]
    pathpatch evaluate --program P --vuln V --suite S [--out DIR] [--jobs N]
    pathpatch all      --program P --vuln V --suite S [--out DIR]

Programs are MiniLang sources (.mini) or graph documents (.json, analyzable
but not executable). The vulnerability spec is a small JSON file naming the
function plus a statement id or source line, optionally with an exploit
input; graph documents may embed the vulnerable statement instead.

Exit codes: 0 success, 2 usage, 3 input/parse error, 4 analysis diagnostic
(for example a vulnerability no call chain can reach).
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

from .analysis import AnalysisError
from .checks import cut_disconnects, fuzz_vulnerability
from .graphio import (
    GraphImportError,
    build_report,
    import_graph,
    load_graph_file,
    render_report_text,
    report_to_json,
)
from .harness import Limits, SuiteError, evaluate_patches, load_suite, rank
from .ir import IRError
from .locate import candidate_locations
from .minilang import FrontendError, load_program
from .minilang.interp import DEFAULT_MAX_STEPS
from .paths import (
    DEFAULT_ENUMERATION_CAP,
    Exploit,
    build_program_path_graph,
    count_paths,
    enumerate_paths,
    resolve_vulnerability,
)
from .synth import apply_patches, synthesize_patches

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_DIAGNOSTIC = 4


class UsageError(Exception):
    pass


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pathpatch",
        description=(
            "Find the paths leading to a vulnerability, pick patch "
            "locations on them, synthesize error-return patches, and rank "
            "the patches by preserved functionality."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, needs_suite in (
        ("analyze", False),
        ("locate", False),
        ("evaluate", True),
        ("all", True),
    ):
        cmd = sub.add_parser(name)
        cmd.add_argument("--program", required=True, help="program file (.mini or .json)")
        cmd.add_argument("--vuln", help="vulnerability spec file (JSON)")
        cmd.add_argument(
            "--mode",
            choices=("minilang", "graph"),
            help="input kind; default inferred from the program extension",
        )
        cmd.add_argument("--out", help="directory for result files")
        cmd.add_argument(
            "--cap",
            type=int,
            default=DEFAULT_ENUMERATION_CAP,
            help="maximal-path enumeration cap",
        )
        cmd.add_argument("--max-steps", type=int, default=DEFAULT_MAX_STEPS)
        cmd.add_argument("--max-heap-cells", type=int, default=1_000_000)
        cmd.add_argument("--jobs", type=int, default=1, help="evaluation workers")
        cmd.add_argument("--seed", type=int, default=0, help="seed for --fuzz inputs")
        if needs_suite:
            cmd.add_argument("--suite", help="test suite file")
            cmd.add_argument(
                "--fuzz",
                type=int,
                default=0,
                metavar="N",
                help="also fuzz the fully patched program with N random inputs",
            )
    return parser


def infer_mode(args) -> str:
    if args.mode:
        return args.mode
    return "graph" if args.program.endswith(".json") else "minilang"


def load_inputs(args):
    """Load program and vulnerability spec; returns (program, vuln)."""
    if args.cap < 1:
        raise UsageError("--cap must be at least 1")
    if args.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    program_path = Path(args.program)
    if not program_path.exists():
        raise UsageError(f"program file {args.program!r} does not exist")
    mode = infer_mode(args)
    vuln_raw = None
    if args.vuln:
        vuln_path = Path(args.vuln)
        if not vuln_path.exists():
            raise UsageError(f"vulnerability spec {args.vuln!r} does not exist")
        try:
            vuln_raw = json.loads(vuln_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise SuiteError(f"vulnerability spec is not valid JSON: {exc}") from exc

    if mode == "graph":
        doc = load_graph_file(program_path)
        program = import_graph(doc)
        if vuln_raw is not None:
            vuln = _vuln_from_json(program, vuln_raw)
        elif doc.vulnerable is not None:
            vuln = resolve_vulnerability(
                program, doc.vulnerable[0], statement=doc.vulnerable[1]
            )
        else:
            raise UsageError(
                "graph document embeds no vulnerability; pass --vuln"
            )
        return program, vuln

    program = load_program(program_path)
    if vuln_raw is None:
        raise UsageError("--vuln is required for MiniLang programs")
    return program, _vuln_from_json(program, vuln_raw)


def _vuln_from_json(program, raw):
    if "function" not in raw:
        raise SuiteError("vulnerability spec needs a 'function' field")
    exploit = None
    if raw.get("exploit") is not None:
        spec = raw["exploit"]
        exploit = Exploit(
            input=tuple(int(v) for v in spec.get("input", ())),
            kind=spec.get("kind"),
        )
    return resolve_vulnerability(
        program,
        raw["function"],
        statement=raw.get("statement"),
        line=raw.get("line"),
        exploit=exploit,
    )


def write_out(args, name: str, text: str) -> None:
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / name).write_text(text, encoding="utf-8")


def path_graph_document(program, ppg) -> dict:
    chains = []
    for chain_paths in ppg.chains:
        frames = []
        for fp in chain_paths.frames:
            fn = program.functions[fp.frame.function]
            frames.append(
                {
                    "function": fp.frame.function,
                    "target_statement": fp.target_statement,
                    "blocks": [
                        {
                            "id": b,
                            "conditional": b in fp.conditional,
                            "line": fn.blocks[b].line,
                        }
                        for b in fp.dag.blocks
                    ],
                    "edges": [list(e) for e in fp.dag.edges],
                    "governing_conditionals": [list(g) for g in fp.governing],
                }
            )
        chains.append(
            {"functions": list(chain_paths.chain.functions), "frames": frames}
        )
    return {
        "schema": "path-graph@1",
        "vulnerability": {
            "function": ppg.vulnerability.function,
            "statement": ppg.vulnerability.statement,
        },
        "chains": chains,
        "path_count": count_paths(ppg),
        "diagnostics": list(ppg.diagnostics),
    }


def cmd_analyze(args, program, vuln) -> int:
    ppg = build_program_path_graph(program, vuln)
    if ppg.empty:
        for diag in ppg.diagnostics:
            print(f"error: {diag}", file=sys.stderr)
        return EXIT_DIAGNOSTIC
    doc = path_graph_document(program, ppg)
    # list paths explicitly while they fit under the cap; the DAG in
    # `chains` is always present regardless
    if doc["path_count"] <= args.cap:
        doc["paths"] = [
            ["/".join(entry) for entry in path]
            for path in enumerate_paths(ppg, cap=args.cap)
        ]
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    write_out(args, "path_graph.json", text)
    print(
        f"{len(ppg.chains)} call chain(s), {doc['path_count']} maximal path(s) "
        f"to statement {vuln.statement} in {vuln.function}"
    )
    for diag in ppg.diagnostics:
        print(f"note: {diag}", file=sys.stderr)
    if not args.out:
        print(text, end="")
    return EXIT_OK


def cmd_locate(args, program, vuln) -> int:
    ppg = build_program_path_graph(program, vuln)
    if ppg.empty:
        for diag in ppg.diagnostics:
            print(f"error: {diag}", file=sys.stderr)
        return EXIT_DIAGNOSTIC
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        locations = candidate_locations(ppg)
    rows = []
    for loc in locations:
        line = program.functions[loc.function].blocks[loc.block].line
        rows.append(
            {
                "function": loc.function,
                "block": loc.block,
                "line": line,
                "level": loc.level,
                "governing_conditional": loc.governing_conditional,
                "branch_index": loc.branch_index,
            }
        )
    doc = {
        "schema": "candidates@1",
        "vulnerability": {"function": vuln.function, "statement": vuln.statement},
        "candidates": rows,
        "warnings": [str(w.message) for w in caught],
    }
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    write_out(args, "candidates.json", text)
    print(f"{len(rows)} candidate patch location(s)")
    for row in rows:
        where = f"{row['function']}:{row['block']}"
        if row["line"] is not None:
            where += f" (line {row['line']})"
        print(f"  level {row['level']}  {where}")
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    if not args.out:
        print(text, end="")
    return EXIT_OK


def cmd_evaluate(args, program, vuln) -> int:
    if not program.executable:
        print(
            "error: graph documents carry structure only and cannot be "
            "executed; evaluation needs a MiniLang program",
            file=sys.stderr,
        )
        return EXIT_USAGE
    if not args.suite:
        raise UsageError("evaluate requires --suite")
    suite_path = Path(args.suite)
    if not suite_path.exists():
        raise UsageError(f"suite file {args.suite!r} does not exist")
    suite = load_suite(suite_path).with_vulnerability(vuln)

    ppg = build_program_path_graph(program, vuln)
    if ppg.empty:
        for diag in ppg.diagnostics:
            print(f"error: {diag}", file=sys.stderr)
        return EXIT_DIAGNOSTIC
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        locations = candidate_locations(ppg)
    patches = synthesize_patches(program, locations)
    limits = Limits(max_steps=args.max_steps, max_heap_cells=args.max_heap_cells)
    evaluations = rank(
        evaluate_patches(program, patches, suite, limits, jobs=args.jobs)
    )

    meta = {
        "program": Path(args.program).name,
        "vulnerability": {
            "function": vuln.function,
            "statement": vuln.statement,
        },
        "suite": {"cases": len(suite.cases), "exploit": suite.exploit is not None},
        "levels": max((len(c.chain.frames) for c in ppg.chains), default=0),
    }
    if getattr(args, "fuzz", 0):
        fully_patched = apply_patches(program, patches)
        runs, hits = fuzz_vulnerability(
            fully_patched,
            vuln.statement,
            runs=args.fuzz,
            seed=args.seed,
            max_steps=limits.max_steps,
        )
        meta["fuzz"] = {
            "runs": runs,
            "vulnerable_faults": hits,
            "cut_disconnects": cut_disconnects(program, vuln.statement, locations),
        }
    report = build_report(evaluations, meta)
    json_text = report_to_json(report)
    text = render_report_text(report)
    write_out(args, "report.json", json_text)
    write_out(args, "report.txt", text)
    if args.out:
        summary = report["summary"]
        print(
            f"{summary['patches']} patch(es) evaluated; best: "
            f"{summary['best_display']} at level {summary['best_patch_level']} "
            f"(report.json, report.txt in {args.out})"
        )
    else:
        print(text, end="")
    return EXIT_OK


def run(argv=None) -> int:
    parser = build_arg_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        program, vuln = load_inputs(args)
        if args.command == "analyze":
            return cmd_analyze(args, program, vuln)
        if args.command == "locate":
            return cmd_locate(args, program, vuln)
        if args.command == "evaluate":
            return cmd_evaluate(args, program, vuln)
        # all: run the three phases in order, stopping on the first failure
        code = cmd_analyze(args, program, vuln)
        if code == EXIT_OK:
            code = cmd_locate(args, program, vuln)
        if code == EXIT_OK:
            code = cmd_evaluate(args, program, vuln)
        return code
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FrontendError, GraphImportError, SuiteError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except AnalysisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIAGNOSTIC
    except IRError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
