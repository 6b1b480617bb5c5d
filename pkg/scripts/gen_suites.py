#!/usr/bin/env python3
"""Regenerate the corpus suite files and vulnerability specs.

Expected outputs are recorded from the unpatched programs, which is what a
regression suite is: the suite then measures how much behavior a patched
variant preserves. Run from the repository root:

    python3 scripts/gen_suites.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from pathpatch import run_program  # noqa: E402
from pathpatch.minilang import load_program  # noqa: E402

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"


def case_line(program, name: str, values: list[int]) -> str:
    result = run_program(program, values)
    if result.status != "ok":
        raise SystemExit(f"{name}: expected ok, got {result.status} ({values})")
    inputs = ",".join(str(v) for v in values)
    outputs = ",".join(str(v) for v in result.output)
    return f"{name} | input: {inputs} | expect: {outputs}"


def exploit_line(program, name: str, values: list[int], kind: str) -> str:
    result = run_program(program, values)
    if result.status != "fault" or result.fault_kind != kind:
        raise SystemExit(
            f"{name}: expected fault {kind}, got {result.status}/{result.fault_kind}"
        )
    inputs = ",".join(str(v) for v in values)
    return f"{name} | input: {inputs} | expect: FAULT {kind}"


def write(path: Path, lines: list[str]) -> None:
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {path.relative_to(ROOT)} ({len(lines)} lines)")


def gen_bmp_reader() -> None:
    program = load_program(CORPUS / "bmp_reader.mini")
    lines = ["# 87 functional cases plus the proof-of-concept exploit"]
    count = 0

    # mode 1: arithmetic-only feature (40 cases)
    for i in range(40):
        bpp = (i * 3) % 11
        w = 1 + i % 5
        h = 1 + (i * 7) % 4
        grey = i % 2
        seed = i % 8
        count += 1
        lines.append(
            case_line(program, f"calc_{i:02d}", [1, bpp, w, h, grey, seed])
        )

    # mode 2, direct route: bpp > 8 (35 cases)
    for i in range(35):
        bpp = 9 + i % 6
        w = 1 + i % 4
        h = 1 + (i * 3) % 4
        grey = i % 2
        seed = i % 8
        count += 1
        lines.append(
            case_line(program, f"direct_{i:02d}", [2, bpp, w, h, grey, seed])
        )

    # mode 2, paletted route: bpp <= 8, small frames (2 cases)
    for i, (bpp, w, h, seed) in enumerate([(2, 2, 2, 3), (8, 1, 2, 6)]):
        count += 1
        lines.append(
            case_line(program, f"paletted_{i}", [2, bpp, w, h, 0, seed])
        )

    # mode 3, thumbnail route (10 cases)
    for i in range(10):
        bpp = 1 + i % 8
        w = 1 + i % 2
        h = 1 + i % 3
        seed = i % 8
        count += 1
        lines.append(
            case_line(program, f"thumb_{i:02d}", [3, bpp, w, h, 0, seed])
        )

    assert count == 87, count
    lines.append(exploit_line(program, "exploit_oob_read", [2, 1, 1, 1, 0, 99], "oob"))
    write(CORPUS / "bmp_reader.suite", lines)
    (CORPUS / "bmp_reader.vuln.json").write_text(
        json.dumps({"function": "read_image", "line": 16}, indent=2) + "\n"
    )


def gen_mandatory() -> None:
    program = load_program(CORPUS / "mandatory.mini")
    lines = ["# every case takes the guarded branch"]
    for i, n in enumerate([0, 1, 2, 3, 0, 2, 1, 3]):
        lines.append(case_line(program, f"probe_{i}", [n]))
    lines.append(exploit_line(program, "exploit_oob_index", [9], "oob"))
    write(CORPUS / "mandatory.suite", lines)
    (CORPUS / "mandatory.vuln.json").write_text(
        json.dumps({"function": "main", "line": 12}, indent=2) + "\n"
    )


def gen_twopath() -> None:
    program = load_program(CORPUS / "twopath.mini")
    lines = ["# route_a and route_b both reach the vulnerable lookup"]
    cases = [
        ("a_low_0", [1, 1]),
        ("a_low_1", [1, 3]),
        ("a_deep_0", [1, 4]),
        ("a_deep_1", [1, 6]),
        ("a_deep_2", [1, 7]),
        ("a_skip", [1, 0]),
        ("b_low_0", [2, 1]),
        ("b_low_1", [2, 2]),
        ("b_deep_0", [2, 4]),
        ("b_deep_1", [2, 5]),
        ("b_deep_2", [2, 6]),
        ("b_skip", [2, 0]),
    ]
    for name, values in cases:
        lines.append(case_line(program, name, values))
    write(CORPUS / "twopath.suite", lines)
    # the exploit lives in the vulnerability spec here, not in the suite
    (CORPUS / "twopath.vuln.json").write_text(
        json.dumps(
            {
                "function": "lookup",
                "line": 6,
                "exploit": {"input": [1, 20], "kind": "oob"},
            },
            indent=2,
        )
        + "\n"
    )
    result = run_program(program, [1, 20])
    assert result.status == "fault" and result.fault_kind == "oob", result


def gen_sideeffect() -> None:
    program = load_program(CORPUS / "sideeffect.mini")
    lines = ["# x > 5 runs the guarded lookup between acquire and release"]
    for i, x in enumerate([0, 1, 5, 6, 7, 8, 9, 3]):
        lines.append(case_line(program, f"case_{i}", [x]))
    lines.append(exploit_line(program, "exploit_oob_lookup", [50], "oob"))
    write(CORPUS / "sideeffect.suite", lines)
    (CORPUS / "sideeffect.vuln.json").write_text(
        json.dumps({"function": "process", "line": 10}, indent=2) + "\n"
    )


def gen_dispatch() -> None:
    program = load_program(CORPUS / "dispatch.mini")
    lines = ["# sel routes through a function reference to either handler"]
    cases = [
        ("safe_0", [1, 0]),
        ("safe_1", [1, 5]),
        ("safe_2", [1, 9]),
        ("risky_low", [2, 0]),
        ("risky_1", [2, 1]),
        ("risky_2", [2, 2]),
        ("risky_3", [2, 3]),
        ("neither", [4, 1]),
    ]
    for name, values in cases:
        lines.append(case_line(program, name, values))
    lines.append(exploit_line(program, "exploit_oob_handler", [2, 9], "oob"))
    write(CORPUS / "dispatch.suite", lines)
    (CORPUS / "dispatch.vuln.json").write_text(
        json.dumps({"function": "handler_risky", "line": 10}, indent=2) + "\n"
    )


if __name__ == "__main__":
    gen_bmp_reader()
    gen_mandatory()
    gen_twopath()
    gen_sideeffect()
    gen_dispatch()
