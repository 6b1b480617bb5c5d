"""Vulnerable-path analysis: call chains and the program path graph.

Given a vulnerability location, the path graph captures every way execution
can get there from the program entry:

  - call chains: acyclic caller sequences entry -> ... -> vulnerable
    function, found by reachability over the call graph (indirect calls
    included);
  - per chain frame: the sub-DAG of blocks lying on some acyclic path from
    the frame's entry block to its target (the next call site, or the
    vulnerable statement's block);
  - per frame target: the conditionals it transitively depends on.

Paths are acyclic: back edges (dominated targets) never extend a path, but
loop-header conditionals on a path keep their conditional label. Paths are
kept as DAGs and only materialized on request, under a cap.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

from .analysis import (
    AnalysisError,
    CallGraph,
    back_edges,
    build_call_graph,
    compute_control_dependencies,
    compute_postdominators,
)
from .ir import IRProgram, block_sort_key

DEFAULT_ENUMERATION_CAP = 10_000


class PathEnumerationError(AnalysisError):
    """Raised when explicit enumeration would exceed the configured cap."""


class DegeneratePathWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Exploit:
    input: tuple[int, ...]
    kind: str | None = None


@dataclass(frozen=True)
class VulnerabilitySpec:
    function: str
    statement: str
    exploit: Exploit | None = None


@dataclass(frozen=True)
class Frame:
    function: str
    call_site: str | None  # statement calling the next frame; None on the last


@dataclass(frozen=True)
class CallChain:
    frames: tuple[Frame, ...]

    @property
    def functions(self) -> tuple[str, ...]:
        return tuple(f.function for f in self.frames)

    def level_of(self, function: str) -> int | None:
        """Frames between `function` and the vulnerable function (0 = last)."""
        for index, frame in enumerate(self.frames):
            if frame.function == function:
                return len(self.frames) - 1 - index
        return None


@dataclass(frozen=True)
class PathDag:
    """Blocks and edges lying on some acyclic source -> target path."""

    function: str
    source: str
    target: str
    blocks: tuple[str, ...]
    edges: tuple[tuple[str, str, int | None], ...]

    @property
    def empty(self) -> bool:
        return not self.blocks

    def successors(self, block: str) -> tuple[tuple[str, int | None], ...]:
        return tuple((dst, idx) for src, dst, idx in self.edges if src == block)


@dataclass(frozen=True)
class FramePaths:
    frame: Frame
    target_statement: str
    dag: PathDag
    conditional: frozenset[str]
    # conditionals the target block transitively depends on: (block, edge)
    governing: tuple[tuple[str, int], ...]


@dataclass(frozen=True)
class ChainPaths:
    chain: CallChain
    frames: tuple[FramePaths, ...]


@dataclass(frozen=True)
class ProgramPathGraph:
    vulnerability: VulnerabilitySpec
    vulnerable_block: str | None
    chains: tuple[ChainPaths, ...]
    diagnostics: tuple[str, ...] = ()

    @property
    def empty(self) -> bool:
        return not self.chains


def resolve_vulnerability(program: IRProgram, function: str, statement: str | None = None,
                          line: int | None = None, exploit: Exploit | None = None) -> VulnerabilitySpec:
    """Normalize a vulnerability given as statement id, source line, or
    function only (which defaults to the function's first statement)."""
    fn = program.function(function)
    if fn.external:
        raise AnalysisError(f"{function} is external and cannot be patched")
    if statement is not None:
        index = program.statement_index()
        owner = index.get(statement)
        if owner is None or owner[0] != function:
            raise AnalysisError(f"statement {statement!r} is not in {function}")
        return VulnerabilitySpec(function, statement, exploit)
    if line is not None:
        natural = lambda sid: (len(sid), sid)
        best = None
        for blk in fn.blocks.values():
            for stmt in blk.statements:
                loc = program.source_map.get(stmt.id)
                if loc is not None and loc[1] == line:
                    if best is None or natural(stmt.id) < natural(best):
                        best = stmt.id
        if best is None:
            raise AnalysisError(f"no statement of {function} is on line {line}")
        return VulnerabilitySpec(function, best, exploit)
    # function-only: first statement, walking from the entry block; a
    # function with no plain statements anchors on a terminator instead
    seen = set()
    frontier = [fn.entry_block]
    while frontier:
        bid = frontier.pop(0)
        if bid in seen:
            continue
        seen.add(bid)
        blk = fn.blocks[bid]
        if blk.statements:
            return VulnerabilitySpec(function, blk.statements[0].id, exploit)
        frontier.extend(blk.successors)
    entry_term = fn.blocks[fn.entry_block].terminator
    term_id = getattr(entry_term, "id", None)
    if term_id is not None:
        return VulnerabilitySpec(function, term_id, exploit)
    raise AnalysisError(f"{function} has no statements to anchor the vulnerability")


# ---------------------------------------------------------------------------
# Call chains
# ---------------------------------------------------------------------------


def find_call_chains(cg: CallGraph, vuln_fn: str, entry: str) -> list[CallChain]:
    """All acyclic chains entry -> ... -> vuln_fn over the call graph.

    A chain stops on first reaching the vulnerable function, and no function
    repeats within a chain, so recursion contributes one frame. Order is
    lexicographic by (call site, callee) at every step.
    """
    if vuln_fn == entry:
        return [CallChain(frames=(Frame(entry, None),))]

    # Restrict the walk to functions that can still reach vuln_fn.
    callers_of: dict[str, set[str]] = {}
    for edge in cg.edges:
        callers_of.setdefault(edge.callee, set()).add(edge.caller)
    can_reach = {vuln_fn}
    frontier = [vuln_fn]
    while frontier:
        cur = frontier.pop()
        for caller in callers_of.get(cur, ()):
            if caller not in can_reach:
                can_reach.add(caller)
                frontier.append(caller)
    if entry not in can_reach:
        return []

    edges_by_caller: dict[str, list] = {}
    for edge in cg.edges:
        edges_by_caller.setdefault(edge.caller, []).append(edge)
    for edges in edges_by_caller.values():
        edges.sort(key=lambda e: (e.call_site, e.callee))

    chains: list[CallChain] = []

    def extend(function: str, on_stack: tuple[str, ...], frames: tuple[Frame, ...]):
        for edge in edges_by_caller.get(function, ()):
            if edge.callee in on_stack or edge.callee not in can_reach:
                continue
            step = frames + (Frame(function, edge.call_site),)
            if edge.callee == vuln_fn:
                chains.append(CallChain(frames=step + (Frame(vuln_fn, None),)))
            else:
                extend(edge.callee, on_stack + (edge.callee,), step)

    extend(entry, (entry,), ())
    return chains


# ---------------------------------------------------------------------------
# Intraprocedural path DAGs
# ---------------------------------------------------------------------------


def _forward_edges(fn) -> list[tuple[str, str, int | None]]:
    """CFG edges minus back edges; cycles left by irreducible inputs are cut
    greedily in depth-first order (never happens for lowered programs)."""
    from .ir import Branch, Jump

    backs = back_edges(fn)
    edges = []
    for bid, blk in fn.blocks.items():
        term = blk.terminator
        if isinstance(term, Jump):
            candidates = [(bid, term.target, None)]
        elif isinstance(term, Branch):
            candidates = [(bid, term.then_target, 0), (bid, term.else_target, 1)]
        else:
            candidates = []
        for src, dst, idx in candidates:
            if (src, dst) not in backs:
                edges.append((src, dst, idx))

    # Cycle check; cut residual cycles deterministically if any remain.
    succ: dict[str, list[str]] = {}
    for src, dst, _ in edges:
        succ.setdefault(src, []).append(dst)
    color: dict[str, int] = {}
    cuts: set[tuple[str, str]] = set()

    def visit(node: str, stack: list[str]):
        color[node] = 1
        for nxt in succ.get(node, ()):
            if color.get(nxt, 0) == 1:
                cuts.add((node, nxt))
            elif color.get(nxt, 0) == 0:
                visit(nxt, stack)
        color[node] = 2

    for bid in sorted(fn.blocks, key=block_sort_key):
        if color.get(bid, 0) == 0:
            visit(bid, [])
    if cuts:
        warnings.warn(
            f"{fn.id}: irreducible cycle; cut edges {sorted(cuts)}",
            DegeneratePathWarning,
            stacklevel=2,
        )
        edges = [e for e in edges if (e[0], e[1]) not in cuts]
    return edges


def intraprocedural_paths(fn, source: str, target: str) -> PathDag:
    """Sub-DAG of blocks/edges on some acyclic source -> target path."""
    edges = _forward_edges(fn)
    succ: dict[str, list[str]] = {}
    pred: dict[str, list[str]] = {}
    for src, dst, _ in edges:
        succ.setdefault(src, []).append(dst)
        pred.setdefault(dst, []).append(src)

    def reach(start: str, neigh: dict[str, list[str]]) -> set[str]:
        seen = {start}
        stack = [start]
        while stack:
            for nxt in neigh.get(stack.pop(), ()):
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return seen

    from_source = reach(source, succ)
    to_target = reach(target, pred)
    members = from_source & to_target
    if target not in members or source not in members:
        return PathDag(fn.id, source, target, (), ())
    kept = tuple(
        (src, dst, idx) for src, dst, idx in edges if src in members and dst in members
    )
    ordered = tuple(sorted(members, key=block_sort_key))
    return PathDag(fn.id, source, target, ordered, kept)


# ---------------------------------------------------------------------------
# Program path graph
# ---------------------------------------------------------------------------


def build_program_path_graph(
    program: IRProgram,
    vuln: VulnerabilitySpec,
    call_graph: CallGraph | None = None,
) -> ProgramPathGraph:
    if call_graph is None:
        call_graph = build_call_graph(program)
    index = program.statement_index()
    if vuln.statement not in index:
        raise AnalysisError(f"unknown vulnerable statement {vuln.statement!r}")
    vuln_fn, vuln_block = index[vuln.statement]
    if vuln_fn != vuln.function:
        raise AnalysisError(
            f"statement {vuln.statement!r} is in {vuln_fn}, not {vuln.function}"
        )

    diagnostics: list[str] = []
    chains = find_call_chains(call_graph, vuln.function, program.entry)
    if not chains:
        diagnostics.append(
            f"unreachable vulnerability: no call chain from {program.entry} "
            f"to {vuln.function}"
        )

    cdg_cache: dict[str, object] = {}

    def cdg_of(fn_id: str):
        if fn_id not in cdg_cache:
            fn = program.function(fn_id)
            cdg_cache[fn_id] = compute_control_dependencies(
                fn, compute_postdominators(fn)
            )
        return cdg_cache[fn_id]

    chain_paths: list[ChainPaths] = []
    for chain in chains:
        frames: list[FramePaths] = []
        complete = True
        for frame in chain.frames:
            fn = program.function(frame.function)
            if frame.call_site is not None:
                target_stmt = frame.call_site
            else:
                target_stmt = vuln.statement
            target_block = index[target_stmt][1]
            dag = intraprocedural_paths(fn, fn.entry_block, target_block)
            if dag.empty:
                diagnostics.append(
                    f"{frame.function}: target {target_stmt} unreachable from "
                    f"entry; chain {'->'.join(chain.functions)} dropped"
                )
                complete = False
                break
            conditional = frozenset(
                b for b in dag.blocks if fn.blocks[b].is_conditional
            )
            governing = cdg_of(frame.function).transitive_governors(target_block)
            frames.append(
                FramePaths(
                    frame=frame,
                    target_statement=target_stmt,
                    dag=dag,
                    conditional=conditional,
                    governing=governing,
                )
            )
        if complete:
            chain_paths.append(ChainPaths(chain=chain, frames=tuple(frames)))

    if chains and not chain_paths:
        diagnostics.append("unreachable vulnerability: all chains dropped")

    return ProgramPathGraph(
        vulnerability=vuln,
        vulnerable_block=vuln_block,
        chains=tuple(chain_paths),
        diagnostics=tuple(diagnostics),
    )


def _frame_paths(dag: PathDag) -> list[tuple[str, ...]]:
    """All source -> target paths of one frame DAG, in edge order."""
    results: list[tuple[str, ...]] = []

    def walk(block: str, acc: tuple[str, ...]):
        if block == dag.target:
            results.append(acc + (block,))
            return
        for nxt, _ in dag.successors(block):
            walk(nxt, acc + (block,))

    walk(dag.source, ())
    return results


def _count_frame_paths(dag: PathDag) -> int:
    memo: dict[str, int] = {}

    def count(block: str) -> int:
        if block == dag.target:
            return 1
        if block in memo:
            return memo[block]
        memo[block] = total = sum(count(nxt) for nxt, _ in dag.successors(block))
        return total

    return count(dag.source) if not dag.empty else 0


def count_paths(ppg: ProgramPathGraph) -> int:
    """Number of maximal entry -> vulnerability paths, without enumeration."""
    total = 0
    for chain in ppg.chains:
        product = 1
        for frame in chain.frames:
            product *= _count_frame_paths(frame.dag)
        total += product
    return total


def enumerate_paths(
    ppg: ProgramPathGraph, cap: int | None = DEFAULT_ENUMERATION_CAP
) -> list[tuple[tuple[str, str], ...]]:
    """Materialize every maximal path as a ((function, block), ...) tuple.

    Raises PathEnumerationError when the count exceeds `cap`; pass cap=None
    to force enumeration regardless.
    """
    total = count_paths(ppg)
    if cap is not None and total > cap:
        raise PathEnumerationError(
            f"{total} maximal paths exceed the cap of {cap}; work with the "
            "path DAG instead of enumerating"
        )
    results: list[tuple[tuple[str, str], ...]] = []
    for chain in ppg.chains:
        per_frame = [
            [
                tuple((frame.frame.function, block) for block in path)
                for path in _frame_paths(frame.dag)
            ]
            for frame in chain.frames
        ]

        def combine(i: int, acc: tuple):
            if i == len(per_frame):
                results.append(acc)
                return
            for part in per_frame[i]:
                combine(i + 1, acc + part)

        combine(0, ())
    return results
