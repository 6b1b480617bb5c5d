"""Shared test machinery: CFG builders, random generators, and the
brute-force oracles the analyses are checked against.

The oracles deliberately avoid the production algorithms: postdominance is
derived from exhaustive simple-path enumeration, and interprocedural paths
from a direct depth-first search with a no-repeat cutoff.
"""

from __future__ import annotations

import itertools
import random

from pathpatch.analysis import EXIT
from pathpatch.ir import (
    INT,
    BasicBlock,
    Branch,
    Call,
    IntConst,
    IRFunction,
    IRProgram,
    Jump,
    Nop,
    Opaque,
    Return,
)
from pathpatch.minilang import nodes
from pathpatch.minilang.nodes import (
    AssignStmt,
    BinOp,
    CallExpr,
    ExprStmt,
    FuncDecl,
    If,
    IntLit,
    Let,
    Name,
    ProgramTree,
    ReturnStmt,
    While,
)

# ---------------------------------------------------------------------------
# Abstract CFG construction
# ---------------------------------------------------------------------------


def make_function(succs: dict[str, list[str]], entry: str, name: str = "f") -> IRFunction:
    """Build an analysis-only function from a successor map.

    0 successors -> return, 1 -> jump, 2 -> branch (in list order).
    """
    blocks = {}
    counter = itertools.count()
    for bid, outs in succs.items():
        statements = (Nop(id=f"{name}:{bid}:s{next(counter)}"),)
        if len(outs) == 0:
            term = Return(id=f"{name}:{bid}:ret", value=IntConst(0))
        elif len(outs) == 1:
            term = Jump(outs[0])
        elif len(outs) == 2:
            term = Branch(
                id=f"{name}:{bid}:br",
                cond=Opaque(),
                then_target=outs[0],
                else_target=outs[1],
            )
        else:
            raise ValueError("blocks have at most two successors")
        blocks[bid] = BasicBlock(id=bid, statements=statements, terminator=term)
    return IRFunction(
        id=name,
        name=name,
        params=(),
        return_type=INT,
        blocks=blocks,
        entry_block=entry,
    )


def random_cfg(rng: random.Random, max_blocks: int = 10) -> IRFunction:
    """Random CFG where every block is entry-reachable and reaches an exit.

    Cycles (including self-loops) are allowed through the extra-edge step,
    which is what lowered loops and graph imports produce.
    """
    while True:
        fn = _try_random_cfg(rng, rng.randint(1, max_blocks))
        if fn is not None:
            return fn


def _try_random_cfg(rng: random.Random, n: int) -> IRFunction | None:
    returns = {n - 1}
    for i in range(1, n - 1):
        if rng.random() < 0.15:
            returns.add(i)
    if n == 1:
        returns = {0}
    succs: dict[int, list[int]] = {i: [] for i in range(n)}
    for i in range(n - 1):
        if i in returns:
            continue
        succs[i].append(rng.randrange(i + 1, n))  # guarantees an exit path
    incoming = {i: False for i in range(n)}
    for outs in succs.values():
        for t in outs:
            incoming[t] = True
    for j in range(1, n):
        if incoming[j]:
            continue
        candidates = [i for i in range(j) if i not in returns and len(succs[i]) < 2]
        if not candidates:
            return None  # dead configuration; resample
        succs[rng.choice(candidates)].append(j)
        incoming[j] = True
    for i in range(n):
        if i in returns:
            continue
        while len(succs[i]) < 2 and rng.random() < 0.35:
            succs[i].append(rng.randrange(n))
    return make_function(
        {f"n{i}": [f"n{t}" for t in outs] for i, outs in succs.items()},
        entry="n0",
    )


# ---------------------------------------------------------------------------
# Brute-force postdominance and control dependence
# ---------------------------------------------------------------------------


def successor_map(fn: IRFunction) -> dict[str, tuple[str, ...]]:
    return {bid: blk.successors for bid, blk in fn.blocks.items()}


def simple_paths_to_exit(succs: dict[str, tuple[str, ...]], start: str) -> list[tuple]:
    """Every simple path from start to the synthetic exit."""
    paths: list[tuple] = []

    def dfs(node: str, visited: frozenset, acc: tuple):
        outs = succs[node]
        if not outs:
            paths.append(acc + (node, EXIT))
            return
        for nxt in outs:
            if nxt not in visited:
                dfs(nxt, visited | {nxt}, acc + (node,))

    dfs(start, frozenset({start}), ())
    return paths


def bf_postdominator_sets(fn: IRFunction) -> dict[str, frozenset]:
    """pdom(X) = nodes on every simple path X -> exit (reflexive, with EXIT)."""
    succs = successor_map(fn)
    result = {}
    for bid in fn.blocks:
        paths = simple_paths_to_exit(succs, bid)
        if not paths:
            result[bid] = frozenset({bid, EXIT})
            continue
        common = frozenset(paths[0])
        for path in paths[1:]:
            common &= frozenset(path)
        result[bid] = common
    return result


def bf_control_deps(fn: IRFunction) -> set[tuple[str, str, int]]:
    """(governed, governor, edge) triples straight from the definition."""
    pdom = bf_postdominator_sets(fn)
    deps = set()
    for bid, blk in fn.blocks.items():
        if not blk.is_conditional:
            continue
        for k, succ in enumerate(blk.successors):
            for candidate in fn.blocks:
                if candidate in pdom[succ] and candidate not in pdom[bid]:
                    deps.add((candidate, bid, k))
    return deps


# ---------------------------------------------------------------------------
# Brute-force path enumeration
# ---------------------------------------------------------------------------


def bf_simple_paths(fn: IRFunction, source: str, target: str) -> list[tuple[str, ...]]:
    """All simple source -> target paths over raw CFG edges."""
    succs = successor_map(fn)
    paths: list[tuple[str, ...]] = []

    def dfs(node: str, visited: frozenset, acc: tuple):
        if node == target:
            paths.append(acc + (node,))
            return
        for nxt in succs[node]:
            if nxt not in visited:
                dfs(nxt, visited | {nxt}, acc + (node,))

    dfs(source, frozenset({source}), ())
    return paths


def bf_call_chains(program: IRProgram, vuln_fn: str) -> list[tuple]:
    """Chains as tuples of (function, call_site|None), ending at vuln_fn."""
    calls_by_fn: dict[str, list[tuple[str, str]]] = {}
    for fn in program.functions.values():
        for blk in fn.blocks.values():
            for stmt in blk.statements:
                if stmt.kind == "call" and stmt.callee_name is not None:
                    calls_by_fn.setdefault(fn.id, []).append(
                        (stmt.id, stmt.callee_name)
                    )
    for sites in calls_by_fn.values():
        sites.sort()
    chains: list[tuple] = []
    entry = program.entry
    if vuln_fn == entry:
        return [((entry, None),)]

    def dfs(fn_id: str, seen: frozenset, acc: tuple):
        for site, callee in calls_by_fn.get(fn_id, ()):
            if callee in seen:
                continue
            if callee == vuln_fn:
                chains.append(acc + ((fn_id, site), (vuln_fn, None)))
            else:
                dfs(callee, seen | {callee}, acc + ((fn_id, site),))

    dfs(entry, frozenset({entry}), ())
    return chains


def bf_interprocedural_paths(program: IRProgram, vuln_stmt: str) -> list[tuple]:
    """All maximal paths to the vulnerable statement, fully brute force."""
    index = program.statement_index()
    vuln_fn, vuln_block = index[vuln_stmt]
    results: list[tuple] = []
    for chain in bf_call_chains(program, vuln_fn):
        per_frame: list[list[tuple]] = []
        for fn_id, site in chain:
            fn = program.functions[fn_id]
            target = index[site][1] if site is not None else vuln_block
            frame_paths = [
                tuple((fn_id, b) for b in path)
                for path in bf_simple_paths(fn, fn.entry_block, target)
            ]
            per_frame.append(frame_paths)
        for combo in itertools.product(*per_frame):
            results.append(tuple(itertools.chain.from_iterable(combo)))
    return results


# ---------------------------------------------------------------------------
# Random structured programs (exercise the frontend lowering)
# ---------------------------------------------------------------------------


def random_program_tree(rng: random.Random, max_functions: int = 5) -> ProgramTree:
    count = rng.randint(1, max_functions)
    names = ["main"] + [f"h{i}" for i in range(1, count)]
    functions = []
    for name in names:
        body = [Let("x", INT, IntLit(0, 1), 1)]
        body.extend(_random_body(rng, names, depth=0))
        body.append(ReturnStmt(Name("x", 1), 1))
        functions.append(
            FuncDecl(
                name=name,
                params=(),
                return_type=INT,
                body=tuple(body),
                line=1,
            )
        )
    return ProgramTree(functions=tuple(functions))


def _random_body(rng: random.Random, names: list[str], depth: int) -> list:
    stmts = []
    for _ in range(rng.randint(1, 3)):
        roll = rng.random()
        if roll < 0.30 or depth >= 2:
            stmts.append(
                AssignStmt("x", BinOp("+", Name("x", 1), IntLit(1, 1), 1), 1)
            )
        elif roll < 0.55:
            stmts.append(ExprStmt(CallExpr(rng.choice(names), (), 1), 1))
        elif roll < 0.85:
            cond = BinOp("<", Name("x", 1), IntLit(rng.randint(1, 5), 1), 1)
            then_body = tuple(_random_body(rng, names, depth + 1))
            else_body = (
                tuple(_random_body(rng, names, depth + 1))
                if rng.random() < 0.4
                else None
            )
            stmts.append(If(cond, then_body, else_body, 1))
        else:
            cond = BinOp("<", Name("x", 1), IntLit(rng.randint(1, 5), 1), 1)
            stmts.append(While(cond, tuple(_random_body(rng, names, depth + 1)), 1))
    return stmts


def pick_vulnerable_statement(rng: random.Random, program: IRProgram) -> str:
    """A random plain statement anywhere in the program."""
    ids = []
    for fn in program.functions.values():
        for blk in fn.blocks.values():
            for stmt in blk.statements:
                ids.append((fn.id, stmt.id))
    fn_id, stmt_id = rng.choice(sorted(ids))
    return fn_id, stmt_id


# ---------------------------------------------------------------------------
# CFG isomorphism
# ---------------------------------------------------------------------------


def canonical_shape(program: IRProgram):
    """Block-graph shape, independent of block naming: statement kinds,
    terminator kind, conditional flag, successors in canonical numbering."""
    shapes = {}
    for fn_id in sorted(program.functions):
        fn = program.functions[fn_id]
        if fn.external:
            shapes[fn_id] = "external"
            continue
        mapping: dict[str, int] = {}
        order: list[str] = []
        queue = [fn.entry_block]
        while queue:
            bid = queue.pop(0)
            if bid in mapping:
                continue
            mapping[bid] = len(mapping)
            order.append(bid)
            queue.extend(fn.blocks[bid].successors)
        rows = []
        for bid in order:
            blk = fn.blocks[bid]
            rows.append(
                (
                    tuple(s.kind for s in blk.statements),
                    type(blk.terminator).__name__,
                    blk.is_conditional,
                    tuple(mapping[t] for t in blk.successors),
                )
            )
        shapes[fn_id] = tuple(rows)
    return shapes
