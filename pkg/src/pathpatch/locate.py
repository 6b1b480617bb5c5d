"""Candidate patch locations over a program path graph.

For every conditional block on a vulnerable path, walk forward along the
path through any chain of consecutive conditional blocks and take the first
non-conditional block reached: patching there stops the path as soon as the
governing branch has committed to it, while blocks off the vulnerable paths
keep running. Candidates are deduplicated by (function, block) across paths
and chains.

A location's level counts call-chain frames from the vulnerable function:
level 0 is the vulnerable function itself, level 1 its direct caller, and
so on; a function on several chains gets the smallest distance.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

from .ir import block_sort_key
from .paths import DegeneratePathWarning, ProgramPathGraph


@dataclass(frozen=True)
class CandidatePatchLocation:
    function: str
    block: str
    governing_conditional: str
    branch_index: int
    level: int


def patch_level(location: CandidatePatchLocation, ppg: ProgramPathGraph) -> int:
    """Smallest frame distance from the vulnerable function, over all chains."""
    levels = [
        level
        for chain_paths in ppg.chains
        if (level := chain_paths.chain.level_of(location.function)) is not None
    ]
    if not levels:
        raise ValueError(f"{location.function} is on no chain of this path graph")
    return min(levels)


def candidate_locations(ppg: ProgramPathGraph) -> list[CandidatePatchLocation]:
    """Candidates ordered by level descending, then block id; deduplicated."""
    found: dict[tuple[str, str], CandidatePatchLocation] = {}
    any_conditional = False

    for chain_paths in ppg.chains:
        for frame_paths in chain_paths.frames:
            dag = frame_paths.dag
            function = frame_paths.frame.function
            conditional = frame_paths.conditional
            if conditional:
                any_conditional = True

            def record(block: str, governor: str, branch_index: int):
                key = (function, block)
                if key in found:
                    return
                level = chain_paths.chain.level_of(function)
                found[key] = CandidatePatchLocation(
                    function=function,
                    block=block,
                    governing_conditional=governor,
                    branch_index=branch_index,
                    level=level,
                )

            def walk(block: str, governor: str, branch_index: int):
                if block not in conditional:
                    record(block, governor, branch_index)
                    return
                successors = dag.successors(block)
                if not successors:
                    # The walk ran out of path while still on conditionals.
                    if block == ppg.vulnerable_block and frame_paths.frame.call_site is None:
                        warnings.warn(
                            f"path to {ppg.vulnerability.statement} consists of "
                            f"conditional blocks only; using the vulnerable "
                            f"block {block} itself",
                            DegeneratePathWarning,
                            stacklevel=3,
                        )
                        record(block, governor, branch_index)
                    else:
                        warnings.warn(
                            f"{function}:{block}: conditional frame target has "
                            "no patchable successor on the path",
                            DegeneratePathWarning,
                            stacklevel=3,
                        )
                    return
                for nxt, idx in successors:
                    walk(nxt, block, idx)

            for block in sorted(conditional, key=block_sort_key):
                for nxt, idx in dag.successors(block):
                    walk(nxt, block, idx)

    # Keep the smallest level when a function sits on several chains.
    for key, loc in list(found.items()):
        best = patch_level(loc, ppg)
        if best != loc.level:
            found[key] = CandidatePatchLocation(
                function=loc.function,
                block=loc.block,
                governing_conditional=loc.governing_conditional,
                branch_index=loc.branch_index,
                level=best,
            )

    results = sorted(
        found.values(),
        key=lambda loc: (-loc.level, block_sort_key(loc.block), loc.function),
    )
    if not results and not any_conditional and not ppg.empty:
        warnings.warn(
            "no conditional block lies on any vulnerable path; nothing to patch",
            DegeneratePathWarning,
            stacklevel=2,
        )
    return results
