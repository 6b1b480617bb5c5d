"""Candidate patch location selection and levels."""

import pytest

from pathpatch.checks import cut_disconnects
from pathpatch.graphio import import_graph, load_graph_file
from pathpatch.locate import candidate_locations, patch_level
from pathpatch.minilang import lower, parse
from pathpatch.paths import (
    DegeneratePathWarning,
    build_program_path_graph,
    enumerate_paths,
    resolve_vulnerability,
)


def locations_for(program, vuln):
    ppg = build_program_path_graph(program, vuln)
    return ppg, candidate_locations(ppg)


class TestAbstractGraph:
    def test_candidates_are_blocks_1_4_2_3(self, corpus_dir):
        program = import_graph(load_graph_file(corpus_dir / "abstract.graph.json"))
        vuln = resolve_vulnerability(program, "f", statement="s5")
        _, locations = locations_for(program, vuln)
        assert {loc.block for loc in locations} == {"1", "4", "2", "3"}

    def test_each_candidate_hangs_off_its_conditional(self, corpus_dir):
        program = import_graph(load_graph_file(corpus_dir / "abstract.graph.json"))
        vuln = resolve_vulnerability(program, "f", statement="s5")
        _, locations = locations_for(program, vuln)
        governors = {loc.block: loc.governing_conditional for loc in locations}
        assert governors == {"1": "a", "2": "b", "3": "b", "4": "c"}


class TestBmpReader:
    def test_level0_candidates_sit_on_lines_5_13_16(self, bmp_reader):
        program, vuln, _ = bmp_reader
        _, locations = locations_for(program, vuln)
        in_vulnerable_fn = [
            program.functions[loc.function].blocks[loc.block].line
            for loc in locations
            if loc.function == "read_image"
        ]
        assert sorted(in_vulnerable_fn) == [5, 13, 16]
        assert all(
            loc.level == 0 for loc in locations if loc.function == "read_image"
        )

    def test_chained_conditionals_are_walked_through(self, bmp_reader):
        # the loop headers on lines 11 and 12 are consecutive conditionals:
        # the candidate below them is the loop body at line 13
        program, vuln, _ = bmp_reader
        _, locations = locations_for(program, vuln)
        fn = program.functions["read_image"]
        line13 = next(
            loc for loc in locations
            if loc.function == "read_image" and fn.blocks[loc.block].line == 13
        )
        assert fn.blocks[line13.governing_conditional].line == 12

    def test_order_is_level_descending_then_block(self, bmp_reader):
        program, vuln, _ = bmp_reader
        _, locations = locations_for(program, vuln)
        keys = [(-loc.level,) for loc in locations]
        assert keys == sorted(keys)

    def test_no_candidate_is_conditional(self, corpus_entry):
        name, program, vuln, _ = corpus_entry
        _, locations = locations_for(program, vuln)
        for loc in locations:
            assert not program.functions[loc.function].blocks[loc.block].is_conditional

    def test_governing_edge_lies_on_a_vulnerable_path(self, corpus_entry):
        name, program, vuln, _ = corpus_entry
        ppg, locations = locations_for(program, vuln)
        dag_edges = {
            (fp.frame.function, src, dst)
            for cp in ppg.chains
            for fp in cp.frames
            for src, dst, _ in fp.dag.edges
        }
        for loc in locations:
            walk_edges = {
                (loc.function, src, dst)
                for (f, src, dst) in dag_edges
                if f == loc.function
            }
            assert any(
                (loc.function, loc.governing_conditional, dst) in walk_edges
                for dst in program.functions[loc.function]
                .blocks[loc.governing_conditional]
                .successors
            )


class TestLevels:
    def test_direct_caller_is_level_one(self):
        program = lower(
            parse(
                "fn inner(i: int) -> int { if (i > 0) { let t: int = i + 1; return t; } return 0; }"
                "fn main() -> int { if (true) { return inner(3); } return 0; }"
            )
        )
        vuln = resolve_vulnerability(program, "inner", line=1)
        _, locations = locations_for(program, vuln)
        by_fn = {loc.function: loc.level for loc in locations}
        assert by_fn["main"] == 1
        assert by_fn["inner"] == 0

    def test_diamond_call_graph_takes_minimum_distance(self):
        # main -> short -> deep and main -> long -> middle -> deep:
        # `main` is 2 frames from deep on one chain and 3 on the other
        program = lower(
            parse(
                "fn deep(i: int) -> int { if (i > 0) { let t: int = i + 1; return t; } return 0; }"
                "fn middle(i: int) -> int { return deep(i); }"
                "fn long(i: int) -> int { return middle(i); }"
                "fn short(i: int) -> int { return deep(i); }"
                "fn main() -> int { if (true) { return short(1); } return long(2); }"
            )
        )
        vuln = resolve_vulnerability(program, "deep", line=1)
        ppg, locations = locations_for(program, vuln)
        main_loc = next(loc for loc in locations if loc.function == "main")
        assert main_loc.level == 2
        assert patch_level(main_loc, ppg) == 2

    def test_levels_do_not_exceed_chain_length(self, corpus_entry):
        name, program, vuln, _ = corpus_entry
        ppg, locations = locations_for(program, vuln)
        longest = max(len(cp.chain.frames) for cp in ppg.chains)
        for loc in locations:
            assert 0 <= loc.level < longest


class TestDegenerateAndDedup:
    def test_no_conditionals_warns_and_returns_empty(self):
        program = lower(parse("fn main() -> int { let x: int = 1; print(x); return x; }"))
        vuln = resolve_vulnerability(program, "main", line=1)
        ppg = build_program_path_graph(program, vuln)
        with pytest.warns(DegeneratePathWarning):
            locations = candidate_locations(ppg)
        assert locations == []

    def test_conditional_vulnerable_block_emits_itself_with_warning(self):
        # graph shape where the walk runs out of path on a conditional block
        from pathpatch.graphio import GraphDocument
        import json

        doc = GraphDocument.from_json(
            json.dumps(
                {
                    "schema": "program-graph@1",
                    "functions": [
                        {
                            "name": "f",
                            "entry": "a",
                            "blocks": [
                                {"id": "a", "conditional": True, "statements": ["s0"]},
                                {"id": "b", "conditional": True, "statements": ["s1"]},
                                {"id": "x", "conditional": False, "statements": ["s2"]},
                                {"id": "y", "conditional": False, "statements": ["s3"]},
                            ],
                            "edges": [
                                ["a", "b", 0],
                                ["a", "x", 1],
                                ["b", "y", 0],
                                ["b", "b", 1],
                            ],
                        }
                    ],
                    "vulnerable": {"function": "f", "statement": "s1"},
                }
            )
        )
        program = import_graph(doc)
        vuln = resolve_vulnerability(program, "f", statement="s1")
        ppg = build_program_path_graph(program, vuln)
        with pytest.warns(DegeneratePathWarning):
            locations = candidate_locations(ppg)
        assert [loc.block for loc in locations] == ["b"]

    def test_shared_blocks_are_deduplicated_across_chains(self, corpus_dir):
        program = lower(parse((corpus_dir / "twopath.mini").read_text()))
        vuln = resolve_vulnerability(program, "lookup", line=6)
        _, locations = locations_for(program, vuln)
        keys = [(loc.function, loc.block) for loc in locations]
        assert len(keys) == len(set(keys))
        # the shared lookup-guard block appears once despite two chains
        assert sum(1 for f, _ in keys if f == "lookup") == 1


class TestRandomizedRule:
    def test_guarded_edges_on_random_paths_yield_their_candidates(self):
        """On any maximal path, a non-conditional block right after a
        conditional one (same function) is a candidate; and when every path
        has such an edge, removing the candidates severs the program."""
        import random

        from pathpatch.minilang import lower
        from pathpatch.paths import count_paths
        from helpers import pick_vulnerable_statement, random_program_tree

        rng = random.Random(424242)
        checked = 0
        cut_checked = 0
        while checked < 120:
            program = lower(random_program_tree(rng))
            _, stmt = pick_vulnerable_statement(rng, program)
            vuln = resolve_vulnerability(program, stmt.split(":")[0], statement=stmt)
            ppg = build_program_path_graph(program, vuln)
            if ppg.empty or count_paths(ppg) > 2000:
                continue
            import warnings as warnings_module

            with warnings_module.catch_warnings():
                warnings_module.simplefilter("ignore")
                locations = candidate_locations(ppg)
            spots = {(loc.function, loc.block) for loc in locations}
            all_paths_guarded = True
            for path in enumerate_paths(ppg, cap=None):
                guarded = False
                for (fn_a, blk_a), (fn_b, blk_b) in zip(path, path[1:]):
                    if fn_a != fn_b:
                        continue
                    blocks = program.functions[fn_a].blocks
                    if blocks[blk_a].is_conditional and not blocks[blk_b].is_conditional:
                        assert (fn_b, blk_b) in spots
                        guarded = True
                all_paths_guarded &= guarded
            if all_paths_guarded and spots:
                assert cut_disconnects(program, vuln.statement, locations)
                cut_checked += 1
            checked += 1
        assert cut_checked > 10


class TestCoverageAndCut:
    def test_every_maximal_path_contains_a_candidate(self, corpus_entry):
        name, program, vuln, _ = corpus_entry
        ppg, locations = locations_for(program, vuln)
        spots = {(loc.function, loc.block) for loc in locations}
        for path in enumerate_paths(ppg):
            assert spots & set(path), f"path without candidate: {path}"

    def test_deleting_all_candidates_disconnects_the_vulnerability(self, corpus_entry):
        name, program, vuln, _ = corpus_entry
        _, locations = locations_for(program, vuln)
        assert cut_disconnects(program, vuln.statement, locations)

    def test_abstract_graph_cut(self, corpus_dir):
        program = import_graph(load_graph_file(corpus_dir / "abstract.graph.json"))
        vuln = resolve_vulnerability(program, "f", statement="s5")
        _, locations = locations_for(program, vuln)
        assert cut_disconnects(program, vuln.statement, locations)
