"""Render a lowered program back to MiniLang source.

Only programs that came from MiniLang can be printed; graph-imported
programs have opaque statement bodies and are rejected. The renderer
rebuilds `if`/`while` structure from the CFG: a branch block whose id is
the target of a back edge is a loop header, any other branch block is an
`if` whose join is its immediate postdominator.

Round-tripping an unpatched program yields an isomorphic CFG. For patched
programs the output is still valid MiniLang (a `return <errval>;` appears
as the first line of the patched region); locals whose only assignment was
patched away are re-declared with their default value at the top of the
function so the result still parses.
"""

from __future__ import annotations

from ..ir import (
    BOOL,
    INT,
    Binary,
    BoolConst,
    Branch,
    FnType,
    FuncRef,
    Halt,
    IntConst,
    IRError,
    IRFunction,
    IRProgram,
    Jump,
    NilConst,
    Return,
    Unary,
    Var,
)
from ..analysis import EXIT, back_edges, compute_postdominators


class UnsupportedRepresentationError(IRError):
    """Raised when asked to print a program without statement bodies."""


_PREC = {
    "||": 1,
    "&&": 2,
    "==": 3, "!=": 3, "<": 3, "<=": 3, ">": 3, ">=": 3,
    "+": 4, "-": 4,
    "*": 5, "/": 5, "%": 5,
}
_UNARY_PREC = 6


def render_type(value_type) -> str:
    if isinstance(value_type, FnType):
        params = ", ".join(render_type(p) for p in value_type.params)
        return f"fn({params}) -> {render_type(value_type.ret)}"
    return str(value_type)


def render_expr(expr, parent_prec: int = 0) -> str:
    if isinstance(expr, IntConst):
        return str(expr.value) if expr.value >= 0 else f"(-{-expr.value})"
    if isinstance(expr, BoolConst):
        return "true" if expr.value else "false"
    if isinstance(expr, NilConst):
        return "nil"
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, FuncRef):
        return f"&{expr.name}"
    if isinstance(expr, Unary):
        inner = render_expr(expr.operand, _UNARY_PREC)
        text = f"{expr.op}{inner}"
        return text if parent_prec <= _UNARY_PREC else f"({text})"
    if isinstance(expr, Binary):
        prec = _PREC[expr.op]
        left = render_expr(expr.left, prec)
        right = render_expr(expr.right, prec + 1)
        text = f"{left} {expr.op} {right}"
        return f"({text})" if prec < parent_prec else text
    raise UnsupportedRepresentationError(f"cannot render expression {expr!r}")


def render_literal(const) -> str:
    if isinstance(const, IntConst):
        return str(const.value)
    if isinstance(const, BoolConst):
        return "true" if const.value else "false"
    return "nil"


class _FunctionRenderer:
    def __init__(self, fn: IRFunction):
        self.fn = fn
        self.declared: set[str] = {name for name, _ in fn.params}
        self.lines: list[str] = []
        if fn.external:
            self.loop_headers = set()
            self.pdoms = None
        else:
            self.loop_headers = {target for _, target in back_edges(fn)}
            self.pdoms = compute_postdominators(fn)

    def maybe_let(self, name: str) -> str:
        if name in self.declared:
            return name
        self.declared.add(name)
        vtype = self.fn.locals.get(name, INT)
        return f"let {name}: {render_type(vtype)} = "

    def assign_prefix(self, name: str) -> str:
        if name in self.declared:
            return f"{name} = "
        self.declared.add(name)
        vtype = self.fn.locals.get(name, INT)
        return f"let {name}: {render_type(vtype)} = "

    def emit(self, depth: int, text: str) -> None:
        self.lines.append("    " * depth + text)

    def render_statement(self, stmt, depth: int) -> None:
        kind = stmt.kind
        if kind == "assign":
            self.emit(depth, f"{self.assign_prefix(stmt.target)}{render_expr(stmt.value)};")
        elif kind == "array_read":
            self.emit(
                depth,
                f"{self.assign_prefix(stmt.target)}"
                f"{render_expr(stmt.array)}[{render_expr(stmt.index)}];",
            )
        elif kind == "array_write":
            self.emit(
                depth,
                f"{render_expr(stmt.array)}[{render_expr(stmt.index)}] = "
                f"{render_expr(stmt.value)};",
            )
        elif kind == "array_alloc":
            self.emit(
                depth,
                f"{self.assign_prefix(stmt.target)}alloc({render_expr(stmt.size)});",
            )
        elif kind == "call":
            args = ", ".join(render_expr(a) for a in stmt.args)
            callee = stmt.callee_name or stmt.callee_ref
            if stmt.target is None:
                self.emit(depth, f"{callee}({args});")
            else:
                self.emit(depth, f"{self.assign_prefix(stmt.target)}{callee}({args});")
        elif kind == "print":
            self.emit(depth, f"print({render_expr(stmt.value)});")
        elif kind == "read_input":
            self.emit(depth, f"{self.assign_prefix(stmt.target)}read_input();")
        elif kind == "assertion":
            self.emit(depth, f"assert({render_expr(stmt.cond)});")
        else:
            raise UnsupportedRepresentationError(
                f"statement kind {kind!r} has no source form"
            )

    def render_region(self, block_id: str | None, stop: str | None, depth: int) -> None:
        while block_id is not None and block_id != stop:
            block = self.fn.blocks[block_id]
            for stmt in block.statements:
                self.render_statement(stmt, depth)
            term = block.terminator
            if isinstance(term, Return):
                if term.value is None:
                    self.emit(depth, "return;")
                else:
                    self.emit(depth, f"return {render_expr(term.value)};")
                return
            if isinstance(term, Jump):
                block_id = term.target
                continue
            if isinstance(term, Branch):
                cond = render_expr(term.cond)
                if block_id in self.loop_headers:
                    self.emit(depth, f"while ({cond}) {{")
                    self.render_region(term.then_target, block_id, depth + 1)
                    self.emit(depth, "}")
                    block_id = term.else_target
                    continue
                join = self.pdoms.ipdom[block_id]
                self.emit(depth, f"if ({cond}) {{")
                self.render_region(term.then_target, None if join == EXIT else join, depth + 1)
                if term.else_target != join:
                    self.emit(depth, "} else {")
                    self.render_region(
                        term.else_target, None if join == EXIT else join, depth + 1
                    )
                self.emit(depth, "}")
                block_id = None if join == EXIT else join
                continue
            if isinstance(term, Halt):
                raise UnsupportedRepresentationError(
                    "program has opaque blocks and cannot be printed"
                )
            raise UnsupportedRepresentationError(f"unknown terminator {term!r}")

    def render(self) -> list[str]:
        fn = self.fn
        params = ", ".join(f"{n}: {render_type(t)}" for n, t in fn.params)
        header = f"fn {fn.name}({params}) -> {render_type(fn.return_type)}"
        if fn.declared_error_return is not None:
            header += f" errval {render_literal(fn.declared_error_return)}"
        if fn.external:
            return [f"extern {header};"]
        self.emit(0, header + " {")
        for name in self._undeclared_reads():
            vtype = fn.locals.get(name, INT)
            default = {INT: "0", BOOL: "false"}.get(vtype, "nil")
            self.declared.add(name)
            self.emit(1, f"let {name}: {render_type(vtype)} = {default};")
        self.render_region(fn.entry_block, None, 1)
        self.emit(0, "}")
        return self.lines

    def _undeclared_reads(self) -> list[str]:
        """Locals read somewhere reachable but assigned nowhere reachable.

        Happens only after patching removed a block holding the sole
        assignment; unpatched programs never need this.
        """
        reachable = set()
        stack = [self.fn.entry_block]
        while stack:
            bid = stack.pop()
            if bid in reachable:
                continue
            reachable.add(bid)
            stack.extend(self.fn.blocks[bid].successors)
        assigned: set[str] = set()
        used: set[str] = set()

        def scan(expr):
            if isinstance(expr, Var):
                used.add(expr.name)
            elif isinstance(expr, Unary):
                scan(expr.operand)
            elif isinstance(expr, Binary):
                scan(expr.left)
                scan(expr.right)

        for bid in reachable:
            block = self.fn.blocks[bid]
            for stmt in block.statements:
                target = getattr(stmt, "target", None)
                if target is not None:
                    assigned.add(target)
                for attr in ("value", "index", "size", "cond", "array"):
                    child = getattr(stmt, attr, None)
                    if child is not None:
                        scan(child)
                if stmt.kind == "call":
                    for arg in stmt.args:
                        scan(arg)
            term = block.terminator
            for attr in ("cond", "value"):
                child = getattr(term, attr, None)
                if child is not None:
                    scan(child)
        params = {name for name, _ in self.fn.params}
        missing = used - assigned - params
        return sorted(missing)


def pretty_print(program: IRProgram) -> str:
    """Render a lowered program as MiniLang source text."""
    if not program.executable:
        raise UnsupportedRepresentationError(
            "graph-imported programs have no statement bodies to print"
        )
    chunks: list[str] = []
    for fn in program.functions.values():
        chunks.extend(_FunctionRenderer(fn).render())
        chunks.append("")
    return "\n".join(chunks).rstrip() + "\n"
